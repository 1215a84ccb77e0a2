//! The JSON run report.

use kakeya_core::conditions::KakeyaReport;
use kakeya_core::fixtures::FixtureInfo;
use kakeya_core::geom::KakeyaCheck;
use kakeya_core::pressure::GibbsReport;
use kakeya_core::tractable::{BallConditionReport, DiameterComparability};
use kakeya_core::{BoxDimEstimate, DimensionBracket, PerturbationBounds, Vec2};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Field order is the serialization order; `wall_time_s` stays last so
/// reports of identical runs differ only in their final field.
#[derive(Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub config_digest: Option<String>,
    pub seeds: Vec<u64>,
    pub results: Results,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_digest: None,
            seeds: Vec::new(),
            results: Results::default(),
            error: None,
            wall_time_s: 0.0,
        }
    }
}

#[derive(Default, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kakeya: Option<KakeyaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<DimensionBracket>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gibbs: Option<GibbsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_dimension: Option<BoxDimEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<BoxCrossCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kakeya_bound: Option<KakeyaBoundResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ball_condition: Option<BallConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparability: Option<DiameterComparability>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub examples: Option<Vec<FixtureInfo>>,
}

#[derive(Serialize)]
pub struct RenderResult {
    pub points: usize,
    pub bounding_box: (Vec2, Vec2),
    pub width: usize,
    pub height: usize,
    pub occupied: usize,
}

#[derive(Serialize)]
pub struct BoxCrossCheck {
    pub bracket_midpoint: f64,
    pub difference: f64,
}

#[derive(Serialize)]
pub struct KakeyaBoundResult {
    pub bound: f64,
    pub check: Option<KakeyaCheck>,
}

#[derive(Serialize)]
pub struct PerturbResult {
    pub bounds: PerturbationBounds,
    pub widened_bracket: Option<(f64, f64)>,
}

/// Hex SHA-256 of a configuration document.
pub fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
