//! Dimension and structure of planar self-affine sets: singular value
//! pressure, Kakeya-type conditions, rendering and box-dimension estimates.

pub mod conditions;
pub mod error;
pub mod fixtures;
pub mod geom;
pub mod ifs;
pub mod mat2;
pub mod numeric;
pub mod pressure;
pub mod tractable;

pub use conditions::{full_report, KakeyaReport, Verdict};
pub use error::{Error, Result};
pub use geom::{BoxDimEstimate, PointCloud, Raster, Rect};
pub use ifs::{load_system, AffineMap, ConfigDoc, IfsSystem, Word, DEFAULT_BUDGET};
pub use mat2::{Mat2, ScaledMat2, SingularData, Vec2};
pub use pressure::{dimension_bracket, DimensionBracket, PerturbationBounds, PressureBound};
pub use tractable::{BallConditionReport, IfsSystemD};
