#![allow(dead_code)]

use kakeya_core::ifs::{IfsSystem, Word};
use kakeya_core::mat2::{Mat2, Vec2};
use proptest::prelude::*;

/// Systems whose linear parts have entries in `(0.01, max)`.
pub fn positive_system(k: usize, max: f64) -> impl Strategy<Value = IfsSystem> {
    let e = 0.01..max;
    prop::collection::vec(((e.clone(), e.clone(), e.clone(), e), (-1.0..1.0f64, -1.0..1.0f64)), k).prop_filter_map(
        "valid system",
        move |v| {
            let parts: Vec<(Mat2, Vec2)> =
                v.iter().map(|&((a, b, c, d), (x, y))| (Mat2::new(a, b, c, d), Vec2::new(x, y))).collect();
            IfsSystem::from_parts(&parts).ok().filter(|s| (0..k).all(|i| s.linear(i).det().abs() > 1e-4))
        },
    )
}

pub fn word(k: usize, len: std::ops::Range<usize>) -> impl Strategy<Value = Word> {
    prop::collection::vec(0..k, len).prop_map(Word)
}

/// Smaller angle between the lines spanned by `u` and `v`, in `[0, π/2]`.
pub fn line_angle(u: Vec2, v: Vec2) -> f64 {
    u.cross(v).abs().atan2(u.dot(v).abs())
}
