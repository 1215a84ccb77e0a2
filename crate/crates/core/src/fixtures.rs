//! Named example systems.

use serde::Serialize;

use crate::ifs::IfsSystem;
use crate::mat2::{Mat2, Vec2};

fn build(parts: &[(Mat2, Vec2)]) -> IfsSystem {
    IfsSystem::from_parts(parts).expect("fixture parameters must give a valid system")
}

/// The two-map family with `A₁ = [[r, r+ε], [ε, r]]`, `A₂ = [[r, ε], [r+ε, r]]`
/// and translations `(−0.3, −0.3)`, `(0.3, 0.3)`.
pub fn edgar(r: f64, eps: f64) -> IfsSystem {
    edgar_with(r, eps, Vec2::new(-0.3, -0.3), Vec2::new(0.3, 0.3))
}

pub fn edgar_with(r: f64, eps: f64, a1: Vec2, a2: Vec2) -> IfsSystem {
    build(&[(Mat2::new(r, r + eps, eps, r), a1), (Mat2::new(r, eps, r + eps, r), a2)])
}

pub const PAIR64_A1: Mat2 = Mat2::new(0.35, 0.40, 0.30, 0.35);
pub const PAIR64_A2: Mat2 = Mat2::new(0.40, 0.45, 0.45, 0.50);

/// Two positive matrices with the first map linear and the second
/// translated by `a2`.
pub fn pair64(a2: Vec2) -> IfsSystem {
    build(&[(PAIR64_A1, Vec2::ZERO), (PAIR64_A2, a2)])
}

/// Linear part of map `j` (1-based, `j ≥ 3`) of [`family65`].
pub fn family65_matrix(j: usize) -> Mat2 {
    let j = j as f64;
    Mat2::new(0.5, 0.5, 1.0 / (3.0 * j - 1.0), 1.0 / (3.0 * j))
}

/// `κ ≥ 3` maps: the two of [`pair64`] with `a₂ = (1, 1)` followed by
/// `[[1/2, 1/2], [1/(3j−1), 1/(3j)]]` translated by `(j − 2, 0)`.
pub fn family65(kappa: usize) -> IfsSystem {
    assert!(kappa >= 3, "family65 needs kappa >= 3");
    let mut parts = vec![(PAIR64_A1, Vec2::ZERO), (PAIR64_A2, Vec2::new(1.0, 1.0))];
    for j in 3..=kappa {
        parts.push((family65_matrix(j), Vec2::new((j - 2) as f64, 0.0)));
    }
    build(&parts)
}

/// Two halving maps whose attractor is `[0, 1] × {0}`.
pub fn unit_interval() -> IfsSystem {
    build(&[(Mat2::scalar(0.5), Vec2::ZERO), (Mat2::scalar(0.5), Vec2::new(0.5, 0.0))])
}

/// Three copies of `diag(1/2, 1/4)` with distinct translations.
pub fn diagonal_triple() -> IfsSystem {
    let a = Mat2::diag(0.5, 0.25);
    build(&[(a, Vec2::ZERO), (a, Vec2::new(0.5, 0.0)), (a, Vec2::new(0.0, 0.75))])
}

/// Four similitudes with the given ratio placed at the corners of the
/// unit square.
pub fn four_corners(ratio: f64) -> IfsSystem {
    let a = Mat2::scalar(ratio);
    let s = 1.0 - ratio;
    build(&[
        (a, Vec2::ZERO),
        (a, Vec2::new(s, 0.0)),
        (a, Vec2::new(0.0, s)),
        (a, Vec2::new(s, s)),
    ])
}

/// Three halving maps onto the corners of a right triangle.
pub fn sierpinski() -> IfsSystem {
    let a = Mat2::scalar(0.5);
    build(&[(a, Vec2::ZERO), (a, Vec2::new(0.5, 0.0)), (a, Vec2::new(0.0, 0.5))])
}

/// Two identical maps.
pub fn total_overlap() -> IfsSystem {
    let a = Mat2::scalar(0.5);
    build(&[(a, Vec2::new(0.25, 0.0)), (a, Vec2::new(0.25, 0.0))])
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureInfo {
    pub name: &'static str,
    pub parameters: &'static str,
    pub description: &'static str,
}

pub fn catalog() -> Vec<FixtureInfo> {
    vec![
        FixtureInfo {
            name: "edgar",
            parameters: "--r R --eps EPS [--a1 X,Y] [--a2 X,Y]  (defaults r=0.4, eps=0.1, a1=-0.3,-0.3, a2=-a1)",
            description: "A1=[[r,r+eps],[eps,r]], A2=[[r,eps],[r+eps,r]]; Kakeya type for small eps>0",
        },
        FixtureInfo {
            name: "pair64",
            parameters: "[--a2 X,Y]  (default 1,1)",
            description: "A1=[[0.35,0.40],[0.30,0.35]] linear, A2=[[0.40,0.45],[0.45,0.50]]+a2",
        },
        FixtureInfo {
            name: "family65",
            parameters: "--kappa K  (K >= 3, default 5)",
            description: "pair64 with a2=(1,1) plus A_j=[[1/2,1/2],[1/(3j-1),1/(3j)]] translated by (j-2,0)",
        },
        FixtureInfo { name: "unit-interval", parameters: "", description: "two maps 0.5*Id; attractor [0,1]x{0}" },
        FixtureInfo { name: "diagonal-triple", parameters: "", description: "three maps diag(1/2,1/4)" },
        FixtureInfo { name: "four-corners", parameters: "[--ratio S]  (default 0.5)", description: "four similitudes at the corners of the unit square" },
        FixtureInfo { name: "sierpinski", parameters: "", description: "three halving maps; dimension log3/log2" },
        FixtureInfo { name: "total-overlap", parameters: "", description: "two identical halving maps" },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::spectral_radius;

    #[test]
    fn spectral_radius_at_r04_eps01() {
        let sys = edgar(0.4, 0.1);
        for i in 0..2 {
            let rho = spectral_radius(sys.linear(i));
            assert!((rho - 0.6236).abs() < 5e-4, "{rho}");
        }
    }

    #[test]
    fn family_matrices() {
        let sys = family65(6);
        assert_eq!(sys.kappa(), 6);
        assert_eq!(*sys.linear(3), Mat2::new(0.5, 0.5, 1.0 / 11.0, 1.0 / 12.0));
    }
}
