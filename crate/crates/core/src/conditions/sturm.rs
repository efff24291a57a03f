//! Discrete Sturm–Liouville problems
//!
//! ```text
//! Δ(p(t-1) Δx(t-1)) + q(t) x(t) + λ x(t) = f(x(t)),   t = a+1 ..= b+1
//! a11 x(a) + a12 Δx(a) = 0,   a21 x(b+1) + a22 Δx(b+1) = 0
//! ```
//!
//! rewritten as a second-order recurrence in `y(s) = x(a + s)` with
//! `N = b - a + 1` equations and lag `m = 2`.

use nalgebra::DMatrix;

use super::ConditionsError;
use crate::problem::{Nonlinearity, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SturmLiouville {
    pub a: i64,
    pub b: i64,
    /// `p(a) ..= p(b+1)`, length `b - a + 2`.
    pub p: Vec<f64>,
    /// `q(a+1) ..= q(b+1)`, length `b - a + 1`.
    pub q: Vec<f64>,
    pub lambda: f64,
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    /// `f(x)` in the expression grammar.
    pub f: String,
}

impl SturmLiouville {
    /// `Δ²x(t-1) + λ x(t) = f(x(t))` with `x(0) = x(interior + 1) = 0`.
    pub fn dirichlet_laplacian(interior: usize, lambda: f64, f: &str) -> Self {
        SturmLiouville {
            a: 0,
            b: interior as i64,
            p: vec![1.0; interior + 2],
            q: vec![0.0; interior + 1],
            lambda,
            a11: 1.0,
            a12: 0.0,
            a21: 1.0,
            a22: 0.0,
            f: f.to_string(),
        }
    }
}

/// `k`-th eigenvalue `2 - 2 cos(k π / (interior + 1))` of the Dirichlet
/// second-difference operator on `interior` points.
pub fn dirichlet_eigenvalue(interior: usize, k: usize) -> f64 {
    2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (interior as f64 + 1.0)).cos()
}

/// Expands the Δ-form into `y(s+2) + a1(s) y(s+1) + a0(s) y(s) = f(y(s+1)) /
/// p(a+s+1)` with `a0 = p(a+s) / p(a+s+1)` and `a1 = (q + λ - p(a+s+1) -
/// p(a+s)) / p(a+s+1)`, and encodes the two-point conditions in `B_0` and
/// `B_N`.
pub fn sturm_liouville(sl: &SturmLiouville) -> Result<ProblemSpec, ConditionsError> {
    if sl.b < sl.a + 1 {
        return Err(ConditionsError::InvalidParameter(format!(
            "need b > a, got a = {}, b = {}",
            sl.a, sl.b
        )));
    }
    let horizon = (sl.b - sl.a + 1) as usize;
    if sl.p.len() != horizon + 1 || sl.q.len() != horizon {
        return Err(ConditionsError::InvalidParameter(format!(
            "p needs {} values and q needs {horizon}",
            horizon + 1
        )));
    }
    if let Some(i) = sl.p.iter().position(|&v| !(v > 0.0)) {
        return Err(ConditionsError::InvalidParameter(format!(
            "p must be positive, p({}) = {}",
            sl.a + i as i64,
            sl.p[i]
        )));
    }
    if (sl.a11 == 0.0 && sl.a12 == 0.0) || (sl.a21 == 0.0 && sl.a22 == 0.0) {
        return Err(ConditionsError::InvalidParameter(
            "degenerate boundary row".into(),
        ));
    }
    let p = &sl.p;
    let a0: Vec<f64> = (0..horizon).map(|s| p[s] / p[s + 1]).collect();
    let a1: Vec<f64> = (0..horizon)
        .map(|s| (sl.q[s] + sl.lambda - p[s + 1] - p[s]) / p[s + 1])
        .collect();
    let mut boundary = vec![DMatrix::zeros(2, 2); horizon + 1];
    boundary[0][(0, 0)] = sl.a11 - sl.a12;
    boundary[0][(0, 1)] = sl.a12;
    boundary[horizon][(1, 0)] = sl.a21 - sl.a22;
    boundary[horizon][(1, 1)] = sl.a22;
    let mut g = Nonlinearity::parse(&sl.f).map_err(crate::problem::ProblemError::from)?;
    if p[1..].iter().any(|&v| v != 1.0) {
        g = g.with_scale(p[1..].iter().map(|v| 1.0 / v).collect());
    }
    Ok(ProblemSpec::new(2, horizon, 2, vec![a0, a1], boundary, g)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{kernel_dimension, LinearAnalysis, LinearError};
    use crate::linalg::DEFAULT_RANK_TOL;

    #[test]
    fn dirichlet_encoding() {
        let spec = sturm_liouville(&SturmLiouville::dirichlet_laplacian(8, 0.3, "x")).unwrap();
        assert_eq!(spec.horizon(), 9);
        let b = spec.boundary();
        assert_eq!(b[0].as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b[9][(1, 0)], 1.0);
        assert_eq!(b[9].iter().filter(|v| **v != 0.0).count(), 1);
        assert!(b[1..9].iter().all(|m| m.iter().all(|v| *v == 0.0)));
        assert_eq!(spec.coeff(0, 4), 1.0);
        assert!((spec.coeff(1, 4) - (0.3 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn resonant_exactly_at_eigenvalues() {
        for k in 1..=8 {
            let lambda = dirichlet_eigenvalue(8, k);
            let spec = sturm_liouville(&SturmLiouville::dirichlet_laplacian(8, lambda, "0")).unwrap();
            assert_eq!(kernel_dimension(&spec, DEFAULT_RANK_TOL).unwrap(), 1, "k = {k}");
        }
        let spec = sturm_liouville(&SturmLiouville::dirichlet_laplacian(8, 0.5, "0")).unwrap();
        assert_eq!(LinearAnalysis::new(&spec).unwrap_err(), LinearError::NotResonant);
    }

    #[test]
    fn variable_coefficients_scale_g() {
        let sl = SturmLiouville {
            a: 2,
            b: 5,
            p: vec![1.0, 2.0, 4.0, 2.0, 1.0],
            q: vec![0.0, 1.0, 0.0, 0.0],
            lambda: 0.5,
            a11: 1.0,
            a12: 1.0,
            a21: 0.0,
            a22: 1.0,
            f: "1".into(),
        };
        let spec = sturm_liouville(&sl).unwrap();
        assert_eq!(spec.horizon(), 4);
        assert_eq!(spec.coeff(0, 1), 0.5);
        assert!((spec.coeff(1, 1) - (1.0 + 0.5 - 4.0 - 2.0) / 4.0).abs() < 1e-15);
        assert_eq!(spec.g(1, 0.0).unwrap(), 0.25);
        // Pure Neumann-type row at the left end.
        assert_eq!(spec.boundary()[0].row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut sl = SturmLiouville::dirichlet_laplacian(4, 1.0, "x");
        sl.p[2] = 0.0;
        assert!(sturm_liouville(&sl).is_err());
        let mut sl = SturmLiouville::dirichlet_laplacian(4, 1.0, "x");
        sl.a21 = 0.0;
        assert!(sturm_liouville(&sl).is_err());
    }
}
