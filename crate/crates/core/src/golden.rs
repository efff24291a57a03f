//! The embedded eight-step example: a second-order recurrence with
//! `a0 = a1 = 1` and conditions at `t = 2, 5, 8`, whose kernel solution has
//! period three. Reference values are stated in the bases `u = (2, -1)` and
//! `w = (-1, 1)`; [`compare`] rescales the computed unit bases to them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::conditions::SignSets;
use crate::linear::LinearAnalysis;
use crate::problem::{Nonlinearity, ProblemError, ProblemSpec};

pub const ORDER: usize = 2;
pub const HORIZON: usize = 8;
pub const LAG: usize = 2;

pub const LAMBDA: [[f64; 2]; 2] = [[-1.0, -2.0], [-1.0, -2.0]];
pub const U_REFERENCE: [f64; 2] = [2.0, -1.0];
pub const W_REFERENCE: [f64; 2] = [-1.0, 1.0];
pub const OPP: [usize; 1] = [2];
pub const OMM: [usize; 1] = [3];

/// `S(t)` in the reference basis, period three.
pub fn s_reference(t: usize) -> [f64; 2] {
    match t % 3 {
        0 => [2.0, -1.0],
        1 => [-1.0, -1.0],
        _ => [-1.0, 2.0],
    }
}

/// `Psi(t)` in the reference basis, `t` in `0..8`.
pub fn psi_reference(t: usize) -> [f64; 2] {
    match t {
        2 => [1.0, 1.0],
        3 => [0.0, -1.0],
        4 => [-1.0, 0.0],
        _ => [0.0, 0.0],
    }
}

/// The example with nonlinearity `g`.
pub fn spec(g: &str) -> Result<ProblemSpec, ProblemError> {
    let mut boundary = vec![DMatrix::zeros(2, 2); HORIZON + 1];
    boundary[2] = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    boundary[5] = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    boundary[8] = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    ProblemSpec::new(
        ORDER,
        HORIZON,
        LAG,
        vec![vec![1.0; HORIZON], vec![1.0; HORIZON]],
        boundary,
        Nonlinearity::parse(g)?,
    )
}

/// The log-growth nonlinearity `gamma ln(1 + x)` for `x >= 0`,
/// `beta ln(1 - x)` for `x < 0`, with `d = e^gamma (1 + c) - 1`.
///
/// `gamma` must exceed `ln(1+c) / (ln(1+c) - 1)` and the largest root `x_c`
/// of `e^x (1 + c) - 1 - 2c - 3 A ln(1+c) x^2`; then `g(-d) < g(c)` and
/// `d > (c s_max + A |g|_d (s_max + s_min)) / s_min` with `s_max / s_min = 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogFamily {
    pub c: f64,
    pub beta: f64,
    pub gamma: f64,
    pub d: f64,
    pub x_c: f64,
    pub gamma_floor: f64,
    pub expr: String,
}

impl LogFamily {
    /// Picks `gamma = max(floor, x_c) + margin` for the given norm bound.
    pub fn new(a_bar: f64, c: f64, beta: f64, margin: f64) -> Self {
        assert!(c > std::f64::consts::E - 1.0, "need ln(1+c) > 1");
        let l = (1.0 + c).ln();
        let gamma_floor = l / (l - 1.0);
        let f = |x: f64| x.exp() * (1.0 + c) - 1.0 - (2.0 * c + 3.0 * a_bar * l * x * x);
        let x_c = largest_root(f);
        let gamma = gamma_floor.max(x_c) + margin;
        let d = gamma.exp() * (1.0 + c) - 1.0;
        LogFamily {
            c,
            beta,
            gamma,
            d,
            x_c,
            gamma_floor,
            expr: format!("if(x >= 0, {gamma:?}*ln(1+x), {beta:?}*ln(1-x))"),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.gamma * x.ln_1p()
        } else {
            self.beta * (-x).ln_1p()
        }
    }
}

/// Last sign change of `f` on `[0, 200]`, polished by bisection; zero when
/// `f` is positive throughout. `f` has a positive third derivative, so it
/// has at most three roots and stays positive beyond the last one.
fn largest_root(f: impl Fn(f64) -> f64) -> f64 {
    const STEP: f64 = 1e-2;
    let mut last = None;
    let mut prev = f(0.0);
    for k in 1..=20_000 {
        let x = k as f64 * STEP;
        let fx = f(x);
        if (prev <= 0.0) != (fx <= 0.0) {
            last = Some(x);
        }
        prev = fx;
    }
    let Some(hi) = last else {
        return 0.0;
    };
    let (mut lo, mut hi) = (hi - STEP, hi);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenCheck {
    pub name: String,
    pub passed: bool,
    pub error: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenReport {
    pub u_scale: f64,
    pub w_scale: f64,
    pub checks: Vec<GoldenCheck>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Compares an analysis of [`spec`] with the reference values at `tol`.
pub fn compare(la: &LinearAnalysis, sets: &SignSets, tol: f64) -> GoldenReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, error: f64, detail: String| {
        checks.push(GoldenCheck {
            name: name.into(),
            passed: error <= tol,
            error,
            detail,
        })
    };

    let lambda_ref = DMatrix::from_fn(2, 2, |i, j| LAMBDA[i][j]);
    push(
        "Lambda",
        (la.lambda() - &lambda_ref).amax(),
        format!("{:?}", rows(la.lambda())),
    );

    let u_ref = DVector::from_row_slice(&U_REFERENCE);
    let w_ref = DVector::from_row_slice(&W_REFERENCE);
    let u_scale = la.u().dot(&u_ref) / la.u().norm_squared();
    let w_scale = la.w().dot(&w_ref) / la.w().norm_squared();
    push(
        "u",
        (la.u() * u_scale - &u_ref).amax(),
        format!("u = {:?} x {u_scale}", la.u().as_slice()),
    );
    push(
        "w",
        (la.w() * w_scale - &w_ref).amax(),
        format!("w = {:?} x {w_scale}", la.w().as_slice()),
    );

    let s_err = (0..=HORIZON)
        .map(|t| (&la.s()[t] * u_scale - DVector::from_row_slice(&s_reference(t))).amax())
        .fold(0.0, f64::max);
    push("S", s_err, "period-3 table (2,-1), (-1,-1), (-1,2)".into());
    let psi_err = (0..HORIZON)
        .map(|t| (&la.psi()[t] * w_scale - DVector::from_row_slice(&psi_reference(t))).amax())
        .fold(0.0, f64::max);
    push("Psi", psi_err, "Psi(2) = (1,1), Psi(3) = (0,-1), Psi(4) = (-1,0)".into());

    let sets_ok = sets.opp == OPP
        && sets.omm == OMM
        && sets.opm.is_empty()
        && sets.omp.is_empty()
        && sets.o0.is_empty();
    push(
        "sign sets",
        if sets_ok { 0.0 } else { f64::INFINITY },
        format!(
            "O++ = {:?}, O+- = {:?}, O-+ = {:?}, O-- = {:?}, O0 = {:?}",
            sets.opp, sets.opm, sets.omp, sets.omm, sets.o0
        ),
    );

    GoldenReport {
        u_scale,
        w_scale,
        checks,
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{sign_sets, CheckOptions};

    #[test]
    fn analysis_matches_reference_tables() {
        let la = LinearAnalysis::new(&spec("0").unwrap()).unwrap();
        let sets = sign_sets(&la.psi_last(), &la.s_lag(), CheckOptions::default().sign_tol);
        let report = compare(&la, &sets, 1e-12);
        assert!(report.passed(), "{report:#?}");
        approx::assert_relative_eq!(report.u_scale, 5f64.sqrt(), max_relative = 1e-12);
        approx::assert_relative_eq!(report.w_scale, 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn log_family_inequalities() {
        for a_bar in [0.5, 1.0, 3.0, 10.0] {
            let fam = LogFamily::new(a_bar, 3.0, 0.5, 0.5);
            let l = 4f64.ln();
            assert!(fam.gamma > fam.gamma_floor && fam.gamma > fam.x_c);
            // g(-d) < g(c)
            assert!(fam.value(-fam.d) < fam.value(fam.c));
            // C3 with s_max / s_min = 2 and |g|_d = gamma ln(1 + d).
            let rhs = 2.0 * fam.c + 3.0 * a_bar * fam.gamma * fam.d.ln_1p();
            assert!(rhs < fam.d, "a_bar {a_bar}: {rhs} >= {}", fam.d);
            assert!(fam.d.ln_1p() < fam.gamma * l);
        }
    }

    #[test]
    fn largest_root_of_cubic_like() {
        let r = largest_root(|x| (x - 1.0) * (x - 2.0) * (x - 3.0));
        assert!((r - 3.0).abs() < 1e-12);
        assert_eq!(largest_root(|x| x + 1.0), 0.0);
    }
}
