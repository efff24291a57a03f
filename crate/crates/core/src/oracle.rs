//! Brute-force verification on the scalar unknowns `y(0), ..., y(N+n-1)`.
//!
//! The full system stacks the `N` recurrence equations and the `n`
//! boundary equations into one square map and solves it by damped Newton.
//! Nothing here goes through the companion-form projections, so agreement
//! with the solver is a genuine cross-check.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::EvalError;
use crate::linalg::{null_space, pinv_solve, svd_sorted};
use crate::problem::{Nonlinearity, ProblemError, ProblemSpec, ScalarTrajectory};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-11;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_STARTS: usize = 64;
pub const DEFAULT_SEED: u64 = 0x5eed;

/// `R(y) = L y - G(y)` where `L` holds the recurrence and boundary rows and
/// `G(y)_t = g(t, y(t+m-1))` for the first `N` rows.
#[derive(Debug, Clone)]
pub struct FullSystem {
    spec: ProblemSpec,
    linear: DMatrix<f64>,
}

impl FullSystem {
    pub fn new(spec: &ProblemSpec) -> Self {
        FullSystem {
            spec: spec.clone(),
            linear: linear_matrix(spec),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.nrows()
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.spec
    }

    /// The affine part `L`.
    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn residual(&self, y: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        let mut r = &self.linear * y;
        let lag = self.spec.lag() - 1;
        for t in 0..self.spec.horizon() {
            r[t] -= self.spec.g(t, y[t + lag])?;
        }
        Ok(r)
    }

    /// Analytic linear part; central differences with step
    /// `1e-6 (1 + |y|)` in the `g` column.
    pub fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>, EvalError> {
        let mut jac = self.linear.clone();
        let lag = self.spec.lag() - 1;
        for t in 0..self.spec.horizon() {
            let x = y[t + lag];
            let h = 1e-6 * (1.0 + x.abs());
            let slope = (self.spec.g(t, x + h)? - self.spec.g(t, x - h)?) / (2.0 * h);
            jac[(t, t + lag)] -= slope;
        }
        Ok(jac)
    }
}

fn linear_matrix(spec: &ProblemSpec) -> DMatrix<f64> {
    let n = spec.order();
    let horizon = spec.horizon();
    let dim = horizon + n;
    let mut l = DMatrix::zeros(dim, dim);
    for t in 0..horizon {
        l[(t, t + n)] = 1.0;
        for j in 0..n {
            l[(t, t + j)] += spec.coeff(j, t);
        }
    }
    // Row r of sum_i B_i x(i) with x(i) = (y(i), ..., y(i+n-1)).
    for (i, b) in spec.boundary().iter().enumerate() {
        for r in 0..n {
            for j in 0..n {
                l[(horizon + r, i + j)] += b[(r, j)];
            }
        }
    }
    l
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonOutcome {
    pub y: ScalarTrajectory,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton with Armijo backtracking on `|R|^2`, from `y0`. Succeeds
/// when `|R|_inf <= tol`; `None` on stall or iteration cap.
pub fn newton_solve(
    fs: &FullSystem,
    y0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Option<NewtonOutcome>, EvalError> {
    let mut y = y0.clone();
    let mut r = fs.residual(&y)?;
    for iteration in 0..=max_iter {
        let norm = r.amax();
        if norm <= tol {
            return Ok(Some(NewtonOutcome {
                y: ScalarTrajectory(y.iter().copied().collect()),
                iterations: iteration,
                residual: norm,
            }));
        }
        if iteration == max_iter || !norm.is_finite() {
            break;
        }
        let jac = fs.jacobian(&y)?;
        let step = match jac.clone().lu().solve(&(-&r)) {
            Some(step) if step.iter().all(|v| v.is_finite()) => step,
            _ => pinv_solve(&jac, &(-&r), 1e-12),
        };
        // Armijo backtracking on phi(l) = |R(y + l step)|^2 with the
        // safeguarded quadratic model phi(0) = f0, phi'(0) = -2 f0.
        let f0 = r.norm_squared();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &y + &step * lambda;
            let Ok(rt) = fs.residual(&trial) else {
                lambda *= 0.5;
                continue;
            };
            let ft = rt.norm_squared();
            if ft <= (1.0 - 1e-4 * lambda) * f0 {
                y = trial;
                r = rt;
                accepted = true;
                break;
            }
            let model = f0 * lambda * lambda / (ft - f0 + 2.0 * f0 * lambda);
            lambda = if model.is_finite() {
                model.clamp(0.1 * lambda, 0.5 * lambda)
            } else {
                0.5 * lambda
            };
        }
        if !accepted {
            break;
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub start_index: usize,
    pub iterations: usize,
    pub recurrence_residual: f64,
    pub boundary_residual: f64,
    pub y: ScalarTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultistartReport {
    pub starts: usize,
    pub box_radius: f64,
    pub seed: u64,
    pub tol: f64,
    pub converged: usize,
    pub solutions: Vec<OracleSolution>,
}

/// Residuals of `y` re-evaluated through the problem definition.
pub fn residuals(spec: &ProblemSpec, y: &ScalarTrajectory) -> Result<(f64, f64), ProblemError> {
    let sup = |r: Vec<f64>| r.into_iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok((
        sup(spec.recurrence_residuals(y)?),
        sup(spec.boundary_residuals(y)?),
    ))
}

/// `starts` Newton runs from uniform points in `[-box, box]^{N+n}`. Start
/// points are drawn in order from one seeded stream, runs go in parallel,
/// and distinct solutions are kept in start order, merging any within
/// `1e-6 (1 + scale)` in sup distance of an earlier one.
pub fn multistart(
    fs: &FullSystem,
    starts: usize,
    box_radius: f64,
    seed: u64,
    tol: f64,
) -> Result<MultistartReport, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = fs.dim();
    let points: Vec<DVector<f64>> = (0..starts)
        .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-box_radius..=box_radius)))
        .collect();
    let runs: Vec<Result<Option<NewtonOutcome>, EvalError>> = points
        .par_iter()
        .map(|y0| newton_solve(fs, y0, tol, DEFAULT_MAX_ITER))
        .collect();
    let mut solutions: Vec<OracleSolution> = Vec::new();
    let mut converged = 0;
    for (start_index, run) in runs.into_iter().enumerate() {
        let Some(outcome) = run? else { continue };
        converged += 1;
        let scale = outcome.y.0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let duplicate = solutions
            .iter()
            .any(|s| s.y.sup_distance(&outcome.y) <= 1e-6 * (1.0 + scale));
        if duplicate {
            continue;
        }
        let (rec, bnd) = residuals(fs.problem(), &outcome.y)?;
        solutions.push(OracleSolution {
            start_index,
            iterations: outcome.iterations,
            recurrence_residual: rec,
            boundary_residual: bnd,
            y: outcome.y,
        });
    }
    Ok(MultistartReport {
        starts,
        box_radius,
        seed,
        tol,
        converged,
        solutions,
    })
}

/// Nullity of the homogeneous linear problem in the scalar unknowns, with
/// an orthonormal basis of its solutions. Singular values below
/// `rank_tol * sigma_max` count as zero.
pub fn linear_nullity(spec: &ProblemSpec, rank_tol: f64) -> (usize, Vec<DVector<f64>>) {
    let basis = null_space(&linear_matrix(spec), rank_tol);
    (basis.len(), basis)
}

/// A random instance whose linear part is resonant with a one-dimensional
/// kernel: random coefficients with `|a_0(t)|` in `[0.5, 2]`, random
/// boundary matrices for `i < N`, and `B_N` solved so that
/// `sum_i B_i Phi(i)` equals a prescribed rank `n - 1` matrix.
pub fn random_resonant<R: Rng>(rng: &mut R, n: usize, horizon: usize, g: &str) -> ProblemSpec {
    let g = Nonlinearity::parse(g).expect("generator nonlinearity parses");
    loop {
        let lag = rng.gen_range(1..=n);
        let coeffs: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                (0..horizon)
                    .map(|_| {
                        if j == 0 {
                            let mag = rng.gen_range(0.5..=2.0);
                            if rng.gen_bool(0.5) {
                                mag
                            } else {
                                -mag
                            }
                        } else {
                            rng.gen_range(-1.0..=1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut phi = vec![DMatrix::<f64>::identity(n, n)];
        for t in 0..horizon {
            let mut a = DMatrix::zeros(n, n);
            for r in 0..n - 1 {
                a[(r, r + 1)] = 1.0;
            }
            for j in 0..n {
                a[(n - 1, j)] = -coeffs[j][t];
            }
            let next = a * &phi[t];
            phi.push(next);
        }
        let phi_n = &phi[horizon];
        let sv = svd_sorted(phi_n).1;
        if sv[n - 1] < 1e-8 * sv[0] || sv[0] > 1e8 {
            continue;
        }
        let mut boundary: Vec<DMatrix<f64>> = (0..horizon)
            .map(|i| {
                if i == 0 || rng.gen_bool(0.5) {
                    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0))
                } else {
                    DMatrix::zeros(n, n)
                }
            })
            .collect();
        let w = random_orthogonal(rng, n);
        let v = random_orthogonal(rng, n);
        let sigma = DMatrix::from_fn(n, n, |i, j| {
            if i == j && i + 1 < n {
                rng.gen_range(0.5..=2.0)
            } else {
                0.0
            }
        });
        let target = &w * sigma * v.transpose();
        let mut partial = DMatrix::zeros(n, n);
        for (i, b) in boundary.iter().enumerate() {
            partial += b * &phi[i];
        }
        let Some(phi_n_inv) = phi_n.clone().try_inverse() else {
            continue;
        };
        let b_last = (target - partial) * phi_n_inv;
        if b_last.amax() > 1e6 {
            continue;
        }
        boundary.push(b_last);
        if let Ok(spec) = ProblemSpec::new(n, horizon, lag, coeffs, boundary, g.clone()) {
            return spec;
        }
    }
}

fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0));
        let qr = m.qr();
        let r = qr.r();
        if (0..n).all(|i| r[(i, i)].abs() > 1e-3) {
            return qr.q();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{sturm_liouville, SturmLiouville};
    use crate::golden;

    #[test]
    fn zero_nonlinearity_from_zero() {
        let fs = FullSystem::new(&golden::spec("0").unwrap());
        let out = newton_solve(&fs, &DVector::zeros(fs.dim()), 1e-12, 10).unwrap().unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.y.0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn affine_problem_converges_in_one_step() {
        // g(t, x) = x + 1 on the Dirichlet Laplacian away from an eigenvalue.
        let sl = SturmLiouville::dirichlet_laplacian(6, 0.7, "x + 1");
        let fs = FullSystem::new(&sturm_liouville(&sl).unwrap());
        let y0 = DVector::from_fn(fs.dim(), |i, _| (i as f64).sin() * 3.0);
        let out = newton_solve(&fs, &y0, 1e-9, 10).unwrap().unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn nullity_matches_known_cases() {
        let (k, basis) = linear_nullity(&golden::spec("0").unwrap(), 1e-10);
        assert_eq!(k, 1);
        // Basis parallel to the scalar trajectory induced by the period-3
        // kernel solution, y(t) = (2, -1, -1, 2, -1, -1, ...).
        let y: Vec<f64> = (0..10).map(|t| if t % 3 == 0 { 2.0 } else { -1.0 }).collect();
        let y = DVector::from_vec(y).normalize();
        assert!((basis[0].dot(&y).abs() - 1.0).abs() < 1e-12);

        let sl = SturmLiouville::dirichlet_laplacian(8, 0.5, "0");
        assert_eq!(linear_nullity(&sturm_liouville(&sl).unwrap(), 1e-10).0, 0);

        let mut b = vec![DMatrix::zeros(1, 1); 6];
        b[0][(0, 0)] = 1.0;
        b[5][(0, 0)] = -1.0;
        let spec = ProblemSpec::new(1, 5, 1, vec![vec![-1.0; 5]], b, Nonlinearity::parse("0").unwrap()).unwrap();
        let (k, basis) = linear_nullity(&spec, 1e-10);
        assert_eq!(k, 1);
        let first = basis[0][0];
        assert!(basis[0].iter().all(|v| (v - first).abs() < 1e-12));
    }

    #[test]
    fn multistart_is_reproducible_and_unique_when_nonresonant() {
        let sl = SturmLiouville::dirichlet_laplacian(5, 0.5, "0");
        let fs = FullSystem::new(&sturm_liouville(&sl).unwrap());
        let a = multistart(&fs, 16, 5.0, 7, 1e-10).unwrap();
        let b = multistart(&fs, 16, 5.0, 7, 1e-10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.converged, 16);
        assert_eq!(a.solutions.len(), 1);
        assert!(a.solutions[0].y.0.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn generator_produces_resonant_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            for horizon in [3, 7, 12] {
                let spec = random_resonant(&mut rng, n, horizon, "0");
                assert_eq!(spec.order(), n);
                assert_eq!(linear_nullity(&spec, 1e-10).0, 1, "n = {n}, N = {horizon}");
            }
        }
    }
}
