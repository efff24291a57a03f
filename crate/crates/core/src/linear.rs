//! Linear part of the problem: the fundamental matrix, the boundary map
//! `Lambda = sum_i B_i Phi(i)`, kernel and cokernel vectors, the projections
//! `P` and `Q`, the right inverse `M_p` and a bound on `|M_p (I - Q)|`.
//!
//! `L x(t) = x(t+1) - A(t) x(t)` maps grid functions on `0..=N` satisfying
//! the boundary conditions to grid functions on `0..N`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::problem::{GridFunction, ProblemSpec};

/// Condition number of `Phi(t)` above which a warning is recorded.
pub const PHI_COND_WARN: f64 = 1e12;

/// Relative consistency tolerance used by [`LinearAnalysis::right_inverse`].
pub const IMAGE_TOL: f64 = 1e-9;

const PROBES: usize = 1000;
const PROBE_SEED: u64 = 0x5eed_0b0b;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("boundary map is invertible: the problem is not at resonance")]
    NotResonant,
    #[error("kernel of the boundary map has dimension {dim}; only 1 is supported")]
    KernelTooLarge { dim: usize },
    #[error("companion matrix A({t}) is numerically singular (a_0 = {a0:e})")]
    SingularPhi { t: usize, a0: f64 },
    #[error("cokernel weights vanish identically; Q is undefined")]
    DegenerateProjection,
    #[error("right-hand side is not in the image: consistency residual {residual:e}")]
    NotInImage { residual: f64 },
    #[error("grid function has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
}

/// Output of [`LinearAnalysis::norm_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBound {
    /// Block-row bound, an upper bound on `|M_p (I - Q)|`.
    pub upper: f64,
    /// Largest `|M_p (I - Q) h|` seen over random unit probes.
    pub probe_lower: f64,
    /// Output time attaining the block-row maximum.
    pub argmax_t: usize,
}

/// Precomputed linear data for one problem. Immutable after construction.
#[derive(Debug, Clone)]
pub struct LinearAnalysis {
    spec: ProblemSpec,
    rank_tol: f64,
    phi: Vec<DMatrix<f64>>,
    phi_inv: Vec<DMatrix<f64>>,
    lambda: DMatrix<f64>,
    lambda_sigma: Vec<f64>,
    u: DVector<f64>,
    w: DVector<f64>,
    v: DMatrix<f64>,
    s: GridFunction,
    psi: GridFunction,
    psi_norm_sq: f64,
    norm: NormBound,
    warnings: Vec<String>,
}

/// Fundamental matrices `Phi(0..=N)`, or the first singular step.
fn fundamental(spec: &ProblemSpec) -> Result<Vec<DMatrix<f64>>, LinearError> {
    let n = spec.order();
    let mut phi = Vec::with_capacity(spec.horizon() + 1);
    phi.push(DMatrix::identity(n, n));
    for t in 0..spec.horizon() {
        let a0 = spec.coeff(0, t);
        let scale = (0..n).map(|j| spec.coeff(j, t).abs()).fold(1.0, f64::max);
        if a0.abs() <= 1e-14 * scale {
            return Err(LinearError::SingularPhi { t, a0 });
        }
        let next = spec.companion(t) * &phi[t];
        phi.push(next);
    }
    Ok(phi)
}

fn boundary_map(spec: &ProblemSpec, phi: &[DMatrix<f64>]) -> (DMatrix<f64>, f64) {
    let n = spec.order();
    let mut lambda = DMatrix::zeros(n, n);
    let mut scale = 0.0;
    for (b, p) in spec.boundary().iter().zip(phi) {
        let term = b * p;
        scale += term.norm();
        lambda += term;
    }
    (lambda, scale)
}

/// `dim Ker(Lambda)` with singular values below `rank_tol * sum_i |B_i Phi(i)|_F`
/// counted as zero. The reference scale is the size of the summands, so an
/// exactly cancelling sum is recognized even when `n = 1`.
pub fn kernel_dimension(spec: &ProblemSpec, rank_tol: f64) -> Result<usize, LinearError> {
    let phi = fundamental(spec)?;
    let (lambda, scale) = boundary_map(spec, &phi);
    let sigma = linalg::singular_values(&lambda);
    Ok(linalg::nullity_of(&sigma, spec.order(), rank_tol, scale))
}

impl LinearAnalysis {
    pub fn new(spec: &ProblemSpec) -> Result<Self, LinearError> {
        Self::with_rank_tol(spec, DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(spec: &ProblemSpec, rank_tol: f64) -> Result<Self, LinearError> {
        let n = spec.order();
        let horizon = spec.horizon();
        let phi = fundamental(spec)?;
        let (lambda, scale) = boundary_map(spec, &phi);

        let (_, sigma, right) = linalg::svd_sorted(&lambda);
        let dim = linalg::nullity_of(&sigma, n, rank_tol, scale);
        match dim {
            0 => return Err(LinearError::NotResonant),
            1 => {}
            dim => return Err(LinearError::KernelTooLarge { dim }),
        }
        let mut u = right.column(n - 1).into_owned();
        linalg::sign_normalize(&mut u);
        let (_, _, left) = linalg::svd_sorted(&lambda.transpose());
        let mut w = left.column(n - 1).into_owned();

        let mut warnings = Vec::new();
        let mut phi_inv = Vec::with_capacity(horizon + 1);
        for (t, p) in phi.iter().enumerate() {
            let inv = p
                .clone()
                .lu()
                .try_inverse()
                .ok_or(LinearError::SingularPhi {
                    t,
                    a0: if t > 0 { spec.coeff(0, t - 1) } else { 1.0 },
                })?;
            let cond = p.norm() * inv.norm();
            if cond > PHI_COND_WARN {
                warnings.push(format!("Phi({t}) is ill-conditioned (cond ~ {cond:.3e})"));
            }
            phi_inv.push(inv);
        }

        let s = GridFunction::from_values(phi.iter().map(|p| p * &u).collect());
        let mut psi = backward_weights(spec, &w);
        // Fix the sign of w so that the weighted sum of S_m against Psi_n is
        // positive; the first-nonzero convention decides exact ties.
        let (lag, last) = (spec.lag() - 1, n - 1);
        let pairing: f64 = (0..horizon).map(|t| psi[t][last] * s[t][lag]).sum();
        let pair_scale: f64 = (0..horizon)
            .map(|t| (psi[t][last] * s[t][lag]).abs())
            .sum();
        let flip = if pairing.abs() > 1e-12 * pair_scale {
            pairing < 0.0
        } else {
            let mut probe = w.clone();
            linalg::sign_normalize(&mut probe);
            probe != w
        };
        if flip {
            w.neg_mut();
            psi = psi.scaled(-1.0);
        }
        let psi_norm_sq: f64 = psi.values().iter().map(|v| v.norm_squared()).sum();
        if psi_norm_sq == 0.0 {
            return Err(LinearError::DegenerateProjection);
        }
        let v = &u * u.transpose();
        let mut la = LinearAnalysis {
            spec: spec.clone(),
            rank_tol,
            phi,
            phi_inv,
            lambda,
            lambda_sigma: sigma,
            u,
            w,
            v,
            s,
            psi,
            psi_norm_sq,
            norm: NormBound {
                upper: 0.0,
                probe_lower: 0.0,
                argmax_t: 0,
            },
            warnings,
        };
        la.norm = la.compute_norm_bound();
        Ok(la)
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn phi(&self, t: usize) -> &DMatrix<f64> {
        &self.phi[t]
    }

    pub fn phi_inv(&self, t: usize) -> &DMatrix<f64> {
        &self.phi_inv[t]
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    /// Singular values of `Lambda`, descending.
    pub fn lambda_singular_values(&self) -> &[f64] {
        &self.lambda_sigma
    }

    /// Unit kernel vector of `Lambda`.
    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    /// Unit kernel vector of `Lambda^T`.
    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    /// Orthogonal projection `u u^T` onto `Ker(Lambda)`.
    pub fn kernel_projector(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// `S(t) = Phi(t) u` on `0..=N`, spanning `Ker(L)`.
    pub fn s(&self) -> &GridFunction {
        &self.s
    }

    /// `Psi(t)` on `0..N`.
    pub fn psi(&self) -> &GridFunction {
        &self.psi
    }

    pub fn psi_norm_sq(&self) -> f64 {
        self.psi_norm_sq
    }

    /// `[S(t)]_m` for `t` in `0..N`.
    pub fn s_lag(&self) -> Vec<f64> {
        let m = self.spec.lag() - 1;
        (0..self.spec.horizon()).map(|t| self.s[t][m]).collect()
    }

    /// `[Psi(t)]_n` for `t` in `0..N`.
    pub fn psi_last(&self) -> Vec<f64> {
        self.psi.component(self.spec.order() - 1)
    }

    pub fn norm_bound(&self) -> NormBound {
        self.norm
    }

    /// Shorthand for `norm_bound().upper`.
    pub fn a_bar(&self) -> f64 {
        self.norm.upper
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn check_len(&self, g: &GridFunction, expected: usize) -> Result<(), LinearError> {
        if g.len() != expected || g.dim() != self.spec.order() {
            return Err(LinearError::Length {
                expected,
                got: g.len(),
            });
        }
        Ok(())
    }

    /// `(L x)(t) = x(t+1) - A(t) x(t)`.
    pub fn apply_l(&self, x: &GridFunction) -> Result<GridFunction, LinearError> {
        self.check_len(x, self.spec.horizon() + 1)?;
        Ok(GridFunction::from_values(
            (0..self.spec.horizon())
                .map(|t| &x[t + 1] - self.spec.companion(t) * &x[t])
                .collect(),
        ))
    }

    /// `sum_t Psi(t)^T h(t)`; zero exactly on the image of `L`.
    pub fn image_functional(&self, h: &GridFunction) -> f64 {
        self.psi
            .values()
            .iter()
            .zip(h.values())
            .map(|(p, v)| p.dot(v))
            .sum()
    }

    /// Whether `h` lies in `Im(L)`, with defect `|sum Psi^T h| / max(1, |h|)`.
    pub fn image_membership(&self, h: &GridFunction, tol: f64) -> Result<(bool, f64), LinearError> {
        self.check_len(h, self.spec.horizon())?;
        let defect = self.image_functional(h).abs() / h.sup_norm().max(1.0);
        Ok((defect <= tol, defect))
    }

    /// `(P x)(t) = Phi(t) V x(0)`.
    pub fn project_p(&self, x: &GridFunction) -> Result<GridFunction, LinearError> {
        self.check_len(x, self.spec.horizon() + 1)?;
        Ok(self.s.scaled(self.u.dot(&x[0])))
    }

    /// `(Q h)(t) = Psi(t) (sum_j |Psi(j)|^2)^{-1} sum_i Psi(i)^T h(i)`.
    pub fn project_q(&self, h: &GridFunction) -> Result<GridFunction, LinearError> {
        self.check_len(h, self.spec.horizon())?;
        Ok(self.psi.scaled(self.image_functional(h) / self.psi_norm_sq))
    }

    /// `M_p h`: the solution of `L x = h` with the boundary conditions and
    /// `P x = 0`. Fails when `h` is not in the image.
    pub fn right_inverse(&self, h: &GridFunction) -> Result<GridFunction, LinearError> {
        self.check_len(h, self.spec.horizon())?;
        let (x, residual, rhs_norm) = self.right_inverse_raw(h);
        if residual > IMAGE_TOL * (1.0 + rhs_norm + h.sup_norm()) {
            return Err(LinearError::NotInImage { residual });
        }
        Ok(x)
    }

    /// `M_p (I - Q) h`, defined for every `h`.
    pub fn right_inverse_projected(&self, h: &GridFunction) -> Result<GridFunction, LinearError> {
        self.check_len(h, self.spec.horizon())?;
        let hq = h.axpy(-self.image_functional(h) / self.psi_norm_sq, &self.psi);
        Ok(self.right_inverse_raw(&hq).0)
    }

    /// Variation of parameters: particular solution `z` with `z(0) = 0`,
    /// then `x(0)` from `Lambda x(0) = -sum B_i z(i)` restricted to
    /// `Ker(Lambda)^perp`. Returns the solution, the consistency residual of
    /// the `x(0)` solve, and the size of its right-hand side.
    fn right_inverse_raw(&self, h: &GridFunction) -> (GridFunction, f64, f64) {
        let n = self.spec.order();
        let horizon = self.spec.horizon();
        let mut z = Vec::with_capacity(horizon + 1);
        z.push(DVector::zeros(n));
        for t in 0..horizon {
            let next = self.spec.companion(t) * &z[t] + &h[t];
            z.push(next);
        }
        let z = GridFunction::from_values(z);
        let rhs = -self.spec.boundary_map(&z);
        let x0 = linalg::pinv_solve(&self.lambda, &rhs, self.rank_tol);
        let x0 = &x0 - &self.v * &x0;
        let residual = (&self.lambda * &x0 - &rhs).norm();
        let x = GridFunction::from_values(
            (0..=horizon).map(|t| &self.phi[t] * &x0 + &z[t]).collect(),
        );
        (x, residual, rhs.norm())
    }

    /// Column of `M_p (I - Q)` for the unit input `e_j` at time `s`.
    pub fn response_column(&self, s: usize, j: usize) -> GridFunction {
        let n = self.spec.order();
        let mut h = GridFunction::zeros(n, self.spec.horizon());
        h[s][j] = 1.0;
        self.right_inverse_projected(&h)
            .expect("unit input has the right length")
    }

    /// Block-row bound `max_t sum_s sigma_max(M_{t,s})` on the induced
    /// sup-of-Euclidean norm of `M_p (I - Q)`, plus a random-probe lower
    /// estimate.
    fn compute_norm_bound(&self) -> NormBound {
        let n = self.spec.order();
        let horizon = self.spec.horizon();
        let block_norms: Vec<Vec<f64>> = (0..horizon)
            .into_par_iter()
            .map(|s| {
                let cols: Vec<GridFunction> = (0..n).map(|j| self.response_column(s, j)).collect();
                (0..=horizon)
                    .map(|t| {
                        let block = DMatrix::from_fn(n, n, |i, j| cols[j][t][i]);
                        linalg::spectral_norm(&block)
                    })
                    .collect()
            })
            .collect();
        let (argmax_t, upper) = (0..=horizon)
            .map(|t| (t, block_norms.iter().map(|col| col[t]).sum::<f64>()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });

        let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
        let probes: Vec<GridFunction> = (0..PROBES)
            .map(|_| {
                GridFunction::from_values(
                    (0..horizon)
                        .map(|_| {
                            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                            let norm = v.norm();
                            if norm > 0.0 {
                                v / norm
                            } else {
                                v
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        let probe_lower = probes
            .par_iter()
            .map(|h| {
                self.right_inverse_projected(h)
                    .expect("probe has the right length")
                    .sup_norm()
            })
            .reduce(|| 0.0, f64::max);
        NormBound {
            upper,
            probe_lower,
            argmax_t,
        }
    }

    pub fn report(&self) -> LinearReport {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        LinearReport {
            lambda: rows(&self.lambda),
            lambda_singular_values: self.lambda_sigma.clone(),
            u: self.u.iter().copied().collect(),
            w: self.w.iter().copied().collect(),
            s: self.s.clone(),
            psi: self.psi.clone(),
            psi_norm_sq: self.psi_norm_sq,
            a_bar: self.norm.upper,
            a_bar_probe_lower: self.norm.probe_lower,
            warnings: self.warnings.clone(),
        }
    }
}

/// `Psi(N-1) = B_N^T w`, `Psi(t-1) = B_t^T w + A(t)^T Psi(t)`, which equals
/// `Psi(t)^T = sum_{i>t} w^T B_i Phi(i) Phi(t+1)^{-1}` without inverting
/// anything.
fn backward_weights(spec: &ProblemSpec, w: &DVector<f64>) -> GridFunction {
    let horizon = spec.horizon();
    let b = spec.boundary();
    let mut psi = vec![DVector::zeros(spec.order()); horizon];
    psi[horizon - 1] = b[horizon].transpose() * w;
    for t in (1..horizon).rev() {
        psi[t - 1] = b[t].transpose() * w + spec.companion(t).transpose() * &psi[t];
    }
    GridFunction::from_values(psi)
}

/// Serializable summary of a [`LinearAnalysis`].
#[derive(Debug, Clone, Serialize)]
pub struct LinearReport {
    pub lambda: Vec<Vec<f64>>,
    pub lambda_singular_values: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    #[serde(rename = "S")]
    pub s: GridFunction,
    #[serde(rename = "Psi")]
    pub psi: GridFunction,
    pub psi_norm_sq: f64,
    pub a_bar: f64,
    pub a_bar_probe_lower: f64,
    pub warnings: Vec<String>,
}
