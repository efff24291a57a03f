//! Solves the nonlinear problem through the splitting `x = alpha S + v`:
//! the auxiliary equation `v = M_p (I - Q) F(alpha S + v)` is solved for
//! each `alpha`, and the scalar bifurcation function
//! `B(alpha) = sum_t [Psi(t)]_n g(t, alpha [S(t)]_m + [v(t)]_m)` is bracketed
//! on `[-alpha*, alpha*]` and bisected.
//!
//! With a passing certificate, `B(alpha*)` and `B(-alpha*)` have opposite
//! signs (which one is positive depends on the orientation), so bisection
//! always has a valid bracket when the sampled constants are accurate.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::conditions::{Certificate, Orientation};
use crate::expr::{lipschitz_estimate, EvalError, DEFAULT_SAMPLES};
use crate::linear::LinearAnalysis;
use crate::problem::{GridFunction, ProblemError, ScalarTrajectory};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("auxiliary equation did not converge at alpha = {alpha} (defect {defect:e} after {iterations} iterations)")]
    NoConvergence {
        alpha: f64,
        defect: f64,
        iterations: usize,
    },
    #[error("bifurcation function has the wrong signs at the bracket ends: B(alpha*) = {b_plus:e}, B(-alpha*) = {b_minus:e} ({orientation} orientation)")]
    BoundarySignViolation {
        b_plus: f64,
        b_minus: f64,
        orientation: Orientation,
    },
    #[error("bisection stalled at alpha = {alpha} with B = {b:e} and residual {residual:e}")]
    BisectionStall { alpha: f64, b: f64, residual: f64 },
    #[error("certificate violates alpha* s_max + r* < d ({lhs} >= {d})")]
    InvalidCertificate { lhs: f64, d: f64 },
    #[error("no certificate available and g is not identically zero")]
    NoCertificate,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target for the scalar residuals and the bifurcation value.
    pub solve_tol: f64,
    /// Relative defect at which an auxiliary solve stops.
    pub aux_tol: f64,
    pub max_aux_iter: usize,
    pub max_bisect: usize,
    /// Damping for the non-contractive fallback iteration.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            solve_tol: 1e-10,
            aux_tol: 1e-14,
            max_aux_iter: 500,
            max_bisect: 200,
            damping: 0.5,
        }
    }
}

/// How an auxiliary solve converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxMethod {
    Picard,
    Damped,
    Newton,
    /// Newton on the auxiliary and bifurcation equations together.
    Coupled,
}

/// Solution of the auxiliary equation at one `alpha`.
#[derive(Debug, Clone)]
pub struct AuxSolution {
    pub alpha: f64,
    /// `[v(t)]_m` for `t` in `0..N`.
    pub z: DVector<f64>,
    /// `g(t, alpha [S(t)]_m + [v(t)]_m)` at the solution.
    pub g_values: DVector<f64>,
    pub iterations: usize,
    pub defect: f64,
    pub method: AuxMethod,
    /// Geometric mean of successive defect ratios for Picard runs.
    pub observed_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub alpha: f64,
    pub v: GridFunction,
    pub x: GridFunction,
    pub y: ScalarTrajectory,
    pub recurrence_residual: f64,
    pub boundary_residual: f64,
    pub aux_iterations: usize,
    pub bisection_steps: usize,
    /// `(alpha_lo, alpha_hi, B(alpha_lo), B(alpha_hi))` at exit.
    pub bracket: (f64, f64, f64, f64),
    pub bifurcation_value: f64,
    pub alpha_star: f64,
    pub r_star: f64,
    pub contraction_q: f64,
    pub aux_methods: Vec<AuxMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_rate: Option<f64>,
    pub notes: Vec<String>,
}

/// The reduced problem for one certified `(c, d)`.
#[derive(Debug, Clone)]
pub struct BifurcationProblem<'a> {
    la: &'a LinearAnalysis,
    cert: Certificate,
    opts: SolveOptions,
    alpha_star: f64,
    r_star: f64,
    lipschitz: f64,
    contraction_q: f64,
    psi_n: Vec<f64>,
    s_m: Vec<f64>,
    /// Columns of `M_p (I - Q)` for unit inputs `e_n` at each time.
    columns: Vec<GridFunction>,
    /// `kernel[(t, s)] = [columns[s](t)]_m`.
    kernel: DMatrix<f64>,
}

impl<'a> BifurcationProblem<'a> {
    pub fn new(
        la: &'a LinearAnalysis,
        cert: &Certificate,
        opts: SolveOptions,
    ) -> Result<Self, SolveError> {
        let spec = la.problem();
        let alpha_star = (cert.c + cert.a_bar * cert.g_sup_d) / cert.s_min;
        let r_star = cert.a_bar * cert.g_sup_d;
        let lhs = alpha_star * cert.s_max + r_star;
        if lhs >= cert.d {
            return Err(SolveError::InvalidCertificate { lhs, d: cert.d });
        }
        let lipschitz = lipschitz_estimate(
            spec.nonlinearity(),
            &spec.times(),
            -cert.d,
            cert.d,
            DEFAULT_SAMPLES,
        )?;
        let horizon = spec.horizon();
        let last = spec.order() - 1;
        let lag = spec.lag() - 1;
        let columns: Vec<GridFunction> = (0..horizon)
            .into_par_iter()
            .map(|s| la.response_column(s, last))
            .collect();
        let kernel = DMatrix::from_fn(horizon, horizon, |t, s| columns[s][t][lag]);
        Ok(BifurcationProblem {
            la,
            cert: cert.clone(),
            opts,
            alpha_star,
            r_star,
            lipschitz,
            contraction_q: cert.a_bar * lipschitz,
            psi_n: la.psi_last(),
            s_m: la.s_lag(),
            columns,
            kernel,
        })
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    pub fn contraction_q(&self) -> f64 {
        self.contraction_q
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn certificate(&self) -> &Certificate {
        &self.cert
    }

    fn g_vector(&self, alpha: f64, z: &DVector<f64>) -> Result<DVector<f64>, SolveError> {
        let spec = self.la.problem();
        let mut out = DVector::zeros(z.len());
        for t in 0..z.len() {
            out[t] = spec.g(t, alpha * self.s_m[t] + z[t])?;
        }
        Ok(out)
    }

    /// `v = sum_s columns[s] * g_s`.
    pub fn assemble_v(&self, g_values: &DVector<f64>) -> GridFunction {
        let spec = self.la.problem();
        let mut v = GridFunction::zeros(spec.order(), spec.horizon() + 1);
        for (s, col) in self.columns.iter().enumerate() {
            let gs = g_values[s];
            if gs != 0.0 {
                v = v.axpy(gs, col);
            }
        }
        v
    }

    fn converged(&self, step: f64, z: &DVector<f64>) -> bool {
        step <= self.opts.aux_tol * (1.0 + z.amax())
    }

    /// Solves `z = K g(alpha S_m + z)`, the `m`-th component of the
    /// auxiliary equation, from `warm` (zero when absent). Picard iteration
    /// when the estimated contraction factor is below one, otherwise damped
    /// iteration followed by Newton's method on the reduced system.
    pub fn auxiliary_fixed_point(
        &self,
        alpha: f64,
        warm: Option<&DVector<f64>>,
    ) -> Result<AuxSolution, SolveError> {
        let horizon = self.la.problem().horizon();
        let mut z = warm.cloned().unwrap_or_else(|| DVector::zeros(horizon));
        let max_iter = self.opts.max_aux_iter;
        let mut iterations = 0;
        let mut defect = f64::INFINITY;

        let picard = self.contraction_q < 1.0;
        let theta = if picard { 1.0 } else { self.opts.damping };
        let budget = if picard { max_iter } else { max_iter / 2 };
        let mut ratios = Vec::new();
        while iterations < budget {
            let g = self.g_vector(alpha, &z)?;
            let mapped = &self.kernel * &g;
            let step = (&mapped - &z).amax();
            iterations += 1;
            if defect.is_finite() && defect > 0.0 {
                ratios.push(step / defect);
            }
            defect = step;
            z = &z * (1.0 - theta) + mapped * theta;
            if self.converged(step, &z) {
                let g_values = self.g_vector(alpha, &z)?;
                let observed_rate = (picard && ratios.len() > 2).then(|| {
                    let tail = &ratios[1..];
                    (tail.iter().map(|r| r.max(1e-300).ln()).sum::<f64>() / tail.len() as f64).exp()
                });
                return Ok(AuxSolution {
                    alpha,
                    z,
                    g_values,
                    iterations,
                    defect,
                    method: if picard { AuxMethod::Picard } else { AuxMethod::Damped },
                    observed_rate,
                });
            }
        }
        if picard {
            return Err(SolveError::NoConvergence {
                alpha,
                defect,
                iterations,
            });
        }
        self.aux_newton(alpha, z, iterations)
    }

    /// Newton's method on `z - K g(alpha S_m + z) = 0` with a central
    /// difference derivative of `g` and Armijo backtracking.
    fn aux_newton(
        &self,
        alpha: f64,
        mut z: DVector<f64>,
        mut iterations: usize,
    ) -> Result<AuxSolution, SolveError> {
        let spec = self.la.problem();
        let horizon = spec.horizon();
        let residual = |z: &DVector<f64>| -> Result<DVector<f64>, SolveError> {
            Ok(z - &self.kernel * self.g_vector(alpha, z)?)
        };
        let mut r = residual(&z)?;
        let cap = iterations + self.opts.max_aux_iter;
        while iterations < cap {
            let norm = r.amax();
            if norm <= self.opts.aux_tol * (1.0 + z.amax()) {
                let g_values = self.g_vector(alpha, &z)?;
                return Ok(AuxSolution {
                    alpha,
                    z,
                    g_values,
                    iterations,
                    defect: norm,
                    method: AuxMethod::Newton,
                    observed_rate: None,
                });
            }
            iterations += 1;
            let mut jac = DMatrix::identity(horizon, horizon);
            for s in 0..horizon {
                let x = alpha * self.s_m[s] + z[s];
                let h = 1e-6 * (1.0 + x.abs());
                let slope = (spec.g(s, x + h)? - spec.g(s, x - h)?) / (2.0 * h);
                for t in 0..horizon {
                    jac[(t, s)] -= self.kernel[(t, s)] * slope;
                }
            }
            let step = match jac.clone().lu().solve(&(-&r)) {
                Some(step) if step.iter().all(|v| v.is_finite()) => step,
                _ => crate::linalg::pinv_solve(&jac, &(-&r), 1e-12),
            };
            let f0 = r.norm_squared();
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = &z + &step * lambda;
                let rt = residual(&trial)?;
                if rt.norm_squared() <= (1.0 - 1e-4 * lambda) * f0 {
                    z = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(SolveError::NoConvergence {
            alpha,
            defect: r.amax(),
            iterations,
        })
    }

    /// Newton's method on `z - K g(alpha S_m + z) = 0`, `B(alpha, z) = 0`
    /// in the unknowns `(z, alpha)`.
    pub fn coupled_newton(
        &self,
        alpha0: f64,
        z0: DVector<f64>,
    ) -> Result<(f64, AuxSolution), SolveError> {
        let spec = self.la.problem();
        let horizon = spec.horizon();
        let s_m = DVector::from_column_slice(&self.s_m);
        let psi = DVector::from_column_slice(&self.psi_n);
        let residual = |alpha: f64, z: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>), SolveError> {
            let g = self.g_vector(alpha, z)?;
            let mut r = DVector::zeros(horizon + 1);
            r.rows_mut(0, horizon).copy_from(&(z - &self.kernel * &g));
            r[horizon] = psi.dot(&g);
            Ok((r, g))
        };
        let (mut alpha, mut z) = (alpha0, z0);
        let (mut r, mut g) = residual(alpha, &z)?;
        for iteration in 0..self.opts.max_aux_iter {
            if r.amax() <= self.opts.aux_tol * (1.0 + z.amax() + alpha.abs()) {
                let aux = AuxSolution {
                    alpha,
                    z,
                    g_values: g,
                    iterations: iteration,
                    defect: r.rows(0, horizon).amax(),
                    method: AuxMethod::Coupled,
                    observed_rate: None,
                };
                return Ok((r[horizon], aux));
            }
            let mut slope = DVector::zeros(horizon);
            for t in 0..horizon {
                let x = alpha * s_m[t] + z[t];
                let h = 1e-6 * (1.0 + x.abs());
                slope[t] = (spec.g(t, x + h)? - spec.g(t, x - h)?) / (2.0 * h);
            }
            let mut jac = DMatrix::zeros(horizon + 1, horizon + 1);
            for s in 0..horizon {
                for t in 0..horizon {
                    jac[(t, s)] = -self.kernel[(t, s)] * slope[s];
                }
                jac[(s, s)] += 1.0;
                jac[(horizon, s)] = psi[s] * slope[s];
            }
            let ds = slope.component_mul(&s_m);
            jac.view_mut((0, horizon), (horizon, 1)).copy_from(&(-&self.kernel * &ds));
            jac[(horizon, horizon)] = psi.dot(&ds);
            let step = match jac.clone().lu().solve(&(-&r)) {
                Some(step) if step.iter().all(|v| v.is_finite()) => step,
                _ => crate::linalg::pinv_solve(&jac, &(-&r), 1e-12),
            };
            let f0 = r.norm_squared();
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial_alpha = alpha + lambda * step[horizon];
                let trial_z = &z + step.rows(0, horizon) * lambda;
                let (rt, gt) = residual(trial_alpha, &trial_z)?;
                if rt.norm_squared() <= (1.0 - 1e-4 * lambda) * f0 {
                    alpha = trial_alpha;
                    z = trial_z;
                    r = rt;
                    g = gt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(SolveError::NoConvergence {
            alpha,
            defect: r.amax(),
            iterations: self.opts.max_aux_iter,
        })
    }

    /// `B(alpha)` together with the auxiliary solution it was computed from.
    pub fn bifurcation_value(
        &self,
        alpha: f64,
        warm: Option<&DVector<f64>>,
    ) -> Result<(f64, AuxSolution), SolveError> {
        let aux = self.auxiliary_fixed_point(alpha, warm)?;
        let b = self
            .psi_n
            .iter()
            .zip(aux.g_values.iter())
            .map(|(p, g)| p * g)
            .sum();
        Ok((b, aux))
    }

    /// [`Self::bifurcation_value`] trying each warm start in turn until the
    /// auxiliary solve converges.
    pub fn bifurcation_value_from(
        &self,
        alpha: f64,
        warms: &[&DVector<f64>],
    ) -> Result<(f64, AuxSolution), SolveError> {
        let mut last = None;
        for warm in warms {
            match self.bifurcation_value(alpha, Some(warm)) {
                Err(e @ SolveError::NoConvergence { .. }) => last = Some(e),
                other => return other,
            }
        }
        Err(last.unwrap_or(SolveError::NoConvergence {
            alpha,
            defect: f64::INFINITY,
            iterations: 0,
        }))
    }

    /// Builds `x = alpha S + v`, converts it to a scalar trajectory and
    /// measures both residual families on the original problem.
    pub fn assemble(&self, aux: &AuxSolution) -> Result<Assembled, SolveError> {
        let spec = self.la.problem();
        let v = self.assemble_v(&aux.g_values);
        let x = self.la.s().scaled(aux.alpha).axpy(1.0, &v);
        let y = spec.grid_to_scalar_unchecked(&x);
        let rec = spec.recurrence_residuals(&y)?;
        let bnd = spec.boundary_residuals(&y)?;
        let sup = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Assembled {
            recurrence_residual: sup(&rec),
            boundary_residual: sup(&bnd),
            v,
            x,
            y,
        })
    }

    /// Brackets `B` at `±alpha*`, bisects to a zero and assembles the
    /// solution.
    pub fn solve(&self) -> Result<SolveResult, SolveError> {
        let tol = self.opts.solve_tol;
        let psi_abs: f64 = self.psi_n.iter().map(|p| p.abs()).sum();
        let b_tol = tol * (1.0 + psi_abs * self.cert.g_sup_d);
        let a = self.alpha_star;
        let mut notes = Vec::new();
        if self.contraction_q >= 1.0 {
            notes.push(format!(
                "A L_g = {:.3e} >= 1: the auxiliary solution is the limit reached from the warm start and may depend on the branch",
                self.contraction_q
            ));
        }

        let (plus, minus) = rayon::join(
            || self.bifurcation_value(a, None),
            || self.bifurcation_value(-a, None),
        );
        let (b_plus, aux_plus) = plus?;
        let (b_minus, aux_minus) = minus?;
        let mut aux_iterations = aux_plus.iterations + aux_minus.iterations;
        let mut methods = vec![aux_plus.method, aux_minus.method];
        let mut rates: Vec<f64> = [aux_plus.observed_rate, aux_minus.observed_rate]
            .into_iter()
            .flatten()
            .collect();

        let sign = self.cert.orientation.sign();
        let finish = |aux: &AuxSolution,
                      b: f64,
                      bracket: (f64, f64, f64, f64),
                      steps: usize,
                      iters: usize,
                      methods: Vec<AuxMethod>,
                      rates: &[f64],
                      notes: Vec<String>|
         -> Result<Option<SolveResult>, SolveError> {
            let asm = self.assemble(aux)?;
            if asm.recurrence_residual > tol || asm.boundary_residual > tol {
                return Ok(None);
            }
            Ok(Some(SolveResult {
                alpha: aux.alpha,
                v: asm.v,
                x: asm.x,
                y: asm.y,
                recurrence_residual: asm.recurrence_residual,
                boundary_residual: asm.boundary_residual,
                aux_iterations: iters,
                bisection_steps: steps,
                bracket,
                bifurcation_value: b,
                alpha_star: self.alpha_star,
                r_star: self.r_star,
                contraction_q: self.contraction_q,
                aux_methods: dedup(methods),
                observed_rate: (!rates.is_empty())
                    .then(|| rates.iter().copied().fold(0.0, f64::max)),
                notes,
            }))
        };

        // Degenerate case: B vanishes at both ends, try the middle.
        if b_plus.abs() <= b_tol && b_minus.abs() <= b_tol {
            let (b0, aux0) = self.bifurcation_value(0.0, None)?;
            aux_iterations += aux0.iterations;
            methods.push(aux0.method);
            if b0.abs() <= b_tol {
                notes.push("B vanishes at -alpha*, 0 and alpha*; returning the alpha = 0 solution".into());
                if let Some(res) = finish(
                    &aux0,
                    b0,
                    (-a, a, b_minus, b_plus),
                    0,
                    aux_iterations,
                    methods.clone(),
                    &rates,
                    notes.clone(),
                )? {
                    return Ok(res);
                }
            }
        }
        for (b, aux) in [(b_plus, &aux_plus), (b_minus, &aux_minus)] {
            if b == 0.0 {
                if let Some(res) = finish(
                    aux,
                    b,
                    (-a, a, b_minus, b_plus),
                    0,
                    aux_iterations,
                    methods.clone(),
                    &rates,
                    notes.clone(),
                )? {
                    return Ok(res);
                }
            }
        }
        if !(sign * b_plus > 0.0 && sign * b_minus < 0.0) {
            return Err(SolveError::BoundarySignViolation {
                b_plus,
                b_minus,
                orientation: self.cert.orientation,
            });
        }

        let (mut lo, mut hi) = (-a, a);
        let (mut b_lo, mut b_hi) = (b_minus, b_plus);
        let mut warm_lo = aux_minus.z.clone();
        let mut warm_hi = aux_plus.z.clone();
        let mut best: (f64, AuxSolution) = if b_plus.abs() < b_minus.abs() {
            (b_plus, aux_plus)
        } else {
            (b_minus, aux_minus)
        };
        let mut steps = 0;
        while steps < self.opts.max_bisect && (hi - lo) > 1e-14 * a {
            let mid = 0.5 * (lo + hi);
            // Continue from whichever end is closer to the last accepted
            // iterate; both are valid starting points.
            let zero = DVector::zeros(warm_lo.len());
            let warms = if b_lo.abs() <= b_hi.abs() {
                [&warm_lo, &warm_hi, &zero]
            } else {
                [&warm_hi, &warm_lo, &zero]
            };
            let (b_mid, aux_mid) = match self.bifurcation_value_from(mid, &warms) {
                Ok(v) => v,
                Err(SolveError::NoConvergence { .. }) => break,
                Err(e) => return Err(e),
            };
            steps += 1;
            aux_iterations += aux_mid.iterations;
            methods.push(aux_mid.method);
            rates.extend(aux_mid.observed_rate);
            if b_mid.abs() <= b_tol {
                if let Some(res) = finish(
                    &aux_mid,
                    b_mid,
                    (lo, hi, b_lo, b_hi),
                    steps,
                    aux_iterations,
                    methods.clone(),
                    &rates,
                    notes.clone(),
                )? {
                    return Ok(res);
                }
            }
            if b_mid.abs() < best.0.abs() {
                best = (b_mid, aux_mid.clone());
            }
            if b_mid == 0.0 {
                break;
            }
            if (b_mid > 0.0) == (b_hi > 0.0) {
                hi = mid;
                b_hi = b_mid;
                warm_hi = aux_mid.z;
            } else {
                lo = mid;
                b_lo = b_mid;
                warm_lo = aux_mid.z;
            }
            debug_assert!(b_lo.signum() != b_hi.signum());
        }
        let (b_best, aux_best) = best;
        if let Some(res) = finish(
            &aux_best,
            b_best,
            (lo, hi, b_lo, b_hi),
            steps,
            aux_iterations,
            methods.clone(),
            &rates,
            notes.clone(),
        )? {
            return Ok(res);
        }
        // Without contraction the auxiliary solution can jump between
        // branches, leaving B discontinuous at the bisection limit. Solve
        // the auxiliary and bifurcation equations together from there.
        let starts = [(aux_best.alpha, aux_best.z.clone()), (0.5 * (lo + hi), DVector::zeros(aux_best.z.len()))];
        for (alpha0, z0) in starts {
            if let Ok((b, aux)) = self.coupled_newton(alpha0, z0) {
                aux_iterations += aux.iterations;
                methods.push(AuxMethod::Coupled);
                let mut notes = notes.clone();
                notes.push(format!(
                    "bisection stalled at alpha = {} (B = {b_best:e}); finished by coupled Newton",
                    aux_best.alpha
                ));
                if aux.alpha.abs() > a {
                    notes.push(format!("coupled Newton left the bracket: |alpha| > alpha* = {a}"));
                }
                if let Some(res) = finish(
                    &aux,
                    b,
                    (lo, hi, b_lo, b_hi),
                    steps,
                    aux_iterations,
                    methods.clone(),
                    &rates,
                    notes,
                )? {
                    return Ok(res);
                }
            }
        }
        let asm = self.assemble(&aux_best)?;
        Err(SolveError::BisectionStall {
            alpha: aux_best.alpha,
            b: b_best,
            residual: asm.recurrence_residual.max(asm.boundary_residual),
        })
    }
}

fn dedup(methods: Vec<AuxMethod>) -> Vec<AuxMethod> {
    let mut out: Vec<AuxMethod> = Vec::new();
    for m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

/// A candidate solution with its residuals.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub v: GridFunction,
    pub x: GridFunction,
    pub y: ScalarTrajectory,
    pub recurrence_residual: f64,
    pub boundary_residual: f64,
}

/// Solves with the given certificate, or returns the zero solution when `g`
/// vanishes identically (no certificate exists in that case).
pub fn solve(
    la: &LinearAnalysis,
    cert: Option<&Certificate>,
    opts: SolveOptions,
) -> Result<SolveResult, SolveError> {
    let spec = la.problem();
    if spec.nonlinearity().is_identically_zero() {
        let n = spec.order();
        let zero = GridFunction::zeros(n, spec.horizon() + 1);
        let y = spec.grid_to_scalar_unchecked(&zero);
        return Ok(SolveResult {
            alpha: 0.0,
            v: zero.clone(),
            x: zero,
            y,
            recurrence_residual: 0.0,
            boundary_residual: 0.0,
            aux_iterations: 1,
            bisection_steps: 0,
            bracket: (0.0, 0.0, 0.0, 0.0),
            bifurcation_value: 0.0,
            alpha_star: 0.0,
            r_star: 0.0,
            contraction_q: 0.0,
            aux_methods: vec![AuxMethod::Picard],
            observed_rate: None,
            notes: vec!["g vanishes identically: B = 0 for every alpha; returning the trivial solution".into()],
        });
    }
    let cert = cert.ok_or(SolveError::NoCertificate)?;
    BifurcationProblem::new(la, cert, opts)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{CheckOptions, Checker};
    use crate::problem::{Nonlinearity, ProblemSpec};

    fn periodic_scalar(horizon: usize, g: &str) -> ProblemSpec {
        let mut b = vec![DMatrix::zeros(1, 1); horizon + 1];
        b[0][(0, 0)] = 1.0;
        b[horizon][(0, 0)] = -1.0;
        ProblemSpec::new(1, horizon, 1, vec![vec![-1.0; horizon]], b, Nonlinearity::parse(g).unwrap()).unwrap()
    }

    #[test]
    fn zero_nonlinearity_short_circuits() {
        let la = LinearAnalysis::new(&periodic_scalar(4, "0")).unwrap();
        let res = solve(&la, None, SolveOptions::default()).unwrap();
        assert_eq!(res.alpha, 0.0);
        assert_eq!(res.y.0, vec![0.0; 5]);
        assert_eq!(res.recurrence_residual, 0.0);
    }

    #[test]
    fn periodic_tanh_solves_with_contraction() {
        // x(t+1) = x(t) + tanh(x(t)) - 0.5 sin(t) periodic; bounded g with
        // the right end signs.
        let spec = periodic_scalar(5, "tanh(x) + 0.2*sin(t)");
        let la = LinearAnalysis::new(&spec).unwrap();
        let checker = Checker::new(&la, CheckOptions::default());
        let search = checker
            .auto_certificate(&crate::conditions::DEFAULT_C_GRID, 1e6, &Orientation::BOTH)
            .unwrap();
        let cert = search.found.expect("certificate").certificate().unwrap();
        let bp = BifurcationProblem::new(&la, &cert, SolveOptions::default()).unwrap();
        assert!(bp.alpha_star() * cert.s_max + bp.r_star() < cert.d);
        let (bp_plus, _) = bp.bifurcation_value(bp.alpha_star(), None).unwrap();
        let (bp_minus, _) = bp.bifurcation_value(-bp.alpha_star(), None).unwrap();
        let sign = cert.orientation.sign();
        assert!(sign * bp_plus > 0.0 && sign * bp_minus < 0.0);
        let res = bp.solve().unwrap();
        assert!(res.recurrence_residual <= 1e-10 && res.boundary_residual <= 1e-10);
        // x = alpha S + v with P v = 0.
        let pv = la.project_p(&res.v).unwrap();
        assert!(pv.sup_norm() < 1e-11);
        assert!(res.v.sup_norm() <= bp.r_star() + 1e-9);
    }

    #[test]
    fn constant_forcing_at_zero_alpha() {
        // Small constant g: Picard converges in a handful of steps.
        let spec = periodic_scalar(4, "0.01 + 0.05*sin(x)");
        let la = LinearAnalysis::new(&spec).unwrap();
        let cert = Certificate {
            c: 1.0,
            d: 100.0,
            k1: Default::default(),
            k2: Default::default(),
            j1: 0.0,
            j2: 0.0,
            s_max: 1.0,
            s_min: 1.0,
            a_bar: la.a_bar(),
            g_sup_d: 0.06,
            orientation: Orientation::Standard,
            margin: 0.0,
        };
        let bp = BifurcationProblem::new(&la, &cert, SolveOptions::default()).unwrap();
        assert!(bp.contraction_q() < 1.0);
        let aux = bp.auxiliary_fixed_point(0.0, None).unwrap();
        assert_eq!(aux.method, AuxMethod::Picard);
        let g = bp.g_vector(0.0, &aux.z).unwrap();
        assert!((&bp.kernel * g - &aux.z).amax() < 1e-12);
        if let Some(rate) = aux.observed_rate {
            assert!(rate <= bp.contraction_q() + 0.05);
        }
    }
}
