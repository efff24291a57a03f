//! Sign sets, bounding tables and existence checks for the nonlinear
//! problem, plus the corollary checkers and a `(c, d)` search.
//!
//! All extrema of `g` are sampled estimates (see [`crate::expr::bound_on_box`]),
//! so a `PASS` verdict means "numerically certified", not proved.

mod corollaries;
mod sturm;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::expr::{bound_on_box, Bound, EvalError, ScalarField, DEFAULT_SAMPLES};
use crate::linear::{LinearAnalysis, LinearError};
use crate::problem::ProblemError;

pub use corollaries::{LandesmanLazerDetails, SameSignDetails, SmallLinearDetails, SublinearDetails};
pub use sturm::{dirichlet_eigenvalue, sturm_liouville, SturmLiouville};

/// Width of the ambiguous band above the sign threshold, as a multiple of it.
const AMBIGUITY_FACTOR: f64 = 1e3;

#[derive(Debug, Error)]
pub enum ConditionsError {
    #[error("O_0 is nonempty at t = {indices:?}: [S(t)]_m vanishes where [Psi(t)]_n does not")]
    O0Nonempty { indices: Vec<usize> },
    #[error("O is empty: [Psi(t)]_n vanishes wherever [S(t)]_m does not, so s_min is undefined")]
    EmptyO,
    #[error("need 0 < c < d, got c = {c}, d = {d}")]
    InvalidInterval { c: f64, d: f64 },
    #[error("sign alignment fails: [Psi]_n [S]_m takes both signs")]
    Alignment,
    #[error("corollary inapplicable: {0}")]
    Inapplicable(String),
    #[error("growth ratio {ratio} is not below 1")]
    GrowthRatio { ratio: f64 },
    #[error("no admissible d found after {iterations} doublings (last d = {d})")]
    IterationCap { iterations: usize, d: f64 },
    #[error("g depends on t: g({t}, {x}) = {value} but g(0, {x}) = {base}")]
    TimeDependent { t: usize, x: f64, value: f64, base: f64 },
    #[error("limit check failed: g({x}) = {value}, expected {limit}")]
    LimitMismatch { x: f64, value: f64, limit: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Which set of inequalities is checked: the standard one (`J2 <= 0 <= J1`)
/// or the fully reversed one (`J1 <= 0 <= J2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Standard,
    Reversed,
}

impl Orientation {
    pub const BOTH: [Orientation; 2] = [Orientation::Standard, Orientation::Reversed];

    /// `+1` for standard, `-1` for reversed: the sign of `B(alpha*)`.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Reversed => -1.0,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Standard => "standard",
            Orientation::Reversed => "reversed",
        })
    }
}

/// Name of the first condition that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    C1,
    C1Ambiguous,
    C2Strictness,
    C3,
    C4,
    C1Star,
    C3Star,
    C4Star,
    Envelope,
    H4,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Failure::C1 => "C1",
            Failure::C1Ambiguous => "C1-ambiguous",
            Failure::C2Strictness => "C2-strictness",
            Failure::C3 => "C3",
            Failure::C4 => "C4",
            Failure::C1Star => "C1*",
            Failure::C3Star => "C3*",
            Failure::C4Star => "C4*",
            Failure::Envelope => "envelope",
            Failure::H4 => "H4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(Failure),
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail(c) => write!(f, "FAIL({c})"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Which existence result a report applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Main,
    SameSign,
    Sublinear,
    SmallLinear,
    LandesmanLazer,
}

/// Tolerances for the checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Sign threshold relative to `max |[Psi]_n|` (resp. `max |[S]_m|`).
    pub sign_tol: f64,
    /// Strict-inequality slack relative to `1 +` the largest compared extremum.
    pub strict_tol: f64,
    /// Tolerance for the non-strict `J` sign conditions.
    pub c4_tol: f64,
    /// Samples per time index for extrema of `g`.
    pub samples: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            sign_tol: 1e-10,
            strict_tol: 1e-9,
            c4_tol: 1e-12,
            samples: DEFAULT_SAMPLES,
        }
    }
}

/// Partition of `0..N` by the signs of `[Psi(t)]_n` and `[S(t)]_m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignSets {
    pub opp: Vec<usize>,
    pub opm: Vec<usize>,
    pub omp: Vec<usize>,
    pub omm: Vec<usize>,
    pub o0: Vec<usize>,
    /// Indices whose classification would change under a small perturbation
    /// of the threshold.
    pub ambiguous: Vec<usize>,
    pub psi_tol: f64,
    pub s_tol: f64,
}

impl SignSets {
    /// `O = Opp ∪ Opm ∪ Omp ∪ Omm`, ascending.
    pub fn o(&self) -> Vec<usize> {
        let mut o: Vec<usize> = [&self.opp, &self.opm, &self.omp, &self.omm]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        o.sort_unstable();
        o
    }

    /// C1: `O_0` is empty.
    pub fn c1(&self) -> bool {
        self.o0.is_empty()
    }

    /// `+1` if `[Psi]_n [S]_m >= 0` everywhere, `-1` if `<= 0` everywhere
    /// (decided on the classified signs), `None` if both signs occur.
    /// An empty `O` counts as `+1`.
    pub fn alignment(&self) -> Option<i8> {
        let pos = !(self.opp.is_empty() && self.omm.is_empty());
        let neg = !(self.opm.is_empty() && self.omp.is_empty());
        match (pos, neg) {
            (true, true) => None,
            (false, true) => Some(-1),
            _ => Some(1),
        }
    }
}

/// Classifies every `t` in `0..N`. Values within `sign_tol * max|.|` of zero
/// are zero; values up to `AMBIGUITY_FACTOR` times that are classified by
/// sign but listed as ambiguous when the choice matters.
pub fn sign_sets(psi_n: &[f64], s_m: &[f64], sign_tol: f64) -> SignSets {
    let psi_tol = sign_tol * psi_n.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let s_tol = sign_tol * s_m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut sets = SignSets {
        opp: vec![],
        opm: vec![],
        omp: vec![],
        omm: vec![],
        o0: vec![],
        ambiguous: vec![],
        psi_tol,
        s_tol,
    };
    let grey = |v: f64, tol: f64| v.abs() > tol && v.abs() <= AMBIGUITY_FACTOR * tol;
    for (t, (&p, &s)) in psi_n.iter().zip(s_m).enumerate() {
        let psi_zero = p.abs() <= psi_tol;
        if grey(p, psi_tol) || (!psi_zero && grey(s, s_tol)) {
            sets.ambiguous.push(t);
        }
        if psi_zero {
            continue;
        }
        let target = if s.abs() <= s_tol {
            &mut sets.o0
        } else {
            match (p > 0.0, s > 0.0) {
                (true, true) => &mut sets.opp,
                (true, false) => &mut sets.opm,
                (false, true) => &mut sets.omp,
                (false, false) => &mut sets.omm,
            }
        };
        target.push(t);
    }
    sets
}

/// One line of the condition ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Corollary-specific numbers attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Details {
    SameSign(SameSignDetails),
    Sublinear(SublinearDetails),
    SmallLinear(SmallLinearDetails),
    LandesmanLazer(LandesmanLazerDetails),
}

/// The data needed to solve: a passing `(c, d)` with its constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub c: f64,
    pub d: f64,
    pub k1: BTreeMap<usize, f64>,
    pub k2: BTreeMap<usize, f64>,
    pub j1: f64,
    pub j2: f64,
    pub s_max: f64,
    pub s_min: f64,
    pub a_bar: f64,
    pub g_sup_d: f64,
    pub orientation: Orientation,
    pub margin: f64,
}

/// Everything computed by one check, passing or not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub method: Method,
    pub verdict: Verdict,
    pub orientation: Orientation,
    pub c: f64,
    pub d: f64,
    pub s_max: f64,
    pub s_min: f64,
    pub a_bar: f64,
    /// Sampled `sup |g|` over `0..N x [-d, d]`.
    pub g_sup_d: f64,
    /// Right-hand side of the C3 inequality `d > c3_rhs`.
    pub c3_rhs: f64,
    /// `sum [Psi]_n K1` with the slack-adjusted tables.
    pub j1: f64,
    pub j2: f64,
    /// The same sums with the extremal (slack-free) tables.
    pub j1_tight: f64,
    pub j2_tight: f64,
    /// Smallest strict-inequality slack, in units of `g`.
    pub margin: f64,
    pub strict_tol: f64,
    pub k1: BTreeMap<usize, f64>,
    pub k2: BTreeMap<usize, f64>,
    pub sets: SignSets,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Details>,
    pub basis: &'static str,
}

const ESTIMATE_NOTE: &str = "numerically certified: extrema of g are sampled estimates";

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub fn certificate(&self) -> Option<Certificate> {
        self.passed().then(|| Certificate {
            c: self.c,
            d: self.d,
            k1: self.k1.clone(),
            k2: self.k2.clone(),
            j1: self.j1,
            j2: self.j2,
            s_max: self.s_max,
            s_min: self.s_min,
            a_bar: self.a_bar,
            g_sup_d: self.g_sup_d,
            orientation: self.orientation,
            margin: self.margin,
        })
    }

    /// Human-readable condition ledger, one line per check.
    pub fn ledger(&self) -> String {
        let mut out = format!(
            "method: {:?}  orientation: {}  c = {}  d = {}\n",
            self.method, self.orientation, self.c, self.d
        );
        for chk in &self.checks {
            let mark = if chk.passed { '✓' } else { '✗' };
            out.push_str(&format!("  {mark} {:<14} {}\n", chk.name, chk.detail));
        }
        for w in &self.warnings {
            out.push_str(&format!("  warning: {w}\n"));
        }
        out.push_str(&format!("verdict: {} ({})\n", self.verdict, self.basis));
        out
    }
}

/// Outcome of [`Checker::auto_certificate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutoSearch {
    pub found: Option<ConditionReport>,
    /// `(c, d, orientation, verdict)` of every attempt, in search order.
    pub trace: Vec<(f64, f64, Orientation, String)>,
    /// The last failing attempt of the main conditions, kept for diagnosis
    /// when nothing passes.
    pub last: Option<ConditionReport>,
}

/// Default `c` values scanned by the automatic search.
pub const DEFAULT_C_GRID: [f64; 9] = [0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0];
/// Default cap on `d` for the automatic search.
pub const DEFAULT_D_CAP: f64 = 1e8;

/// Runs the checks against one linear analysis.
#[derive(Debug, Clone)]
pub struct Checker<'a> {
    la: &'a LinearAnalysis,
    opts: CheckOptions,
    psi_n: Vec<f64>,
    s_m: Vec<f64>,
    sets: SignSets,
    o: Vec<usize>,
    s_max: f64,
    times: Vec<usize>,
}

impl<'a> Checker<'a> {
    pub fn new(la: &'a LinearAnalysis, opts: CheckOptions) -> Self {
        let psi_n = la.psi_last();
        let s_m = la.s_lag();
        let sets = sign_sets(&psi_n, &s_m, opts.sign_tol);
        let o = sets.o();
        let s_max = s_m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Checker {
            la,
            opts,
            times: la.problem().times(),
            psi_n,
            s_m,
            sets,
            o,
            s_max,
        }
    }

    pub fn analysis(&self) -> &LinearAnalysis {
        self.la
    }

    pub fn options(&self) -> &CheckOptions {
        &self.opts
    }

    pub fn sets(&self) -> &SignSets {
        &self.sets
    }

    pub fn psi_n(&self) -> &[f64] {
        &self.psi_n
    }

    pub fn s_m(&self) -> &[f64] {
        &self.s_m
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// `min_O |[S(t)]_m|`; fails when `O` is empty.
    pub fn s_min(&self) -> Result<f64, ConditionsError> {
        self.o
            .iter()
            .map(|&t| self.s_m[t].abs())
            .reduce(f64::min)
            .ok_or(ConditionsError::EmptyO)
    }

    /// `sum_O |[Psi(t)]_n|`.
    pub fn psi_abs_sum(&self) -> f64 {
        self.o.iter().map(|&t| self.psi_n[t].abs()).sum()
    }

    /// Sampled `sup |g|` over `0..N x [-r, r]`.
    pub fn g_sup(&self, r: f64) -> Result<f64, ConditionsError> {
        let g = self.la.problem().nonlinearity();
        Ok(bound_on_box(g, &self.times, -r, r, self.opts.samples)?.abs_max())
    }

    /// Sampled extrema of `g(t, .)` on `[lo, hi]`.
    fn bound(&self, t: usize, lo: f64, hi: f64) -> Result<Bound, ConditionsError> {
        let g = self.la.problem().nonlinearity();
        Ok(bound_on_box(g, &[t], lo, hi, self.opts.samples)?)
    }

    /// C3 right-hand side `(c s_max + A |g|_d (s_max + s_min)) / s_min`.
    pub fn c3_rhs(&self, c: f64, g_sup_d: f64) -> Result<f64, ConditionsError> {
        let s_min = self.s_min()?;
        Ok((c * self.s_max + self.la.a_bar() * g_sup_d * (self.s_max + s_min)) / s_min)
    }

    fn check_interval(c: f64, d: f64) -> Result<(), ConditionsError> {
        if !(c > 0.0 && c < d && d.is_finite()) {
            return Err(ConditionsError::InvalidInterval { c, d });
        }
        Ok(())
    }

    fn ambiguity_warnings(&self) -> Vec<String> {
        self.sets
            .ambiguous
            .iter()
            .map(|&t| {
                format!(
                    "t = {t}: [Psi]_n = {:e}, [S]_m = {:e} lie close to the sign threshold",
                    self.psi_n[t], self.s_m[t]
                )
            })
            .collect()
    }

    fn c1_check(&self) -> Check {
        Check::new(
            "C1",
            self.sets.c1() && self.sets.ambiguous.is_empty(),
            format!(
                "O0 = {:?}, O++ = {:?}, O+- = {:?}, O-+ = {:?}, O-- = {:?}{}",
                self.sets.o0,
                self.sets.opp,
                self.sets.opm,
                self.sets.omp,
                self.sets.omm,
                if self.sets.ambiguous.is_empty() {
                    String::new()
                } else {
                    format!(", ambiguous at {:?}", self.sets.ambiguous)
                }
            ),
        )
    }

    /// Checks C1 to C4 with the extremal bounding tables for the given
    /// orientation.
    pub fn certify_main(
        &self,
        c: f64,
        d: f64,
        orientation: Orientation,
    ) -> Result<ConditionReport, ConditionsError> {
        Ok(self
            .certify_main_orientations(c, d, &[orientation])?
            .pop()
            .expect("one orientation requested"))
    }

    /// [`certify_main`](Self::certify_main) for several orientations, sharing
    /// the sampled extrema.
    pub fn certify_main_orientations(
        &self,
        c: f64,
        d: f64,
        orientations: &[Orientation],
    ) -> Result<Vec<ConditionReport>, ConditionsError> {
        Self::check_interval(c, d)?;
        if !self.sets.o0.is_empty() {
            return Err(ConditionsError::O0Nonempty {
                indices: self.sets.o0.clone(),
            });
        }
        let s_min = self.s_min()?;
        let g_sup_d = self.g_sup(d)?;
        let c3_rhs = self.c3_rhs(c, g_sup_d)?;
        let psi_abs = self.psi_abs_sum();

        // Extrema on the region hit at +alpha* and at -alpha*.
        let mut extrema = Vec::with_capacity(self.o.len());
        let time_dep = self.la.problem().nonlinearity().time_dependent();
        let mut cache: Option<(Bound, Bound)> = None;
        for &t in &self.o {
            let (pos, neg) = if time_dep {
                (self.bound(t, c, d)?, self.bound(t, -d, -c)?)
            } else {
                match cache {
                    Some(b) => b,
                    None => {
                        let b = (self.bound(t, c, d)?, self.bound(t, -d, -c)?);
                        cache = Some(b);
                        b
                    }
                }
            };
            let (plus, minus) = if self.s_m[t] > 0.0 { (pos, neg) } else { (neg, pos) };
            extrema.push((t, plus, minus));
        }

        let mut reports = Vec::with_capacity(orientations.len());
        for &orientation in orientations {
            // Standard: psi*g > psi*K1 on the +alpha* region and
            // psi*g < psi*K2 on the -alpha* region. Reversed flips both.
            // Entries are (t, tight K1, tight K2, direction of the slack).
            let tight: Vec<(usize, f64, f64, f64)> = extrema
                .iter()
                .map(|&(t, plus, minus)| {
                    let want_low = (self.psi_n[t] > 0.0) == (orientation == Orientation::Standard);
                    if want_low {
                        (t, plus.lo, minus.hi, -1.0)
                    } else {
                        (t, plus.hi, minus.lo, 1.0)
                    }
                })
                .collect();
            // Slack relative to the size of the compared values.
            let k_scale = tight
                .iter()
                .fold(0.0f64, |a, &(_, k1, k2, _)| a.max(k1.abs()).max(k2.abs()));
            let delta = self.opts.strict_tol * (1.0 + k_scale);
            let mut k1 = BTreeMap::new();
            let mut k2 = BTreeMap::new();
            let (mut j1_tight, mut j2_tight) = (0.0, 0.0);
            for &(t, kt1, kt2, dir) in &tight {
                let psi = self.psi_n[t];
                j1_tight += psi * kt1;
                j2_tight += psi * kt2;
                k1.insert(t, kt1 + dir * delta);
                k2.insert(t, kt2 - dir * delta);
            }
            let j1: f64 = k1.iter().map(|(&t, k)| self.psi_n[t] * k).sum();
            let j2: f64 = k2.iter().map(|(&t, k)| self.psi_n[t] * k).sum();
            let c4_tol = self.opts.c4_tol * (1.0 + psi_abs * k_scale);
            let (c4, margin) = match orientation {
                Orientation::Standard => (
                    j2_tight <= c4_tol && j1_tight >= -c4_tol,
                    j1_tight.min(-j2_tight) / psi_abs,
                ),
                Orientation::Reversed => (
                    j1_tight <= c4_tol && j2_tight >= -c4_tol,
                    (-j1_tight).min(j2_tight) / psi_abs,
                ),
            };
            let c2 = margin > delta;
            let c3 = d > c3_rhs;
            let c1 = self.c1_check();
            let verdict = if !c1.passed {
                Verdict::Fail(Failure::C1Ambiguous)
            } else if !c4 {
                Verdict::Fail(Failure::C4)
            } else if !c2 {
                Verdict::Fail(Failure::C2Strictness)
            } else if !c3 {
                Verdict::Fail(Failure::C3)
            } else {
                Verdict::Pass
            };
            let c4_name = match orientation {
                Orientation::Standard => "J2 <= 0 <= J1",
                Orientation::Reversed => "J1 <= 0 <= J2",
            };
            let checks = vec![
                c1,
                Check::new(
                    "C2",
                    c2,
                    format!("strict margin {:e} vs slack {delta:e}", margin + 0.0),
                ),
                Check::new(
                    "C3",
                    c3,
                    format!(
                        "d = {d} {} (c s_max + A |g|_d (s_max + s_min)) / s_min = {c3_rhs}",
                        if c3 { ">" } else { "<=" }
                    ),
                ),
                Check::new(
                    "C4",
                    c4,
                    format!("{c4_name}: J1 = {j1_tight}, J2 = {j2_tight} (extremal tables)"),
                ),
            ];
            reports.push(ConditionReport {
                method: Method::Main,
                verdict,
                orientation,
                c,
                d,
                s_max: self.s_max,
                s_min,
                a_bar: self.la.a_bar(),
                g_sup_d,
                c3_rhs,
                j1,
                j2,
                j1_tight,
                j2_tight,
                margin,
                strict_tol: delta,
                k1,
                k2,
                sets: self.sets.clone(),
                checks,
                warnings: self.ambiguity_warnings(),
                details: None,
                basis: ESTIMATE_NOTE,
            });
        }
        Ok(reports)
    }

    /// Scans `c` over `c_grid` and, per `c`, doubles `d` from `2c` to
    /// `d_cap`, running the main check in each orientation (and the
    /// same-sign check when the signs are aligned). Returns the first pass in
    /// grid order. The scan over `c` runs in parallel; selection is by grid
    /// position, so the result does not depend on scheduling.
    pub fn auto_certificate(
        &self,
        c_grid: &[f64],
        d_cap: f64,
        orientations: &[Orientation],
    ) -> Result<AutoSearch, ConditionsError> {
        if !self.sets.o0.is_empty() {
            return Err(ConditionsError::O0Nonempty {
                indices: self.sets.o0.clone(),
            });
        }
        self.s_min()?;
        type Attempts = (Vec<(f64, f64, Orientation, String)>, Option<ConditionReport>, Option<ConditionReport>);
        let per_c: Vec<Result<Attempts, ConditionsError>> = c_grid
            .par_iter()
            .map(|&c| {
                let mut trace = Vec::new();
                let mut last = None;
                let mut d = 2.0 * c;
                while d <= d_cap {
                    let mut reports = self.certify_main_orientations(c, d, orientations)?;
                    if self.sets.alignment().is_some() {
                        let ss = self.certify_same_sign(c, d)?;
                        if orientations.contains(&ss.orientation) {
                            reports.push(ss);
                        }
                    }
                    for r in reports {
                        trace.push((c, d, r.orientation, r.verdict.to_string()));
                        if r.passed() {
                            return Ok((trace, Some(r), last));
                        }
                        if r.method == Method::Main {
                            last = Some(r);
                        }
                    }
                    d *= 2.0;
                }
                Ok((trace, None, last))
            })
            .collect();
        let mut search = AutoSearch {
            found: None,
            trace: Vec::new(),
            last: None,
        };
        for res in per_c {
            let (trace, found, last) = res?;
            search.trace.extend(trace);
            if last.is_some() {
                search.last = last;
            }
            if found.is_some() {
                search.found = found;
                break;
            }
        }
        Ok(search)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_thresholds() {
        let psi = [0.0, 1.0, -1.0, 2.0, -2.0, 1.0, 1e-12];
        let s = [1.0, 1.0, 1.0, -1.0, -1.0, 0.0, -1.0];
        let sets = sign_sets(&psi, &s, 1e-10);
        assert_eq!(sets.opp, vec![1]);
        assert_eq!(sets.omp, vec![2]);
        assert_eq!(sets.opm, vec![3]);
        assert_eq!(sets.omm, vec![4]);
        assert_eq!(sets.o0, vec![5]);
        assert_eq!(sets.o(), vec![1, 2, 3, 4]);
        assert!(!sets.c1());
        assert!(sets.ambiguous.is_empty());
        assert_eq!(sets.alignment(), None);
    }

    #[test]
    fn dead_zone_is_flagged() {
        let psi = [1.0, 5e-9];
        let s = [1.0, 1.0];
        let sets = sign_sets(&psi, &s, 1e-10);
        assert_eq!(sets.ambiguous, vec![1]);
        assert_eq!(sets.opp, vec![0, 1]);
        // Inside the zero band: silently zero.
        let sets = sign_sets(&[1.0, 5e-11], &s, 1e-10);
        assert!(sets.ambiguous.is_empty());
        assert_eq!(sets.opp, vec![0]);
    }

    #[test]
    fn degenerate_psi_gives_empty_sets() {
        let sets = sign_sets(&[0.0; 4], &[1.0, -1.0, 2.0, 0.5], 1e-10);
        assert!(sets.o().is_empty() && sets.c1());
    }

    #[test]
    fn verdict_strings() {
        assert_eq!(Verdict::Pass.to_string(), "PASS");
        assert_eq!(
            Verdict::Fail(Failure::C2Strictness).to_string(),
            "FAIL(C2-strictness)"
        );
    }
}
