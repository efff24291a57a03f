//! Special cases that reduce to the main check: sign-aligned weights,
//! sublinear growth, small linear growth and the Landesman–Lazer limits.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    Check, Checker, ConditionReport, ConditionsError, Details, Failure, Method, Orientation,
    Verdict, ESTIMATE_NOTE,
};
use crate::expr::{bound_on_box, lobatto_points, sample_points, ScalarField};

const DOUBLING_CAP: usize = 64;
const LIMIT_TOL: f64 = 1e-6;
const LIMIT_PROBES: [f64; 3] = [1.0, 10.0, 100.0];
const TAIL_SAMPLES: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SameSignDetails {
    /// `+1` when `[Psi]_n [S]_m >= 0` everywhere, `-1` when `<= 0`.
    pub alignment: i8,
    /// Sign of `g` on `[c, d]` (the opposite sign holds on `[-d, -c]`).
    pub g_sign: i8,
    pub g_range_pos: (f64, f64),
    pub g_range_neg: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublinearDetails {
    pub m1: f64,
    pub m2: f64,
    pub beta: f64,
    /// `A M1` and `A M2`.
    pub k1c: f64,
    pub k2c: f64,
    pub denominator: f64,
    pub d_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallLinearDetails {
    pub r: f64,
    pub m1: f64,
    pub m2: f64,
    pub growth_ratio: f64,
    pub doublings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandesmanLazerDetails {
    pub g_plus: f64,
    pub g_minus: f64,
    pub l1: f64,
    pub l2: f64,
    pub eps: f64,
    pub r_eps: f64,
    pub j1_eps: f64,
    pub j2_eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub small_linear: Option<SmallLinearDetails>,
}

fn pick(mut reports: Vec<ConditionReport>) -> ConditionReport {
    let idx = reports.iter().position(|r| r.passed()).unwrap_or(0);
    reports.swap_remove(idx)
}

impl Checker<'_> {
    /// Samples `|g(t, x)| <= m1 |x|^beta + m2` on `[-d, d]`; returns the
    /// worst excess (positive on violation).
    fn envelope_excess(&self, m1: f64, m2: f64, beta: f64, d: f64) -> Result<f64, ConditionsError> {
        let g = self.la.problem().nonlinearity();
        let times: &[usize] = if g.time_dependent() { &self.times } else { &self.times[..1] };
        let xs = sample_points(-d, d, self.opts.samples);
        let mut worst = f64::NEG_INFINITY;
        for &t in times {
            for &x in &xs {
                let env = m1 * x.abs().powf(beta) + m2;
                let excess = g.value(t, x)?.abs() - env - 1e-12 * (1.0 + env);
                worst = worst.max(excess);
            }
        }
        Ok(worst)
    }

    /// Sign-aligned case: when `[Psi]_n [S]_m` has one sign, the bounding
    /// tables may all be zero, so only the sign of `g` on `[c, d]` and
    /// `[-d, -c]` and the C3 inequality matter.
    pub fn certify_same_sign(&self, c: f64, d: f64) -> Result<ConditionReport, ConditionsError> {
        Self::check_interval(c, d)?;
        let alignment = self.sets.alignment().ok_or(ConditionsError::Alignment)?;
        let s_min = self.s_min()?;
        let g_sup_d = self.g_sup(d)?;
        let c3_rhs = self.c3_rhs(c, g_sup_d)?;
        let g = self.la.problem().nonlinearity();
        let pos = bound_on_box(g, &self.times, c, d, self.opts.samples)?;
        let neg = bound_on_box(g, &self.times, -d, -c, self.opts.samples)?;
        // Strictness slack relative to the extrema nearest zero.
        let near_zero = pos.lo.abs().min(pos.hi.abs()).max(neg.lo.abs().min(neg.hi.abs()));
        let delta = self.opts.strict_tol * (1.0 + near_zero);

        let c1 = self.sets.c1() && self.sets.ambiguous.is_empty();
        let (g_sign, margin) = if pos.lo > delta && neg.hi < -delta {
            (1i8, pos.lo.min(-neg.hi))
        } else if pos.hi < -delta && neg.lo > delta {
            (-1, (-pos.hi).min(neg.lo))
        } else {
            (0, (pos.lo.min(-neg.hi)).max((-pos.hi).min(neg.lo)))
        };
        let c3 = g_sign != 0;
        let c4 = d > c3_rhs;
        let orientation = if alignment * g_sign < 0 {
            Orientation::Reversed
        } else {
            Orientation::Standard
        };
        let verdict = if !c1 {
            Verdict::Fail(Failure::C1Star)
        } else if !c3 {
            Verdict::Fail(Failure::C3Star)
        } else if !c4 {
            Verdict::Fail(Failure::C4Star)
        } else {
            Verdict::Pass
        };
        let zeros: BTreeMap<usize, f64> = self.o.iter().map(|&t| (t, 0.0)).collect();
        let checks = vec![
            Check::new(
                "C1*",
                c1,
                format!("O0 = {:?}, ambiguous = {:?}", self.sets.o0, self.sets.ambiguous),
            ),
            Check::new(
                "C2*",
                true,
                format!(
                    "[Psi]_n [S]_m {} 0 for all t",
                    if alignment > 0 { ">=" } else { "<=" }
                ),
            ),
            Check::new(
                "C3*",
                c3,
                format!(
                    "g on [c,d] in [{}, {}], on [-d,-c] in [{}, {}]",
                    pos.lo, pos.hi, neg.lo, neg.hi
                ),
            ),
            Check::new(
                "C4*",
                c4,
                format!(
                    "d = {d} {} {c3_rhs}",
                    if c4 { ">" } else { "<=" }
                ),
            ),
        ];
        Ok(ConditionReport {
            method: Method::SameSign,
            verdict,
            orientation,
            c,
            d,
            s_max: self.s_max,
            s_min,
            a_bar: self.la.a_bar(),
            g_sup_d,
            c3_rhs,
            j1: 0.0,
            j2: 0.0,
            j1_tight: 0.0,
            j2_tight: 0.0,
            margin,
            strict_tol: delta,
            k1: zeros.clone(),
            k2: zeros,
            sets: self.sets.clone(),
            checks,
            warnings: self.ambiguity_warnings(),
            details: Some(Details::SameSign(SameSignDetails {
                alignment,
                g_sign,
                g_range_pos: (pos.lo, pos.hi),
                g_range_neg: (neg.lo, neg.hi),
            })),
            basis: ESTIMATE_NOTE,
        })
    }

    /// Sublinear growth `|g| <= M1 |x|^beta + M2`: computes the smallest
    /// `d` for which C3 follows from the envelope, then runs the main check
    /// there.
    pub fn certify_sublinear(
        &self,
        c: f64,
        m1: f64,
        m2: f64,
        beta: f64,
        orientations: &[Orientation],
    ) -> Result<ConditionReport, ConditionsError> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(ConditionsError::InvalidParameter(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        if !(m1 >= 0.0 && m2 >= 0.0 && c > 0.0) {
            return Err(ConditionsError::InvalidParameter(
                "need M1, M2 >= 0 and c > 0".into(),
            ));
        }
        let s_min = self.s_min()?;
        let sum = self.s_max + s_min;
        let k1c = self.la.a_bar() * m1;
        let k2c = self.la.a_bar() * m2;
        let denominator = s_min - k1c * beta * sum;
        if denominator <= 0.0 {
            return Err(ConditionsError::Inapplicable(format!(
                "s_min - A M1 beta (s_max + s_min) = {denominator} <= 0"
            )));
        }
        let d_threshold = (c * self.s_max + (k1c * (1.0 - beta) + k2c) * sum) / denominator;
        let d = d_threshold.max(c) * (1.0 + 1e-9) + 1e-12;
        let excess = self.envelope_excess(m1, m2, beta, d)?;
        let mut report = pick(self.certify_main_orientations(c, d, orientations)?);
        let mut checks = vec![
            Check::new(
                "C2**",
                excess <= 0.0,
                format!("|g| <= {m1} |x|^{beta} + {m2} on [-d, d] (worst excess {excess:e})"),
            ),
            Check::new(
                "C3**",
                true,
                format!("denominator {denominator} > 0, d = {d} > {d_threshold}"),
            ),
        ];
        checks.append(&mut report.checks);
        report.checks = checks;
        if excess > 0.0 && report.verdict.passed() {
            report.verdict = Verdict::Fail(Failure::Envelope);
        }
        report.method = Method::Sublinear;
        report.details = Some(Details::Sublinear(SublinearDetails {
            m1,
            m2,
            beta,
            k1c,
            k2c,
            denominator,
            d_threshold,
        }));
        Ok(report)
    }

    /// Small linear growth `|g| <= M1 |x| + M2` with `A M1 (s_max + s_min) /
    /// s_min < 1`: doubles `d` from `2R` until C3 holds, then runs the main
    /// check on `[R, d]`.
    pub fn certify_small_linear(
        &self,
        r: f64,
        m1: f64,
        m2: f64,
        orientations: &[Orientation],
    ) -> Result<ConditionReport, ConditionsError> {
        if !(r > 0.0 && m1 >= 0.0 && m2 >= 0.0) {
            return Err(ConditionsError::InvalidParameter(
                "need R > 0 and M1, M2 >= 0".into(),
            ));
        }
        let s_min = self.s_min()?;
        let growth_ratio = self.la.a_bar() * m1 * (self.s_max + s_min) / s_min;
        if growth_ratio >= 1.0 {
            return Err(ConditionsError::GrowthRatio {
                ratio: growth_ratio,
            });
        }
        let mut d = 2.0 * r;
        let mut doublings = 0;
        loop {
            if d > self.c3_rhs(r, self.g_sup(d)?)? {
                break;
            }
            doublings += 1;
            if doublings > DOUBLING_CAP {
                return Err(ConditionsError::IterationCap {
                    iterations: DOUBLING_CAP,
                    d,
                });
            }
            d *= 2.0;
        }
        let excess = self.envelope_excess(m1, m2, 1.0, d)?;
        let mut report = pick(self.certify_main_orientations(r, d, orientations)?);
        let mut checks = vec![
            Check::new(
                "growth",
                true,
                format!("A M1 (s_max + s_min) / s_min = {growth_ratio} < 1"),
            ),
            Check::new(
                "envelope",
                excess <= 0.0,
                format!("|g| <= {m1} |x| + {m2} on [-d, d] (worst excess {excess:e})"),
            ),
        ];
        checks.append(&mut report.checks);
        report.checks = checks;
        if excess > 0.0 && report.verdict.passed() {
            report.verdict = Verdict::Fail(Failure::Envelope);
        }
        report.method = Method::SmallLinear;
        report.details = Some(Details::SmallLinear(SmallLinearDetails {
            r,
            m1,
            m2,
            growth_ratio,
            doublings,
        }));
        Ok(report)
    }

    /// Landesman–Lazer: `g` independent of `t` with limits `g(+inf) =
    /// g_plus`, `g(-inf) = g_minus`. Checks `L1 L2 < 0`, picks
    /// `eps = min(|L1|, |L2|) / (2 sum_O |Psi_n|)`, finds `R(eps)` beyond
    /// which `g` is within `eps` of its limits, and runs the small-growth
    /// check with `M1 = 0`.
    ///
    /// `L1 L2 >= 0` is returned as a `FAIL(H4)` report, not an error.
    pub fn certify_landesman_lazer(
        &self,
        g_plus: f64,
        g_minus: f64,
        r: f64,
    ) -> Result<ConditionReport, ConditionsError> {
        if !(g_plus.is_finite() && g_minus.is_finite() && r > 0.0) {
            return Err(ConditionsError::InvalidParameter(
                "limits must be finite and R > 0".into(),
            ));
        }
        let g = self.la.problem().nonlinearity();
        let mut checks = Vec::new();

        if g.time_dependent() {
            let span = 10.0 * (1.0 + r);
            let mut xs = lobatto_points(-span, span, 64);
            xs.extend(LIMIT_PROBES.iter().flat_map(|k| [1e9 * (1.0 + r) * k, -1e9 * (1.0 + r) * k]));
            for &x in &xs {
                let base = g.value(0, x)?;
                for &t in &self.times[1..] {
                    let value = g.value(t, x)?;
                    if (value - base).abs() > 1e-12 * (1.0 + base.abs()) {
                        return Err(ConditionsError::TimeDependent { t, x, value, base });
                    }
                }
            }
            checks.push(Check::new("H1", true, "g(t, x) sampled independent of t".into()));
        } else {
            checks.push(Check::new("H1", true, "g does not depend on t".into()));
        }

        for k in LIMIT_PROBES {
            for (x, limit) in [(1e9 * (1.0 + r) * k, g_plus), (-1e9 * (1.0 + r) * k, g_minus)] {
                let value = g.value(0, x)?;
                if (value - limit).abs() > LIMIT_TOL * (1.0 + limit.abs()) {
                    return Err(ConditionsError::LimitMismatch { x, value, limit });
                }
            }
        }
        checks.push(Check::new(
            "H2",
            true,
            format!("g(+inf) = {g_plus}, g(-inf) = {g_minus} (sampled)"),
        ));

        if !self.sets.o0.is_empty() {
            return Err(ConditionsError::O0Nonempty {
                indices: self.sets.o0.clone(),
            });
        }
        let c1 = self.c1_check();
        checks.push(Check::new("H3", c1.passed, c1.detail));

        let sum_of = |set: &[usize]| set.iter().map(|&t| self.psi_n[t]).sum::<f64>();
        let sp = sum_of(&self.sets.opp) + sum_of(&self.sets.omp);
        let sm = sum_of(&self.sets.opm) + sum_of(&self.sets.omm);
        let l1 = g_plus * sp + g_minus * sm;
        let l2 = g_minus * sp + g_plus * sm;
        let h4 = l1 * l2 < 0.0;
        checks.push(Check::new("H4", h4, format!("L1 = {l1}, L2 = {l2}")));
        let psi_abs = self.psi_abs_sum();
        let s_min = self.s_min()?;

        if !h4 {
            return Ok(ConditionReport {
                method: Method::LandesmanLazer,
                verdict: Verdict::Fail(Failure::H4),
                orientation: Orientation::Standard,
                c: r,
                d: r,
                s_max: self.s_max,
                s_min,
                a_bar: self.la.a_bar(),
                g_sup_d: 0.0,
                c3_rhs: 0.0,
                j1: l1,
                j2: l2,
                j1_tight: l1,
                j2_tight: l2,
                margin: 0.0,
                strict_tol: 0.0,
                k1: BTreeMap::new(),
                k2: BTreeMap::new(),
                sets: self.sets.clone(),
                checks,
                warnings: self.ambiguity_warnings(),
                details: Some(Details::LandesmanLazer(LandesmanLazerDetails {
                    g_plus,
                    g_minus,
                    l1,
                    l2,
                    eps: 0.0,
                    r_eps: r,
                    j1_eps: l1,
                    j2_eps: l2,
                    small_linear: None,
                })),
                basis: ESTIMATE_NOTE,
            });
        }
        let orientation = if l1 > 0.0 {
            Orientation::Standard
        } else {
            Orientation::Reversed
        };
        let eps = 0.5 * l1.abs().min(l2.abs()) / psi_abs;
        let r_eps = self.tail_radius(g_plus, g_minus, eps, r)?;
        let m2 = self.g_sup(r_eps)?.max(g_plus.abs().max(g_minus.abs()) + eps);
        let (j1_eps, j2_eps) = match orientation {
            Orientation::Standard => (l1 - eps * psi_abs, l2 + eps * psi_abs),
            Orientation::Reversed => (l1 + eps * psi_abs, l2 - eps * psi_abs),
        };
        checks.push(Check::new(
            "tail",
            true,
            format!("|g - g(+-inf)| < eps = {eps} beyond R = {r_eps}; J1 = {j1_eps}, J2 = {j2_eps}"),
        ));

        let mut report = self.certify_small_linear(r_eps, 0.0, m2, &[orientation])?;
        let small = match report.details.take() {
            Some(Details::SmallLinear(s)) => Some(s),
            _ => None,
        };
        checks.append(&mut report.checks);
        report.checks = checks;
        report.method = Method::LandesmanLazer;
        report.details = Some(Details::LandesmanLazer(LandesmanLazerDetails {
            g_plus,
            g_minus,
            l1,
            l2,
            eps,
            r_eps,
            j1_eps,
            j2_eps,
            small_linear: small,
        }));
        Ok(report)
    }

    /// Smallest `R' = r 2^k` such that sampled `|g(x) - g_plus| < eps` for
    /// `x >= R'` and `|g(x) - g_minus| < eps` for `x <= -R'`.
    fn tail_radius(&self, g_plus: f64, g_minus: f64, eps: f64, r: f64) -> Result<f64, ConditionsError> {
        let g = self.la.problem().nonlinearity();
        let mut radius = r;
        for _ in 0..DOUBLING_CAP {
            let far = 1e9 * (1.0 + radius) * 100.0;
            let ratio = (far / radius).ln();
            let mut ok = true;
            for k in 0..TAIL_SAMPLES {
                let x = radius * (ratio * k as f64 / (TAIL_SAMPLES - 1) as f64).exp();
                if (g.value(0, x)? - g_plus).abs() >= eps || (g.value(0, -x)? - g_minus).abs() >= eps {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(radius);
            }
            radius *= 2.0;
        }
        Err(ConditionsError::IterationCap {
            iterations: DOUBLING_CAP,
            d: radius,
        })
    }
}
