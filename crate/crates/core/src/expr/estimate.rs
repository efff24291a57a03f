//! Sampling-based range and slope estimates for `g` on boxes
//! `t_set × [x_lo, x_hi]`. These are estimates, not enclosures.

use serde::Serialize;

use super::{EvalError, Expr};

/// Default number of Chebyshev samples per time index.
pub const DEFAULT_SAMPLES: usize = 512;

const GOLDEN_ITERS: usize = 80;

/// Anything that can be sampled as `g(t, x)`.
pub trait ScalarField: Sync {
    fn value(&self, t: usize, x: f64) -> Result<f64, EvalError>;

    /// When false, estimators sample a single time index.
    fn time_dependent(&self) -> bool {
        true
    }
}

impl ScalarField for Expr {
    fn value(&self, t: usize, x: f64) -> Result<f64, EvalError> {
        self.eval(t as f64, x)
    }

    fn time_dependent(&self) -> bool {
        self.depends_on_t()
    }
}

impl<F: Fn(usize, f64) -> Result<f64, EvalError> + Sync> ScalarField for F {
    fn value(&self, t: usize, x: f64) -> Result<f64, EvalError> {
        self(t, x)
    }
}

/// Sampled infimum and supremum with the points where they were seen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
    pub argmin: (usize, f64),
    pub argmax: (usize, f64),
}

impl Bound {
    fn seed(t: usize, x: f64, v: f64) -> Self {
        Bound {
            lo: v,
            hi: v,
            argmin: (t, x),
            argmax: (t, x),
        }
    }

    fn record(&mut self, t: usize, x: f64, v: f64) {
        if v < self.lo {
            self.lo = v;
            self.argmin = (t, x);
        }
        if v > self.hi {
            self.hi = v;
            self.argmax = (t, x);
        }
    }

    /// `max(|lo|, |hi|)`, the sampled sup norm.
    pub fn abs_max(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Chebyshev–Lobatto points on `[lo, hi]`, ascending, endpoints exact.
pub fn lobatto_points(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    assert!(samples >= 2, "need at least two samples");
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let last = samples - 1;
    (0..samples)
        .map(|k| match k {
            0 => lo,
            k if k == last => hi,
            k => mid - half * (std::f64::consts::PI * k as f64 / last as f64).cos(),
        })
        .collect()
}

/// Lobatto points merged with a geometric grid `±10^(k/8)`, `k >= -32`,
/// and zero, restricted to `[lo, hi]`. The geometric part keeps features
/// near the origin visible on intervals much wider than they are.
pub fn sample_points(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let mut xs = lobatto_points(lo, hi, samples);
    let reach = lo.abs().max(hi.abs());
    let inside = |x: f64| lo < x && x < hi;
    if inside(0.0) {
        xs.push(0.0);
    }
    for k in -32..=2400 {
        let mag = 10f64.powf(k as f64 / 8.0);
        if mag >= reach {
            break;
        }
        xs.extend([-mag, mag].into_iter().filter(|&x| inside(x)));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn effective_times<'a, F: ScalarField + ?Sized>(f: &F, t_set: &'a [usize]) -> &'a [usize] {
    assert!(!t_set.is_empty(), "empty time set");
    if f.time_dependent() {
        t_set
    } else {
        &t_set[..1]
    }
}

/// Golden-section search for a minimum of `sign * g(t, .)` on `[a, b]`,
/// recording every evaluation into `bound`.
fn golden_polish<F: ScalarField + ?Sized>(
    f: &F,
    t: usize,
    mut a: f64,
    mut b: f64,
    sign: f64,
    bound: &mut Bound,
) -> Result<(), EvalError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let eval = |x: f64, bound: &mut Bound| -> Result<f64, EvalError> {
        let v = f.value(t, x)?;
        bound.record(t, x, v);
        Ok(sign * v)
    };
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1, bound)?;
    let mut f2 = eval(x2, bound)?;
    for _ in 0..GOLDEN_ITERS {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1, bound)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2, bound)?;
        }
    }
    Ok(())
}

/// Sampled `inf`/`sup` of `g` over `t_set × [x_lo, x_hi]`.
///
/// Each time index is sampled at [`sample_points`], then
/// the best minimum and maximum samples are refined by golden-section search
/// between their neighbours. The returned bound brackets every evaluation
/// performed.
pub fn bound_on_box<F: ScalarField + ?Sized>(
    f: &F,
    t_set: &[usize],
    x_lo: f64,
    x_hi: f64,
    samples: usize,
) -> Result<Bound, EvalError> {
    assert!(x_lo <= x_hi, "empty interval");
    let xs = sample_points(x_lo, x_hi, samples);
    let mut bound: Option<Bound> = None;
    for &t in effective_times(f, t_set) {
        let vals = xs
            .iter()
            .map(|&x| f.value(t, x))
            .collect::<Result<Vec<_>, _>>()?;
        let mut local = Bound::seed(t, xs[0], vals[0]);
        let (mut kmin, mut kmax) = (0, 0);
        for (k, (&x, &v)) in xs.iter().zip(&vals).enumerate() {
            if v < local.lo {
                kmin = k;
            }
            if v > local.hi {
                kmax = k;
            }
            local.record(t, x, v);
        }
        if x_hi > x_lo {
            let nb = |k: usize| (xs[k.saturating_sub(1)], xs[(k + 1).min(xs.len() - 1)]);
            let (a, b) = nb(kmin);
            golden_polish(f, t, a, b, 1.0, &mut local)?;
            let (a, b) = nb(kmax);
            golden_polish(f, t, a, b, -1.0, &mut local)?;
        }
        match bound.as_mut() {
            None => bound = Some(local),
            Some(acc) => {
                acc.record(local.argmin.0, local.argmin.1, local.lo);
                acc.record(local.argmax.0, local.argmax.1, local.hi);
            }
        }
    }
    Ok(bound.expect("non-empty time set"))
}

/// Estimated Lipschitz constant of `g(t, .)` on `[x_lo, x_hi]`, maximized
/// over `t_set`: the largest secant slope between neighbouring
/// [`sample_points`] or central-difference slope at a sample.
pub fn lipschitz_estimate<F: ScalarField + ?Sized>(
    f: &F,
    t_set: &[usize],
    x_lo: f64,
    x_hi: f64,
    samples: usize,
) -> Result<f64, EvalError> {
    assert!(x_lo <= x_hi, "empty interval");
    if x_lo == x_hi {
        return Ok(0.0);
    }
    let xs = sample_points(x_lo, x_hi, samples);
    let mut best: f64 = 0.0;
    for &t in effective_times(f, t_set) {
        let vals = xs
            .iter()
            .map(|&x| f.value(t, x))
            .collect::<Result<Vec<_>, _>>()?;
        for k in 1..xs.len() {
            let dx = xs[k] - xs[k - 1];
            if dx > 0.0 {
                best = best.max(((vals[k] - vals[k - 1]) / dx).abs());
            }
        }
        for &x in &xs {
            let h = 6e-6 * (1.0 + x.abs());
            if x - h < x_lo || x + h > x_hi {
                continue;
            }
            let slope = (f.value(t, x + h)? - f.value(t, x - h)?) / (2.0 * h);
            best = best.max(slope.abs());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    #[test]
    fn sine_extrema_on_half_period() {
        let g = parse("sin(x)").unwrap();
        let b = bound_on_box(&g, &[0], 0.0, PI, 64).unwrap();
        assert!(b.lo.abs() < 1e-6);
        assert!((b.hi - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_and_monotone() {
        let b = bound_on_box(&parse("2").unwrap(), &[0, 1, 2], -1.0, 1.0, 16).unwrap();
        assert_eq!((b.lo, b.hi), (2.0, 2.0));
        let b = bound_on_box(&parse("x").unwrap(), &[0], -3.0, 5.0, DEFAULT_SAMPLES).unwrap();
        assert!((b.lo + 3.0).abs() < 1e-12 && (b.hi - 5.0).abs() < 1e-12);
    }

    #[test]
    fn time_dependent_box_scans_every_t() {
        let g = parse("t*x").unwrap();
        let b = bound_on_box(&g, &[0, 1, 2, 3], -1.0, 2.0, 8).unwrap();
        assert_eq!((b.lo, b.hi), (-3.0, 6.0));
        assert_eq!(b.argmax, (3, 2.0));
    }

    #[test]
    fn domain_error_propagates() {
        assert!(bound_on_box(&parse("ln(x)").unwrap(), &[0], -1.0, 1.0, 8).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let l = lipschitz_estimate(&parse("3*x+1").unwrap(), &[0], -5.0, 5.0, DEFAULT_SAMPLES).unwrap();
        assert!((l - 3.0).abs() < 1e-9);
        let l = lipschitz_estimate(&parse("sin(x)").unwrap(), &[0], -PI, PI, DEFAULT_SAMPLES).unwrap();
        assert!((l - 1.0).abs() < 1e-3);
        let l = lipschitz_estimate(&parse("abs(x)").unwrap(), &[0], -1.0, 1.0, DEFAULT_SAMPLES).unwrap();
        assert!((l - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wide_intervals_still_see_the_origin() {
        let g = parse("tanh(x)").unwrap();
        let l = lipschitz_estimate(&g, &[0], -1e6, 1e6, DEFAULT_SAMPLES).unwrap();
        assert!((l - 1.0).abs() < 1e-3, "{l}");
        let b = bound_on_box(&parse("exp(-x^2)").unwrap(), &[0], -1e5, 1e5, 64).unwrap();
        assert!((b.hi - 1.0).abs() < 1e-9);
        let xs = sample_points(0.5, 2.0, 5);
        assert!(xs.iter().all(|&x| (0.5..=2.0).contains(&x)));
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn lobatto_endpoints_exact() {
        let xs = lobatto_points(-2.0, 7.0, 9);
        assert_eq!(xs[0], -2.0);
        assert_eq!(xs[8], 7.0);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    proptest::proptest! {
        #[test]
        fn bound_brackets_every_sample(a in -5.0f64..5.0, w in 0.01f64..5.0, k in 0u32..4) {
            let g = parse("x^3 - 2*x + sin(3*x) + t").unwrap();
            let ts: Vec<usize> = (0..=k as usize).collect();
            let b = bound_on_box(&g, &ts, a, a + w, 32).unwrap();
            for &t in &ts {
                for x in lobatto_points(a, a + w, 32) {
                    let v = g.eval(t as f64, x).unwrap();
                    proptest::prop_assert!(b.lo <= v && v <= b.hi);
                }
            }
        }
    }
}
