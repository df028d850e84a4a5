//! Small numerical helpers shared by the model and bound modules.

/// `(e^{c t} - 1) / c`, equal to `t` at `c = 0`.
///
/// Routed through `exp_m1` so that the ratio stays accurate for tiny `c t`.
pub fn expm1_ratio(c: f64, t: f64) -> f64 {
    if c == 0.0 {
        t
    } else {
        (c * t).exp_m1() / c
    }
}

/// `(1 - e^{-c t}) / c`, equal to `t` at `c = 0`.
pub fn one_minus_exp_neg_ratio(c: f64, t: f64) -> f64 {
    expm1_ratio(-c, t)
}

/// Positive part `max(x, 0)`.
#[inline]
pub fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// Result of a one-dimensional minimisation over an open interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub value: f64,
    pub argmin: f64,
    /// Best point was within `1e-6` of the interval length from an endpoint,
    /// so the infimum may not be attained.
    pub at_boundary: bool,
    /// Minimum over the seed grid alone, before golden-section refinement.
    pub grid_value: f64,
}

const BOUNDARY_OFFSETS: [f64; 3] = [1e-3, 1e-6, 1e-9];
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Minimise `f` over the open interval `(lo, hi)`.
///
/// Seeds with a two-sided log grid of `grid_points` points (dense near both
/// endpoints) plus the fixed boundary offsets, then refines the best bracket
/// with golden-section search. Non-finite evaluations are treated as `+inf`.
pub fn minimize_open_interval<F>(f: F, lo: f64, hi: f64, grid_points: usize) -> Minimum
where
    F: Fn(f64) -> f64,
{
    assert!(hi > lo, "empty interval ({lo}, {hi})");
    let len = hi - lo;
    let eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut xs: Vec<f64> = Vec::with_capacity(grid_points + 2 * BOUNDARY_OFFSETS.len() + 1);
    for &o in &BOUNDARY_OFFSETS {
        xs.push(lo + o * len);
        xs.push(hi - o * len);
    }
    let half = grid_points.max(2) / 2;
    // log-spaced offsets from 1e-9 to 1/2 of the length, mirrored at both ends
    let (a, b) = (1e-9f64.ln(), 0.5f64.ln());
    for i in 0..half {
        let s = (a + (b - a) * i as f64 / (half - 1) as f64).exp();
        xs.push(lo + s * len);
        xs.push(hi - s * len);
    }
    xs.push(lo + 0.5 * len);
    xs.retain(|&x| x > lo && x < hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let vals: Vec<f64> = xs.iter().map(|&x| eval(x)).collect();
    let (best, &grid_value) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");

    let left = if best == 0 { xs[0] } else { xs[best - 1] };
    let right = if best + 1 == xs.len() {
        xs[best]
    } else {
        xs[best + 1]
    };

    let (mut x_best, mut v_best) = (xs[best], grid_value);
    if right > left {
        let (mut a, mut b) = (left, right);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..200 {
            if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = eval(d);
            }
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v < v_best {
                x_best = x;
                v_best = v;
            }
        }
    }

    let at_boundary = (x_best - lo) <= 1e-6 * len || (hi - x_best) <= 1e-6 * len;
    Minimum {
        value: v_best,
        argmin: x_best,
        at_boundary,
        grid_value,
    }
}
