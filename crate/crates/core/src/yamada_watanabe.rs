//! Yamada–Watanabe smoothing functions.
//!
//! For `eps` in `(0, 1)` the density `psi_eps` is supported on `[eps/e, eps]`
//! and is the tent
//! ```text
//! psi_eps(x) = (2 / x) * T(ln x),   T = unit tent on [ln eps - 1, ln eps]
//! ```
//! so that `int psi_eps = 2 int T = 1` and `0 <= psi_eps(x) <= 2/x`.
//! `Phi_eps(y) = int_0^y psi_eps` and the smoothed absolute value
//! `V_eps(x) = int_0^{|x|} Phi_eps` are piecewise elementary in `ln x`, so
//! every quantity here is evaluated in closed form.
//!
//! On the two junctions of the tent, `V''` equals `psi_eps` which is
//! continuous there, so no one-sided choice is needed in practice.

use serde::Serialize;

use crate::error::{Error, Result};

/// A value with its first and second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YwFamily {
    eps: f64,
    ln_eps: f64,
    lo: f64,
    mid: f64,
    v_mid: f64,
    v_eps: f64,
}

/// `int (ln y - c)^2 dy = y [(ln y - c)^2 - 2 (ln y - c) + 2]`
#[inline]
fn sq_log_antiderivative(y: f64, c: f64) -> f64 {
    let l = y.ln() - c;
    y * (l * l - 2.0 * l + 2.0)
}

impl YwFamily {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {eps}"
            )));
        }
        let ln_eps = eps.ln();
        let lo = eps / std::f64::consts::E;
        let mid = eps * (-0.5f64).exp();
        let mut fam = Self {
            eps,
            ln_eps,
            lo,
            mid,
            v_mid: 0.0,
            v_eps: 0.0,
        };
        fam.v_mid = 2.0 * (sq_log_antiderivative(mid, ln_eps - 1.0) - 2.0 * lo);
        fam.v_eps = fam.v_mid + (eps - mid)
            - 2.0 * (sq_log_antiderivative(eps, ln_eps) - sq_log_antiderivative(mid, ln_eps));
        Ok(fam)
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    /// Support `[eps/e, eps]` of `psi`.
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.eps)
    }

    /// Peak location `eps e^{-1/2}`, where `psi = 2/x`.
    pub fn peak(&self) -> f64 {
        self.mid
    }

    /// Position inside the tent, `ln x - (ln eps - 1)`, in `[0, 1]` on the support.
    #[inline]
    fn tent_coord(&self, x: f64) -> f64 {
        x.ln() - (self.ln_eps - 1.0)
    }

    /// The density `psi_eps(x)`, zero outside `[eps/e, eps]` (and for `x < 0`).
    pub fn psi(&self, x: f64) -> f64 {
        if x < self.lo || x > self.eps {
            return 0.0;
        }
        let w = self.tent_coord(x).clamp(0.0, 1.0);
        let tent = if w <= 0.5 { 2.0 * w } else { 2.0 * (1.0 - w) };
        2.0 / x * tent
    }

    /// `Phi_eps(y) = int_0^y psi_eps`, in `[0, 1]`.
    pub fn phi(&self, y: f64) -> f64 {
        if y <= self.lo {
            0.0
        } else if y >= self.eps {
            1.0
        } else {
            let w = self.tent_coord(y).clamp(0.0, 1.0);
            if w <= 0.5 {
                2.0 * w * w
            } else {
                1.0 - 2.0 * (1.0 - w) * (1.0 - w)
            }
        }
    }

    /// `int_0^r Phi_eps` for `r >= 0`.
    fn v_radial(&self, r: f64) -> f64 {
        if r <= self.lo {
            0.0
        } else if r <= self.mid {
            2.0 * (sq_log_antiderivative(r, self.ln_eps - 1.0) - 2.0 * self.lo)
        } else if r <= self.eps {
            self.v_mid + (r - self.mid)
                - 2.0
                    * (sq_log_antiderivative(r, self.ln_eps)
                        - sq_log_antiderivative(self.mid, self.ln_eps))
        } else {
            self.v_eps + (r - self.eps)
        }
    }

    /// Smoothed absolute value `V_eps(x) = int_0^{|x|} int_0^y psi_eps`.
    pub fn v(&self, x: f64) -> Jet {
        let r = x.abs();
        let sign = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        Jet {
            value: self.v_radial(r),
            d1: sign * self.phi(r),
            d2: self.psi(r),
        }
    }

    /// Smoothed negative part `V0_eps(x) = int_0^{x^-} int_0^y psi_eps`.
    pub fn v0(&self, x: f64) -> Jet {
        let neg = (-x).max(0.0);
        if neg == 0.0 {
            return Jet {
                value: 0.0,
                d1: 0.0,
                d2: 0.0,
            };
        }
        Jet {
            value: self.v_radial(neg),
            d1: -self.phi(neg),
            d2: self.psi(neg),
        }
    }
}

/// One failed pointwise check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub epsilon: f64,
    pub x: f64,
    pub property: &'static str,
    pub excess: f64,
}

/// Sample points: half uniform on `[-2 eps, 2 eps]`, half log-spaced in
/// `|x| in [eps/e^2, 10]` with alternating sign.
pub fn audit_grid(eps: f64, n: usize) -> Vec<f64> {
    let half = n / 2;
    let mut xs = Vec::with_capacity(n);
    for i in 0..half {
        xs.push(-2.0 * eps + 4.0 * eps * i as f64 / (half - 1).max(1) as f64);
    }
    let (a, b) = ((eps * (-2.0f64).exp()).ln(), 10f64.ln());
    let rest = n - half;
    for i in 0..rest {
        let r = (a + (b - a) * i as f64 / (rest - 1).max(1) as f64).exp();
        xs.push(if i % 2 == 0 { r } else { -r });
    }
    xs
}

/// Check every pointwise bound on `psi`, `V` and `V0` at the given points.
///
/// Bounds checked, each to within `tol`:
/// - `0 <= psi(x) <= 2/x` on `[eps/e, eps]`, `psi = 0` off the support;
/// - `x^- - eps <= V0(x) <= x^-`, `V0(x) = 0` for `x >= -eps/e`;
/// - `V0'(x) in [-1, 0]`, `V0'(x) = 0` for `x >= -eps/e`;
/// - `0 <= V0''(x) <= 2/x^- 1_{[eps/e, eps]}(x^-)`;
/// - `|x| - eps <= V(x) <= |x|`, `sgn(x) V'(x) in [0, 1]`;
/// - `0 <= V''(x) <= 2/|x| 1_{[eps/e, eps]}(|x|)`.
pub fn audit(fam: &YwFamily, xs: &[f64], tol: f64) -> Vec<Violation> {
    let eps = fam.eps;
    let (lo, hi) = fam.support();
    let in_support = |r: f64| r >= lo && r <= hi;
    let mut out = Vec::new();
    let mut check = |x: f64, property: &'static str, excess: f64| {
        if excess > tol || excess.is_nan() {
            out.push(Violation {
                epsilon: eps,
                x,
                property,
                excess,
            });
        }
    };
    for &x in xs {
        let r = x.abs();
        let neg = (-x).max(0.0);

        if x >= 0.0 {
            let p = fam.psi(x);
            check(x, "psi >= 0", -p);
            if in_support(x) {
                check(x, "psi <= 2/x", p - 2.0 / x);
            } else {
                check(x, "psi = 0 off support", p.abs());
            }
        }

        let z = fam.v0(x);
        check(x, "V0 <= x^-", z.value - neg);
        check(x, "V0 >= x^- - eps", (neg - eps) - z.value);
        if x >= -lo {
            check(x, "V0 = 0 for x >= -eps/e", z.value.abs());
            check(x, "V0' = 0 for x >= -eps/e", z.d1.abs());
        }
        check(x, "V0' <= 0", z.d1);
        check(x, "V0' >= -1", -1.0 - z.d1);
        check(x, "V0'' >= 0", -z.d2);
        if in_support(neg) {
            check(x, "V0'' <= 2/x^-", z.d2 - 2.0 / neg);
        } else {
            check(x, "V0'' = 0 off support", z.d2.abs());
        }

        let v = fam.v(x);
        check(x, "V <= |x|", v.value - r);
        check(x, "V >= |x| - eps", (r - eps) - v.value);
        let sd = if x > 0.0 {
            v.d1
        } else if x < 0.0 {
            -v.d1
        } else {
            0.0
        };
        check(x, "sgn(x) V' >= 0", -sd);
        check(x, "sgn(x) V' <= 1", sd - 1.0);
        check(x, "V'' >= 0", -v.d2);
        if in_support(r) {
            check(x, "V'' <= 2/|x|", v.d2 - 2.0 / r);
        } else {
            check(x, "V'' = 0 off support", v.d2.abs());
        }
    }
    out
}

/// `int psi_eps` over its support through the closed-form antiderivative `Phi_eps`.
pub fn psi_mass_closed_form(fam: &YwFamily) -> f64 {
    let (lo, hi) = fam.support();
    fam.phi(hi) - fam.phi(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;

    #[test]
    fn rejects_bad_epsilon() {
        assert!(YwFamily::new(0.0).is_err());
        assert!(YwFamily::new(1.0).is_err());
        assert!(YwFamily::new(-0.5).is_err());
    }

    #[test]
    fn psi_examples() {
        let f = YwFamily::new(0.5).unwrap();
        assert_eq!(f.psi(0.5 / (2.0 * std::f64::consts::E)), 0.0);
        let x = f.peak();
        assert!((f.psi(x) - 2.0 / x).abs() < 1e-12);
        assert_eq!(psi_mass_closed_form(&f), 1.0);
        let (lo, hi) = f.support();
        let q = adaptive_simpson(|x| f.psi(x), lo, f.peak(), 1e-13)
            + adaptive_simpson(|x| f.psi(x), f.peak(), hi, 1e-13);
        assert!((q - 1.0).abs() < 1e-10);
        assert!((f.phi(hi) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn v_examples() {
        let f = YwFamily::new(0.5).unwrap();
        assert_eq!(f.v(0.0).value, 0.0);
        for x in [0.5, 0.7, 3.0, -0.5, -2.0] {
            assert_eq!(f.v(x).d1, x.signum());
        }
        let v1 = f.v(1.0).value;
        assert!((0.5..=1.0).contains(&v1));
        // quadrature oracle: V(1) = int_0^1 Phi
        let (lo, hi) = f.support();
        let q = adaptive_simpson(|y| f.phi(y), lo, f.peak(), 1e-13)
            + adaptive_simpson(|y| f.phi(y), f.peak(), hi, 1e-13)
            + (1.0 - hi);
        assert!((v1 - q).abs() < 1e-10, "{v1} vs {q}");
    }

    #[test]
    fn v0_examples() {
        let f = YwFamily::new(0.5).unwrap();
        assert_eq!(f.v0(1.0).value, 0.0);
        let z = f.v0(-1.0).value;
        assert!((0.5..=1.0).contains(&z));
        assert_eq!(f.v0(-0.5 / (2.0 * std::f64::consts::E)).d1, 0.0);
        // V0(x) = V(x) for x <= 0
        assert_eq!(f.v0(-0.3).value, f.v(-0.3).value);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for eps in [0.5, 0.1, 0.01] {
            let f = YwFamily::new(eps).unwrap();
            let (lo, _) = f.support();
            for k in 1..=40 {
                let y = lo * 0.9 + (eps * 1.5 - lo * 0.9) * k as f64 / 40.0;
                let phi_q = if y <= lo {
                    0.0
                } else if y <= f.peak() {
                    adaptive_simpson(|x| f.psi(x), lo, y, 1e-14)
                } else {
                    adaptive_simpson(|x| f.psi(x), lo, f.peak(), 1e-14)
                        + adaptive_simpson(|x| f.psi(x), f.peak(), y.min(eps), 1e-14)
                };
                assert!((f.phi(y) - phi_q).abs() < 1e-9, "Phi eps={eps} y={y}");
                let v_q = adaptive_simpson(|s| f.phi(s), 0.0, y, 1e-14);
                assert!((f.v(y).value - v_q).abs() < 1e-9, "V eps={eps} y={y}");
            }
        }
    }

    #[test]
    fn audit_passes_and_uniform_rate() {
        for eps in [0.5, 0.1, 0.01] {
            let f = YwFamily::new(eps).unwrap();
            let xs = audit_grid(eps, 1000);
            assert_eq!(xs.len(), 1000);
            let bad = audit(&f, &xs, 1e-10);
            assert!(bad.is_empty(), "{bad:?}");
            let sup = xs
                .iter()
                .map(|&x| x.abs() - f.v(x).value)
                .fold(0.0f64, f64::max);
            assert!(sup <= eps);
        }
    }

    #[test]
    fn continuity_at_junctions() {
        let f = YwFamily::new(0.1).unwrap();
        for x in [f.support().0, f.peak(), f.support().1] {
            let h = 1e-12;
            assert!((f.v(x - h).value - f.v(x + h).value).abs() < 1e-11);
            assert!((f.phi(x - h) - f.phi(x + h)).abs() < 1e-9);
        }
    }
}
