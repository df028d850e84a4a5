//! Model parameter records and the closed-form pieces of both models.
//!
//! The mean-field CKLS model
//! ```text
//! dX_t = (alpha - delta X_t + gamma E[X_t]) dt + |X_t|^theta dW_t,  X_0 >= 0
//! ```
//! and the distribution-dependent Vasicek model
//! ```text
//! dX_t = (gamma - beta X_t) dt + b(L_{X_t}) dt + sigma(L_{X_t}) dW_t
//! ```
//! where `b` and `sigma` are functionals of the law through its mean and variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::one_minus_exp_neg_ratio;

fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

/// Raw CKLS fields as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CklsRaw {
    pub alpha: f64,
    pub delta: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Validated mean-field CKLS parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CklsRaw", into = "CklsRaw")]
pub struct CklsParams {
    alpha: f64,
    delta: f64,
    gamma: f64,
    theta: f64,
    harnack_ok: bool,
    ergodic_ok: bool,
}

impl CklsParams {
    pub fn new(alpha: f64, delta: f64, gamma: f64, theta: f64) -> Result<Self> {
        for (name, v) in [
            ("alpha", alpha),
            ("delta", delta),
            ("gamma", gamma),
            ("theta", theta),
        ] {
            require_finite(name, v)?;
        }
        if alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must be >= 0, got {alpha}"
            )));
        }
        if gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be >= 0, got {gamma}"
            )));
        }
        if !(0.5..1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [1/2, 1), got {theta}"
            )));
        }
        let harnack_ok = delta > 0.0
            && ((theta > 0.5 && alpha >= theta / 2.0) || (theta == 0.5 && alpha > 0.5));
        let ergodic_ok = delta > gamma;
        Ok(Self {
            alpha,
            delta,
            gamma,
            theta,
            harnack_ok,
            ergodic_ok,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Hypotheses of the log-Harnack inequality: `delta > 0` and either
    /// `theta > 1/2, alpha >= theta/2` or `theta = 1/2, alpha > 1/2`.
    pub fn harnack_ok(&self) -> bool {
        self.harnack_ok
    }

    /// `delta > gamma`: W1-contraction and a unique invariant law.
    pub fn ergodic_ok(&self) -> bool {
        self.ergodic_ok
    }

    /// `theta == 1/2`, the CIR-type case.
    pub fn is_cir(&self) -> bool {
        self.theta == 0.5
    }

    /// Diffusion coefficient `|x|^theta`.
    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        let a = x.abs();
        if self.theta == 0.5 {
            a.sqrt()
        } else if self.theta == 0.75 {
            let r = a.sqrt();
            r * r.sqrt()
        } else {
            a.powf(self.theta)
        }
    }
}

impl TryFrom<CklsRaw> for CklsParams {
    type Error = Error;
    fn try_from(r: CklsRaw) -> Result<Self> {
        Self::new(r.alpha, r.delta, r.gamma, r.theta)
    }
}

impl From<CklsParams> for CklsRaw {
    fn from(p: CklsParams) -> Self {
        Self {
            alpha: p.alpha,
            delta: p.delta,
            gamma: p.gamma,
            theta: p.theta,
        }
    }
}

/// Closed-form mean of the mean-field CKLS law started from mean `m0`:
/// `e^{-(delta-gamma)t} m0 + alpha (1 - e^{-(delta-gamma)t}) / (delta-gamma)`,
/// with the `delta = gamma` value `m0 + alpha t`.
pub fn exact_mean(params: &CklsParams, m0: f64, t: f64) -> Result<f64> {
    if !(m0 >= 0.0 && m0.is_finite()) {
        return Err(Error::DomainError(format!("initial mean must be >= 0, got {m0}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::DomainError(format!("time must be >= 0, got {t}")));
    }
    Ok(exact_mean_unchecked(params, m0, t))
}

#[inline]
pub(crate) fn exact_mean_unchecked(params: &CklsParams, m0: f64, t: f64) -> f64 {
    let c = params.delta - params.gamma;
    (-c * t).exp() * m0 + params.alpha * one_minus_exp_neg_ratio(c, t)
}

/// Monotone map `T(x) = x^{1-theta} / (1-theta)`; `rho(x, y) = |T(x) - T(y)|`.
#[inline]
pub fn intrinsic_map(x: f64, theta: f64) -> f64 {
    let e = 1.0 - theta;
    if theta == 0.5 {
        2.0 * x.sqrt()
    } else {
        x.powf(e) / e
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.5..1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::DomainError(format!("theta must lie in [1/2, 1), got {theta}")))
    }
}

/// Intrinsic metric `rho(x, y) = |x^{1-theta} - y^{1-theta}| / (1-theta)` on `[0, inf)`.
pub fn rho(x: f64, y: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::DomainError(format!(
            "rho is defined on [0, inf), got ({x}, {y})"
        )));
    }
    if x == y {
        return Ok(0.0);
    }
    Ok((intrinsic_map(x, theta) - intrinsic_map(y, theta)).abs())
}

/// A functional of a law on the real line that depends on its first two moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureFunctional {
    Constant { c: f64 },
    /// `a * mean + c`
    AffineInMean { a: f64, c: f64 },
    /// `a * sqrt(variance) + c`
    AffineInStd { a: f64, c: f64 },
}

impl MeasureFunctional {
    #[inline]
    pub fn eval(&self, mean: f64, variance: f64) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::AffineInMean { a, c } => a * mean + c,
            Self::AffineInStd { a, c } => a * variance.max(0.0).sqrt() + c,
        }
    }

    /// Lipschitz constant with respect to W2.
    ///
    /// Both `|mean(mu) - mean(nu)|` and `|sd(mu) - sd(nu)|` are bounded by
    /// `W2(mu, nu)` on the line, so the affine kinds have constant `|a|`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::AffineInMean { a, .. } | Self::AffineInStd { a, .. } => a.abs(),
        }
    }

    fn values(&self) -> [f64; 2] {
        match *self {
            Self::Constant { c } => [c, 0.0],
            Self::AffineInMean { a, c } | Self::AffineInStd { a, c } => [a, c],
        }
    }
}

/// Raw Vasicek fields as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VasicekRaw {
    pub gamma_drift: f64,
    pub beta: f64,
    pub b_fn: MeasureFunctional,
    pub sigma_fn: MeasureFunctional,
    pub lip_b: f64,
    pub lip_sigma: f64,
    pub k_bound: f64,
}

/// Validated distribution-dependent Vasicek parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VasicekRaw", into = "VasicekRaw")]
pub struct VasicekParams {
    raw: VasicekRaw,
}

impl VasicekParams {
    pub fn new(raw: VasicekRaw) -> Result<Self> {
        for (name, v) in [
            ("gamma_drift", raw.gamma_drift),
            ("beta", raw.beta),
            ("lip_b", raw.lip_b),
            ("lip_sigma", raw.lip_sigma),
            ("k_bound", raw.k_bound),
        ] {
            require_finite(name, v)?;
        }
        for (name, f) in [("b_fn", raw.b_fn), ("sigma_fn", raw.sigma_fn)] {
            for v in f.values() {
                require_finite(name, v)?;
            }
        }
        if raw.k_bound < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "k_bound must be >= 1, got {}",
                raw.k_bound
            )));
        }
        if raw.lip_b < 0.0 || raw.lip_sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constants must be >= 0, got lip_b = {}, lip_sigma = {}",
                raw.lip_b, raw.lip_sigma
            )));
        }
        if raw.lip_b < raw.b_fn.lipschitz() {
            return Err(Error::InvalidParameter(format!(
                "lip_b = {} is below the W2-Lipschitz constant {} of b_fn",
                raw.lip_b,
                raw.b_fn.lipschitz()
            )));
        }
        if raw.lip_sigma < raw.sigma_fn.lipschitz() {
            return Err(Error::InvalidParameter(format!(
                "lip_sigma = {} is below the W2-Lipschitz constant {} of sigma_fn",
                raw.lip_sigma,
                raw.sigma_fn.lipschitz()
            )));
        }
        Ok(Self { raw })
    }

    pub fn gamma_drift(&self) -> f64 {
        self.raw.gamma_drift
    }
    pub fn beta(&self) -> f64 {
        self.raw.beta
    }
    pub fn b_fn(&self) -> MeasureFunctional {
        self.raw.b_fn
    }
    pub fn sigma_fn(&self) -> MeasureFunctional {
        self.raw.sigma_fn
    }
    pub fn lip_b(&self) -> f64 {
        self.raw.lip_b
    }
    pub fn lip_sigma(&self) -> f64 {
        self.raw.lip_sigma
    }
    pub fn k_bound(&self) -> f64 {
        self.raw.k_bound
    }
    pub fn raw(&self) -> &VasicekRaw {
        &self.raw
    }

    /// Evaluate `sigma` on a state and check `sigma^2` against `[1/K, K]`.
    pub fn checked_sigma(&self, mean: f64, variance: f64, time: f64) -> Result<f64> {
        let s = self.raw.sigma_fn.eval(mean, variance);
        let s2 = s * s;
        let k = self.raw.k_bound;
        let slack = 1e-12;
        if s2 < (1.0 - slack) / k || s2 > k * (1.0 + slack) || !s2.is_finite() {
            return Err(Error::SigmaBoundViolated {
                time,
                sigma_sq: s2,
                k_bound: k,
            });
        }
        Ok(s)
    }
}

impl TryFrom<VasicekRaw> for VasicekParams {
    type Error = Error;
    fn try_from(r: VasicekRaw) -> Result<Self> {
        Self::new(r)
    }
}

impl From<VasicekParams> for VasicekRaw {
    fn from(p: VasicekParams) -> Self {
        p.raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ckls(alpha: f64, delta: f64, gamma: f64, theta: f64) -> CklsParams {
        CklsParams::new(alpha, delta, gamma, theta).unwrap()
    }

    #[test]
    fn rejects_theta_outside_range() {
        assert!(matches!(
            CklsParams::new(1.0, 1.0, 0.0, 0.4),
            Err(Error::InvalidParameter(_))
        ));
        assert!(CklsParams::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(CklsParams::new(-0.1, 1.0, 0.0, 0.5).is_err());
        assert!(CklsParams::new(1.0, 1.0, -0.1, 0.5).is_err());
        assert!(CklsParams::new(f64::NAN, 1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn derived_flags() {
        assert!(ckls(0.5, 1.0, 0.0, 0.75).harnack_ok());
        assert!(!ckls(0.1, 1.0, 0.0, 0.75).harnack_ok());
        assert!(!ckls(0.5, 1.0, 0.0, 0.5).harnack_ok());
        assert!(ckls(0.51, 1.0, 0.0, 0.5).harnack_ok());
        assert!(!ckls(1.0, 0.0, 0.0, 0.75).harnack_ok());
        assert!(!ckls(1.0, 1.0, 1.0, 0.5).ergodic_ok());
        assert!(ckls(1.0, 1.0, 0.25, 0.5).ergodic_ok());
        // negative delta is accepted, only flagged
        let p = ckls(1.0, -0.5, 0.0, 0.5);
        assert!(!p.harnack_ok() && !p.ergodic_ok());
    }

    #[test]
    fn exact_mean_examples() {
        let p = ckls(1.0, 0.5, 0.5, 0.5);
        assert!((exact_mean(&p, 2.0, 1.0).unwrap() - 3.0).abs() < 1e-15);
        let q = ckls(0.7, 1.3, 0.2, 0.75);
        assert_eq!(exact_mean(&q, 1.7, 0.0).unwrap(), 1.7);
        let r = ckls(0.0, 1.0, 0.0, 0.5);
        assert!((exact_mean(&r, 1.0, 2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!(exact_mean(&r, -1.0, 1.0).is_err());
        assert!(exact_mean(&r, 1.0, -1.0).is_err());
    }

    #[test]
    fn exact_mean_matches_forward_euler() {
        let r = ckls(0.0, 1.0, 0.0, 0.5);
        let dt = 1e-6;
        let n = (2f64.ln() / dt).round() as usize;
        let h = 2f64.ln() / n as f64;
        let mut m = 1.0f64;
        for _ in 0..n {
            m += h * (r.alpha() - r.delta() * m);
        }
        assert!((m - exact_mean(&r, 1.0, 2f64.ln()).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(3.0, 3.0, 0.5).unwrap(), 0.0);
        assert!((rho(1.0, 4.0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((rho(0.0, 16.0, 0.75).unwrap() - 8.0).abs() < 1e-14);
        assert!(matches!(rho(-1.0, 1.0, 0.5), Err(Error::DomainError(_))));
        assert!(rho(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn rho_matches_quadrature() {
        // midpoint rule on a substitution r = s^4 removing the r^{-3/4} singularity
        let n = 200_000;
        let top = 16f64.powf(0.25);
        let mut acc = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) * top / n as f64;
            let r: f64 = s.powi(4);
            acc += r.powf(-0.75) * 4.0 * s.powi(3) * top / n as f64;
        }
        assert!((acc - rho(0.0, 16.0, 0.75).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn measure_functional_lipschitz() {
        let f = MeasureFunctional::AffineInStd { a: -0.3, c: 1.0 };
        assert_eq!(f.lipschitz(), 0.3);
        assert!((f.eval(5.0, 4.0) - 0.4).abs() < 1e-15);
        assert_eq!(MeasureFunctional::Constant { c: 2.0 }.lipschitz(), 0.0);
    }

    fn vraw() -> VasicekRaw {
        VasicekRaw {
            gamma_drift: 0.0,
            beta: 1.0,
            b_fn: MeasureFunctional::AffineInMean { a: 0.2, c: 0.0 },
            sigma_fn: MeasureFunctional::AffineInStd { a: 0.1, c: 1.0 },
            lip_b: 0.2,
            lip_sigma: 0.1,
            k_bound: 2.0,
        }
    }

    #[test]
    fn vasicek_validation() {
        assert!(VasicekParams::new(vraw()).is_ok());
        let mut r = vraw();
        r.k_bound = 0.5;
        assert!(VasicekParams::new(r).is_err());
        let mut r = vraw();
        r.lip_b = 0.1;
        assert!(VasicekParams::new(r).is_err());
        let mut r = vraw();
        r.lip_sigma = -1.0;
        assert!(VasicekParams::new(r).is_err());
        let mut r = vraw();
        r.beta = -0.5;
        assert!(VasicekParams::new(r).is_ok());
    }

    #[test]
    fn sigma_band_is_checked() {
        let p = VasicekParams::new(vraw()).unwrap();
        assert!(p.checked_sigma(0.0, 1.0, 0.0).is_ok());
        assert!(matches!(
            p.checked_sigma(0.0, 100.0, 0.0),
            Err(Error::SigmaBoundViolated { .. })
        ));
    }

    #[test]
    fn serde_roundtrip_validates() {
        let p: CklsParams =
            serde_json::from_str(r#"{"alpha":1,"delta":1,"gamma":0.25,"theta":0.5}"#).unwrap();
        assert!(p.harnack_ok());
        assert!(serde_json::from_str::<CklsParams>(
            r#"{"alpha":1,"delta":1,"gamma":0.25,"theta":0.3}"#
        )
        .is_err());
        assert!(serde_json::from_str::<CklsParams>(
            r#"{"alpha":1,"delta":1,"gamma":0.25,"theta":0.5,"x":1}"#
        )
        .is_err());
        let v = VasicekParams::new(vraw()).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<VasicekParams>(&s).unwrap(), v);
        assert!(serde_json::from_str::<MeasureFunctional>(r#"{"kind":"constant","c":1,"a":2}"#)
            .is_err());
    }
}
