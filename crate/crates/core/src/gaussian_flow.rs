//! Law flow of the distribution-dependent Vasicek model as a Gaussian
//! `(mean, variance)` pair, together with Gaussian density, relative entropy
//! and `W2` in closed form.
//!
//! With `b` and `sigma` depending on the law only through its first two
//! moments, a Gaussian (or Dirac) start stays Gaussian and the moments solve
//! ```text
//! m' = gamma - beta m + b(m, v)
//! v' = -2 beta v + sigma(m, v)^2
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VasicekParams;

const COLLAPSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianState {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianState {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Gaussian state needs finite mean and variance >= 0, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(x, 0.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    fn require_nondegenerate(&self) -> Result<()> {
        if self.variance > 0.0 {
            Ok(())
        } else {
            Err(Error::DegenerateGaussian(self.variance))
        }
    }
}

/// Nodes of an evolved flow with the coefficient values used at each node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
    pub b_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
}

impl FlowTrajectory {
    pub fn last(&self) -> GaussianState {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn rhs(params: &VasicekParams, m: f64, v: f64, t: f64) -> Result<(f64, f64)> {
    let b = params.b_fn().eval(m, v);
    let s = params.checked_sigma(m, v, t)?;
    Ok((
        params.gamma_drift() - params.beta() * m + b,
        -2.0 * params.beta() * v + s * s,
    ))
}

/// Integrate the moment system with classical RK4 on `ceil(T / dt)` equal
/// steps ending exactly at `T`.
pub fn evolve(params: &VasicekParams, init: GaussianState, horizon: f64, dt: f64) -> Result<FlowTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {horizon}")));
    }
    let init = GaussianState::new(init.mean, init.variance)?;
    let n = if horizon == 0.0 {
        0
    } else {
        (horizon / dt - 1e-9).ceil().max(1.0) as usize
    };
    let h = if n == 0 { 0.0 } else { horizon / n as f64 };

    let mut traj = FlowTrajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        b_values: Vec::with_capacity(n + 1),
        sigma_values: Vec::with_capacity(n + 1),
    };
    let push = |traj: &mut FlowTrajectory, t: f64, g: GaussianState| -> Result<()> {
        traj.times.push(t);
        traj.b_values.push(params.b_fn().eval(g.mean, g.variance));
        traj.sigma_values.push(params.checked_sigma(g.mean, g.variance, t)?);
        traj.states.push(g);
        Ok(())
    };
    push(&mut traj, 0.0, init)?;

    let (mut m, mut v) = (init.mean, init.variance);
    for k in 0..n {
        let t = k as f64 * h;
        let (k1m, k1v) = rhs(params, m, v, t)?;
        let (k2m, k2v) = rhs(params, m + 0.5 * h * k1m, v + 0.5 * h * k1v, t + 0.5 * h)?;
        let (k3m, k3v) = rhs(params, m + 0.5 * h * k2m, v + 0.5 * h * k2v, t + 0.5 * h)?;
        let (k4m, k4v) = rhs(params, m + h * k3m, v + h * k3v, t + h)?;
        m += h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let t1 = if k + 1 == n { horizon } else { (k + 1) as f64 * h };
        if v < -COLLAPSE_TOL || !v.is_finite() || !m.is_finite() {
            return Err(Error::VarianceCollapse { time: t1, variance: v });
        }
        v = v.max(0.0);
        push(&mut traj, t1, GaussianState { mean: m, variance: v })?;
    }
    Ok(traj)
}

/// Largest nodal difference between a run at `dt` and at `dt / 2`.
pub fn step_halving_error(params: &VasicekParams, init: GaussianState, horizon: f64, dt: f64) -> Result<f64> {
    let coarse = evolve(params, init, horizon, dt)?;
    let fine = evolve(params, init, horizon, 0.5 * dt)?;
    let mut err = 0.0f64;
    for (i, g) in coarse.states.iter().enumerate() {
        let f = fine.states[2 * i];
        err = err.max((g.mean - f.mean).abs()).max((g.variance - f.variance).abs());
    }
    Ok(err)
}

/// Gaussian density at `z`.
pub fn density(g: GaussianState, z: f64) -> Result<f64> {
    g.require_nondegenerate()?;
    let d = z - g.mean;
    Ok((-d * d / (2.0 * g.variance)).exp() / (2.0 * PI * g.variance).sqrt())
}

/// Relative entropy `Ent(p | q)` of two non-degenerate Gaussians.
pub fn entropy_gaussians(p: GaussianState, q: GaussianState) -> Result<f64> {
    p.require_nondegenerate()?;
    q.require_nondegenerate()?;
    // (r - 1 - ln r) / 2 with r = v_p / v_q, evaluated without cancellation near r = 1
    let d = (p.variance - q.variance) / q.variance;
    let var_part = 0.5 * (d - d.ln_1p());
    let dm = p.mean - q.mean;
    Ok(var_part.max(0.0) + dm * dm / (2.0 * q.variance))
}

/// `W2` between two Gaussians (variance 0 allowed).
pub fn w2_gaussians(p: GaussianState, q: GaussianState) -> f64 {
    let dm = p.mean - q.mean;
    let ds = p.std_dev() - q.std_dev();
    dm.hypot(ds)
}

const STATIONARY_TOL: f64 = 1e-14;
const STATIONARY_MAX_ITER: usize = 1_000_000;

/// Fixed point of the moment system by damped iteration of
/// `m = (gamma + b(m, v)) / beta`, `v = sigma(m, v)^2 / (2 beta)`.
pub fn stationary_state(params: &VasicekParams) -> Result<GaussianState> {
    let beta = params.beta();
    if !(beta > 0.0) {
        return Err(Error::NoStationaryState(format!("beta = {beta} must be > 0")));
    }
    let damping = 0.5;
    let (mut m, mut v) = (0.0f64, 1.0 / (2.0 * beta));
    for _ in 0..STATIONARY_MAX_ITER {
        let b = params.b_fn().eval(m, v);
        let s = params.sigma_fn().eval(m, v);
        let m_new = (params.gamma_drift() + b) / beta;
        let v_new = s * s / (2.0 * beta);
        let next_m = (1.0 - damping) * m + damping * m_new;
        let next_v = (1.0 - damping) * v + damping * v_new;
        if !next_m.is_finite() || !next_v.is_finite() {
            return Err(Error::NoStationaryState("iteration diverged".into()));
        }
        let change = (next_m - m).abs().max((next_v - v).abs());
        let scale = 1.0f64.max(next_m.abs()).max(next_v.abs());
        m = next_m;
        v = next_v;
        if change <= STATIONARY_TOL * scale {
            // the residual, not just the step, has to be small
            let b = params.b_fn().eval(m, v);
            let s = params.sigma_fn().eval(m, v);
            let res_m = params.gamma_drift() - beta * m + b;
            let res_v = -2.0 * beta * v + s * s;
            if res_m.abs().max(res_v.abs()) <= 1e-10 * scale {
                params.checked_sigma(m, v, f64::INFINITY)?;
                return GaussianState::new(m, v);
            }
        }
    }
    Err(Error::NoStationaryState(format!(
        "no convergence after {STATIONARY_MAX_ITER} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MeasureFunctional, VasicekRaw};
    use crate::quadrature::adaptive_simpson;

    fn params(b: MeasureFunctional, s: MeasureFunctional, beta: f64, k: f64) -> VasicekParams {
        VasicekParams::new(VasicekRaw {
            gamma_drift: 0.0,
            beta,
            b_fn: b,
            sigma_fn: s,
            lip_b: b.lipschitz(),
            lip_sigma: s.lipschitz(),
            k_bound: k,
        })
        .unwrap()
    }

    #[test]
    fn zero_horizon_is_identity() {
        let p = params(
            MeasureFunctional::Constant { c: 0.0 },
            MeasureFunctional::Constant { c: 1.0 },
            1.0,
            1.0,
        );
        let g = GaussianState::new(0.3, 0.2).unwrap();
        let tr = evolve(&p, g, 0.0, 0.01).unwrap();
        assert_eq!(tr.states, vec![g]);
    }

    #[test]
    fn constant_sigma_variance_formula() {
        let k0 = 1.5f64;
        let p = params(
            MeasureFunctional::Constant { c: 0.0 },
            MeasureFunctional::Constant { c: k0.sqrt() },
            0.7,
            2.0,
        );
        let tr = evolve(&p, GaussianState::dirac(1.0).unwrap(), 3.0, 1e-3).unwrap();
        for (t, g) in tr.times.iter().zip(&tr.states) {
            let v = k0 * (1.0 - (-1.4 * t).exp()) / 1.4;
            assert!((g.variance - v).abs() < 1e-12, "t = {t}");
            assert!((g.mean - (-0.7 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn step_halving() {
        let p = params(
            MeasureFunctional::AffineInMean { a: 0.2, c: 0.0 },
            MeasureFunctional::Constant { c: 1.0 },
            1.0,
            1.0,
        );
        let err = step_halving_error(&p, GaussianState::new(2.0, 1.0).unwrap(), 2.0, 1e-2).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn sigma_bound_is_enforced() {
        let p = params(
            MeasureFunctional::Constant { c: 0.0 },
            MeasureFunctional::AffineInStd { a: 1.0, c: 0.2 },
            -1.0,
            3.0,
        );
        let err = evolve(&p, GaussianState::new(0.0, 1.0).unwrap(), 5.0, 1e-2).unwrap_err();
        assert!(matches!(err, Error::SigmaBoundViolated { .. }));
    }

    #[test]
    fn density_examples() {
        let g = GaussianState::new(0.0, 1.0).unwrap();
        assert!((density(g, 1.0).unwrap() - 0.241_970_724_519_143_37).abs() < 1e-15);
        let h = GaussianState::new(1.5, 0.4).unwrap();
        assert!((density(h, 1.5).unwrap() - 1.0 / (2.0 * PI * 0.4).sqrt()).abs() < 1e-15);
        let s = 0.4f64.sqrt();
        let mass = adaptive_simpson(|z| density(h, z).unwrap(), 1.5 - 10.0 * s, 1.5 + 10.0 * s, 1e-13);
        assert!((mass - 1.0).abs() < 1e-10);
        assert!(matches!(
            density(GaussianState::dirac(0.0).unwrap(), 0.0),
            Err(Error::DegenerateGaussian(_))
        ));
    }

    #[test]
    fn entropy_examples() {
        let p = GaussianState::new(0.0, 1.0).unwrap();
        let q = GaussianState::new(0.0, 2.0).unwrap();
        assert_eq!(entropy_gaussians(p, p).unwrap(), 0.0);
        let exact = 0.5 * 2f64.ln() - 0.25;
        let e = entropy_gaussians(p, q).unwrap();
        assert!((e - exact).abs() < 1e-15);
        let numeric = adaptive_simpson(
            |z| {
                let a = density(p, z).unwrap();
                a * (a / density(q, z).unwrap()).ln()
            },
            -12.0,
            12.0,
            1e-12,
        );
        assert!((numeric - e).abs() < 1e-6);
        let r = GaussianState::new(1.0, 0.5).unwrap();
        let s = GaussianState::new(-1.0, 0.5).unwrap();
        assert!((entropy_gaussians(r, s).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn w2_examples() {
        let p = GaussianState::new(0.0, 1.0).unwrap();
        let q = GaussianState::new(1.0, 4.0).unwrap();
        assert!((w2_gaussians(p, q) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(w2_gaussians(p, p), 0.0);
        let a = GaussianState::dirac(0.5).unwrap();
        let b = GaussianState::dirac(-1.0).unwrap();
        assert_eq!(w2_gaussians(a, b), 1.5);
    }

    #[test]
    fn stationary_fixed_point() {
        let p = VasicekParams::new(VasicekRaw {
            gamma_drift: 0.5,
            beta: 1.0,
            b_fn: MeasureFunctional::AffineInMean { a: 0.2, c: 0.1 },
            sigma_fn: MeasureFunctional::AffineInStd { a: 0.1, c: 1.0 },
            lip_b: 0.2,
            lip_sigma: 0.1,
            k_bound: 2.0,
        })
        .unwrap();
        let g = stationary_state(&p).unwrap();
        assert!((g.mean - 0.75).abs() < 1e-12);
        let s = 0.1 * g.variance.sqrt() + 1.0;
        assert!((s * s - 2.0 * g.variance).abs() < 1e-11);
    }
}
