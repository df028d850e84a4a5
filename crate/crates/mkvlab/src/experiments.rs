//! One runner per experiment kind.
//!
//! Runners return an [`Outcome`]; wrapping it into a report and writing
//! files is left to the caller.

use std::path::Path;

use mkvlab_core::bounds::{
    self, dirac_moment, harnack_addend_ckls, inverse_moment_bound, sigma_t_vasicek, vasicek_rates,
    w1_rate_ckls,
};
use mkvlab_core::gaussian_flow::{self, entropy_gaussians, stationary_state, w2_gaussians, GaussianState};
use mkvlab_core::metrics::{self, fit_exponential_rate, log_ratio_moment, power_moment, wasserstein_p};
use mkvlab_core::model::exact_mean;
use mkvlab_core::particle::{
    estimate_inverse_moment, simulate_ckls, simulate_coupled_ckls, simulate_vasicek_particles, MeanFieldMode,
};
use mkvlab_core::quadrature::{adaptive_simpson, GaussHermite};
use mkvlab_core::rng::{derive_seed, NoiseStream};
use mkvlab_core::yamada_watanabe::{audit, audit_grid, psi_mass_closed_form, YwFamily};
use mkvlab_core::{CklsParams, EmpiricalMeasure, Error, InitialLaw, ParticleEnsemble, SimConfig};

use crate::config::{self, ConfigError, Experiment, ExperimentConfig, Init, InitSpec, SeriesMode, SimSpec};
use crate::io::{fmt_f64, Series};
use crate::report::{Check, Outcome};

/// Failure of a run after the config parsed.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] Error),
}

type Res<T> = std::result::Result<T, RunError>;

fn cfg_err(path: &str, message: impl Into<String>) -> RunError {
    RunError::Config(ConfigError {
        path: path.to_string(),
        message: message.into(),
    })
}

/// Seed tags for the independent streams an experiment draws.
const TAG_MU: u64 = 1;
const TAG_NU: u64 = 2;
const TAG_INIT: u64 = 3;

/// Snapshot grid used when the config does not pin one.
const DEFAULT_SNAPSHOTS: usize = 10;

pub fn run(cfg: &ExperimentConfig, seed: u64) -> Res<Outcome> {
    let base = cfg.base_dir.as_path();
    match &cfg.experiment {
        Experiment::SimulateCkls(c) => simulate_ckls_run(c, base, seed),
        Experiment::SimulateVasicek(c) => simulate_vasicek_run(c, base, seed),
        Experiment::VerifyHarnackCkls(c) => harnack_ckls(c, base, seed),
        Experiment::VerifyHarnackVasicek(c) => harnack_vasicek(c),
        Experiment::VerifyW1Contraction(c) => w1_contraction(c, base, seed),
        Experiment::VerifyW2Entropy(c) => w2_entropy(c),
        Experiment::VerifyInverseMoment(c) => inverse_moment(c, seed),
        Experiment::VerifyYw(c) => yw(c),
        Experiment::VerifyLemmaIne(c) => lemma_ine(c),
        Experiment::StationaryCkls(c) => stationary(c, base, seed),
    }
}

fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| horizon * k as f64 / n as f64).collect()
}

fn every_times(start: f64, span: f64, every: f64) -> Vec<f64> {
    let n = (span / every + 0.5).floor() as usize;
    (0..=n).map(|k| (start + k as f64 * every).min(start + span)).collect()
}

fn horizon(sim: &SimSpec) -> Res<f64> {
    sim.required_horizon().map_err(|m| cfg_err("sim.horizon", m))
}

fn sim_config(sim: &SimSpec, horizon: f64, default_times: Vec<f64>, seed: u64) -> Res<SimConfig> {
    sim.to_sim(horizon, default_times, seed).map_err(|m| cfg_err("sim", m))
}

fn law(spec: &InitSpec, base: &Path, field: &str) -> Res<InitialLaw> {
    spec.load_law(base, field).map_err(|m| cfg_err(field, m))
}

fn law_measure(l: &InitialLaw) -> Res<EmpiricalMeasure> {
    Ok(match l {
        InitialLaw::Dirac(x) => EmpiricalMeasure::dirac(*x)?,
        InitialLaw::Measure(m) => m.clone(),
    })
}

/// Sample mean and its standard error.
fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn closest(snaps: &[ParticleEnsemble], t: f64) -> &ParticleEnsemble {
    snaps
        .iter()
        .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
        .expect("at least one snapshot")
}

fn at(t: f64) -> String {
    format!("t={}", fmt_f64(t))
}

fn simulate_ckls_run(c: &config::SimulateCkls, base: &Path, seed: u64) -> Res<Outcome> {
    let h = horizon(&c.sim)?;
    let init = law(&c.init, base, "init")?;
    let sim = sim_config(&c.sim, h, uniform_times(h, DEFAULT_SNAPSHOTS), seed)?;
    let snaps = simulate_ckls(&c.params, &init, &sim)?;

    let mut out = Outcome::new(match c.series {
        SeriesMode::Summary => Series::new(&[
            "time", "mean", "variance", "stderr", "min", "q05", "q50", "q95", "max", "exact_mean",
        ]),
        SeriesMode::Particles => Series::new(&["time", "particle", "state"]),
    });
    let m0 = init.mean();
    for e in &snaps {
        let s = e.summary();
        let exact = exact_mean(&c.params, m0, e.time)?;
        let tol = 3.0 * s.stderr + 5.0 * sim.dt;
        out.check(Check::close(&format!("mean@{}", at(e.time)), s.mean, exact, tol).with("stderr", s.stderr));
        match c.series {
            SeriesMode::Summary => out.series.push(&[
                s.time, s.mean, s.variance, s.stderr, s.min, s.q05, s.q50, s.q95, s.max, exact,
            ]),
            SeriesMode::Particles => {
                for (i, &x) in e.states.iter().enumerate() {
                    out.series.push(&[e.time, i as f64, x]);
                }
            }
        }
    }
    out.diag("n_particles", sim.n_particles);
    out.diag("mean_field_mode", sim.mean_field_mode);
    out.diag("final", snaps.last().map(|e| e.summary()));
    Ok(out)
}

/// Particle-engine law for a Vasicek run; Gaussian inits are sampled.
fn vasicek_particle_law(init: Init, n: usize, seed: u64) -> Res<(InitialLaw, GaussianState)> {
    match init {
        Init::Law(l) => {
            let m = law_measure(&l)?;
            let g = GaussianState::new(m.mean(), m.variance())?;
            Ok((l, g))
        }
        Init::Gaussian(g) => {
            let noise = NoiseStream::new(derive_seed(seed, TAG_INIT));
            let sd = g.std_dev();
            let xs = (0..n as u64).map(|i| g.mean + sd * noise.normal(i, 0)).collect();
            Ok((InitialLaw::Measure(EmpiricalMeasure::uniform(xs)?), g))
        }
    }
}

fn simulate_vasicek_run(c: &config::SimulateVasicek, base: &Path, seed: u64) -> Res<Outcome> {
    let h = horizon(&c.sim)?;
    let sim = sim_config(&c.sim, h, uniform_times(h, DEFAULT_SNAPSHOTS), seed)?;
    let init = c.init.load(base).map_err(|m| cfg_err("init", m))?;
    let (law, g0) = vasicek_particle_law(init, sim.n_particles, seed)?;
    let snaps = simulate_vasicek_particles(&c.params, &law, &sim)?;
    let flow_dt = c.flow_dt.unwrap_or(sim.dt);

    let mut out = Outcome::new(match c.series {
        SeriesMode::Summary => Series::new(&[
            "time",
            "mean",
            "variance",
            "stderr",
            "flow_mean",
            "flow_variance",
        ]),
        SeriesMode::Particles => Series::new(&["time", "particle", "state"]),
    });
    for e in &snaps {
        let flow = if e.time == 0.0 {
            g0
        } else {
            gaussian_flow::evolve(&c.params, g0, e.time, flow_dt)?.last()
        };
        let s = e.summary();
        let n = e.n() as f64;
        let m4 = e.states.iter().map(|x| (x - s.mean).powi(4)).sum::<f64>() / n;
        let se_var = ((m4 - s.variance * s.variance).max(0.0) / n).sqrt();
        out.check(
            Check::close(&format!("mean@{}", at(e.time)), s.mean, flow.mean, 3.0 * s.stderr + 5.0 * sim.dt)
                .with("stderr", s.stderr),
        );
        out.check(
            Check::close(
                &format!("variance@{}", at(e.time)),
                s.variance,
                flow.variance,
                3.0 * se_var + 5.0 * sim.dt * flow.variance.max(1.0),
            )
            .with("stderr", se_var),
        );
        match c.series {
            SeriesMode::Summary => {
                out.series
                    .push(&[e.time, s.mean, s.variance, s.stderr, flow.mean, flow.variance])
            }
            SeriesMode::Particles => {
                for (i, &x) in e.states.iter().enumerate() {
                    out.series.push(&[e.time, i as f64, x]);
                }
            }
        }
    }
    out.diag("n_particles", sim.n_particles);
    out.diag("flow_dt", flow_dt);
    Ok(out)
}

/// `mu0[x^{1-2 theta}]`, or `mu0[ln((x+1)/x)]` at `theta = 1/2`.
fn harnack_moment(l: &InitialLaw, theta: f64) -> Res<f64> {
    Ok(match l {
        InitialLaw::Dirac(x) => dirac_moment(theta, *x),
        InitialLaw::Measure(m) if theta > 0.5 => power_moment(m, 1.0 - 2.0 * theta)?,
        InitialLaw::Measure(m) => log_ratio_moment(m)?,
    })
}

fn harnack_ckls(c: &config::VerifyHarnackCkls, base: &Path, seed: u64) -> Res<Outcome> {
    if c.sim.mean_field_mode != MeanFieldMode::ExactMean {
        return Err(cfg_err(
            "sim.mean_field_mode",
            "the decoupled flows of this experiment require exact_mean",
        ));
    }
    if c.sim.snapshot_times.is_some() || c.sim.snapshot_every.is_some() {
        return Err(cfg_err("sim", "snapshots are taken at `horizons`; do not set a snapshot grid"));
    }
    let p = &c.params;
    let theta = p.theta();
    let mu0 = law(&c.mu0, base, "mu0")?;
    let nu0 = law(&c.nu0, base, "nu0")?;
    let (mu_m, nu_m) = (law_measure(&mu0)?, law_measure(&nu0)?);
    let w2rho = metrics::wasserstein_rho2(&mu_m, &nu_m, theta)?;
    let w1 = wasserstein_p(&mu_m, &nu_m, 1.0)?;
    let moment = harnack_moment(&mu0, theta)?;

    let mut horizons = c.horizons.clone();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    let mut out = Outcome::new(Series::new(&[
        "horizon",
        "test_function",
        "lhs",
        "lhs_stderr",
        "log_rhs",
        "log_rhs_stderr",
        "addend",
        "margin",
    ]));
    // Bounds first: a violated hypothesis must stop the run before any simulation.
    let mut addends = Vec::with_capacity(horizons.len());
    for &t in &horizons {
        let rep = harnack_addend_ckls(p, t, w2rho, w1, moment)?;
        addends.push(rep.rhs_value);
        out.bound(at(t), rep);
    }

    let t_max = *horizons.last().expect("validated non-empty");
    let mut times = vec![0.0];
    times.extend_from_slice(&horizons);
    let cfg_mu = sim_config(&c.sim, t_max, times.clone(), derive_seed(seed, TAG_MU))?;
    let snaps_mu = simulate_ckls(p, &mu0, &cfg_mu)?;
    // Equal laws share one ensemble, so the margin is the exact Jensen gap.
    let same = mu0 == nu0;
    let snaps_nu = if same {
        snaps_mu.clone()
    } else {
        let cfg_nu = sim_config(&c.sim, t_max, times, derive_seed(seed, TAG_NU))?;
        simulate_ckls(p, &nu0, &cfg_nu)?
    };

    for (&t, &addend) in horizons.iter().zip(&addends) {
        let x = closest(&snaps_mu, t);
        let y = closest(&snaps_nu, t);
        for f in &c.test_functions {
            let (lhs, se_l, log_rhs, se_r) = if f.is_constant() {
                let l = f.log_f(0.0);
                (l, 0.0, l, 0.0)
            } else {
                let (mf, sf) = mean_se(x.states.iter().map(|&s| f.f(s)));
                let (ml, sl) = mean_se(y.states.iter().map(|&s| f.log_f(s)));
                (ml, sl, mf.ln(), sf / mf)
            };
            let tol = 3.0 * se_l.hypot(se_r);
            let check = Check::le(&format!("harnack@{},f={}", at(t), f.label()), lhs, log_rhs + addend, tol)
                .with("log_rhs", log_rhs)
                .with("addend", addend)
                .with("lhs_stderr", se_l)
                .with("log_rhs_stderr", se_r)
                .with("simulated_time", x.time);
            let margin = check.margin;
            out.check(check);
            out.series.push_cells(vec![
                fmt_f64(t),
                f.label(),
                fmt_f64(lhs),
                fmt_f64(se_l),
                fmt_f64(log_rhs),
                fmt_f64(se_r),
                fmt_f64(addend),
                fmt_f64(margin),
            ]);
        }
    }
    out.diag("w2rho", w2rho);
    out.diag("w1", w1);
    out.diag("mu0_moment", moment);
    out.diag("shared_ensemble", same);
    out.diag("n_particles", cfg_mu.n_particles);
    Ok(out)
}

/// `2 beta K / (e^{2 beta t} - 1)`, the classical coefficient.
fn classical_sigma(beta: f64, k: f64, t: f64) -> f64 {
    if beta == 0.0 {
        k / t
    } else {
        2.0 * beta * k / (2.0 * beta * t).exp_m1()
    }
}

fn harnack_vasicek(c: &config::VerifyHarnackVasicek) -> Res<Outcome> {
    let gh = GaussHermite::new(c.quad_nodes);
    let mut out = Outcome::new(Series::new(&[
        "case",
        "t",
        "test_function",
        "lhs",
        "log_rhs",
        "sigma_t",
        "w2_init",
        "rhs",
        "margin",
    ]));
    for (i, case) in c.cases.iter().enumerate() {
        let p = case.params.unwrap_or(c.params);
        let mu0 = case
            .mu0
            .load_gaussian(&format!("cases[{i}].mu0"))
            .map_err(|m| cfg_err(&format!("cases[{i}].mu0"), m))?;
        let nu0 = case
            .nu0
            .load_gaussian(&format!("cases[{i}].nu0"))
            .map_err(|m| cfg_err(&format!("cases[{i}].nu0"), m))?;
        let t = case.t;
        if t == 0.0 {
            let v = mu0.variance.min(nu0.variance);
            if v == 0.0 {
                return Err(Error::DegenerateGaussian(v).into());
            }
        }
        let mu_t = gaussian_flow::evolve(&p, mu0, t, c.flow_dt)?.last();
        let nu_t = gaussian_flow::evolve(&p, nu0, t, c.flow_dt)?.last();
        for g in [mu_t, nu_t] {
            if !(g.variance > 0.0) {
                return Err(Error::DegenerateGaussian(g.variance).into());
            }
        }
        let f = case.f;
        let lhs = gh.expect(mu_t.mean, mu_t.variance, |x| f.log_f(x));
        let log_rhs = gh.expect(nu_t.mean, nu_t.variance, |x| f.f(x)).ln();
        let sig = sigma_t_vasicek(&p, t)?;
        let w2 = w2_gaussians(mu0, nu0);
        let rhs = log_rhs + sig * w2 * w2;
        let check = Check::le(&format!("case[{i}]:{},f={}", at(t), f.label()), lhs, rhs, 1e-8)
            .with("log_rhs", log_rhs)
            .with("sigma_t", sig)
            .with("w2_init", w2)
            .with("mu_t", mu_t)
            .with("nu_t", nu_t);
        let margin = check.margin;
        out.check(check);
        if p.lip_b() == 0.0 && p.lip_sigma() == 0.0 {
            let reference = classical_sigma(p.beta(), p.k_bound(), t);
            out.check(Check::close(&format!("case[{i}]:classical_sigma"), sig, reference, 1e-12));
        }
        out.series.push_cells(vec![
            i.to_string(),
            fmt_f64(t),
            f.label(),
            fmt_f64(lhs),
            fmt_f64(log_rhs),
            fmt_f64(sig),
            fmt_f64(w2),
            fmt_f64(rhs),
            fmt_f64(margin),
        ]);
    }
    out.diag("quad_nodes", c.quad_nodes);
    out.diag("flow_dt", c.flow_dt);
    Ok(out)
}

fn not_ergodic_ckls(p: &CklsParams) -> Res<f64> {
    let r = w1_rate_ckls(p);
    if !r.ergodic {
        return Err(Error::NotErgodic { rate: r.rate }.into());
    }
    Ok(r.rate)
}

fn w1_contraction(c: &config::VerifyW1Contraction, base: &Path, seed: u64) -> Res<Outcome> {
    let rate = not_ergodic_ckls(&c.params)?;
    let h = horizon(&c.sim)?;
    let a = law(&c.init_a, base, "init_a")?;
    let b = law(&c.init_b, base, "init_b")?;
    let w1_0 = wasserstein_p(&law_measure(&a)?, &law_measure(&b)?, 1.0)?;
    let sim = sim_config(&c.sim, h, uniform_times(h, 50), seed)?;
    let run = simulate_coupled_ckls(&c.params, &a, &b, &sim)?;

    let mut out = Outcome::new(Series::new(&[
        "time",
        "w1",
        "mean_distance",
        "distance_stderr",
        "bound",
    ]));
    let mut times = Vec::new();
    let mut curve = Vec::new();
    for (k, (ea, eb)) in run.a.iter().zip(&run.b).enumerate() {
        let t = ea.time;
        let w1 = wasserstein_p(&ea.to_measure()?, &eb.to_measure()?, 1.0)?;
        let (md, se) = (run.mean_distance[k], run.distance_stderr[k]);
        let rel = if md > 0.0 { se / md } else { 0.0 };
        let bound = (-rate * t).exp() * w1_0;
        out.check(
            Check::le(&format!("w1@{}", at(t)), w1, bound, bound * 3.0 * rel)
                .with("relative_mc_error", rel)
                .with("mean_distance", md),
        );
        out.series.push(&[t, w1, md, se, bound]);
        times.push(t);
        curve.push(w1);
    }

    if curve.iter().all(|&w| w == 0.0) {
        out.check(Check::trivial("w1_rate", "identical initial laws, curve is identically zero"));
    } else {
        let (ts, ws): (Vec<f64>, Vec<f64>) = times.iter().zip(&curve).filter(|(_, &w)| w > 0.0).unzip();
        let fit = fit_exponential_rate(&ts, &ws)?;
        out.check(
            Check::ge("w1_rate", fit.rate, rate, 0.05)
                .with("r_squared", fit.r_squared)
                .with("points", ts.len()),
        );
    }
    out.diag("rate", rate);
    out.diag("w1_initial", w1_0);
    out.diag("n_particles", sim.n_particles);
    Ok(out)
}

fn tail_rate_check(name: &str, times: &[f64], values: &[f64], rate: f64, tol: f64) -> Res<Check> {
    if values.iter().all(|&v| v == 0.0) {
        return Ok(Check::trivial(name, "curve is identically zero"));
    }
    let fit = fit_exponential_rate(times, values)?;
    Ok(Check::ge(name, fit.rate, rate, tol)
        .with("r_squared", fit.r_squared)
        .with("from", times[0])
        .with("to", times[times.len() - 1]))
}

fn w2_entropy(c: &config::VerifyW2Entropy) -> Res<Outcome> {
    let p = &c.params;
    let rates = vasicek_rates(p);
    if !rates.w2.ergodic {
        return Err(Error::NotErgodic { rate: rates.w2.rate }.into());
    }
    let a0 = c.init_a.load_gaussian("init_a").map_err(|m| cfg_err("init_a", m))?;
    let b0 = c.init_b.load_gaussian("init_b").map_err(|m| cfg_err("init_b", m))?;
    let fa = gaussian_flow::evolve(p, a0, c.horizon, c.dt)?;
    let fb = gaussian_flow::evolve(p, b0, c.horizon, c.dt)?;
    let stat = stationary_state(p)?;
    let w2_0 = w2_gaussians(a0, b0);

    let mut out = Outcome::new(Series::new(&[
        "time",
        "w2",
        "w2_bound",
        "entropy_a",
        "entropy_b",
        "w2_a_stationary",
        "w2_b_stationary",
    ]));
    let mut w2s = Vec::with_capacity(fa.len());
    let mut ent_a = Vec::with_capacity(fa.len());
    let mut ent_b = Vec::with_capacity(fa.len());
    let (mut worst, mut worst_t) = (f64::NEG_INFINITY, 0.0);
    for k in 0..fa.len() {
        let t = fa.times[k];
        let (sa, sb) = (fa.states[k], fb.states[k]);
        let w2 = w2_gaussians(sa, sb);
        let bound = (-rates.w2.rate * t).exp() * w2_0;
        if w2 - bound > worst {
            worst = w2 - bound;
            worst_t = t;
        }
        let (ea, eb) = (entropy_gaussians(sa, stat)?, entropy_gaussians(sb, stat)?);
        out.series.push(&[
            t,
            w2,
            bound,
            ea,
            eb,
            w2_gaussians(sa, stat),
            w2_gaussians(sb, stat),
        ]);
        w2s.push(w2);
        ent_a.push(ea);
        ent_b.push(eb);
    }
    out.check(Check::le("wet_pointwise", worst, 0.0, 1e-6).with("worst_time", worst_t));

    if w2_0 == 0.0 && w2s.iter().all(|&w| w == 0.0) {
        out.check(Check::trivial("w2_rate", "identical initial laws"));
    } else {
        let (ts, ws): (Vec<f64>, Vec<f64>) = fa.times.iter().zip(&w2s).filter(|(_, &w)| w > 0.0).unzip();
        out.check(tail_rate_check("w2_rate", &ts, &ws, rates.w2.rate, 1e-3)?);
    }
    let start = fa.times.partition_point(|&t| t < c.tail_start * c.horizon);
    let tail_t = &fa.times[start..];
    out.check(tail_rate_check("entropy_tail_rate[a]", tail_t, &ent_a[start..], rates.entropy.rate, 1e-3)?);
    out.check(tail_rate_check("entropy_tail_rate[b]", tail_t, &ent_b[start..], rates.entropy.rate, 1e-3)?);

    out.diag("rates", rates);
    out.diag("stationary", stat);
    out.diag("nodes", fa.len());
    Ok(out)
}

/// One-sided standard normal quantile.
fn normal_quantile(p: f64) -> f64 {
    let cdf = |z: f64| 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn inverse_moment(c: &config::VerifyInverseMoment, seed: u64) -> Res<Outcome> {
    let p = &c.params;
    let h = horizon(&c.sim)?;
    if !(c.x0 > 0.0 && c.x0.is_finite()) {
        return Err(cfg_err("x0", format!("must be > 0, got {}", c.x0)));
    }
    // The mean-field drift enters as the perturbation zeta_t = gamma E X_t.
    let zeta_l2 = match c.zeta_l2 {
        Some(z) => z,
        None if p.gamma() == 0.0 => 0.0,
        None => {
            let g = p.gamma();
            let f = |t: f64| {
                let m = exact_mean(p, c.x0, t).unwrap_or(f64::NAN);
                g * g * m * m
            };
            adaptive_simpson(f, 0.0, h, 1e-12)
        }
    };
    let bound = inverse_moment_bound(p.theta(), p.alpha(), bounds::delta_plus(p.delta()), c.x0, h, zeta_l2)?;
    let sim = sim_config(&c.sim, h, every_times(0.0, h, 0.01), seed)?;
    let snaps = simulate_ckls(p, &InitialLaw::Dirac(c.x0), &sim)?;
    let est = estimate_inverse_moment(&snaps, p.theta(), c.floor)?;
    let z = normal_quantile(c.confidence);

    let mut out = Outcome::new(Series::new(&["time", "mean_inverse_power", "floored"]));
    let e = -2.0 * p.theta();
    for s in &snaps {
        let floored = s.states.iter().filter(|&&x| x < c.floor).count();
        let m = s.states.iter().map(|&x| x.max(c.floor).powf(e)).sum::<f64>() / s.n() as f64;
        out.series.push(&[s.time, m, floored as f64]);
    }
    out.check(
        Check::le("inverse_moment", est.estimate + z * est.stderr, bound.rhs_value, 0.0)
            .with("estimate", est.estimate)
            .with("stderr", est.stderr)
            .with("z", z)
            .with("confidence", c.confidence),
    );
    out.check(Check::le("floored_fraction", est.floored_fraction, c.max_floored_fraction, 0.0));
    out.bound(format!("T={}", fmt_f64(h)), bound);
    out.diag("estimate", est);
    out.diag("n_particles", sim.n_particles);
    out.diag("snapshots", snaps.len());
    Ok(out)
}

fn yw(c: &config::VerifyYw) -> Res<Outcome> {
    let mut out = Outcome::new(Series::new(&["epsilon", "x", "psi", "v", "v_d1", "v_d2", "v0", "v0_d1", "v0_d2"]));
    for &eps in &c.epsilons {
        let fam = YwFamily::new(eps)?;
        let xs = audit_grid(eps, c.points);
        let violations = audit(&fam, &xs, c.tol);
        let worst = violations.iter().map(|v| v.excess).fold(0.0, f64::max);
        out.check(
            Check::le(&format!("audit[eps={}]", fmt_f64(eps)), violations.len() as f64, 0.0, 0.0)
                .with("points", xs.len())
                .with("tol", c.tol)
                .with("worst_excess", worst)
                .with("first_violations", &violations[..violations.len().min(5)]),
        );
        out.check(Check::close(
            &format!("psi_mass[eps={}]", fmt_f64(eps)),
            psi_mass_closed_form(&fam),
            1.0,
            1e-14,
        ));
        let (lo, hi) = fam.support();
        let quad = adaptive_simpson(|x| fam.psi(x), lo, hi, 1e-13);
        out.check(Check::close(&format!("psi_mass_quadrature[eps={}]", fmt_f64(eps)), quad, 1.0, 1e-9));
        for &x in &xs {
            let (v, v0) = (fam.v(x), fam.v0(x));
            out.series
                .push(&[eps, x, fam.psi(x.abs()), v.value, v.d1, v.d2, v0.value, v0.d1, v0.d2]);
        }
    }
    Ok(out)
}

fn lemma_ine(c: &config::VerifyLemmaIne) -> Res<Outcome> {
    let mut out = Outcome::new(Series::new(&["k", "y", "lhs", "rhs"]));
    for &k in &c.k_values {
        let mut failures = 0usize;
        let mut min_gap = f64::INFINITY;
        let mut worst_y = 0.0;
        for y in bounds::ine_grid(k, c.points)? {
            let r = bounds::ine_check_y(y, k)?;
            if !r.holds {
                failures += 1;
            }
            if r.rhs - r.lhs < min_gap {
                min_gap = r.rhs - r.lhs;
                worst_y = y;
            }
            out.series.push(&[k, y, r.lhs, r.rhs]);
        }
        out.check(
            Check::le(&format!("grid[K={}]", fmt_f64(k)), failures as f64, 0.0, 0.0)
                .with("points", c.points)
                .with("min_rhs_minus_lhs", min_gap)
                .with("at_y", worst_y),
        );
        let zero = bounds::ine_check_y(0.0, k)?;
        out.check(Check::close(&format!("equality_at_zero[K={}]", fmt_f64(k)), zero.lhs, zero.rhs, 1e-14));
    }
    Ok(out)
}

fn stationary(c: &config::StationaryCkls, base: &Path, seed: u64) -> Res<Outcome> {
    let p = &c.params;
    let rate = not_ergodic_ckls(p)?;
    let init = law(&c.init, base, "init")?;
    let h = c.burn_in + c.sample_horizon;
    let mut times = vec![0.0];
    times.extend(every_times(c.burn_in, c.sample_horizon, c.sample_every));
    let sim = sim_config(&c.sim, h, times, seed)?;
    let snaps = simulate_ckls(p, &init, &sim)?;
    let post: Vec<&ParticleEnsemble> = snaps.iter().filter(|e| e.time >= c.burn_in - 0.5 * sim.dt).collect();
    let last = *post.last().ok_or_else(|| cfg_err("burn_in", "no snapshot after the burn-in"))?;

    let mut out = Outcome::new(Series::new(&["time", "mean", "variance", "stderr", "w1_to_previous"]));
    let mut max_w1 = 0.0f64;
    let mut prev: Option<EmpiricalMeasure> = None;
    for e in &post {
        let m = e.to_measure()?;
        let w1 = match &prev {
            Some(q) => wasserstein_p(q, &m, 1.0)?,
            None => f64::NAN,
        };
        if w1.is_finite() {
            max_w1 = max_w1.max(w1);
        }
        let s = e.summary();
        out.series.push(&[e.time, s.mean, s.variance, s.stderr, w1]);
        prev = Some(m);
    }

    let s = last.summary();
    let fixed_point = p.alpha() / rate;
    let transient = (exact_mean(p, init.mean(), last.time)? - fixed_point).abs();
    out.check(
        Check::close("stationary_mean", s.mean, fixed_point, 3.0 * s.stderr + 5.0 * sim.dt + transient)
            .with("stderr", s.stderr)
            .with("transient", transient),
    );
    if post.len() >= 2 {
        out.check(Check::le("successive_w1", max_w1, 2.0 * s.stderr, 0.0).with("snapshots", post.len()));
    }
    let below = last.states.iter().filter(|&&x| x < 1e-3).count() as f64 / last.n() as f64;
    out.diag("stationary_summary", s);
    out.diag("mass_below_1e-3", below);
    out.diag("rate", rate);
    out.diag("n_particles", sim.n_particles);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.99) - 2.326_347_874_040_841).abs() < 1e-9);
        assert!(normal_quantile(0.5).abs() < 1e-12);
    }

    #[test]
    fn classical_coefficient() {
        assert!((classical_sigma(0.0, 2.0, 0.5) - 4.0).abs() < 1e-15);
        assert!((classical_sigma(1.0, 1.0, 1.0) - 2.0 / (2f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn time_grids() {
        assert_eq!(uniform_times(2.0, 4), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let t = every_times(1.0, 1.0, 0.25);
        assert_eq!(t.len(), 5);
        assert_eq!(t[4], 2.0);
    }

    #[test]
    fn standard_error() {
        let (m, se) = mean_se([1.0, 3.0].into_iter());
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
