//! Interacting-particle simulation of the mean-field CKLS model and a particle
//! cross-check path for the distribution-dependent Vasicek model.
//!
//! The CKLS step is explicit Euler–Maruyama on
//! ```text
//! x' = x + (alpha - delta x + gamma m_k) dt + |x|^theta sqrt(dt) Z
//! ```
//! optionally followed by the projection `x' <- max(x', 0)`. `m_k` is either
//! the ensemble average at step `k` or the closed-form mean at `t_k`.
//!
//! Noise draws come from [`NoiseStream`], keyed by `(seed, particle, step)`,
//! so results do not depend on thread count. Reductions over the ensemble are
//! done over fixed-size chunks in index order for the same reason.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EmpiricalMeasure;
use crate::model::{exact_mean_unchecked, CklsParams, VasicekParams};
use crate::rng::NoiseStream;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Euler–Maruyama with diffusion `|x|^theta`.
    AbsEuler,
    /// As `AbsEuler`, then `x <- max(x, 0)` after every step.
    #[default]
    AbsEulerProjected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFieldMode {
    /// Replace `E[X_t]` by the ensemble average at every step.
    Empirical,
    /// Use the closed-form mean of the law.
    #[default]
    ExactMean,
}

fn default_true_scheme() -> Scheme {
    Scheme::AbsEulerProjected
}

/// Simulation settings. Snapshot times are snapped to the `dt` grid
/// (nearest step, ties rounded up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_true_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub mean_field_mode: MeanFieldMode,
    #[serde(default)]
    pub deterministic_mode: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    /// Config with snapshots at `0` and `horizon`.
    pub fn new(n_particles: usize, dt: f64, horizon: f64, seed: u64) -> Self {
        Self {
            n_particles,
            dt,
            horizon,
            snapshot_times: vec![0.0, horizon],
            scheme: Scheme::AbsEulerProjected,
            mean_field_mode: MeanFieldMode::ExactMean,
            deterministic_mode: false,
            seed,
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_mode(mut self, mode: MeanFieldMode) -> Self {
        self.mean_field_mode = mode;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn deterministic(mut self) -> Self {
        self.deterministic_mode = true;
        self
    }

    /// Snapshots on a uniform grid `0, every, 2 every, ..., horizon`.
    pub fn with_snapshot_every(mut self, every: f64) -> Self {
        let n = (self.horizon / every + 0.5).floor() as usize;
        self.snapshot_times = (0..=n).map(|k| (k as f64 * every).min(self.horizon)).collect();
        self
    }

    /// Validate and map times to step indices.
    pub fn grid(&self) -> Result<TimeGrid> {
        if self.n_particles == 0 {
            return Err(Error::InvalidParameter("n_particles must be > 0".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.dt <= self.horizon) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt <= horizon, got dt = {}, horizon = {}",
                self.dt, self.horizon
            )));
        }
        let snap = |t: f64| (t / self.dt + 0.5).floor() as u64;
        let n_steps = snap(self.horizon);
        if self.snapshot_times.is_empty() {
            return Err(Error::InvalidParameter("no snapshot times".into()));
        }
        let mut steps = Vec::with_capacity(self.snapshot_times.len());
        for w in self.snapshot_times.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidParameter("snapshot times must be sorted".into()));
            }
        }
        for &t in &self.snapshot_times {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad snapshot time {t}")));
            }
            let k = snap(t);
            if k > n_steps {
                return Err(Error::InvalidParameter(format!(
                    "snapshot time {t} beyond horizon {}",
                    self.horizon
                )));
            }
            if steps.last() != Some(&k) {
                steps.push(k);
            }
        }
        Ok(TimeGrid {
            dt: self.dt,
            n_steps,
            snapshot_steps: steps,
        })
    }
}

/// Uniform step grid with the step indices at which snapshots are recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: u64,
    pub snapshot_steps: Vec<u64>,
}

impl TimeGrid {
    pub fn time(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }

    /// Last step that has to be simulated.
    fn last_step(&self) -> u64 {
        *self.snapshot_steps.last().expect("non-empty")
    }
}

/// Initial law of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Dirac(f64),
    Measure(EmpiricalMeasure),
}

impl InitialLaw {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Dirac(x) => *x,
            Self::Measure(m) => m.mean(),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Self::Dirac(x) => *x,
            Self::Measure(m) => m.min(),
        }
    }

    /// `n` initial states: the atoms themselves for a uniform measure with `n`
    /// atoms, otherwise the stratified quantiles `F^{-1}((i + 1/2) / n)`.
    pub fn states(&self, n: usize) -> Vec<f64> {
        match self {
            Self::Dirac(x) => vec![*x; n],
            Self::Measure(m) if m.is_uniform() && m.len() == n => m.atoms().to_vec(),
            Self::Measure(m) => (0..n)
                .map(|i| m.quantile((i as f64 + 0.5) / n as f64))
                .collect(),
        }
    }

    /// Number of paired particles this law fixes, `None` for a Dirac mass.
    fn paired_size(&self) -> Option<usize> {
        match self {
            Self::Dirac(_) => None,
            Self::Measure(m) => Some(m.len()),
        }
    }
}

/// Ensemble summary statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub time: f64,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean, `sqrt(s^2 / n)` with the unbiased `s^2`.
    pub stderr: f64,
    pub min: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub max: f64,
}

/// `N` particle states at a common time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub states: Vec<f64>,
    pub time: f64,
    pub step: u64,
    pub seed: u64,
}

pub(crate) fn chunked_sum<I>(xs: &[f64], f: I) -> f64
where
    I: Fn(f64) -> f64 + Sync,
{
    let parts: Vec<f64> = xs
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|&x| f(x)).sum::<f64>())
        .collect();
    parts.iter().sum()
}

/// Mean and population variance by two chunked passes.
fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = chunked_sum(xs, |x| x) / n;
    let v = chunked_sum(xs, |x| (x - m) * (x - m)) / n;
    (m, v)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ParticleEnsemble {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn mean(&self) -> f64 {
        moments(&self.states).0
    }

    pub fn summary(&self) -> Summary {
        let (mean, variance) = moments(&self.states);
        let n = self.n();
        let unbiased = if n > 1 {
            variance * n as f64 / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = self.states.clone();
        sorted.par_sort_unstable_by(f64::total_cmp);
        Summary {
            time: self.time,
            mean,
            variance,
            stderr: (unbiased / n as f64).sqrt(),
            min: sorted[0],
            q05: quantile_sorted(&sorted, 0.05),
            q50: quantile_sorted(&sorted, 0.5),
            q95: quantile_sorted(&sorted, 0.95),
            max: sorted[n - 1],
        }
    }

    pub fn to_measure(&self) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::uniform(self.states.clone())
    }
}

#[derive(Debug, Clone, Copy)]
struct CklsStep {
    delta: f64,
    dt: f64,
    sqrt_dt: f64,
    projected: bool,
    noisy: bool,
    params: CklsParams,
}

impl CklsStep {
    fn new(params: &CklsParams, cfg: &SimConfig) -> Self {
        Self {
            delta: params.delta(),
            dt: cfg.dt,
            sqrt_dt: cfg.dt.sqrt(),
            projected: cfg.scheme == Scheme::AbsEulerProjected,
            noisy: !cfg.deterministic_mode,
            params: *params,
        }
    }

    /// One step with drift constant `alpha + gamma m_k` and normal draw `z`.
    #[inline(always)]
    fn apply(&self, x: f64, drift_const: f64, z: f64) -> f64 {
        let mut y = x + (drift_const - self.delta * x) * self.dt;
        if self.noisy {
            y += self.params.diffusion(x) * self.sqrt_dt * z;
        }
        if self.projected {
            y.max(0.0)
        } else {
            y
        }
    }
}

fn check_nonnegative_init(init: &InitialLaw) -> Result<()> {
    let lo = init.min();
    if !(lo >= 0.0 && lo.is_finite()) {
        return Err(Error::DomainError(format!(
            "CKLS initial law must be supported on [0, inf), found {lo}"
        )));
    }
    if let InitialLaw::Measure(m) = init {
        if !m.max().is_finite() {
            return Err(Error::DomainError("non-finite initial atom".into()));
        }
    }
    Ok(())
}

struct NonFinite {
    step: u64,
    particle: usize,
    value: f64,
}

fn non_finite_error(grid: &TimeGrid, nf: NonFinite) -> Error {
    Error::NonFiniteState {
        time: grid.time(nf.step),
        particle: nf.particle,
        value: nf.value,
    }
}

/// Runs independent paths particle by particle. `drift[k]` is the drift
/// constant used on step `k`; returns, per snapshot, the states of all particles.
fn run_independent<F>(
    x0: &[f64],
    grid: &TimeGrid,
    noise: NoiseStream,
    drift: &[f64],
    step: F,
) -> std::result::Result<Vec<Vec<f64>>, NonFinite>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    let n = x0.len();
    let n_snap = grid.snapshot_steps.len();
    let last = grid.last_step();
    let mut buf = vec![0.0f64; n * n_snap];
    let failure: Option<NonFinite> = buf
        .par_chunks_mut(n_snap * CHUNK)
        .enumerate()
        .map(|(c, out)| {
            let start = c * CHUNK;
            let count = out.len() / n_snap;
            for local in 0..count {
                let i = start + local;
                let row = &mut out[local * n_snap..(local + 1) * n_snap];
                let mut x = x0[i];
                let mut next_snap = 0usize;
                let mut pair = (0.0, 0.0);
                for k in 0..=last {
                    while next_snap < n_snap && grid.snapshot_steps[next_snap] == k {
                        row[next_snap] = x;
                        next_snap += 1;
                    }
                    if k == last {
                        break;
                    }
                    let z = if k & 1 == 0 {
                        pair = noise.normal_pair(i as u64, k >> 1);
                        pair.0
                    } else {
                        pair.1
                    };
                    x = step(x, drift[k as usize], z);
                    if !x.is_finite() {
                        return Some(NonFinite {
                            step: k + 1,
                            particle: i,
                            value: x,
                        });
                    }
                }
            }
            None
        })
        .find_first(|f| f.is_some())
        .flatten();
    if let Some(f) = failure {
        return Err(f);
    }
    let mut snaps = vec![Vec::with_capacity(n); n_snap];
    for s in 0..n_snap {
        snaps[s].extend((0..n).map(|i| buf[i * n_snap + s]));
    }
    Ok(snaps)
}

/// Both halves of a synchronously coupled pair, particle by particle, with one
/// noise draw per step shared by the pair.
fn run_coupled_independent(
    xa: &[f64],
    xb: &[f64],
    grid: &TimeGrid,
    noise: NoiseStream,
    da: &[f64],
    db: &[f64],
    stepper: &CklsStep,
) -> std::result::Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), NonFinite> {
    let n = xa.len();
    let n_snap = grid.snapshot_steps.len();
    let last = grid.last_step();
    let width = 2 * n_snap;
    let mut buf = vec![0.0f64; n * width];
    let failure: Option<NonFinite> = buf
        .par_chunks_mut(width * CHUNK)
        .enumerate()
        .map(|(c, out)| {
            let start = c * CHUNK;
            let count = out.len() / width;
            for local in 0..count {
                let i = start + local;
                let row = &mut out[local * width..(local + 1) * width];
                let (mut x, mut y) = (xa[i], xb[i]);
                let mut next_snap = 0usize;
                let mut pair = (0.0, 0.0);
                for k in 0..=last {
                    while next_snap < n_snap && grid.snapshot_steps[next_snap] == k {
                        row[2 * next_snap] = x;
                        row[2 * next_snap + 1] = y;
                        next_snap += 1;
                    }
                    if k == last {
                        break;
                    }
                    let z = if k & 1 == 0 {
                        pair = noise.normal_pair(i as u64, k >> 1);
                        pair.0
                    } else {
                        pair.1
                    };
                    x = stepper.apply(x, da[k as usize], z);
                    y = stepper.apply(y, db[k as usize], z);
                    if !(x.is_finite() && y.is_finite()) {
                        return Some(NonFinite {
                            step: k + 1,
                            particle: i,
                            value: if x.is_finite() { y } else { x },
                        });
                    }
                }
            }
            None
        })
        .find_first(|f| f.is_some())
        .flatten();
    if let Some(f) = failure {
        return Err(f);
    }
    let mut sa = vec![Vec::with_capacity(n); n_snap];
    let mut sb = vec![Vec::with_capacity(n); n_snap];
    for s in 0..n_snap {
        sa[s].extend((0..n).map(|i| buf[i * width + 2 * s]));
        sb[s].extend((0..n).map(|i| buf[i * width + 2 * s + 1]));
    }
    Ok((sa, sb))
}

/// One synchronous update of every particle with step index `k`.
fn sync_step<F>(states: &mut [f64], noise: NoiseStream, k: u64, step: F) -> std::result::Result<(), NonFinite>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let failure = states
        .par_chunks_mut(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            for (local, x) in chunk.iter_mut().enumerate() {
                let i = c * CHUNK + local;
                *x = step(*x, noise.normal(i as u64, k));
                if !x.is_finite() {
                    return Some(NonFinite {
                        step: k + 1,
                        particle: i,
                        value: *x,
                    });
                }
            }
            None
        })
        .find_first(|f| f.is_some())
        .flatten();
    match failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn package(grid: &TimeGrid, seed: u64, snaps: Vec<Vec<f64>>) -> Vec<ParticleEnsemble> {
    snaps
        .into_iter()
        .zip(&grid.snapshot_steps)
        .map(|(states, &k)| ParticleEnsemble {
            states,
            time: grid.time(k),
            step: k,
            seed,
        })
        .collect()
}

fn exact_drift_table(params: &CklsParams, m0: f64, grid: &TimeGrid) -> Vec<f64> {
    (0..grid.last_step())
        .map(|k| params.alpha() + params.gamma() * exact_mean_unchecked(params, m0, grid.time(k)))
        .collect()
}

/// Simulate the mean-field CKLS model; returns one ensemble per snapshot time.
pub fn simulate_ckls(
    params: &CklsParams,
    init: &InitialLaw,
    cfg: &SimConfig,
) -> Result<Vec<ParticleEnsemble>> {
    check_nonnegative_init(init)?;
    let grid = cfg.grid()?;
    let x0 = init.states(cfg.n_particles);
    let noise = NoiseStream::new(cfg.seed);
    let stepper = CklsStep::new(params, cfg);
    let snaps = match cfg.mean_field_mode {
        MeanFieldMode::ExactMean => {
            let drift = exact_drift_table(params, init.mean(), &grid);
            run_independent(&x0, &grid, noise, &drift, |x, d, z| stepper.apply(x, d, z))
                .map_err(|f| non_finite_error(&grid, f))?
        }
        MeanFieldMode::Empirical => {
            let mut states = x0;
            let mut snaps = Vec::with_capacity(grid.snapshot_steps.len());
            let mut next_snap = 0usize;
            let last = grid.last_step();
            for k in 0..=last {
                while next_snap < grid.snapshot_steps.len() && grid.snapshot_steps[next_snap] == k {
                    snaps.push(states.clone());
                    next_snap += 1;
                }
                if k == last {
                    break;
                }
                let m = chunked_sum(&states, |x| x) / states.len() as f64;
                let d = params.alpha() + params.gamma() * m;
                sync_step(&mut states, noise, k, |x, z| stepper.apply(x, d, z))
                    .map_err(|f| non_finite_error(&grid, f))?;
            }
            snaps
        }
    };
    Ok(package(&grid, cfg.seed, snaps))
}

/// Two ensembles driven by the same Brownian increments, particle by particle.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub a: Vec<ParticleEnsemble>,
    pub b: Vec<ParticleEnsemble>,
    /// Mean of `|X_i - Y_i|` per snapshot, an upper bound for `W1`.
    pub mean_distance: Vec<f64>,
    /// Standard error of `mean_distance`.
    pub distance_stderr: Vec<f64>,
}

impl CoupledTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.a.iter().map(|e| e.time).collect()
    }
}

/// Synchronously coupled pair of CKLS runs.
pub fn simulate_coupled_ckls(
    params: &CklsParams,
    init_a: &InitialLaw,
    init_b: &InitialLaw,
    cfg: &SimConfig,
) -> Result<CoupledTrajectory> {
    check_nonnegative_init(init_a)?;
    check_nonnegative_init(init_b)?;
    for size in [init_a.paired_size(), init_b.paired_size()].into_iter().flatten() {
        if size != cfg.n_particles {
            return Err(Error::SizeMismatch {
                left: size,
                right: cfg.n_particles,
            });
        }
    }
    let grid = cfg.grid()?;
    let n = cfg.n_particles;
    let xa = init_a.states(n);
    let xb = init_b.states(n);
    let noise = NoiseStream::new(cfg.seed);
    let stepper = CklsStep::new(params, cfg);

    let (sa, sb) = match cfg.mean_field_mode {
        MeanFieldMode::ExactMean => {
            let da = exact_drift_table(params, init_a.mean(), &grid);
            let db = exact_drift_table(params, init_b.mean(), &grid);
            run_coupled_independent(&xa, &xb, &grid, noise, &da, &db, &stepper)
                .map_err(|f| non_finite_error(&grid, f))?
        }
        MeanFieldMode::Empirical => {
            let (mut a, mut b) = (xa, xb);
            let (mut sa, mut sb) = (Vec::new(), Vec::new());
            let mut next_snap = 0usize;
            let last = grid.last_step();
            for k in 0..=last {
                while next_snap < grid.snapshot_steps.len() && grid.snapshot_steps[next_snap] == k {
                    sa.push(a.clone());
                    sb.push(b.clone());
                    next_snap += 1;
                }
                if k == last {
                    break;
                }
                let ma = chunked_sum(&a, |x| x) / n as f64;
                let mb = chunked_sum(&b, |x| x) / n as f64;
                let (da, db) = (
                    params.alpha() + params.gamma() * ma,
                    params.alpha() + params.gamma() * mb,
                );
                sync_step(&mut a, noise, k, |x, z| stepper.apply(x, da, z))
                    .map_err(|f| non_finite_error(&grid, f))?;
                sync_step(&mut b, noise, k, |x, z| stepper.apply(x, db, z))
                    .map_err(|f| non_finite_error(&grid, f))?;
            }
            (sa, sb)
        }
    };

    let mut mean_distance = Vec::with_capacity(sa.len());
    let mut distance_stderr = Vec::with_capacity(sa.len());
    for (a, b) in sa.iter().zip(&sb) {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
        let (m, v) = moments(&d);
        mean_distance.push(m);
        let unbiased = if n > 1 { v * n as f64 / (n - 1) as f64 } else { 0.0 };
        distance_stderr.push((unbiased / n as f64).sqrt());
    }
    Ok(CoupledTrajectory {
        a: package(&grid, cfg.seed, sa),
        b: package(&grid, cfg.seed, sb),
        mean_distance,
        distance_stderr,
    })
}

/// Monte Carlo estimate of `E int_0^T X_t^{-2 theta} dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseMomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Fraction of (particle, snapshot) samples below the floor.
    pub floored_fraction: f64,
    pub horizon: f64,
}

pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Trapezoidal path integral over the snapshot grid, per particle, then
/// averaged. States below `floor` are replaced by `floor` and counted.
pub fn estimate_inverse_moment(
    snapshots: &[ParticleEnsemble],
    theta: f64,
    floor: f64,
) -> Result<InverseMomentEstimate> {
    if snapshots.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: snapshots.len(),
        });
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("floor must be > 0, got {floor}")));
    }
    let n = snapshots[0].n();
    if let Some(s) = snapshots.iter().find(|s| s.n() != n) {
        return Err(Error::SizeMismatch {
            left: n,
            right: s.n(),
        });
    }
    let power = -2.0 * theta;
    let f = |x: f64| -> (f64, bool) {
        if x < floor {
            (floor.powf(power), true)
        } else if theta == 0.5 {
            (1.0 / x, false)
        } else {
            (x.powf(power), false)
        }
    };
    let mut per_particle = vec![0.0f64; n];
    let mut floored_part = 0.0f64;
    let mut floored_count = 0usize;
    for w in snapshots.windows(2) {
        let h = w[1].time - w[0].time;
        for (i, acc) in per_particle.iter_mut().enumerate() {
            let (l, lf) = f(w[0].states[i]);
            let (r, rf) = f(w[1].states[i]);
            *acc += 0.5 * h * (l + r);
            if lf {
                floored_part += 0.5 * h * l;
            }
            if rf {
                floored_part += 0.5 * h * r;
            }
        }
    }
    for s in snapshots {
        floored_count += s.states.iter().filter(|&&x| x < floor).count();
    }
    let (mean, var) = moments(&per_particle);
    let unbiased = if n > 1 { var * n as f64 / (n - 1) as f64 } else { 0.0 };
    let floored_fraction = floored_count as f64 / (n * snapshots.len()) as f64;
    if floored_part / n as f64 > 0.5 * mean {
        return Err(Error::AllStatesFloored { floored_fraction });
    }
    Ok(InverseMomentEstimate {
        estimate: mean,
        stderr: (unbiased / n as f64).sqrt(),
        floored_fraction,
        horizon: snapshots[snapshots.len() - 1].time - snapshots[0].time,
    })
}

/// Euler–Maruyama particle system for the Vasicek model, with `b` and `sigma`
/// evaluated on the ensemble's empirical mean and variance at every step.
/// The scheme and mean-field settings in `cfg` do not apply to this model.
pub fn simulate_vasicek_particles(
    params: &VasicekParams,
    init: &InitialLaw,
    cfg: &SimConfig,
) -> Result<Vec<ParticleEnsemble>> {
    let grid = cfg.grid()?;
    let mut states = init.states(cfg.n_particles);
    if let Some(x) = states.iter().find(|x| !x.is_finite()) {
        return Err(Error::DomainError(format!("non-finite initial state {x}")));
    }
    let noise = NoiseStream::new(cfg.seed);
    let (dt, sqrt_dt) = (cfg.dt, cfg.dt.sqrt());
    let noisy = !cfg.deterministic_mode;
    let mut snaps = Vec::with_capacity(grid.snapshot_steps.len());
    let mut next_snap = 0usize;
    let last = grid.last_step();
    for k in 0..=last {
        while next_snap < grid.snapshot_steps.len() && grid.snapshot_steps[next_snap] == k {
            snaps.push(states.clone());
            next_snap += 1;
        }
        if k == last {
            break;
        }
        let (m, v) = moments(&states);
        let b = params.b_fn().eval(m, v);
        let sigma = params.checked_sigma(m, v, grid.time(k))?;
        let c = params.gamma_drift() + b;
        let beta = params.beta();
        sync_step(&mut states, noise, k, |x, z| {
            let y = x + (c - beta * x) * dt;
            if noisy {
                y + sigma * sqrt_dt * z
            } else {
                y
            }
        })
        .map_err(|f| non_finite_error(&grid, f))?;
    }
    Ok(package(&grid, cfg.seed, snaps))
}
