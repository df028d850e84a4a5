//! Exact one-dimensional optimal transport on empirical measures.
//!
//! On the line the co-monotone (quantile) coupling is optimal for every convex
//! cost `|x - y|^p`, and `rho(x, y) = |T(x) - T(y)|` for the monotone map
//! `T(x) = x^{1-theta}/(1-theta)`, so `W_{2,rho}` is plain `W2` after pushing
//! both measures through `T`. The brute-force solver exists to check both
//! statements on small instances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::intrinsic_map;

const WEIGHT_TOL: f64 = 1e-12;

/// Finitely supported probability measure with sorted atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl EmpiricalMeasure {
    /// Uniform weights on the given samples.
    pub fn uniform(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure(format!("non-finite atom {x}")));
        }
        samples.sort_by(f64::total_cmp);
        let w = 1.0 / samples.len() as f64;
        Ok(Self {
            weights: vec![w; samples.len()],
            atoms: samples,
            uniform: true,
        })
    }

    /// Explicit weights; they must be positive and sum to one within `1e-12`.
    pub fn weighted(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if atoms.len() != weights.len() {
            return Err(Error::SizeMismatch {
                left: atoms.len(),
                right: weights.len(),
            });
        }
        if let Some(x) = atoms.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure(format!("non-finite atom {x}")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure(format!("non-positive weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (atoms, weights) = pairs.into_iter().unzip();
        Ok(Self {
            atoms,
            weights,
            uniform: false,
        })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::uniform(vec![x])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Built with [`EmpiricalMeasure::uniform`].
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    pub fn min(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    /// Left-continuous quantile: smallest atom whose cumulative weight reaches `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (&x, &w) in self.atoms.iter().zip(&self.weights) {
            acc += w;
            if acc >= u {
                return x;
            }
        }
        self.max()
    }

    /// Push the measure through an increasing map, keeping weights.
    fn map_increasing<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&x| f(x)).collect(),
            weights: self.weights.clone(),
            uniform: self.uniform,
        }
    }
}

/// `W_p(mu, nu)` by the quantile coupling, merging the two CDF breakpoint sets.
pub fn wasserstein_p(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::DomainError(format!("p must be >= 1, got {p}")));
    }
    let cost = |d: f64| {
        if p == 1.0 {
            d
        } else if p == 2.0 {
            d * d
        } else {
            d.powf(p)
        }
    };
    let (a, wa) = (mu.atoms(), mu.weights());
    let (b, wb) = (nu.atoms(), nu.weights());
    if mu.is_uniform() && nu.is_uniform() && a.len() == b.len() {
        let s: f64 = a.iter().zip(b).map(|(x, y)| cost((x - y).abs())).sum();
        let total = s / a.len() as f64;
        return Ok(if p == 1.0 { total } else { total.powf(1.0 / p) });
    }
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (wa[0], wb[0]);
    let mut total = 0.0;
    loop {
        let d = cost((a[i] - b[j]).abs());
        if ra <= rb {
            total += ra * d;
            rb -= ra;
            i += 1;
            if i == a.len() {
                break;
            }
            ra = wa[i];
            if rb <= 0.0 {
                j += 1;
                if j == b.len() {
                    break;
                }
                rb = wb[j];
            }
        } else {
            total += rb * d;
            ra -= rb;
            j += 1;
            if j == b.len() {
                break;
            }
            rb = wb[j];
        }
    }
    Ok(if p == 1.0 { total } else { total.powf(1.0 / p) })
}

fn check_nonnegative(mu: &EmpiricalMeasure) -> Result<()> {
    if mu.min() < 0.0 {
        return Err(Error::DomainError(format!(
            "measure must be supported on [0, inf), found atom {}",
            mu.min()
        )));
    }
    Ok(())
}

/// `W_{2,rho}(mu, nu)` for measures on `[0, inf)`.
pub fn wasserstein_rho2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> Result<f64> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if !(0.5..1.0).contains(&theta) {
        return Err(Error::DomainError(format!(
            "theta must lie in [1/2, 1), got {theta}"
        )));
    }
    check_nonnegative(mu)?;
    check_nonnegative(nu)?;
    let tm = mu.map_increasing(|x| intrinsic_map(x, theta));
    let tn = nu.map_increasing(|x| intrinsic_map(x, theta));
    wasserstein_p(&tm, &tn, 2.0)
}

/// Pairwise cost matrix `cost(x_i, y_j)`.
pub fn cost_matrix<F: Fn(f64, f64) -> f64>(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    cost: F,
) -> Vec<Vec<f64>> {
    mu.atoms()
        .iter()
        .map(|&x| nu.atoms().iter().map(|&y| cost(x, y)).collect())
        .collect()
}

pub const BRUTE_FORCE_CAP: usize = 8;

/// Exact optimal transport cost `min_pi sum pi_ij c_ij` for small measures.
///
/// Equal-size uniform measures: exhaustive search over permutation matchings,
/// which are exactly the vertices of the transport polytope. Otherwise: successive
/// shortest augmenting paths on the bipartite residual network.
pub fn brute_force_transport(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    cost: &[Vec<f64>],
) -> Result<f64> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let (n, m) = (mu.len(), nu.len());
    let largest = n.max(m);
    if largest > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge {
            atoms: largest,
            cap: BRUTE_FORCE_CAP,
        });
    }
    if cost.len() != n || cost.iter().any(|r| r.len() != m) {
        return Err(Error::SizeMismatch { left: n, right: m });
    }
    if mu.is_uniform() && nu.is_uniform() && n == m {
        return Ok(best_permutation(cost) / n as f64);
    }
    Ok(min_cost_flow(mu.weights(), nu.weights(), cost))
}

fn best_permutation(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let score = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
    let mut best = score(&perm);
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(score(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn min_cost_flow(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    const TINY: f64 = 1e-15;
    let (n, m) = (supply.len(), demand.len());
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let mut flow = vec![vec![0.0f64; m]; n];
    let scale = cost.iter().flatten().fold(0.0f64, |a, &c| a.max(c.abs()));
    // relaxations must beat rounding noise, or zero-cost cycles look negative
    let tol = 1e-12 * scale.max(1e-300);
    // node ids: rows 0..n, cols n..n+m
    for _ in 0..100 * (n + m) * (n + m) {
        let remaining: f64 = sup.iter().filter(|&&s| s > TINY).sum();
        if remaining <= 1e-13 || dem.iter().all(|&d| d <= TINY) {
            break;
        }
        let nodes = n + m;
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pred = vec![usize::MAX; nodes];
        for i in 0..n {
            if sup[i] > TINY {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..n {
                for j in 0..m {
                    let c = cost[i][j];
                    if dist[i] + c < dist[n + j] - tol {
                        dist[n + j] = dist[i] + c;
                        pred[n + j] = i;
                        changed = true;
                    }
                    if flow[i][j] > TINY && dist[n + j] - c < dist[i] - tol {
                        dist[i] = dist[n + j] - c;
                        pred[i] = n + j;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let sink = (0..m)
            .filter(|&j| dem[j] > TINY && dist[n + j].is_finite())
            .min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]));
        let Some(sink) = sink else { break };
        // walk back to a source row, collecting the bottleneck
        let mut amount = dem[sink];
        let mut node = n + sink;
        let mut path = Vec::new();
        while pred[node] != usize::MAX {
            assert!(path.len() <= n + m, "cycle in shortest-path tree");
            let p = pred[node];
            path.push((p, node));
            if p >= n {
                // backward edge col p -> row node
                amount = amount.min(flow[node][p - n]);
            }
            node = p;
        }
        amount = amount.min(sup[node]);
        for &(from, to) in &path {
            if from < n {
                flow[from][to - n] += amount;
            } else {
                flow[to][from - n] -= amount;
            }
        }
        sup[node] -= amount;
        dem[sink] -= amount;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            total += flow[i][j] * cost[i][j];
        }
    }
    total
}

/// Least-squares fit of `ln(value) = intercept - rate * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_exponential_rate(times: &[f64], values: &[f64]) -> Result<ExpFit> {
    if times.len() != values.len() {
        return Err(Error::SizeMismatch {
            left: times.len(),
            right: values.len(),
        });
    }
    if times.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: times.len(),
        });
    }
    if let Some((index, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::NonPositiveValue { index, value });
    }
    let n = times.len() as f64;
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (&t, &y) in times.iter().zip(&ys) {
        stt += (t - tm) * (t - tm);
        sty += (t - tm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    if stt == 0.0 {
        return Err(Error::DomainError("all times coincide".into()));
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss_res: f64 = times
        .iter()
        .zip(&ys)
        .map(|(&t, &y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let r_squared = if syy <= 1e-300 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(ExpFit {
        rate: -slope,
        intercept,
        r_squared,
    })
}

/// `mu[x^exponent]` for a measure on `[0, inf)`; `+inf` when a zero atom meets a
/// negative exponent.
pub fn power_moment(mu: &EmpiricalMeasure, exponent: f64) -> Result<f64> {
    check_nonnegative(mu)?;
    if exponent < 0.0 && mu.min() == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(mu.expect(|x| x.powf(exponent)))
}

/// `mu[ln((x + 1) / x)]` for a measure on `[0, inf)`; `+inf` with an atom at zero.
pub fn log_ratio_moment(mu: &EmpiricalMeasure) -> Result<f64> {
    check_nonnegative(mu)?;
    if mu.min() == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(mu.expect(|x| (1.0 / x).ln_1p()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(v: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(v.to_vec()).unwrap()
    }

    #[test]
    fn measure_validation() {
        assert_eq!(EmpiricalMeasure::uniform(vec![]), Err(Error::EmptyMeasure));
        assert!(EmpiricalMeasure::uniform(vec![1.0, f64::NAN]).is_err());
        assert!(EmpiricalMeasure::weighted(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(EmpiricalMeasure::weighted(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        let m = EmpiricalMeasure::weighted(vec![3.0, 1.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(m.atoms(), &[1.0, 3.0]);
        assert_eq!(m.weights(), &[0.75, 0.25]);
        assert_eq!(m.mean(), 1.5);
        assert_eq!(m.quantile(0.5), 1.0);
        assert_eq!(m.quantile(0.9), 3.0);
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_p(&u(&[0.0]), &u(&[1.0]), 1.0).unwrap(), 1.0);
        assert!((wasserstein_p(&u(&[0.0, 2.0]), &u(&[1.0, 3.0]), 1.0).unwrap() - 1.0).abs() < 1e-15);
        let m = u(&[0.3, -1.0, 2.0]);
        assert_eq!(wasserstein_p(&m, &m, 2.0).unwrap(), 0.0);
        assert!(wasserstein_p(&m, &m, 0.5).is_err());
    }

    #[test]
    fn brute_force_oracle_for_two_point_example() {
        let (a, b) = (u(&[0.0, 2.0]), u(&[1.0, 3.0]));
        let c = cost_matrix(&a, &b, |x, y| (x - y).abs());
        assert!((brute_force_transport(&a, &b, &c).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unequal_sizes_merge_breakpoints() {
        // mu = U{0, 1}, nu = {0.5 w.p. 1}: W1 = 0.5
        assert!((wasserstein_p(&u(&[0.0, 1.0]), &u(&[0.5]), 1.0).unwrap() - 0.5).abs() < 1e-15);
        let a = EmpiricalMeasure::weighted(vec![0.0, 1.0, 4.0], vec![0.2, 0.3, 0.5]).unwrap();
        let b = u(&[0.5, 2.0]);
        let c = cost_matrix(&a, &b, |x, y| (x - y).powi(2));
        let bf = brute_force_transport(&a, &b, &c).unwrap();
        let q = wasserstein_p(&a, &b, 2.0).unwrap().powi(2);
        assert!((bf - q).abs() < 1e-12, "{bf} vs {q}");
    }

    #[test]
    fn rho2_examples() {
        assert!((wasserstein_rho2(&u(&[1.0]), &u(&[4.0]), 0.5).unwrap() - 2.0).abs() < 1e-15);
        let m = u(&[1.0, 4.0]);
        assert_eq!(wasserstein_rho2(&m, &m, 0.5).unwrap(), 0.0);
        let n = u(&[4.0, 9.0]);
        // quantile pairs (1,4), (4,9): rho = 2 each
        let w = wasserstein_rho2(&m, &n, 0.5).unwrap();
        let c = cost_matrix(&m, &n, |x, y| (2.0 * x.sqrt() - 2.0 * y.sqrt()).powi(2));
        let bf = brute_force_transport(&m, &n, &c).unwrap().sqrt();
        assert!((w - bf).abs() < 1e-10);
        assert!((w - 2.0).abs() < 1e-14);
        assert!(matches!(
            wasserstein_rho2(&u(&[-1.0]), &n, 0.5),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn brute_force_edge_cases() {
        let a = u(&[0.5]);
        let b = u(&[2.0]);
        let c = cost_matrix(&a, &b, |x, y| (x - y).abs().powf(1.5));
        assert_eq!(brute_force_transport(&a, &b, &c).unwrap(), 1.5f64.powf(1.5));
        let m = u(&[0.0, 1.0, 5.0]);
        let c = cost_matrix(&m, &m, |x, y| (x - y).abs());
        assert_eq!(brute_force_transport(&m, &m, &c).unwrap(), 0.0);
        let big = u(&(0..9).map(f64::from).collect::<Vec<_>>());
        let c = cost_matrix(&big, &big, |x, y| (x - y).abs());
        assert!(matches!(
            brute_force_transport(&big, &big, &c),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn sorted_matching_is_optimal_for_convex_cost() {
        let a = u(&[0.1, 0.7, 2.0]);
        let b = u(&[-0.4, 1.5, 0.9]);
        let c = cost_matrix(&a, &b, |x, y| (x - y).powi(2));
        let bf = brute_force_transport(&a, &b, &c).unwrap();
        let sorted = ((0.1f64 + 0.4).powi(2) + (0.7f64 - 0.9).powi(2) + (2.0f64 - 1.5).powi(2)) / 3.0;
        assert!((bf - sorted).abs() < 1e-15);
    }

    #[test]
    fn exponential_fit_examples() {
        let t = [0.0, 1.0, 2.0];
        let v: Vec<f64> = t.iter().map(|&s: &f64| (-2.0 * s).exp()).collect();
        let f = fit_exponential_rate(&t, &v).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        let f = fit_exponential_rate(&t, &[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(f.rate, 0.0);
        assert!(matches!(
            fit_exponential_rate(&t, &[1.0, 0.0, 1.0]),
            Err(Error::NonPositiveValue { index: 1, .. })
        ));
        assert!(fit_exponential_rate(&t[..2], &v[..2]).is_err());
    }

    #[test]
    fn noisy_exponential_rate_recovered() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t
            .iter()
            .map(|&s| 2.0 * (-1.5 * s).exp() * (1.0 + 0.05 * (rng.random::<f64>() - 0.5)))
            .collect();
        let f = fit_exponential_rate(&t, &v).unwrap();
        assert!((f.rate - 1.5).abs() < 0.05);
    }

    #[test]
    fn moment_functionals() {
        let m = u(&[1.0, 4.0]);
        assert!((power_moment(&m, -0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!((log_ratio_moment(&m).unwrap() - 0.5 * (2f64.ln() + 1.25f64.ln())).abs() < 1e-15);
        let z = u(&[0.0, 1.0]);
        assert_eq!(power_moment(&z, -0.5).unwrap(), f64::INFINITY);
        assert_eq!(log_ratio_moment(&z).unwrap(), f64::INFINITY);
        assert!(power_moment(&u(&[-1.0]), 1.0).is_err());
    }
}
