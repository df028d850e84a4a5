use mkvlab_core::metrics::{
    brute_force_transport, cost_matrix, wasserstein_p, wasserstein_rho2, EmpiricalMeasure,
};
use mkvlab_core::model::rho;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_measure(rng: &mut StdRng, nonneg: bool) -> EmpiricalMeasure {
    let n = rng.random_range(1..=6usize);
    let atoms: Vec<f64> = (0..n)
        .map(|_| if nonneg { rng.random_range(0.0..10.0) } else { rng.random_range(-5.0..5.0) })
        .collect();
    if rng.random_bool(0.5) {
        EmpiricalMeasure::uniform(atoms).unwrap()
    } else {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        EmpiricalMeasure::weighted(atoms, raw.iter().map(|w| w / s).collect()).unwrap()
    }
}

#[test]
fn quantile_coupling_matches_exhaustive_optimum() {
    let mut rng = StdRng::seed_from_u64(20240611);
    for trial in 0..100 {
        let mu = random_measure(&mut rng, false);
        let nu = random_measure(&mut rng, false);
        for p in [1.0, 2.0, 3.0] {
            let c = cost_matrix(&mu, &nu, |x, y| (x - y).abs().powf(p));
            let exact = brute_force_transport(&mu, &nu, &c).unwrap();
            let w = wasserstein_p(&mu, &nu, p).unwrap().powf(p);
            assert!((w - exact).abs() <= 1e-10, "trial {trial}, p = {p}: {w} vs {exact}");
        }
    }
}

#[test]
fn intrinsic_transport_matches_exhaustive_optimum() {
    let mut rng = StdRng::seed_from_u64(7);
    for trial in 0..100 {
        let mu = random_measure(&mut rng, true);
        let nu = random_measure(&mut rng, true);
        for theta in [0.5, 0.75] {
            let c = cost_matrix(&mu, &nu, |x, y| rho(x, y, theta).unwrap().powi(2));
            let exact = brute_force_transport(&mu, &nu, &c).unwrap();
            let w = wasserstein_rho2(&mu, &nu, theta).unwrap().powi(2);
            assert!((w - exact).abs() <= 1e-10, "trial {trial}, theta = {theta}: {w} vs {exact}");
        }
    }
}

#[test]
fn spec_examples() {
    let d0 = EmpiricalMeasure::dirac(0.0).unwrap();
    let d1 = EmpiricalMeasure::dirac(1.0).unwrap();
    assert_eq!(wasserstein_p(&d0, &d1, 1.0).unwrap(), 1.0);
    let a = EmpiricalMeasure::uniform(vec![0.0, 2.0]).unwrap();
    let b = EmpiricalMeasure::uniform(vec![1.0, 3.0]).unwrap();
    assert!((wasserstein_p(&a, &b, 1.0).unwrap() - 1.0).abs() < 1e-15);
    let a = EmpiricalMeasure::uniform(vec![1.0, 4.0]).unwrap();
    let b = EmpiricalMeasure::uniform(vec![4.0, 9.0]).unwrap();
    let c = cost_matrix(&a, &b, |x, y| rho(x, y, 0.5).unwrap().powi(2));
    let w = wasserstein_rho2(&a, &b, 0.5).unwrap();
    assert!((w * w - brute_force_transport(&a, &b, &c).unwrap()).abs() < 1e-10);
    assert!((w - 2.0).abs() < 1e-14);
}
