use soliton_core::experiments::{
    direct_eigenvalue_resolve, run_first_order_validation, Equation, ExperimentConfig, Records,
};
use soliton_core::nls::nls_find_eigenvalues;
use soliton_core::stochastic::{path_seed, sample_brownian};
use soliton_core::{BoxPotential, NoiseSpec, PathGrid};

fn pot(q: f64, r: f64) -> BoxPotential {
    BoxPotential::new(q, r).unwrap()
}

#[test]
fn resolve_is_odd_under_path_negation_to_first_order() {
    let p = pot(1.0, 3.0);
    let eta0 = *nls_find_eigenvalues(&p, 1e-13).unwrap().eigenvalues.last().unwrap();
    let grid = PathGrid::new(3.0, 3000).unwrap();
    let noise = NoiseSpec::white(0.01);
    let s = noise.intensity();
    for i in 0..10 {
        let w = sample_brownian(path_seed(61, i), &grid);
        let up = direct_eigenvalue_resolve(Equation::Nls, &p, &noise, &w, eta0).unwrap().unwrap();
        let down = direct_eigenvalue_resolve(Equation::Nls, &p, &noise, &w.negated(), eta0)
            .unwrap()
            .unwrap();
        // The odd part is O(s) and the even part O(s²).
        assert!(((up - eta0) + (down - eta0)).abs() < 10.0 * s * s, "{up} {down}");
        assert!((up - eta0).abs() > 1e-3 * s);
    }
}

#[test]
fn kdv_zero_background_direct_ratio_is_one_half() {
    let p = pot(0.0, 1.0);
    let grid = PathGrid::new(1.0, 1000).unwrap();
    let noise = NoiseSpec::white(0.01);
    let mut checked = 0;
    for i in 0..200 {
        let w = sample_brownian(path_seed(62, i), &grid);
        if w.terminal() <= 0.5 {
            continue;
        }
        let eta = direct_eigenvalue_resolve(Equation::Kdv, &p, &noise, &w, 0.0).unwrap().unwrap();
        let ratio = eta / (noise.intensity() * w.terminal());
        assert!((ratio - 0.5).abs() < 0.02, "ratio {ratio}");
        checked += 1;
    }
    assert!(checked > 20);
}

fn validation_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(Equation::Nls, pot(1.0, 3.0), NoiseSpec::white(0.01), 100, 3000, seed)
        .unwrap()
        .with_sigma_ladder(vec![0.02, 0.01, 0.005])
}

#[test]
fn validation_is_bit_reproducible() {
    let a = run_first_order_validation(&validation_config(7)).unwrap();
    let b = run_first_order_validation(&validation_config(7)).unwrap();
    assert_eq!(a, b);
    let c = run_first_order_validation(&validation_config(8)).unwrap();
    assert_ne!(a.data, c.data);
}

#[test]
fn remainder_over_s2_stays_bounded_along_the_ladder() {
    let report = run_first_order_validation(&validation_config(9)).unwrap();
    let Records::FirstOrder { summary, .. } = &report.data else {
        panic!("first-order records expected");
    };
    let scaled: Vec<f64> = summary
        .per_sigma
        .iter()
        .map(|row| row.mean_remainder_over_s2.unwrap())
        .collect();
    assert_eq!(scaled.len(), 3);
    let spread = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let size = scaled.iter().map(|x| x.abs()).fold(0.0, f64::max);
    assert!(spread <= 0.25 * size.max(1.0), "{scaled:?}");
    assert!(report.check("correlation_eta").unwrap().passed);
}
