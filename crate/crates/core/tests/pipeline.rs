//! End-to-end runs on small grids, plus step invariants.

use std::path::PathBuf;

use proptest::prelude::*;
use uadiff_core::harness::{self, ExperimentConfig};
use uadiff_core::integrator::Integrator;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str, overrides: &[(&str, &str)]) -> ExperimentConfig {
    let o: Vec<(String, String)> = overrides.iter().map(|&(k, v)| (k.into(), v.into())).collect();
    ExperimentConfig::load(&configs_dir().join(name), &o).unwrap()
}

#[test]
fn shipped_configs_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path, &[]).unwrap();
            let again = ExperimentConfig::from_toml(&cfg.to_toml(), &[]).unwrap();
            assert_eq!(cfg, again, "{}", path.display());
            assert_eq!(cfg.hash(), again.hash());
            seen += 1;
        }
    }
    assert!(seen >= 9);
}

#[test]
fn overrides_take_precedence() {
    let cfg = load("table1.toml", &[("discretization.n_list", "[10, 20]"), ("physics.diffusivity", "0.5")]);
    assert_eq!(cfg.discretization.n_list, vec![10, 20]);
    assert_eq!(cfg.physics.diffusivity, 0.5);
    assert!(ExperimentConfig::load(&configs_dir().join("table1.toml"), &[("physics.nope".into(), "1".into())]).is_err());
}

#[test]
fn manufactured_spatial_order_on_small_grids() {
    let cfg = load("table2.toml", &[("discretization.n_list", "[10, 20, 40]"), ("discretization.t_fin", "0.01"), ("discretization.dt_ref", "1e-4")]);
    let report = harness::convergence_space(&cfg).unwrap();
    let b = &report.blocks[0];
    let slope = harness::fit_order(&b.axis(), &b.e2()).unwrap();
    assert!((3.5..4.5).contains(&slope), "slope {slope}, errors {:?}", b.e2());
}

#[test]
fn third_order_in_time_for_two_epsilons() {
    let cfg = load(
        "table3.toml",
        &[
            ("discretization.n", "20"),
            ("discretization.n_ts", "[5, 10, 20]"),
            ("discretization.t_fin", "0.05"),
            ("discretization.dt_ref", "1e-4"),
            ("physics.epsilon", "[1e-2, 1e-5]"),
        ],
    );
    let report = harness::convergence_time(&cfg).unwrap();
    assert_eq!(report.blocks.len(), 2);
    for b in &report.blocks {
        let slope = harness::fit_order(&b.axis(), &b.e2()).unwrap();
        assert!((2.6..3.4).contains(&slope), "eps {:?}: slope {slope}, errors {:?}", b.epsilon, b.e2());
    }
}

#[test]
fn robin_bubble_run_produces_a_table() {
    let cfg = load(
        "bubble_time.toml",
        &[
            ("discretization.n", "40"),
            ("discretization.n_ts", "[2, 4]"),
            ("discretization.t_fin", "1e-3"),
            ("discretization.dt_ref", "1e-4"),
            ("physics.epsilon", "[1e-2]"),
        ],
    );
    let report = harness::convergence_time(&cfg).unwrap();
    let e = report.blocks[0].e2();
    assert!(e.iter().all(|v| v.is_finite() && *v > 0.0) && e[1] < e[0], "{e:?}");
    let csv = report.to_table().to_csv().unwrap();
    assert!(csv.lines().any(|l| l.starts_with("epsilon,N_ts")));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

fn neumann_square(velocity: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(
        &format!(
            r#"
[domain]
wall = "neumann"
[physics]
diffusivity = 0.05
velocity = {velocity}
"#
        ),
        &[],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constants_are_fixed_points(order in 1u8..=3, eps_exp in 0.0f64..6.0, t0 in 0.0f64..1.0, dt_exp in -4.0f64..-1.0) {
        let cfg = neumann_square(r#"{ kind = "constant", ux = 1.0, uy = -0.5 }"#);
        let sys = cfg.system(12).unwrap();
        let g = cfg.time_factor(10f64.powf(-eps_exp)).unwrap();
        let mut it = Integrator::new(&sys, g, order).unwrap();
        let ones = vec![1.0; sys.n()];
        let out = it.step(&ones, t0, 10f64.powf(dt_exp), &vec![0.0; sys.n()]).unwrap();
        for v in out {
            prop_assert!((v - 1.0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn steps_are_linear(order in 1u8..=3, eps_exp in 0.0f64..6.0, a in -2.0f64..2.0, seed in 0u64..1000) {
        let cfg = neumann_square(r#"{ kind = "cubic", amplitude = 1.0 }"#);
        let sys = cfg.system(12).unwrap();
        let g = cfg.time_factor(10f64.powf(-eps_exp)).unwrap();
        let zero = vec![0.0; sys.n()];
        let f1 = sys.sample(|x, y| (x + 0.1 * seed as f64).sin() * y.cos());
        let f2 = sys.sample(|x, y| (-(x * x + y * y) * (1.0 + seed as f64 / 500.0)).exp());
        let step = |c: &[f64]| Integrator::new(&sys, g, order).unwrap().step(c, 0.3, 0.01, &zero).unwrap();
        let (s1, s2) = (step(&f1), step(&f2));
        let mix: Vec<f64> = f1.iter().zip(&f2).map(|(u, v)| a * u + v).collect();
        let sm = step(&mix);
        for k in 0..sm.len() {
            prop_assert!((sm[k] - (a * s1[k] + s2[k])).abs() < 1e-9, "node {k}");
        }
    }
}
