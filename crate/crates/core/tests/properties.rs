use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spingas::critfit::{three_step_fit, weighted_cost, FitForm, FitSpec, Weights};
use spingas::dynamics::{relaxation_term, spin_exchange_term, Generator, Model, Point, ProjectionMode, SimParams};
use spingas::selftest::random_density;
use spingas::sweep::{linspace, map_conditions, run_sweep, AttenuationMode, ConditionsMap, SweepGrid};

fn fast_config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

/// Deterministic multiplicative noise in [−amp, amp].
fn noisy(y: &[f64], seed: u64, amp: f64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    y.iter().map(|&v| v * (1.0 + rng.random_range(-amp..amp))).collect()
}

proptest! {
    #![proptest_config(fast_config())]

    #[test]
    fn weighted_cost_matches_direct_sum(
        a in 0.1f64..5.0, x0 in 0.5f64..2.0, e in 0.2f64..2.0, inverse_cube in any::<bool>(),
        ys in prop::collection::vec(0.0f64..3.0, 12),
    ) {
        let weights = if inverse_cube { Weights::InverseCube } else { Weights::Uniform };
        let x = linspace(x0 * 1.05, x0 * 3.0, ys.len());
        let p = [a, x0, e];
        let direct: f64 = x
            .iter()
            .zip(&ys)
            .map(|(&xi, &yi)| {
                let w = if inverse_cube { xi.powi(-3) } else { 1.0 };
                let f = a * (1.0 - x0 / xi).powf(-e);
                w * (yi - f).powi(2)
            })
            .sum();
        let c = weighted_cost(FitForm::Znu, weights, &x, &ys, &p);
        prop_assert!((c - direct).abs() <= 1e-10 * direct.max(1.0), "{c} vs {direct}");
    }

    #[test]
    fn beta_fit_is_scale_equivariant(scale in 0.2f64..5.0, amp in 0.2f64..5.0, seed in any::<u64>()) {
        let x = linspace(1.0, 4.0, 30);
        let truth = [1.0, 1.6, 0.5];
        let y = noisy(&x.iter().map(|&v| FitForm::Beta.eval(v, &truth)).collect::<Vec<_>>(), seed, 0.01);
        let spec = FitSpec::for_form(FitForm::Beta);
        let base = three_step_fit(&x, &y, &spec).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * amp).collect();
        let scaled = three_step_fit(&xs, &ys, &spec).unwrap();
        prop_assert!((scaled.exponent - base.exponent).abs() < 1e-5);
        prop_assert!((scaled.critical_value.unwrap() / scale - base.critical_value.unwrap()).abs() < 1e-5);
        prop_assert!((scaled.amplitude / amp - base.amplitude).abs() < 1e-5 * base.amplitude);
    }

    #[test]
    fn noiseless_divergent_fits_recover_parameters(x0 in 1.2f64..2.0, e in 0.6f64..1.4, a in 0.01f64..2.0) {
        let x = linspace(x0 * 1.03, x0 * 2.5, 30);
        let truth = [a, x0, e];
        let y: Vec<f64> = x.iter().map(|&v| FitForm::Znu.eval(v, &truth)).collect();
        let r = three_step_fit(&x, &y, &FitSpec::for_form(FitForm::Znu)).unwrap();
        prop_assert!((r.exponent - e).abs() < 1e-6 * e);
        prop_assert!((r.critical_value.unwrap() - x0).abs() < 1e-6 * x0);
    }

    #[test]
    fn exchange_and_relaxation_preserve_trace_and_fz(seed in any::<u64>(), coefficient in 0.0f64..10.0) {
        let p = SimParams::default();
        let model = Model::new(&p).unwrap();
        let ops = &model.sys.ground_ops;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, ops.f.z.matrix.nrows());
        let ex = spin_exchange_term(&rho, coefficient, &ops.s);
        prop_assert!(ex.trace().norm() < 1e-12);
        prop_assert!((&ops.f.z.matrix * &ex).trace().norm() < 1e-12);
        let rel = relaxation_term(&rho, 1.0, p.relaxation, &ops.f);
        prop_assert!(rel.trace().norm() < 1e-12);
    }

    #[test]
    fn generator_field_is_traceless(i in 0.0f64..8.0, j in 0.0f64..10.0, h in 0.0f64..2.0, seed in -0.01f64..0.01) {
        let p = SimParams::at(i, j).with_bias(h).with_seed(seed);
        let g = Generator::new(&Point::standalone(&p).unwrap()).unwrap();
        let y = g.seeded_state(seed);
        let f = g.field(&y);
        prop_assert!(g.trace(&f).norm() < 1e-9 * p.gamma.max(1.0) * (1.0 + i + j + h));
        prop_assert!(g.hermiticity_error(&f) < 1e-9 * (1.0 + i + j + h) * p.gamma);
    }

    #[test]
    fn seeded_state_is_a_density_matrix(seed in -0.01f64..0.01, hyperfine_only in any::<bool>()) {
        let mut p = SimParams::at(1.0, 1.0);
        if hyperfine_only {
            p.projection = ProjectionMode::HyperfineOnly;
            p.b_z = 1e-4;
        }
        let g = Generator::new(&Point::standalone(&p).unwrap()).unwrap();
        let inv = g.invariants(&g.seeded_state(seed));
        prop_assert!(inv.trace_error < 1e-12 && inv.hermiticity_error < 1e-12 && inv.min_eigenvalue > -1e-12);
    }

    #[test]
    fn conditions_map_monotonicity(n in 1e10f64..5e13, factor in 1.01f64..10.0, phi in 0.5f64..60.0) {
        let map = ConditionsMap::default();
        let (j1, i1) = map_conditions(n, phi, &map).unwrap();
        let (j2, i2) = map_conditions(n * factor, phi, &map).unwrap();
        prop_assert!(j2 > j1);
        prop_assert!(i2 < i1);
        let (_, i3) = map_conditions(n, phi * factor, &map).unwrap();
        prop_assert!((i3 / i1 - factor).abs() < 1e-12 * factor);
        let off = ConditionsMap { attenuation: AttenuationMode::Off, ..map };
        let (_, i_off) = map_conditions(n, phi, &off).unwrap();
        prop_assert!(i1 < i_off);
        let point = ConditionsMap { attenuation: AttenuationMode::Point, ..map };
        let (_, i_point) = map_conditions(n, phi, &point).unwrap();
        prop_assert!(i_point < i1);
    }
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let grid = SweepGrid::rates(vec![2.0, 4.0, 6.0], vec![1.0, 3.0]);
    let p = SimParams::default();
    let opts = spingas::dynamics::SteadyOptions::default();
    let one = run_sweep(&grid, &p, &opts, 1).unwrap();
    let three = run_sweep(&grid, &p, &opts, 3).unwrap();
    assert_eq!(one.records, three.records);
    assert_eq!(one.params_hash, three.params_hash);
}
