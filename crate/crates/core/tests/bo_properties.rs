use pfbo::bo::{
    bo_run, build_normalizer, default_init_points, spread_normalizer, BOConfig, BOState, Normalizer, Standardization,
};
use pfbo::gp::GPHyperParams;
use pfbo::kalman::kalman_loglik;
use pfbo::objective::{KalmanObjective, ParticleObjective};
use pfbo::ssm::{simulate, LinearGaussianModel};
use pfbo::Result;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const PEAK: f64 = 0.0137;

fn quadratic(theta: f64, _seed: u64) -> Result<f64> {
    Ok(-((theta - PEAK) / 0.02).powi(2))
}

fn unit(theta: f64) -> f64 {
    (theta - 0.005) / 0.02
}

fn noise_free_config(sigma_n: f64, iters: usize) -> BOConfig {
    BOConfig {
        hp: GPHyperParams::new(1.0, 0.2, sigma_n).unwrap(),
        max_iters: iters,
        standardization: Standardization::Fixed { mean: 0.0, scale: 1.0 },
        ..BOConfig::default()
    }
}

#[test]
fn zero_noise_quadratic_is_located() {
    let trace = bo_run(&quadratic, &noise_free_config(1e-6, 10)).unwrap();
    let last = trace.records.last().unwrap();
    assert!(
        (unit(last.incumbent_x) - unit(PEAK)).abs() < 1e-3,
        "incumbent {}",
        last.incumbent_x
    );
}

#[test]
fn greedy_refinement_never_worsens_the_incumbent() {
    let model = LinearGaussianModel::default();
    let series = simulate(&model, 500, 1).unwrap();
    let obj = KalmanObjective { series: &series, model };
    let n = spread_normalizer(&obj, &default_init_points((0.005, 0.025)), 0).unwrap();
    let cfg = BOConfig {
        constant_kappa: Some(0.0),
        standardization: Standardization::Fixed {
            mean: n.mean,
            scale: n.scale,
        },
        ..noise_free_config(1e-4, 30)
    };
    let trace = bo_run(&obj, &cfg).unwrap();
    let values: Vec<f64> = trace
        .incumbents()
        .iter()
        .map(|r| n.transform(kalman_loglik(r.incumbent_x, &series, &model).unwrap()))
        .collect();
    for w in values.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "{values:?}");
    }
}

#[test]
fn repeated_proposals_are_accepted() {
    let flat = |_theta: f64, _seed: u64| -> Result<f64> { Ok(0.0) };
    let cfg = BOConfig {
        constant_kappa: Some(0.0),
        ..noise_free_config(0.3, 0)
    };
    let mut state = BOState::new(cfg, Normalizer::identity()).unwrap();
    state.initialize(&flat).unwrap();
    for i in 1..=4 {
        let x = state.step(&flat).unwrap().x_evaluated;
        assert_eq!(x, 0.005);
        assert_eq!(state.trace().records.len(), 5 + i);
        assert_eq!(state.iteration(), i);
    }
}

#[test]
fn stepping_before_the_design_is_an_error() {
    let mut state = BOState::new(BOConfig::default(), Normalizer::identity()).unwrap();
    assert!(state.step(&quadratic).is_err());
    state.initialize(&quadratic).unwrap();
    assert!(state.initialize(&quadratic).is_err());
}

#[test]
fn standardization_does_not_change_proposals() {
    let (mu, s) = (-740.0, 0.37);
    let raw =
        |theta: f64, seed: u64| -> Result<f64> { Ok(mu + s * quadratic(theta, seed)? + (seed % 7) as f64 * 1e-3) };
    let pre = |theta: f64, seed: u64| -> Result<f64> { Ok((raw(theta, seed)? - mu) / s) };
    let base = BOConfig {
        max_iters: 12,
        seed: 17,
        ..BOConfig::default()
    };
    let a = bo_run(
        &raw,
        &BOConfig {
            standardization: Standardization::Fixed { mean: mu, scale: s },
            ..base.clone()
        },
    )
    .unwrap();
    let b = bo_run(
        &pre,
        &BOConfig {
            standardization: Standardization::Fixed { mean: 0.0, scale: 1.0 },
            ..base
        },
    )
    .unwrap();
    let xa: Vec<f64> = a.records.iter().map(|r| r.x_evaluated).collect();
    let xb: Vec<f64> = b.records.iter().map(|r| r.x_evaluated).collect();
    assert_eq!(xa, xb);
}

#[test]
fn normalizer_scale_is_largest_noise_level() {
    let sds = [1.0, 2.0, 3.0];
    let noisy = |theta: f64, seed: u64| -> Result<f64> {
        let i = ((theta - 1.0).round() as usize).min(2);
        let z: f64 = StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(10.0 * theta + sds[i] * z)
    };
    let n = build_normalizer(&noisy, &[1.0, 2.0, 3.0], 10_000, 5).unwrap();
    assert!((n.scale - 3.0).abs() < 0.05 * 3.0, "scale {}", n.scale);
    assert!((n.mean - 20.0).abs() < 0.1, "mean {}", n.mean);
}

#[test]
fn particle_objective_run_is_complete_and_reproducible() {
    let model = LinearGaussianModel::default();
    let series = simulate(&model, 100, 2).unwrap();
    let obj = ParticleObjective::new(&series, model, 300);
    let cfg = BOConfig {
        max_iters: 8,
        seed: 4,
        standardization: Standardization::Probe { reps: 4 },
        ..BOConfig::default()
    };
    let a = bo_run(&obj, &cfg).unwrap();
    let b = bo_run(&obj, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 5 + 8);
    assert_eq!(a.incumbents().len(), 9);
    for r in &a.records {
        assert!((0.005..=0.025).contains(&r.x_evaluated));
        assert!((0.005..=0.025).contains(&r.incumbent_x));
    }
    let c = bo_run(&obj, &BOConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.records, c.records);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn proposals_stay_within_bounds(
        lo in 0.0f64..1.0,
        width in 0.01f64..2.0,
        peak in -0.5f64..1.5,
        seed in any::<u64>(),
    ) {
        let hi = lo + width;
        let f = move |theta: f64, s: u64| -> Result<f64> {
            Ok(-((theta - lo) / width - peak).powi(2) + (s % 11) as f64 * 0.01)
        };
        let cfg = BOConfig {
            bounds: (lo, hi),
            init_points: default_init_points((lo, hi)),
            max_iters: 6,
            seed,
            standardization: Standardization::Probe { reps: 3 },
            ..BOConfig::default()
        };
        let trace = bo_run(&f, &cfg).unwrap();
        for r in &trace.records {
            prop_assert!(r.x_evaluated >= lo && r.x_evaluated <= hi);
            prop_assert!(r.incumbent_x >= lo && r.incumbent_x <= hi);
        }
    }
}
