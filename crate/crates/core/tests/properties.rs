use std::collections::HashSet;

use proptest::prelude::*;

use emaopt::accumulators::{AccumulatorMode, EmaState, Preset};
use emaopt::harness::{GridConfig, Spacing};
use emaopt::moreau::{moreau_gradient, ProxPointOptions};
use emaopt::numeric::{DiagonalMetric, Vector};
use emaopt::optimizers::select_tstar;
use emaopt::problems::{make_test_quadratic, CompositeProblem};
use emaopt::regularizer::{soft_threshold, Regularizer};
use emaopt::rng::{Purpose, RunId, StreamKey, StreamRng};
use emaopt::zoo::{sample_ball, sample_direction};

const D: usize = 4;

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, D)
}

fn metric() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05..20.0f64, D)
}

fn regularizer() -> impl Strategy<Value = Regularizer> {
    prop_oneof![
        (0.0..5.0f64).prop_map(|w| Regularizer::l1(w).unwrap()),
        (0.1..10.0f64).prop_map(|r| Regularizer::ball(r).unwrap()),
        (-3.0..0.0f64, 0.0..3.0f64).prop_map(|(lo, hi)| {
            Regularizer::box_indicator(Vector::filled(D, lo).unwrap(), Vector::filled(D, hi).unwrap()).unwrap()
        }),
    ]
}

fn m_dist_sq(a: &[f64], b: &[f64], m: &[f64]) -> f64 {
    (0..a.len()).map(|i| m[i] * (a[i] - b[i]).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vhat_never_decreases(
        grads in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, D), 1..60),
        which in 0usize..3,
    ) {
        let preset = [Preset::Fema1, Preset::Fema2, Preset::Fema3][which];
        let schedule = preset.config().schedule;
        let mut state = EmaState::with_default_floor(D, AccumulatorMode::Ema);
        for g in &grads {
            let before = state.v_hat().clone();
            state.update(g, &schedule).unwrap();
            for i in 0..D {
                prop_assert!(state.v_hat()[i] >= before[i]);
            }
        }
    }

    #[test]
    fn convex_prox_is_nonexpansive(h in regularizer(), x in coords(), y in coords(), m in metric(), step in 0.01..10.0f64) {
        let metric = DiagonalMetric::from_vec(m.clone()).unwrap();
        let px = h.scaled_prox(&Vector::new(x.clone()).unwrap(), step, &metric).unwrap();
        let py = h.scaled_prox(&Vector::new(y.clone()).unwrap(), step, &metric).unwrap();
        let lhs = m_dist_sq(px.as_slice(), py.as_slice(), &m);
        let rhs = m_dist_sq(&x, &y, &m);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-9, "{lhs} > {rhs}");
    }

    #[test]
    fn indicator_prox_lands_in_set(h in regularizer(), x in coords(), m in metric()) {
        prop_assume!(h.is_indicator());
        let metric = DiagonalMetric::from_vec(m).unwrap();
        let p = h.scaled_prox(&Vector::new(x).unwrap(), 1.0, &metric).unwrap();
        let slack: Vec<f64> = p.iter().map(|v| v * (1.0 - 1e-9)).collect();
        prop_assert!(h.contains(&slack));
    }

    #[test]
    fn soft_threshold_shrinks(x in -1e6..1e6f64, t in 0.0..1e3f64) {
        let s = soft_threshold(x, t);
        prop_assert_eq!(s, x.signum() * (x.abs() - t).max(0.0));
        prop_assert!(s.abs() <= x.abs());
    }

    #[test]
    fn distinct_runs_get_distinct_streams(
        master in any::<u64>(),
        runs in prop::collection::hash_set((0u16..9, 0u16..20, 0u16..20), 1..40),
    ) {
        let mut seen = HashSet::new();
        for (a, g, r) in runs {
            for purpose in Purpose::ALL {
                let run = RunId { algorithm: a, grid_index: g, repetition: r };
                prop_assert!(seen.insert(StreamKey::new(master, run, purpose).stream_id()));
            }
        }
    }

    #[test]
    fn tstar_index_in_range(steps in prop::collection::vec(1e-6..1.0f64, 1..50), seed in any::<u64>()) {
        let mut rng = StreamRng::from_seed(seed, Purpose::Tstar);
        for _ in 0..20 {
            prop_assert!(select_tstar(&steps, &mut rng).unwrap() < steps.len());
        }
    }

    #[test]
    fn sphere_and_ball_samples(d in 1usize..30, seed in any::<u64>()) {
        let mut rng = StreamRng::from_seed(seed, Purpose::Direction);
        let u = sample_direction(d, &mut rng).unwrap();
        prop_assert!((u.norm() - 1.0).abs() < 1e-12);
        prop_assert!(sample_ball(d, &mut rng).unwrap().norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn grid_points_are_ordered(count in 1usize..30, lo in 1e-6..1.0f64, width in 0.0..10.0f64, log in any::<bool>()) {
        let grid = GridConfig {
            count,
            min: lo,
            max: lo + width,
            spacing: if log { Spacing::Log } else { Spacing::Linear },
        };
        let points = grid.points();
        prop_assert_eq!(points.len(), count);
        prop_assert_eq!(points[0], lo);
        if count > 1 {
            prop_assert_eq!(points[count - 1], lo + width);
        }
        prop_assert!(points.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn envelope_sits_below_objective(
        spectrum in prop::collection::vec(0.0..3.0f64, D),
        linear in coords(),
        weight in 0.0..2.0f64,
        x in coords(),
        m in metric(),
        zeta in 0.01..5.0f64,
    ) {
        let problem = make_test_quadratic(Vector::new(spectrum).unwrap(), Vector::new(linear).unwrap())
            .unwrap()
            .with_regularizer(Regularizer::l1(weight).unwrap());
        let metric = DiagonalMetric::from_vec(m).unwrap();
        let x = Vector::new(x).unwrap();
        let report = moreau_gradient(&problem, &x, zeta, &metric, &ProxPointOptions::default()).unwrap();
        let psi = problem.composite_value(x.as_slice()).unwrap();
        prop_assert!(report.grad_norm_sq >= 0.0);
        prop_assert!(report.envelope_value <= psi + 1e-9 * psi.abs().max(1.0));
    }
}
