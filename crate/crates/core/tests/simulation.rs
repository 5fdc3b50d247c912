use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use splq_core::distribution::draw;
use splq_core::estimator::FitOptions;
use splq_core::models::{Family, Gpd, SplqModel};
use splq_core::sim::{replicate_rng, run_scenario, Scenario, ScenarioConfig};

fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn sampler_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (sigma, nu) in [(3.0, 0.1), (1.0, -0.5), (2.0, 0.0)] {
        let x = draw(&Gpd::new(sigma, nu).unwrap(), 200_000, &mut rng);
        let (m, se) = mean_and_se(&x);
        assert!((m - sigma / (1.0 - nu)).abs() < 5.0 * se, "GPD({sigma},{nu}): {m}");
    }
    for (sigma, nu) in [(3.0, 0.8), (1.0, 2.0)] {
        let x = draw(&Family::Weibull.law(sigma, nu).unwrap(), 200_000, &mut rng);
        let (m, se) = mean_and_se(&x);
        assert!((m - sigma * gamma(1.0 + 1.0 / nu)).abs() < 5.0 * se, "Weibull({sigma},{nu}): {m}");
    }
}

#[test]
fn jacobian_against_closed_form_differences() {
    let model = SplqModel::gpd_l234();
    let lam = |s: f64, v: f64| {
        let l2 = s / ((1.0 - v) * (2.0 - v));
        [l2, l2 * (1.0 + v) / (3.0 - v), l2 * (1.0 + v) * (2.0 + v) / ((3.0 - v) * (4.0 - v))]
    };
    for (s, v) in [(3.0, 0.7), (1.0, -0.4), (5.0, 0.0)] {
        let j = model.jacobian(&[s, v]).unwrap();
        let h = 1e-6;
        for r in 0..3 {
            let ds = (lam(s + h, v)[r] - lam(s - h, v)[r]) / (2.0 * h);
            let dv = (lam(s, v + h)[r] - lam(s, v - h)[r]) / (2.0 * h);
            // the target is f = -λ
            assert!((j[(r, 0)] + ds).abs() < 1e-7 * (1.0 + ds.abs()));
            assert!((j[(r, 1)] + dv).abs() < 1e-6 * (1.0 + dv.abs()));
        }
    }
}

#[test]
fn contaminated_scenarios_place_the_atom_last() {
    for (id, atom) in [(2u8, 300.0), (3, 30.0)] {
        let sc = Scenario::builtin(id).unwrap();
        let mut rng = replicate_rng(7, 0);
        let x = sc.draw(105, &mut rng);
        assert_eq!(x.len(), 105);
        assert_eq!(x.iter().filter(|v| **v == atom).count(), 10);
        assert!(x[95..].iter().all(|v| *v == atom));
    }
    assert_eq!(Scenario::builtin(1).unwrap().clean_count(105), 105);
    assert!(Scenario::builtin(5).is_err());
}

#[test]
fn replicate_streams_are_independent_of_order() {
    let a: Vec<f64> = (0..4).map(|k| rand::Rng::random::<f64>(&mut replicate_rng(5, k))).collect();
    let b: Vec<f64> = (0..4).rev().map(|k| rand::Rng::random::<f64>(&mut replicate_rng(5, k))).collect();
    assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    assert_ne!(a[0], a[1]);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = ScenarioConfig::new(3, 40, 8, 2024);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_scenario(&cfg, &FitOptions::default()).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.records, four.records);
    assert_eq!(one.summary, four.summary);
}

#[test]
fn zero_replicates_and_bad_configs() {
    let empty = run_scenario(&ScenarioConfig::new(2, 50, 0, 1), &FitOptions::default()).unwrap();
    assert!(empty.records.is_empty());
    assert!(empty.summary.parameters.is_empty() && empty.summary.distances.is_empty());
    assert!(run_scenario(&ScenarioConfig::new(1, 4, 3, 1), &FitOptions::default()).is_err());
    let mut cfg = ScenarioConfig::new(1, 30, 3, 1);
    cfg.estimators.clear();
    assert!(run_scenario(&cfg, &FitOptions::default()).is_err());
}
