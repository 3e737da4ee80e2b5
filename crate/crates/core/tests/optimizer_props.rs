mod common;

use pglearn_core::dataset::{inject_noise_features, sample_split, synthetic, Dataset, SplitSpec};
use pglearn_core::graph::HyperConfig;
use pglearn_core::optimizer::{
    gradient_step, run_until, Iterations, OptimizerSettings, OptimizerState, Problem, SearchSpace, Status,
};

fn noisy_blobs(seed: u64, n: usize) -> (Dataset, SplitSpec) {
    let spec = synthetic::BlobSpec { n, classes: 3, dims: 2, center_scale: 2.5, spread: 1.0 };
    let clean = synthetic::gaussian_blobs(&spec, seed).unwrap();
    let ds = inject_noise_features(&clean, 1.0, seed + 1000).unwrap();
    let split = sample_split(&ds, 0.2, 0.5, seed).unwrap();
    (ds, split)
}

fn fresh(ds: &Dataset, settings: &OptimizerSettings, seed: u64) -> OptimizerState {
    let space = SearchSpace::from_dataset(ds, seed).unwrap();
    OptimizerState::init(&space, ds.d(), settings, seed)
}

#[test]
fn json_checkpoint_resumes_bitwise() {
    let settings = OptimizerSettings::default();
    for seed in 0..6 {
        let (ds, split) = noisy_blobs(seed, 90);
        let problem = Problem::new(&ds, &split).unwrap();
        let mut straight = fresh(&ds, &settings, seed);
        run_until(&mut straight, &problem, &settings, &mut Iterations(8)).unwrap();

        let mut first = fresh(&ds, &settings, seed);
        run_until(&mut first, &problem, &settings, &mut Iterations(3)).unwrap();
        let json = serde_json::to_string(&first).unwrap();
        let mut resumed: OptimizerState = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&resumed).unwrap(), json);
        run_until(&mut resumed, &problem, &settings, &mut Iterations(5)).unwrap();

        assert_eq!(serde_json::to_string(&resumed).unwrap(), serde_json::to_string(&straight).unwrap());
        assert_eq!(resumed, straight);
    }
}

#[test]
fn split_budgets_compose() {
    let settings = OptimizerSettings::default();
    let (ds, split) = noisy_blobs(3, 80);
    let problem = Problem::new(&ds, &split).unwrap();
    let mut whole = fresh(&ds, &settings, 5);
    let n_whole = run_until(&mut whole, &problem, &settings, &mut Iterations(7)).unwrap();
    let mut parts = fresh(&ds, &settings, 5);
    let n1 = run_until(&mut parts, &problem, &settings, &mut Iterations(2)).unwrap();
    let n2 = run_until(&mut parts, &problem, &settings, &mut Iterations(5)).unwrap();
    assert_eq!(n1 + n2, n_whole);
    assert_eq!(parts, whole);
}

#[test]
fn zero_budget_leaves_state_unchanged() {
    let settings = OptimizerSettings::default();
    let (ds, split) = noisy_blobs(4, 60);
    let problem = Problem::new(&ds, &split).unwrap();
    let mut s = fresh(&ds, &settings, 1);
    let before = s.clone();
    assert_eq!(run_until(&mut s, &problem, &settings, &mut Iterations(0)).unwrap(), 0);
    assert_eq!(s, before);
}

#[test]
fn floor_history_and_convergence_invariants() {
    let settings = OptimizerSettings { gamma: 0.5, ..OptimizerSettings::default() };
    for seed in 0..4 {
        let (ds, split) = noisy_blobs(10 + seed, 90);
        let problem = Problem::new(&ds, &split).unwrap();
        let mut s = fresh(&ds, &settings, seed);
        for _ in 0..25 {
            if s.is_finished() {
                break;
            }
            gradient_step(&mut s, &problem, &settings).unwrap();
            assert!(s.config.a.iter().all(|&a| a >= s.a_floor));
        }
        for w in s.loss_history.windows(2) {
            assert!(w[1].iteration > w[0].iteration);
        }
        if s.status == Status::Converged {
            let norm = s.config.a.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            assert!(s.last_step <= settings.eps_conv * norm);
        }
    }
}

#[test]
fn recorded_loss_belongs_to_config_in_effect() {
    let settings = OptimizerSettings::default();
    let (ds, split) = noisy_blobs(21, 90);
    let problem = Problem::new(&ds, &split).unwrap();
    let mut s = fresh(&ds, &settings, 2);
    for _ in 0..4 {
        let config = s.config.clone();
        let warm = s.f_warm.clone();
        gradient_step(&mut s, &problem, &settings).unwrap();
        let (_, sol) = problem.solve(&config, &settings.solver, warm.as_ref()).unwrap();
        let (loss, _, _) = problem.score(&sol.f).unwrap();
        assert_eq!(s.loss_history.last().unwrap().loss, loss);
        assert_eq!(s.last_eval.as_ref().unwrap().config, config);
        if s.is_finished() {
            break;
        }
    }
}

#[test]
fn projection_clamps_to_floor() {
    let settings = OptimizerSettings { gamma: 50.0, ..OptimizerSettings::default() };
    let (ds, split) = noisy_blobs(2, 60);
    let problem = Problem::new(&ds, &split).unwrap();
    let space = SearchSpace::from_dataset(&ds, 0).unwrap();
    let cfg = HyperConfig { k: 6, a: vec![1.0 / space.mean_distance.powi(2); ds.d()] };
    let mut s = OptimizerState::from_config(cfg, space.a_floor(), &settings);
    gradient_step(&mut s, &problem, &settings).unwrap();
    assert!(s.config.a.iter().all(|&a| a >= space.a_floor()));
}

#[test]
fn hundred_steps_reduce_loss_in_most_seeds() {
    let settings = OptimizerSettings::default();
    let mut improved = 0;
    for seed in 0..10 {
        let (ds, split) = noisy_blobs(300 + seed, 150);
        let problem = Problem::new(&ds, &split).unwrap();
        let mut s = fresh(&ds, &settings, seed);
        run_until(&mut s, &problem, &settings, &mut Iterations(100)).unwrap();
        let first = s.loss_history.first().unwrap().loss;
        let last = s.loss_history.last().unwrap().loss;
        if last < first {
            improved += 1;
        }
    }
    assert!(improved >= 9, "{improved}/10 seeds improved");
}

#[test]
fn refit_counts_test_points() {
    let settings = OptimizerSettings::default();
    let (ds, split) = noisy_blobs(8, 90);
    let problem = Problem::new(&ds, &split).unwrap();
    let s = fresh(&ds, &settings, 8);
    let r = problem.refit(&s.config, &settings.solver).unwrap();
    assert_eq!(r.test_points, split.unlabeled.len());
    assert!((0.0..=1.0).contains(&r.test_accuracy));
    assert!(r.unreached <= r.test_points);
}
