use ndarray::Array2;
use phantom_core::collision_net::{
    correct, generate_dataset, train_ccn, train_cpn, Ccn, CollisionGuard, Cpn, JointNormalizer, Split, TrainingConfig,
};
use phantom_core::kinematics::{bundled, check_self_collision};
use phantom_core::nn::{Activation, Mlp};
use phantom_core::{Error, Exec, JointConfig};
use phantom_oracles::max_gradient_error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
const FD_FLOOR: f64 = 1e-6;

fn tiny_net(rng: &mut ChaCha8Rng, sizes: &[usize], out: Activation) -> Mlp {
    let mut net = Mlp::random(sizes, Activation::Relu, out, rng);
    for k in 0..net.parameter_count() {
        *net.parameter_mut(k).unwrap() += rng.random_range(-0.3..0.3);
    }
    net
}

fn tiny_norm(rng: &mut ChaCha8Rng, d: usize) -> JointNormalizer {
    let lower: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..-0.1)).collect();
    let upper: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..2.0)).collect();
    JointNormalizer::from_limits(&lower, &upper).unwrap()
}

fn batch(rng: &mut ChaCha8Rng, norm: &JointNormalizer, b: usize) -> Array2<f64> {
    let (lo, hi) = (norm.lower(), norm.upper());
    Array2::from_shape_fn((b, lo.len()), |(_, j)| rng.random_range(lo[j]..hi[j]))
}

fn bce_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, m) = (rng.random_range(2..5), rng.random_range(1..4));
    let norm = tiny_norm(&mut rng, d);
    let cpn = Cpn::from_parts(tiny_net(&mut rng, &[d, 5, 4, m], Activation::Sigmoid), norm.clone()).unwrap();
    let q = batch(&mut rng, &norm, 6);
    let t = Array2::from_shape_fn((6, m), |_| if rng.random_bool(0.4) { 1.0 } else { 0.0 });
    let (_, g) = cpn.loss_and_grad(q.view(), t.view()).unwrap();
    max_gradient_error(
        &g.flatten(),
        |k, delta| {
            let mut c = cpn.clone();
            *c.net.parameter_mut(k).unwrap() += delta;
            c.loss_and_grad(q.view(), t.view()).unwrap().0
        },
        FD_STEP,
        FD_FLOOR,
    )
}

fn composite_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, m) = (rng.random_range(2..5), rng.random_range(1..4));
    let norm = tiny_norm(&mut rng, d);
    let cpn = Cpn::from_parts(tiny_net(&mut rng, &[d, 5, m], Activation::Sigmoid), norm.clone()).unwrap();
    let ccn = Ccn::from_parts(tiny_net(&mut rng, &[d, 6, d], Activation::Tanh), norm.clone()).unwrap();
    let (alpha, beta) = (rng.random_range(0.1..2.0), rng.random_range(0.5..10.0));
    let q = batch(&mut rng, &norm, 6);
    let (_, g) = ccn.loss_and_grad(q.view(), &cpn, alpha, beta).unwrap();
    max_gradient_error(
        &g.flatten(),
        |k, delta| {
            let mut c = ccn.clone();
            *c.net.parameter_mut(k).unwrap() += delta;
            c.loss_and_grad(q.view(), &cpn, alpha, beta).unwrap().0.total
        },
        FD_STEP,
        FD_FLOOR,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn bce_gradient_matches_finite_differences(seed in any::<u64>()) {
        let e = bce_gradient_error(seed);
        prop_assert!(e < 1e-4, "relative error {e}");
    }

    #[test]
    fn composite_gradient_matches_finite_differences(seed in any::<u64>()) {
        let e = composite_gradient_error(seed);
        prop_assert!(e < 1e-4, "relative error {e}");
    }
}

#[test]
fn dataset_is_identical_across_strategies_and_labels_match_oracle() {
    let toy = bundled::toy_finger();
    let a = generate_dataset(&toy, 10_000, 4, Exec::Sequential).unwrap();
    let b = generate_dataset(&toy, 10_000, 4, Exec::Parallel).unwrap();
    assert_eq!(a.configs(), b.configs());
    assert_eq!(a.labels(), b.labels());
    for i in (0..a.len()).step_by(97) {
        let q = JointConfig(a.config(i).to_vec());
        assert!(q.within_limits(&toy));
        assert_eq!(check_self_collision(&toy, &q).unwrap(), a.label_row(i));
    }
    let n = a.len() as f64;
    let train = a.indices(Split::Train).len() as f64;
    assert!((train / n - 0.8).abs() < 1e-9);
}

#[test]
fn toy_finger_pipeline_learns_and_corrects() {
    let toy = bundled::toy_finger();
    let data = generate_dataset(&toy, 20_000, 1, Exec::Parallel).unwrap();
    let cfg = TrainingConfig {
        epochs: 15,
        ..Default::default()
    };
    let (cpn, report) = train_cpn(&toy, &data, &cfg).unwrap();
    assert!(report.epochs.last().unwrap().val_metric > 0.9);
    let (ccn, report) = train_ccn(&toy, &data, &cpn, &cfg, Exec::Parallel).unwrap();
    let first = report.epochs.first().unwrap().val_metric;
    let last = report.epochs.last().unwrap().val_metric;
    assert!(last <= first.max(0.2), "val collision rate {first} -> {last}");

    let dir = tempfile::tempdir().unwrap();
    cpn.save(dir.path().join("cpn.json")).unwrap();
    ccn.save(dir.path().join("ccn.json")).unwrap();
    assert_eq!(Cpn::load(dir.path().join("cpn.json")).unwrap(), cpn);
    assert_eq!(Ccn::load(dir.path().join("ccn.json")).unwrap(), ccn);
    // kinds are checked on load
    assert!(matches!(Ccn::load(dir.path().join("cpn.json")), Err(Error::Network(_))));

    let guard = CollisionGuard::new(cpn.clone(), ccn.clone(), 0.5);
    for i in data.indices(Split::Test).into_iter().take(200) {
        let q = JointConfig(data.config(i).to_vec());
        let r = guard.apply(&q).unwrap();
        assert_eq!(r, correct(&q, &cpn, &ccn, 0.5).unwrap());
        if !r.was_gated {
            assert_eq!(r.corrected, q);
        }
        assert!(r.corrected.within_limits(&toy));
    }
}

#[test]
fn training_is_reproducible_under_a_seed() {
    let toy = bundled::toy_finger();
    let data = generate_dataset(&toy, 4_000, 2, Exec::Parallel).unwrap();
    let cfg = TrainingConfig {
        epochs: 3,
        seed: 8,
        ..Default::default()
    };
    let (a, ra) = train_cpn(&toy, &data, &cfg).unwrap();
    let (b, rb) = train_cpn(&toy, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn invalid_training_configs_are_rejected() {
    let toy = bundled::toy_finger();
    let data = generate_dataset(&toy, 1_000, 2, Exec::Parallel).unwrap();
    for cfg in [
        TrainingConfig {
            learning_rate: -1.0,
            ..Default::default()
        },
        TrainingConfig {
            batch_size: 0,
            ..Default::default()
        },
        TrainingConfig {
            alpha: 0.0,
            beta: 0.0,
            ..Default::default()
        },
    ] {
        assert!(matches!(train_cpn(&toy, &data, &cfg), Err(Error::TrainingConfig(_))));
    }
}
