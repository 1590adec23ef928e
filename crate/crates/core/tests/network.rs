mod common;

use common::{gradient_check, random_tiny_case};
use mvtrust::data::{make_synthetic_fixture, FixtureSpec, MultiViewDataset};
use mvtrust::loss::LossConfig;
use mvtrust::network::{train, MultiViewModel, Objective, Reduction, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut skipped = 0;
    for case in 0..60 {
        let (model, data, objective) = random_tiny_case(&mut rng);
        let r = gradient_check(&model, &data, &objective);
        assert!(r.max_rel_err <= 1e-4, "case {case}: relative error {}", r.max_rel_err);
        checked += r.checked;
        skipped += r.skipped;
    }
    assert!(checked > 20 * skipped.max(1), "checked {checked}, skipped {skipped}");
}

fn no_view_terms(epoch: usize) -> Objective {
    Objective {
        loss: LossConfig::new(10, epoch).unwrap(),
        per_view_terms: false,
        reduction: Reduction::Mean,
    }
}

#[test]
fn single_view_joint_term_is_the_view_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = make_synthetic_fixture(&FixtureSpec {
        num_classes: 3,
        view_dims: vec![4],
        class_counts: vec![4, 4, 4],
        separation: 2.0,
        seed: 1,
    })
    .unwrap();
    let model = MultiViewModel::init(&[4], 5, 3, rand::Rng::random(&mut rng)).unwrap();
    let batch: Vec<usize> = (0..data.len()).collect();
    let joint_only = no_view_terms(4);
    let both = Objective {
        per_view_terms: true,
        ..joint_only
    };
    let (l1, g1) = model.backward(&data, &batch, &joint_only).unwrap();
    let (l2, g2) = model.backward(&data, &batch, &both).unwrap();
    assert!((l2 - 2.0 * l1).abs() <= 1e-12 * l1.abs());
    for (a, b) in g1.per_view[0].iter().zip(&g2.per_view[0]) {
        assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs().max(1e-300));
    }
}

#[test]
fn duplicated_views_split_the_joint_gradient() {
    let one = make_synthetic_fixture(&FixtureSpec {
        num_classes: 2,
        view_dims: vec![3],
        class_counts: vec![5, 5],
        separation: 2.0,
        seed: 8,
    })
    .unwrap();
    let two = MultiViewDataset::new(
        "dup",
        2,
        vec![one.view(0).clone(), one.view(0).clone()],
        one.labels().to_vec(),
    )
    .unwrap();
    let single = MultiViewModel::init(&[3], 4, 2, 17).unwrap();
    let mut second = single.nets()[0].clone();
    second.view = 1;
    let double = MultiViewModel::new(vec![single.nets()[0].clone(), second], 2).unwrap();

    let batch: Vec<usize> = (0..one.len()).collect();
    let (l1, g1) = single.backward(&one, &batch, &no_view_terms(3)).unwrap();
    let (l2, g2) = double.backward(&two, &batch, &no_view_terms(3)).unwrap();
    assert!((l1 - l2).abs() <= 1e-12 * l1.abs());
    for v in 0..2 {
        for (a, b) in g1.per_view[0].iter().zip(&g2.per_view[v]) {
            assert!((b - 0.5 * a).abs() <= 1e-12 * a.abs().max(1e-300), "{b} vs {a}/2");
        }
    }
}

#[test]
fn decision_is_invariant_under_view_permutation() {
    let data = make_synthetic_fixture(&FixtureSpec {
        num_classes: 4,
        view_dims: vec![2, 3, 5],
        class_counts: vec![10; 4],
        separation: 1.0,
        seed: 3,
    })
    .unwrap();
    let model = MultiViewModel::init(&data.view_dims(), 6, 4, 12).unwrap();
    let order = [2usize, 0, 1];
    let permuted_nets = order.iter().map(|&v| model.nets()[v].clone()).collect();
    let permuted = MultiViewModel::new(permuted_nets, 4).unwrap();
    for i in 0..data.len() {
        let s = data.sample(i);
        let p = model.predict(&s).unwrap();
        let q = permuted.predict(&[s[2], s[0], s[1]]).unwrap();
        assert_eq!(p.decision, q.decision);
        assert!((p.joint.uncertainty() - q.joint.uncertainty()).abs() <= 1e-12);
    }
}

#[test]
fn training_lowers_per_view_uncertainty_on_training_points() {
    let data = make_synthetic_fixture(&FixtureSpec {
        num_classes: 3,
        view_dims: vec![3, 4],
        class_counts: vec![40; 3],
        separation: 5.0,
        seed: 30,
    })
    .unwrap();
    let mean_view_u = |m: &MultiViewModel| {
        let mut total = 0.0;
        for i in 0..data.len() {
            let p = m.predict(&data.sample(i)).unwrap();
            total += p.per_view.iter().map(|o| o.uncertainty()).sum::<f64>();
        }
        total / (data.len() * data.num_views()) as f64
    };
    let mut model = MultiViewModel::init(&data.view_dims(), 16, 3, 6).unwrap();
    let before = mean_view_u(&model);
    let cfg = TrainConfig {
        epochs: 100,
        ..TrainConfig::default()
    };
    train(&mut model, &data, &cfg, 6).unwrap();
    let after = mean_view_u(&model);
    assert!(after < before, "per-view uncertainty {before} -> {after}");
}

#[test]
fn separation_zero_trains_to_chance() {
    let spec = |sep: f64| FixtureSpec {
        num_classes: 4,
        view_dims: vec![3, 3],
        class_counts: vec![100; 4],
        separation: sep,
        seed: 4,
    };
    let accuracy = |sep: f64| {
        let all = make_synthetic_fixture(&spec(sep)).unwrap();
        let (train_set, test_set) = mvtrust::data::split(&all, 0.8, 1).unwrap();
        let mut model = MultiViewModel::init(&all.view_dims(), 16, 4, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        train(&mut model, &train_set, &cfg, 2).unwrap();
        let hits = (0..test_set.len())
            .filter(|&i| model.predict(&test_set.sample(i)).unwrap().decision == test_set.labels()[i])
            .count();
        hits as f64 / test_set.len() as f64
    };
    let chance = accuracy(0.0);
    assert!((chance - 0.25).abs() <= 0.1, "accuracy {chance} at separation 0");
    let easy = accuracy(6.0);
    assert!(easy >= 0.95, "accuracy {easy} at separation 6");
}
