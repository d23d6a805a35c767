mod common;

use tdal::acquisition::{
    bald, confidence_score, entropy, epig, score_pool, AcquisitionConfig, EpigTargets, Strategy,
};
use tdal::heads::{ForestConfig, HeadPosterior, HeadSpec, MemberProbs};
use tdal::numerics::{Matrix, Rng};
use tdal::representations::{fit_pca, EncoderModel};

use common::{enumerate_epig, random_block};
use proptest::prelude::{any, prop_assert, proptest};

fn tiny_pool() -> (Matrix, Vec<usize>, Matrix) {
    let mut rng = Rng::new(9);
    let mut x = Matrix::zeros(60, 3);
    let mut y = Vec::new();
    for r in 0..60 {
        let c = r % 3;
        for j in 0..3 {
            x[(r, j)] = if j == c { 2.0 } else { 0.0 } + rng.normal();
        }
        y.push(c);
    }
    let targets = x.select_rows(&(40..50).collect::<Vec<_>>());
    (x, y, targets)
}

#[test]
fn score_pool_matches_pointwise_scores() {
    let (x, y, targets) = tiny_pool();
    let labeled: Vec<usize> = (0..20).collect();
    let encoder = fit_pca(&x, 2).unwrap();
    let z = encoder.encode_head(&x.select_rows(&labeled)).unwrap();
    let head = HeadPosterior::fit(
        &HeadSpec::RandomForest(ForestConfig {
            n_trees: 12,
            ..Default::default()
        }),
        &z,
        &y[..20],
        3,
    )
    .unwrap();
    let candidates = x.select_rows(&(20..40).collect::<Vec<_>>());
    let cand_members = head
        .predict_members(&encoder.encode_head(&candidates).unwrap())
        .unwrap();
    let target_members = head
        .predict_members(&encoder.encode_head(&targets).unwrap())
        .unwrap();
    let target_blocks: Vec<&[f64]> = (0..targets.rows())
        .map(|i| target_members.input(i))
        .collect();
    for strategy in [Strategy::Epig, Strategy::Bald, Strategy::Confidence] {
        let cfg = AcquisitionConfig {
            strategy,
            realisations: 12,
            target_samples: 10,
            ..Default::default()
        };
        let scores = score_pool(&head, &encoder, &candidates, &targets, &cfg, 1).unwrap();
        assert_eq!(scores.len(), 20);
        for i in 0..20 {
            let block = cand_members.input(i);
            let direct = match strategy {
                Strategy::Epig => epig(block, &target_blocks, 12, 3).unwrap(),
                Strategy::Bald => bald(block, 12, 3).unwrap(),
                _ => confidence_score(block, 12, 3).unwrap(),
            };
            assert_eq!(scores.scores[i], direct, "{strategy:?} candidate {i}");
        }
    }
}

#[test]
fn random_scores_are_reproducible() {
    let (x, _, targets) = tiny_pool();
    let head = HeadPosterior::fit(
        &HeadSpec::RandomForest(ForestConfig {
            n_trees: 2,
            ..Default::default()
        }),
        &x,
        &[0; 60],
        3,
    )
    .unwrap();
    let cfg = AcquisitionConfig {
        strategy: Strategy::Random,
        seed: 4,
        ..Default::default()
    };
    let enc = EncoderModel::identity(3);
    let a = score_pool(&head, &enc, &x, &targets, &cfg, 3).unwrap();
    let b = score_pool(&head, &enc, &x, &targets, &cfg, 3).unwrap();
    assert_eq!(a, b);
    assert!(a.scores.iter().all(|&s| (0.0..1.0).contains(&s)));
    assert_ne!(a, score_pool(&head, &enc, &x, &targets, &cfg, 4).unwrap());
}

#[test]
fn identical_targets_equal_single_target_epig() {
    let mut rng = Rng::new(12);
    let p = random_block(&mut rng, 6, 3);
    let q = random_block(&mut rng, 6, 3);
    let repeated = MemberProbs::new(5, 6, 3, q.repeat(5)).unwrap();
    let packed = EpigTargets::from_members(&repeated).unwrap();
    let single = epig(&p, &[&q], 6, 3).unwrap();
    assert!((packed.score(&p).unwrap() - single).abs() <= 1e-14);
}

#[test]
fn two_by_two_example_against_enumeration() {
    let p = [0.9, 0.1, 0.2, 0.8];
    let q = [0.7, 0.3, 0.4, 0.6];
    let got = epig(&p, &[&q], 2, 2).unwrap();
    assert!((got - enumerate_epig(&p, &[q.to_vec()], 2, 2)).abs() <= 1e-15);
    assert!(got > 0.0);
}

proptest! {
    #[test]
    fn mutual_informations_are_bounded(seed in any::<u64>(), k in 1usize..8, c in 2usize..6, m in 1usize..6) {
        let mut rng = Rng::new(seed);
        let p = random_block(&mut rng, k, c);
        let qs: Vec<Vec<f64>> = (0..m).map(|_| random_block(&mut rng, k, c)).collect();
        let refs: Vec<&[f64]> = qs.iter().map(Vec::as_slice).collect();
        let mut mean = vec![0.0; c];
        for row in p.chunks(c) {
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v / k as f64;
            }
        }
        let h = entropy(&mean).unwrap();
        let e = epig(&p, &refs, k, c).unwrap();
        let b = bald(&p, k, c).unwrap();
        prop_assert!(e >= -1e-12 && e <= h + 1e-9);
        prop_assert!(b >= -1e-12 && b <= h + 1e-9);
        // the label carries no more about any target than about the parameters
        prop_assert!(e <= b + 1e-9);
    }
}
