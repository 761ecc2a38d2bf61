//! Independent brute-force oracles for k-NN and fingerprint selection, and
//! contract checks of the cGAN.

use fpgan_core::augmentation::{
    accept_within, augment_radiomap, augmented_csv_bytes, build_cgan, check_soundness, discriminator_step, partitions,
    read_coords, sample_latent, select_fingerprints, train_cgan, train_partition, AugmentedSet, Conditional, GanConfig,
    Method, SelectionConfig, SelectionStats,
};
use fpgan_core::evaluation::knn_predict;
use fpgan_core::positioning::{train_positioning, PositioningConfig};
use fpgan_core::radiomap::{to_powed, DatasetSchema, LabelMapping, LabelSet, RadioMap, Representation, DEFAULT_BETA};
use fpgan_core::synthgen::{generate, SynthConfig};
use fpgan_core::CoreError;
use fpgan_nn::{seeded_rng, AdamState, Loss, Tensor};
use rand::Rng;

fn powed_map(rss: Vec<f64>, n: usize, labels: LabelSet, floors: usize, buildings: usize) -> RadioMap {
    let ids = (0..n).map(|i| format!("AP{i:03}")).collect();
    let mapping = LabelMapping { floors: (0..floors as i64).collect(), buildings: (0..buildings as i64).collect() };
    RadioMap::new(rss, ids, labels, Representation::Powed, 100.0, mapping).unwrap()
}

/// Random instance on a coarse grid so exact distance ties occur.
fn random_map(rng: &mut impl Rng, m: usize, n: usize) -> RadioMap {
    let rss = (0..m * n).map(|_| rng.random_range(0..5) as f64 * 0.25).collect();
    let mut l = LabelSet::default();
    for _ in 0..m {
        l.push([rng.random_range(0..20) as f64, rng.random_range(0..20) as f64, rng.random_range(0..3) as f64 * 4.0], rng.random_range(0..3), rng.random_range(0..2));
    }
    powed_map(rss, n, l, 3, 2)
}

#[test]
fn one_nn_equals_exhaustive_search() {
    let mut rng = seeded_rng(2024);
    for instance in 0..100 {
        let n = rng.random_range(1..6);
        let (mt, ms) = (rng.random_range(1..30), rng.random_range(1..10));
        let train = random_map(&mut rng, mt, n);
        let test = random_map(&mut rng, ms, n);
        let pred = knn_predict(&train, &test, 1).unwrap();
        for t in 0..test.m() {
            // Exhaustive: all squared distances, first minimum wins.
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for i in 0..train.m() {
                let d: f64 = (0..n).map(|k| (train.row(i)[k] - test.row(t)[k]).powi(2)).sum();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            let l = train.labels();
            let p = &pred[t];
            assert_eq!(p.position(), l.position(best), "instance {instance} row {t}");
            assert_eq!((p.floor, p.building), (l.floor[best], l.building[best]), "instance {instance} row {t}");
        }
    }
}

#[test]
fn k_nn_centroid_and_vote_match_a_full_sort() {
    let mut rng = seeded_rng(77);
    for _ in 0..50 {
        let n = rng.random_range(1..4);
        let mt = rng.random_range(5..25);
        let train = random_map(&mut rng, mt, n);
        let test = random_map(&mut rng, 4, n);
        let k = rng.random_range(1..=5);
        let pred = knn_predict(&train, &test, k).unwrap();
        for t in 0..test.m() {
            let mut order: Vec<(f64, usize)> = (0..train.m())
                .map(|i| ((0..n).map(|c| (train.row(i)[c] - test.row(t)[c]).powi(2)).sum(), i))
                .collect();
            order.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let nn: Vec<usize> = order[..k].iter().map(|o| o.1).collect();
            let l = train.labels();
            let cx = nn.iter().map(|&i| l.x[i]).sum::<f64>() / k as f64;
            assert_eq!(pred[t].x, cx);
            let mut counts = [0usize; 3];
            for &i in &nn {
                counts[l.floor[i]] += 1;
            }
            let top = *counts.iter().max().unwrap();
            let want = nn.iter().map(|&i| l.floor[i]).find(|&f| counts[f] == top).unwrap();
            assert_eq!(pred[t].floor, want);
            assert_eq!(pred[t].floor_probs.iter().sum::<f64>(), 1.0);
        }
    }
}

#[test]
fn knn_rejects_bad_inputs() {
    let mut rng = seeded_rng(1);
    let a = random_map(&mut rng, 3, 2);
    let b = random_map(&mut rng, 3, 3);
    assert!(knn_predict(&a, &b, 1).is_err());
    assert!(matches!(knn_predict(&a, &a, 0), Err(CoreError::Domain(_))));
    assert!(matches!(knn_predict(&a, &a, 4), Err(CoreError::Domain(_))));
}

fn brute_force_accepts(c: [f64; 3], points: &[[f64; 3]], dist: f64) -> bool {
    // Integer coordinates: squared distances are exact.
    points.iter().any(|p| (0..3).map(|k| (c[k] - p[k]).powi(2)).sum::<f64>() <= dist * dist)
}

#[test]
fn acceptance_set_equals_brute_force() {
    let mut rng = seeded_rng(99);
    for instance in 0..100 {
        let grid = |rng: &mut fpgan_nn::SeedRng| [rng.random_range(0..12) as f64, rng.random_range(0..12) as f64, rng.random_range(0..3) as f64];
        let points: Vec<[f64; 3]> = (0..rng.random_range(1..20)).map(|_| grid(&mut rng)).collect();
        let candidates: Vec<[f64; 3]> = (0..rng.random_range(1..=50)).map(|_| grid(&mut rng)).collect();
        let dist = rng.random_range(1..6) as f64;
        let got = accept_within(&candidates, &points, dist);
        for (i, c) in candidates.iter().enumerate() {
            assert_eq!(got[i].is_some(), brute_force_accepts(*c, &points, dist), "instance {instance} candidate {i}");
            if let Some(pi) = got[i] {
                let d = |p: [f64; 3]| (0..3).map(|k| (c[k] - p[k]).powi(2)).sum::<f64>();
                let min = points.iter().map(|&p| d(p)).fold(f64::INFINITY, f64::min);
                assert_eq!(d(points[pi]), min);
                assert!(points[..pi].iter().all(|&p| d(p) > min), "lowest index wins ties");
            }
        }
    }
}

#[test]
fn hand_placed_selection_example() {
    let points = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 4.0]];
    let candidates = [[1.0, 1.0, 0.0], [2.0, 0.0, 0.0], [2.1, 0.0, 0.0], [10.0, 1.9, 0.0], [0.0, 10.0, 1.5]];
    let got = accept_within(&candidates, &points, 2.0);
    assert_eq!(got, vec![Some(0), Some(0), None, Some(1), None]);
}

#[test]
fn coinciding_candidate_is_accepted_at_every_distance() {
    let points = [[3.0, 4.0, 0.0], [8.0, 1.0, 4.0]];
    for dist in [1.0, 2.0, 3.0, 4.0, 5.0] {
        assert_eq!(accept_within(&[[8.0, 1.0, 4.0]], &points, dist), vec![Some(1)]);
    }
}

#[test]
fn latent_statistics() {
    let (z, labels) = sample_latent(1000, 100, &[0, 2, 3], 5).unwrap();
    let d = z.data();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((std - 1.0).abs() < 0.02, "std {std}");
    assert!(labels.iter().all(|l| [0, 2, 3].contains(l)));
    for c in [0, 2, 3] {
        assert!(labels.contains(&c));
    }
    let (z2, l2) = sample_latent(1000, 100, &[0, 2, 3], 5).unwrap();
    assert_eq!((z.data(), &labels), (z2.data(), &l2));
    assert!(sample_latent(0, 4, &[0], 1).is_err());
}

#[test]
fn cgan_dimension_contract() {
    for (n, classes) in [(4, 1), (5, 2), (7, 3), (16, 3), (520, 5)] {
        let g = build_cgan(n, classes, 3).unwrap();
        let labels: Vec<usize> = (0..6).map(|i| i % classes).collect();
        let (z, _) = sample_latent(6, n, &[0], 1).unwrap();
        let x = g.generate(&z, &labels).unwrap();
        assert_eq!(x.shape(), [6, n]);
        assert!(x.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let p = g.discriminate(&x, &labels).unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
    }
    assert!(matches!(build_cgan(3, 2, 0), Err(CoreError::Domain(_))));
}

#[test]
fn discriminator_step_descends_on_its_batch() {
    let n = 8;
    let mut cgan = build_cgan(n, 2, 11).unwrap();
    let mut rng = seeded_rng(4);
    let x = Tensor::new(vec![6, n], (0..6 * n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let labels = vec![0, 1, 0, 1, 1, 0];
    let mask = seeded_rng(42);
    let loss_with_mask = |d: &fpgan_nn::Network| {
        let mut r = mask.clone();
        let lab = Tensor::new(vec![6, 1], labels.iter().map(|&c| c as f64).collect()).unwrap();
        let y = d.forward(&[&x, &lab], Some(&mut r)).unwrap();
        Loss::BinaryCe.value(&y, &Tensor::filled(vec![6, 1], 1.0)).unwrap()
    };
    let before = loss_with_mask(&cgan.discriminator);
    let mut adam = AdamState::new(cgan.discriminator.params());
    let reported = discriminator_step(&mut cgan, &mut adam, &x, &labels, 1.0, 1e-5, &mut mask.clone(), 1).unwrap();
    let after = loss_with_mask(&cgan.discriminator);
    assert_eq!(reported, before);
    assert!(after < before, "{after} >= {before}");
}

fn small_fixture() -> (RadioMap, RadioMap) {
    let cfg = SynthConfig { n_aps: 8, train_points: 160, test_points: 60, ..Default::default() };
    let (train, test, _) = generate(&cfg).unwrap();
    let p = to_powed(&train, DEFAULT_BETA).unwrap();
    let min = p.powed().unwrap().min_dbm;
    (p, fpgan_core::radiomap::to_powed_with_min(&test, DEFAULT_BETA, min).unwrap())
}

#[test]
fn partition_counts() {
    let (train, _) = small_fixture();
    assert_eq!(partitions(&train, Method::M3).unwrap().len(), 1);
    let by_floor = partitions(&train, Method::M2).unwrap();
    assert_eq!(by_floor.len(), 3);
    assert_eq!(by_floor.iter().map(|p| p.rows.len()).sum::<usize>(), train.m());
    assert!(by_floor.iter().all(|p| p.conditional_classes == 1 && p.present_classes == vec![0]));
    let cfg = SynthConfig { n_aps: 8, buildings: 2, train_points: 100, test_points: 10, ..Default::default() };
    let two = to_powed(&generate(&cfg).unwrap().0, DEFAULT_BETA).unwrap();
    let by_building = partitions(&two, Method::M1).unwrap();
    assert_eq!(by_building.len(), 2);
    assert!(by_building.iter().all(|p| p.conditional_classes == 3));
}

#[test]
fn discriminator_accuracy_after_one_epoch_is_strictly_between_0_and_1() {
    let (train, test) = small_fixture();
    let part = partitions(&train, Method::M3).unwrap().remove(0);
    let tc = train_partition(&train, &part, Conditional::Floor, &GanConfig { epochs: 1, ..Default::default() }, 8).unwrap();
    assert!(tc.history.iter().all(|e| e.d_loss_real.is_finite() && e.d_loss_fake.is_finite() && e.g_loss.is_finite()));
    let real = Tensor::new(vec![test.m(), test.n()], test.rss().to_vec()).unwrap();
    let real_p = tc.cgan.discriminate(&real, &test.labels().floor).unwrap();
    let (z, fake_labels) = sample_latent(test.m(), test.n(), &part.present_classes, 123).unwrap();
    let fake = tc.cgan.generate(&z, &fake_labels).unwrap();
    let fake_p = tc.cgan.discriminate(&fake, &fake_labels).unwrap();
    let correct = real_p.iter().filter(|&&p| p > 0.5).count() + fake_p.iter().filter(|&&p| p <= 0.5).count();
    let acc = correct as f64 / (2 * test.m()) as f64;
    assert!(acc > 0.0 && acc < 1.0, "accuracy {acc}");
}

#[test]
fn small_batch_partition_trains_with_one_batch() {
    let (train, _) = small_fixture();
    let rows: Vec<usize> = (0..10).collect();
    let part = fpgan_core::augmentation::Partition { name: "tiny".into(), rows, conditional_classes: 3, present_classes: vec![0, 1, 2] };
    let tc = train_partition(&train, &part, Conditional::Floor, &GanConfig { epochs: 2, ..Default::default() }, 1).unwrap();
    assert_eq!(tc.history.len(), 2);
}

fn quick_positioning() -> PositioningConfig {
    let mut cfg = PositioningConfig::default();
    for t in [&mut cfg.position, &mut cfg.floor, &mut cfg.building] {
        t.epochs = 2;
        t.patience = None;
    }
    cfg
}

#[test]
fn selection_is_sound_deterministic_and_ordered() {
    let (train, _) = small_fixture();
    let (model, _) = train_positioning(&train, &quick_positioning(), 3).unwrap();
    let gans = train_cgan(&train, Method::M2, &GanConfig { epochs: 1, ..Default::default() }, 5).unwrap();
    let cfg = SelectionConfig { candidates_per_iteration: 20, iterations: 2, distances: vec![2.0, 6.0, 30.0], ..Default::default() };
    let a = select_fingerprints(&gans, &model, &train, &cfg, 9).unwrap();
    let b = select_fingerprints(&gans, &model, &train, &cfg, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.stats.candidates, 3 * 3 * 2 * 20);
    assert!(!a.is_empty());
    check_soundness(&a, &train).unwrap();
    // Same-partition comparison: every seed row shares the floor of its cGAN.
    for i in 0..a.len() {
        let part = &gans[a.cgan_index[i]].partition;
        assert!(part.rows.contains(&a.seed_index[i]));
    }
    let keys: Vec<(usize, u64)> = (0..a.len()).map(|i| (a.cgan_index[i], a.accepted_distance[i].to_bits())).collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]), "canonical (cgan, distance) order");
    assert_eq!(a.stats.per_threshold.iter().map(|t| t.accepted).sum::<usize>(), a.stats.accepted);
    assert_eq!(a.stats.disagreements, a.disagreement.iter().filter(|d| **d).count());

    let whole = select_fingerprints(&gans, &model, &train, &SelectionConfig { whole_dataset: true, ..cfg.clone() }, 9).unwrap();
    check_soundness(&whole, &train).unwrap();
    assert!(whole.len() >= a.len());

    // Augment, export and read back.
    let aug = augment_radiomap(&train, &a).unwrap();
    assert_eq!(aug.m(), train.m() + a.len());
    assert_eq!(aug.synthetic_rows(), a.len());
    let bytes = augmented_csv_bytes(&aug, &a).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with("LONGITUDE,LATITUDE,ALTITUDE,FLOOR,BUILDINGID,SOURCE,CONDLABEL,SEEDIDX,DIST"));
    assert_eq!(text.lines().filter(|l| l.contains(",synthetic,")).count(), a.len());
    let schema = DatasetSchema { representation: Representation::Powed, ..Default::default() };
    let back = fpgan_core::radiomap::read_radiomap(bytes.as_slice(), &schema, None).unwrap();
    assert_eq!(back.rss(), aug.rss());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("augmented.csv");
    std::fs::write(&path, &bytes).unwrap();
    let coords = read_coords(&path, None, None).unwrap();
    assert_eq!(coords.len(), aug.m());
    assert_eq!(coords.iter().filter(|c| c.source == "synthetic").count(), a.len());
    let floor0 = read_coords(&path, Some(0), Some(0)).unwrap();
    assert!(floor0.iter().all(|c| c.floor == 0 && c.building == 0));
    assert_eq!(floor0.len(), aug.labels().floor.iter().filter(|&&f| f == 0).count());
}

fn empty_set(n: usize) -> AugmentedSet {
    AugmentedSet {
        n,
        rss: vec![],
        labels: LabelSet::default(),
        conditional: Conditional::Floor,
        conditional_label: vec![],
        accepted_distance: vec![],
        seed_index: vec![],
        cgan_index: vec![],
        disagreement: vec![],
        stats: SelectionStats::default(),
    }
}

#[test]
fn augmenting_with_nothing_is_identity_and_raw_maps_are_rejected() {
    let (train, _) = small_fixture();
    assert_eq!(augment_radiomap(&train, &empty_set(train.n())).unwrap(), train);
    let raw = generate(&SynthConfig { n_aps: 8, train_points: 10, test_points: 1, ..Default::default() }).unwrap().0;
    assert!(matches!(augment_radiomap(&raw, &empty_set(8)), Err(CoreError::InvalidState(_))));
}

#[test]
fn soundness_violation_is_reported() {
    let (train, _) = small_fixture();
    let mut s = empty_set(train.n());
    let p = train.labels().position(0);
    s.rss = train.row(0).to_vec();
    s.labels.push([p[0] + 3.0, p[1], p[2]], 0, 0);
    s.conditional_label.push(0);
    s.accepted_distance.push(2.0);
    s.seed_index.push(0);
    s.cgan_index.push(0);
    s.disagreement.push(false);
    assert!(check_soundness(&s, &train).is_err());
    s.accepted_distance[0] = 3.0;
    check_soundness(&s, &train).unwrap();
}

#[test]
fn selection_config_validation() {
    assert!(SelectionConfig { distances: vec![2.0, 1.0], ..Default::default() }.validate().is_err());
    assert!(SelectionConfig { distances: vec![], ..Default::default() }.validate().is_err());
    assert!(SelectionConfig { distances: vec![0.0], ..Default::default() }.validate().is_err());
    assert!(SelectionConfig { iterations: 0, ..Default::default() }.validate().is_err());
    SelectionConfig::default().validate().unwrap();
}
