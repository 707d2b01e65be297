use std::collections::HashSet;

use proptest::prelude::*;

use semisup_bench::dataset::{
    compose_labelled, load_csv, split_future, write_csv, ClassCounts, CostScenario, Label,
    LabeledDataset, PartitionSpec, Sample,
};
use semisup_bench::learner::{rows_of, Classifier, Forest, LearnerConfig, Prediction};
use semisup_bench::rng::Stream;
use semisup_bench::stats::{metrics, wilcoxon_ranksum, ConfusionCounts, Tails};
use semisup_bench::synth::{generate, SynthSpec};

fn population() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 1..30)
}

fn tied_population() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..6).prop_map(f64::from), 1..30)
}

fn dataset(max: usize) -> impl Strategy<Value = LabeledDataset> {
    (1usize..5, 2..max).prop_flat_map(|(dim, n)| {
        (
            prop::collection::vec(prop::collection::vec(-1e6f64..1e6, dim), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(rows, bits)| {
                let labels = bits
                    .into_iter()
                    .map(|b| if b { Label::Malicious } else { Label::Benign })
                    .collect();
                LabeledDataset::from_rows("prop", rows, labels).unwrap()
            })
    })
}

fn ids(d: &LabeledDataset) -> HashSet<usize> {
    d.ids().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ranksum_is_antisymmetric(a in tied_population(), b in tied_population()) {
        let ab = wilcoxon_ranksum(&a, &b, Tails::Two, 0.05).unwrap();
        let ba = wilcoxon_ranksum(&b, &a, Tails::Two, 0.05).unwrap();
        prop_assert!((ab.z + ba.z).abs() < 1e-12);
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p));
        prop_assert_eq!(ab.effect_size.signum() == ab.z.signum() || ab.z == 0.0, true);
    }

    #[test]
    fn large_shift_drives_p_to_zero(
        a in prop::collection::vec(0.0f64..1.0, 15..40),
        b in prop::collection::vec(0.0f64..1.0, 15..40),
    ) {
        let shifted: Vec<f64> = a.iter().map(|x| x + 1e6).collect();
        let t = wilcoxon_ranksum(&shifted, &b, Tails::Two, 0.05).unwrap();
        prop_assert!(t.p < 1e-4, "p = {}", t.p);
        prop_assert!(t.z > 0.0);
    }

    #[test]
    fn monotone_transform_keeps_z(a in population(), b in population()) {
        let f = |x: &f64| (x / 10.0).exp() * 3.0 - 7.0;
        let before = wilcoxon_ranksum(&a, &b, Tails::One, 0.05).unwrap();
        let after = wilcoxon_ranksum(
            &a.iter().map(f).collect::<Vec<_>>(),
            &b.iter().map(f).collect::<Vec<_>>(),
            Tails::One,
            0.05,
        )
        .unwrap();
        prop_assert_eq!(before.z, after.z);
    }

    #[test]
    fn reject_iff_p_at_most_alpha(a in population(), b in population(), alpha in 0.001f64..0.5) {
        let t = wilcoxon_ranksum(&a, &b, Tails::Two, alpha).unwrap();
        prop_assert_eq!(t.p <= alpha, t.verdict.to_string() == "reject_h0");
    }

    #[test]
    fn f1_is_harmonic_mean(tp in 0usize..500, fp in 0usize..500, tn in 0usize..500, fn_ in 0usize..500) {
        let m = metrics(&ConfusionCounts { tp, fp, tn, fn_ });
        if m.precision > 0.0 && m.recall > 0.0 {
            let h = 2.0 / (1.0 / m.precision + 1.0 / m.recall);
            prop_assert!((m.f1 - h).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1, 0.0);
        }
        for x in [m.f1, m.precision, m.recall] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn vote_margin_matches_definition(voters in 1u32..300, frac in 0.0f64..=1.0) {
        let malicious = ((voters as f64) * frac).round() as u32;
        let p = Prediction::from_votes(malicious, voters);
        prop_assert_eq!(p.p_malicious, malicious as f64 / voters as f64);
        prop_assert!((p.confidence - 2.0 * (p.p_malicious - 0.5).abs()).abs() < 1e-12);
        prop_assert_eq!(p.label == Label::Malicious, 2 * malicious > voters);
        if 2 * malicious == voters {
            prop_assert_eq!(p.confidence, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip(d in dataset(60)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.csv");
        write_csv(&d, &path, "label").unwrap();
        let back = load_csv(&path, "label").unwrap();
        prop_assert_eq!(back.samples(), d.samples());
        prop_assert_eq!(back.dim(), d.dim());
    }

    #[test]
    fn partition_invariants(
        seed in any::<u64>(),
        n_benign in 120usize..240,
        n_malicious in 120usize..240,
        cost_malicious in 1.0f64..6.0,
        budget in 12.0f64..80.0,
        frac in 0.0f64..1.0,
    ) {
        let d = generate(&SynthSpec { n_benign, n_malicious, dim: 2, separation: 1.0, seed }).unwrap();
        let scenario = CostScenario::new("p", 1.0, cost_malicious).unwrap();
        let min_benign = ((budget - cost_malicious) * frac).floor() as usize;
        let spec = PartitionSpec::new(budget, min_benign, scenario.clone(), seed);
        let draw = |s: u64| {
            let mut rng = Stream::new(s);
            let (f, pool) = split_future(&d, &spec, &mut rng).unwrap();
            let (l, u, ledger) = compose_labelled(&pool, &spec, &mut rng).unwrap();
            (f, pool, l, u, ledger)
        };
        let (future, pool, l, u, ledger) = draw(seed);
        let (f, p, l_ids, u_ids) = (ids(&future), ids(&pool), ids(&l), u.ids().collect::<HashSet<_>>());
        prop_assert!(f.is_disjoint(&p));
        prop_assert!(l_ids.is_subset(&p));
        prop_assert_eq!(&u_ids, &p.difference(&l_ids).copied().collect::<HashSet<_>>());
        let c = l.counts();
        prop_assert_eq!(c.benign, min_benign);
        let spent = c.benign as f64 + c.malicious as f64 * cost_malicious;
        prop_assert!(spent <= budget + 1e-9);
        prop_assert!(ledger.residual() >= -1e-9 && ledger.residual() < cost_malicious);
        prop_assert_eq!(ledger.verified, ClassCounts { benign: c.benign, malicious: c.malicious });
        let (future2, _, l2, _, _) = draw(seed);
        prop_assert_eq!(future2.samples(), future.samples());
        prop_assert_eq!(l2.samples(), l.samples());
    }

    #[test]
    fn forest_structure_respects_config(d in dataset(80), min_leaf in 1usize..5, seed in any::<u64>()) {
        prop_assume!(d.counts().benign > 0 && d.counts().malicious > 0);
        let cfg = LearnerConfig { n_trees: 5, min_leaf, bootstrap: false, seed, ..LearnerConfig::default() };
        let f = Forest::fit(&rows_of(&d), &cfg).unwrap();
        for t in f.trees() {
            prop_assert!(t.splits().iter().all(|&(feature, _)| feature < d.dim()));
            prop_assert!(t.leaf_sizes().iter().all(|&s| s as usize >= min_leaf.min(d.len())));
        }
        let view: Vec<&[f64]> = d.samples().iter().map(|s| s.features.as_slice()).collect();
        for p in f.predict(&view).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p.confidence));
            prop_assert_eq!((p.p_malicious * 5.0).round() / 5.0, p.p_malicious);
        }
    }

    #[test]
    fn forest_ignores_training_order(d in dataset(60), seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let cfg = LearnerConfig { n_trees: 7, bootstrap: false, seed, ..LearnerConfig::default() };
        let mut shuffled: Vec<Sample> = d.samples().to_vec();
        Stream::new(shuffle_seed).shuffle(&mut shuffled);
        let e = LabeledDataset::new("shuffled", d.dim(), shuffled).unwrap();
        let a = Forest::fit(&rows_of(&d), &cfg).unwrap();
        let b = Forest::fit(&rows_of(&e), &cfg).unwrap();
        let probes: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..d.dim()).map(|j| ((i * 7 + j * 3) as f64 - 20.0) * 5e4).collect())
            .collect();
        let view: Vec<&[f64]> = probes.iter().map(Vec::as_slice).chain(d.samples().iter().map(|s| s.features.as_slice())).collect();
        prop_assert_eq!(a.predict(&view).unwrap(), b.predict(&view).unwrap());
    }

    #[test]
    fn monotone_one_dimensional_split(
        benign in prop::collection::vec(-100.0f64..0.0, 1..30),
        malicious in prop::collection::vec(1.0f64..100.0, 1..30),
        probe in 0.0f64..200.0,
    ) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for &x in &benign {
            rows.push(vec![x]);
            labels.push(Label::Benign);
        }
        for &x in &malicious {
            rows.push(vec![x]);
            labels.push(Label::Malicious);
        }
        let d = LabeledDataset::from_rows("mono", rows, labels).unwrap();
        let cfg = LearnerConfig { n_trees: 1, bootstrap: false, ..LearnerConfig::default() };
        let f = Forest::fit(&rows_of(&d), &cfg).unwrap();
        let hi = benign.iter().copied().fold(f64::MIN, f64::max);
        let lo = malicious.iter().copied().fold(f64::MAX, f64::min);
        let mid = (hi + lo) / 2.0;
        let x = mid + probe.max(1e-9);
        prop_assert_eq!(f.predict_one(&[x]).label, Label::Malicious);
        prop_assert_eq!(f.predict_one(&[hi]).label, Label::Benign);
    }

    #[test]
    fn synthetic_round_trips(n_benign in 1usize..40, n_malicious in 1usize..40, dim in 1usize..5, sep in 0.0f64..10.0, seed in any::<u64>()) {
        let d = generate(&SynthSpec { n_benign, n_malicious, dim, separation: sep, seed }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_csv(&d, &path, "label").unwrap();
        let back = load_csv(&path, "label").unwrap();
        prop_assert_eq!(back.samples(), d.samples());
    }
}

#[test]
fn budget_beyond_pool_is_pool_exhausted() {
    let d = generate(&SynthSpec {
        n_benign: 60,
        n_malicious: 60,
        dim: 2,
        separation: 1.0,
        seed: 0,
    })
    .unwrap();
    let scenario = CostScenario::new("p", 1.0, 1.0).unwrap();
    let spec = PartitionSpec::new(60.09316650992024, 0, scenario, 0);
    let mut rng = Stream::new(0);
    let (_, pool) = split_future(&d, &spec, &mut rng).unwrap();
    let err = compose_labelled(&pool, &spec, &mut rng).unwrap_err();
    assert!(
        err.to_string().contains("malicious") || format!("{err:?}").contains("PoolExhausted"),
        "{err:?}"
    );
}
