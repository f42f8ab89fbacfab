use cpens_core::data::{generate_synthetic, load_csv_with_schema, read_csv, write_csv, CsvOptions, SyntheticConfig};
use cpens_core::{BaseMode, ConformalEnsemble, Dataset, EnsembleConfig, Outcome};
use proptest::prelude::*;

fn cohort(n: usize, d: usize, noise: f64, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n_examples: n,
        n_features: d,
        class_balance: 0.56,
        separation: 0.6,
        noise_rate: noise,
        seed,
    })
    .unwrap()
}

#[test]
fn csv_train_save_load_predict() {
    let dir = tempfile::tempdir().unwrap();
    let train_path = dir.path().join("train.csv");
    let original = cohort(60, 6, 0.1, 1);
    write_csv(&original, std::fs::File::create(&train_path).unwrap(), "label").unwrap();

    let train = cpens_core::data::load_csv(&train_path, &CsvOptions::new("label")).unwrap();
    assert_eq!(train.classes(), original.classes());
    assert_eq!(train.class_counts(), original.class_counts());

    let cfg = EnsembleConfig { n_estimators: 6, credibility_threshold: Some(0.7), seed: 3, ..Default::default() };
    let ens = ConformalEnsemble::build(&train, &cfg).unwrap();
    let model_path = dir.path().join("model.txt");
    std::fs::write(&model_path, ens.to_text()).unwrap();
    let loaded = ConformalEnsemble::from_text(&std::fs::read_to_string(&model_path).unwrap()).unwrap();

    // new examples without labels, columns shuffled and an extra column
    let fresh = cohort(15, 6, 0.1, 2);
    let mut text = Vec::new();
    write_csv(&fresh, &mut text, "label").unwrap();
    let text = String::from_utf8(text).unwrap();
    let reordered: String = text
        .lines()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells.pop();
            cells.reverse();
            let extra = if l.starts_with("id") { "site" } else { "A" };
            format!("{},{extra}\n", cells.join(","))
        })
        .collect();
    let test_path = dir.path().join("new.csv");
    std::fs::write(&test_path, reordered).unwrap();
    let tests = load_csv_with_schema(&test_path, loaded.schema(), loaded.classes(), None).unwrap();
    assert_eq!(tests.len(), 15);

    let a = ens.predict_batch(fresh.examples()).unwrap();
    let b = loaded.predict_batch(tests.examples()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn predictions_do_not_depend_on_thread_count() {
    let train = cohort(80, 10, 0.15, 4);
    let tests = cohort(20, 10, 0.15, 5);
    let cfg = EnsembleConfig { n_estimators: 12, credibility_threshold: Some(0.8), seed: 9, ..Default::default() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let ens = ConformalEnsemble::build(&train, &cfg).unwrap();
                (ens.to_text(), ens.predict_batch(tests.examples()).unwrap())
            })
    };
    let one = run(1);
    assert_eq!(one, run(3));
}

#[test]
fn csv_with_categorical_and_missing_values() {
    let text = "id,age,sex,apoe,label\n\
                1,71,F,e4,cMCI\n2,65,M,,sMCI\n3,,F,e3,sMCI\n4,80,M,e4,cMCI\n5,59,F,e3,sMCI\n6,77,M,e4,cMCI\n";
    let data = read_csv(text.as_bytes(), &CsvOptions::new("label")).unwrap();
    let cfg = EnsembleConfig { n_estimators: 4, feature_fraction: 1.0, seed: 1, ..Default::default() };
    let ens = ConformalEnsemble::build(&data, &cfg).unwrap();
    for v in ens.predict_batch(data.examples()).unwrap() {
        assert_eq!(v.trustworthy_fraction, 1.0);
        assert!(matches!(v.outcome, Outcome::Predicted(_)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn verdict_invariants(
        seed in 0u64..1000,
        n_estimators in 1usize..8,
        ff in 0.2f64..1.0,
        threshold in prop::option::of(0.0f64..0.99),
        mode in prop::sample::select(vec![BaseMode::ConformalCredibility, BaseMode::StandardPosterior, BaseMode::StandardPlain]),
    ) {
        let train = cohort(30, 5, 0.2, seed);
        let tests = cohort(6, 5, 0.2, seed + 1);
        let cfg = EnsembleConfig { n_estimators, feature_fraction: ff, credibility_threshold: threshold, base_mode: mode, seed, ..Default::default() };
        let ens = ConformalEnsemble::build(&train, &cfg).unwrap();
        let k = cfg.subset_size(5);
        for p in ens.patches() {
            prop_assert_eq!(p.features.len(), k);
        }
        for v in ens.predict_batch(tests.examples()).unwrap() {
            let trusted: usize = v.vote_counts.iter().sum();
            prop_assert!((v.trustworthy_fraction - trusted as f64 / n_estimators as f64).abs() < 1e-12);
            prop_assert_eq!(trusted == 0, v.outcome == Outcome::Unpredictable);
            if let Outcome::Predicted(l) = v.outcome {
                prop_assert_eq!(v.vote_counts[l.0], *v.vote_counts.iter().max().unwrap());
                let cred = v.mean_credibility.unwrap();
                prop_assert!((0.0..=1.0).contains(&cred));
                if let Some(t) = threshold {
                    if mode != BaseMode::StandardPlain {
                        prop_assert!(cred > t);
                    }
                }
            }
            for name in &v.frequent_features {
                prop_assert!(train.schema().index_of(name).is_some());
            }
        }
    }
}
