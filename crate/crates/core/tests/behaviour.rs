use confrank::dataset::split;
use confrank::harness::{run_cell, run_on_tables, ExperimentConfig};
use confrank::metrics::mmre;
use confrank::samplers::replay_score;
use confrank::stats::{bootstrap_different, BootstrapConfig};
use confrank::synthgen::{generate, generate_system, Interactions, ModelSpec, SynthSpec};
use confrank::{Approach, RegressionTree, SamplerParams, SplitFractions, TreeParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn dense_spec(seed: u64, noise: f64) -> SynthSpec {
    SynthSpec {
        name: format!("dense-{seed}"),
        n_binary: 8,
        model: ModelSpec::Random {
            interactions: Interactions::Dense,
            hard_terms: 4,
            interaction_scale: 0.5,
            hard_scale: 1.0,
            main_decay: 1.0,
        },
        noise,
        offset: 200.0,
        seed,
        ..SynthSpec::default()
    }
}

#[test]
fn synthetic_optimum_matches_enumeration() {
    for seed in 0..5 {
        let sys = generate_system(&dense_spec(seed, 0.0)).unwrap();
        assert_eq!(sys.table.len(), 256);
        let m = &sys.model;
        let mut best = (f64::INFINITY, 0u32);
        for bits in 0..256u32 {
            let x: Vec<f64> = (0..8).map(|f| f64::from((bits >> (7 - f)) & 1)).collect();
            let mut v = sys.offset;
            for (i, w) in m.linear.iter().enumerate() {
                v += w * x[i];
            }
            for &(i, j, w) in &m.pairwise {
                v += w * x[i] * x[j];
            }
            for &(i, j, k, w) in &m.hard {
                v += w * x[i] * x[j] * x[k];
            }
            let row = sys
                .table
                .rows()
                .iter()
                .position(|r| r.values() == x.as_slice())
                .unwrap();
            assert!((sys.table.measure(row) - v).abs() <= 1e-9 * v.abs().max(1.0));
            if v < best.0 {
                best = (v, bits);
            }
        }
        let table_min = (0..sys.table.len())
            .min_by(|&a, &b| sys.table.measure(a).total_cmp(&sys.table.measure(b)))
            .unwrap();
        let expected: Vec<f64> = (0..8).map(|f| f64::from((best.1 >> (7 - f)) & 1)).collect();
        assert_eq!(sys.table.row(table_min).values(), expected.as_slice());
    }
}

#[test]
fn bootstrap_error_rates() {
    let cfg = BootstrapConfig::default();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut false_positives = 0;
    let mut detected = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut all: Vec<f64> = (0..40).map(|_| normal.sample(&mut rng)).collect();
        let ys = all.split_off(20);
        let xs = all;
        let shifted: Vec<f64> = ys.iter().map(|y| y + 2.0).collect();
        if bootstrap_different(&xs, &ys, cfg, seed).unwrap() {
            false_positives += 1;
        }
        if bootstrap_different(&xs, &shifted, cfg, seed).unwrap() {
            detected += 1;
        }
    }
    assert!(false_positives <= 5, "{false_positives} false positives in 100");
    assert!(detected >= 95, "detected {detected} of 100 shifts");
}

#[test]
fn traces_replay_from_measured_prefixes() {
    let table = generate(&SynthSpec::hard(7, 3)).unwrap();
    let params = SamplerParams::default();
    for approach in Approach::ALL {
        for seed in 0..3u64 {
            let s = split(&table, SplitFractions::default(), seed).unwrap();
            let out = approach.run(&s, &table, &params, seed + 100).unwrap();
            assert_eq!(out.measurement_count, out.measured_indices.len());
            assert_eq!(out.trace.len(), out.correlation_trace.len());
            for point in out.trace.points() {
                let prefix = &out.measured_indices[..point.training_size];
                let replayed = replay_score(approach, &s, &table, &params, prefix).unwrap();
                assert_eq!(replayed, point.score, "{approach} at {}", point.training_size);
            }
        }
    }
}

#[test]
fn cells_reproduce_independently_of_scheduling() {
    let tables = vec![
        generate(&SynthSpec::hard(6, 1)).unwrap(),
        generate(&SynthSpec::easy(6, 2)).unwrap(),
    ];
    let base = ExperimentConfig {
        repeats: 4,
        master_seed: 99,
        jobs: 1,
        ..ExperimentConfig::default()
    };
    let serial = run_on_tables(&base, &tables).unwrap();
    let parallel = run_on_tables(
        &ExperimentConfig {
            jobs: 4,
            ..base.clone()
        },
        &tables,
    )
    .unwrap();
    assert_eq!(
        serde_json::to_string(&serial).unwrap(),
        serde_json::to_string(&parallel).unwrap()
    );
    for (table, report) in tables.iter().zip(&serial.datasets) {
        for cell in &report.cells {
            let again = run_cell(
                table,
                cell.approach,
                cell.repeat,
                base.fractions,
                &base.sampler,
                base.master_seed,
            )
            .unwrap();
            assert_eq!(&again, cell);
        }
    }
}

fn holdout_mmre(noise: f64, seed: u64) -> f64 {
    let table = generate(&dense_spec(seed, noise)).unwrap();
    let s = split(&table, SplitFractions::new(0.3, 0.35, 0.35).unwrap(), seed).unwrap();
    let xs: Vec<_> = s.training_pool.iter().map(|&i| table.row(i).clone()).collect();
    let ys: Vec<f64> = s.training_pool.iter().map(|&i| table.measure(i)).collect();
    let tree = RegressionTree::train(&xs, &ys, TreeParams::default()).unwrap();
    let rest: Vec<usize> = s.testing_pool.iter().chain(&s.validation_pool).copied().collect();
    let predicted = tree.predict_many(rest.iter().map(|&i| table.row(i))).unwrap();
    let actual: Vec<f64> = rest.iter().map(|&i| table.measure(i)).collect();
    mmre(&predicted, &actual).unwrap()
}

#[test]
fn holdout_error_grows_with_noise() {
    let levels = [0.0, 0.5, 1.0, 2.0];
    let medians: Vec<f64> = levels
        .iter()
        .map(|&noise| {
            let mut v: Vec<f64> = (0..7).map(|seed| holdout_mmre(noise, seed)).collect();
            v.sort_by(f64::total_cmp);
            v[3]
        })
        .collect();
    for w in medians.windows(2) {
        assert!(w[0] < w[1], "medians {medians:?}");
    }
}
