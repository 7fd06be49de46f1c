mod support;

use kanfe::models::{enumerate_table1, Model, TABLE1_NAMES};
use kanfe::nn::Parameterized;
use kanfe::training::cross_entropy;
use kanfe::{ModelConfig, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{channel_wise_oracle, param_count_oracle};

fn batch(n: usize, c: usize, t: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * c * t).map(|_| rng.random_range(0.0..1.0)).collect()
}

#[test]
fn table1_has_fifteen_named_rows() {
    let rows = enumerate_table1(6, 3, 80);
    let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, TABLE1_NAMES);
}

#[test]
fn param_counts_match_enumeration_at_several_shapes() {
    for (k, c, t) in [(6, 3, 80), (6, 3, 200), (12, 6, 200), (3, 2, 40), (13, 6, 200)] {
        for cfg in enumerate_table1(k, c, t) {
            let model = Model::<f64>::build(&cfg, 0).unwrap();
            let stored: usize = model.params().iter().map(|p| p.data.len()).sum();
            let shaped: usize = model.params().iter().map(|p| p.shape.iter().product::<usize>()).sum();
            let oracle = param_count_oracle(&cfg);
            assert_eq!(model.param_count(), stored, "{} at {k}/{c}/{t}", cfg.name);
            assert_eq!(shaped, stored, "{}", cfg.name);
            assert_eq!(oracle, stored, "{} at {k}/{c}/{t}", cfg.name);
            assert_eq!(cfg.expected_param_count(), stored, "{}", cfg.name);
        }
    }
}

#[test]
fn one_level_kan_is_smaller_than_smallest_cnn() {
    let rows = enumerate_table1(6, 3, 80);
    let count = |name: &str| param_count_oracle(rows.iter().find(|r| r.name == name).unwrap());
    assert!(count("1L-KAN-FE") < count("CNN-Enc4"));
}

#[test]
fn no_dead_parameters() {
    let (c, t, k, n) = (2, 40, 3, 6);
    let x = batch(n, c, t, 1);
    let labels = [0, 1, 2, 0, 1, 2];
    for (i, cfg) in enumerate_table1(k, c, t).iter().enumerate() {
        let model = Model::<f64>::build(cfg, i as u64).unwrap();
        let (logits, rec) = model.forward_train(&x, n).unwrap();
        let (_, d) = cross_entropy(&logits, &labels, k).unwrap();
        let grads = model.backward(&rec, &d);
        for (p, g) in model.params().iter().zip(&grads) {
            assert!(g.iter().any(|v| *v != 0.0), "{}: tensor {} gets no gradient", cfg.name, p.name);
        }
    }
}

#[test]
fn batch_rows_are_independent() {
    let (c, t, k) = (2, 40, 3);
    let x = batch(5, c, t, 2);
    for cfg in enumerate_table1(k, c, t) {
        let model = Model::<f64>::build(&cfg, 3).unwrap();
        let all = model.forward_classify(&x, 5).unwrap();
        for s in 0..5 {
            let one = model.forward_classify(&x[s * c * t..(s + 1) * c * t], 1).unwrap();
            for (a, b) in one.iter().zip(&all[s * k..(s + 1) * k]) {
                assert!((a - b).abs() < 1e-12, "{}", cfg.name);
            }
        }
    }
}

#[test]
fn one_level_model_matches_loop_oracle() {
    let (c, t, k) = (2, 40, 3);
    let cfg = ModelConfig::one_level("1L-KAN-FE", 5, c, t, k);
    assert_eq!(cfg.variant, Variant::OneLevel);
    let model = Model::<f64>::build(&cfg, 4).unwrap();
    let x = batch(1, c, t, 5);
    let cw = model.channel_wise().unwrap();
    let mut h = channel_wise_oracle(cw.filters(), &x, c, cfg.n_w, false);
    let views = model.params();
    let head: Vec<_> = views.iter().filter(|p| p.name.starts_with("head.")).collect();
    for (layer, pair) in head.chunks(2).enumerate() {
        let (w, b) = (pair[0], pair[1]);
        let (out, inp) = (w.shape[0], w.shape[1]);
        assert_eq!(inp, h.len());
        h = (0..out)
            .map(|o| {
                let z: f64 = (0..inp).map(|i| w.data[o * inp + i] * h[i]).sum::<f64>() + b.data[o];
                if layer < 2 { z.max(0.0) } else { z }
            })
            .collect();
    }
    let logits = model.forward_classify(&x, 1).unwrap();
    for (a, b) in logits.iter().zip(&h) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn builds_are_deterministic_per_seed() {
    for cfg in enumerate_table1(3, 2, 40) {
        assert_eq!(Model::<f64>::build(&cfg, 9).unwrap(), Model::<f64>::build(&cfg, 9).unwrap());
    }
}
