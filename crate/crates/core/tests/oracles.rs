//! Implementation-independent oracles for the numeric parts of the core.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wader_core::corpus::{Corpus, LabeledText};
use wader_core::evaluator::{pearson_r, Correlation};
use wader_core::scorer::{featurize, NgramRegressor, TrainOptions};
use wader_core::validator::{difference_stats, ValidatedExample};
use wader_core::AugmentedExample;

/// Pearson's r written out term by term, no shared helpers.
fn literal_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    for i in 0..x.len() {
        num += (x[i] - xbar) * (y[i] - ybar);
    }
    let mut dx = 0.0;
    for xi in x {
        dx += (xi - xbar).powi(2);
    }
    let mut dy = 0.0;
    for yi in y {
        dy += (yi - ybar).powi(2);
    }
    num / (dx.sqrt() * dy.sqrt())
}

fn r(x: &[f64], y: &[f64]) -> f64 {
    match pearson_r(x, y).unwrap() {
        Correlation::Defined(v) => v,
        Correlation::Undefined => panic!("undefined"),
    }
}

#[test]
fn pearson_matches_literal_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let n = rng.gen_range(2..300);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.gen_range(-5.0..5.0)).collect();
        assert!((r(&x, &y) - literal_pearson(&x, &y)).abs() < 1e-12);
        assert!((r(&x, &y) - r(&y, &x)).abs() < 1e-15);
    }
}

#[test]
fn pearson_affine_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n = rng.gen_range(3..100);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..5.0)).collect();
        let a: f64 = rng.gen_range(0.1..10.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let b: f64 = rng.gen_range(-20.0..20.0);
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        assert!((r(&ax, &y) - a.signum() * r(&x, &y)).abs() < 1e-12);
    }
}

#[test]
fn pearson_stable_on_a_million_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1_000_000;
    // offset far from zero stresses any single-pass sum-of-squares shortcut
    let x: Vec<f64> = (0..n).map(|_| 1e6 + rng.gen_range(0.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v * 2.0 + rng.gen_range(0.0..1.0)).collect();
    // two-pass with compensated sums as the reference
    let mean = |v: &[f64]| {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for &t in v {
            let yk = t - c;
            let tk = s + yk;
            c = (tk - s) - yk;
            s = tk;
        }
        s / v.len() as f64
    };
    let (mx, my) = (mean(&x), mean(&y));
    let dxy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let dxx: Vec<f64> = x.iter().map(|a| (a - mx) * (a - mx)).collect();
    let dyy: Vec<f64> = y.iter().map(|b| (b - my) * (b - my)).collect();
    let reference = mean(&dxy) / (mean(&dxx).sqrt() * mean(&dyy).sqrt());
    assert!((r(&x, &y) - reference).abs() < 1e-9);
}

/// Dense ridge fit by Gaussian elimination on the (d+1)-dimensional
/// normal equations, bias unpenalized, loss averaged over rows.
fn dense_ridge(rows: &[Vec<f64>], y: &[f64], l2: f64) -> (Vec<f64>, f64) {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let m = d + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (row, &yi) in rows.iter().zip(y) {
        let mut xa = row.clone();
        xa.push(1.0);
        for i in 0..m {
            for j in 0..m {
                a[i][j] += xa[i] * xa[j] / n;
            }
            a[i][m] += xa[i] * yi / n;
        }
    }
    for (i, row) in a.iter_mut().enumerate().take(d) {
        row[i] += l2;
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let sol: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    (sol[..d].to_vec(), sol[d])
}

fn dense_features(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for (i, x) in featurize(text, dim) {
        v[i as usize] = x;
    }
    v
}

fn xyz_corpus(n: usize, seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = ["the", "cat", "sat", "on", "mat", "dog", "ran", "far", "sun", "sky"];
    (0..n)
        .map(|i| {
            let mut toks: Vec<&str> = (0..rng.gen_range(4..8)).map(|_| words[rng.gen_range(0..words.len())]).collect();
            let marked = i % 3 == 0;
            if marked {
                let at = rng.gen_range(0..=toks.len());
                toks.insert(at, "XYZ");
            }
            (toks.join(" "), if marked { 5.0 } else { 1.0 })
        })
        .collect()
}

#[test]
fn conjugate_gradient_matches_dense_solve() {
    let data = xyz_corpus(60, 5);
    let dim = 64;
    let opts = TrainOptions {
        hash_dim: dim,
        l2: 0.01,
        tolerance: 1e-12,
        max_iterations: 10_000,
    };
    let pairs: Vec<(&str, f64)> = data.iter().map(|(t, l)| (t.as_str(), *l)).collect();
    let model = NgramRegressor::fit(&pairs, &opts).unwrap();
    let rows: Vec<Vec<f64>> = data.iter().map(|(t, _)| dense_features(t, dim)).collect();
    let y: Vec<f64> = data.iter().map(|(_, l)| *l).collect();
    let (w, b) = dense_ridge(&rows, &y, 0.01);
    assert!((model.bias() - b).abs() < 1e-8, "{} vs {}", model.bias(), b);
    for (got, want) in model.weights().iter().zip(&w) {
        assert!((got - want).abs() < 1e-8);
    }
}

#[test]
fn memorizable_signal_is_learned() {
    let data = xyz_corpus(200, 6);
    let items: Vec<LabeledText> = data
        .iter()
        .enumerate()
        .map(|(i, (t, l))| LabeledText::new(format!("en-{i}"), t.clone(), "en", *l).unwrap())
        .collect();
    let corpus = Corpus::new(items, vec![]).unwrap();
    let model = NgramRegressor::train_reference(&corpus, 1e-3, 0).unwrap();
    let preds: Vec<f64> = data.iter().map(|(t, _)| model.raw_score(t).clamp(1.0, 5.0)).collect();
    let gold: Vec<f64> = data.iter().map(|(_, l)| *l).collect();
    assert!(r(&preds, &gold) >= 0.95);
    let mae = preds.iter().zip(&gold).map(|(p, g)| (p - g).abs()).sum::<f64>() / gold.len() as f64;
    assert!(mae <= 0.2, "mae {mae}");
}

#[test]
fn duplicated_data_gives_same_weights() {
    let data = xyz_corpus(80, 7);
    let once: Vec<(&str, f64)> = data.iter().map(|(t, l)| (t.as_str(), *l)).collect();
    let twice: Vec<(&str, f64)> = once.iter().chain(once.iter()).copied().collect();
    let opts = TrainOptions {
        hash_dim: 1 << 12,
        l2: 0.05,
        // the identity holds for the exact solution; solve close to it
        tolerance: 1e-12,
        ..TrainOptions::default()
    };
    let a = NgramRegressor::fit(&once, &opts).unwrap();
    let b = NgramRegressor::fit(&twice, &opts).unwrap();
    assert!((a.bias() - b.bias()).abs() < 1e-9, "{} {}", a.bias(), b.bias());
    for (x, y) in a.weights().iter().zip(b.weights()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let data = xyz_corpus(50, 8);
    let pairs: Vec<(&str, f64)> = data.iter().map(|(t, l)| (t.as_str(), *l)).collect();
    let opts = TrainOptions {
        hash_dim: 1 << 10,
        ..TrainOptions::default()
    };
    let a = NgramRegressor::fit(&pairs, &opts).unwrap();
    let b = NgramRegressor::fit(&pairs, &opts).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}

#[test]
fn uniform_histogram_within_binomial_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let items: Vec<LabeledText> = (0..10_000)
        .map(|i| LabeledText::new(format!("en-{i}"), "t", "en", rng.gen_range(1.0..5.0)).unwrap())
        .collect();
    let c = Corpus::new(items, vec![]).unwrap();
    let h = c.histogram(0.5).unwrap();
    let bins = &h["en"];
    assert_eq!(bins.len(), 8);
    // each bin ~ Binomial(10000, 1/8): sd = sqrt(10000 * 1/8 * 7/8) = 33.07
    let sd = (10_000.0f64 * 0.125 * 0.875).sqrt();
    for &(_, count) in bins {
        assert!((count as f64 - 1250.0).abs() <= 3.0 * sd, "{count}");
    }
    assert_eq!(bins.iter().map(|b| b.1).sum::<usize>(), 10_000);
}

#[test]
fn half_normal_difference_mean() {
    // |N(0, σ²)| has mean σ·√(2/π) and variance σ²(1 − 2/π)
    let sigma = 0.5f64;
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let validated: Vec<ValidatedExample> = (0..n)
        .map(|i| {
            // Box–Muller
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            let e = AugmentedExample {
                id: format!("x{i}"),
                text: "t".into(),
                language: "en".into(),
                derived_label: 3.0,
                source_id: "s".into(),
                path: vec!["fr".into(), "en".into()],
            };
            ValidatedExample::new(e, 3.0 + sigma * z)
        })
        .collect();
    let s = difference_stats(&validated).unwrap();
    let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
    let se = sigma * (1.0 - 2.0 / std::f64::consts::PI).sqrt() / (n as f64).sqrt();
    assert!((s.mean - expected).abs() <= 3.0 * se, "{} vs {}", s.mean, expected);
    assert!(s.min <= s.p25 && s.p25 <= s.p50 && s.p50 <= s.p75 && s.p75 <= s.max);
}
