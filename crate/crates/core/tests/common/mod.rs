#![allow(dead_code)]

use mibrv::{Bag, BagLabel, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bag(rng: &mut ChaCha8Rng, id: &str, max_len: usize, dim: usize, span: f64) -> Bag {
    let n = rng.random_range(1..=max_len);
    let rows = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-span..=span)).collect())
        .collect();
    Bag::from_rows(id, rows, None)
}

pub fn random_pair(rng: &mut ChaCha8Rng) -> (Bag, Bag) {
    let dim = rng.random_range(1..=5);
    (random_bag(rng, "a", 8, dim, 10.0), random_bag(rng, "b", 8, dim, 10.0))
}

pub fn random_dataset(rng: &mut ChaCha8Rng, bags: usize, dim: usize) -> Dataset {
    let bags = (0..bags)
        .map(|i| {
            let label = if i % 2 == 0 { BagLabel::Positive } else { BagLabel::Negative };
            random_bag(rng, &format!("b{i}"), 6, dim, 10.0).with_label(Some(label))
        })
        .collect();
    Dataset::new(bags).unwrap()
}

/// Random linear classification problem with some label noise.
pub fn random_problem(rng: &mut ChaCha8Rng, max_points: usize, max_dim: usize) -> (Vec<Vec<f64>>, Vec<BagLabel>) {
    loop {
        let n = rng.random_range(4..=max_points);
        let d = rng.random_range(1..=max_dim);
        let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys: Vec<BagLabel> = xs
            .iter()
            .map(|x| {
                let s: f64 = x.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5);
                BagLabel::from_sign(s)
            })
            .collect();
        let pos = ys.iter().filter(|l| **l == BagLabel::Positive).count();
        if pos > 0 && pos < n {
            return (xs, ys);
        }
    }
}

pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Accelerated projected gradient on the box-constrained SVM dual.
pub fn oracle_dual(xs: &[Vec<f64>], ys: &[BagLabel], c: f64, bias_scale: f64, iters: usize) -> DualSolution {
    let n = xs.len();
    let y: Vec<f64> = ys.iter().map(|l| l.sign()).collect();
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = xs[i].iter().zip(&xs[j]).map(|(a, b)| a * b).sum();
            q[i][j] = y[i] * y[j] * (dot + bias_scale * bias_scale);
        }
    }
    let lip = q.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    let step = 1.0 / lip;
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>()).collect();
        let next: Vec<f64> = (0..n).map(|i| (z[i] + step * grad[i]).clamp(0.0, c)).collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i])).collect();
        a = next;
        t = t_next;
    }
    let d = xs[0].len();
    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    for i in 0..n {
        for k in 0..d {
            weights[k] += a[i] * y[i] * xs[i][k];
        }
        bias += a[i] * y[i] * bias_scale;
    }
    DualSolution { alpha: a, weights, bias }
}

pub fn primal(weights: &[f64], bias: f64, bias_scale: f64, xs: &[Vec<f64>], ys: &[BagLabel], c: f64) -> f64 {
    let reg: f64 = weights.iter().map(|w| w * w).sum::<f64>() + bias * bias;
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, l)| {
            let f: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() + bias * bias_scale;
            (1.0 - l.sign() * f).max(0.0)
        })
        .sum();
    0.5 * reg + c * loss
}

pub fn dual(alpha: &[f64], weights: &[f64], bias: f64) -> f64 {
    let reg: f64 = weights.iter().map(|w| w * w).sum::<f64>() + bias * bias;
    alpha.iter().sum::<f64>() - 0.5 * reg
}

pub fn run_cli(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["mibrv"];
    full.extend_from_slice(args);
    let code = mibrv::cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
