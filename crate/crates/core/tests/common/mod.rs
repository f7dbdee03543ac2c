//! Independent oracles and random problem generators shared by the
//! integration and acceptance suites.
#![allow(dead_code)]

use invex_core::lp::{LinearProgram, Row};
use invex_core::model::{Activation, DenseLayer, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Best objective over all vertices of `{z : rows, bounds}` by brute force.
///
/// A vertex has every variable either at a bound or "free", with as many
/// active rows as free variables pinning the free ones down. Returns `None`
/// when no candidate is feasible. Bounds must be finite.
pub fn enumerate_vertices(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    let m = lp.rows.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&j| state[j] == 2).collect();
        for subset in 0u32..(1 << m) {
            if subset.count_ones() as usize != free.len() {
                continue;
            }
            let active: Vec<usize> = (0..m).filter(|r| subset & (1 << r) != 0).collect();
            if let Some(z) = vertex(lp, &state, &free, &active) {
                if lp.max_violation(&z) <= 1e-9 {
                    let obj = lp.objective_at(&z);
                    if best.as_ref().is_none_or(|(b, _)| obj > *b) {
                        best = Some((obj, z));
                    }
                }
            }
        }
        // next state in base 3
        let mut k = 0;
        while k < n {
            state[k] += 1;
            if state[k] < 3 {
                break;
            }
            state[k] = 0;
            k += 1;
        }
        if k == n {
            return best;
        }
    }
}

fn vertex(lp: &LinearProgram, state: &[u8], free: &[usize], active: &[usize]) -> Option<Vec<f64>> {
    let n = lp.num_vars();
    let mut z = vec![0.0; n];
    for j in 0..n {
        match state[j] {
            0 => z[j] = lp.var_lower[j],
            1 => z[j] = lp.var_upper[j],
            _ => {}
        }
    }
    let k = free.len();
    if k == 0 {
        return Some(z);
    }
    // k x (k+1) augmented system
    let mut a: Vec<Vec<f64>> = active
        .iter()
        .map(|&r| {
            let row = &lp.rows[r];
            let fixed: f64 = (0..n).filter(|j| state[*j] != 2).map(|j| row.coeffs[j] * z[j]).sum();
            let mut eq: Vec<f64> = free.iter().map(|&j| row.coeffs[j]).collect();
            eq.push(row.rhs - fixed);
            eq
        })
        .collect();
    for col in 0..k {
        let p = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(p, col);
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    for (i, &j) in free.iter().enumerate() {
        z[j] = a[i][k] / a[i][i];
    }
    Some(z)
}

fn grid(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    rng.random_range(lo..=hi) as f64 * 0.5
}

/// Random LP with coarse-grid data: up to 6 variables, up to 4 rows.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(0..=4);
    let var_lower: Vec<f64> = (0..n).map(|_| grid(rng, -2, 0)).collect();
    let var_upper = var_lower.iter().map(|l| l + grid(rng, 0, 4)).collect();
    LinearProgram {
        objective: (0..n).map(|_| grid(rng, -4, 4)).collect(),
        var_lower,
        var_upper,
        rows: (0..m)
            .map(|_| Row::new((0..n).map(|_| grid(rng, -4, 4)).collect(), grid(rng, -4, 6)))
            .collect(),
    }
}

/// Random dense net: `layers` layers, input `dim`, hidden widths up to 16,
/// `classes` outputs; hidden activations drawn from relu/tanh/identity.
pub fn random_mlp(rng: &mut ChaCha8Rng, dim: usize, layers: usize, classes: usize) -> Model {
    let mut widths = vec![dim];
    for _ in 1..layers {
        widths.push(rng.random_range(2..=16));
    }
    widths.push(classes);
    let acts = [Activation::Relu, Activation::Tanh, Activation::Identity];
    let built = widths
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let scale = 1.0 / (w[0] as f64).sqrt();
            let weights = (0..w[0] * w[1])
                .map(|_| scale * normal(rng))
                .collect();
            let bias = (0..w[1]).map(|_| 0.1 * normal(rng)).collect();
            let act = if l + 2 == widths.len() {
                Activation::Identity
            } else {
                acts[rng.random_range(0..acts.len())]
            };
            DenseLayer::new(w[0], w[1], weights, bias, act).unwrap()
        })
        .collect();
    Model::new(dim, built).unwrap()
}

pub fn random_linear(rng: &mut ChaCha8Rng, dim: usize, classes: usize) -> Model {
    let rows = (0..classes)
        .map(|_| (0..dim).map(|_| normal(rng)).collect())
        .collect();
    let bias = (0..classes).map(|_| 0.5 * normal(rng)).collect();
    Model::linear(rows, bias).unwrap()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn uniform_point(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(lo..hi)).collect()
}

/// True when a central-difference stencil of half-width `step` around `x`
/// stays on one linear piece of every relu, and no relu sits within 1e-6 of
/// its kink.
pub fn away_from_kinks(model: &Model, x: &[f64], step: f64) -> bool {
    if model.relu_margin(x).unwrap() < 1e-6 {
        return false;
    }
    let pattern = model.relu_pattern(x).unwrap();
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        for s in [step, -step] {
            probe[i] = x[i] + s;
            if model.relu_pattern(&probe).unwrap() != pattern {
                return false;
            }
        }
        probe[i] = x[i];
    }
    true
}

/// `max_i |a_i - b_i| / max(|a|_inf, |b|_inf)`, 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}
