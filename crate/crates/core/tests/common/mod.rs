//! Reference implementations used only by the tests. Each one works from the
//! element-wise definitions with its own index arithmetic, so it shares no
//! code path with the library kernels it checks.

#![allow(dead_code)]

use fastcp::{DenseTensor, Matrix};
use rand::Rng;

/// Multi-index of `linear` for first-index-fastest storage.
pub fn unravel(mut linear: usize, dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .map(|&d| {
            let i = linear % d;
            linear /= d;
            i
        })
        .collect()
}

/// `Σ_{i_{-n}} y(i) Π_{k≠n} a_r(k)[i_k]` for every `(i_n, r)`.
pub fn mttkrp_brute(y: &DenseTensor, factors: &[Matrix], n: usize) -> Matrix {
    let dims = y.dims();
    let rank = factors[0].cols();
    let mut out = Matrix::zeros(dims[n], rank);
    for (lin, &v) in y.values().iter().enumerate() {
        let idx = unravel(lin, dims);
        for r in 0..rank {
            let mut w = v;
            for (k, &i) in idx.iter().enumerate() {
                if k != n {
                    w *= factors[k][(i, r)];
                }
            }
            out[(idx[n], r)] += w;
        }
    }
    out
}

/// `Σ_i (y(i) - Σ_r Π_k a_r(k)[i_k])^2`.
pub fn cost_brute(y: &DenseTensor, factors: &[Matrix]) -> f64 {
    let dims = y.dims();
    let rank = factors[0].cols();
    y.values()
        .iter()
        .enumerate()
        .map(|(lin, &v)| {
            let idx = unravel(lin, dims);
            let model: f64 = (0..rank)
                .map(|r| idx.iter().enumerate().map(|(k, &i)| factors[k][(i, r)]).product::<f64>())
                .sum();
            (v - model) * (v - model)
        })
        .sum()
}

/// Largest entrywise `|a - b| / |b|`; where `b` is zero, `|a|`.
pub fn max_rel_err(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| if *y == 0.0 { x.abs() } else { (x - y).abs() / y.abs() })
        .fold(0.0, f64::max)
}

pub fn prefix(dims: &[usize], n: usize) -> u64 {
    dims[..n].iter().map(|&d| d as u64).product()
}

/// Product of the dims of modes `n..` (zero-based), i.e. everything after
/// the first `n` modes.
pub fn suffix(dims: &[usize], n: usize) -> u64 {
    dims[n..].iter().map(|&d| d as u64).product()
}

/// Direct-method count for one-based mode `n`:
/// `R (J_N + Σ_{k=2}^{n-1} J_k + (1/I_n) Σ_{k=n+1}^{N} J_k)`.
pub fn direct_count(dims: &[usize], rank: usize, n: usize) -> u64 {
    let big_n = dims.len();
    let j = |k: usize| prefix(dims, k);
    let i_n = dims[n - 1] as u64;
    let lead: u64 = (2..n).map(j).sum();
    let trail: u64 = (n + 1..=big_n).map(|k| j(k) / i_n).sum();
    rank as u64 * (j(big_n) + lead + trail)
}

/// One-based pivot `max{n : J_n <= K_n}` with `K_n` the product of the dims
/// after mode `n`.
pub fn pivot_one_based(dims: &[usize]) -> usize {
    (1..=dims.len())
        .filter(|&n| prefix(dims, n) <= suffix(dims, n))
        .max()
        .expect("ascending dims have a pivot")
}

/// The three-case table count of the fast method for one-based mode `n`,
/// with `K_m` the product of dims after one-based mode `m`.
pub fn fast_table_count(dims: &[usize], rank: usize, n: usize) -> u64 {
    let big_n = dims.len();
    let p = pivot_one_based(dims);
    let j = |k: usize| prefix(dims, k);
    let kk = |m: usize| suffix(dims, m);
    let r = rank as u64;
    if n == p || n == p + 1 {
        let lead: u64 = (2..n).map(j).sum();
        let trail: u64 = (n + 2..=big_n).map(|k| j(k) / j(n)).sum();
        r * (lead + j(n).min(kk(n - 1)) + trail + j(big_n))
    } else if n < p {
        r * (2..=n + 1).map(j).sum::<u64>()
    } else {
        r * (kk(n - 2) + kk(n - 1) + (n + 2..=big_n).map(j).sum::<u64>())
    }
}

/// The fast-method count re-derived step by step: pivot contraction or
/// recursion, plus the per-mode Kronecker chain and contraction.
pub fn fast_derived_count(dims: &[usize], rank: usize, n: usize) -> u64 {
    let big_n = dims.len();
    let p = pivot_one_based(dims);
    let j = |k: usize| prefix(dims, k);
    let kk = |m: usize| suffix(dims, m);
    let lead: u64 = (2..n).map(j).sum();
    let trail: u64 = (n + 2..=big_n).map(|k| j(k) / j(n)).sum();
    let per_column = if n == p {
        j(big_n) + lead + j(n) + trail
    } else if n == p + 1 {
        j(big_n) + lead + kk(n - 1) + trail
    } else if n < p {
        j(n + 1) + j(n) + lead
    } else {
        kk(n - 2) + kk(n - 1) + trail
    };
    rank as u64 * per_column
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng, lo: f64, hi: f64) -> Matrix {
    Matrix::from_col_major(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub fn random_tensor(dims: &[usize], rng: &mut impl Rng, lo: f64, hi: f64) -> DenseTensor {
    let len = dims.iter().product();
    DenseTensor::new(dims.to_vec(), (0..len).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub fn random_factors(dims: &[usize], rank: usize, rng: &mut impl Rng, lo: f64, hi: f64) -> Vec<Matrix> {
    dims.iter().map(|&d| random_matrix(d, rank, rng, lo, hi)).collect()
}
