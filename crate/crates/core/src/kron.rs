//! Kronecker, Khatri-Rao and Hadamard kernels.
//!
//! Kronecker order follows the tensor layout: in `a ⊗ b` the index of `b`
//! varies fastest, so `a(N) ⊗ .. ⊗ a(1)` enumerates its entries in the same
//! order as the columns of a mode unfolding.

use crate::error::{Error, Result};
use crate::matrix::{FactorMatrix, Matrix};
use crate::mttkrp::CostCounter;
use crate::par;

/// `a ⊗ b`: the blocks `a[0]*b, a[1]*b, ..`.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    kron_append(a, b, &mut out);
    out
}

#[inline]
fn kron_append(a: &[f64], b: &[f64], out: &mut Vec<f64>) {
    for &x in a {
        out.extend(b.iter().map(|v| x * v));
    }
}

/// Builds `parts[last] ⊗ .. ⊗ parts[1] ⊗ parts[0]` by left accumulation,
/// returning the vector and the multiplications spent. With
/// `charge_seed = false` the first part is copied for free; otherwise the
/// chain starts from the unit scalar and every part costs a Kronecker step.
pub(crate) fn kron_chain(parts: &[&[f64]], charge_seed: bool) -> (Vec<f64>, u64) {
    let Some((first, rest)) = parts.split_first() else {
        return (vec![1.0], 0);
    };
    let mut mults = if charge_seed { first.len() as u64 } else { 0 };
    let mut t = first.to_vec();
    let mut scratch = Vec::new();
    for a in rest {
        mults += (a.len() * t.len()) as u64;
        scratch.clear();
        kron_append(a, &t, &mut scratch);
        std::mem::swap(&mut t, &mut scratch);
    }
    (t, mults)
}

/// Checks that factors are non-empty, share a column count and are finite;
/// returns the common rank.
pub fn check_factors(factors: &[FactorMatrix]) -> Result<usize> {
    let first = factors
        .first()
        .ok_or_else(|| Error::shape("no factor matrices"))?;
    let rank = first.cols();
    if rank == 0 {
        return Err(Error::shape("factor matrices need at least one column"));
    }
    for (n, a) in factors.iter().enumerate() {
        if a.cols() != rank {
            return Err(Error::shape(format!(
                "factor {n} has {} columns, factor 0 has {rank}",
                a.cols()
            )));
        }
        if a.rows() == 0 {
            return Err(Error::shape(format!("factor {n} has no rows")));
        }
        if !a.is_finite() {
            return Err(Error::Numeric(format!("factor {n} has non-finite entries")));
        }
    }
    Ok(rank)
}

/// Column `r` of the skip-mode Khatri-Rao product: `⊗_{k != skip} a_r(k)`,
/// accumulated from mode 0 upward. Charges the Kronecker steps to `counter`.
pub fn skip_kron_column(
    factors: &[FactorMatrix],
    skip: usize,
    r: usize,
    counter: &mut CostCounter,
) -> Result<Vec<f64>> {
    let rank = check_factors(factors)?;
    if skip >= factors.len() {
        return Err(Error::argument(format!(
            "skipped mode {skip} out of range for {} factors",
            factors.len()
        )));
    }
    if r >= rank {
        return Err(Error::argument(format!("column {r} out of range for rank {rank}")));
    }
    let (t, mults) = skip_chain(factors, skip, r);
    counter.charge(mults);
    Ok(t)
}

pub(crate) fn skip_chain(factors: &[FactorMatrix], skip: usize, r: usize) -> (Vec<f64>, u64) {
    let parts: Vec<&[f64]> = factors
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != skip)
        .map(|(_, a)| a.col(r))
        .collect();
    // Mode 0 seeds the accumulation only when it participates.
    kron_chain(&parts, skip == 0)
}

/// Column-wise Kronecker product: column `r` is `x_r ⊗ y_r`.
pub fn khatri_rao(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    if x.cols() != y.cols() {
        return Err(Error::shape(format!(
            "Khatri-Rao product of {} and {} columns",
            x.cols(),
            y.cols()
        )));
    }
    let cols: Vec<Vec<f64>> = (0..x.cols()).map(|r| kron_vec(x.col(r), y.col(r))).collect();
    Matrix::from_columns(&cols)
}

/// `A(N-1) ⊙ .. ⊙ A(skip+1) ⊙ A(skip-1) ⊙ .. ⊙ A(0)`.
pub fn khatri_rao_skip(factors: &[FactorMatrix], skip: usize) -> Result<Matrix> {
    let rank = check_factors(factors)?;
    if skip >= factors.len() {
        return Err(Error::argument(format!(
            "skipped mode {skip} out of range for {} factors",
            factors.len()
        )));
    }
    let cols = par::map_columns(rank, |r| skip_chain(factors, skip, r).0);
    Matrix::from_columns(&cols)
}

/// Khatri-Rao product of a contiguous run of factors, `A(hi-1) ⊙ .. ⊙ A(lo)`,
/// with its multiplication count. The first factor of the run is free.
pub(crate) fn khatri_rao_range(
    factors: &[&FactorMatrix],
    rank: usize,
) -> (Matrix, u64) {
    let cols: Vec<(Vec<f64>, u64)> = par::map_columns(rank, |r| {
        let parts: Vec<&[f64]> = factors.iter().map(|a| a.col(r)).collect();
        kron_chain(&parts, false)
    });
    let mults = cols.iter().map(|c| c.1).sum();
    let cols: Vec<Vec<f64>> = cols.into_iter().map(|c| c.0).collect();
    (Matrix::from_columns(&cols).expect("equal-length chains"), mults)
}

/// Elementwise product.
pub fn hadamard(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    x.hadamard(y)
}

/// `⊛_{k != skip} A(k)^T A(k)`, the `R x R` normal-equations matrix.
pub fn gram_hadamard_skip(factors: &[FactorMatrix], skip: usize) -> Result<Matrix> {
    let rank = check_factors(factors)?;
    let grams: Vec<Matrix> = factors.iter().map(Matrix::gram).collect();
    hadamard_of_grams(&grams, skip, rank)
}

pub(crate) fn hadamard_of_grams(grams: &[Matrix], skip: usize, rank: usize) -> Result<Matrix> {
    if skip >= grams.len() {
        return Err(Error::argument(format!(
            "skipped mode {skip} out of range for {} factors",
            grams.len()
        )));
    }
    let mut out = Matrix::filled(rank, rank, 1.0);
    for (k, g) in grams.iter().enumerate() {
        if k != skip {
            for (o, v) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *o *= v;
            }
        }
    }
    Ok(out)
}
