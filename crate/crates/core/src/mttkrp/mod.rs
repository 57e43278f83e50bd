//! Matricized tensor times Khatri-Rao product, `Y(n) (⊙_{k≠n} A(k))`.
//!
//! Two routes compute the same matrices:
//! * [`mttkrp_direct`] permutes mode `n` to the front, reshapes and multiplies
//!   by the explicit skip-mode Khatri-Rao product, one mode at a time;
//! * [`cp_gradient_all`] produces every mode in one pass by contracting the
//!   tensor once from the pivot mode and then reusing partial contractions
//!   while walking down and up the modes.
//!
//! All modes are zero-based.

mod cost;
mod direct;
mod fast;

pub use cost::{predicted_mult_count, CostCounter, CountVariant};
pub use direct::mttkrp_direct;
pub use fast::{cp_gradient_all, cp_gradient_all_with, FastGradient, ModeHook};

use crate::error::{Error, Result};
use crate::kron::check_factors;
use crate::matrix::FactorMatrix;
use crate::tensor::{DenseTensor, Shape};

/// The pivot mode: the largest `n` with `J_{n+1} <= K_{n+1}`, i.e. the last
/// mode whose leading block (modes `0..=n`) is no larger than the trailing
/// block (modes `n+1..`). Ties go to the larger mode.
///
/// Expects ascending dims, where such a mode always exists.
pub fn select_pivot(shape: &Shape) -> Result<usize> {
    let order = shape.order();
    if order < 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    (1..=order)
        .rev()
        .find(|&n| shape.prefix(n) <= shape.suffix(n))
        .map(|n| n - 1)
        .ok_or_else(|| {
            Error::argument(format!(
                "no pivot mode for dims {:?}; sort them ascending first",
                shape.dims()
            ))
        })
}

/// Mode reordering produced by [`sort_modes`]: position `k` of the sorted
/// problem holds original mode `perm()[k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModePermutation {
    perm: Vec<usize>,
}

impl ModePermutation {
    /// Stable ascending order of `dims`.
    pub fn ascending(dims: &[usize]) -> Self {
        let mut perm: Vec<usize> = (0..dims.len()).collect();
        perm.sort_by_key(|&k| dims[k]);
        ModePermutation { perm }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(k, &p)| k == p)
    }

    /// Original mode held at sorted position `k`.
    pub fn original(&self, k: usize) -> usize {
        self.perm[k]
    }

    /// Reorders per-mode items given in sorted order back to original order.
    pub fn restore<T>(&self, sorted: Vec<T>) -> Vec<T> {
        let mut slots: Vec<Option<T>> = (0..sorted.len()).map(|_| None).collect();
        for (k, item) in sorted.into_iter().enumerate() {
            slots[self.perm[k]] = Some(item);
        }
        slots.into_iter().map(|s| s.expect("permutation covers every mode")).collect()
    }
}

/// Rearranges the tensor (and its factors) so that dims ascend, with a stable
/// sort so equal dims keep their relative order.
pub fn sort_modes(
    y: &DenseTensor,
    factors: &[FactorMatrix],
) -> Result<(DenseTensor, Vec<FactorMatrix>, ModePermutation)> {
    check_model_shapes(y, factors)?;
    let record = ModePermutation::ascending(y.dims());
    let tensor = if record.is_identity() {
        y.clone()
    } else {
        y.permute(record.perm())?
    };
    let sorted = record.perm().iter().map(|&k| factors[k].clone()).collect();
    Ok((tensor, sorted, record))
}

/// Order in which the fast pass visits modes, as original mode numbers:
/// the pivot of the ascending arrangement, down to its first mode, then up
/// from the mode after the pivot.
pub fn pivot_order(dims: &[usize]) -> Result<Vec<usize>> {
    let record = ModePermutation::ascending(dims);
    let sorted = Shape::new(record.perm().iter().map(|&k| dims[k]).collect())?;
    let p = select_pivot(&sorted)?;
    Ok((0..=p)
        .rev()
        .chain(p + 1..dims.len())
        .map(|k| record.original(k))
        .collect())
}

/// Checks factor count, row counts and common rank against the tensor.
pub(crate) fn check_model_shapes(y: &DenseTensor, factors: &[FactorMatrix]) -> Result<usize> {
    check_model_dims(y.dims(), factors)
}

pub(crate) fn check_model_dims(dims: &[usize], factors: &[FactorMatrix]) -> Result<usize> {
    if factors.len() != dims.len() {
        return Err(Error::shape(format!(
            "{} factors for an order-{} tensor",
            factors.len(),
            dims.len()
        )));
    }
    let rank = check_factors(factors)?;
    for (n, (a, &d)) in factors.iter().zip(dims).enumerate() {
        if a.rows() != d {
            return Err(Error::shape(format!(
                "factor {n} has {} rows, mode {n} has size {d}",
                a.rows()
            )));
        }
    }
    Ok(rank)
}
