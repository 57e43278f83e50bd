//! Multiplication counting and the closed-form operation counts.
//!
//! Counting convention, applied identically by every kernel:
//! * a matrix product `(m x k) * (k x p)` costs `m*k*p`, including the
//!   degenerate matrix-vector and length-1 cases;
//! * a Kronecker product of a `p`- and a `q`-vector costs `p*q`;
//! * a Kronecker chain copies its first vector for free, except the skip-mode
//!   chain of the direct method with mode 0 skipped, which folds every factor
//!   onto the unit seed and so pays for the first one too;
//! * additions, permutations and reshapes are free.

use crate::error::{Error, Result};
use crate::tensor::Shape;

/// Tally of scalar multiplications, per mode and overall.
///
/// Charges go to the mode set with [`CostCounter::set_mode`]; charges made
/// with no active mode only reach the total.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostCounter {
    per_mode: Vec<u64>,
    total: u64,
    active: Option<usize>,
    peak_aux: usize,
}

impl CostCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Attributes subsequent charges to `mode`.
    pub fn set_mode(&mut self, mode: Option<usize>) {
        if let Some(n) = mode {
            if self.per_mode.len() <= n {
                self.per_mode.resize(n + 1, 0);
            }
        }
        self.active = mode;
    }

    /// Mode currently receiving charges.
    pub fn active_mode(&self) -> Option<usize> {
        self.active
    }

    pub fn charge(&mut self, mults: u64) {
        self.total += mults;
        if let Some(n) = self.active {
            self.per_mode[n] += mults;
        }
    }

    pub fn charge_matmul(&mut self, m: usize, k: usize, p: usize) {
        self.charge((m * k * p) as u64);
    }

    pub fn charge_kron(&mut self, p: usize, q: usize) {
        self.charge((p * q) as u64);
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Multiplications attributed to `mode` so far.
    pub fn mode(&self, mode: usize) -> u64 {
        self.per_mode.get(mode).copied().unwrap_or(0)
    }

    pub fn per_mode(&self) -> &[u64] {
        &self.per_mode
    }

    /// Records a live auxiliary footprint (in `f64`s); keeps the maximum.
    pub fn note_aux(&mut self, floats: usize) {
        self.peak_aux = self.peak_aux.max(floats);
    }

    /// Largest auxiliary footprint reported by the fast gradient, in `f64`s.
    pub fn peak_aux(&self) -> usize {
        self.peak_aux
    }
}

/// Which closed form [`predicted_mult_count`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountVariant {
    /// Direct method, per mode.
    Direct,
    /// Fast all-mode method, the three-case table form.
    Fast,
    /// Fast all-mode method, re-derived step by step under the counting
    /// convention above; always equal to the instrumented count.
    FastDerived,
}

impl std::str::FromStr for CountVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(CountVariant::Direct),
            "fast" => Ok(CountVariant::Fast),
            "fast-derived" => Ok(CountVariant::FastDerived),
            other => Err(Error::argument(format!(
                "unknown count variant {other:?} (expected direct, fast or fast-derived)"
            ))),
        }
    }
}

/// Closed-form multiplication count for computing the gradient of `mode`
/// (zero-based) on a tensor of `shape` with rank `rank`.
///
/// The fast variants assume ascending dims, which is how the fast gradient
/// arranges its input; they use the pivot of [`select_pivot`](super::select_pivot).
pub fn predicted_mult_count(
    shape: &Shape,
    rank: usize,
    mode: usize,
    variant: CountVariant,
) -> Result<u64> {
    let order = shape.order();
    if mode >= order {
        return Err(Error::argument(format!(
            "mode {mode} out of range for an order-{order} tensor"
        )));
    }
    // Work with one-based n so the sums read like the closed forms.
    let n = mode + 1;
    let j = |k: usize| shape.prefix(k) as u64;
    let kk = |k: usize| shape.suffix(k) as u64;
    let big_n = order;
    let sum_j = |lo: usize, hi: usize| (lo..=hi).map(j).sum::<u64>();
    let r = rank as u64;

    if variant == CountVariant::Direct {
        let i_n = shape.dims()[mode] as u64;
        let trailing: u64 = (n + 1..=big_n).map(|k| j(k) / i_n).sum();
        return Ok(r * (j(big_n) + sum_j(2, n.saturating_sub(1)) + trailing));
    }

    let pivot = super::select_pivot(shape)? + 1;
    let jn = j(n);
    let trailing_over_jn: u64 = (n + 2..=big_n).map(|k| j(k) / jn).sum();
    let lead = sum_j(2, n.saturating_sub(1));
    let count = match variant {
        CountVariant::Fast => {
            if n == pivot || n == pivot + 1 {
                r * (lead + jn.min(kk(n - 1)) + trailing_over_jn + j(big_n))
            } else if n < pivot {
                r * sum_j(2, n + 1)
            } else {
                let trailing: u64 = (n + 2..=big_n).map(j).sum();
                r * (kk(n - 2) + kk(n - 1) + trailing)
            }
        }
        CountVariant::FastDerived => {
            if n == pivot {
                r * (j(big_n) + lead + jn + trailing_over_jn)
            } else if n == pivot + 1 {
                r * (j(big_n) + lead + kk(n - 1) + trailing_over_jn)
            } else if n < pivot {
                r * (j(n + 1) + jn + lead)
            } else {
                r * (kk(n - 2) + kk(n - 1) + trailing_over_jn)
            }
        }
        CountVariant::Direct => unreachable!(),
    };
    Ok(count)
}
