//! All-mode gradient by partial contractions.
//!
//! On the ascending-dims tensor with pivot `p`, the pass runs modes
//! `p, p-1, .., 0` and then `p+1, .., N-1`.
//!
//! Going down, each column `r` keeps the right partial `R_r`, the tensor
//! contracted with `a_r(k)` for every `k` above the current mode; it lives on
//! modes `0..=m` and is stored as its vec. Going up, the left partial `L_r`
//! holds the contraction with every `a_r(k)` below the current mode. Each
//! step shrinks the partial by one mode, so only the first step touches the
//! full tensor.

use super::{check_model_dims, pivot_order, select_pivot, CostCounter, ModePermutation};
use crate::error::{Error, Result};
use crate::kron::{khatri_rao_range, kron_chain};
use crate::matrix::{axpy, dot, FactorMatrix, Matrix};
use crate::par;
use crate::tensor::DenseTensor;

/// Callback run right after the gradient of a mode is formed.
///
/// Receives the original mode number, its gradient and the current factors
/// (original numbering). Returning a matrix replaces that factor, and every
/// later step of the same pass uses the replacement.
pub type ModeHook<'a> =
    dyn FnMut(usize, &Matrix, &[FactorMatrix]) -> Result<Option<FactorMatrix>> + 'a;

/// A tensor prepared for repeated all-mode gradients: modes sorted once,
/// pivot chosen once.
#[derive(Clone, Debug)]
pub struct FastGradient {
    sorted: DenseTensor,
    original_dims: Vec<usize>,
    record: ModePermutation,
    pivot: usize,
}

impl FastGradient {
    pub fn new(y: &DenseTensor) -> Result<Self> {
        if y.order() < 2 {
            return Err(Error::UnsupportedOrder(y.order()));
        }
        let record = ModePermutation::ascending(y.dims());
        let sorted = if record.is_identity() {
            y.clone()
        } else {
            y.permute(record.perm())?
        };
        let pivot = select_pivot(sorted.shape())?;
        Ok(FastGradient {
            sorted,
            original_dims: y.dims().to_vec(),
            record,
            pivot,
        })
    }

    /// Pivot position in the sorted mode order.
    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn permutation(&self) -> &ModePermutation {
        &self.record
    }

    /// The tensor with dims ascending.
    pub fn sorted_tensor(&self) -> &DenseTensor {
        &self.sorted
    }

    /// Order in which gradients are produced, as original mode numbers.
    pub fn processing_order(&self) -> Vec<usize> {
        pivot_order(&self.original_dims).expect("validated at construction")
    }

    /// Gradients for every mode, in original mode order.
    pub fn gradients(&self, factors: &[FactorMatrix], counter: &mut CostCounter) -> Result<Vec<Matrix>> {
        let mut owned = factors.to_vec();
        self.pass(&mut owned, counter, None)
    }

    /// As [`FastGradient::gradients`], calling `hook` after each mode; factors
    /// replaced by the hook are written back into `factors`.
    pub fn gradients_with(
        &self,
        factors: &mut [FactorMatrix],
        counter: &mut CostCounter,
        hook: &mut ModeHook<'_>,
    ) -> Result<Vec<Matrix>> {
        self.pass(factors, counter, Some(hook))
    }

    fn pass(
        &self,
        factors: &mut [FactorMatrix],
        counter: &mut CostCounter,
        mut hook: Option<&mut ModeHook<'_>>,
    ) -> Result<Vec<Matrix>> {
        let rank = check_model_dims(&self.original_dims, factors)?;
        let shape = self.sorted.shape();
        let dims = shape.dims();
        let order = dims.len();
        let perm = self.record.perm();
        let vals = self.sorted.values();
        let p = self.pivot;
        let previous = counter.active_mode();
        let mut out: Vec<Option<Matrix>> = vec![None; order];

        // Right partials at the pivot: Y(J x K) times the trailing Khatri-Rao.
        counter.set_mode(Some(perm[p]));
        let jp = shape.prefix(p + 1);
        let kp = shape.suffix(p + 1);
        let mut partial = {
            let trailing: Vec<&Matrix> = (p + 1..order).map(|k| &factors[perm[k]]).collect();
            let (kr, mults) = khatri_rao_range(&trailing, rank);
            counter.charge(mults);
            counter.charge_matmul(jp, kp, rank);
            counter.note_aux(rank * (jp + kp));
            par::map_columns(rank, |r| {
                let mut acc = vec![0.0; jp];
                for (c, &w) in kr.col(r).iter().enumerate() {
                    axpy(w, &vals[c * jp..(c + 1) * jp], &mut acc);
                }
                acc
            })
        };

        for m in (0..=p).rev() {
            if m < p {
                counter.set_mode(Some(perm[m]));
                let len = shape.prefix(m + 1);
                let next = dims[m + 1];
                let a = &factors[perm[m + 1]];
                partial = par::map_columns(rank, |r| {
                    let old = &partial[r];
                    let mut acc = vec![0.0; len];
                    for (i, &w) in a.col(r).iter().enumerate() {
                        axpy(w, &old[i * len..(i + 1) * len], &mut acc);
                    }
                    acc
                });
                counter.charge_matmul(len, next, rank);
            }
            let inner = shape.prefix(m);
            let rows = dims[m];
            let leading: Vec<&Matrix> = (0..m).map(|k| &factors[perm[k]]).collect();
            let cols: Vec<(Vec<f64>, u64)> = par::map_columns(rank, |r| {
                let parts: Vec<&[f64]> = leading.iter().map(|a| a.col(r)).collect();
                let (chain, mults) = kron_chain(&parts, false);
                let part = &partial[r];
                let g = (0..rows)
                    .map(|i| dot(&part[i * inner..(i + 1) * inner], &chain))
                    .collect();
                (g, mults)
            });
            counter.charge_matmul(rows, inner, rank);
            let g = collect_columns(cols, counter)?;
            self.finish(m, g, factors, &mut hook, &mut out, rank)?;
        }

        if p + 1 < order {
            // Left partials: the leading Khatri-Rao (built from the factors as
            // they stand now) transposed, times Y(J x K).
            let q = p + 1;
            counter.set_mode(Some(perm[q]));
            let jq = shape.prefix(q);
            let kq = shape.suffix(q);
            let mut partial = {
                let leading: Vec<&Matrix> = (0..q).map(|k| &factors[perm[k]]).collect();
                let (kr, mults) = khatri_rao_range(&leading, rank);
                counter.charge(mults);
                counter.charge_matmul(rank, jq, kq);
                counter.note_aux(rank * (jq + kq));
                par::map_columns(rank, |r| {
                    let w = kr.col(r);
                    (0..kq).map(|c| dot(&vals[c * jq..(c + 1) * jq], w)).collect::<Vec<f64>>()
                })
            };

            for m in q..order {
                if m > q {
                    counter.set_mode(Some(perm[m]));
                    let prev = dims[m - 1];
                    let len = shape.suffix(m);
                    let a = &factors[perm[m - 1]];
                    partial = par::map_columns(rank, |r| {
                        let old = &partial[r];
                        let w = a.col(r);
                        (0..len).map(|c| dot(&old[c * prev..(c + 1) * prev], w)).collect()
                    });
                    counter.charge_matmul(rank, prev, len);
                }
                let rows = dims[m];
                let outer = shape.suffix(m + 1);
                let trailing: Vec<&Matrix> = (m + 1..order).map(|k| &factors[perm[k]]).collect();
                let cols: Vec<(Vec<f64>, u64)> = par::map_columns(rank, |r| {
                    let parts: Vec<&[f64]> = trailing.iter().map(|a| a.col(r)).collect();
                    let (chain, mults) = kron_chain(&parts, false);
                    let part = &partial[r];
                    let mut g = vec![0.0; rows];
                    for (c, &w) in chain.iter().enumerate() {
                        axpy(w, &part[c * rows..(c + 1) * rows], &mut g);
                    }
                    (g, mults)
                });
                counter.charge_matmul(rows, outer, rank);
                let g = collect_columns(cols, counter)?;
                self.finish(m, g, factors, &mut hook, &mut out, rank)?;
            }
        }

        counter.set_mode(previous);
        Ok(out.into_iter().map(|g| g.expect("every mode visited")).collect())
    }

    fn finish(
        &self,
        sorted_mode: usize,
        g: Matrix,
        factors: &mut [FactorMatrix],
        hook: &mut Option<&mut ModeHook<'_>>,
        out: &mut [Option<Matrix>],
        rank: usize,
    ) -> Result<()> {
        let mode = self.record.original(sorted_mode);
        if let Some(h) = hook.as_mut() {
            if let Some(updated) = h(mode, &g, factors)? {
                if updated.rows() != self.original_dims[mode] || updated.cols() != rank {
                    return Err(Error::shape(format!(
                        "replacement factor {mode} is {}x{}, expected {}x{rank}",
                        updated.rows(),
                        updated.cols(),
                        self.original_dims[mode]
                    )));
                }
                factors[mode] = updated;
            }
        }
        out[mode] = Some(g);
        Ok(())
    }
}

fn collect_columns(cols: Vec<(Vec<f64>, u64)>, counter: &mut CostCounter) -> Result<Matrix> {
    let mut data = Vec::with_capacity(cols.len());
    for (g, mults) in cols {
        counter.charge(mults);
        data.push(g);
    }
    Matrix::from_columns(&data)
}

/// `Y(n) (⊙_{k≠n} A(k))` for every mode `n`, in one pass.
pub fn cp_gradient_all(
    y: &DenseTensor,
    factors: &[FactorMatrix],
    counter: &mut CostCounter,
) -> Result<Vec<Matrix>> {
    FastGradient::new(y)?.gradients(factors, counter)
}

/// [`cp_gradient_all`] with a per-mode hook that may replace factors mid-pass.
pub fn cp_gradient_all_with(
    y: &DenseTensor,
    factors: &mut [FactorMatrix],
    counter: &mut CostCounter,
    hook: &mut ModeHook<'_>,
) -> Result<Vec<Matrix>> {
    FastGradient::new(y)?.gradients_with(factors, counter, hook)
}
