use super::{check_model_shapes, CostCounter};
use crate::error::{Error, Result};
use crate::kron::skip_chain;
use crate::matrix::{axpy, FactorMatrix, Matrix};
use crate::par;
use crate::tensor::DenseTensor;

/// `Y(n) (⊙_{k≠n} A(k))` by explicit unfolding.
///
/// Mode `n` is permuted to the front (`[n, 0, .., n-1, n+1, ..]`), the result
/// is read as an `I_n x J_{-n}` matrix and multiplied by the skip-mode
/// Khatri-Rao product, whose columns are built by Kronecker accumulation.
/// Charges are attributed to mode `n`.
pub fn mttkrp_direct(
    y: &DenseTensor,
    factors: &[FactorMatrix],
    n: usize,
    counter: &mut CostCounter,
) -> Result<Matrix> {
    let rank = check_model_shapes(y, factors)?;
    let order = y.order();
    if n >= order {
        return Err(Error::argument(format!(
            "mode {n} out of range for an order-{order} tensor"
        )));
    }
    let rows = y.dims()[n];
    let other = y.len() / rows;

    let permuted;
    let unfolded: &[f64] = if n == 0 {
        y.values()
    } else {
        let mut perm = Vec::with_capacity(order);
        perm.push(n);
        perm.extend((0..order).filter(|&k| k != n));
        permuted = y.permute(&perm)?;
        permuted.values()
    };

    let columns: Vec<(Vec<f64>, u64)> = par::map_columns(rank, |r| {
        let (kr, mults) = skip_chain(factors, n, r);
        debug_assert_eq!(kr.len(), other);
        let mut g = vec![0.0; rows];
        for (j, &w) in kr.iter().enumerate() {
            axpy(w, &unfolded[j * rows..(j + 1) * rows], &mut g);
        }
        (g, mults)
    });

    let previous = counter.active_mode();
    counter.set_mode(Some(n));
    for (_, mults) in &columns {
        counter.charge(*mults);
    }
    counter.charge_matmul(rows, other, rank);
    counter.set_mode(previous);

    let cols: Vec<Vec<f64>> = columns.into_iter().map(|c| c.0).collect();
    Matrix::from_columns(&cols)
}
