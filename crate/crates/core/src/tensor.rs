//! Dense N-way tensors with first-index-fastest storage.
//!
//! All indices and mode numbers are zero-based. Element `(i_0, .., i_{N-1})`
//! lives at linear position `i_0 + i_1*I_0 + i_2*I_0*I_1 + ...`, so the
//! prefix unfoldings `Y(1:n)` are reinterpretations of the same buffer.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, MatrixView};

/// Dimensions `I_0 .. I_{N-1}` of a tensor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::shape("a tensor needs at least one mode"));
        }
        if let Some(n) = dims.iter().position(|&d| d == 0) {
            return Err(Error::shape(format!("mode {n} has size 0")));
        }
        dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| {
            Error::shape(format!("element count of {dims:?} overflows usize"))
        })?;
        Ok(Shape { dims })
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of elements, `J_N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `J_n = I_0 * .. * I_{n-1}`, the product of the first `n` dims; `J_0 = 1`.
    #[inline]
    pub fn prefix(&self, n: usize) -> usize {
        self.dims[..n].iter().product()
    }

    /// `K_n = I_n * .. * I_{N-1}`, the product of the dims after the first `n`; `K_N = 1`.
    #[inline]
    pub fn suffix(&self, n: usize) -> usize {
        self.dims[n..].iter().product()
    }

    /// Product of every dim except mode `n` (`J_{-n}`).
    #[inline]
    pub fn len_without(&self, n: usize) -> usize {
        self.len() / self.dims[n]
    }

    /// Linear position of a multi-index (first index fastest).
    pub fn linear_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.order() {
            return Err(Error::shape(format!(
                "index of length {} for an order-{} tensor",
                multi.len(),
                self.order()
            )));
        }
        let mut linear = 0;
        let mut stride = 1;
        for (mode, (&i, &d)) in multi.iter().zip(&self.dims).enumerate() {
            if i >= d {
                return Err(Error::Index {
                    mode,
                    index: i,
                    size: d,
                });
            }
            linear += i * stride;
            stride *= d;
        }
        Ok(linear)
    }

    /// Inverse of [`Shape::linear_index`].
    pub fn multi_index(&self, linear: usize) -> Result<Vec<usize>> {
        let len = self.len();
        if linear >= len {
            return Err(Error::LinearIndex { index: linear, len });
        }
        let mut rest = linear;
        Ok(self
            .dims
            .iter()
            .map(|&d| {
                let i = rest % d;
                rest /= d;
                i
            })
            .collect())
    }
}

/// Free-function form of [`Shape::linear_index`].
pub fn linear_index(multi: &[usize], shape: &Shape) -> Result<usize> {
    shape.linear_index(multi)
}

/// Free-function form of [`Shape::multi_index`].
pub fn multi_index(linear: usize, shape: &Shape) -> Result<Vec<usize>> {
    shape.multi_index(linear)
}

/// Immutable dense tensor. Cloning and reshaping share the value buffer.
#[derive(Clone, Debug)]
pub struct DenseTensor {
    shape: Shape,
    values: Arc<[f64]>,
}

impl PartialEq for DenseTensor {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.values[..] == other.values[..]
    }
}

/// A matrix unfolding that is either a view of the tensor buffer or a fresh copy.
#[derive(Debug)]
pub enum Unfolding<'a> {
    View(MatrixView<'a>),
    Owned(Matrix),
}

impl Unfolding<'_> {
    pub fn view(&self) -> MatrixView<'_> {
        match self {
            Unfolding::View(v) => *v,
            Unfolding::Owned(m) => m.view(),
        }
    }

    pub fn is_view(&self) -> bool {
        matches!(self, Unfolding::View(_))
    }

    pub fn to_matrix(&self) -> Matrix {
        match self {
            Unfolding::View(v) => v.to_matrix(),
            Unfolding::Owned(m) => m.clone(),
        }
    }
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if values.len() != shape.len() {
            return Err(Error::shape(format!(
                "shape {:?} holds {} values, got {}",
                shape.dims(),
                shape.len(),
                values.len()
            )));
        }
        Ok(DenseTensor {
            shape,
            values: values.into(),
        })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let len = shape.len();
        Ok(DenseTensor {
            shape,
            values: vec![0.0; len].into(),
        })
    }

    /// Fills each element from its multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let mut idx = vec![0usize; shape.order()];
        let mut values = Vec::with_capacity(shape.len());
        for _ in 0..shape.len() {
            values.push(f(&idx));
            for (i, &d) in idx.iter_mut().zip(shape.dims()) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(DenseTensor {
            shape,
            values: values.into(),
        })
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.shape.order()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `vec(Y)`.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, multi: &[usize]) -> Result<f64> {
        Ok(self.values[self.shape.linear_index(multi)?])
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Same values, new dimensions. The value buffer is shared, not copied.
    pub fn reshape(&self, new_dims: &[usize]) -> Result<DenseTensor> {
        let shape = Shape::new(new_dims.to_vec())?;
        if shape.len() != self.len() {
            return Err(Error::shape(format!(
                "cannot reshape {} elements {:?} into {:?} ({} elements)",
                self.len(),
                self.dims(),
                new_dims,
                shape.len()
            )));
        }
        Ok(DenseTensor {
            shape,
            values: Arc::clone(&self.values),
        })
    }

    /// True when both tensors share one value buffer.
    pub fn shares_storage(&self, other: &DenseTensor) -> bool {
        Arc::ptr_eq(&self.values, &other.values)
    }

    /// Mode transposition: mode `k` of the result is mode `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<DenseTensor> {
        check_permutation(perm, self.order())?;
        let dims = perm.iter().map(|&p| self.dims()[p]).collect();
        let values = permute_values(&self.values, self.dims(), perm);
        DenseTensor::new(dims, values)
    }

    /// General unfolding `Y_{r x c}`: rows enumerate the `row_modes` and
    /// columns the `col_modes`, each linearized first-index-fastest.
    pub fn unfold(&self, row_modes: &[usize], col_modes: &[usize]) -> Result<Matrix> {
        let perm: Vec<usize> = row_modes.iter().chain(col_modes).copied().collect();
        check_permutation(&perm, self.order())?;
        let rows: usize = row_modes.iter().map(|&m| self.dims()[m]).product();
        let cols: usize = col_modes.iter().map(|&m| self.dims()[m]).product();
        let values = permute_values(&self.values, self.dims(), &perm);
        Matrix::from_col_major(rows, cols, values)
    }

    /// Mode-`n` unfolding `Y(n)` of size `I_n x J_{-n}`. Modes `0` and `N-1`
    /// are views of the tensor buffer; the others are copies.
    pub fn unfold_mode(&self, n: usize) -> Result<Unfolding<'_>> {
        let order = self.order();
        if n >= order {
            return Err(Error::argument(format!(
                "mode {n} out of range for an order-{order} tensor"
            )));
        }
        let d = self.dims()[n];
        if n == 0 {
            return Ok(Unfolding::View(MatrixView::col_major(
                &self.values,
                d,
                self.len() / d,
            )));
        }
        if n == order - 1 {
            let lead = self.len() / d;
            return Ok(Unfolding::View(
                MatrixView::col_major(&self.values, lead, d).t(),
            ));
        }
        let others: Vec<usize> = (0..order).filter(|&m| m != n).collect();
        Ok(Unfolding::Owned(self.unfold(&[n], &others)?))
    }

    /// Prefix unfolding `Y(1:n)` of size `J_n x K_n`, always a view.
    pub fn unfold_prefix(&self, n: usize) -> Result<MatrixView<'_>> {
        if n > self.order() {
            return Err(Error::argument(format!(
                "prefix of {n} modes for an order-{} tensor",
                self.order()
            )));
        }
        Ok(MatrixView::col_major(
            &self.values,
            self.shape.prefix(n),
            self.shape.suffix(n),
        ))
    }

    /// Mode-`n` tensor-vector product. The result drops mode `n`; contracting
    /// the only mode of a vector yields a one-element tensor of shape `[1]`.
    pub fn ttv(&self, v: &[f64], n: usize) -> Result<DenseTensor> {
        let order = self.order();
        if n >= order {
            return Err(Error::argument(format!(
                "mode {n} out of range for an order-{order} tensor"
            )));
        }
        let mid = self.dims()[n];
        if v.len() != mid {
            return Err(Error::shape(format!(
                "vector of length {} for mode {n} of size {mid}",
                v.len()
            )));
        }
        let pre = self.shape.prefix(n);
        let post = self.shape.suffix(n + 1);
        let mut out = vec![0.0; pre * post];
        for c in 0..post {
            let dst = &mut out[c * pre..(c + 1) * pre];
            for (i, &w) in v.iter().enumerate() {
                let start = pre * (i + mid * c);
                for (o, y) in dst.iter_mut().zip(&self.values[start..start + pre]) {
                    *o += w * y;
                }
            }
        }
        let mut dims: Vec<usize> = self.dims().to_vec();
        dims.remove(n);
        if dims.is_empty() {
            dims.push(1);
        }
        DenseTensor::new(dims, out)
    }

    /// Tensor-vector products over several distinct modes. Mode numbers refer
    /// to `self`; the products are applied from the highest mode down.
    pub fn ttv_multi(&self, vectors: &[&[f64]], modes: &[usize]) -> Result<DenseTensor> {
        if vectors.len() != modes.len() {
            return Err(Error::argument(format!(
                "{} vectors for {} modes",
                vectors.len(),
                modes.len()
            )));
        }
        let mut pairs: Vec<(usize, &[f64])> = modes.iter().copied().zip(vectors.iter().copied()).collect();
        pairs.sort_by_key(|p| std::cmp::Reverse(p.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::argument("repeated mode in tensor-vector product"));
        }
        let mut acc = self.clone();
        for (mode, v) in pairs {
            acc = acc.ttv(v, mode)?;
        }
        Ok(acc)
    }
}

pub(crate) fn check_permutation(perm: &[usize], order: usize) -> Result<()> {
    if perm.len() != order {
        return Err(Error::argument(format!(
            "permutation {perm:?} has length {}, expected {order}",
            perm.len()
        )));
    }
    let mut seen = vec![false; order];
    for &p in perm {
        if p >= order || std::mem::replace(&mut seen[p], true) {
            return Err(Error::argument(format!(
                "{perm:?} is not a permutation of 0..{order}"
            )));
        }
    }
    Ok(())
}

/// Gathers `values` (shape `dims`) into the layout of `permute(perm)`.
pub(crate) fn permute_values(values: &[f64], dims: &[usize], perm: &[usize]) -> Vec<f64> {
    let order = dims.len();
    if perm.iter().enumerate().all(|(k, &p)| k == p) {
        return values.to_vec();
    }
    let mut src_stride = vec![1usize; order];
    for m in 1..order {
        src_stride[m] = src_stride[m - 1] * dims[m - 1];
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let strides: Vec<usize> = perm.iter().map(|&p| src_stride[p]).collect();

    let mut out = Vec::with_capacity(values.len());
    let mut idx = vec![0usize; order];
    let mut base = 0usize;
    let (inner, inner_stride) = (out_dims[0], strides[0]);
    loop {
        out.extend((0..inner).map(|i| values[base + i * inner_stride]));
        let mut k = 1;
        loop {
            if k == order {
                return out;
            }
            idx[k] += 1;
            base += strides[k];
            if idx[k] < out_dims[k] {
                break;
            }
            base -= strides[k] * out_dims[k];
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dims: Vec<usize>) -> DenseTensor {
        let n: usize = dims.iter().product();
        DenseTensor::new(dims, (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    // Definition-level oracle: walk every multi-index of the source.
    fn brute_unfold(t: &DenseTensor, rows: &[usize], cols: &[usize]) -> Matrix {
        let pick = |modes: &[usize]| -> Shape {
            Shape::new(modes.iter().map(|&m| t.dims()[m]).collect()).unwrap()
        };
        let (rs, cs) = (pick(rows), pick(cols));
        let mut m = Matrix::zeros(rs.len(), cs.len());
        for lin in 0..t.len() {
            let idx = t.shape().multi_index(lin).unwrap();
            let ri: Vec<usize> = rows.iter().map(|&k| idx[k]).collect();
            let ci: Vec<usize> = cols.iter().map(|&k| idx[k]).collect();
            m[(rs.linear_index(&ri).unwrap(), cs.linear_index(&ci).unwrap())] = t.values()[lin];
        }
        m
    }

    #[test]
    fn linear_index_examples() {
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        assert_eq!(s.linear_index(&[0, 0, 0]).unwrap(), 0);
        assert_eq!(s.linear_index(&[1, 2, 3]).unwrap(), 23);
        assert_eq!(s.linear_index(&[1, 0, 1]).unwrap(), 7);
        assert_eq!(s.multi_index(7).unwrap(), vec![1, 0, 1]);
    }

    #[test]
    fn linear_index_matches_enumeration() {
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        let mut expected = 0;
        for k in 0..4 {
            for j in 0..3 {
                for i in 0..2 {
                    assert_eq!(s.linear_index(&[i, j, k]).unwrap(), expected);
                    expected += 1;
                }
            }
        }
    }

    #[test]
    fn index_errors_name_the_mode() {
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        match s.linear_index(&[0, 3, 0]) {
            Err(Error::Index { mode: 1, index: 3, size: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(s.multi_index(24), Err(Error::LinearIndex { .. })));
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![2, 0]).is_err());
    }

    #[test]
    fn prefix_suffix_products() {
        let s = Shape::new(vec![2, 3, 4, 5]).unwrap();
        for n in 0..=4 {
            assert_eq!(s.prefix(n) * s.suffix(n), s.len());
        }
        assert_eq!(s.prefix(0), 1);
        assert_eq!(s.suffix(4), 1);
        assert_eq!(s.len_without(2), 30);
    }

    #[test]
    fn reshape_is_metadata_only() {
        let t = seq(vec![2, 3, 4]);
        let r = t.reshape(&[6, 4]).unwrap();
        assert!(r.shares_storage(&t));
        assert_eq!(r.get(&[0, 0]).unwrap(), 1.0);
        assert_eq!(r.get(&[5, 3]).unwrap(), 24.0);
        assert_eq!(t.reshape(t.dims()).unwrap(), t);

        let t8 = seq(vec![2, 2, 2]);
        let m = t8.reshape(&[4, 2]).unwrap();
        let second: Vec<f64> = (0..4).map(|i| m.get(&[i, 1]).unwrap()).collect();
        assert_eq!(second, vec![5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn reshape_size_mismatch_reports_both_products() {
        let err = seq(vec![2, 3, 4]).reshape(&[5, 5]).unwrap_err().to_string();
        assert!(err.contains("24") && err.contains("25"), "{err}");
    }

    #[test]
    fn permute_examples() {
        let m = seq(vec![2, 3]);
        let t = m.permute(&[1, 0]).unwrap();
        assert_eq!(t.dims(), &[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(t.get(&[j, i]).unwrap(), m.get(&[i, j]).unwrap());
            }
        }
        let t8 = seq(vec![2, 2, 2]);
        assert_eq!(t8.permute(&[0, 1, 2]).unwrap(), t8);
        let p = t8.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.get(&[1, 0, 0]).unwrap(), 5.0);
        assert!(t8.permute(&[0, 0, 1]).is_err());
        assert!(t8.permute(&[0, 1]).is_err());
    }

    #[test]
    fn permute_matches_index_remap() {
        let t = seq(vec![2, 3, 4, 5]);
        let perm = [2, 0, 3, 1];
        let p = t.permute(&perm).unwrap();
        for lin in 0..t.len() {
            let idx = t.shape().multi_index(lin).unwrap();
            let pidx: Vec<usize> = perm.iter().map(|&k| idx[k]).collect();
            assert_eq!(p.get(&pidx).unwrap(), t.values()[lin]);
        }
    }

    #[test]
    fn unfold_mode_examples() {
        let t8 = seq(vec![2, 2, 2]);
        let u0 = t8.unfold_mode(0).unwrap();
        assert!(u0.is_view());
        assert_eq!(
            u0.to_matrix(),
            Matrix::from_rows(&[&[1.0, 3.0, 5.0, 7.0], &[2.0, 4.0, 6.0, 8.0]])
        );
        let u1 = t8.unfold_mode(1).unwrap();
        assert!(!u1.is_view());
        assert_eq!(
            u1.to_matrix(),
            Matrix::from_rows(&[&[1.0, 2.0, 5.0, 6.0], &[3.0, 4.0, 7.0, 8.0]])
        );
        let u2 = t8.unfold_mode(2).unwrap();
        assert!(u2.is_view());
        let expected = Matrix::from_rows(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]]);
        assert_eq!(u2.to_matrix(), expected);
        assert_eq!(t8.unfold_prefix(2).unwrap().t().to_matrix(), expected);
    }

    #[test]
    fn unfold_matches_definition() {
        let t = seq(vec![2, 3, 2, 3]);
        for (rows, cols) in [
            (vec![0], vec![1, 2, 3]),
            (vec![2], vec![0, 1, 3]),
            (vec![3, 1], vec![0, 2]),
            (vec![1, 3], vec![2, 0]),
        ] {
            let u = t.unfold(&rows, &cols).unwrap();
            assert_eq!(u, brute_unfold(&t, &rows, &cols));
            assert_eq!(u, t.unfold(&cols, &rows).unwrap().transpose());
        }
        assert!(t.unfold(&[0, 1], &[1, 2]).is_err());
    }

    #[test]
    fn unfold_prefix_is_view() {
        let t = seq(vec![2, 3, 4]);
        let v = t.unfold_prefix(2).unwrap();
        assert_eq!((v.rows(), v.cols()), (6, 4));
        assert!(std::ptr::eq(v.backing(), t.values()));
        assert!(t.unfold_prefix(4).is_err());
    }

    #[test]
    fn ttv_examples() {
        let t8 = seq(vec![2, 2, 2]);
        let front = t8.ttv(&[1.0, 0.0], 2).unwrap();
        assert_eq!(front.dims(), &[2, 2]);
        assert_eq!(front.values(), &[1.0, 2.0, 3.0, 4.0]);
        let summed = t8.ttv(&[1.0, 1.0], 1).unwrap();
        assert_eq!(summed.values(), &[4.0, 6.0, 12.0, 14.0]);
        let ones = [1.0, 1.0];
        let all = t8.ttv_multi(&[&ones, &ones, &ones], &[0, 1, 2]).unwrap();
        assert_eq!(all.dims(), &[1]);
        assert_eq!(all.values(), &[36.0]);
        assert!(t8.ttv(&[1.0], 0).is_err());
        assert!(t8.ttv_multi(&[&ones, &ones], &[1, 1]).is_err());
    }

    #[test]
    fn degenerate_orders() {
        let v = DenseTensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.unfold_mode(0).unwrap().to_matrix().rows(), 3);
        assert_eq!(v.ttv(&[1.0, 1.0, 1.0], 0).unwrap().values(), &[6.0]);
        let t = seq(vec![1, 3, 1]);
        assert_eq!(t.unfold_mode(1).unwrap().to_matrix().as_slice(), t.values());
    }
}
