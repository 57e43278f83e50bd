//! The Kruskal model `Ŷ = Σ_r a_r(0) ∘ a_r(1) ∘ .. ∘ a_r(N-1)`, its
//! least-squares cost against a data tensor, and the cost gradient.

use rand::distributions::Open01;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kron::{check_factors, gram_hadamard_skip, khatri_rao_skip};
use crate::matrix::{axpy, dot, FactorMatrix, Matrix};
use crate::mttkrp::{check_model_shapes, cp_gradient_all, mttkrp_direct, CostCounter};
use crate::tensor::DenseTensor;

/// Above this many entries the cost is evaluated without forming `Ŷ`.
const MATERIALIZE_LIMIT: usize = 1_000_000;

/// A rank-`R` CP model: one `I_n x R` factor per mode. Scale lives inside
/// the factors; there is no separate weight vector.
#[derive(Clone, Debug, PartialEq)]
pub struct KruskalModel {
    factors: Vec<FactorMatrix>,
    rank: usize,
}

impl KruskalModel {
    pub fn new(factors: Vec<FactorMatrix>) -> Result<Self> {
        let rank = check_factors(&factors)?;
        Ok(KruskalModel { factors, rank })
    }

    /// Entries drawn independently from uniform(0, 1).
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) || rank == 0 {
            return Err(Error::shape(format!(
                "cannot build a rank-{rank} model for dims {dims:?}"
            )));
        }
        let factors = dims
            .iter()
            .map(|&d| {
                let data = (0..d * rank).map(|_| rng.sample::<f64, _>(Open01)).collect();
                Matrix::from_col_major(d, rank, data)
            })
            .collect::<Result<Vec<_>>>()?;
        KruskalModel::new(factors)
    }

    pub fn random_seeded(dims: &[usize], rank: usize, seed: u64) -> Result<Self> {
        KruskalModel::random(dims, rank, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    pub fn factors(&self) -> &[FactorMatrix] {
        &self.factors
    }

    pub fn factor(&self, n: usize) -> &FactorMatrix {
        &self.factors[n]
    }

    pub fn into_factors(self) -> Vec<FactorMatrix> {
        self.factors
    }

    /// Replaces factor `n`; the replacement must keep its shape.
    pub fn set_factor(&mut self, n: usize, a: FactorMatrix) -> Result<()> {
        let old = self
            .factors
            .get(n)
            .ok_or_else(|| Error::argument(format!("mode {n} out of range")))?;
        if (a.rows(), a.cols()) != (old.rows(), old.cols()) {
            return Err(Error::shape(format!(
                "factor {n} must stay {}x{}, got {}x{}",
                old.rows(),
                old.cols(),
                a.rows(),
                a.cols()
            )));
        }
        self.factors[n] = a;
        Ok(())
    }

    /// The reconstructed tensor `Ŷ`.
    pub fn full(&self) -> DenseTensor {
        let rows = self.factors[0].rows();
        let kr = khatri_rao_skip(&self.factors, 0).expect("validated factors");
        let mut values = vec![0.0; rows * kr.rows()];
        // Mode-0 unfolding of Ŷ is A(0) times the transposed Khatri-Rao product.
        for (j, block) in values.chunks_mut(rows).enumerate() {
            for r in 0..self.rank {
                let w = kr[(j, r)];
                if w != 0.0 {
                    axpy(w, self.factors[0].col(r), block);
                }
            }
        }
        DenseTensor::new(self.dims(), values).expect("dims match the factors")
    }

    /// `D = ||Y - Ŷ||_F^2`.
    pub fn cost(&self, y: &DenseTensor) -> Result<f64> {
        check_model_shapes(y, &self.factors)?;
        if y.len() <= MATERIALIZE_LIMIT {
            Ok(self.cost_materialized(y))
        } else {
            self.cost_by_grams(y)
        }
    }

    /// `||Y - Ŷ||_F / ||Y||_F`; zero data gives 0 for a perfect fit and
    /// infinity otherwise.
    pub fn relative_error(&self, y: &DenseTensor) -> Result<f64> {
        Ok(relative(self.cost(y)?, y.norm()))
    }

    pub(crate) fn cost_materialized(&self, y: &DenseTensor) -> f64 {
        let full = self.full();
        y.values()
            .iter()
            .zip(full.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `||Y||^2 - 2 <Y, Ŷ> + ||Ŷ||^2` with `||Ŷ||^2` from the factor Grams,
    /// never forming `Ŷ`. Clamped at zero against cancellation.
    pub(crate) fn cost_by_grams(&self, y: &DenseTensor) -> Result<f64> {
        let m0 = mttkrp_direct(y, &self.factors, 0, &mut CostCounter::new())?;
        let inner: f64 = (0..self.rank).map(|r| dot(m0.col(r), self.factors[0].col(r))).sum();
        let mut grams = Matrix::filled(self.rank, self.rank, 1.0);
        for a in &self.factors {
            grams = grams.hadamard(&a.gram())?;
        }
        let model_sq: f64 = grams.as_slice().iter().sum();
        Ok((y.norm_sq() - 2.0 * inner + model_sq).max(0.0))
    }

    /// Gradient set at this model, using the fast all-mode kernel.
    pub fn gradient(&self, y: &DenseTensor) -> Result<GradientSet> {
        let mut counter = CostCounter::new();
        let m = mttkrp_all(y, &self.factors, &mut counter)?;
        cp_gradient_set(y, self, &m)
    }

    /// Same model with every rank-one term's columns rescaled to a common
    /// norm. `full()` is unchanged; meant for reporting.
    pub fn balanced(&self) -> KruskalModel {
        let mut factors = self.factors.clone();
        let order = factors.len() as f64;
        for r in 0..self.rank {
            let norms: Vec<f64> = factors.iter().map(|a| dot(a.col(r), a.col(r)).sqrt()).collect();
            if norms.contains(&0.0) {
                continue;
            }
            let target = norms.iter().map(|v| v.ln()).sum::<f64>() / order;
            let target = target.exp();
            for (a, nrm) in factors.iter_mut().zip(&norms) {
                a.col_mut(r).iter_mut().for_each(|v| *v *= target / nrm);
            }
        }
        KruskalModel {
            factors,
            rank: self.rank,
        }
    }
}

pub(crate) fn relative(cost: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        cost.sqrt() / norm
    } else if cost == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Every mode's MTTKRP; order-1 tensors go through the direct route.
pub(crate) fn mttkrp_all(
    y: &DenseTensor,
    factors: &[FactorMatrix],
    counter: &mut CostCounter,
) -> Result<Vec<Matrix>> {
    if y.order() == 1 {
        Ok(vec![mttkrp_direct(y, factors, 0, counter)?])
    } else {
        cp_gradient_all(y, factors, counter)
    }
}

/// Per-mode gradient matrices `G(n) = E(n) (⊙_{k≠n} A(k))` of the residual
/// `E = Y - Ŷ`. The derivative of the cost is `-2 G(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    modes: Vec<Matrix>,
}

impl GradientSet {
    pub fn new(modes: Vec<Matrix>) -> Self {
        GradientSet { modes }
    }

    pub fn modes(&self) -> &[Matrix] {
        &self.modes
    }

    pub fn mode(&self, n: usize) -> &Matrix {
        &self.modes[n]
    }

    /// Length of the stacked vector, `R * Σ I_n`.
    pub fn len(&self) -> usize {
        self.modes.iter().map(|g| g.as_slice().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `∂D/∂a` with `a = [vec A(0); vec A(1); ..]`.
    pub fn stack(&self) -> Vec<f64> {
        self.modes
            .iter()
            .flat_map(|g| g.as_slice().iter().map(|v| -2.0 * v))
            .collect()
    }

    /// Inverse of [`GradientSet::stack`] for the given factor shapes.
    pub fn unstack(g: &[f64], dims: &[usize], rank: usize) -> Result<GradientSet> {
        let total: usize = dims.iter().map(|d| d * rank).sum();
        if g.len() != total {
            return Err(Error::shape(format!(
                "stacked gradient has {} entries, dims {dims:?} at rank {rank} need {total}",
                g.len()
            )));
        }
        let mut offset = 0;
        let modes = dims
            .iter()
            .map(|&d| {
                let part = &g[offset..offset + d * rank];
                offset += d * rank;
                Matrix::from_col_major(d, rank, part.iter().map(|v| -0.5 * v).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GradientSet { modes })
    }
}

/// `G(n) = M(n) - A(n) (⊛_{k≠n} A(k)^T A(k))` where `M(n)` is the data MTTKRP.
/// The residual tensor is never formed.
pub fn cp_gradient_set(
    y: &DenseTensor,
    model: &KruskalModel,
    mttkrp_results: &[Matrix],
) -> Result<GradientSet> {
    check_model_shapes(y, model.factors())?;
    if mttkrp_results.len() != model.order() {
        return Err(Error::shape(format!(
            "{} MTTKRP results for an order-{} model",
            mttkrp_results.len(),
            model.order()
        )));
    }
    let modes = mttkrp_results
        .iter()
        .enumerate()
        .map(|(n, m)| {
            let a = model.factor(n);
            if (m.rows(), m.cols()) != (a.rows(), a.cols()) {
                return Err(Error::shape(format!(
                    "MTTKRP result {n} is {}x{}, factor is {}x{}",
                    m.rows(),
                    m.cols(),
                    a.rows(),
                    a.cols()
                )));
            }
            let v = gram_hadamard_skip(model.factors(), n)?;
            m.sub(&a.matmul(&v)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientSet { modes })
}

/// Stacked cost gradient `g = ∂D/∂a`.
pub fn stack_gradient(gs: &GradientSet) -> Vec<f64> {
    gs.stack()
}
