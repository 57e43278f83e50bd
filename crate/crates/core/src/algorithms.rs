//! CP fitting algorithms driven by the MTTKRP kernels.
//!
//! * ALS, with the per-mode gradients from the direct route or from the fast
//!   all-mode pass (each factor is updated as soon as its gradient is ready,
//!   so the sweep follows the pivot order);
//! * multiplicative updates for nonnegative data;
//! * plain gradient descent.

use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::kron::gram_hadamard_skip;
use crate::linalg::pinv_symmetric;
use crate::matrix::{FactorMatrix, Matrix};
use crate::model::{relative, KruskalModel};
use crate::mttkrp::{
    check_model_shapes, mttkrp_direct, pivot_order, CostCounter, FastGradient,
};
use crate::tensor::DenseTensor;

/// Guard added to multiplicative-update denominators.
pub const MU_EPSILON: f64 = 1e-12;

/// Mode order for the sweeps that let the caller choose it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum UpdateOrder {
    /// `0, 1, .., N-1`.
    #[default]
    Standard,
    /// The order of the fast pass: pivot down to 0, then upward.
    Pivot,
    /// Any permutation of the modes.
    Custom(Vec<usize>),
}

impl UpdateOrder {
    pub fn modes(&self, dims: &[usize]) -> Result<Vec<usize>> {
        match self {
            UpdateOrder::Standard => Ok((0..dims.len()).collect()),
            UpdateOrder::Pivot => {
                if dims.len() == 1 {
                    Ok(vec![0])
                } else {
                    pivot_order(dims)
                }
            }
            UpdateOrder::Custom(order) => {
                crate::tensor::check_permutation(order, dims.len())?;
                Ok(order.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop once the relative change of the cost falls below this; 0 disables.
    pub tol: f64,
    /// Relative eigenvalue cutoff of the ALS pseudo-inverse.
    pub pinv_rtol: f64,
    /// Mode order for direct ALS and multiplicative updates. Fast ALS always
    /// runs in pivot order.
    pub order: UpdateOrder,
    pub seed: u64,
    /// Gradient-descent step size.
    pub step_size: f64,
    /// Evaluate the cost after every iteration. Turning this off leaves NaN in
    /// the trace and requires `tol == 0`.
    pub track_cost: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 20,
            tol: 0.0,
            pinv_rtol: 1e-12,
            order: UpdateOrder::Standard,
            seed: 0,
            step_size: 1e-3,
            track_cost: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::argument("max_iters must be at least 1"));
        }
        if [self.tol, self.pinv_rtol].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::argument("tolerances must be nonnegative"));
        }
        if !self.track_cost && self.tol > 0.0 {
            return Err(Error::argument("a stopping tolerance needs cost tracking"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algorithm {
    AlsDirect,
    AlsFast,
    Mu,
    Gd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AlsDirect => "als-direct",
            Algorithm::AlsFast => "als-fast",
            Algorithm::Mu => "mu",
            Algorithm::Gd => "gd",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "als-direct" => Ok(Algorithm::AlsDirect),
            "als-fast" => Ok(Algorithm::AlsFast),
            "mu" => Ok(Algorithm::Mu),
            "gd" => Ok(Algorithm::Gd),
            other => Err(Error::argument(format!(
                "unknown algorithm {other:?} (expected als-direct, als-fast, mu or gd)"
            ))),
        }
    }
}

/// Per-iteration record of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub cost: Vec<f64>,
    pub rel_error: Vec<f64>,
    /// Wall-clock seconds of each sweep, excluding cost evaluation.
    pub seconds: Vec<f64>,
    /// Multiplications counted by the MTTKRP kernels, cumulative.
    pub mults: Vec<u64>,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.seconds.len()
    }

    pub fn total_seconds(&self) -> f64 {
        self.seconds.iter().sum()
    }
}

/// Least-squares update `A(n) = M (⊛_{k≠n} A(k)^T A(k))^†` for the MTTKRP
/// `M` of mode `n`.
pub fn als_update_mode(
    model: &KruskalModel,
    n: usize,
    gradient: &Matrix,
    pinv_rtol: f64,
) -> Result<FactorMatrix> {
    als_update(model.factors(), n, gradient, pinv_rtol)
}

fn als_update(factors: &[FactorMatrix], n: usize, m: &Matrix, rtol: f64) -> Result<FactorMatrix> {
    if n >= factors.len() {
        return Err(Error::argument(format!("mode {n} out of range")));
    }
    if (m.rows(), m.cols()) != (factors[n].rows(), factors[n].cols()) {
        return Err(Error::shape(format!(
            "gradient is {}x{}, factor {n} is {}x{}",
            m.rows(),
            m.cols(),
            factors[n].rows(),
            factors[n].cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::Numeric(format!("non-finite gradient for mode {n}")));
    }
    let v = gram_hadamard_skip(factors, n)?;
    let updated = m.matmul(&pinv_symmetric(&v, rtol)?)?;
    if !updated.is_finite() {
        return Err(Error::Numeric(format!("ALS update of mode {n} is not finite")));
    }
    Ok(updated)
}

/// Which MTTKRP route an ALS sweep uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlsVariant {
    Direct,
    Fast,
}

/// One ALS sweep over all modes.
///
/// The direct variant visits modes in `opts.order`; the fast variant runs the
/// all-mode pass and updates each factor inside it, in pivot order.
pub fn als_sweep(
    y: &DenseTensor,
    model: &KruskalModel,
    opts: &SolveOptions,
    variant: AlsVariant,
    counter: &mut CostCounter,
) -> Result<KruskalModel> {
    check_model_shapes(y, model.factors())?;
    match variant {
        AlsVariant::Direct => direct_sweep(y, model, &opts.order.modes(y.dims())?, opts.pinv_rtol, counter),
        AlsVariant::Fast if y.order() == 1 => direct_sweep(y, model, &[0], opts.pinv_rtol, counter),
        AlsVariant::Fast => fast_sweep(&FastGradient::new(y)?, model, opts.pinv_rtol, counter),
    }
}

fn direct_sweep(
    y: &DenseTensor,
    model: &KruskalModel,
    order: &[usize],
    rtol: f64,
    counter: &mut CostCounter,
) -> Result<KruskalModel> {
    let mut factors = model.factors().to_vec();
    for &n in order {
        let m = mttkrp_direct(y, &factors, n, counter)?;
        factors[n] = als_update(&factors, n, &m, rtol)?;
    }
    KruskalModel::new(factors)
}

fn fast_sweep(
    fg: &FastGradient,
    model: &KruskalModel,
    rtol: f64,
    counter: &mut CostCounter,
) -> Result<KruskalModel> {
    let mut factors = model.factors().to_vec();
    let mut hook = |n: usize, m: &Matrix, current: &[FactorMatrix]| als_update(current, n, m, rtol).map(Some);
    fg.gradients_with(&mut factors, counter, &mut hook)?;
    KruskalModel::new(factors)
}

fn check_nonnegative(y: &DenseTensor, model: &KruskalModel) -> Result<()> {
    if y.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("multiplicative updates need a nonnegative tensor".into()));
    }
    if model.factors().iter().any(|a| a.as_slice().iter().any(|&v| v < 0.0)) {
        return Err(Error::Domain("multiplicative updates need nonnegative factors".into()));
    }
    Ok(())
}

fn mu_update(factors: &[FactorMatrix], n: usize, m: &Matrix) -> Result<FactorMatrix> {
    let a = &factors[n];
    let denom = a.matmul(&gram_hadamard_skip(factors, n)?)?;
    let data = a
        .as_slice()
        .iter()
        .zip(m.as_slice())
        .zip(denom.as_slice())
        .map(|((&av, &mv), &dv)| av * mv / (dv + MU_EPSILON))
        .collect();
    Matrix::from_col_major(a.rows(), a.cols(), data)
}

/// One sweep of multiplicative updates
/// `A(n) <- A(n) ⊛ M(n) ⊘ (A(n) (⊛_{k≠n} A(k)^T A(k)) + ε)`.
///
/// `Standard` and `Custom` orders take each numerator from the direct route;
/// `Pivot` updates inside the fast all-mode pass.
pub fn mu_sweep(
    y: &DenseTensor,
    model: &KruskalModel,
    order: &UpdateOrder,
    counter: &mut CostCounter,
) -> Result<KruskalModel> {
    check_model_shapes(y, model.factors())?;
    check_nonnegative(y, model)?;
    if *order == UpdateOrder::Pivot && y.order() > 1 {
        return mu_sweep_fast(&FastGradient::new(y)?, model, counter);
    }
    let mut factors = model.factors().to_vec();
    for n in order.modes(y.dims())? {
        let m = mttkrp_direct(y, &factors, n, counter)?;
        factors[n] = mu_update(&factors, n, &m)?;
    }
    KruskalModel::new(factors)
}

fn mu_sweep_fast(fg: &FastGradient, model: &KruskalModel, counter: &mut CostCounter) -> Result<KruskalModel> {
    let mut factors = model.factors().to_vec();
    let mut hook = |n: usize, m: &Matrix, current: &[FactorMatrix]| mu_update(current, n, m).map(Some);
    fg.gradients_with(&mut factors, counter, &mut hook)?;
    KruskalModel::new(factors)
}

/// `a <- a - η g` with every factor moved from the same starting point.
pub fn gd_step(y: &DenseTensor, model: &KruskalModel, eta: f64) -> Result<KruskalModel> {
    if eta <= 0.0 || !eta.is_finite() {
        return Err(Error::argument(format!("step size must be positive, got {eta}")));
    }
    descend(y, model, eta, &mut CostCounter::new())
}

fn descend(y: &DenseTensor, model: &KruskalModel, eta: f64, counter: &mut CostCounter) -> Result<KruskalModel> {
    check_model_shapes(y, model.factors())?;
    let m = crate::model::mttkrp_all(y, model.factors(), counter)?;
    let grads = crate::model::cp_gradient_set(y, model, &m)?;
    // ∂D/∂A(n) = -2 G(n).
    let factors = model
        .factors()
        .iter()
        .zip(grads.modes())
        .map(|(a, g)| {
            let data = a.as_slice().iter().zip(g.as_slice()).map(|(av, gv)| av + 2.0 * eta * gv).collect();
            Matrix::from_col_major(a.rows(), a.cols(), data)
        })
        .collect::<Result<Vec<_>>>()?;
    let next = KruskalModel::new(factors)?;
    Ok(next)
}

/// Runs `algorithm` from `init` for up to `opts.max_iters` sweeps.
pub fn run(
    y: &DenseTensor,
    init: &KruskalModel,
    opts: &SolveOptions,
    algorithm: Algorithm,
) -> Result<(KruskalModel, RunTrace)> {
    opts.validate()?;
    check_model_shapes(y, init.factors())?;
    if algorithm == Algorithm::Gd && (opts.step_size.is_nan() || opts.step_size <= 0.0) {
        return Err(Error::argument(format!("step size must be positive, got {}", opts.step_size)));
    }
    if algorithm == Algorithm::Mu {
        check_nonnegative(y, init)?;
    }
    let fast = if algorithm == Algorithm::AlsFast && y.order() > 1 {
        Some(FastGradient::new(y)?)
    } else {
        None
    };
    let direct_order = opts.order.modes(y.dims())?;
    let norm = y.norm();
    let mut counter = CostCounter::new();
    let mut trace = RunTrace::default();
    let mut model = init.clone();
    let mut previous = if opts.track_cost && opts.tol > 0.0 { init.cost(y)? } else { f64::NAN };

    for _ in 0..opts.max_iters {
        let start = Instant::now();
        model = match algorithm {
            Algorithm::AlsDirect => direct_sweep(y, &model, &direct_order, opts.pinv_rtol, &mut counter)?,
            Algorithm::AlsFast => match &fast {
                Some(fg) => fast_sweep(fg, &model, opts.pinv_rtol, &mut counter)?,
                None => direct_sweep(y, &model, &[0], opts.pinv_rtol, &mut counter)?,
            },
            Algorithm::Mu => mu_sweep(y, &model, &opts.order, &mut counter)?,
            Algorithm::Gd => descend(y, &model, opts.step_size, &mut counter)?,
        };
        trace.seconds.push(start.elapsed().as_secs_f64());
        trace.mults.push(counter.total());

        let cost = if opts.track_cost { model.cost(y)? } else { f64::NAN };
        trace.cost.push(cost);
        trace.rel_error.push(relative(cost, norm));
        if opts.tol > 0.0 {
            let change = (previous - cost).abs() / previous.max(f64::EPSILON);
            previous = cost;
            if change < opts.tol {
                break;
            }
        }
    }
    Ok((model, trace))
}
