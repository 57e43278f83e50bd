//! Dense CP (CANDECOMP/PARAFAC) decomposition built around a fast all-mode
//! MTTKRP kernel.
//!
//! The crate is organised bottom-up:
//! * [`tensor`]: shapes, dense tensors, reshape/permute/unfold, tensor-times-vector;
//! * [`kron`]: Kronecker, Khatri-Rao and Hadamard kernels;
//! * [`model`]: the Kruskal model, its cost and its gradient;
//! * [`mttkrp`]: the direct and the fast all-mode `Y(n) (⊙_{k≠n} A(k))`, with
//!   multiplication counting and closed-form counts;
//! * [`algorithms`]: ALS (direct and fast), multiplicative updates, gradient descent;
//! * [`io`]: tensor and factor file formats;
//! * [`bench`]: the timing harness behind the `fastcp bench` command.
//!
//! Modes and indices are zero-based throughout.
//!
//! With the default `parallel` feature the per-column loops run on the rayon
//! thread pool; without it everything runs sequentially. Results agree either way.

pub mod algorithms;
pub mod bench;
pub mod error;
pub mod io;
pub mod kron;
mod linalg;
pub mod matrix;
pub mod model;
pub mod mttkrp;
mod par;
pub mod tensor;

pub use algorithms::{
    als_sweep, als_update_mode, gd_step, mu_sweep, run, Algorithm, AlsVariant, RunTrace, SolveOptions,
    UpdateOrder,
};
pub use error::{Error, Result};
pub use kron::{gram_hadamard_skip, hadamard, khatri_rao, khatri_rao_skip, kron_vec, skip_kron_column};
pub use matrix::{FactorMatrix, Matrix, MatrixView};
pub use model::{cp_gradient_set, stack_gradient, GradientSet, KruskalModel};
pub use mttkrp::{
    cp_gradient_all, cp_gradient_all_with, mttkrp_direct, predicted_mult_count, select_pivot,
    pivot_order, sort_modes, CostCounter, CountVariant, FastGradient, ModeHook, ModePermutation,
};
pub use par::is_parallel;
pub use tensor::{linear_index, multi_index, DenseTensor, Shape, Unfolding};
