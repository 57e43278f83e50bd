//! Property tests for the structural invariants of tensors, Kronecker
//! kernels, gradients and the update rules.

mod common;

use common::*;
use fastcp::{
    cp_gradient_all, gd_step, khatri_rao, mttkrp_direct, mu_sweep, sort_modes, CostCounter, DenseTensor,
    KruskalModel, Shape, UpdateOrder,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dims_strategy(orders: std::ops::RangeInclusive<usize>, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    orders.prop_flat_map(move |n| prop::collection::vec(1..=max_dim, n))
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_round_trip(dims in dims_strategy(1..=5, 6)) {
        let shape = Shape::new(dims.clone()).unwrap();
        for lin in 0..shape.len() {
            let multi = shape.multi_index(lin).unwrap();
            prop_assert_eq!(&multi, &unravel(lin, &dims));
            prop_assert_eq!(shape.linear_index(&multi).unwrap(), lin);
        }
    }

    #[test]
    fn reshape_keeps_value_sequence(dims in dims_strategy(1..=4, 6), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng, -1.0, 1.0);
        let flat = t.reshape(&[t.len()]).unwrap();
        let back = flat.reshape(&dims).unwrap();
        prop_assert!(back.values().iter().zip(t.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn permute_then_inverse_is_identity(dims in dims_strategy(1..=5, 5), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng, -1.0, 1.0);
        let mut perm: Vec<usize> = (0..dims.len()).collect();
        perm.reverse();
        perm.rotate_left((seed % dims.len() as u64) as usize);
        let mut inverse = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        let p = t.permute(&perm).unwrap();
        for lin in 0..t.len() {
            let idx = unravel(lin, &dims);
            let moved: Vec<usize> = perm.iter().map(|&k| idx[k]).collect();
            prop_assert_eq!(p.get(&moved).unwrap(), t.values()[lin]);
        }
        let back = p.permute(&inverse).unwrap();
        prop_assert_eq!(back.values(), t.values());
    }

    #[test]
    fn unfold_matches_definition_and_transposes(dims in dims_strategy(2..=4, 5), split in 1usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng, -1.0, 1.0);
        let split = split.min(dims.len() - 1);
        let rows: Vec<usize> = (0..dims.len()).rev().take(split).collect();
        let cols: Vec<usize> = (0..dims.len()).filter(|m| !rows.contains(m)).collect();
        let m = t.unfold(&rows, &cols).unwrap();
        let row_dims: Vec<usize> = rows.iter().map(|&k| dims[k]).collect();
        let col_dims: Vec<usize> = cols.iter().map(|&k| dims[k]).collect();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let mut idx = vec![0; dims.len()];
                for (k, v) in rows.iter().zip(unravel(i, &row_dims)) {
                    idx[*k] = v;
                }
                for (k, v) in cols.iter().zip(unravel(j, &col_dims)) {
                    idx[*k] = v;
                }
                prop_assert_eq!(m[(i, j)], t.get(&idx).unwrap());
            }
        }
        prop_assert_eq!(t.unfold(&cols, &rows).unwrap(), m.transpose());
    }

    #[test]
    fn ttv_matches_unfolding(dims in dims_strategy(2..=4, 5), mode in 0usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = mode % dims.len();
        let t = random_tensor(&dims, &mut rng, -1.0, 1.0);
        let v = random_matrix(dims[n], 1, &mut rng, -1.0, 1.0);
        let got = t.ttv(v.as_slice(), n).unwrap();
        let expect = t.unfold_mode(n).unwrap().to_matrix().transpose().matmul(&v).unwrap();
        prop_assert!(rel_close(got.values(), expect.as_slice(), 1e-13));
    }

    #[test]
    fn ttv_commutes(dims in dims_strategy(3..=4, 5), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng, -1.0, 1.0);
        let (a, b) = (0, dims.len() - 1);
        let va = random_matrix(dims[a], 1, &mut rng, -1.0, 1.0);
        let vb = random_matrix(dims[b], 1, &mut rng, -1.0, 1.0);
        let ab = t.ttv(va.as_slice(), a).unwrap().ttv(vb.as_slice(), b - 1).unwrap();
        let ba = t.ttv(vb.as_slice(), b).unwrap().ttv(va.as_slice(), a).unwrap();
        prop_assert!(rel_close(ab.values(), ba.values(), 1e-13));
    }

    #[test]
    fn khatri_rao_gram_identity(rows_x in 1usize..6, rows_y in 1usize..6, rank in 1usize..5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(rows_x, rank, &mut rng, -1.0, 1.0);
        let y = random_matrix(rows_y, rank, &mut rng, -1.0, 1.0);
        let lhs = khatri_rao(&x, &y).unwrap().gram();
        let rhs = x.gram().hadamard(&y.gram()).unwrap();
        prop_assert!(rel_close(lhs.as_slice(), rhs.as_slice(), 1e-12));
    }

    #[test]
    fn fast_equals_direct(dims in dims_strategy(2..=5, 5), rank in 1usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_tensor(&dims, &mut rng, 0.0, 1.0);
        let factors = random_factors(&dims, rank, &mut rng, 0.0, 1.0);
        let fast = cp_gradient_all(&y, &factors, &mut CostCounter::new()).unwrap();
        for (n, g) in fast.iter().enumerate() {
            let direct = mttkrp_direct(&y, &factors, n, &mut CostCounter::new()).unwrap();
            prop_assert!(max_rel_err(g, &direct) <= 1e-12);
        }
    }

    #[test]
    fn permutation_soundness(dims in dims_strategy(3..=5, 5), rank in 1usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_tensor(&dims, &mut rng, 0.0, 1.0);
        let factors = random_factors(&dims, rank, &mut rng, 0.0, 1.0);
        let plain = cp_gradient_all(&y, &factors, &mut CostCounter::new()).unwrap();
        let (sorted_y, sorted_factors, record) = sort_modes(&y, &factors).unwrap();
        let mut ascending = sorted_y.dims().to_vec();
        ascending.sort_unstable();
        prop_assert_eq!(sorted_y.dims(), &ascending[..]);
        let on_sorted = cp_gradient_all(&sorted_y, &sorted_factors, &mut CostCounter::new()).unwrap();
        let restored = record.restore(on_sorted);
        for (a, b) in restored.iter().zip(&plain) {
            prop_assert!(max_rel_err(a, b) <= 1e-12);
        }
    }

    #[test]
    fn gradient_columns_are_independent(dims in dims_strategy(3..=4, 5), rank in 2usize..5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_tensor(&dims, &mut rng, 0.0, 1.0);
        let factors = random_factors(&dims, rank, &mut rng, 0.0, 1.0);
        let full = cp_gradient_all(&y, &factors, &mut CostCounter::new()).unwrap();
        let r = (seed % rank as u64) as usize;
        let single: Vec<_> = factors
            .iter()
            .map(|a| fastcp::Matrix::from_columns(&[a.col(r).to_vec()]).unwrap())
            .collect();
        let alone = cp_gradient_all(&y, &single, &mut CostCounter::new()).unwrap();
        for (g, s) in full.iter().zip(&alone) {
            prop_assert!(rel_close(g.col(r), s.col(0), 1e-13));
        }
    }

    #[test]
    fn cost_invariant_under_rescaling(dims in dims_strategy(2..=4, 5), rank in 1usize..4, c in prop_oneof![-8.0..-0.125f64, 0.125..8.0f64], seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_tensor(&dims, &mut rng, -1.0, 1.0);
        let mut factors = random_factors(&dims, rank, &mut rng, -1.0, 1.0);
        let before = KruskalModel::new(factors.clone()).unwrap().cost(&y).unwrap();
        let r = (seed % rank as u64) as usize;
        factors[0].col_mut(r).iter_mut().for_each(|v| *v *= c);
        factors[1].col_mut(r).iter_mut().for_each(|v| *v /= c);
        let after = KruskalModel::new(factors).unwrap().cost(&y).unwrap();
        prop_assert!((after - before).abs() <= 1e-12 * before.max(1.0));
    }

    #[test]
    fn mu_keeps_factors_nonnegative(dims in dims_strategy(3..=4, 5), rank in 1usize..4, pivot: bool, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_tensor(&dims, &mut rng, 0.0, 1.0);
        let mut model = KruskalModel::new(random_factors(&dims, rank, &mut rng, 0.0, 1.0)).unwrap();
        let order = if pivot { UpdateOrder::Pivot } else { UpdateOrder::Standard };
        for _ in 0..5 {
            model = mu_sweep(&y, &model, &order, &mut CostCounter::new()).unwrap();
            prop_assert!(model.factors().iter().all(|a| a.as_slice().iter().all(|&v| v >= 0.0)));
        }
    }
}

/// A step well inside the descent region of the local quadratic model
/// lowers the cost.
#[test]
fn gd_small_step_descends() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let dims = vec![4, 3, 5];
        let y = random_tensor(&dims, &mut rng, -1.0, 1.0);
        let model = KruskalModel::new(random_factors(&dims, 2, &mut rng, -1.0, 1.0)).unwrap();
        let g: f64 = model.gradient(&y).unwrap().stack().iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = model.factors().iter().map(|a| a.max_abs()).fold(1.0, f64::max);
        let eta = 0.5 / (2.0 * g * scale);
        let next = gd_step(&y, &model, eta).unwrap();
        assert!(next.cost(&y).unwrap() < model.cost(&y).unwrap());
    }
}

#[test]
fn unfold_of_full_model_is_factor_times_khatri_rao() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dims = [3, 4, 2, 3];
    let model = KruskalModel::new(random_factors(&dims, 3, &mut rng, -1.0, 1.0)).unwrap();
    let full: DenseTensor = model.full();
    for n in 0..dims.len() {
        let kr = fastcp::khatri_rao_skip(model.factors(), n).unwrap();
        let expect = model.factor(n).matmul(&kr.transpose()).unwrap();
        let got = full.unfold_mode(n).unwrap().to_matrix();
        assert!(rel_close(got.as_slice(), expect.as_slice(), 1e-12));
    }
}
