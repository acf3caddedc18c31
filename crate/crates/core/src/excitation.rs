//! Block-Hankel matrices, periodic persistent excitation and the data-based
//! representation of restricted behaviors.

use nalgebra::DMatrix;

use crate::behavior::behavior_basis;
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, span_contains, subspace_equal, vstack, DEFAULT_RANK_TOL};
use crate::model::{LtpSystem, Trajectory};

fn check_depth(len: usize, k: usize) -> Result<()> {
    if k == 0 || k > len {
        return Err(Error::InvalidArgument(format!(
            "Hankel depth {k} outside [1, {len}]"
        )));
    }
    Ok(())
}

/// Depth-`k` block-Hankel matrix of `z` (`q x M`, one column per sample).
/// Column `j` is `[z_j; z_{j+1}; ...; z_{j+k-1}]`.
pub fn hankel(z: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    periodic_hankel(z, k, 1)
}

/// Every `period`-th column of [`hankel`], starting with column 0.
pub fn periodic_hankel(z: &DMatrix<f64>, k: usize, period: usize) -> Result<DMatrix<f64>> {
    let (q, len) = z.shape();
    check_depth(len, k)?;
    if period == 0 {
        return Err(Error::InvalidArgument("period must be positive".into()));
    }
    let cols = (len - k) / period + 1;
    let mut h = DMatrix::zeros(q * k, cols);
    for j in 0..cols {
        for i in 0..k {
            h.view_mut((i * q, j), (q, 1))
                .copy_from(&z.column(j * period + i));
        }
    }
    Ok(h)
}

/// Whether `z` is `period`-periodically persistently exciting of order `k`.
pub fn is_ppe(z: &DMatrix<f64>, k: usize, period: usize) -> Result<bool> {
    let h = periodic_hankel(z, k, period)?;
    Ok(numerical_rank(&h, DEFAULT_RANK_TOL) == h.nrows())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FundamentalCheck {
    /// The data span equals the restricted behavior.
    pub holds: bool,
    /// The data span lies inside the restricted behavior.
    pub inclusion: bool,
    pub span_rank: usize,
    pub behavior_dim: usize,
}

/// `[H(u); H(y)]` with depth `k` and column stride `period`.
pub fn trajectory_hankel(w: &Trajectory, k: usize, period: usize) -> Result<DMatrix<f64>> {
    let hu = periodic_hankel(&w.u_matrix(), k, period)?;
    let hy = periodic_hankel(&w.y_matrix(), k, period)?;
    Ok(vstack(&[&hu, &hy]))
}

/// Compares the column span of the periodic Hankel matrix of `w_data` with the
/// behavior of `sys` on `[start, start + k)`.
pub fn fundamental_check(sys: &LtpSystem, w_data: &Trajectory, k: usize) -> Result<FundamentalCheck> {
    if w_data.len() < k {
        return Err(Error::InsufficientData(format!(
            "trajectory of length {} is shorter than depth {k}",
            w_data.len()
        )));
    }
    let data = trajectory_hankel(w_data, k, sys.period())?;
    let behavior = behavior_basis(sys, w_data.start, w_data.start + k as i64 - 1)?;
    Ok(FundamentalCheck {
        holds: subspace_equal(&data, &behavior.basis, DEFAULT_RANK_TOL)?,
        inclusion: span_contains(&behavior.basis, &data, DEFAULT_RANK_TOL)?,
        span_rank: numerical_rank(&data, DEFAULT_RANK_TOL),
        behavior_dim: behavior.rank(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbed::{gaussian_matrix, random_ltp, alternating_gain};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn row(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, v.len(), v)
    }

    #[test]
    fn scalar_hankel() {
        let h = hankel(&row(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0]));
        let full = hankel(&row(&[1.0, 2.0, 3.0]), 3).unwrap();
        assert_eq!(full.shape(), (3, 1));
        assert!(hankel(&row(&[1.0]), 2).is_err());
        assert!(hankel(&row(&[1.0]), 0).is_err());
    }

    #[test]
    fn hankel_index_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let z = gaussian_matrix(&mut rng, 2, 7);
        let h = hankel(&z, 3).unwrap();
        assert_eq!(h.shape(), (6, 5));
        for j in 0..5 {
            for i in 0..3 {
                for c in 0..2 {
                    assert_eq!(h[(i * 2 + c, j)], z[(c, i + j)]);
                }
            }
        }
    }

    #[test]
    fn periodic_scalar_hankel() {
        let z = row(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let h = periodic_hankel(&z, 2, 2).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]));
        assert_eq!(periodic_hankel(&z, 2, 1).unwrap(), hankel(&z, 2).unwrap());
    }

    #[test]
    fn periodic_hankel_slices_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = gaussian_matrix(&mut rng, 1, 11);
        let full = hankel(&z, 3).unwrap();
        let per = periodic_hankel(&z, 3, 2).unwrap();
        assert_eq!(per.ncols(), (11 - 3) / 2 + 1);
        for j in 0..per.ncols() {
            assert_eq!(per.column(j), full.column(2 * j));
        }
    }

    #[test]
    fn ppe_of_random_and_zero_signals() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (k, period) = (4, 2);
        let len = 3 * (k * period) + k;
        let z = gaussian_matrix(&mut rng, 1, len);
        assert!(is_ppe(&z, k, period).unwrap());
        for lower in 1..k {
            assert!(is_ppe(&z, lower, period).unwrap());
        }
        assert!(!is_ppe(&DMatrix::zeros(1, len), k, period).unwrap());
    }

    fn simulate_random_input(sys: &LtpSystem, start: i64, len: usize, seed: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = gaussian_matrix(&mut rng, sys.m(), len);
        let x0 = DVector::from_fn(sys.n(), |_, _| 0.3);
        sys.simulate(start, &x0, &u).unwrap().traj
    }

    #[test]
    fn alternating_gain_fundamental_lemma() {
        let sys = alternating_gain();
        let k: usize = 4;
        let len = (k.div_ceil(2) + 1) * 2 * 4 + k;
        let w = simulate_random_input(&sys, 0, len, 23);
        let chk = fundamental_check(&sys, &w, k).unwrap();
        assert!(chk.holds && chk.inclusion);
        assert_eq!(chk.span_rank, chk.behavior_dim);
        assert_eq!(chk.behavior_dim, 1 + k);
    }

    #[test]
    fn zero_input_data_fails() {
        let sys = alternating_gain();
        let w = sys
            .simulate(0, &DVector::from_element(1, 1.0), &DMatrix::zeros(1, 40))
            .unwrap()
            .traj;
        let chk = fundamental_check(&sys, &w, 3).unwrap();
        assert!(!chk.holds);
        assert!(chk.inclusion);
    }

    #[test]
    fn short_data_spans_only_a_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let sys = random_ltp(&mut rng, 2, 1, 1, 2);
        let k = 4;
        // 3 columns against a behavior of dimension n + mK = 6
        let w = simulate_random_input(&sys, 1, k + 2 * 2, 25);
        let chk = fundamental_check(&sys, &w, k).unwrap();
        assert_eq!(chk.behavior_dim, 6);
        assert!(chk.span_rank < chk.behavior_dim);
        assert!(!chk.holds);
        assert!(chk.inclusion);
        assert!(fundamental_check(&sys, &w, 100).is_err());
    }

    #[test]
    fn lti_fundamental_lemma() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for seed in 0..5 {
            let sys = random_ltp(&mut rng, 3, 1, 1, 1);
            let k = 4;
            let order = k + 3;
            let len = 3 * order + order;
            let w = simulate_random_input(&sys, 0, len, 100 + seed);
            assert!(is_ppe(&w.u_matrix(), order, 1).unwrap());
            assert!(fundamental_check(&sys, &w, k).unwrap().holds);
        }
    }
}
