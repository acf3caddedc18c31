//! Reference systems for tests, examples and the acceptance suite.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::behavior::order_and_lag;
use crate::linalg::{hstack, singular_values, vstack};
use crate::model::LtpSystem;

/// The scalar period-2 system `x+ = x + (-1)^t u`, `y = x`.
pub fn alternating_gain() -> LtpSystem {
    let one = DMatrix::from_element(1, 1, 1.0);
    LtpSystem::new(
        vec![one.clone(), one.clone()],
        vec![one.clone(), -one.clone()],
        vec![one.clone(), one],
        vec![DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)],
    )
    .expect("fixture dimensions")
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Smallest over largest singular value.
fn conditioning(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    if sv.is_empty() || sv[0] == 0.0 {
        return 0.0;
    }
    sv[sv.len() - 1] / sv[0]
}

/// Seeded random LTP system with Gaussian `B_t, C_t, D_t`.
///
/// The `A_t` are rescaled so the monodromy matrix has spectral radius in
/// `[0.5, 0.95]`, and draws are rejected until every lifted pair is controllable
/// and observable with a conditioning margin of `1e-3`, which makes state and
/// behavioral controllability coincide.
pub fn random_ltp<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, p: usize, period: usize) -> LtpSystem {
    loop {
        if let Some(sys) = try_random_ltp(rng, n, m, p, period) {
            return sys;
        }
    }
}

fn try_random_ltp<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, p: usize, period: usize) -> Option<LtpSystem> {
    let scale = 1.0 / (n as f64).sqrt();
    let mut a: Vec<DMatrix<f64>> = (0..period).map(|_| gaussian_matrix(rng, n, n) * scale).collect();
    let mono = a.iter().fold(DMatrix::identity(n, n), |acc, ak| ak * acc);
    let radius = mono
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if radius < 1e-3 {
        return None;
    }
    let target: f64 = rng.random_range(0.5..0.95);
    let per_step = (target / radius).powf(1.0 / period as f64);
    for ak in &mut a {
        *ak *= per_step;
    }
    let b = (0..period).map(|_| gaussian_matrix(rng, n, m)).collect();
    let c = (0..period).map(|_| gaussian_matrix(rng, p, n)).collect();
    let d = (0..period).map(|_| gaussian_matrix(rng, p, m)).collect();
    let sys = LtpSystem::new(a, b, c, d).ok()?;

    for t0 in 0..period as i64 {
        let lifted = sys.lift(t0);
        let mut blocks = vec![lifted.b.clone()];
        let mut obs = vec![lifted.c.clone()];
        for _ in 1..n {
            let next = &lifted.a * blocks.last().unwrap();
            blocks.push(next);
            let next = obs.last().unwrap() * &lifted.a;
            obs.push(next);
        }
        let kalman = hstack(&blocks.iter().collect::<Vec<_>>());
        let observ = vstack(&obs.iter().collect::<Vec<_>>());
        let kalman_rows = kalman.transpose();
        if conditioning(&(&kalman * &kalman_rows)) < 1e-6 || conditioning(&(observ.transpose() * &observ)) < 1e-6 {
            return None;
        }
        if order_and_lag(&sys, t0).order != n {
            return None;
        }
    }
    Some(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::is_controllable;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_systems_are_reproducible_and_controllable() {
        let a = random_ltp(&mut ChaCha8Rng::seed_from_u64(9), 3, 2, 1, 3);
        let b = random_ltp(&mut ChaCha8Rng::seed_from_u64(9), 3, 2, 1, 3);
        assert_eq!(a, b);
        assert!(is_controllable(&a));
        assert_eq!(a.period(), 3);
    }
}
