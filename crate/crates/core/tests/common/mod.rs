#![allow(dead_code)]

use ltp_ddpc::datapipe::{build_data_matrices, collect_offline, recommended_length, DataMatrices};
use ltp_ddpc::plant::{InputLaw, Plant};
use ltp_ddpc::testbed::random_ltp;
use ltp_ddpc::{LtpSystem, Trajectory};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn system(seed: u64, n: usize, m: usize, p: usize, period: usize) -> LtpSystem {
    random_ltp(&mut rng(seed), n, m, p, period)
}

/// Noise-free offline record of the recommended length starting at `t_d1`.
pub fn offline(sys: &LtpSystem, l: usize, n: usize, t_d1: i64, seed: u64) -> Trajectory {
    let len = recommended_length(l, n, sys.period(), sys.m(), sys.n());
    let mut plant = Plant::new(sys.clone(), t_d1, DVector::zeros(sys.n())).unwrap();
    collect_offline(&mut plant, t_d1, len, InputLaw::Gaussian { variance: 1.0 }, seed).unwrap()
}

pub fn data(sys: &LtpSystem, l: usize, n: usize, t_d1: i64, seed: u64) -> DataMatrices {
    build_data_matrices(&offline(sys, l, n, t_d1, seed), l, n, sys.period()).unwrap()
}
