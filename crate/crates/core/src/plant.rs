//! Simulated plant with optional process and measurement noise, and the input
//! generators used for data collection and warm-up.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::model::{LtpSystem, Trajectory};

/// I.i.d. zero-mean Gaussian noise `w ~ N(0, s I_n)` on the state and
/// `v ~ N(0, s I_p)` on the output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub process_variance: f64,
    pub measurement_variance: f64,
}

impl NoiseModel {
    pub fn isotropic(variance: f64) -> Self {
        Self { process_variance: variance, measurement_variance: variance }
    }

    pub fn sample_process<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> DVector<f64> {
        gaussian_vector(rng, n, self.process_variance)
    }

    pub fn sample_measurement<R: Rng + ?Sized>(&self, rng: &mut R, p: usize) -> DVector<f64> {
        gaussian_vector(rng, p, self.measurement_variance)
    }
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> DVector<f64> {
    let sd = variance.sqrt();
    DVector::from_fn(len, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

/// Input generator for offline collection and warm-up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InputLaw {
    Zero,
    /// `u ~ N(0, variance * I_m)`.
    Gaussian { variance: f64 },
}

impl InputLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> DVector<f64> {
        match *self {
            InputLaw::Zero => DVector::zeros(m),
            InputLaw::Gaussian { variance } => gaussian_vector(rng, m, variance),
        }
    }
}

/// A running instance of an [`LtpSystem`] that records everything it sees.
#[derive(Clone, Debug)]
pub struct Plant {
    sys: LtpSystem,
    t: i64,
    x: DVector<f64>,
    noise: Option<NoiseModel>,
    rng: ChaCha8Rng,
    history: Trajectory,
}

impl Plant {
    /// Noise-free plant at state `x0` and time `t0`.
    pub fn new(sys: LtpSystem, t0: i64, x0: DVector<f64>) -> Result<Self> {
        if x0.len() != sys.n() {
            return Err(dim_err(format!("initial state has length {}, expected {}", x0.len(), sys.n())));
        }
        let history = Trajectory::empty(t0, sys.m(), sys.p());
        Ok(Self { sys, t: t0, x: x0, noise: None, rng: ChaCha8Rng::seed_from_u64(0), history })
    }

    pub fn with_noise(mut self, noise: NoiseModel, seed: u64) -> Self {
        self.noise = Some(noise);
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn system(&self) -> &LtpSystem {
        &self.sys
    }
    pub fn time(&self) -> i64 {
        self.t
    }
    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }
    pub fn history(&self) -> &Trajectory {
        &self.history
    }

    /// Applies `u` at the current time, returns the measured output and advances one step.
    pub fn step(&mut self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.sys.m() {
            return Err(dim_err(format!("input has length {}, expected {}", u.len(), self.sys.m())));
        }
        let t = self.t;
        let mut y = self.sys.c(t) * &self.x + self.sys.d(t) * u;
        let mut next = self.sys.a(t) * &self.x + self.sys.b(t) * u;
        if let Some(noise) = self.noise {
            y += noise.sample_measurement(&mut self.rng, self.sys.p());
            next += noise.sample_process(&mut self.rng, self.sys.n());
        }
        self.x = next;
        self.t += 1;
        self.history.push(u.clone(), y.clone())?;
        Ok(y)
    }

    /// The last `len` recorded steps, `[t - len, t)`.
    pub fn past_window(&self, len: usize) -> Result<Trajectory> {
        self.history.window(self.t - len as i64, self.t)
    }
}
