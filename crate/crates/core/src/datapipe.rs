//! Offline data collection and the `T` phase-indexed sets of data matrices.
//!
//! With `K = L + N + T - 1`, `U^d` and `Y^d` are the depth-`K` periodic Hankel
//! matrices of the recorded input and output. Set `θ` (1-based) takes block
//! rows `θ..θ+L-1` as the past and `θ+L..θ+L+N-1` as the future, so its columns
//! are trajectories on `[t^θ - L, t^θ + N)` with `t^θ = t_d1 + θ + L - 1`.
//! Sets are stored 0-based: `θ` lives at index `θ - 1`.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorSplit;
use crate::error::{dim_err, Error, Result};
use crate::excitation::periodic_hankel;
use crate::model::{matrix_from_rows, matrix_to_rows, Trajectory};
use crate::plant::{InputLaw, Plant};

#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrices {
    period: usize,
    l: usize,
    n: usize,
    m: usize,
    p: usize,
    h: usize,
    t_d1: Option<i64>,
    sets: Vec<BehaviorSplit>,
}

/// Depth of the Hankel matrices needed for horizons `l`, `n` and period `period`.
pub fn hankel_depth(l: usize, n: usize, period: usize) -> usize {
    l + n + period - 1
}

/// Slices recorded data into the `period` sets of past/future data matrices.
pub fn build_data_matrices(w_d: &Trajectory, l: usize, n: usize, period: usize) -> Result<DataMatrices> {
    if l == 0 || n == 0 || period == 0 {
        return Err(Error::InvalidArgument("L, N and T must be positive".into()));
    }
    let k = hankel_depth(l, n, period);
    if w_d.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} samples recorded, at least K = {k} needed",
            w_d.len()
        )));
    }
    let (m, p) = (w_d.m(), w_d.p());
    let ud = periodic_hankel(&w_d.u_matrix(), k, period)?;
    let yd = periodic_hankel(&w_d.y_matrix(), k, period)?;
    let h = ud.ncols();
    let sets = (0..period)
        .map(|off| BehaviorSplit {
            u_p: ud.rows(off * m, l * m).into_owned(),
            u_f: ud.rows((off + l) * m, n * m).into_owned(),
            y_p: yd.rows(off * p, l * p).into_owned(),
            y_f: yd.rows((off + l) * p, n * p).into_owned(),
            l,
            n,
        })
        .collect();
    Ok(DataMatrices { period, l, n, m, p, h, t_d1: Some(w_d.start), sets })
}

/// `Θ(t) = 1 + ((t - t_d1 - L) mod T)`.
pub fn proper_index(t: i64, t_d1: i64, l: usize, period: usize) -> usize {
    1 + (t - t_d1 - l as i64).rem_euclid(period as i64) as usize
}

/// `(⌈K/T⌉ + n) T`, the excitation order the offline input must reach.
pub fn required_ppe_order(l: usize, n: usize, period: usize, n_bound: usize) -> usize {
    (hankel_depth(l, n, period).div_ceil(period) + n_bound) * period
}

/// Default offline record length `T (m (⌈K/T⌉ + n) T + 2n) + K`.
pub fn recommended_length(l: usize, n: usize, period: usize, m: usize, n_bound: usize) -> usize {
    let k = hankel_depth(l, n, period);
    period * (m * required_ppe_order(l, n, period, n_bound) + 2 * n_bound) + k
}

/// Drives `plant` from its current time `t_d1` with `length` inputs drawn from
/// `law` and returns the recorded trajectory.
pub fn collect_offline(plant: &mut Plant, t_d1: i64, length: usize, law: InputLaw, seed: u64) -> Result<Trajectory> {
    if length == 0 {
        return Err(Error::InvalidArgument("length must be at least 1".into()));
    }
    if plant.time() != t_d1 {
        return Err(Error::InvalidArgument(format!(
            "plant is at time {}, collection requested from {t_d1}",
            plant.time()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = plant.system().m();
    let mut traj = Trajectory::empty(t_d1, m, plant.system().p());
    for _ in 0..length {
        let u = law.sample(&mut rng, m);
        let y = plant.step(&u)?;
        traj.push(u, y)?;
    }
    Ok(traj)
}

impl DataMatrices {
    pub fn period(&self) -> usize {
        self.period
    }
    pub fn l(&self) -> usize {
        self.l
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn h(&self) -> usize {
        self.h
    }
    pub fn t_d1(&self) -> Option<i64> {
        self.t_d1
    }

    /// The same matrices with the collection start marked unknown.
    pub fn forget_start(mut self) -> Self {
        self.t_d1 = None;
        self
    }

    /// Set `θ ∈ {1..T}`.
    pub fn set(&self, theta: usize) -> Result<&BehaviorSplit> {
        if theta == 0 || theta > self.period {
            return Err(Error::InvalidArgument(format!(
                "index {theta} outside {{1..{}}}",
                self.period
            )));
        }
        Ok(&self.sets[theta - 1])
    }

    /// `t^θ`, the first predicted time of set `θ`, when the start is known.
    pub fn anchor_time(&self, theta: usize) -> Option<i64> {
        self.t_d1.map(|t| t + theta as i64 + self.l as i64 - 1)
    }

    /// Proper index at `t`, when the start is known.
    pub fn proper_index(&self, t: i64) -> Option<usize> {
        self.t_d1.map(|t_d1| proper_index(t, t_d1, self.l, self.period))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DataDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: DataDoc = serde_json::from_str(s)?;
        doc.try_into()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &DataDoc::from(self))?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let doc: DataDoc = serde_json::from_reader(r)?;
        doc.try_into()
    }
}

/// JSON envelope. Matrices are arrays of rows; `t_d1` is `null` when unknown.
#[derive(Serialize, Deserialize)]
struct DataDoc {
    #[serde(rename = "T")]
    period: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "N")]
    n: usize,
    m: usize,
    p: usize,
    h: usize,
    t_d1: Option<i64>,
    sets: Vec<SetDoc>,
}

#[derive(Serialize, Deserialize)]
struct SetDoc {
    theta: usize,
    #[serde(rename = "U_p")]
    u_p: Vec<Vec<f64>>,
    #[serde(rename = "U_f")]
    u_f: Vec<Vec<f64>>,
    #[serde(rename = "Y_p")]
    y_p: Vec<Vec<f64>>,
    #[serde(rename = "Y_f")]
    y_f: Vec<Vec<f64>>,
}

impl From<&DataMatrices> for DataDoc {
    fn from(d: &DataMatrices) -> Self {
        DataDoc {
            period: d.period,
            l: d.l,
            n: d.n,
            m: d.m,
            p: d.p,
            h: d.h,
            t_d1: d.t_d1,
            sets: d
                .sets
                .iter()
                .enumerate()
                .map(|(i, s)| SetDoc {
                    theta: i + 1,
                    u_p: matrix_to_rows(&s.u_p),
                    u_f: matrix_to_rows(&s.u_f),
                    y_p: matrix_to_rows(&s.y_p),
                    y_f: matrix_to_rows(&s.y_f),
                })
                .collect(),
        }
    }
}

impl TryFrom<DataDoc> for DataMatrices {
    type Error = Error;

    fn try_from(doc: DataDoc) -> Result<Self> {
        if doc.sets.len() != doc.period || doc.period == 0 || doc.l == 0 || doc.n == 0 {
            return Err(dim_err(format!(
                "expected {} data-matrix sets, found {}",
                doc.period,
                doc.sets.len()
            )));
        }
        let (l, n, m, p, h) = (doc.l, doc.n, doc.m, doc.p, doc.h);
        let mut sets = Vec::with_capacity(doc.period);
        for (i, s) in doc.sets.iter().enumerate() {
            if s.theta != i + 1 {
                return Err(Error::InvalidArgument(format!("set {} is labelled {}", i + 1, s.theta)));
            }
            let get = |rows: &[Vec<f64>], r| -> Result<DMatrix<f64>> { matrix_from_rows(rows, r, h) };
            sets.push(BehaviorSplit {
                u_p: get(&s.u_p, m * l)?,
                u_f: get(&s.u_f, m * n)?,
                y_p: get(&s.y_p, p * l)?,
                y_f: get(&s.y_f, p * n)?,
                l,
                n,
            });
        }
        Ok(DataMatrices { period: doc.period, l, n, m, p, h, t_d1: doc.t_d1, sets })
    }
}
