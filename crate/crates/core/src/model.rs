//! Discrete-time linear time-periodic systems
//!
//! ```text
//!     x_{t+1} = A_t x_t + B_t u_t
//!     y_t     = C_t x_t + D_t u_t,      A_{t+T} = A_t, ...
//! ```
//!
//! Stacked signals are time-major: `u_[t1,t2] = [u_t1; u_t1+1; ...; u_t2]`, and a
//! trajectory vector is `w_[t1,t2] = [u_[t1,t2]; y_[t1,t2]]`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LtpSystem {
    n: usize,
    m: usize,
    p: usize,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
    d: Vec<DMatrix<f64>>,
}

/// The classical matrix families of an interval `[t1, t2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrices {
    /// State transition `Phi^{t2}_{t1}`.
    pub phi: DMatrix<f64>,
    /// Reversed extended controllability matrix, `n x (t2-t1+1)m`.
    pub ctrb: DMatrix<f64>,
    /// Extended observability matrix, `(t2-t1+1)p x n`.
    pub obsv: DMatrix<f64>,
    /// Lower block-triangular impulse-response matrix.
    pub impulse: DMatrix<f64>,
}

/// Output of [`LtpSystem::simulate`]: the trajectory and the `N + 1` states.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub traj: Trajectory,
    pub states: Vec<DVector<f64>>,
}

/// The LTI system obtained by packing one period starting at `t0` into a single step.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedSystem {
    pub t0: i64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl LiftedSystem {
    /// The lifted system as a period-1 [`LtpSystem`].
    pub fn as_lti(&self) -> LtpSystem {
        LtpSystem::lti(self.a.clone(), self.b.clone(), self.c.clone(), self.d.clone())
            .expect("lifted matrices have consistent dimensions")
    }
}

impl LtpSystem {
    /// Builds a system from one matrix per phase; the period is the sequence length.
    pub fn new(
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        c: Vec<DMatrix<f64>>,
        d: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let period = a.len();
        if period == 0 {
            return Err(Error::InvalidArgument("period must be positive".into()));
        }
        if b.len() != period || c.len() != period || d.len() != period {
            return Err(dim_err(format!(
                "matrix sequences have lengths A={}, B={}, C={}, D={}",
                period,
                b.len(),
                c.len(),
                d.len()
            )));
        }
        let n = a[0].nrows();
        let m = b[0].ncols();
        let p = c[0].nrows();
        for k in 0..period {
            let ok = a[k].shape() == (n, n)
                && b[k].shape() == (n, m)
                && c[k].shape() == (p, n)
                && d[k].shape() == (p, m);
            if !ok {
                return Err(dim_err(format!(
                    "phase {k}: A {:?}, B {:?}, C {:?}, D {:?} inconsistent with n={n}, m={m}, p={p}",
                    a[k].shape(),
                    b[k].shape(),
                    c[k].shape(),
                    d[k].shape()
                )));
            }
        }
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidArgument("n, m and p must be positive".into()));
        }
        Ok(Self { n, m, p, a, b, c, d })
    }

    pub fn lti(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![a], vec![b], vec![c], vec![d])
    }

    pub fn period(&self) -> usize {
        self.a.len()
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

    /// Phase of time `t`, the nonnegative residue of `t mod T`.
    pub fn phase(&self, t: i64) -> usize {
        t.rem_euclid(self.period() as i64) as usize
    }

    pub fn a(&self, t: i64) -> &DMatrix<f64> {
        &self.a[self.phase(t)]
    }
    pub fn b(&self, t: i64) -> &DMatrix<f64> {
        &self.b[self.phase(t)]
    }
    pub fn c(&self, t: i64) -> &DMatrix<f64> {
        &self.c[self.phase(t)]
    }
    pub fn d(&self, t: i64) -> &DMatrix<f64> {
        &self.d[self.phase(t)]
    }

    /// `Phi^{t2}_{t1} = A_{t2-1} ... A_{t1}`, identity when `t2 == t1`.
    pub fn transition(&self, t2: i64, t1: i64) -> Result<DMatrix<f64>> {
        if t2 < t1 {
            return Err(Error::Interval { t1, t2 });
        }
        let mut phi = DMatrix::identity(self.n, self.n);
        for t in t1..t2 {
            phi = self.a(t) * phi;
        }
        Ok(phi)
    }

    /// Impulse-response coefficient `G^{i}_{j}` for `i >= j`.
    pub fn markov(&self, i: i64, j: i64) -> Result<DMatrix<f64>> {
        if i < j {
            return Err(Error::Interval { t1: j, t2: i });
        }
        if i == j {
            return Ok(self.d(j).clone());
        }
        Ok(self.c(i) * self.transition(i, j + 1)? * self.b(j))
    }

    /// `Phi`, the controllability, observability and impulse matrices of `[t1, t2]`.
    ///
    /// One forward pass per input time propagates `Phi^{i}_{j+1} B_j`, so every block
    /// costs a single matrix product.
    pub fn system_matrices(&self, t1: i64, t2: i64) -> Result<SystemMatrices> {
        if t2 < t1 {
            return Err(Error::Interval { t1, t2 });
        }
        let (n, m, p) = (self.n, self.m, self.p);
        let len = (t2 - t1 + 1) as usize;

        let mut obsv = DMatrix::zeros(len * p, n);
        let mut phi = DMatrix::identity(n, n);
        for i in 0..len {
            let t = t1 + i as i64;
            obsv.view_mut((i * p, 0), (p, n)).copy_from(&(self.c(t) * &phi));
            if i + 1 < len {
                phi = self.a(t) * phi;
            }
        }

        let mut impulse = DMatrix::zeros(len * p, len * m);
        let mut ctrb = DMatrix::zeros(n, len * m);
        for j in 0..len {
            let tj = t1 + j as i64;
            impulse.view_mut((j * p, j * m), (p, m)).copy_from(self.d(tj));
            // prop = Phi^{t_i}_{t_j + 1} B_{t_j}
            let mut prop = self.b(tj).clone();
            for i in (j + 1)..len {
                let ti = t1 + i as i64;
                impulse
                    .view_mut((i * p, j * m), (p, m))
                    .copy_from(&(self.c(ti) * &prop));
                prop = self.a(ti) * prop;
            }
            ctrb.view_mut((0, j * m), (n, m)).copy_from(&prop);
        }

        Ok(SystemMatrices { phi, ctrb, obsv, impulse })
    }

    /// Runs the recursion from `x_init` at time `t1` with inputs `u` (`m x N`, one column per step).
    pub fn simulate(&self, t1: i64, x_init: &DVector<f64>, u: &DMatrix<f64>) -> Result<Simulation> {
        if x_init.len() != self.n {
            return Err(dim_err(format!("initial state has length {}, expected {}", x_init.len(), self.n)));
        }
        if u.nrows() != self.m {
            return Err(dim_err(format!("input has {} rows, expected {}", u.nrows(), self.m)));
        }
        let mut traj = Trajectory::empty(t1, self.m, self.p);
        let mut states = Vec::with_capacity(u.ncols() + 1);
        let mut x = x_init.clone();
        for k in 0..u.ncols() {
            let t = t1 + k as i64;
            let uk = u.column(k).into_owned();
            let y = self.c(t) * &x + self.d(t) * &uk;
            let next = self.a(t) * &x + self.b(t) * &uk;
            states.push(std::mem::replace(&mut x, next));
            traj.push(uk, y)?;
        }
        states.push(x);
        Ok(Simulation { traj, states })
    }

    /// Lifted system with initial time `t0`.
    pub fn lift(&self, t0: i64) -> LiftedSystem {
        let t_end = t0 + self.period() as i64 - 1;
        let sm = self
            .system_matrices(t0, t_end)
            .expect("one period is a valid interval");
        let a = self.a(t_end) * &sm.phi;
        LiftedSystem { t0, a, b: sm.ctrb, c: sm.obsv, d: sm.impulse }
    }

    /// The system expressed in the state coordinates `z_t = S_t x_t`, with `S_{t+T} = S_t`.
    pub fn transform_state(&self, s: &[DMatrix<f64>]) -> Result<Self> {
        let period = self.period();
        if s.len() != period || s.iter().any(|sk| sk.shape() != (self.n, self.n)) {
            return Err(dim_err("state transform must supply one n x n matrix per phase"));
        }
        let inv: Vec<DMatrix<f64>> = s
            .iter()
            .map(|sk| {
                sk.clone()
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidArgument("singular state transform".into()))
            })
            .collect::<Result<_>>()?;
        let mut a = Vec::with_capacity(period);
        let mut b = Vec::with_capacity(period);
        let mut c = Vec::with_capacity(period);
        for k in 0..period {
            let next = (k + 1) % period;
            a.push(&s[next] * &self.a[k] * &inv[k]);
            b.push(&s[next] * &self.b[k]);
            c.push(&self.c[k] * &inv[k]);
        }
        Self::new(a, b, c, self.d.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SystemDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: SystemDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

/// JSON layout: `{"T", "n", "m", "p", "A": [T matrices], ...}` with every matrix
/// written as an array of rows.
#[derive(Serialize, Deserialize)]
struct SystemDoc {
    #[serde(rename = "T")]
    period: usize,
    n: usize,
    m: usize,
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    c: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "D")]
    d: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(dim_err(format!("expected a {nrows} x {ncols} matrix")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serde adapter writing a matrix as an array of rows.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, |r| r.len());
        super::matrix_from_rows(&rows, rows.len(), ncols).map_err(D::Error::custom)
    }
}

impl From<&LtpSystem> for SystemDoc {
    fn from(s: &LtpSystem) -> Self {
        let conv = |v: &[DMatrix<f64>]| v.iter().map(matrix_to_rows).collect();
        SystemDoc {
            period: s.period(),
            n: s.n,
            m: s.m,
            p: s.p,
            a: conv(&s.a),
            b: conv(&s.b),
            c: conv(&s.c),
            d: conv(&s.d),
        }
    }
}

impl TryFrom<SystemDoc> for LtpSystem {
    type Error = Error;

    fn try_from(doc: SystemDoc) -> Result<Self> {
        let conv = |v: &[Vec<Vec<f64>>], r: usize, c: usize| -> Result<Vec<DMatrix<f64>>> {
            if v.len() != doc.period {
                return Err(dim_err(format!("expected {} matrices, found {}", doc.period, v.len())));
            }
            v.iter().map(|m| matrix_from_rows(m, r, c)).collect()
        };
        let (n, m, p) = (doc.n, doc.m, doc.p);
        LtpSystem::new(
            conv(&doc.a, n, n)?,
            conv(&doc.b, n, m)?,
            conv(&doc.c, p, n)?,
            conv(&doc.d, p, m)?,
        )
    }
}

/// An input-output sequence anchored at time `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub start: i64,
    m: usize,
    p: usize,
    u: Vec<DVector<f64>>,
    y: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn empty(start: i64, m: usize, p: usize) -> Self {
        Self { start, m, p, u: Vec::new(), y: Vec::new() }
    }

    /// From `m x len` and `p x len` sample matrices.
    pub fn from_matrices(start: i64, u: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if u.ncols() != y.ncols() {
            return Err(dim_err(format!("{} input samples vs {} output samples", u.ncols(), y.ncols())));
        }
        Ok(Self {
            start,
            m: u.nrows(),
            p: y.nrows(),
            u: u.column_iter().map(|c| c.into_owned()).collect(),
            y: y.column_iter().map(|c| c.into_owned()).collect(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn len(&self) -> usize {
        self.u.len()
    }
    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
    /// One past the last recorded time.
    pub fn end(&self) -> i64 {
        self.start + self.len() as i64
    }

    pub fn push(&mut self, u: DVector<f64>, y: DVector<f64>) -> Result<()> {
        if u.len() != self.m || y.len() != self.p {
            return Err(dim_err(format!(
                "sample (u: {}, y: {}) does not match (m: {}, p: {})",
                u.len(),
                y.len(),
                self.m,
                self.p
            )));
        }
        self.u.push(u);
        self.y.push(y);
        Ok(())
    }

    pub fn u_at(&self, k: usize) -> &DVector<f64> {
        &self.u[k]
    }
    pub fn y_at(&self, k: usize) -> &DVector<f64> {
        &self.y[k]
    }

    /// Inputs as an `m x len` matrix.
    pub fn u_matrix(&self) -> DMatrix<f64> {
        samples_matrix(&self.u, self.m)
    }
    pub fn y_matrix(&self) -> DMatrix<f64> {
        samples_matrix(&self.y, self.p)
    }

    pub fn u_stacked(&self) -> DVector<f64> {
        stack(&self.u)
    }
    pub fn y_stacked(&self) -> DVector<f64> {
        stack(&self.y)
    }

    /// `w = [u; y]` over the whole trajectory.
    pub fn w_vector(&self) -> DVector<f64> {
        crate::linalg::vconcat(&[&self.u_stacked(), &self.y_stacked()])
    }

    /// Sub-trajectory on `[from, to)`.
    pub fn window(&self, from: i64, to: i64) -> Result<Trajectory> {
        if from > to || from < self.start || to > self.end() {
            return Err(Error::InsufficientData(format!(
                "window [{from}, {to}) outside recorded [{}, {})",
                self.start,
                self.end()
            )));
        }
        let a = (from - self.start) as usize;
        let b = (to - self.start) as usize;
        Ok(Trajectory {
            start: from,
            m: self.m,
            p: self.p,
            u: self.u[a..b].to_vec(),
            y: self.y[a..b].to_vec(),
        })
    }

    /// CSV with columns `t, u_1..u_m, y_1..y_p`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.m).map(|i| format!("u_{i}")));
        header.extend((1..=self.p).map(|i| format!("y_{i}")));
        wr.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![(self.start + k as i64).to_string()];
            rec.extend(self.u[k].iter().map(|v| v.to_string()));
            rec.extend(self.y[k].iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`Trajectory::write_csv`]; `m` is inferred from the header.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let m = header.iter().filter(|h| h.starts_with("u_")).count();
        let p = header.iter().filter(|h| h.starts_with("y_")).count();
        if header.len() != 1 + m + p {
            return Err(Error::InvalidArgument("unexpected trajectory CSV header".into()));
        }
        let mut traj: Option<Trajectory> = None;
        for rec in rd.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")))
            };
            let t: i64 = rec[0]
                .trim()
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("bad time {:?}: {e}", &rec[0])))?;
            let vals: Vec<f64> = rec.iter().skip(1).map(parse).collect::<Result<_>>()?;
            let tr = traj.get_or_insert_with(|| Trajectory::empty(t, m, p));
            if t != tr.end() {
                return Err(Error::InvalidArgument(format!("non-consecutive time {t}")));
            }
            tr.push(
                DVector::from_column_slice(&vals[..m]),
                DVector::from_column_slice(&vals[m..]),
            )?;
        }
        traj.ok_or_else(|| Error::InsufficientData("empty trajectory CSV".into()))
    }
}

fn samples_matrix(v: &[DVector<f64>], rows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, v.len());
    for (k, s) in v.iter().enumerate() {
        out.set_column(k, s);
    }
    out
}

fn stack(v: &[DVector<f64>]) -> DVector<f64> {
    let parts: Vec<&DVector<f64>> = v.iter().collect();
    crate::linalg::vconcat(&parts)
}
