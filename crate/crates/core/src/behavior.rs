//! Restricted behaviors of LTP systems: bases, restriction, model comparison,
//! order and lag, controllability and the unique-output predictor.
//!
//! A behavior basis for `[t1, t2]` has rows `[u_t1; ...; u_t2; y_t1; ...; y_t2]`.
//! Splitting it at an initial horizon `L` reorders nothing inside the input and
//! output halves; [`BehaviorSplit`] simply names the four row blocks
//! `U_p | U_f` (the input half) and `Y_p | Y_f` (the output half).

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    hstack, numerical_rank, pinv, span_contains, subspace_equal as span_equal, vconcat, vstack,
    DEFAULT_RANK_TOL,
};
use crate::model::LtpSystem;

pub use crate::linalg::subspace_equal;

#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorBasis {
    pub t1: i64,
    pub t2: i64,
    pub m: usize,
    pub p: usize,
    /// `(m + p)(t2 - t1 + 1)` rows; its column span is the restricted behavior.
    pub basis: DMatrix<f64>,
}

impl BehaviorBasis {
    pub fn len(&self) -> usize {
        (self.t2 - self.t1 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.basis, DEFAULT_RANK_TOL)
    }

    /// Splits into past (`l` steps) and future (the rest).
    pub fn split(&self, l: usize) -> Result<BehaviorSplit> {
        let len = self.len();
        if l == 0 || l >= len {
            return Err(Error::InvalidArgument(format!(
                "initial horizon {l} must lie in [1, {})",
                len
            )));
        }
        BehaviorSplit::from_stacked(&self.basis, self.m, self.p, l, len - l)
    }

    /// One CSV column per basis vector, one row per trajectory coordinate.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let header: Vec<String> = (1..=self.basis.ncols()).map(|j| format!("b_{j}")).collect();
        wr.write_record(&header)?;
        for row in self.basis.row_iter() {
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `[0, I; O, I_imp]`: `n` state-seeded columns followed by `m(t2 - t1 + 1)`
/// input-seeded columns.
pub fn behavior_basis(sys: &LtpSystem, t1: i64, t2: i64) -> Result<BehaviorBasis> {
    let sm = sys.system_matrices(t1, t2)?;
    let len = (t2 - t1 + 1) as usize;
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    let mut basis = DMatrix::zeros((m + p) * len, n + m * len);
    basis
        .view_mut((0, n), (m * len, m * len))
        .fill_with_identity();
    basis.view_mut((m * len, 0), (p * len, n)).copy_from(&sm.obsv);
    basis
        .view_mut((m * len, n), (p * len, m * len))
        .copy_from(&sm.impulse);
    Ok(BehaviorBasis { t1, t2, m, p, basis })
}

/// Keeps, from every column, the samples for times `t1..=new_t2`.
pub fn restrict(b: &BehaviorBasis, new_t2: i64) -> Result<BehaviorBasis> {
    if new_t2 < b.t1 || new_t2 > b.t2 {
        return Err(Error::Interval { t1: b.t1, t2: new_t2 });
    }
    let len = b.len();
    let keep = (new_t2 - b.t1 + 1) as usize;
    let u = b.basis.rows(0, b.m * keep).into_owned();
    let y = b.basis.rows(b.m * len, b.p * keep).into_owned();
    Ok(BehaviorBasis {
        t1: b.t1,
        t2: new_t2,
        m: b.m,
        p: b.p,
        basis: vstack(&[&u, &y]),
    })
}

/// Whether two models share the restricted behavior on `[t1, t2]`, decided from
/// their observability and impulse matrices.
pub fn behaviors_equal_models(a: &LtpSystem, b: &LtpSystem, t1: i64, t2: i64) -> Result<bool> {
    if a.m() != b.m() || a.p() != b.p() {
        return Err(dim_err(format!(
            "systems have (m, p) = ({}, {}) and ({}, {})",
            a.m(),
            a.p(),
            b.m(),
            b.p()
        )));
    }
    let sa = a.system_matrices(t1, t2)?;
    let sb = b.system_matrices(t1, t2)?;
    if !span_equal(&sa.obsv, &sb.obsv, DEFAULT_RANK_TOL)? {
        return Ok(false);
    }
    let diff = &sa.impulse - &sb.impulse;
    if diff.iter().all(|v| *v == 0.0) {
        return Ok(true);
    }
    // A zero-rank observability span only contains the zero matrix.
    if numerical_rank(&sa.obsv, DEFAULT_RANK_TOL) == 0 {
        let scale = sa.impulse.amax().max(sb.impulse.amax()).max(1.0);
        return Ok(diff.amax() <= DEFAULT_RANK_TOL * scale);
    }
    let joint = hstack(&[&sa.obsv, &diff]);
    span_contains(&sa.obsv, &joint, DEFAULT_RANK_TOL)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrderLag {
    pub order: usize,
    pub lag: usize,
}

/// Order and lag at time `t` from the rank sequence of `O^{t+s-1}_t`, `s = 1..nT`.
pub fn order_and_lag(sys: &LtpSystem, t: i64) -> OrderLag {
    let horizon = sys.n() * sys.period();
    let sm = sys
        .system_matrices(t, t + horizon as i64 - 1)
        .expect("positive horizon");
    let p = sys.p();
    let ranks: Vec<usize> = (1..=horizon)
        .map(|s| numerical_rank(&sm.obsv.rows(0, s * p).into_owned(), DEFAULT_RANK_TOL))
        .collect();
    let order = *ranks.last().unwrap();
    let lag = ranks.iter().position(|&r| r == order).unwrap() + 1;
    OrderLag { order, lag }
}

/// Kalman rank test on the lifted pair `(A_L, B_L)` at every phase.
///
/// This decides behavioral controllability when the lifted realizations are
/// minimal; for non-minimal realizations it tests state controllability only.
pub fn is_controllable(sys: &LtpSystem) -> bool {
    let n = sys.n();
    (0..sys.period() as i64).all(|t0| {
        let lifted = sys.lift(t0);
        let mut blocks = Vec::with_capacity(n);
        let mut cur = lifted.b.clone();
        for _ in 0..n {
            let next = &lifted.a * &cur;
            blocks.push(std::mem::replace(&mut cur, next));
        }
        let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
        numerical_rank(&hstack(&refs), DEFAULT_RANK_TOL) == n
    })
}

/// A behavior representation split into past and future row blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorSplit {
    pub u_p: DMatrix<f64>,
    pub u_f: DMatrix<f64>,
    pub y_p: DMatrix<f64>,
    pub y_f: DMatrix<f64>,
    pub l: usize,
    pub n: usize,
}

impl BehaviorSplit {
    /// From a matrix with rows `[u_0..u_{l+n-1}; y_0..y_{l+n-1}]`.
    pub fn from_stacked(stacked: &DMatrix<f64>, m: usize, p: usize, l: usize, n: usize) -> Result<Self> {
        let total = l + n;
        if stacked.nrows() != (m + p) * total {
            return Err(dim_err(format!(
                "stacked matrix has {} rows, expected {}",
                stacked.nrows(),
                (m + p) * total
            )));
        }
        let rows = |start, count| stacked.rows(start, count).into_owned();
        Ok(Self {
            u_p: rows(0, m * l),
            u_f: rows(m * l, m * n),
            y_p: rows(m * total, p * l),
            y_f: rows(m * total + p * l, p * n),
            l,
            n,
        })
    }

    pub fn m(&self) -> usize {
        self.u_p.nrows() / self.l
    }
    pub fn p(&self) -> usize {
        self.y_p.nrows() / self.l
    }
    pub fn cols(&self) -> usize {
        self.u_p.ncols()
    }

    /// `[U_p; U_f; Y_p; Y_f]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        vstack(&[&self.u_p, &self.u_f, &self.y_p, &self.y_f])
    }

    /// `Y_f [U_p; U_f; Y_p]^+` with the relative rank rule.
    pub fn predictor(&self) -> DMatrix<f64> {
        &self.y_f * pinv(&vstack(&[&self.u_p, &self.u_f, &self.y_p]), DEFAULT_RANK_TOL)
    }
}

/// Unique future output for the past trajectory `w_past = [u_past; y_past]` and
/// the future input, when the split spans the behavior on a horizon whose
/// initial part is at least as long as the lag.
pub fn predict_output(split: &BehaviorSplit, w_past: &DVector<f64>, u_future: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, p) = (split.m(), split.p());
    if w_past.len() != (m + p) * split.l {
        return Err(dim_err(format!(
            "past trajectory has length {}, expected {}",
            w_past.len(),
            (m + p) * split.l
        )));
    }
    if u_future.len() != m * split.n {
        return Err(dim_err(format!(
            "future input has length {}, expected {}",
            u_future.len(),
            m * split.n
        )));
    }
    let u_past = w_past.rows(0, m * split.l).into_owned();
    let y_past = w_past.rows(m * split.l, p * split.l).into_owned();
    Ok(split.predictor() * vconcat(&[&u_past, u_future, &y_past]))
}
