//! Dense convex quadratic programming.
//!
//! ```text
//!     minimize    ½ zᵀ H z + fᵀ z
//!     subject to  A_eq z  = b_eq
//!                 A_in z <= b_in
//! ```
//!
//! Solved with the Goldfarb-Idnani dual active-set method: start from the
//! unconstrained minimizer and add violated constraints one at a time, keeping
//! `J = L^{-T}` (with `H = L Lᵀ`) and the triangular factor `R` of the active
//! normals up to date with Givens rotations.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{dim_err, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIterations => "max_iterations",
            QpStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Infinity-norm KKT residuals for the multipliers in
/// `H z + f + A_eqᵀ λ + A_inᵀ μ = 0`, `μ >= 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_in: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_in)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub status: QpStatus,
    pub lambda_eq: DVector<f64>,
    pub mu_in: DVector<f64>,
    pub iterations: usize,
    pub residuals: KktResiduals,
}

impl QpSolution {
    pub fn objective(&self, qp: &QpProblem) -> f64 {
        0.5 * self.z.dot(&(&qp.h * &self.z)) + qp.f.dot(&self.z)
    }
}

pub const DEFAULT_QP_TOL: f64 = 1e-8;

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_in: DMatrix<f64>,
        b_in: DVector<f64>,
    ) -> Result<Self> {
        let n = f.len();
        if h.shape() != (n, n) {
            return Err(dim_err(format!("H is {:?}, expected {n} x {n}", h.shape())));
        }
        if a_eq.ncols() != n || a_eq.nrows() != b_eq.len() {
            return Err(dim_err(format!("A_eq is {:?} with {} right-hand sides", a_eq.shape(), b_eq.len())));
        }
        if a_in.ncols() != n || a_in.nrows() != b_in.len() {
            return Err(dim_err(format!("A_in is {:?} with {} right-hand sides", a_in.shape(), b_in.len())));
        }
        Ok(Self { h, f, a_eq, b_eq, a_in, b_in })
    }

    /// Problem without constraints.
    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        let n = f.len();
        Self::new(h, f, DMatrix::zeros(0, n), DVector::zeros(0), DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// Appends `lo <= S z <= hi` as two blocks of inequalities; infinite bounds are skipped.
    pub fn add_bounds(&mut self, s: &DMatrix<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<()> {
        if s.ncols() != self.dim() || lo.len() != s.nrows() || hi.len() != s.nrows() {
            return Err(dim_err("bound block does not match the problem"));
        }
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..s.nrows() {
            if hi[i].is_finite() {
                rows.push(s.row(i).into_owned());
                rhs.push(hi[i]);
            }
            if lo[i].is_finite() {
                rows.push(-s.row(i).into_owned());
                rhs.push(-lo[i]);
            }
        }
        let old = self.a_in.nrows();
        let mut a = DMatrix::zeros(old + rows.len(), self.dim());
        a.rows_mut(0, old).copy_from(&self.a_in);
        for (k, r) in rows.iter().enumerate() {
            a.set_row(old + k, r);
        }
        let mut b = DVector::zeros(old + rhs.len());
        b.rows_mut(0, old).copy_from(&self.b_in);
        for (k, v) in rhs.iter().enumerate() {
            b[old + k] = *v;
        }
        self.a_in = a;
        self.b_in = b;
        Ok(())
    }

    pub fn residuals(&self, z: &DVector<f64>, lambda: &DVector<f64>, mu: &DVector<f64>) -> KktResiduals {
        let grad = &self.h * z + &self.f + self.a_eq.transpose() * lambda + self.a_in.transpose() * mu;
        let eq = &self.a_eq * z - &self.b_eq;
        let slack = &self.b_in - &self.a_in * z;
        KktResiduals {
            stationarity: grad.amax(),
            primal_eq: eq.amax(),
            primal_in: slack.iter().fold(0.0, |acc, &s| acc.max(-s)),
            dual: mu.iter().fold(0.0, |acc, &v| acc.max(-v)),
            complementarity: mu.iter().zip(slack.iter()).fold(0.0, |acc, (m, s)| acc.max((m * s).abs())),
        }
    }
}

/// `L^{-T}` when `h` is numerically positive definite.
fn inverse_factor(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = h.nrows();
    let max_diag = h.diagonal().amax();
    let chol = Cholesky::new(h.clone())?;
    let l = chol.l();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |a, &v| a.min(v * v));
    if !(min_pivot > n as f64 * f64::EPSILON * max_diag.max(f64::MIN_POSITIVE)) {
        return None;
    }
    let linv = l.solve_lower_triangular(&DMatrix::identity(n, n))?;
    Some(linv.transpose())
}

/// Rotation `(c, s)` with `c a + s b = hypot(a, b)` and `-s a + c b = 0`.
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

fn rotate_columns(j: &mut DMatrix<f64>, c1: usize, c2: usize, c: f64, s: f64) {
    let (mut a, mut b) = j.columns_range_pair_mut(c1, c2);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xv, yv) = (*x, *y);
        *x = c * xv + s * yv;
        *y = -s * xv + c * yv;
    }
}

struct ActiveSet {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    q: usize,
    /// Constraint id per active slot: `Eq(i)` or `In(i)`.
    ids: Vec<Slot>,
    u: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Slot {
    Eq(usize, bool),
    In(usize),
}

impl ActiveSet {
    /// Returns `(d = Jᵀ n, primal step J_2 d_2, dual step R^{-1} d_1, ‖d_2‖)`.
    fn directions(&self, normal: &DVector<f64>) -> (DVector<f64>, DVector<f64>, Vec<f64>, f64) {
        let n = self.j.nrows();
        let d = self.j.tr_mul(normal);
        let q = self.q;
        let d2 = d.rows(q, n - q);
        let step = self.j.columns(q, n - q) * d2;
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut acc = d[i];
            for k in (i + 1)..q {
                acc -= self.r[(i, k)] * r[k];
            }
            r[i] = acc / self.r[(i, i)];
        }
        let nz = d2.norm();
        (d, step, r, nz)
    }

    fn add(&mut self, mut d: DVector<f64>, slot: Slot, u: f64) {
        let n = self.j.nrows();
        for k in ((self.q + 1)..n).rev() {
            let (c, s, h) = givens(d[k - 1], d[k]);
            if s == 0.0 {
                continue;
            }
            d[k - 1] = h;
            d[k] = 0.0;
            rotate_columns(&mut self.j, k - 1, k, c, s);
        }
        for i in 0..=self.q {
            self.r[(i, self.q)] = d[i];
        }
        self.q += 1;
        self.ids.push(slot);
        self.u.push(u);
    }

    fn drop(&mut self, k: usize) {
        let q = self.q;
        for col in k..(q - 1) {
            for i in 0..q {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        for col in k..(q - 1) {
            let (c, s, h) = givens(self.r[(col, col)], self.r[(col + 1, col)]);
            if s == 0.0 {
                continue;
            }
            self.r[(col, col)] = h;
            self.r[(col + 1, col)] = 0.0;
            for l in (col + 1)..(q - 1) {
                let (x, y) = (self.r[(col, l)], self.r[(col + 1, l)]);
                self.r[(col, l)] = c * x + s * y;
                self.r[(col + 1, l)] = -s * x + c * y;
            }
            rotate_columns(&mut self.j, col, col + 1, c, s);
        }
        self.q -= 1;
        self.ids.remove(k);
        self.u.remove(k);
    }

    /// Smallest dual step that zeroes an active inequality multiplier.
    fn blocking(&self, r: &[f64]) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (k, slot) in self.ids.iter().enumerate() {
            if let Slot::In(_) = slot {
                if r[k] > 0.0 {
                    let t = self.u[k] / r[k];
                    if best.is_none_or(|(b, _)| t < b) {
                        best = Some((t, k));
                    }
                }
            }
        }
        best
    }
}

/// Solves `qp` with feasibility tolerance `tol` (relative to `1 + |b_i|`).
pub fn solve_qp(qp: &QpProblem, tol: f64) -> QpSolution {
    let n = qp.dim();
    let (m_eq, m_in) = (qp.a_eq.nrows(), qp.a_in.nrows());
    let max_iter = 50 * (n + m_eq + m_in).max(1);

    let failure = |status: QpStatus, z: DVector<f64>, iterations: usize| {
        let lambda = DVector::zeros(m_eq);
        let mu = DVector::zeros(m_in);
        let residuals = if z.iter().all(|v| v.is_finite()) {
            qp.residuals(&z, &lambda, &mu)
        } else {
            KktResiduals {
                stationarity: f64::INFINITY,
                ..Default::default()
            }
        };
        QpSolution { z, status, lambda_eq: lambda, mu_in: mu, iterations, residuals }
    };

    // Singular H: add ρ‖A_eq z - b_eq‖², which leaves the feasible optimum
    // unchanged, then a small proximal term as a last resort.
    let mut h = qp.h.clone();
    let mut f = qp.f.clone();
    let mut j = inverse_factor(&h);
    if j.is_none() && m_eq > 0 {
        let rho = h.diagonal().amax().max(1.0);
        h += qp.a_eq.transpose() * &qp.a_eq * rho;
        f -= qp.a_eq.transpose() * &qp.b_eq * rho;
        j = inverse_factor(&h);
    }
    if j.is_none() {
        let eps = 1e-10 * h.diagonal().amax().max(1.0);
        h += DMatrix::identity(n, n) * eps;
        j = inverse_factor(&h);
    }
    let Some(j) = j else {
        return failure(QpStatus::NumericalFailure, DVector::from_element(n, f64::NAN), 0);
    };

    let mut z = -(&j * (j.transpose() * &f));
    let mut act = ActiveSet { j, r: DMatrix::zeros(n, n), q: 0, ids: Vec::new(), u: Vec::new() };
    let mut iterations = 0;

    for i in 0..m_eq {
        iterations += 1;
        let a = qp.a_eq.row(i).transpose();
        let b = qp.b_eq[i];
        let s = a.dot(&z) - b;
        let positive = s > 0.0;
        let normal = if positive { -&a } else { a };
        let s_dir = -s.abs();
        let (d, step, r, nz) = act.directions(&normal);
        if nz <= 1e-10 * d.norm() || act.q == n {
            // linearly dependent on the equalities already active
            if s.abs() <= tol * (1.0 + b.abs()) {
                continue;
            }
            return failure(QpStatus::Infeasible, z, iterations);
        }
        let t = -s_dir / (nz * nz);
        z += &step * t;
        for (k, rk) in r.iter().enumerate() {
            act.u[k] -= t * rk;
        }
        act.add(d, Slot::Eq(i, positive), t);
    }

    let status = 'outer: loop {
        // most violated inactive inequality, in the form -a_i z >= -b_i
        let slack = &qp.b_in - &qp.a_in * &z;
        let mut worst: Option<(usize, f64)> = None;
        for (i, &s) in slack.iter().enumerate() {
            if act.ids.contains(&Slot::In(i)) {
                continue;
            }
            if s < -tol * (1.0 + qp.b_in[i].abs()) && worst.is_none_or(|(_, w)| s < w) {
                worst = Some((i, s));
            }
        }
        let Some((p, _)) = worst else {
            break QpStatus::Optimal;
        };
        let normal = -qp.a_in.row(p).transpose();
        let mut u_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                break 'outer QpStatus::MaxIterations;
            }
            let s_p = (normal.dot(&z) + qp.b_in[p]).min(0.0);
            let (d, step, r, nz) = act.directions(&normal);
            let full = if nz <= 1e-10 * d.norm() || act.q == n {
                None
            } else {
                Some(-s_p / (nz * nz))
            };
            let partial = act.blocking(&r);
            match (full, partial) {
                (None, None) => break 'outer QpStatus::Infeasible,
                (Some(t2), block) if block.is_none_or(|(t1, _)| t2 <= t1) => {
                    z += &step * t2;
                    for (k, rk) in r.iter().enumerate() {
                        act.u[k] -= t2 * rk;
                    }
                    act.add(d, Slot::In(p), u_p + t2);
                    break;
                }
                (full, Some((t1, k))) => {
                    if full.is_some() {
                        z += &step * t1;
                    }
                    for (idx, rk) in r.iter().enumerate() {
                        act.u[idx] -= t1 * rk;
                    }
                    u_p += t1;
                    act.drop(k);
                }
                (Some(_), None) => unreachable!(),
            }
        }
    };

    let mut lambda = DVector::zeros(m_eq);
    let mut mu = DVector::zeros(m_in);
    for (slot, &u) in act.ids.iter().zip(&act.u) {
        match *slot {
            Slot::Eq(i, positive) => lambda[i] = if positive { u } else { -u },
            Slot::In(i) => mu[i] = u.max(0.0),
        }
    }
    if !z.iter().all(|v| v.is_finite()) {
        return failure(QpStatus::NumericalFailure, z, iterations);
    }
    let residuals = qp.residuals(&z, &lambda, &mu);
    let scale = 1.0 + qp.b_eq.amax().max(qp.b_in.amax());
    let status = if status == QpStatus::Optimal && residuals.primal_eq.max(residuals.primal_in) > 1e3 * tol * scale {
        QpStatus::NumericalFailure
    } else {
        status
    };
    QpSolution { z, status, lambda_eq: lambda, mu_in: mu, iterations, residuals }
}
