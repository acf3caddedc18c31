//! Predictive controllers posed as convex QPs and the receding-horizon loop.
//!
//! All controllers minimize
//!
//! ```text
//!     Σ_i ‖y_i - r_i‖²_Q + ‖u_i‖²_R,      ‖v‖²_Q = vᵀ Q v,
//! ```
//!
//! over the prediction horizon subject to box constraints on every predicted
//! input and output. They differ in how predictions are formed:
//!
//! * `pdeepc`: trajectories in the column span of the data matrices of the
//!   current index. The span is parametrized by an orthonormal basis `U_r α`
//!   and the returned `g` is the minimum-norm combination reproducing it.
//! * `reg_pdeepc`: decision variable `g`, with the past outputs softened by a
//!   slack `σ_y = Y_p g - y_p` and penalties `λ_y ‖σ_y‖² + λ_g ‖g‖²`.
//! * `pspc` / `reg_pspc`: least-squares predictor `Y_f [U_p; U_f; Y_p]^+`,
//!   the regularized variant dropping singular values below `σ_SPC`.
//! * `mpc`: the model and the true state, states condensed out.

use std::io::Write;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorSplit;
use crate::datapipe::DataMatrices;
use crate::error::{dim_err, Error, Result};
use crate::index_test::advance_index;
use crate::linalg::{block_diag_repeat, pinv, pinv_abs, rank_factor, vconcat, vstack, DEFAULT_RANK_TOL};
use crate::model::{matrix_rows, LtpSystem};
use crate::plant::Plant;
use crate::qp::{solve_qp, KktResiduals, QpProblem, QpStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pdeepc,
    Pspc,
    RegPdeepc,
    RegPspc,
    Mpc,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Pdeepc => "pdeepc",
            Mode::Pspc => "pspc",
            Mode::RegPdeepc => "reg_pdeepc",
            Mode::RegPspc => "reg_pspc",
            Mode::Mpc => "mpc",
        }
    }

    pub fn is_data_driven(&self) -> bool {
        !matches!(self, Mode::Mpc)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "pdeepc" => Ok(Mode::Pdeepc),
            "pspc" => Ok(Mode::Pspc),
            "reg_pdeepc" => Ok(Mode::RegPdeepc),
            "reg_pspc" => Ok(Mode::RegPspc),
            "mpc" => Ok(Mode::Mpc),
            other => Err(Error::InvalidArgument(format!("unknown controller mode {other:?}"))),
        }
    }
}

pub(crate) mod box_bounds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(b: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
        let open = |v: f64| v.is_finite().then_some(v);
        b.iter().map(|[lo, hi]| [open(*lo), open(*hi)]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<[f64; 2]>, D::Error> {
        let raw = Vec::<[Option<f64>; 2]>::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|[lo, hi]| [lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)])
            .collect())
    }
}

pub(crate) fn default_qp_tol() -> f64 {
    crate::qp::DEFAULT_QP_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_c")]
    pub n_c: usize,
    #[serde(rename = "Q", with = "matrix_rows")]
    pub q: DMatrix<f64>,
    #[serde(rename = "R", with = "matrix_rows")]
    pub r: DMatrix<f64>,
    /// `[lo, hi]` per input coordinate; `null` in JSON for an open side.
    #[serde(with = "box_bounds")]
    pub u_box: Vec<[f64; 2]>,
    /// `[lo, hi]` per output coordinate.
    #[serde(with = "box_bounds")]
    pub y_box: Vec<[f64; 2]>,
    pub lambda_y: f64,
    pub lambda_g: f64,
    pub sigma_spc: f64,
    pub mode: Mode,
    #[serde(default = "default_qp_tol")]
    pub qp_tol: f64,
}

impl ControllerConfig {
    /// Unconstrained configuration with identity weights.
    pub fn new(l: usize, n: usize, m: usize, p: usize, mode: Mode) -> Self {
        Self {
            l,
            n,
            n_c: 1,
            q: DMatrix::identity(p, p),
            r: DMatrix::identity(m, m),
            u_box: vec![[f64::NEG_INFINITY, f64::INFINITY]; m],
            y_box: vec![[f64::NEG_INFINITY, f64::INFINITY]; p],
            lambda_y: 1.0,
            lambda_g: 1.0,
            sigma_spc: 0.0,
            mode,
            qp_tol: default_qp_tol(),
        }
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }
    pub fn p(&self) -> usize {
        self.q.nrows()
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let (m, p) = (self.m(), self.p());
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.l == 0 || self.n == 0 || self.n_c == 0 || self.n_c > self.n {
            return bad(format!("horizons L={}, N={}, N_c={} are invalid", self.l, self.n, self.n_c));
        }
        if self.q.shape() != (p, p) || self.r.shape() != (m, m) {
            return Err(dim_err("Q and R must be square"));
        }
        if self.u_box.len() != m || self.y_box.len() != p {
            return Err(dim_err(format!(
                "box constraints have {} input and {} output bounds, expected {m} and {p}",
                self.u_box.len(),
                self.y_box.len()
            )));
        }
        if self.u_box.iter().chain(&self.y_box).any(|b| !(b[0] <= b[1])) {
            return bad("every box needs lo <= hi".into());
        }
        let sym = |w: &DMatrix<f64>| (w - w.transpose()).amax() <= 1e-12 * w.amax().max(1.0);
        if !sym(&self.q) || !sym(&self.r) {
            return bad("Q and R must be symmetric".into());
        }
        let q_min = self.q.clone().symmetric_eigenvalues().min();
        if q_min < -1e-12 * self.q.amax().max(1.0) {
            return bad("Q must be positive semidefinite".into());
        }
        if self.r.clone().cholesky().is_none() {
            return bad("R must be positive definite".into());
        }
        if !(self.lambda_y > 0.0 && self.lambda_g > 0.0 && self.sigma_spc >= 0.0) {
            return bad("need lambda_y > 0, lambda_g > 0 and sigma_spc >= 0".into());
        }
        Ok(())
    }

    fn weights(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (block_diag_repeat(&self.q, self.n), block_diag_repeat(&self.r, self.n))
    }

    fn stacked_box(b: &[[f64; 2]], n: usize) -> (DVector<f64>, DVector<f64>) {
        let q = b.len();
        (
            DVector::from_fn(q * n, |i, _| b[i % q][0]),
            DVector::from_fn(q * n, |i, _| b[i % q][1]),
        )
    }

    fn u_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        Self::stacked_box(&self.u_box, self.n)
    }

    fn y_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        Self::stacked_box(&self.y_box, self.n)
    }

    /// `Σ ‖y_i - r_i‖²_Q + ‖u_i‖²_R` over stacked sequences.
    pub fn horizon_cost(&self, u: &DVector<f64>, y: &DVector<f64>, r: &DVector<f64>) -> f64 {
        let (m, p) = (self.m(), self.p());
        let steps = u.len() / m;
        (0..steps)
            .map(|i| {
                let e = y.rows(i * p, p) - r.rows(i * p, p);
                let ui = u.rows(i * m, m);
                e.dot(&(&self.q * &e)) + ui.dot(&(&self.r * ui))
            })
            .sum()
    }
}

/// Optimal predicted trajectory.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub u_star: DVector<f64>,
    pub y_star: DVector<f64>,
    /// Data-column combination (data-driven predictors other than SPC).
    pub g: Option<DVector<f64>>,
    /// Past-output slack (regularized DeePC).
    pub sigma_y: Option<DVector<f64>>,
    /// Predicted states `x_t .. x_{t+N}` (MPC).
    pub x_star: Option<Vec<DVector<f64>>>,
    /// Horizon tracking cost of `(u_star, y_star)`.
    pub cost: f64,
    pub status: QpStatus,
    pub iterations: usize,
    pub residuals: KktResiduals,
}

fn check_status(status: QpStatus) -> Result<()> {
    match status {
        QpStatus::Optimal => Ok(()),
        QpStatus::Infeasible => Err(Error::Infeasible),
        other => Err(Error::Solver(other.to_string())),
    }
}

enum Prepared {
    /// Orthonormal span basis split into past rows, future input and future output rows.
    Span {
        q_p: DMatrix<f64>,
        q_uf: DMatrix<f64>,
        q_yf: DMatrix<f64>,
        /// `V_r Σ_r^{-1}`, mapping `α` to the minimum-norm `g`.
        to_g: DMatrix<f64>,
        hessian: DMatrix<f64>,
    },
    Regularized {
        hessian: DMatrix<f64>,
    },
    Predictor {
        m_up: DMatrix<f64>,
        m_uf: DMatrix<f64>,
        m_yp: DMatrix<f64>,
        hessian: DMatrix<f64>,
    },
}

fn prepare(set: &BehaviorSplit, cfg: &ControllerConfig) -> Prepared {
    let (qbar, rbar) = cfg.weights();
    match cfg.mode {
        Mode::Pdeepc => {
            let (u, s, v) = rank_factor(&set.stacked(), DEFAULT_RANK_TOL);
            let (m, p, l, n) = (set.m(), set.p(), set.l, set.n);
            let past_u = u.rows(0, m * l).into_owned();
            let q_uf = u.rows(m * l, m * n).into_owned();
            let past_y = u.rows(m * (l + n), p * l).into_owned();
            let q_yf = u.rows(m * (l + n) + p * l, p * n).into_owned();
            let q_p = vstack(&[&past_u, &past_y]);
            let mut to_g = v;
            for (j, sj) in s.iter().enumerate() {
                to_g.column_mut(j).scale_mut(1.0 / sj);
            }
            // ρ‖Q_p α‖² is constant on the feasible set and makes the Hessian definite.
            let core = (q_uf.transpose() * &rbar * &q_uf + q_yf.transpose() * &qbar * &q_yf) * 2.0;
            let rho = core.diagonal().amax().max(1.0);
            let hessian = core + q_p.transpose() * &q_p * rho;
            Prepared::Span { q_p, q_uf, q_yf, to_g, hessian }
        }
        Mode::RegPdeepc => {
            let h = set.cols();
            let hessian = (set.u_f.transpose() * &rbar * &set.u_f
                + set.y_f.transpose() * &qbar * &set.y_f
                + DMatrix::identity(h, h) * cfg.lambda_g
                + set.y_p.transpose() * &set.y_p * cfg.lambda_y)
                * 2.0;
            Prepared::Regularized { hessian }
        }
        Mode::Pspc | Mode::RegPspc => {
            let lhs = vstack(&[&set.u_p, &set.u_f, &set.y_p]);
            let inv = if cfg.mode == Mode::RegPspc {
                pinv_abs(&lhs, cfg.sigma_spc)
            } else {
                pinv(&lhs, DEFAULT_RANK_TOL)
            };
            let pred = &set.y_f * inv;
            let (m, p, l, n) = (set.m(), set.p(), set.l, set.n);
            let m_up = pred.columns(0, m * l).into_owned();
            let m_uf = pred.columns(m * l, m * n).into_owned();
            let m_yp = pred.columns(m * (l + n), p * l).into_owned();
            let hessian = (m_uf.transpose() * &qbar * &m_uf + &rbar) * 2.0;
            Prepared::Predictor { m_up, m_uf, m_yp, hessian }
        }
        Mode::Mpc => unreachable!("model-based mode has no data preparation"),
    }
}

fn solve_prepared(
    prep: &Prepared,
    set: &BehaviorSplit,
    w_past: &DVector<f64>,
    r: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<Prediction> {
    let (m, p, l) = (set.m(), set.p(), set.l);
    let u_p = w_past.rows(0, m * l).into_owned();
    let y_p = w_past.rows(m * l, p * l).into_owned();
    let (qbar, _) = cfg.weights();
    let (u_lo, u_hi) = cfg.u_bounds();
    let (y_lo, y_hi) = cfg.y_bounds();
    let tol = cfg.qp_tol;

    let finish = |u: DVector<f64>, y: DVector<f64>, g, sigma_y, sol: &crate::qp::QpSolution| Prediction {
        cost: cfg.horizon_cost(&u, &y, r),
        u_star: u,
        y_star: y,
        g,
        sigma_y,
        x_star: None,
        status: sol.status,
        iterations: sol.iterations,
        residuals: sol.residuals,
    };

    match prep {
        Prepared::Span { q_p, q_uf, q_yf, to_g, hessian } => {
            let f = -(q_yf.transpose() * &qbar * r) * 2.0;
            let empty = DMatrix::zeros(0, hessian.ncols());
            let mut qp = QpProblem::new(hessian.clone(), f, q_p.clone(), w_past.clone(), empty, DVector::zeros(0))?;
            qp.add_bounds(q_uf, &u_lo, &u_hi)?;
            qp.add_bounds(q_yf, &y_lo, &y_hi)?;
            let sol = solve_qp(&qp, tol);
            check_status(sol.status)?;
            let alpha = &sol.z;
            Ok(finish(q_uf * alpha, q_yf * alpha, Some(to_g * alpha), None, &sol))
        }
        Prepared::Regularized { hessian } => {
            let f = -(set.y_f.transpose() * &qbar * r + set.y_p.transpose() * &y_p * cfg.lambda_y) * 2.0;
            let empty = DMatrix::zeros(0, hessian.ncols());
            let mut qp = QpProblem::new(hessian.clone(), f, set.u_p.clone(), u_p, empty, DVector::zeros(0))?;
            qp.add_bounds(&set.u_f, &u_lo, &u_hi)?;
            qp.add_bounds(&set.y_f, &y_lo, &y_hi)?;
            let sol = solve_qp(&qp, tol);
            check_status(sol.status)?;
            let g = sol.z.clone();
            let sigma_y = &set.y_p * &g - &y_p;
            Ok(finish(&set.u_f * &g, &set.y_f * &g, Some(g), Some(sigma_y), &sol))
        }
        Prepared::Predictor { m_up, m_uf, m_yp, hessian } => {
            let offset = m_up * &u_p + m_yp * &y_p;
            let f = (m_uf.transpose() * &qbar * (&offset - r)) * 2.0;
            let mut qp = QpProblem::unconstrained(hessian.clone(), f)?;
            let nu = hessian.ncols();
            qp.add_bounds(&DMatrix::identity(nu, nu), &u_lo, &u_hi)?;
            qp.add_bounds(m_uf, &(&y_lo - &offset), &(&y_hi - &offset))?;
            let sol = solve_qp(&qp, tol);
            check_status(sol.status)?;
            let u = sol.z.clone();
            let y = &offset + m_uf * &u;
            Ok(finish(u, y, None, None, &sol))
        }
    }
}

fn check_data_inputs(data: &DataMatrices, w_past: &DVector<f64>, r: &DVector<f64>, cfg: &ControllerConfig) -> Result<()> {
    if data.l() != cfg.l || data.n() != cfg.n {
        return Err(dim_err(format!(
            "data horizons (L={}, N={}) differ from the configuration (L={}, N={})",
            data.l(),
            data.n(),
            cfg.l,
            cfg.n
        )));
    }
    if data.m() != cfg.m() || data.p() != cfg.p() {
        return Err(dim_err("data dimensions differ from the weights"));
    }
    if w_past.len() != (cfg.m() + cfg.p()) * cfg.l {
        return Err(dim_err(format!(
            "past trajectory has length {}, expected {}",
            w_past.len(),
            (cfg.m() + cfg.p()) * cfg.l
        )));
    }
    if r.len() != cfg.p() * cfg.n {
        return Err(dim_err(format!("reference has length {}, expected {}", r.len(), cfg.p() * cfg.n)));
    }
    Ok(())
}

/// P-DeePC (plain or regularized according to `cfg.mode`) with data set `theta`.
pub fn solve_pdeepc(data: &DataMatrices, theta: usize, w_past: &DVector<f64>, r: &DVector<f64>, cfg: &ControllerConfig) -> Result<Prediction> {
    if !matches!(cfg.mode, Mode::Pdeepc | Mode::RegPdeepc) {
        return Err(Error::InvalidArgument(format!("mode {} is not a DeePC mode", cfg.mode.as_str())));
    }
    cfg.validate()?;
    check_data_inputs(data, w_past, r, cfg)?;
    let set = data.set(theta)?;
    solve_prepared(&prepare(set, cfg), set, w_past, r, cfg)
}

/// P-SPC (plain or regularized according to `cfg.mode`) with data set `theta`.
pub fn solve_pspc(data: &DataMatrices, theta: usize, w_past: &DVector<f64>, r: &DVector<f64>, cfg: &ControllerConfig) -> Result<Prediction> {
    if !matches!(cfg.mode, Mode::Pspc | Mode::RegPspc) {
        return Err(Error::InvalidArgument(format!("mode {} is not an SPC mode", cfg.mode.as_str())));
    }
    cfg.validate()?;
    check_data_inputs(data, w_past, r, cfg)?;
    let set = data.set(theta)?;
    solve_prepared(&prepare(set, cfg), set, w_past, r, cfg)
}

struct MpcPrepared {
    obsv: DMatrix<f64>,
    impulse: DMatrix<f64>,
    hessian: DMatrix<f64>,
}

fn prepare_mpc(sys: &LtpSystem, t: i64, cfg: &ControllerConfig) -> Result<MpcPrepared> {
    let sm = sys.system_matrices(t, t + cfg.n as i64 - 1)?;
    let (qbar, rbar) = cfg.weights();
    let hessian = (sm.impulse.transpose() * &qbar * &sm.impulse + rbar) * 2.0;
    Ok(MpcPrepared { obsv: sm.obsv, impulse: sm.impulse, hessian })
}

fn solve_mpc_prepared(
    prep: &MpcPrepared,
    sys: &LtpSystem,
    t: i64,
    x_t: &DVector<f64>,
    r: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<Prediction> {
    let (qbar, _) = cfg.weights();
    let free = &prep.obsv * x_t;
    let f = (prep.impulse.transpose() * &qbar * (&free - r)) * 2.0;
    let mut qp = QpProblem::unconstrained(prep.hessian.clone(), f)?;
    let nu = prep.hessian.ncols();
    let (u_lo, u_hi) = cfg.u_bounds();
    let (y_lo, y_hi) = cfg.y_bounds();
    qp.add_bounds(&DMatrix::identity(nu, nu), &u_lo, &u_hi)?;
    qp.add_bounds(&prep.impulse, &(&y_lo - &free), &(&y_hi - &free))?;
    let sol = solve_qp(&qp, cfg.qp_tol);
    check_status(sol.status)?;
    let u = sol.z.clone();
    let y = &free + &prep.impulse * &u;
    let umat = DMatrix::from_column_slice(cfg.m(), cfg.n, u.as_slice());
    let states = sys.simulate(t, x_t, &umat)?.states;
    Ok(Prediction {
        cost: cfg.horizon_cost(&u, &y, r),
        u_star: u,
        y_star: y,
        g: None,
        sigma_y: None,
        x_star: Some(states),
        status: sol.status,
        iterations: sol.iterations,
        residuals: sol.residuals,
    })
}

/// Model-based MPC from the exact state `x_t` at time `t`.
pub fn solve_mpc(sys: &LtpSystem, t: i64, x_t: &DVector<f64>, r: &DVector<f64>, cfg: &ControllerConfig) -> Result<Prediction> {
    if cfg.mode != Mode::Mpc {
        return Err(Error::InvalidArgument(format!("mode {} is not mpc", cfg.mode.as_str())));
    }
    cfg.validate()?;
    if sys.m() != cfg.m() || sys.p() != cfg.p() {
        return Err(dim_err("system dimensions differ from the weights"));
    }
    if x_t.len() != sys.n() {
        return Err(dim_err(format!("state has length {}, expected {}", x_t.len(), sys.n())));
    }
    if r.len() != cfg.p() * cfg.n {
        return Err(dim_err(format!("reference has length {}, expected {}", r.len(), cfg.p() * cfg.n)));
    }
    solve_mpc_prepared(&prepare_mpc(sys, t, cfg)?, sys, t, x_t, r, cfg)
}

enum Source {
    Data {
        data: DataMatrices,
        prepared: Vec<OnceLock<Prepared>>,
    },
    Model {
        sys: LtpSystem,
        prepared: Vec<OnceLock<MpcPrepared>>,
    },
}

/// A configured controller that caches its per-index (or per-phase) matrices.
pub struct Controller {
    cfg: ControllerConfig,
    source: Source,
}

impl Controller {
    pub fn data_driven(data: DataMatrices, cfg: ControllerConfig) -> Result<Self> {
        if !cfg.mode.is_data_driven() {
            return Err(Error::InvalidArgument("mpc needs a model".into()));
        }
        cfg.validate()?;
        let probe_w = DVector::zeros((cfg.m() + cfg.p()) * cfg.l);
        let probe_r = DVector::zeros(cfg.p() * cfg.n);
        check_data_inputs(&data, &probe_w, &probe_r, &cfg)?;
        let prepared = (0..data.period()).map(|_| OnceLock::new()).collect();
        Ok(Self { cfg, source: Source::Data { data, prepared } })
    }

    pub fn model_based(sys: LtpSystem, cfg: ControllerConfig) -> Result<Self> {
        if cfg.mode != Mode::Mpc {
            return Err(Error::InvalidArgument("a model-based controller needs mode mpc".into()));
        }
        cfg.validate()?;
        if sys.m() != cfg.m() || sys.p() != cfg.p() {
            return Err(dim_err("system dimensions differ from the weights"));
        }
        let prepared = (0..sys.period()).map(|_| OnceLock::new()).collect();
        Ok(Self { cfg, source: Source::Model { sys, prepared } })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    /// Data-driven prediction with data set `theta`.
    pub fn solve_data(&self, theta: usize, w_past: &DVector<f64>, r: &DVector<f64>) -> Result<Prediction> {
        let Source::Data { data, prepared } = &self.source else {
            return Err(Error::InvalidArgument("controller is model-based".into()));
        };
        check_data_inputs(data, w_past, r, &self.cfg)?;
        let set = data.set(theta)?;
        let prep = prepared[theta - 1].get_or_init(|| prepare(set, &self.cfg));
        solve_prepared(prep, set, w_past, r, &self.cfg)
    }

    /// Model-based prediction from state `x_t` at time `t`.
    pub fn solve_model(&self, t: i64, x_t: &DVector<f64>, r: &DVector<f64>) -> Result<Prediction> {
        let Source::Model { sys, prepared } = &self.source else {
            return Err(Error::InvalidArgument("controller is data-driven".into()));
        };
        if x_t.len() != sys.n() || r.len() != self.cfg.p() * self.cfg.n {
            return Err(dim_err("state or reference has the wrong length"));
        }
        let slot = &prepared[sys.phase(t)];
        let prep = match slot.get() {
            Some(p) => p,
            None => {
                let fresh = prepare_mpc(sys, t, &self.cfg)?;
                slot.get_or_init(|| fresh)
            }
        };
        solve_mpc_prepared(prep, sys, t, x_t, r, &self.cfg)
    }
}

/// How the data-set index evolves during a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexSchedule {
    /// Start at the given index and advance it with time.
    Cyclic(usize),
    /// Always use the given index.
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub t: i64,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub r: DVector<f64>,
    pub one_step_cost: f64,
    pub solve_time_ms: f64,
    pub status: QpStatus,
}

#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub records: Vec<RunRecord>,
    pub solver_calls: usize,
    /// Reason the run stopped early, if it did.
    pub abort: Option<String>,
}

impl RunLog {
    pub fn costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.one_step_cost).collect()
    }

    /// CSV with columns `t, u_*, y_*, r_*, one_step_cost, solve_time_ms, qp_status`.
    /// With `include_timing` off the timing column is written as 0 so that
    /// repeated runs produce identical files.
    pub fn write_csv<W: Write>(&self, w: W, include_timing: bool) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let (m, p) = self
            .records
            .first()
            .map_or((0, 0), |r| (r.u.len(), r.y.len()));
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("u_{i}")));
        header.extend((1..=p).map(|i| format!("y_{i}")));
        header.extend((1..=p).map(|i| format!("r_{i}")));
        header.extend(["one_step_cost", "solve_time_ms", "qp_status"].map(String::from));
        wr.write_record(&header)?;
        for rec in &self.records {
            let mut row = vec![rec.t.to_string()];
            row.extend(rec.u.iter().map(|v| v.to_string()));
            row.extend(rec.y.iter().map(|v| v.to_string()));
            row.extend(rec.r.iter().map(|v| v.to_string()));
            row.push(rec.one_step_cost.to_string());
            row.push(if include_timing { format!("{:.3}", rec.solve_time_ms) } else { "0".into() });
            row.push(rec.status.to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Stacks `schedule(t) .. schedule(t + n - 1)`.
pub fn stacked_reference(schedule: &dyn Fn(i64) -> DVector<f64>, t: i64, n: usize) -> DVector<f64> {
    let parts: Vec<DVector<f64>> = (0..n as i64).map(|k| schedule(t + k)).collect();
    vconcat(&parts.iter().collect::<Vec<_>>())
}

/// Runs `steps` closed-loop steps: solve, apply the first `N_c` inputs, shift.
///
/// Data-driven controllers read the last `L` recorded samples of `plant`;
/// the model-based controller reads its exact state. A solver failure ends the
/// run and is reported in [`RunLog::abort`] together with the partial log.
pub fn receding_horizon(
    plant: &mut Plant,
    controller: &Controller,
    index: IndexSchedule,
    schedule: &dyn Fn(i64) -> DVector<f64>,
    steps: usize,
) -> RunLog {
    let cfg = controller.config();
    let mut log = RunLog::default();
    let period = match &controller.source {
        Source::Data { data, .. } => data.period(),
        Source::Model { sys, .. } => sys.period(),
    };
    let mut theta = match index {
        IndexSchedule::Cyclic(t) | IndexSchedule::Fixed(t) => t,
    };
    while log.records.len() < steps {
        let t = plant.time();
        let r = stacked_reference(schedule, t, cfg.n);
        let started = Instant::now();
        let plan = match &controller.source {
            Source::Data { .. } => plant
                .past_window(cfg.l)
                .and_then(|w| controller.solve_data(theta, &w.w_vector(), &r)),
            Source::Model { .. } => controller.solve_model(t, plant.state(), &r),
        };
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        log.solver_calls += 1;
        let plan = match plan {
            Ok(p) => p,
            Err(e) => {
                log.abort = Some(format!("t = {t}: {e}"));
                break;
            }
        };
        let apply = cfg.n_c.min(steps - log.records.len());
        for k in 0..apply {
            let u = plan.u_star.rows(k * cfg.m(), cfg.m()).into_owned();
            let rk = r.rows(k * cfg.p(), cfg.p()).into_owned();
            let y = match plant.step(&u) {
                Ok(y) => y,
                Err(e) => {
                    log.abort = Some(format!("t = {}: {e}", t + k as i64));
                    return log;
                }
            };
            let e = &y - &rk;
            let one_step_cost = e.dot(&(&cfg.q * &e)) + u.dot(&(&cfg.r * &u));
            log.records.push(RunRecord {
                t: t + k as i64,
                u,
                y,
                r: rk,
                one_step_cost,
                solve_time_ms: if k == 0 { elapsed } else { 0.0 },
                status: plan.status,
            });
        }
        if let IndexSchedule::Cyclic(_) = index {
            theta = advance_index(theta, apply, period);
        }
    }
    log
}
