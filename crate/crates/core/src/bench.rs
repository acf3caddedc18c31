//! Three-mass spring-damper benchmark with periodically varying stiffness and
//! damping, and the closed-loop comparison of all controllers on it.

use std::f64::consts::PI;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{receding_horizon, Controller, ControllerConfig, IndexSchedule, Mode, RunLog};
use crate::datapipe::{build_data_matrices, collect_offline, hankel_depth, recommended_length, required_ppe_order, DataMatrices};
use crate::error::{Error, Result};
use crate::excitation::is_ppe;
use crate::index_test::{run_index_test, IndexTestOutcome};
use crate::model::{matrix_rows, LtpSystem};
use crate::plant::{InputLaw, NoiseModel, Plant};

/// `mean + Σ_k sin[k] sin(2π(k+1)t) + cos[k] cos(2π(k+1)t)`, 1-periodic in `t` (seconds).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodicLaw {
    pub mean: f64,
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default)]
    pub cos: Vec<f64>,
}

impl PeriodicLaw {
    pub fn constant(mean: f64) -> Self {
        Self { mean, ..Default::default() }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let harmonic = |coef: &[f64], f: fn(f64) -> f64| {
            coef.iter()
                .enumerate()
                .map(|(k, a)| a * f(2.0 * PI * (k + 1) as f64 * t))
                .sum::<f64>()
        };
        self.mean + harmonic(&self.sin, f64::sin) + harmonic(&self.cos, f64::cos)
    }

    fn frozen(&self, t: f64) -> Self {
        Self::constant(self.eval(t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsdParams {
    pub masses: [f64; 3],
    /// `k1 .. k5`.
    pub springs: [PeriodicLaw; 5],
    /// `c1 .. c5`.
    pub dampers: [PeriodicLaw; 5],
}

impl Default for MsdParams {
    fn default() -> Self {
        let law = |mean, sin: &[f64], cos: &[f64]| PeriodicLaw { mean, sin: sin.to_vec(), cos: cos.to_vec() };
        let k1 = law(10.0, &[-4.0, 2.0], &[]);
        let k23 = law(7.0, &[], &[0.0, -3.0]);
        let k45 = law(4.0, &[0.0, -2.0], &[]);
        let c1 = law(9.0, &[3.0], &[]);
        let c23 = law(5.0, &[], &[2.0]);
        let c45 = PeriodicLaw::constant(15.0);
        Self {
            masses: [6.0, 4.0, 3.0],
            springs: [k1, k23.clone(), k23, k45.clone(), k45],
            dampers: [c1, c23.clone(), c23, c45.clone(), c45],
        }
    }
}

impl MsdParams {
    /// Parameters held at their values at time `t`.
    pub fn frozen(&self, t: f64) -> Self {
        Self {
            masses: self.masses,
            springs: self.springs.clone().map(|l| l.frozen(t)),
            dampers: self.dampers.clone().map(|l| l.frozen(t)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument("masses must be positive".into()));
        }
        let finite = |l: &PeriodicLaw| l.mean.is_finite() && l.sin.iter().chain(&l.cos).all(|v| v.is_finite());
        if !self.springs.iter().chain(&self.dampers).all(finite) {
            return Err(Error::InvalidArgument("parameter laws must be finite".into()));
        }
        Ok(())
    }
}

/// Continuous-time `(A_c, B_c)` at time `t` for the state
/// `(x1, x2, x3, ẋ1, ẋ2, ẋ3)` and inputs `(F, x4, x5)`.
///
/// k1/c1 tie mass 1 to the left wall, k2/c2 and k3/c3 couple mass 1 to masses 2
/// and 3, k4/k5 attach masses 2 and 3 to the moving ends x4/x5 and c4/c5 to the
/// right wall.
pub fn msd_dynamics(params: &MsdParams, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let k: Vec<f64> = params.springs.iter().map(|l| l.eval(t)).collect();
    let c: Vec<f64> = params.dampers.iter().map(|l| l.eval(t)).collect();
    let stiffness = DMatrix::from_row_slice(3, 3, &[
        k[0] + k[1] + k[2], -k[1], -k[2],
        -k[1], k[1] + k[3], 0.0,
        -k[2], 0.0, k[2] + k[4],
    ]);
    let damping = DMatrix::from_row_slice(3, 3, &[
        c[0] + c[1] + c[2], -c[1], -c[2],
        -c[1], c[1] + c[3], 0.0,
        -c[2], 0.0, c[2] + c[4],
    ]);
    let actuation = DMatrix::from_row_slice(3, 3, &[
        1.0, 0.0, 0.0,
        0.0, k[3], 0.0,
        0.0, 0.0, k[4],
    ]);
    let inv_mass = DMatrix::from_diagonal(&DVector::from_iterator(3, params.masses.iter().map(|m| 1.0 / m)));
    let mut a = DMatrix::zeros(6, 6);
    a.view_mut((0, 3), (3, 3)).fill_with_identity();
    a.view_mut((3, 0), (3, 3)).copy_from(&(-&inv_mass * stiffness));
    a.view_mut((3, 3), (3, 3)).copy_from(&(-&inv_mass * damping));
    let mut b = DMatrix::zeros(6, 3);
    b.view_mut((3, 0), (3, 3)).copy_from(&(inv_mass * actuation));
    (a, b)
}

/// Zero-order-hold discretization of `(A_c, B_c)` over `dt`.
pub fn zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = b.shape();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = aug.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

/// Discrete plant with period `T`: phase `j` uses the parameters frozen at `j dt`.
pub fn build_msd_plant(params: &MsdParams, dt: f64, period: usize) -> Result<LtpSystem> {
    params.validate()?;
    if !(dt > 0.0) || period == 0 {
        return Err(Error::InvalidArgument("need dt > 0 and T >= 1".into()));
    }
    if (dt * period as f64 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "dt * T = {} but the parameter laws have period 1 s",
            dt * period as f64
        )));
    }
    let mut c = DMatrix::zeros(3, 6);
    c.view_mut((0, 0), (3, 3)).fill_with_identity();
    let d = DMatrix::zeros(3, 3);
    let (mut av, mut bv) = (Vec::with_capacity(period), Vec::with_capacity(period));
    for j in 0..period {
        let (ac, bc) = msd_dynamics(params, j as f64 * dt);
        let (ad, bd) = zoh(&ac, &bc, dt);
        av.push(ad);
        bv.push(bd);
    }
    LtpSystem::new(av, bv, vec![c; period], vec![d; period])
}

/// Reference `value` from time `start` until the next step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStep {
    pub start: i64,
    pub value: Vec<f64>,
}

/// Piecewise-constant reference, zero before the first step.
pub fn reference_at(steps: &[ReferenceStep], p: usize, t: i64) -> DVector<f64> {
    steps
        .iter()
        .rev()
        .find(|s| s.start <= t)
        .map_or_else(|| DVector::zeros(p), |s| DVector::from_column_slice(&s.value))
}

fn default_reference() -> Vec<ReferenceStep> {
    [(40, [0.0, 0.0, 0.0]), (60, [5.0, 0.0, 0.0]), (80, [5.0, 15.0, 0.0]), (100, [5.0, 15.0, -10.0])]
        .into_iter()
        .map(|(start, v)| ReferenceStep { start, value: v.to_vec() })
        .collect()
}

/// The benchmark's reference signal.
pub fn reference_schedule(t: i64) -> DVector<f64> {
    reference_at(&default_reference(), 3, t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: MsdParams,
    pub dt: f64,
    #[serde(rename = "T")]
    pub period: usize,
    pub noise_variance: f64,
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
    #[serde(with = "crate::control::box_bounds")]
    pub u_box: Vec<[f64; 2]>,
    #[serde(with = "crate::control::box_bounds")]
    pub y_box: Vec<[f64; 2]>,
    #[serde(rename = "N_IT")]
    pub n_it: usize,
    #[serde(rename = "sigma_IT")]
    pub sigma_it: f64,
    pub lambda_y: f64,
    pub lambda_g: f64,
    #[serde(rename = "sigma_SPC")]
    pub sigma_spc: f64,
    /// Upper bound on the plant order used to size the offline record.
    pub order_bound: usize,
    /// Start time of the offline record.
    pub offline_start: i64,
    /// Offline record length; `None` uses the recommended length.
    pub offline_length: Option<usize>,
    pub offline_input_variance: f64,
    pub warmup_input_variance: f64,
    /// First time of the online process.
    pub online_start: i64,
    pub index_test_start: i64,
    pub control_start: i64,
    pub control_steps: usize,
    pub reference: Vec<ReferenceStep>,
    /// Number of trailing samples of each constant-reference segment used for the steady-state metric.
    pub steady_window: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "crate::control::default_qp_tol")]
    pub qp_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: MsdParams::default(),
            dt: 0.2,
            period: 5,
            noise_variance: 1e-3,
            l: 30,
            n: 30,
            n_c: 1,
            q: DMatrix::identity(3, 3),
            r: DMatrix::from_diagonal(&DVector::from_vec(vec![1e-6, 1e-4, 1e-4])),
            u_box: vec![[-8.0, 8.0], [-3.0, 3.0], [-3.0, 3.0]],
            y_box: vec![[-20.0, 20.0]; 3],
            n_it: 12,
            sigma_it: 1.0,
            lambda_y: 1e6,
            lambda_g: 1e-3,
            sigma_spc: 0.5,
            order_bound: 6,
            offline_start: -1997,
            offline_length: None,
            offline_input_variance: 1.0,
            warmup_input_variance: 0.1,
            online_start: -1,
            index_test_start: 29,
            control_start: 40,
            control_steps: 100,
            reference: default_reference(),
            steady_window: 15,
            seeds: (0..10).collect(),
            qp_tol: crate::qp::DEFAULT_QP_TOL,
        }
    }
}

impl ExperimentConfig {
    pub fn deterministic(mut self) -> Self {
        self.noise_variance = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.controller_config(Mode::Mpc).validate()?;
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if !(self.noise_variance >= 0.0 && self.offline_input_variance > 0.0 && self.warmup_input_variance > 0.0) {
            return bad("variances must be nonnegative and input variances positive");
        }
        if self.n_it == 0 || self.sigma_it < 0.0 {
            return bad("the index test needs N_IT >= 1 and sigma_IT >= 0");
        }
        if self.index_test_start - self.online_start < self.l as i64 {
            return bad("the online warm-up before the index test must cover L steps");
        }
        if self.index_test_start + self.n_it as i64 - 1 != self.control_start {
            return bad("control must start at the last index-test iteration");
        }
        if self.offline_start + self.offline_length() as i64 > self.online_start {
            return bad("the offline record must end before the online process starts");
        }
        if self.reference.windows(2).any(|w| w[0].start >= w[1].start) {
            return bad("reference step times must increase");
        }
        if self.reference.iter().any(|s| s.value.len() != self.q.nrows()) {
            return bad("reference values must have one entry per output");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        Ok(())
    }

    pub fn controller_config(&self, mode: Mode) -> ControllerConfig {
        ControllerConfig {
            l: self.l,
            n: self.n,
            n_c: self.n_c,
            q: self.q.clone(),
            r: self.r.clone(),
            u_box: self.u_box.clone(),
            y_box: self.y_box.clone(),
            lambda_y: self.lambda_y,
            lambda_g: self.lambda_g,
            sigma_spc: self.sigma_spc,
            mode,
            qp_tol: self.qp_tol,
        }
    }

    pub fn offline_length(&self) -> usize {
        self.offline_length.unwrap_or_else(|| {
            recommended_length(self.l, self.n, self.period, self.r.nrows(), self.order_bound)
        })
    }

    pub fn reference_at(&self, t: i64) -> DVector<f64> {
        reference_at(&self.reference, self.q.nrows(), t)
    }

    pub fn noise(&self) -> Option<NoiseModel> {
        (self.noise_variance > 0.0).then(|| NoiseModel::isotropic(self.noise_variance))
    }

    /// `[from, to)` windows of the last `steady_window` samples before every
    /// reference change inside the control interval and before its end.
    pub fn steady_windows(&self) -> Vec<(i64, i64)> {
        let end = self.control_start + self.control_steps as i64;
        let mut ends: Vec<i64> = self
            .reference
            .iter()
            .map(|s| s.start)
            .filter(|&t| t > self.control_start && t < end)
            .collect();
        ends.push(end);
        let w = self.steady_window as i64;
        let mut from = self.control_start;
        ends.into_iter()
            .map(|e| {
                let window = ((e - w).max(from), e);
                from = e;
                window
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The comparison arms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Mpc,
    Pdeepc,
    Pspc,
    RegPdeepc,
    RegPspc,
    /// Regularized DeePC with the first data set at every step.
    LtiDeepc,
    /// Regularized SPC with the first data set at every step.
    LtiSpc,
}

impl Arm {
    pub const ALL: [Arm; 7] = [Arm::Mpc, Arm::Pdeepc, Arm::Pspc, Arm::RegPdeepc, Arm::RegPspc, Arm::LtiDeepc, Arm::LtiSpc];
    /// MPC and the four regularized arms.
    pub const COMPARISON: [Arm; 5] = [Arm::Mpc, Arm::RegPdeepc, Arm::RegPspc, Arm::LtiDeepc, Arm::LtiSpc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Arm::Mpc => "mpc",
            Arm::Pdeepc => "pdeepc",
            Arm::Pspc => "pspc",
            Arm::RegPdeepc => "reg-pdeepc",
            Arm::RegPspc => "reg-pspc",
            Arm::LtiDeepc => "lti-deepc",
            Arm::LtiSpc => "lti-spc",
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Arm::Mpc => Mode::Mpc,
            Arm::Pdeepc => Mode::Pdeepc,
            Arm::Pspc => Mode::Pspc,
            Arm::RegPdeepc | Arm::LtiDeepc => Mode::RegPdeepc,
            Arm::RegPspc | Arm::LtiSpc => Mode::RegPspc,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('_', "-");
        Arm::ALL
            .into_iter()
            .find(|a| a.as_str() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown arm {s:?}")))
    }
}

/// Independent random streams of one seed.
#[derive(Clone, Copy, Debug)]
struct Streams {
    offline_input: u64,
    offline_noise: u64,
    online_noise: u64,
    warmup: u64,
    index_test: u64,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            offline_input: rng.next_u64(),
            offline_noise: rng.next_u64(),
            online_noise: rng.next_u64(),
            warmup: rng.next_u64(),
            index_test: rng.next_u64(),
        }
    }
}

fn noisy_plant(sys: &LtpSystem, t0: i64, noise: Option<NoiseModel>, seed: u64) -> Result<Plant> {
    let plant = Plant::new(sys.clone(), t0, DVector::zeros(sys.n()))?;
    Ok(match noise {
        Some(nm) => plant.with_noise(nm, seed),
        None => plant,
    })
}

/// Offline record and its data matrices; fails if the record is not
/// persistently exciting of the required order.
pub fn collect_benchmark_data(cfg: &ExperimentConfig, sys: &LtpSystem, seed: u64) -> Result<DataMatrices> {
    let streams = Streams::new(seed);
    let mut plant = noisy_plant(sys, cfg.offline_start, cfg.noise(), streams.offline_noise)?;
    let law = InputLaw::Gaussian { variance: cfg.offline_input_variance };
    let w = collect_offline(&mut plant, cfg.offline_start, cfg.offline_length(), law, streams.offline_input)?;
    let order = required_ppe_order(cfg.l, cfg.n, cfg.period, cfg.order_bound);
    if !is_ppe(&w.u_matrix(), order, cfg.period)? {
        return Err(Error::InsufficientData(format!(
            "offline input is not {}-periodically persistently exciting of order {order}",
            cfg.period
        )));
    }
    debug_assert!(w.len() >= hankel_depth(cfg.l, cfg.n, cfg.period));
    build_data_matrices(&w, cfg.l, cfg.n, cfg.period)
}

/// Online plant after warm-up and index test, positioned at `control_start`.
pub fn warm_start(cfg: &ExperimentConfig, sys: &LtpSystem, data: &DataMatrices, seed: u64) -> Result<(Plant, IndexTestOutcome)> {
    let streams = Streams::new(seed);
    let mut plant = noisy_plant(sys, cfg.online_start, cfg.noise(), streams.online_noise)?;
    let law = InputLaw::Gaussian { variance: cfg.warmup_input_variance };
    let mut rng = ChaCha8Rng::seed_from_u64(streams.warmup);
    while plant.time() < cfg.index_test_start {
        plant.step(&law.sample(&mut rng, sys.m()))?;
    }
    let outcome = run_index_test(data, &mut plant, cfg.index_test_start, cfg.sigma_it, cfg.n_it, law, streams.index_test)?;
    debug_assert_eq!(plant.time(), cfg.control_start);
    Ok((plant, outcome))
}

#[derive(Clone, Debug)]
pub struct ArmResult {
    pub arm: Arm,
    /// Data set index used at the first control step (`None` for MPC).
    pub theta: Option<usize>,
    pub log: RunLog,
}

impl ArmResult {
    /// Median one-step cost of each steady-state window.
    pub fn steady_medians(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        cfg.steady_windows()
            .into_iter()
            .map(|w| median(self.window_costs(w)))
            .collect()
    }

    /// Median over all steady-state windows pooled together.
    pub fn steady_cost(&self, cfg: &ExperimentConfig) -> f64 {
        median(cfg.steady_windows().into_iter().flat_map(|w| self.window_costs(w)).collect())
    }

    fn window_costs(&self, (from, to): (i64, i64)) -> Vec<f64> {
        self.log
            .records
            .iter()
            .filter(|r| r.t >= from && r.t < to)
            .map(|r| r.one_step_cost)
            .collect()
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub seed: u64,
    pub index_test: IndexTestOutcome,
    /// Bookkept `Θ(control_start)`.
    pub proper_index: usize,
    pub arms: Vec<ArmResult>,
}

impl ExperimentResult {
    pub fn index_test_correct(&self) -> bool {
        self.index_test.theta_hat == self.proper_index
    }

    pub fn arm(&self, arm: Arm) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    /// Writes one cost CSV per arm, the index-test history, a summary and a gnuplot script.
    pub fn write_outputs(&self, cfg: &ExperimentConfig, dir: &Path, include_timing: bool) -> Result<()> {
        fs::create_dir_all(dir)?;
        for a in &self.arms {
            let f = BufWriter::new(File::create(dir.join(format!("run_{}.csv", a.arm)))?);
            a.log.write_csv(f, include_timing)?;
        }
        self.index_test
            .write_history_csv(BufWriter::new(File::create(dir.join("index_test.csv"))?))?;
        let summary = serde_json::json!({
            "seed": self.seed,
            "theta_hat": self.index_test.theta_hat,
            "proper_index": self.proper_index,
            "arms": self.arms.iter().map(|a| serde_json::json!({
                "arm": a.arm,
                "theta": a.theta,
                "steps": a.log.records.len(),
                "solver_calls": a.log.solver_calls,
                "abort": a.log.abort,
                "steady_medians": a.steady_medians(cfg),
                "steady_cost": a.steady_cost(cfg),
            })).collect::<Vec<_>>(),
        });
        let mut f = File::create(dir.join("summary.json"))?;
        f.write_all(serde_json::to_string_pretty(&summary)?.as_bytes())?;
        f.write_all(b"\n")?;
        let arms: Vec<Arm> = self.arms.iter().map(|a| a.arm).collect();
        fs::write(dir.join("plot.gp"), gnuplot_script(&arms))?;
        Ok(())
    }
}

/// Gnuplot script drawing the one-step cost of every `run_<arm>.csv` on a log scale.
pub fn gnuplot_script(arms: &[Arm]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale y\n\
         set xlabel 't'\nset ylabel 'one-step cost'\nset terminal pngcairo size 1000,600\n\
         set output 'cost.png'\n",
    );
    let plots: Vec<String> = arms
        .iter()
        .map(|a| format!("'run_{a}.csv' using 1:'one_step_cost' with lines title '{a}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

/// Runs the whole benchmark for one seed; arms run in parallel from identical
/// copies of the warm plant, so they see the same noise realization.
pub fn run_experiment(cfg: &ExperimentConfig, arms: &[Arm], seed: u64) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sys = build_msd_plant(&cfg.params, cfg.dt, cfg.period)?;
    let data = collect_benchmark_data(cfg, &sys, seed)?;
    let (plant, index_test) = warm_start(cfg, &sys, &data, seed)?;
    let proper_index = data.proper_index(cfg.control_start).expect("data keeps its start time");
    let schedule = |t: i64| cfg.reference_at(t);
    let arms = arms
        .par_iter()
        .map(|&arm| {
            let mode = arm.mode();
            let ccfg = cfg.controller_config(mode);
            let (controller, theta, index) = match arm {
                Arm::Mpc => (Controller::model_based(sys.clone(), ccfg), None, IndexSchedule::Fixed(1)),
                Arm::LtiDeepc | Arm::LtiSpc => {
                    (Controller::data_driven(data.clone(), ccfg), Some(1), IndexSchedule::Fixed(1))
                }
                _ => {
                    let th = index_test.theta_hat;
                    (Controller::data_driven(data.clone(), ccfg), Some(th), IndexSchedule::Cyclic(th))
                }
            };
            let log = match controller {
                Ok(c) => receding_horizon(&mut plant.clone(), &c, index, &schedule, cfg.control_steps),
                Err(e) => RunLog { abort: Some(e.to_string()), ..Default::default() },
            };
            ArmResult { arm, theta, log }
        })
        .collect();
    Ok(ExperimentResult { seed, index_test, proper_index, arms })
}
