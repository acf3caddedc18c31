mod common;

use ltp_ddpc::control::{solve_mpc, solve_pdeepc, solve_pspc, ControllerConfig, Mode};
use ltp_ddpc::plant::{InputLaw, Plant};
use ltp_ddpc::testbed::gaussian_matrix;
use nalgebra::DVector;
use proptest::prelude::*;

struct Instance {
    sys: ltp_ddpc::LtpSystem,
    data: ltp_ddpc::datapipe::DataMatrices,
    plant: Plant,
    r: DVector<f64>,
    cfg: ControllerConfig,
}

fn instance(seed: u64, n: usize, m: usize, p: usize, period: usize, tight: bool) -> Instance {
    let sys = common::system(seed, n, m, p, period);
    let (l, horizon) = (n * period, 2 * period);
    let data = common::data(&sys, l, horizon, -100, seed);
    let mut plant = Plant::new(sys.clone(), 0, DVector::zeros(n)).unwrap();
    let mut rng = common::rng(seed ^ 7);
    for _ in 0..l {
        plant.step(&InputLaw::Gaussian { variance: 1.0 }.sample(&mut rng, m)).unwrap();
    }
    let r = gaussian_matrix(&mut rng, p * horizon, 1).column(0).into_owned() * 2.0;
    let mut cfg = ControllerConfig::new(l, horizon, m, p, Mode::Mpc);
    cfg.r *= 0.1;
    if tight {
        cfg.u_box = vec![[-0.5, 0.5]; m];
        cfg.y_box = vec![[-10.0, 10.0]; p];
    }
    Instance { sys, data, plant, r, cfg }
}

fn within(v: &DVector<f64>, b: &[[f64; 2]], tol: f64) -> bool {
    v.iter().enumerate().all(|(i, x)| {
        let [lo, hi] = b[i % b.len()];
        *x >= lo - tol && *x <= hi + tol
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn predictive_controllers_coincide(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=2, p in 1usize..=2, period in 2usize..=3, tight in any::<bool>()) {
        let ins = instance(seed, n, m, p, period, tight);
        let t = ins.plant.time();
        let theta = ins.data.proper_index(t).unwrap();
        let w = ins.plant.past_window(ins.cfg.l).unwrap().w_vector();
        let mpc = solve_mpc(&ins.sys, t, ins.plant.state(), &ins.r, &ins.cfg);
        let deepc = solve_pdeepc(&ins.data, theta, &w, &ins.r, &ins.cfg.with_mode(Mode::Pdeepc));
        let spc = solve_pspc(&ins.data, theta, &w, &ins.r, &ins.cfg.with_mode(Mode::Pspc));
        // same feasible set, so infeasibility is shared too
        let (mpc, deepc, spc) = match (mpc, deepc, spc) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(_), Err(_), Err(_)) => return Ok(()),
            (a, b, c) => return Err(TestCaseError::fail(format!(
                "feasibility differs: mpc {} deepc {} spc {}", a.is_ok(), b.is_ok(), c.is_ok()))),
        };
        for sol in [&mpc, &deepc, &spc] {
            prop_assert!(within(&sol.u_star, &ins.cfg.u_box, 1e-6));
            prop_assert!(within(&sol.y_star, &ins.cfg.y_box, 1e-6));
        }
        prop_assert!((&deepc.u_star - &mpc.u_star).amax() < 1e-5);
        prop_assert!((&deepc.y_star - &mpc.y_star).amax() < 1e-5);
        prop_assert!((&spc.u_star - &mpc.u_star).amax() < 1e-5);
        prop_assert!((&spc.y_star - &mpc.y_star).amax() < 1e-5);
    }

    #[test]
    fn mpc_argmin_is_scale_invariant(seed in any::<u64>(), scale in 1e-3f64..1e3, tight in any::<bool>()) {
        let ins = instance(seed, 2, 1, 2, 2, tight);
        let mut scaled = ins.cfg.clone();
        scaled.q *= scale;
        scaled.r *= scale;
        let t = ins.plant.time();
        let a = solve_mpc(&ins.sys, t, ins.plant.state(), &ins.r, &ins.cfg);
        prop_assume!(a.is_ok());
        let a = a.unwrap();
        let b = solve_mpc(&ins.sys, t, ins.plant.state(), &ins.r, &scaled).unwrap();
        prop_assert!((a.u_star - b.u_star).amax() < 1e-6);
    }

    #[test]
    fn regularized_solutions_are_reproducible(seed in any::<u64>(), tight in any::<bool>()) {
        let ins = instance(seed, 2, 1, 1, 3, tight);
        let theta = ins.data.proper_index(ins.plant.time()).unwrap();
        let w = ins.plant.past_window(ins.cfg.l).unwrap().w_vector();
        for mode in [Mode::RegPdeepc, Mode::RegPspc] {
            let cfg = ins.cfg.with_mode(mode);
            let solve = || if mode == Mode::RegPdeepc {
                solve_pdeepc(&ins.data, theta, &w, &ins.r, &cfg)
            } else {
                solve_pspc(&ins.data, theta, &w, &ins.r, &cfg)
            };
            let (a, b) = match (solve(), solve()) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(a), Err(b)) => {
                    prop_assert_eq!(a.to_string(), b.to_string());
                    continue;
                }
                _ => return Err(TestCaseError::fail("solves disagree on feasibility")),
            };
            prop_assert!((&a.u_star - &b.u_star).amax() < 1e-6);
            prop_assert!((&a.y_star - &b.y_star).amax() < 1e-6);
            prop_assert!(within(&a.u_star, &cfg.u_box, 1e-6));
        }
    }
}
