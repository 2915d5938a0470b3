use ehgo_core::controller::FeedbackLaw;
use ehgo_core::numerics::{integrate_fixed, FnField};
use ehgo_core::observers::{pd_monitor, riccati_rhs, validate_phi1, EkfWeights, RiccatiState};
use ehgo_core::simulator::*;
use ehgo_core::system::NormalFormSystem;
use nalgebra::{DMatrix, DVector};

fn reduced_paper() -> SimConfig {
    reduced_config(&SimConfig::paper())
}

fn theta_norm(r: &Record) -> f64 {
    (r.eta.iter().chain(&r.xi).map(|x| x * x).sum::<f64>()).sqrt()
}

#[test]
fn reduced_with_exact_estimate_is_state_feedback() {
    let mut cfg = reduced_paper();
    cfg.initial.eta_hat = cfg.initial.eta.clone();
    cfg.t_final = 10.0;
    let traj = simulate(&cfg).unwrap();
    assert!(traj.records.iter().all(|r| r.eta_tilde[0].abs() <= 1e-10));

    let design = lookup("example").unwrap();
    let sf = simulate_state_feedback(
        &design.system,
        &design.law,
        &[0.5],
        &[0.9],
        cfg.step,
        cfg.t_final,
        cfg.record_stride,
    )
    .unwrap();
    assert_eq!(sf.len(), traj.len());
    for (x, r) in sf.states.iter().zip(&traj.records) {
        assert!((x[0] - r.eta[0]).abs() < 1e-12 && (x[1] - r.xi[0]).abs() < 1e-12);
    }
}

#[test]
fn reduced_paper_run_converges_and_contracts() {
    let traj = simulate(&reduced_paper()).unwrap();
    assert!(theta_norm(traj.at(15.0).unwrap()) < 1e-2);
    let tol = 1e-9 * traj.records[0].v2.max(1.0);
    for w in traj.records.windows(2) {
        assert!(w[1].v2 <= w[0].v2 + tol, "V2 rose at t = {}", w[1].t);
    }
    assert!(traj.records.iter().all(|r| r.v2 >= 0.0 && r.w == 0.0));
}

#[test]
fn output_feedback_paper_run() {
    let cfg = SimConfig::paper();
    let traj = simulate(&cfg).unwrap();
    let last = traj.last().unwrap();
    assert!((last.t - 20.0).abs() < 1e-9);
    assert!(last.y.abs() < 1e-2);

    let first = &traj.records[0];
    assert_eq!(
        (first.eta[0], first.xi[0], first.xi_hat[0]),
        (0.5, 0.9, 0.1)
    );

    for r in &traj.records {
        assert!(
            r.p[0] >= 0.1 - 1e-12 && r.p[0] <= 21.0,
            "P = {} at {}",
            r.p[0],
            r.t
        );
        assert!(r.sigma_fed.abs() <= 10.0);
        assert!(r.v2 >= 0.0 && r.w >= 0.0);
        let rep = pd_monitor(&RiccatiState::new(DMatrix::from_row_slice(1, 1, &r.p)));
        assert!(rep.lambda_min > 0.0 && rep.symmetric_defect <= 1e-9);
    }
}

#[test]
fn peaking_without_saturation() {
    let mut sat = SimConfig::paper();
    sat.t_final = 5.0 * sat.epsilon();
    sat.record_stride = 1;
    let mut free = sat.clone();
    free.saturation_enabled = false;

    let peak = |cfg: &SimConfig| -> Option<f64> {
        simulate(cfg).ok().map(|t| {
            t.records
                .iter()
                .map(|r| r.sigma_fed.abs())
                .fold(0.0, f64::max)
        })
    };
    let saturated = peak(&sat).unwrap();
    assert!(saturated <= 10.0);
    match peak(&free) {
        None => {}
        Some(p) => assert!(p > 10.0 * saturated, "unsaturated peak {p}"),
    }
}

#[test]
fn scalar_riccati_settles_on_are_root() {
    let w = EkfWeights::scalar(1, 1.0, 10.0, 0.1).unwrap();
    let a1 = DMatrix::from_element(1, 1, 1.0);
    let c1 = DVector::from_element(1, 1.0);
    let field = FnField::new(1, |_, x: &[f64], dx: &mut [f64]| {
        let p = RiccatiState::new(DMatrix::from_element(1, 1, x[0]));
        dx[0] = riccati_rhs(&p, &a1, &c1, &w).unwrap()[(0, 0)];
    });
    let sol = integrate_fixed(&field, 0.0, &[0.1], 1e-3, 10.0, 1000).unwrap();
    let root = 10.0 + 110f64.sqrt();
    let p = sol.last().unwrap().1[0];
    assert!((p - root).abs() / root < 1e-3, "P(10) = {p}");
}

#[test]
fn phi1_validation() {
    let design = lookup("example").unwrap();
    let probe =
        simulate_state_feedback(&design.system, &design.law, &[0.5], &[0.9], 1e-4, 0.5, 1).unwrap();
    let err = validate_phi1(&design.system, &design.law, &probe);
    assert!(err < 1e-5, "{err}");

    let zero = design.system.with_phi1("zero", |_, _| 0.0);
    assert!(validate_phi1(&zero, &design.law, &probe) > 0.1);

    let origin =
        simulate_state_feedback(&design.system, &design.law, &[0.0], &[0.0], 1e-4, 0.1, 1).unwrap();
    assert!(validate_phi1(&design.system, &design.law, &origin) < 1e-15);
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = SimConfig::paper();
    cfg.t_final = 1.0;
    assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
}

#[test]
fn origin_is_an_equilibrium() {
    let mut cfg = SimConfig::paper();
    cfg.t_final = 2.0;
    cfg.initial = InitialConditions {
        eta: vec![0.0],
        xi: vec![0.0],
        eta_hat: vec![0.0],
        xi_hat: vec![0.0],
        sigma_hat: 0.0,
    };
    for mode in [Mode::OutputFeedback, Mode::Reduced] {
        let mut c = cfg.clone();
        c.mode = mode;
        let traj = simulate(&c).unwrap();
        for r in &traj.records {
            let signals = r
                .eta
                .iter()
                .chain(&r.xi)
                .chain(&r.eta_hat)
                .chain(&r.xi_hat)
                .chain(&r.eta_tilde)
                .chain(&r.chi)
                .chain([&r.y, &r.u, &r.sigma_hat, &r.sigma_fed, &r.v2, &r.w]);
            assert!(signals.into_iter().all(|v| *v == 0.0), "{mode} at {}", r.t);
        }
    }
}

#[test]
fn exact_estimates_track_reduced_loop_at_large_epsilon() {
    let mut base = SimConfig::paper();
    base.t_final = 10.0;
    base.initial.eta_hat = vec![0.5];
    base.initial.xi_hat = vec![0.9];
    base.initial.sigma_hat = 0.5;
    let of = simulate(&config_for_epsilon(&base, 0.5).unwrap()).unwrap();
    let red = simulate(&reduced_config(&base)).unwrap();
    let (theta, eta_tilde) = recovery_metric(&of, &red).unwrap();
    assert!(theta < 0.05 && eta_tilde < 0.05);
}

#[test]
fn recovery_improves_as_epsilon_shrinks() {
    let mut cfg = SimConfig::paper();
    cfg.t_final = 10.0;
    let rep = epsilon_sweep(&cfg, &[0.01, 0.001]).unwrap();
    assert_eq!(rep.len(), 2);
    assert!(rep.sup_dev_theta[0] > 0.0);
    assert!(rep.sup_dev_theta[1] < rep.sup_dev_theta[0]);
    assert!(rep.sup_dev_theta[0] / rep.sup_dev_theta[1] >= 2.0);

    let single = epsilon_sweep(&cfg, &[0.005]).unwrap();
    assert_eq!(single.len(), 1);
}

#[test]
fn entry_time_shrinks_with_epsilon() {
    let base = SimConfig::paper();
    let entry = |eps: f64| {
        let cfg = config_for_epsilon(&base, eps).unwrap();
        let traj = simulate(&cfg).unwrap();
        let p0 = observer_lyapunov_matrix(&cfg.gains).unwrap();
        let tube = default_tube_level(&traj, &cfg.gains);
        peaking_report(&traj, &cfg.gains, &p0, tube)
    };
    let fine = entry(0.001);
    let coarse = entry(0.01);
    assert!(fine.entry_time.unwrap() < 0.05, "{fine:?}");
    assert!(coarse.entry_time.unwrap() > fine.entry_time.unwrap());
    assert!((fine.max_abs_chi - 800.0).abs() < 1.0);
}

/// `η' = η + ξ₁, ξ₁' = ξ₂, ξ₂' = η + u` with `u = -9η - 7ξ₁ - 4ξ₂`, which
/// places the closed-loop poles at -1. Zero dynamics `η' = η` are unstable.
fn chain_of_two() -> Design {
    let system = NormalFormSystem::builder("chain2", 3, 2)
        .a1(|_, _| DMatrix::from_element(1, 1, 1.0))
        .phi0(|xi, _| DVector::from_element(1, xi[0]))
        .c1(|_, _| DVector::from_element(1, 1.0))
        .a(|_, u| u)
        .phi1(|eta, xi| eta[0] + xi[0])
        .build()
        .unwrap();
    let law = FeedbackLaw::new(|eta, xi| -9.0 * eta[0] - 7.0 * xi[0] - 4.0 * xi[1]);
    Design { system, law }
}

fn chain_config(design: &Design, eps: f64, margin: f64, initial: InitialConditions) -> SimConfig {
    let m_xi = calibrate_m_xi(design, &initial.eta, &initial.xi, 20.0).unwrap();
    SimConfig {
        system: "chain2".into(),
        gains: ehgo_core::EhgoGains::new(vec![3.0, 3.0, 1.0], eps).unwrap(),
        weights: EkfWeights::scalar(1, 1.0, 1.0, 1.0).unwrap(),
        sat: ehgo_core::SaturationConfig::with_default_kappa(margin * m_xi, 5.0).unwrap(),
        mode: Mode::OutputFeedback,
        y_substitution: false,
        saturation_enabled: true,
        t_final: 20.0,
        step: eps / 20.0,
        record_stride: default_stride(eps / 20.0),
        initial,
    }
}

fn chain_initial(exact: bool) -> InitialConditions {
    let (eta, xi) = (vec![0.3], vec![0.2, 0.0]);
    let (eta_hat, xi_hat, sigma_hat) = if exact {
        (eta.clone(), xi.clone(), 0.3)
    } else {
        (vec![0.0], vec![0.0, 0.0], 0.0)
    };
    InitialConditions {
        eta,
        xi,
        eta_hat,
        xi_hat,
        sigma_hat,
    }
}

#[test]
fn relative_degree_two_exact_estimates_match_reduced_loop() {
    let design = chain_of_two();
    let probe = simulate_state_feedback(
        &design.system,
        &design.law,
        &[0.3],
        &[0.2, 0.0],
        1e-4,
        0.5,
        1,
    )
    .unwrap();
    assert!(validate_phi1(&design.system, &design.law, &probe) < 1e-5);

    let cfg = chain_config(&design, 0.01, 1.0, chain_initial(true));
    let of = simulate_output_feedback_with(&design, &cfg).unwrap();
    let red = simulate_reduced_with(&design, &reduced_config(&cfg)).unwrap();
    let (theta, eta_tilde) = recovery_metric(&of, &red).unwrap();
    assert!(theta < 1e-10 && eta_tilde < 1e-10, "{theta} {eta_tilde}");

    let mut bad = cfg.clone();
    bad.y_substitution = true;
    assert!(simulate_output_feedback_with(&design, &bad).is_err());
}

#[test]
fn relative_degree_two_recovers_from_wrong_estimates() {
    let design = chain_of_two();
    let coarse_cfg = chain_config(&design, 0.01, 3.0, chain_initial(false));
    let red = simulate_reduced_with(&design, &reduced_config(&coarse_cfg)).unwrap();
    let run = |eps: f64| {
        let of =
            simulate_output_feedback_with(&design, &config_for_epsilon(&coarse_cfg, eps).unwrap())
                .unwrap();
        let end = theta_norm(of.last().unwrap());
        assert!(end < 1e-2, "final |theta| = {end} at eps = {eps}");
        recovery_metric(&of, &red).unwrap().0
    };
    let coarse = run(0.01);
    let fine = run(0.002);
    assert!(fine < coarse, "{fine} vs {coarse}");
}
