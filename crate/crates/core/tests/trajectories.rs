use lowrank_core::dynamics::{
    contraction_for, decomposition_check, oracle, DynamicsContext, TheoryBound,
};
use lowrank_core::init::{init_mf, init_mf_general, make_mf_problem, MfSpec, SpectrumProfile};
use lowrank_core::lnn::{check_thm3_premise, make_lnn_problem, LnnSpec, RightFactor};
use lowrank_core::optim::{derive_hyperparams, run, step, AltOrder, StopRule, Termination};
use lowrank_core::{HyperParams, InitConfig, InitScheme, IterateState, Method, Objective};

fn mf(m: usize, n: usize, r: usize, seed: u64) -> lowrank_core::FactorizationProblem {
    make_mf_problem(
        &MfSpec {
            m,
            n,
            r,
            sigma1: 1.0,
            sigma_r: 0.3,
            profile: SpectrumProfile::Geometric,
        },
        seed,
    )
    .unwrap()
}

fn stop(eps: f64, max_iters: usize) -> StopRule {
    StopRule {
        eps,
        max_iters,
        ..StopRule::default()
    }
}

#[test]
fn every_method_reaches_tolerance_on_a_small_instance() {
    let p = mf(20, 15, 3, 11);
    let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 6, 20.0 * 6f64.sqrt(), 4)).unwrap();
    for method in [Method::Gd, Method::AltGd(AltOrder::XFirst), Method::AltGd(AltOrder::YFirst), Method::Nag] {
        let hp = derive_hyperparams(&init, method, &p).unwrap();
        let state = IterateState::from_init(&p, &init).unwrap();
        let out = run(&p, method, &hp, state, &stop(1e-9, 200_000), &mut ());
        assert_eq!(out.termination, Termination::Converged, "{}", method.name());
        assert!(out.final_relative_residual(p.target_norm()) <= 1e-9);
        assert_eq!(out.losses.len(), out.iterations + 1);
    }
}

#[test]
fn nag_needs_fewer_steps_than_gd() {
    let p = mf(30, 25, 4, 2);
    let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 5, 50.0 * 5f64.sqrt(), 9)).unwrap();
    let count = |method| {
        let hp = derive_hyperparams(&init, method, &p).unwrap();
        let state = IterateState::from_init(&p, &init).unwrap();
        run(&p, method, &hp, state, &stop(1e-8, 500_000), &mut ()).iterations
    };
    assert!(count(Method::Nag) * 2 < count(Method::Gd));
}

#[test]
fn loss_tracks_the_predicted_curve_for_gd() {
    // at large scale the factor X barely moves and the linear rate is tight
    let p = mf(12, 10, 2, 3);
    let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 4, 400.0, 1)).unwrap();
    let hp = derive_hyperparams(&init, Method::Gd, &p).unwrap();
    let state = IterateState::from_init(&p, &init).unwrap();
    let f0 = state.loss();
    let out = run(&p, Method::Gd, &hp, state, &stop(1e-6, 100_000), &mut ());
    let curve = TheoryBound::loss_curve(Method::Gd, f0, hp.l, hp.mu);
    for (t, loss) in out.losses.iter().enumerate() {
        assert!(*loss <= curve.at(t) * 1.05, "t={t}: {loss} vs {}", curve.at(t));
    }
}

#[test]
fn zero_momentum_nag_is_gd_bit_for_bit() {
    let p = mf(9, 7, 2, 5);
    let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 3, 10.0, 2)).unwrap();
    let gd = derive_hyperparams(&init, Method::Gd, &p).unwrap();
    let hp = HyperParams::manual(gd.eta, 0.0, gd.l, gd.mu).unwrap();
    let mut a = IterateState::from_init(&p, &init).unwrap();
    let mut b = a.clone();
    for _ in 0..200 {
        a = step(a, Method::Gd, &hp, &p);
        b = step(b, Method::Nag, &hp, &p);
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }
}

#[test]
fn exact_factorization_is_a_fixed_point() {
    let p = mf(8, 6, 2, 7);
    let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 2, 5.0, 3)).unwrap();
    // Y⋆ solving X₀ Yᵀ = A exactly in floating point is not available in
    // general, so build the target from the factors instead
    let y = lowrank_core::linalg::gaussian_matrix(6, 2, 1.0, &mut lowrank_core::linalg::RandomSource::new(1)).unwrap();
    let target = &init.x0 * y.transpose();
    let q = lowrank_core::FactorizationProblem::new(target, 2).unwrap();
    for method in [Method::Gd, Method::Nag, Method::AltGd(AltOrder::XFirst)] {
        let hp = HyperParams::manual(0.01, if method == Method::Nag { 0.5 } else { 0.0 }, 1.0, 1.0).unwrap();
        let mut s = IterateState::new(&q, init.x0.clone(), y.clone()).unwrap();
        assert_eq!(s.loss(), 0.0);
        for _ in 0..10 {
            s = step(s, method, &hp, &q);
        }
        assert_eq!(s.x, init.x0, "{}", method.name());
        assert_eq!(s.y, y);
    }
}

#[test]
fn general_init_with_nonzero_y_still_converges() {
    let p = mf(25, 20, 3, 8);
    let mut cfg = InitConfig::new(InitScheme::MfGeneral, 8, 50.0, 6);
    cfg.c2 = 0.5;
    let init = init_mf_general(&p, &cfg).unwrap();
    assert!(init.y0.norm() > 0.0);
    for method in [Method::Gd, Method::Nag] {
        let hp = derive_hyperparams(&init, method, &p).unwrap();
        let state = IterateState::from_init(&p, &init).unwrap();
        let out = run(&p, method, &hp, state, &stop(1e-8, 300_000), &mut ());
        assert_eq!(out.termination, Termination::Converged, "{}", method.name());
    }
}

#[test]
fn dynamics_checks_along_gd_and_nag_runs() {
    let p = mf(6, 5, 2, 4);
    let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 3, 30.0, 8)).unwrap();
    let ctx = DynamicsContext::for_factorization(&p, &init);
    for method in [Method::Gd, Method::Nag] {
        let hp = derive_hyperparams(&init, method, &p).unwrap();
        let bound = contraction_for(method, &hp);
        let mut s = IterateState::from_init(&p, &init).unwrap();
        let r0 = s.r.norm();
        for _ in 0..60 {
            let next = step(s.clone(), method, &hp, &p);
            let check = decomposition_check(method, &ctx, &s, &next, &hp).unwrap().unwrap();
            assert!(check.decomposition_residual <= 1e-10 * r0);
            if method == Method::Gd {
                assert!(check.contraction_measured <= bound.factor + 1e-8);
            }
            s = next;
        }
    }
}

#[test]
fn explicit_operators_match_closed_forms() {
    let p = mf(4, 3, 2, 9);
    let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 2, 3.0, 0)).unwrap();
    let ctx = DynamicsContext::for_factorization(&p, &init);
    let gd = derive_hyperparams(&init, Method::Gd, &p).unwrap();
    let sv = oracle::restricted_gd_spectrum(&ctx, gd.eta).unwrap();
    let expect = (1.0 - gd.eta * gd.l).abs().max((1.0 - gd.eta * gd.mu).abs());
    assert!((sv[0] - expect).abs() <= 1e-12);
    let nag = derive_hyperparams(&init, Method::Nag, &p).unwrap();
    let eigs = oracle::restricted_nag_eigenvalues(&ctx, nag.eta, nag.beta).unwrap();
    assert!(oracle::spectral_radius(&eigs) <= 1.0 - (nag.mu / nag.l).sqrt() + 1e-6);
}

#[test]
fn network_nag_converges_at_premise_scale() {
    let p = make_lnn_problem(
        &LnnSpec {
            m: 12,
            n: 10,
            samples: 15,
            data_rank: 3,
            sigma1: 1.0,
            sigma_r: 0.5,
            profile: SpectrumProfile::Geometric,
            right_factor: RightFactor::Gaussian,
        },
        5,
    )
    .unwrap();
    let unit = lowrank_core::init::init_lnn(&p, &InitConfig::new(InitScheme::Lnn2, 4, 1.0, 2)).unwrap();
    let report = check_thm3_premise(&unit, &p).unwrap();
    let init = unit.rescaled(2.0 * report.min_scale).unwrap();
    assert!(check_thm3_premise(&init, &p).unwrap().holds());
    let hp = derive_hyperparams(&init, Method::Nag, &p).unwrap();
    let state = IterateState::from_init(&p, &init).unwrap();
    let out = run(&p, Method::Nag, &hp, state, &stop(1e-8, 100_000), &mut ());
    assert_eq!(out.termination, Termination::Converged);
    let bound = TheoryBound::lnn_thm3(&p, &init);
    for (t, r) in out.residual_norms.iter().enumerate() {
        assert!(*r <= bound.at(t), "t={t}");
    }
}
