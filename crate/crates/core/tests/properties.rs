use lowrank_core::init::{init_mf, make_mf_problem, MfSpec, SpectrumProfile};
use lowrank_core::linalg::{self, gaussian_matrix, RandomSource};
use lowrank_core::optim::{derive_hyperparams, step};
use lowrank_core::{InitConfig, InitScheme, IterateState, Method, Objective};
use proptest::prelude::*;

fn problem(m: usize, n: usize, r: usize, seed: u64) -> lowrank_core::FactorizationProblem {
    make_mf_problem(
        &MfSpec {
            m,
            n,
            r,
            sigma1: 2.0,
            sigma_r: 0.4,
            profile: SpectrumProfile::Linear,
        },
        seed,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_reconstructs(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let m = gaussian_matrix(rows, cols, 1.0, &mut RandomSource::new(seed)).unwrap();
        let svd = linalg::svd(&m).unwrap();
        prop_assert!((svd.reconstruct() - &m).norm() <= 1e-12 * m.norm().max(1.0));
        let s = &svd.summary.singular_values;
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sketch_lives_in_the_target_column_space(
        (m, n, r) in (3usize..12, 3usize..12).prop_flat_map(|(m, n)| (Just(m), Just(n), 1..=m.min(n))),
        extra in 0usize..4,
        c in 0.5f64..100.0,
        seed in any::<u64>(),
    ) {
        let p = problem(m, n, r, seed);
        let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, r + extra, c, seed ^ 1)).unwrap();
        let outside = linalg::outside_projection_norm(&init.x0, &p.left_frame, None);
        prop_assert!(outside <= 1e-10 * init.x0.norm());
        prop_assert!(init.y0.iter().all(|v| *v == 0.0));
        prop_assert!(init.l >= init.mu && init.mu > 0.0);
    }

    #[test]
    fn scale_is_linear_in_c(c in 0.1f64..50.0, seed in 0u64..1000) {
        let p = problem(7, 5, 2, 3);
        let one = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 3, 1.0, seed)).unwrap();
        let scaled = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 3, c, seed)).unwrap();
        prop_assert!((&one.x0 * c - &scaled.x0).norm() <= 1e-12 * scaled.x0.norm());
        prop_assert!((scaled.cond_x0 - one.cond_x0).abs() <= 1e-9 * one.cond_x0);
    }

    #[test]
    fn theory_steps_are_admissible(c in 1.0f64..200.0, seed in 0u64..1000) {
        let p = problem(8, 6, 3, seed);
        let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 4, c, seed)).unwrap();
        let gd = derive_hyperparams(&init, Method::Gd, &p).unwrap();
        prop_assert!(gd.eta > 0.0 && gd.eta < 2.0 / gd.l);
        prop_assert_eq!(gd.beta, 0.0);
        let nag = derive_hyperparams(&init, Method::Nag, &p).unwrap();
        prop_assert!((nag.eta * nag.l - 1.0).abs() <= 1e-15);
        prop_assert!((0.0..1.0).contains(&nag.beta));
    }

    #[test]
    fn first_gd_step_keeps_x_and_moves_y_along_the_residual(c in 1.0f64..50.0, seed in 0u64..1000) {
        let p = problem(6, 5, 2, seed);
        let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 3, c, seed)).unwrap();
        let hp = derive_hyperparams(&init, Method::Gd, &p).unwrap();
        let s0 = IterateState::from_init(&p, &init).unwrap();
        let s1 = step(s0.clone(), Method::Gd, &hp, &p);
        // Y₀ = 0 makes the X-gradient vanish
        prop_assert_eq!(&s1.x, &init.x0);
        let expect = -(p.residual(&init.x0, &init.y0).transpose() * &init.x0) * hp.eta;
        prop_assert!((&s1.y - expect).norm() <= 1e-12 * s1.y.norm().max(1e-300));
    }
}
