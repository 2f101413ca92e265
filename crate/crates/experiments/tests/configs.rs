use lowrank_experiments::config::{ProblemConfig, ResolvedScale, SchemeName, SweepParam};
use lowrank_experiments::{presets, run_experiment, ExperimentConfig, MethodName};

#[test]
fn every_preset_survives_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in presets::names() {
        let cfg = presets::load(name).unwrap();
        let path = dir.path().join(format!("{name}.toml"));
        std::fs::write(&path, cfg.to_toml()).unwrap();
        let back = ExperimentConfig::load(&path).unwrap();
        assert_eq!(back, cfg, "{name}");
    }
}

#[test]
fn sweeps_expand_into_labelled_cells() {
    let fig5 = presets::load("fig5").unwrap();
    let cells = fig5.cells();
    assert_eq!(cells.len(), 6);
    assert_eq!(fig5.sweep.as_ref().unwrap().param, SweepParam::CSqrtD);
    let root20 = 20f64.sqrt();
    for (cell, k) in cells.iter().zip([1.0, 10.0, 25.0, 50.0, 100.0, 200.0]) {
        assert_eq!(cell.init.resolved_scale(), ResolvedScale::Fixed(k * root20));
        assert_eq!(cell.sweep_value, Some(k));
    }

    let fig3 = presets::load("fig3").unwrap();
    let sigmas: Vec<f64> = fig3
        .cells()
        .iter()
        .map(|c| match c.problem {
            ProblemConfig::Mf { sigma_r, .. } => sigma_r,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(sigmas, [0.1, 0.01]);

    let fig6 = presets::load("fig6").unwrap();
    assert_eq!(fig6.init.scheme, SchemeName::MfGeneral);
    let c2: Vec<f64> = fig6.cells().iter().map(|c| c.init.c2).collect();
    assert_eq!(c2, [0.0, 0.1, 1.0]);
}

#[test]
fn results_do_not_depend_on_seed_order_or_threads() {
    let mut cfg = presets::load("tiny").unwrap();
    cfg.seeds = lowrank_experiments::config::SeedSpec::List(vec![4, 2, 7]);
    cfg.methods = vec![MethodName::Nag, MethodName::Gd];
    let a = run_experiment(&cfg).unwrap();
    cfg.seeds = lowrank_experiments::config::SeedSpec::List(vec![7, 4, 2]);
    let b = run_experiment(&cfg).unwrap();
    for method in [MethodName::Gd, MethodName::Nag] {
        let ra = a.cells[0].runs_for(method);
        let rb = b.cells[0].runs_for(method);
        assert_eq!(ra.len(), 3);
        for (x, y) in ra.iter().zip(&rb) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.losses, y.losses);
            assert_eq!(x.rows, y.rows);
        }
    }
}

#[test]
fn network_preset_runs_end_to_end() {
    let mut cfg = presets::load("fig1-lnn").unwrap();
    cfg.seeds = lowrank_experiments::config::SeedSpec::count(1);
    cfg.methods = vec![MethodName::Gd, MethodName::Altgd];
    let res = run_experiment(&cfg).unwrap();
    for run in res.runs() {
        assert_eq!(run.termination, lowrank_core::optim::Termination::Converged, "{}", run.run_id);
        assert!(run.final_relative_residual() <= 1e-8);
    }
}
