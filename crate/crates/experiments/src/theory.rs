//! Predicted curves, scale thresholds and iteration counts without running
//! the optimizers.

use crate::config::{ExperimentConfig, MethodName};
use crate::output::float;
use crate::runner::{hyperparams, initialize, run_id, Instance, RunError};
use lowrank_core::dynamics::{
    contraction_for, iteration_complexity, ComplexityInputs, ComplexityKind, TheoryBound,
};
use lowrank_core::init::{c_threshold_gd, c_threshold_nag};
use lowrank_core::lnn;
use lowrank_core::optim::{HyperSource, Objective};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub run_id: String,
    pub method: MethodName,
    pub seed: u64,
    pub d: usize,
    pub c: f64,
    pub cond_x0: f64,
    pub l: f64,
    pub mu: f64,
    pub eta: f64,
    pub beta: f64,
    /// Worst-case rate of the linearized iteration.
    pub contraction: f64,
    pub loss_curve: TheoryBound,
    /// Residual bound of the matching theorem, when one exists.
    pub residual_bound: Option<TheoryBound>,
    pub c_threshold: Option<f64>,
    /// Order-of-magnitude iteration count to the configured `eps`, absent
    /// when `eps` is zero.
    pub predicted_iterations: Option<f64>,
}

pub fn theory_rows(cfg: &ExperimentConfig) -> Result<Vec<TheoryRow>, RunError> {
    let mut rows = Vec::new();
    let eps = cfg.stop.eps;
    let order = cfg.hyperparams.altgd_order.to_core();
    for cell in cfg.cells() {
        let instance = Instance::build(&cell.problem)?;
        let objective: &dyn Objective = instance.objective();
        for &name in &cfg.methods {
            for seed in cfg.seeds.list() {
                let init = initialize(&instance, &cell.init, name, seed)?;
                let hp = hyperparams(&cfg.hyperparams, name, &init, objective)?;
                let method = name.method(order);
                let f0 = 0.5 * objective.residual(&init.x0, &init.y0).norm_squared();
                let d = init.x0.ncols();
                let theory_step = hp.source != HyperSource::Manual;
                let (residual_bound, c_threshold, predicted_iterations) = match &instance {
                    Instance::Mf(p) => {
                        let inputs = ComplexityInputs {
                            kappa: p.kappa,
                            cond_x0: init.cond_x0,
                            tau: cell.init.tau,
                            d,
                            r: p.rank,
                        };
                        match name {
                            MethodName::Nag => (
                                Some(TheoryBound::nag_thm2(p, &init)),
                                c_threshold_nag(p, d, cell.init.tau).ok(),
                                Some(iteration_complexity(ComplexityKind::Nag, &inputs, eps)),
                            ),
                            MethodName::Gd if theory_step => (
                                Some(TheoryBound::gd_thm1(p, &init)),
                                c_threshold_gd(p, d, cell.init.tau, init.cond_x0).ok(),
                                Some(iteration_complexity(ComplexityKind::Gd, &inputs, eps)),
                            ),
                            _ => (None, None, Some(iteration_complexity(ComplexityKind::Gd, &inputs, eps))),
                        }
                    }
                    Instance::Lnn(p) => {
                        let premise = lnn::check_thm3_premise(&init, p)
                            .map_err(|e| RunError::Setup(format!("premise: {e}")))?;
                        let rate = lnn::corollary_rate(&init, p, cell.init.tau)
                            .map_err(|e| RunError::Setup(format!("corollary: {e}")))?;
                        if name == MethodName::Nag {
                            (Some(rate.bound), Some(init.c * premise.min_scale), Some(rate.iterations(eps)))
                        } else {
                            (None, None, None)
                        }
                    }
                };
                rows.push(TheoryRow {
                    run_id: run_id(&cell, name, seed),
                    method: name,
                    seed,
                    d,
                    c: init.c,
                    cond_x0: init.cond_x0,
                    l: hp.l,
                    mu: hp.mu,
                    eta: hp.eta,
                    beta: hp.beta,
                    contraction: contraction_for(method, &hp).factor,
                    loss_curve: TheoryBound::loss_curve(method, f0, hp.l, hp.mu),
                    residual_bound,
                    c_threshold,
                    predicted_iterations: predicted_iterations.filter(|_| eps > 0.0),
                });
            }
        }
    }
    Ok(rows)
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// `theory_curves.csv`: `run_id,method,seed,kind,iter,value` for
/// `iter = 0, stride, …, t_max`.
pub fn write_curves<W: Write>(out: W, rows: &[TheoryRow], t_max: usize, stride: usize) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = io::Error::other;
    w.write_record(["run_id", "method", "seed", "kind", "iter", "value"]).map_err(err)?;
    for row in rows {
        for bound in std::iter::once(&row.loss_curve).chain(row.residual_bound.as_ref()) {
            for t in (0..=t_max).step_by(stride.max(1)) {
                w.write_record([
                    row.run_id.clone(),
                    row.method.to_string(),
                    row.seed.to_string(),
                    bound.kind.name().to_string(),
                    t.to_string(),
                    float(bound.at(t)),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush()
}

pub fn write_summary<W: Write>(out: W, rows: &[TheoryRow]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = io::Error::other;
    w.write_record([
        "run_id",
        "method",
        "seed",
        "d",
        "c",
        "cond_x0",
        "l",
        "mu",
        "eta",
        "beta",
        "contraction",
        "loss_theta",
        "bound_kind",
        "bound_prefactor",
        "bound_theta",
        "c_threshold",
        "predicted_iterations",
    ])
    .map_err(err)?;
    for r in rows {
        let b = r.residual_bound.as_ref();
        w.write_record([
            r.run_id.clone(),
            r.method.to_string(),
            r.seed.to_string(),
            r.d.to_string(),
            float(r.c),
            float(r.cond_x0),
            float(r.l),
            float(r.mu),
            float(r.eta),
            float(r.beta),
            float(r.contraction),
            float(r.loss_curve.theta),
            b.map(|b| b.kind.name().to_string()).unwrap_or_default(),
            opt(b.map(|b| b.prefactor)),
            opt(b.map(|b| b.theta)),
            opt(r.c_threshold),
            opt(r.predicted_iterations),
        ])
        .map_err(err)?;
    }
    w.flush()
}

pub fn write_theory(rows: &[TheoryRow], dir: &Path, t_max: usize, stride: usize) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let curves = dir.join("theory_curves.csv");
    write_curves(io::BufWriter::new(std::fs::File::create(&curves)?), rows, t_max, stride)?;
    let summary = dir.join("theory_summary.csv");
    write_summary(io::BufWriter::new(std::fs::File::create(&summary)?), rows)?;
    Ok(vec![curves, summary])
}
