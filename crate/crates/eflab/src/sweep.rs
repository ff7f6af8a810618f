//! Cartesian parameter sweeps. One CSV row per cell; a cell that fails records its
//! error in-row instead of aborting the sweep.

use eflab_core::energy;
use eflab_core::fowler;
use eflab_core::roots;
use eflab_core::Params;
use rayon::prelude::*;
use serde_json::json;

use crate::commands::{audit_options, classification_name, root_options, shoot_options, status_name, Report};
use crate::config::{ScenarioConfig, MAX_SWEEP_CELLS};
use crate::error::RunError;
use crate::output::{num, Outputs};

#[derive(Debug, Clone, Copy)]
struct Cell {
    n: u32,
    p: f64,
    mu1: f64,
    mu2: f64,
    beta: f64,
}

enum Exponent {
    Absolute(Vec<f64>),
    Relative(Vec<f64>),
}

fn cells(cfg: &ScenarioConfig) -> Result<Vec<Cell>, RunError> {
    let s = &cfg.sweep;
    let base = cfg.problem;
    let need = |name: &str| RunError::Config(format!("sweep.{name}: no list given and no problem section to fall back on"));
    let list_f = |v: &Option<Vec<f64>>, pick: fn(&crate::config::Problem) -> f64, name: &str| {
        v.clone().or_else(|| base.as_ref().map(|b| vec![pick(b)])).ok_or_else(|| need(name))
    };
    let ns = s.n.clone().or_else(|| base.map(|b| vec![b.n])).ok_or_else(|| need("n"))?;
    let exps = match &s.p_relative {
        Some(rel) => Exponent::Relative(rel.clone()),
        None => Exponent::Absolute(list_f(&s.p, |b| b.p, "p")?),
    };
    let mu1 = list_f(&s.mu1, |b| b.mu1, "mu1")?;
    let mu2 = list_f(&s.mu2, |b| b.mu2, "mu2")?;
    let beta = list_f(&s.beta, |b| b.beta, "beta")?;
    let len = match &exps {
        Exponent::Absolute(v) | Exponent::Relative(v) => v.len(),
    };
    let total = [ns.len(), len, mu1.len(), mu2.len(), beta.len()]
        .iter()
        .try_fold(1usize, |acc, &k| acc.checked_mul(k))
        .filter(|&t| t <= MAX_SWEEP_CELLS);
    if total.is_none() {
        return Err(RunError::Config(format!("sweep: more than {MAX_SWEEP_CELLS} cells")));
    }
    let mut out = Vec::new();
    for &n in &ns {
        let ps: Vec<f64> = match &exps {
            Exponent::Absolute(v) => v.clone(),
            Exponent::Relative(v) => {
                let nf = f64::from(n);
                v.iter().map(|s| nf / (nf - 2.0) + s * 2.0 / (nf - 2.0)).collect()
            }
        };
        for &p in &ps {
            for &a in &mu1 {
                for &b in &mu2 {
                    for &c in &beta {
                        out.push(Cell { n, p, mu1: a, mu2: b, beta: c });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn header(cfg: &ScenarioConfig, shoot: bool) -> Vec<String> {
    let mut h: Vec<String> = [
        "cell", "n", "p", "mu1", "mu2", "beta", "q", "tau", "sigma", "c0", "root_count", "interior_roots", "roots",
        "warnings",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if shoot {
        for d in &cfg.shoot.directions {
            h.push(format!("shoot_{}_{}", d[0], d[1]));
        }
        h.push("max_monotone_violation".into());
    }
    h.push("error".into());
    h
}

fn row(index: usize, cell: Cell, cfg: &ScenarioConfig, shoot: bool) -> Vec<String> {
    let mut r = vec![index.to_string(), cell.n.to_string(), num(cell.p), num(cell.mu1), num(cell.mu2), num(cell.beta)];
    let width = header(cfg, shoot).len();
    let fail = |mut r: Vec<String>, msg: String| {
        r.resize(width - 1, String::new());
        r.push(msg);
        r
    };
    let params = match Params::new(cell.n, cell.p, cell.mu1, cell.mu2, cell.beta) {
        Ok(p) => p,
        Err(e) => return fail(r, e.to_string()),
    };
    let set = roots::solve_kl_with(&params, &root_options(&cfg.numerics));
    let listed: Vec<String> = set.iter().map(|k| format!("{} {}", num(k.k), num(k.l))).collect();
    r.extend([
        num(params.q),
        num(params.tau),
        num(params.sigma),
        num(params.c0),
        set.len().to_string(),
        set.interior().count().to_string(),
        listed.join(";"),
        set.warnings.len().to_string(),
    ]);
    if shoot {
        let opts = shoot_options(&cfg.numerics);
        let aopts = audit_options(&cfg.numerics);
        let mut worst: f64 = 0.0;
        for d in &cfg.shoot.directions {
            let traj = match fowler::shoot_with(&params, &set, (d[0], d[1]), &opts) {
                Ok(t) => t,
                Err(e) => return fail(r, e.to_string()),
            };
            match energy::audit_with(&traj, &params, &set, &aopts) {
                Ok(a) => {
                    worst = worst.max(a.monotone_violation_max);
                    r.push(if traj.status.is_converged() {
                        classification_name(&a.classification)
                    } else {
                        status_name(&traj.status).to_string()
                    });
                }
                Err(e) => return fail(r, e.to_string()),
            }
        }
        r.push(num(worst));
    }
    r.push(String::new());
    r
}

pub fn run(cfg: &ScenarioConfig, out: &mut Outputs) -> Result<Report, RunError> {
    let shoot = cfg.sweep.shoot.unwrap_or(false);
    let cells = cells(cfg)?;
    let rows: Vec<Vec<String>> = cells.par_iter().enumerate().map(|(i, c)| row(i, *c, cfg, shoot)).collect();
    let failed = rows.iter().filter(|r| !r.last().map_or(true, String::is_empty)).count();
    let unresolved: usize = rows.iter().filter_map(|r| r.get(13).and_then(|w| w.parse::<usize>().ok())).sum();
    out.csv("sweep.csv", &header(cfg, shoot), &rows)?;
    let mut warnings = Vec::new();
    if unresolved > 0 {
        warnings.push(format!("sweep: {unresolved} root-solver warnings across all cells (see the warnings column)"));
    }
    Ok(Report { summary: json!({ "cells": cells.len(), "failed_cells": failed, "shoot": shoot }), warnings })
}
