//! Grid of optimizer runs over `s`, `c` and `N`.
//!
//! Cells sharing `(s, c)` run in increasing `N`, each warm-started from the
//! previous optimizer, so the objective column is nondecreasing along `N`.
//! Independent `(s, c)` groups run in parallel on the worker pool. Every
//! cell writes into its own directory.

use hardy_lt::scf::{evaluate_candidate, scf_optimize, SCFReport};
use hardy_lt::spectral::SpectralSettings;
use hardy_lt::RadialPotential;
use rayon::prelude::*;
use serde_json::json;

use super::write_run_artifacts;
use crate::config::Coupling;
use crate::error::{CliError, CliResult};
use crate::output::{num, now, ArtifactWriter, Manifest};
use crate::Context;

struct Cell {
    id: usize,
    s: f64,
    rank: usize,
    c: Coupling,
    c_value: f64,
}

enum CellResult {
    Done(Box<SCFReport>),
    Failed { code: u8, message: String },
}

pub fn run(ctx: Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let mut ranks = cfg.rank.clone();
    ranks.sort_unstable();
    ranks.dedup();
    let mut groups: Vec<Vec<Cell>> = Vec::new();
    let mut id = 0;
    for &s in &cfg.s {
        for &c in &cfg.c {
            let c_value = c.resolve(cfg.d)?;
            groups.push(
                ranks
                    .iter()
                    .map(|&rank| {
                        id += 1;
                        Cell { id: id - 1, s, rank, c, c_value }
                    })
                    .collect(),
            );
        }
    }
    let started = now();
    let scf = cfg.scf_config()?;
    let results: Vec<Vec<CellResult>> = groups
        .par_iter()
        .map(|group| {
            let mut warm: Option<RadialPotential> = None;
            group
                .iter()
                .map(|cell| {
                    let outcome = cfg
                        .params(cell.s, cell.rank, cell.c)
                        .and_then(|p| scf_optimize(&p, &scf, warm.as_ref()).map_err(CliError::from));
                    match outcome {
                        Ok(report) => {
                            warm = Some(report.potential.clone());
                            CellResult::Done(Box::new(report))
                        }
                        Err(e) => CellResult::Failed { code: e.exit_code(), message: e.to_string() },
                    }
                })
                .collect()
        })
        .collect();

    let cells: Vec<(&Cell, &CellResult)> = groups.iter().flatten().zip(results.iter().flatten()).collect();
    let reference = cells.iter().find_map(|(_, r)| match r {
        CellResult::Done(rep) => Some(rep.potential.clone()),
        CellResult::Failed { .. } => None,
    });
    let settings = SpectralSettings::default();

    let mut csv = String::from(
        "cell,d,s,N,c,status,failure_code,converged,objective,reference_objective,el_residual,iterations,negative_count,levels,failure\n",
    );
    let mut rows = Vec::new();
    let mut bad = 0;
    for (cell, result) in &cells {
        let dir = cfg.out.join(format!("cell_{:03}", cell.id));
        let reference_objective = reference.as_ref().and_then(|v| {
            let p = cfg.params(cell.s, cell.rank, cell.c).ok()?;
            evaluate_candidate(v, &p, &settings).ok().map(|(obj, _)| obj)
        });
        let ref_text = reference_objective.map(num).unwrap_or_default();
        let head = format!("{},{},{},{},{}", cell.id, cfg.d, num(cell.s), cell.rank, num(cell.c_value));
        match result {
            CellResult::Done(report) => {
                let mut w = ArtifactWriter::new(&dir)?;
                write_run_artifacts(&mut w, report)?;
                let cell_cfg = crate::config::RunConfig {
                    s: vec![cell.s],
                    rank: vec![cell.rank],
                    c: vec![cell.c],
                    out: dir.clone(),
                    ..cfg.clone()
                };
                w.finish(Manifest::new("sweep-cell", &cell_cfg, started.clone(), ctx.inputs.clone(), super::run_summary(report)))?;
                let (status, code) = if report.converged { ("converged", 0) } else { ("not_converged", 2) };
                bad += usize::from(!report.converged);
                let levels: Vec<String> = report.levels.levels.iter().map(|l| num(*l)).collect();
                csv.push_str(&format!(
                    "{head},{status},{code},{},{},{ref_text},{},{},{},{},\n",
                    report.converged,
                    num(report.objective),
                    num(report.el_residual),
                    report.iterations,
                    report.levels.negative_count,
                    levels.join(";"),
                ));
                rows.push(json!({
                    "cell": cell.id, "s": cell.s, "N": cell.rank, "c": cell.c_value,
                    "status": status, "objective": report.objective, "reference_objective": reference_objective,
                }));
            }
            CellResult::Failed { code, message } => {
                bad += 1;
                let message = message.replace([',', '\n'], ";");
                csv.push_str(&format!("{head},failed,{code},false,,{ref_text},,,,,{message}\n"));
                rows.push(json!({ "cell": cell.id, "s": cell.s, "N": cell.rank, "c": cell.c_value, "status": "failed", "failure_code": code, "failure": message }));
            }
        }
    }
    let mut w = ArtifactWriter::new(&cfg.out)?;
    w.write("sweep.csv", csv.as_bytes())?;
    w.finish(Manifest::new("sweep", cfg, started, ctx.inputs.clone(), json!({ "cells": rows, "unconverged_or_failed": bad })))?;
    print!("{csv}");
    if bad == 0 {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("{bad} of {} cells did not converge", cells.len())))
    }
}
