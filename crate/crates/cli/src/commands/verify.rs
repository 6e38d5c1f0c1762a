use std::path::PathBuf;

use hardy_lt::diagnostics::{
    decay_check, duality_check_report, gap_check, hardy_positivity, padding_monotonicity, scaling_check, DualityOutcome,
};
use hardy_lt::scf::{assess_potential, scf_optimize, SCFReport};
use hardy_lt::spectral::{discretize_channel, lowest_eigenpairs, ChannelOperator, SpectralSettings};
use hardy_lt::{potential_lt_norm, scale_potential, Error, LogGrid, ProblemParams, RadialPotential};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use serde_json::json;

use super::{report_tol, run_summary, write_run_artifacts};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{now, sha256_hex, ArtifactWriter, Manifest};
use crate::Context;

const NORMALIZATION_TOL: f64 = 1e-8;
const SCALING_TOL: f64 = 1e-8;
const DENSE_TOL: f64 = 1e-10;
const DENSE_NODES: usize = 200;
const SCALING_SHIFT: i64 = 20;
const HARDY_MAX_ELL: usize = 8;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    status: Status,
    margin: Option<f64>,
    detail: String,
}

fn check(name: &'static str, passed: bool, margin: Option<f64>, detail: String) -> Check {
    Check { name, status: if passed { Status::Pass } else { Status::Fail }, margin, detail }
}

fn skipped(name: &'static str, detail: String) -> Check {
    Check { name, status: Status::Skipped, margin: None, detail }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> Check {
    check(name, false, None, format!("error: {e}"))
}

struct Subject {
    config: RunConfig,
    params: ProblemParams,
    /// The potential exactly as stored, before any renormalization.
    raw: RadialPotential,
    report: SCFReport,
    source: String,
    out: PathBuf,
}

fn stored(ctx: &mut Context, dir: PathBuf) -> CliResult<Subject> {
    let manifest = Manifest::read(&dir)?;
    let (raw, bytes) = crate::output::read_potential_csv(&dir.join("potential.csv"))?;
    let config = manifest.config.clone();
    let params = config.single()?;
    let scf = config.scf_config()?;
    if *raw.grid() != scf.grid {
        return Err(CliError::Usage("potential.csv does not match the grid recorded in the manifest".into()));
    }
    ctx.inputs.insert(dir.join("potential.csv").display().to_string(), sha256_hex(&bytes));
    let manifest_text = std::fs::read(dir.join("manifest.json")).map_err(CliError::io(dir.join("manifest.json")))?;
    ctx.inputs.insert(dir.join("manifest.json").display().to_string(), sha256_hex(&manifest_text));

    let mut report = assess_potential(&params, &scf, &raw)?;
    let stored_converged = manifest.summary.get("converged").and_then(|v| v.as_bool()).unwrap_or(false);
    let stored_flags = manifest.summary.get("flags").and_then(|v| v.as_array()).is_some_and(|f| !f.is_empty());
    report.converged = stored_converged && !stored_flags && report.el_residual <= config.tol_res;
    let out = if ctx.out_explicit { ctx.config.out.clone() } else { dir.clone() };
    Ok(Subject { config, params, raw, report, source: dir.display().to_string(), out })
}

fn fresh(ctx: &Context) -> CliResult<Subject> {
    let config = ctx.config.clone();
    let params = config.single()?;
    let started = now();
    let report = scf_optimize(&params, &config.scf_config()?, None)?;
    let mut w = ArtifactWriter::new(&config.out)?;
    write_run_artifacts(&mut w, &report)?;
    w.finish(Manifest::new("optimize", &config, started, ctx.inputs.clone(), run_summary(&report)))?;
    Ok(Subject { out: config.out.clone(), params, raw: report.potential.clone(), report, source: "fresh".into(), config })
}

fn dense_negative(op: &ChannelOperator) -> Vec<f64> {
    let m = op.len();
    let s: Vec<f64> = op.weight.iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = op.stiffness_diag[i] * s[i] * s[i];
        if i + 1 < m {
            let v = op.stiffness_off[i] * s[i] * s[i + 1];
            a[(i, i + 1)] = v;
            a[(i + 1, i)] = v;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().filter(|&l| l < 0.0).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Bisection spectra against a dense symmetric solve, on the potential
/// resampled to a coarse grid over the same range.
fn dense_oracle(v: &RadialPotential, params: &ProblemParams) -> Check {
    let name = "dense_oracle";
    let g = v.grid();
    let coarse = match LogGrid::new(g.t_min(), g.t_max(), DENSE_NODES) {
        Ok(c) => c,
        Err(e) => return failed(name, e),
    };
    let vals: Vec<f64> = (0..coarse.len())
        .map(|j| {
            let x = ((coarse.t(j) - g.t_min()) / g.h()).clamp(0.0, (g.len() - 1) as f64);
            let i = (x.floor() as usize).min(g.len() - 2);
            let f = x - i as f64;
            (1.0 - f) * v.values()[i] + f * v.values()[i + 1]
        })
        .collect();
    let w = match RadialPotential::new(coarse, vals) {
        Ok(w) => w,
        Err(e) => return failed(name, e),
    };
    let mut worst: f64 = 0.0;
    let mut levels = 0;
    for ell in 0..3 {
        let op = match discretize_channel(&w, ell, params) {
            Ok(op) => op,
            Err(e) => return failed(name, e),
        };
        let spec = match lowest_eigenpairs(&op, DENSE_NODES, 1e-12) {
            Ok(s) => s,
            Err(e) => return failed(name, e),
        };
        let dense = dense_negative(&op);
        if dense.len() != spec.eigenvalues.len() {
            return check(name, false, None, format!("channel {ell}: {} vs {} negative levels", spec.eigenvalues.len(), dense.len()));
        }
        levels += dense.len();
        for (a, b) in spec.eigenvalues.iter().zip(&dense) {
            worst = worst.max((a - b).abs());
        }
    }
    check(name, worst <= DENSE_TOL, Some(DENSE_TOL - worst), format!("{levels} levels on {DENSE_NODES} nodes, max |diff| {worst:.2e}"))
}

/// Dilation invariance of the scale-free ratio. The comparison is between two
/// dilates of the potential, both already moved off the edge they move away
/// from: a potential that is still large at an edge node sees that node's
/// boundary condition, and clearing it changes the ratio once, by an amount
/// independent of the dilation.
fn scaling(v: &RadialPotential, params: &ProblemParams) -> Check {
    let name = "scaling_invariance";
    let settings = SpectralSettings::default();
    for shift in [-SCALING_SHIFT, SCALING_SHIFT] {
        let attempt = scale_potential(v, shift, params).and_then(|base| {
            let first = scaling_check(v, shift, params, &settings)?;
            Ok((first, scaling_check(&base, shift, params, &settings)?))
        });
        match attempt {
            Ok((first, c)) => {
                return check(
                    name,
                    c.relative_change < SCALING_TOL,
                    Some(SCALING_TOL - c.relative_change),
                    format!(
                        "shifts {shift} and {} nodes, relative change {:.2e} (edge clearing {:.2e})",
                        2 * shift,
                        c.relative_change,
                        first.relative_change
                    ),
                )
            }
            Err(Error::SupportEscapesGrid { .. }) => continue,
            Err(e) => return failed(name, e),
        }
    }
    skipped(name, "support reaches both grid edges".into())
}

fn run_checks(sub: &Subject) -> Vec<Check> {
    let p = &sub.params;
    let r = &sub.report;
    let settings = SpectralSettings::default();
    let mut out = Vec::new();

    let norm = potential_lt_norm(&sub.raw, p);
    let err = (norm - 1.0).abs();
    out.push(check("normalization", err <= NORMALIZATION_TOL, Some(NORMALIZATION_TOL - err), format!("int V^(s+d/2) = {norm:.15}")));

    let fixed = r.converged && r.el_residual <= sub.config.tol_res;
    out.push(check(
        "fixed_point",
        fixed,
        Some(sub.config.tol_res - r.el_residual),
        format!("converged {} el_residual {:.3e} flags {:?}", r.converged, r.el_residual, r.flags),
    ));

    out.push(match hardy_positivity(p, &r.grid, HARDY_MAX_ELL) {
        Ok(h) => check("hardy_positivity", h.passed, None, format!("{} channels, {} negative", h.channels, h.negative_found)),
        Err(e) => failed("hardy_positivity", e),
    });

    out.push(scaling(&sub.raw, p));

    out.push(match padding_monotonicity(&sub.raw, p, &settings) {
        Ok((a, b)) => check("padding_monotonicity", b >= a, Some(b - a), format!("N: {a:.12e}, N+1: {b:.12e}")),
        Err(e) => failed("padding_monotonicity", e),
    });

    out.push(dense_oracle(&sub.raw, p));

    let g = gap_check(r, report_tol());
    out.push(check(
        "gap",
        g.passed,
        g.margin,
        format!(
            "applicable {} lambda1 multiplicity {} partial shell {} converged {}",
            g.applicable, g.lambda1_multiplicity, g.partial_shell, g.converged
        ),
    ));

    out.push(match decay_check(r, None) {
        Ok(f) => check(
            "decay",
            f.passed && r.converged,
            Some(f.margin),
            format!("fitted {:.4} theory {:.4} window [{:.3}, {:.3}]", f.fitted_rate, f.theory_rate, f.window.0, f.window.1),
        ),
        Err(e) => failed("decay", e),
    });

    out.push(match duality_check_report(r) {
        Ok(DualityOutcome::Refused { reason }) => skipped("duality", format!("skipped: validity range ({reason})")),
        Ok(DualityOutcome::Computed(d)) => match d.rank1_ratio {
            Some(ratio) => check("duality", d.passed == Some(true), Some(ratio - 1.0), format!("rank-1 ratio {ratio:.6}")),
            None => {
                let agree = (d.rhs_constant - d.rhs_from_p).abs() <= 1e-14 && d.d_implied > 0.0;
                check("duality", agree, None, format!("rank {}: constants only, D_implied {:.6e}", p.rank, d.d_implied))
            }
        },
        Err(e) => failed("duality", e),
    });

    out.push(if p.c == 0.0 {
        skipped("flat_comparison", "run is already at c = 0".into())
    } else {
        match p.with_coupling(0.0).map_err(CliError::from).and_then(|flat| {
            let cfg = sub.config.scf_config()?;
            Ok(scf_optimize(&flat, &cfg, None)?)
        }) {
            Ok(flat) => {
                let margin = r.objective - flat.objective;
                check(
                    "flat_comparison",
                    r.converged && flat.converged && margin > 0.0,
                    Some(margin),
                    format!("critical {:.12e} flat {:.12e}", r.objective, flat.objective),
                )
            }
            Err(e) => failed("flat_comparison", e),
        }
    });
    out
}

pub fn run(mut ctx: Context, input: Option<PathBuf>) -> CliResult<()> {
    let sub = match input {
        Some(dir) => stored(&mut ctx, dir)?,
        None => fresh(&ctx)?,
    };
    let checks = run_checks(&sub);
    let failures: Vec<&str> = checks.iter().filter(|c| matches!(c.status, Status::Fail)).map(|c| c.name).collect();
    let body = json!({
        "source": sub.source,
        "inputs": ctx.inputs,
        "generated": now(),
        "passed": failures.is_empty(),
        "checks": checks,
    });
    crate::config::ensure_dir(&sub.out)?;
    let text = serde_json::to_string_pretty(&body).map_err(|e| CliError::Internal(e.to_string()))?;
    crate::output::write_atomic(&sub.out.join("verify_report.json"), format!("{text}\n").as_bytes())?;
    for c in &checks {
        let status = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        println!("{status} {}: {}", c.name, c.detail);
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(format!("failed checks: {}", failures.join(", "))))
    }
}
