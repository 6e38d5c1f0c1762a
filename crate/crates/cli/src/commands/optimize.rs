use hardy_lt::scf::scf_optimize;

use super::{run_summary, write_run_artifacts};
use crate::error::{CliError, CliResult};
use crate::output::{now, ArtifactWriter, Manifest};
use crate::Context;

pub fn run(ctx: Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let params = cfg.single()?;
    let started = now();
    let report = scf_optimize(&params, &cfg.scf_config()?, None)?;
    let mut w = ArtifactWriter::new(&cfg.out)?;
    write_run_artifacts(&mut w, &report)?;
    w.finish(Manifest::new("optimize", cfg, started, ctx.inputs.clone(), run_summary(&report)))?;
    println!(
        "C_hat = {:.12} converged = {} iterations = {} el_residual = {:.3e}",
        report.objective, report.converged, report.iterations, report.el_residual
    );
    for flag in &report.flags {
        println!("flag: {flag}");
    }
    if report.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("optimizer stopped without converging ({:?})", report.termination)))
    }
}
