use hardy_lt::groundstate::{
    c1_from_ground_state, c1_from_c_hgn, default_oracle_grid, shoot_ground_state, verify_ground_state,
};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::output::{num, now, ArtifactWriter, Manifest};
use crate::Context;

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const LAMBDA_TOL: f64 = 1e-6;

pub fn run(ctx: Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let params = cfg.single()?;
    if params.rank != 1 {
        return Err(CliError::Usage("the oracle solves the rank-one problem; use N = 1".into()));
    }
    let grid = if cfg.grid_explicit { cfg.grid.build()? } else { default_oracle_grid() };
    let started = now();
    let gs = shoot_ground_state(&params, &grid, RESIDUAL_TOL)?;
    let check = verify_ground_state(&gs, &params);
    let report = c1_from_ground_state(&gs, &params)?;

    let mut w = ArtifactWriter::new(&cfg.out)?;
    let q = gs.q_values();
    let m = params.exponents().m;
    let mut csv = String::from("t,w,Q,V\n");
    for (j, (&qj, &wj)) in q.iter().zip(&gs.w_values).enumerate() {
        let v = qj.max(0.0).powf(m - 2.0);
        csv.push_str(&format!("{},{},{},{}\n", num(grid.t(j)), num(wj), num(qj), num(v)));
    }
    w.write("groundstate.csv", csv.as_bytes())?;

    let lambda_ok = (report.lambda1_check + 1.0).abs() <= LAMBDA_TOL;
    let residual_ok = check.max_residual <= RESIDUAL_TOL;
    let body = json!({
        "C1": report.c1,
        "C_HGN": report.c_hgn,
        "C1_from_C_HGN": c1_from_c_hgn(report.c_hgn, &params),
        "K": report.k_constant,
        "lambda1_check": report.lambda1_check,
        "decay_rate_fit": report.decay_rate_fit,
        "int_Qm": report.int_qm,
        "a": report.a,
        "ode_residual": check.max_residual,
        "positive": check.positive,
        "monotone_tail": check.monotone_tail,
        "flat_left": check.flat_left,
        "match_t": gs.match_t,
        "grid": grid,
        "tolerances": { "ode_residual": RESIDUAL_TOL, "lambda1_check": LAMBDA_TOL },
        "passed": lambda_ok && residual_ok && check.positive,
    });
    w.write_json("ground_report.json", &body)?;
    w.finish(Manifest::new("oracle", cfg, started, ctx.inputs.clone(), body.clone()))?;
    println!(
        "C1 = {:.12} C_HGN = {:.12} lambda1_check = {:.9} ode_residual = {:.2e}",
        report.c1, report.c_hgn, report.lambda1_check, check.max_residual
    );
    if lambda_ok && residual_ok && check.positive {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "oracle tolerances not met: |lambda1_check + 1| = {:.2e}, residual = {:.2e}",
            (report.lambda1_check + 1.0).abs(),
            check.max_residual
        )))
    }
}
