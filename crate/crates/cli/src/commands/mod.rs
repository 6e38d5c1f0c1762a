pub mod optimize;
pub mod oracle;
pub mod spectrum;
pub mod sweep;
pub mod verify;

use hardy_lt::diagnostics::{decay_check, duality_check_report, gap_check, DualityOutcome};
use hardy_lt::scf::SCFReport;
use serde_json::{json, Value};

use crate::error::CliResult;
use crate::output::{level_records, potential_csv, trace_csv, ArtifactWriter};

/// potential.csv, levels.json and trace.csv of one optimizer run.
pub fn write_run_artifacts(w: &mut ArtifactWriter, report: &SCFReport) -> CliResult<()> {
    w.write("potential.csv", potential_csv(&report.potential).as_bytes())?;
    w.write_json("levels.json", &level_records(&report.levels))?;
    w.write("trace.csv", trace_csv(&report.trace).as_bytes())
}

/// Pass/fail of the cheap per-run diagnostics.
pub fn diagnostics_map(report: &SCFReport) -> Value {
    let gap = gap_check(report, report_tol());
    let decay = match decay_check(report, None) {
        Ok(fit) => json!({ "passed": fit.passed, "margin": fit.margin }),
        Err(e) => json!({ "passed": false, "error": e.to_string() }),
    };
    let duality = match duality_check_report(report) {
        Ok(DualityOutcome::Computed(rep)) => json!({ "passed": rep.passed, "rank1_ratio": rep.rank1_ratio }),
        Ok(DualityOutcome::Refused { reason }) => json!({ "skipped": format!("validity range: {reason}") }),
        Err(e) => json!({ "passed": false, "error": e.to_string() }),
    };
    json!({
        "gap": { "passed": gap.passed, "margin": gap.margin, "lambda1_multiplicity": gap.lambda1_multiplicity },
        "decay": decay,
        "duality": duality,
    })
}

pub fn report_tol() -> f64 {
    hardy_lt::spectral::SpectralSettings::default().tol
}

pub fn run_summary(report: &SCFReport) -> Value {
    json!({
        "params": report.params,
        "objective": report.objective,
        "converged": report.converged,
        "termination": report.termination,
        "iterations": report.iterations,
        "el_residual": report.el_residual,
        "levels": level_records(&report.levels),
        "negative_count": report.levels.negative_count,
        "next_level": report.levels.next,
        "gap": report.gap,
        "boundary_mass": report.boundary_mass,
        "partial_shell": report.occupation.partial,
        "start": report.start,
        "flags": report.flags,
        "diagnostics": diagnostics_map(report),
    })
}
