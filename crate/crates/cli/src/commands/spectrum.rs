use std::path::Path;

use hardy_lt::spectral::{negative_spectrum, SpectralSettings};
use hardy_lt::{assemble_min_max_levels, objective};

use crate::error::CliResult;
use crate::output::read_potential_csv;
use crate::Context;

pub fn run(ctx: Context, input: &Path) -> CliResult<()> {
    let params = ctx.config.single()?;
    let (v, _) = read_potential_csv(input)?;
    let settings = SpectralSettings { max_per_channel: 64.max(params.rank + 1), ..SpectralSettings::default() };
    let spectra = negative_spectrum(&v, &params, &settings)?;
    println!("ell,multiplicity,index,lambda,boundary_mass");
    for spec in &spectra {
        for (i, (l, b)) in spec.eigenvalues.iter().zip(&spec.boundary_mass).enumerate() {
            println!("{},{},{},{:.15e},{:.3e}", spec.ell, spec.multiplicity, i, l, b);
        }
    }
    let levels = assemble_min_max_levels(&spectra, &params);
    println!(
        "# N = {} negative levels = {} sum |lambda|^s = {:.15e} (unnormalized V)",
        params.rank,
        levels.negative_count,
        objective(&levels, params.s)
    );
    Ok(())
}
