//! Rayon execution of sweep cells.

use rayon::prelude::*;
use thprs_core::sweep::{assemble, evaluate_channel, ChannelOutcome, SweepConfig, SweepResult};
use thprs_core::Result;

/// Same result as [`thprs_core::sweep::run_sweep`], with every
/// (grid point, channel) cell evaluated on the rayon pool.
pub fn run_sweep_parallel(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let points = config.points();
    let outcomes = points
        .par_iter()
        .map(|point| {
            (0..config.n_channels)
                .into_par_iter()
                .map(|ch| evaluate_channel(config, point, ch))
                .collect::<Result<Vec<Vec<ChannelOutcome>>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(config, &outcomes))
}
