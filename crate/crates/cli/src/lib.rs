//! Reproducible command-line experiments over the `cdi-core` library:
//! graph generation, community detection, perturbation optimisation,
//! consensus simulation, optimiser comparisons, scan matching and bisection.
//!
//! Every run is described by an [`ExperimentConfig`]; outputs record it in a
//! header line and a `<out>.config.json` sidecar, and `cdi --config <file>`
//! replays it.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod fit;

pub use commands::run;
pub use config::ExperimentConfig;
pub use fit::{fit_power_law, PowerLaw};

/// Environment variable holding the worker count of sweep pools.
pub const WORKERS_ENV: &str = "CDI_WORKERS";

/// Sizes the global worker pool from [`WORKERS_ENV`] when it is set.
pub fn init_workers() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = value
        .parse()
        .map_err(|_| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got {value:?}"))?;
    if workers == 0 {
        anyhow::bail!("{WORKERS_ENV} must be a positive integer");
    }
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()?;
    Ok(())
}
