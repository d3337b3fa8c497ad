//! Battery runner behind the `formbound` command: runs the form-bound
//! diagnostics of `formbound-core` over grid ladders and writes JSON reports
//! and CSV ladders.

pub mod battery;
pub mod error;
pub mod export;
pub mod sets;

pub use battery::{run_battery, BatterySpec, DiagnosticsReport};
pub use error::{CliError, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "FORMBOUND_THREADS";

/// Sizes the global thread pool from [`THREADS_VAR`] when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Argument(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Argument(e.to_string()))
}
