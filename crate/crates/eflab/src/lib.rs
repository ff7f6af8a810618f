//! Command-line front end, configuration and file formats for `eflab-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

use std::time::Instant;

use serde_json::json;

pub use commands::Report;
pub use config::{Command, ScenarioConfig};
pub use error::RunError;

use output::Outputs;

pub const MANIFEST: &str = "manifest.json";

/// Runs a resolved scenario and writes its manifest. On failure every file written by
/// this run is removed again.
pub fn run(cfg: &ScenarioConfig) -> Result<Report, RunError> {
    let start = Instant::now();
    let mut out = Outputs::new(cfg.output_dir())?;
    let result = commands::execute(cfg, &mut out).and_then(|report| {
        let mut files = out.files();
        files.push(MANIFEST.to_string());
        let manifest = json!({
            "tool": "eflab",
            "version": env!("CARGO_PKG_VERSION"),
            "command": cfg.command().name(),
            "seed": cfg.seed,
            "rng": commands::RNG_NAME,
            "resolved_config": cfg,
            "summary": report.summary,
            "warnings": report.warnings,
            "files": files,
            "wall_time_seconds": start.elapsed().as_secs_f64(),
        });
        out.json(MANIFEST, &manifest)?;
        Ok(report)
    });
    if result.is_err() {
        out.roll_back();
    }
    result
}
