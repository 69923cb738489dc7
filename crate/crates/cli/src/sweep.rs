//! Parameter sweeps over `(β, γ)` on one shared network and initial state.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{OutputSpec, ScenarioConfig};
use crate::error::CliError;
use crate::scenario::{self, RunSummary, EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_PASS};

pub const SWEEP_HEADER: &str = "beta,gamma,r0,rho_M,regime,x_bar,x_final_max,bound_holds";

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub beta: f64,
    pub gamma: f64,
    pub directory: PathBuf,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// 2 if any row failed a certificate, else 1 if any row errored, else 0.
    pub fn exit_code(&self) -> i32 {
        let codes = self.rows.iter().map(|r| match &r.summary {
            Some(s) => s.exit_code,
            None => EXIT_CONFIG,
        });
        if codes.clone().any(|c| c == EXIT_CERTIFICATE) {
            EXIT_CERTIFICATE
        } else if codes.clone().any(|c| c == EXIT_CONFIG) {
            EXIT_CONFIG
        } else {
            EXIT_PASS
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SWEEP_HEADER}")?;
        for row in &self.rows {
            match &row.summary {
                Some(s) => writeln!(
                    out,
                    "{:?},{:?},{:?},{:?},{},{},{:?},{}",
                    s.beta,
                    s.gamma,
                    s.r0,
                    s.rho_m,
                    s.regime.as_str(),
                    s.x_bar.map(|x| format!("{x:?}")).unwrap_or_default(),
                    s.x_final_max,
                    s.bound_holds
                )?,
                None => writeln!(out, "{:?},{:?},,,ERROR,,,", row.beta, row.gamma)?,
            }
        }
        Ok(())
    }
}

/// Reads a grid file: a JSON array of `[beta, gamma]` pairs.
pub fn read_grid(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))
}

pub fn row_directory(base: &Path, index: usize) -> PathBuf {
    base.join(format!("row_{index:03}"))
}

/// Runs every grid point on the network and initial state generated from
/// `shared_seed`. Rows execute in parallel; each writes its artifacts to its
/// own `row_NNN` directory and the table keeps grid order. A failing row is
/// reported in place and does not stop the others.
pub fn sweep(
    base: &ScenarioConfig,
    grid: &[(f64, f64)],
    shared_seed: u64,
) -> Result<SweepReport, CliError> {
    if grid.is_empty() {
        return Err(CliError::ConfigParse("sweep grid is empty".into()));
    }
    let mut config = base.clone();
    config.seed = shared_seed;
    let prepared = scenario::prepare(&config)?;

    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(index, &(beta, gamma))| {
            let directory = row_directory(&config.outputs.directory, index);
            let outputs = OutputSpec {
                directory: directory.clone(),
                ..config.outputs.clone()
            };
            let mut params = config.params;
            params.beta = beta;
            params.gamma = gamma;
            let result = scenario::build_params(&params)
                .and_then(|p| scenario::execute(&prepared, &p, &outputs));
            let (summary, error) = match result {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(format!("row {index}: {e}"))),
            };
            SweepRow {
                index,
                beta,
                gamma,
                directory,
                summary,
                error,
            }
        })
        .collect();

    let report = SweepReport {
        seed: shared_seed,
        rows,
    };
    let dir = &config.outputs.directory;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    scenario::write_with(&dir.join("sweep.csv"), |w| report.write_csv(w))?;
    Ok(report)
}
