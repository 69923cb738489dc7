//! Single scenario execution: build inputs, simulate, classify, certify and
//! write artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sisd_core::certificates::{self, DescentReport, EndemicAudit, HalfBoundReport};
use sisd_core::dynamics::{self, RangeExit};
use sisd_core::equilibrium::{endemic_level, random_open_half_state};
use sisd_core::rng::{stream_rng, Stream};
use sisd_core::spectral::{self, TIE_TOL};
use sisd_core::{
    AssumptionReport, ControlPolicy, EpidemicNetwork, EpidemicParams, LyapunovCertificate, Regime,
    RegimeReport, SimulationOptions, StateVector, StopReason,
};

use crate::config::{InitialStateSpec, NetworkSpec, OutputSpec, ParamsSpec, ScenarioConfig};
use crate::error::CliError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;

/// Network, initial state and simulation settings resolved from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScenario {
    pub network: EpidemicNetwork,
    pub x0: StateVector,
    pub policy: ControlPolicy,
    pub options: SimulationOptions,
}

pub fn build_network(spec: &NetworkSpec, seed: u64) -> Result<EpidemicNetwork, CliError> {
    match spec {
        NetworkSpec::Generated(g) => Ok(sisd_core::generate_geometric_network(
            g.n,
            g.radius,
            g.area_side,
            seed,
        )?),
        NetworkSpec::File(f) => {
            let text = fs::read_to_string(&f.file).map_err(|e| CliError::io(&f.file, e))?;
            Ok(EpidemicNetwork::from_csv_str(&text)?)
        }
    }
}

pub fn build_initial_state(
    spec: &InitialStateSpec,
    n: usize,
    seed: u64,
) -> Result<StateVector, CliError> {
    let values = match spec {
        InitialStateSpec::UniformOpenHalf { seed: own } => {
            let mut rng = stream_rng(own.unwrap_or(seed), Stream::InitialState);
            return Ok(random_open_half_state(&mut rng, n));
        }
        InitialStateSpec::Explicit { values } => values.clone(),
        InitialStateSpec::File { path } => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            text.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>().map_err(|e| {
                        CliError::ConfigParse(format!("{}: bad value {t:?}: {e}", path.display()))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    if values.len() != n {
        return Err(sisd_core::Error::DimensionMismatch {
            expected: n,
            found: values.len(),
        }
        .into());
    }
    Ok(StateVector::new(values)?)
}

pub fn build_params(spec: &ParamsSpec) -> Result<EpidemicParams, CliError> {
    Ok(EpidemicParams::new(spec.beta, spec.gamma, spec.dt)?)
}

pub fn prepare(config: &ScenarioConfig) -> Result<PreparedScenario, CliError> {
    let network = build_network(&config.network, config.seed)?;
    let x0 = build_initial_state(&config.x0, network.n(), config.seed)?;
    Ok(PreparedScenario {
        network,
        x0,
        policy: config.policy.to_policy(),
        options: SimulationOptions {
            horizon: config.horizon,
            stop_tol: config.stop_tol,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub n: usize,
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
    pub r0: f64,
    #[serde(rename = "rho_A")]
    pub rho_a: f64,
    #[serde(rename = "rho_M")]
    pub rho_m: f64,
    pub regime: Regime,
    pub x_bar: Option<f64>,
    pub x_final_max: f64,
    pub steps: usize,
    pub stop_reason: StopReason,
    pub bound_holds: bool,
    pub checks: Vec<CheckOutcome>,
    /// Checks that did not apply, with the reason.
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

#[derive(Serialize)]
struct AuditArtifact<'a> {
    assumptions: &'a AssumptionReport,
    checks: &'a [CheckOutcome],
    skipped: &'a [String],
    lyapunov: Option<&'a LyapunovCertificate>,
    dfe_descent: Option<&'a DescentReport>,
    endemic_audit: Option<&'a EndemicAudit>,
    half_bound: &'a HalfBoundReport,
    range_exits: &'a [RangeExit],
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunSummary, CliError> {
    let prepared = prepare(config)?;
    let params = build_params(&config.params)?;
    execute(&prepared, &params, &config.outputs)
}

/// Runs one parameter set on already-built inputs.
pub fn execute(
    prepared: &PreparedScenario,
    params: &EpidemicParams,
    outputs: &OutputSpec,
) -> Result<RunSummary, CliError> {
    let network = &prepared.network;
    let assumptions = sisd_core::validate_assumptions(network, params, &prepared.x0)?;
    if !assumptions.hard_checks_pass() {
        let hard: Vec<&str> = assumptions
            .messages
            .iter()
            .filter(|m| m.starts_with("A1:") || m.starts_with("A3:"))
            .map(String::as_str)
            .collect();
        return Err(CliError::AssumptionViolation(hard.join("; ")));
    }
    let mut warnings: Vec<String> = assumptions
        .messages
        .iter()
        .filter(|m| !(m.starts_with("A1:") || m.starts_with("A3:")))
        .cloned()
        .collect();

    let trajectory = dynamics::simulate(
        &prepared.x0,
        network,
        params,
        &prepared.policy,
        &prepared.options,
    )?;
    let regime = spectral::classify_regime(network, params)?;
    let controlled = prepared.policy == ControlPolicy::LinearDistancing;

    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let mut lyapunov = None;
    let mut dfe_descent = None;
    let mut endemic_audit = None;

    match regime.regime {
        Regime::DiseaseFree => {
            let m = dynamics::linearization(network, params);
            match certificates::find_diagonal_lyapunov(&m, TIE_TOL) {
                Ok(cert) => {
                    let report = certificates::verify_dfe_descent(&trajectory, &m, &cert)?;
                    checks.push(CheckOutcome {
                        name: "dfe_descent".into(),
                        passed: report.strictly_decreasing,
                        detail: format!(
                            "lambda_max = {:e}, {} steps checked, {} violations",
                            cert.margin,
                            report.steps_checked,
                            report.violations.len()
                        ),
                    });
                    lyapunov = Some(cert);
                    dfe_descent = Some(report);
                }
                Err(e) => checks.push(CheckOutcome {
                    name: "dfe_descent".into(),
                    passed: false,
                    detail: format!("no diagonal Lyapunov certificate: {e}"),
                }),
            }
        }
        Regime::Endemic if !controlled => {
            skipped.push("endemic_audit: only defined under linear_distancing".into())
        }
        Regime::Endemic if prepared.x0.is_zero() => {
            skipped.push("endemic_audit: x0 = 0 stays at the disease-free state".into())
        }
        Regime::Endemic if !network.satisfies_weight_assumption() => {
            skipped.push("endemic_audit: needs row-stochastic weights with a_ii > 1/2".into())
        }
        Regime::Endemic => {
            let x_bar = endemic_level(params.r0());
            let audit = certificates::build_endemic_audit(&trajectory, network, params, x_bar)?;
            warnings.extend(audit.warnings.iter().cloned());
            checks.push(CheckOutcome {
                name: "endemic_audit".into(),
                passed: audit.passed(),
                detail: format!(
                    "rho(D) = {:?}, {} steps checked, {} descent violations, {} sandwich violations",
                    audit.rho_d,
                    audit.steps_checked,
                    audit.descent_violations.len(),
                    audit.sandwich_violations.len()
                ),
            });
            endemic_audit = Some(audit);
        }
    }

    let half_bound = certificates::verify_half_bound(&trajectory, params);
    if controlled {
        checks.push(CheckOutcome {
            name: "half_bound".into(),
            passed: half_bound.passed(),
            detail: format!(
                "max state {:?}, {} bound violations, {} of {} cap checks failed",
                half_bound.max_state,
                half_bound.violation_count,
                half_bound.cap_violation_count,
                half_bound.cap_checked
            ),
        });
    } else {
        skipped.push("half_bound: only guaranteed under linear_distancing".into());
    }
    if !trajectory.range_exits.is_empty() {
        warnings.push(format!(
            "{} state values left [0, 1]",
            trajectory.range_exits.len()
        ));
    }

    write_artifacts(outputs, &trajectory, &regime, || AuditArtifact {
        assumptions: &assumptions,
        checks: &checks,
        skipped: &skipped,
        lyapunov: lyapunov.as_ref(),
        dfe_descent: dfe_descent.as_ref(),
        endemic_audit: endemic_audit.as_ref(),
        half_bound: &half_bound,
        range_exits: &trajectory.range_exits,
    })?;
    if outputs.audit_csv {
        let path = outputs.directory.join("audit_steps.csv");
        if let Some(audit) = &endemic_audit {
            write_with(&path, |w| audit.write_step_csv(w))?;
        } else if let Some(report) = &dfe_descent {
            write_with(&path, |w| report.write_step_csv(w))?;
        }
    }

    let exit_code = if checks.iter().all(|c| c.passed) {
        EXIT_PASS
    } else {
        EXIT_CERTIFICATE
    };
    Ok(RunSummary {
        n: network.n(),
        beta: params.beta(),
        gamma: params.gamma(),
        dt: params.dt(),
        r0: params.r0(),
        rho_a: regime.rho_a,
        rho_m: regime.rho_m,
        regime: regime.regime,
        x_bar: regime.predicted_equilibrium,
        x_final_max: trajectory.final_state().max(),
        steps: trajectory.last_step(),
        stop_reason: trajectory.stop_reason,
        bound_holds: half_bound.bound_holds,
        checks,
        skipped,
        warnings,
        exit_code,
    })
}

fn write_artifacts<'a>(
    outputs: &OutputSpec,
    trajectory: &dynamics::Trajectory,
    regime: &RegimeReport,
    audit: impl FnOnce() -> AuditArtifact<'a>,
) -> Result<(), CliError> {
    let dir = &outputs.directory;
    if !(outputs.trajectory_csv || outputs.regime_json || outputs.audit_json || outputs.audit_csv) {
        return Ok(());
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if outputs.trajectory_csv {
        write_with(&dir.join("trajectory.csv"), |w| trajectory.write_csv(w))?;
    }
    if outputs.regime_json {
        write_json(&dir.join("regime.json"), regime)?;
    }
    if outputs.audit_json {
        write_json(&dir.join("audit.json"), &audit())?;
    }
    Ok(())
}

pub(crate) fn write_with(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}
