//! Interaction networks: construction from weights, random geometric
//! generation and the structural checks the dynamics rely on.

use rand::distributions::OpenClosed01;
use rand::Rng;
use serde::Serialize;

use crate::dynamics::{EpidemicParams, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{stream_rng, Stream};
use crate::spectral;

/// Tolerance on `|Σ_j a_ij − 1|` for a row to count as stochastic.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Re-placements attempted before giving up on a connected geometric graph.
pub const GEOMETRIC_RETRY_BUDGET: usize = 64;

/// Range the self-weight `a_ii` of a generated network is drawn from.
pub const DIAGONAL_WEIGHT_RANGE: (f64, f64) = (0.55, 0.95);

/// Above this value of `ΔT·(β+γ)` the sampling period is flagged as coarse.
pub const DT_ADVISORY_THRESHOLD: f64 = 0.05;

/// Weighted directed interaction graph. `weights[(i, j)] = a_ij` is the
/// strength with which agent `j` infects agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicNetwork {
    weights: Matrix,
    irreducible: bool,
    row_stochastic: bool,
    strong_diagonal: bool,
}

impl EpidemicNetwork {
    /// Validates the weights and derives the structural flags.
    pub fn new(weights: Matrix) -> Result<Self> {
        weights.check_nonnegative()?;
        if weights.dim() == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one agent".into(),
            ));
        }
        let irreducible = strongly_connected(&weights);
        let row_stochastic = weights
            .row_sums()
            .iter()
            .all(|s| (s - 1.0).abs() <= ROW_SUM_TOL);
        let strong_diagonal = (0..weights.dim()).all(|i| weights[(i, i)] > 0.5);
        Ok(Self {
            weights,
            irreducible,
            row_stochastic,
            strong_diagonal,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Parses the matrix CSV format: one row per line, comma separated, no
    /// header. Blank lines are ignored.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| {
                        Error::InvalidArgument(format!(
                            "line {}: cannot parse {:?}: {e}",
                            lineno + 1,
                            field.trim()
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Writes the weights in the matrix CSV format with round-trip precision.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in self.weights.rows() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.weights.dim()
    }

    #[inline]
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn irreducible(&self) -> bool {
        self.irreducible
    }

    pub fn row_stochastic(&self) -> bool {
        self.row_stochastic
    }

    pub fn strong_diagonal(&self) -> bool {
        self.strong_diagonal
    }

    /// Row-stochastic with every self-weight above one half.
    pub fn satisfies_weight_assumption(&self) -> bool {
        self.row_stochastic && self.strong_diagonal
    }
}

fn strongly_connected(m: &Matrix) -> bool {
    if m.dim() == 0 {
        return false;
    }
    linalg::reachable_from(m, 0, false).iter().all(|&r| r)
        && linalg::reachable_from(m, 0, true).iter().all(|&r| r)
}

/// True iff every agent reaches every other along edges `a_ij ≠ 0`.
pub fn is_strongly_connected(network: &EpidemicNetwork) -> bool {
    strongly_connected(network.weights())
}

/// Random geometric network in a square of side `area_side`: agents closer
/// than `radius` are neighbours, self-weights are drawn from
/// [`DIAGONAL_WEIGHT_RANGE`] and the remaining row mass is split over the
/// neighbours in proportion to independent uniform draws.
///
/// Placements are redrawn until the neighbour graph is connected, up to
/// [`GEOMETRIC_RETRY_BUDGET`] times.
pub fn generate_geometric_network(
    n: usize,
    radius: f64,
    area_side: f64,
    seed: u64,
) -> Result<EpidemicNetwork> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if !(area_side > 0.0 && area_side.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "area_side must be positive, got {area_side}"
        )));
    }
    if n == 1 {
        return EpidemicNetwork::from_rows(&[[1.0]]);
    }

    let mut placement = stream_rng(seed, Stream::Placement);
    let r2 = radius * radius;
    let neighbours = (0..GEOMETRIC_RETRY_BUDGET)
        .find_map(|_| {
            let points: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    (
                        placement.gen_range(0.0..area_side),
                        placement.gen_range(0.0..area_side),
                    )
                })
                .collect();
            let adjacency = Matrix::from_fn(n, |i, j| {
                let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
                if i != j && dx * dx + dy * dy <= r2 {
                    1.0
                } else {
                    0.0
                }
            });
            strongly_connected(&adjacency).then_some(adjacency)
        })
        .ok_or(Error::ConnectivityFailure {
            attempts: GEOMETRIC_RETRY_BUDGET,
        })?;

    let mut rng = stream_rng(seed, Stream::Weights);
    let (lo, hi) = DIAGONAL_WEIGHT_RANGE;
    let mut weights = Matrix::zeros(n);
    for i in 0..n {
        let self_weight: f64 = rng.gen_range(lo..hi);
        let raw: Vec<(usize, f64)> = (0..n)
            .filter(|&j| neighbours[(i, j)] != 0.0)
            .map(|j| (j, rng.sample::<f64, _>(OpenClosed01)))
            .collect();
        let total: f64 = raw.iter().map(|(_, r)| r).sum();
        let scale = (1.0 - self_weight) / total;
        for &(j, r) in &raw {
            weights[(i, j)] = r * scale;
        }
        let off_diagonal: f64 = weights.row(i).iter().sum();
        weights[(i, i)] = 1.0 - off_diagonal;
    }
    EpidemicNetwork::new(weights)
}

/// Margins behind the sampling-period check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingMargins {
    /// `ΔT·γ`, must be below one.
    pub dt_gamma: f64,
    /// `ΔT·β·ρ(A)`, must be below one.
    pub dt_beta_rho_a: f64,
    /// `ΔT·(β+γ)`; only advisory.
    pub dt_beta_plus_gamma: f64,
    pub advisory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub a1_strongly_connected: bool,
    pub a2_initial_in_range: bool,
    pub a3_dt_small: bool,
    pub a3_margins: SamplingMargins,
    pub a4_row_stochastic_diag: bool,
    pub messages: Vec<String>,
}

impl AssumptionReport {
    /// Connectivity and sampling period: the checks no scenario may skip.
    pub fn hard_checks_pass(&self) -> bool {
        self.a1_strongly_connected && self.a3_dt_small
    }

    pub fn all_pass(&self) -> bool {
        self.a1_strongly_connected
            && self.a2_initial_in_range
            && self.a3_dt_small
            && self.a4_row_stochastic_diag
    }
}

/// Evaluates the four standing assumptions on a network, parameter set and
/// initial state.
pub fn validate_assumptions(
    network: &EpidemicNetwork,
    params: &EpidemicParams,
    x0: &StateVector,
) -> Result<AssumptionReport> {
    if x0.len() != network.n() {
        return Err(Error::DimensionMismatch {
            expected: network.n(),
            found: x0.len(),
        });
    }
    let mut messages = Vec::new();

    let a1 = network.irreducible();
    if !a1 {
        messages.push("A1: interaction graph is not strongly connected".to_string());
    }

    let a2 = x0.values().iter().all(|&x| x > 0.0 && x < 0.5);
    if let Some((i, x)) = x0
        .values()
        .iter()
        .enumerate()
        .find(|(_, &x)| !(x > 0.0 && x < 0.5))
    {
        messages.push(format!(
            "A2: initial state x_{} = {x} is outside (0, 1/2)",
            i + 1
        ));
    }

    let rho_a = spectral::spectral_radius(
        network.weights(),
        spectral::DEFAULT_TOL,
        spectral::DEFAULT_MAX_ITER,
    )?;
    let margins = SamplingMargins {
        dt_gamma: params.dt() * params.gamma(),
        dt_beta_rho_a: params.dt() * params.beta() * rho_a,
        dt_beta_plus_gamma: params.dt() * (params.beta() + params.gamma()),
        advisory: params.dt() * (params.beta() + params.gamma()) > DT_ADVISORY_THRESHOLD,
    };
    let a3 = margins.dt_gamma < 1.0 && margins.dt_beta_rho_a < 1.0;
    if margins.dt_gamma >= 1.0 {
        messages.push(format!(
            "A3: dt*gamma = {} is not below 1",
            margins.dt_gamma
        ));
    }
    if margins.dt_beta_rho_a >= 1.0 {
        messages.push(format!(
            "A3: dt*beta*rho(A) = {} is not below 1",
            margins.dt_beta_rho_a
        ));
    }
    if margins.advisory {
        messages.push(format!(
            "A3 advisory: dt*(beta+gamma) = {} exceeds {DT_ADVISORY_THRESHOLD}",
            margins.dt_beta_plus_gamma
        ));
    }

    let a4 = network.satisfies_weight_assumption();
    if !network.row_stochastic() {
        messages.push("A4: weight rows do not sum to 1".to_string());
    }
    if !network.strong_diagonal() {
        messages.push("A4: some self-weight a_ii is not above 1/2".to_string());
    }

    Ok(AssumptionReport {
        a1_strongly_connected: a1,
        a2_initial_in_range: a2,
        a3_dt_small: a3,
        a3_margins: margins,
        a4_row_stochastic_diag: a4,
        messages,
    })
}
