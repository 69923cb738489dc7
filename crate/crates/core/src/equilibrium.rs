//! Endemic equilibrium of the linear-distancing dynamics: the closed-form
//! homogeneous level and an independent fixed-point solver on the network.

use rand::Rng;
use serde::Serialize;

use crate::dynamics::StateVector;
use crate::error::{Error, Result};
use crate::graph::EpidemicNetwork;
use crate::linalg;
use crate::rng::{stream_rng, Stream};

/// Limits of two probe trials closer than this count as the same equilibrium.
pub const AGREEMENT_TOL: f64 = 1e-7;

/// Margin keeping random starts strictly inside `(0, 1/2)`.
pub const OPEN_HALF_MARGIN: f64 = 1e-6;

/// `(3R₀ − √(R₀² + 8R₀)) / (4R₀)`, evaluated in the cancellation-free form
/// `2(R₀ − 1) / (3R₀ + √(R₀² + 8R₀))`.
pub fn endemic_level(r0: f64) -> f64 {
    2.0 * (r0 - 1.0) / (3.0 * r0 + (r0 * r0 + 8.0 * r0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormEquilibrium {
    pub x_bar: f64,
    /// Set when `r0 ≤ 1`: the formula then gives a non-positive number that
    /// is not an endemic state.
    pub regime_mismatch: bool,
}

pub fn endemic_closed_form(r0: f64) -> Result<ClosedFormEquilibrium> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::NonPositiveR0(r0));
    }
    Ok(ClosedFormEquilibrium {
        x_bar: endemic_level(r0),
        regime_mismatch: r0 <= 1.0,
    })
}

/// Diagonal of `H(x) = I + diag(3R₀Ax) − diag(2R₀Ax)·diag(x)`.
pub fn h_diagonal(network: &EpidemicNetwork, r0: f64, x: &[f64]) -> Vec<f64> {
    network
        .weights()
        .mul_vec(x)
        .iter()
        .zip(x)
        .map(|(ax, xi)| 1.0 + 3.0 * r0 * ax - 2.0 * r0 * ax * xi)
        .collect()
}

/// `H(x)⁻¹R₀Ax`, whose fixed points are the equilibria of the controlled map.
pub fn fixed_point_map(network: &EpidemicNetwork, r0: f64, x: &[f64]) -> Vec<f64> {
    network
        .weights()
        .mul_vec(x)
        .iter()
        .zip(x)
        .map(|(ax, xi)| r0 * ax / (1.0 + 3.0 * r0 * ax - 2.0 * r0 * ax * xi))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping: 1.0,
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumMethod {
    ClosedForm,
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    /// Mean of `vector_form`; the common value when the limit is homogeneous.
    pub x_bar: f64,
    pub vector_form: Vec<f64>,
    pub method: EquilibriumMethod,
    pub iterations: usize,
    /// `‖x − H(x)⁻¹R₀Ax‖∞` at the returned point.
    pub residual: f64,
    /// Damping in effect when the iteration stopped.
    pub damping: f64,
}

fn check_endemic_inputs(network: &EpidemicNetwork, r0: f64) -> Result<()> {
    if !(r0 > 1.0 && r0.is_finite()) {
        return Err(Error::AssumptionViolation(format!(
            "endemic equilibrium requires r0 > 1, got {r0}"
        )));
    }
    if !network.irreducible() {
        return Err(Error::AssumptionViolation(
            "A1: interaction graph is not strongly connected".into(),
        ));
    }
    if !network.satisfies_weight_assumption() {
        return Err(Error::AssumptionViolation(
            "A4: weights must be row-stochastic with a_ii > 1/2".into(),
        ));
    }
    Ok(())
}

/// Damped iteration `x ← (1−d)x + d·H(x)⁻¹R₀Ax` until the update falls
/// below `tol`. The damping is halved (down to 1/4) when successive updates
/// alternate in sign without shrinking.
pub fn endemic_fixed_point(
    network: &EpidemicNetwork,
    r0: f64,
    x_init: &StateVector,
    options: &FixedPointOptions,
) -> Result<EquilibriumResult> {
    check_endemic_inputs(network, r0)?;
    if x_init.len() != network.n() {
        return Err(Error::DimensionMismatch {
            expected: network.n(),
            found: x_init.len(),
        });
    }
    if let Some(v) = x_init.values().iter().find(|&&v| !(v > 0.0 && v < 0.5)) {
        return Err(Error::AssumptionViolation(format!(
            "initial guess {v} is outside (0, 1/2)"
        )));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "damping must lie in (0, 1], got {}",
            options.damping
        )));
    }

    let mut damping = options.damping;
    let mut x = x_init.values().to_vec();
    let mut prev_step: Option<(Vec<f64>, f64)> = None;
    let mut oscillations = 0;

    for iter in 1..=options.max_iter {
        let fx = fixed_point_map(network, r0, &x);
        let step: Vec<f64> = fx
            .iter()
            .zip(&x)
            .map(|(f, xi)| damping * (f - xi))
            .collect();
        let change = linalg::norm_inf(&step);
        for (xi, s) in x.iter_mut().zip(&step) {
            *xi += s;
        }
        if change < options.tol {
            let residual = linalg::max_abs_diff(&x, &fixed_point_map(network, r0, &x));
            return Ok(EquilibriumResult {
                x_bar: x.iter().sum::<f64>() / x.len() as f64,
                vector_form: x,
                method: EquilibriumMethod::FixedPoint,
                iterations: iter,
                residual,
                damping,
            });
        }

        if let Some((prev, prev_change)) = &prev_step {
            if linalg::dot(prev, &step) < 0.0 && change >= *prev_change {
                oscillations += 1;
            } else {
                oscillations = 0;
            }
        }
        if oscillations >= 3 && damping > 0.25 {
            damping = (damping * 0.5).max(0.25);
            oscillations = 0;
        }
        prev_step = Some((step, change));
    }
    Err(Error::NoConvergence {
        iterations: options.max_iter,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub max_pairwise_distance: f64,
    pub agreed: bool,
    /// Limit reached from the first start.
    pub limit: Vec<f64>,
}

/// Random start in `(0, 1/2)ⁿ`, kept [`OPEN_HALF_MARGIN`] away from both ends.
pub fn random_open_half_state<R: Rng>(rng: &mut R, n: usize) -> StateVector {
    StateVector::raw(
        (0..n)
            .map(|_| rng.gen_range(OPEN_HALF_MARGIN..0.5 - OPEN_HALF_MARGIN))
            .collect(),
    )
}

/// Solves for the equilibrium from `trials` independent random starts and
/// measures how far apart the limits are.
pub fn uniqueness_probe(
    network: &EpidemicNetwork,
    r0: f64,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if trials < 2 {
        return Err(Error::InvalidArgument(
            "uniqueness probe needs at least 2 trials".into(),
        ));
    }
    check_endemic_inputs(network, r0)?;
    let mut rng = stream_rng(seed, Stream::Trials);
    let starts: Vec<StateVector> = (0..trials)
        .map(|_| random_open_half_state(&mut rng, network.n()))
        .collect();

    let mut limits = Vec::with_capacity(trials);
    for (trial, start) in starts.iter().enumerate() {
        let result = endemic_fixed_point(network, r0, start, &FixedPointOptions::default())
            .map_err(|e| Error::TrialFailed {
                trial,
                source: Box::new(e),
            })?;
        limits.push(result.vector_form);
    }

    let mut max_pairwise_distance: f64 = 0.0;
    for i in 0..limits.len() {
        for j in i + 1..limits.len() {
            max_pairwise_distance =
                max_pairwise_distance.max(linalg::max_abs_diff(&limits[i], &limits[j]));
        }
    }
    Ok(ProbeReport {
        trials,
        max_pairwise_distance,
        agreed: max_pairwise_distance < AGREEMENT_TOL,
        limit: limits.swap_remove(0),
    })
}
