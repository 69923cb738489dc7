//! Spectral radii and Perron vectors of nonnegative matrices, and the
//! DFE/endemic regime classification built on them.
//!
//! The Perron root of each irreducible diagonal block is bracketed by the
//! Collatz–Wielandt bounds `min_i (Mx)_i/x_i ≤ ρ ≤ max_i (Mx)_i/x_i`, valid for
//! any positive `x`. A short power iteration on the primitive shift
//! `(M + I)/2` supplies the starting vector; Noda's shifted inverse iteration
//! then closes the bracket. Near-identity matrices such as
//! `M = I + ΔT(βA − γI)` have spectral gaps of order `ΔT`, which plain power
//! iteration cannot resolve in a reasonable number of steps.

use serde::Serialize;

use crate::dynamics::{self, EpidemicParams};
use crate::equilibrium;
use crate::error::{Error, Result};
use crate::graph::EpidemicNetwork;
use crate::linalg::{self, Matrix};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// `ρ(M)` within this distance of one is classified as the DFE regime.
pub const TIE_TOL: f64 = 1e-9;

const WARMUP_ITERS: usize = 32;
const STAGNATION_LIMIT: usize = 12;

/// Spectral radius of a nonnegative matrix.
///
/// Reducible inputs are split into strongly connected diagonal blocks, whose
/// spectra together make up the spectrum of the whole matrix.
pub fn spectral_radius(matrix: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    matrix.check_nonnegative()?;
    let mut rho: f64 = 0.0;
    for block in linalg::strongly_connected_components(matrix) {
        let value = if block.len() == 1 {
            matrix[(block[0], block[0])]
        } else {
            perron_root(&linalg::submatrix(matrix, &block), tol, max_iter)?.0
        };
        rho = rho.max(value);
    }
    Ok(rho)
}

fn collatz_wielandt(m: &Matrix, x: &[f64]) -> (f64, f64) {
    let mx = m.mul_vec(x);
    mx.iter()
        .zip(x)
        .map(|(a, b)| a / b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

fn normalize_max(x: &mut [f64]) {
    let s = linalg::norm_inf(x);
    for v in x.iter_mut() {
        *v /= s;
    }
}

fn shifted_power_step(m: &Matrix, x: &[f64]) -> Vec<f64> {
    let mx = m.mul_vec(x);
    let mut next: Vec<f64> = mx.iter().zip(x).map(|(a, b)| 0.5 * (a + b)).collect();
    normalize_max(&mut next);
    next
}

/// Perron root and a positive right eigenvector (max-normalized) of an
/// irreducible nonnegative matrix.
fn perron_root(m: &Matrix, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let n = m.dim();
    let mut x = vec![1.0; n];
    let converged = |lo: f64, hi: f64| hi - lo <= tol * hi.abs().max(1.0);

    let mut best_width = f64::INFINITY;
    let mut stagnant = 0;
    for iter in 0..max_iter {
        let (lo, hi) = collatz_wielandt(m, &x);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NoConvergence { iterations: iter });
        }
        if converged(lo, hi) {
            return Ok((0.5 * (lo + hi), x));
        }
        let width = hi - lo;
        if width < best_width {
            best_width = width;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant > STAGNATION_LIMIT && iter >= WARMUP_ITERS {
                return Err(Error::NoConvergence { iterations: iter });
            }
        }

        if iter < WARMUP_ITERS {
            x = shifted_power_step(m, &x);
            continue;
        }

        // Noda step: (σI − M)y = x with σ the upper Collatz–Wielandt bound.
        let shifted = Matrix::from_fn(n, |i, j| if i == j { hi - m[(i, j)] } else { -m[(i, j)] });
        match linalg::lu_solve(&shifted, &x) {
            // σ is exactly an eigenvalue
            None => return Ok((hi, x)),
            Some(mut y) if y.iter().all(|v| *v > 0.0 && v.is_finite()) => {
                normalize_max(&mut y);
                x = y;
            }
            Some(_) => x = shifted_power_step(m, &x),
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// Left and right Perron vectors, each normalized to unit sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerronVectors {
    pub rho: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

pub fn perron_vectors(matrix: &Matrix, tol: f64) -> Result<PerronVectors> {
    matrix.check_nonnegative()?;
    let n = matrix.dim();
    if n == 0
        || !linalg::reachable_from(matrix, 0, false).iter().all(|&r| r)
        || !linalg::reachable_from(matrix, 0, true).iter().all(|&r| r)
    {
        return Err(Error::Reducible);
    }
    let unit_sum = |mut v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    };
    if n == 1 {
        return Ok(PerronVectors {
            rho: matrix[(0, 0)],
            left: vec![1.0],
            right: vec![1.0],
        });
    }
    let (rho, right) = perron_root(matrix, tol, DEFAULT_MAX_ITER)?;
    let (_, left) = perron_root(&matrix.transpose(), tol, DEFAULT_MAX_ITER)?;
    Ok(PerronVectors {
        rho,
        left: unit_sum(left),
        right: unit_sum(right),
    })
}

/// `1 + ΔT(β − γ)`: the spectral radius of `M` when `A` is row-stochastic and
/// irreducible.
pub fn rho_m_closed_form(params: &EpidemicParams) -> f64 {
    1.0 + params.dt() * (params.beta() - params.gamma())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    #[serde(rename = "DFE")]
    DiseaseFree,
    #[serde(rename = "ENDEMIC")]
    Endemic,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::DiseaseFree => "DFE",
            Regime::Endemic => "ENDEMIC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    #[serde(rename = "rho_A")]
    pub rho_a: f64,
    #[serde(rename = "rho_M")]
    pub rho_m: f64,
    /// Present only for row-stochastic networks with dominant self-weights.
    #[serde(rename = "rho_M_closed")]
    pub rho_m_closed: Option<f64>,
    pub r0: f64,
    pub regime: Regime,
    /// Zero in the DFE regime; the homogeneous endemic level otherwise, which
    /// is only defined for networks satisfying the weight assumption.
    pub predicted_equilibrium: Option<f64>,
}

pub fn classify_regime(network: &EpidemicNetwork, params: &EpidemicParams) -> Result<RegimeReport> {
    if !network.irreducible() {
        return Err(Error::Reducible);
    }
    let rho_a = spectral_radius(network.weights(), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let m = dynamics::linearization(network, params);
    let rho_m = spectral_radius(&m, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let weight_assumption = network.satisfies_weight_assumption();
    let regime = if rho_m > 1.0 + TIE_TOL {
        Regime::Endemic
    } else {
        Regime::DiseaseFree
    };
    let predicted_equilibrium = match regime {
        Regime::DiseaseFree => Some(0.0),
        Regime::Endemic if weight_assumption => Some(equilibrium::endemic_level(params.r0())),
        Regime::Endemic => None,
    };
    Ok(RegimeReport {
        rho_a,
        rho_m,
        rho_m_closed: weight_assumption.then(|| rho_m_closed_form(params)),
        r0: params.r0(),
        regime,
        predicted_equilibrium,
    })
}
