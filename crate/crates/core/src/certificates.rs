//! Numerical certificates for the stability claims about the controlled
//! dynamics: diagonal Lyapunov functions for the disease-free regime, the
//! comparison-system audit for the endemic regime and the one-half bound on
//! every trajectory.

// negated comparisons below make NaN count as a failed check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::{self, Write};

use serde::Serialize;

use crate::dynamics::{EpidemicParams, StateVector, Trajectory};
use crate::error::{Error, Result};
use crate::graph::EpidemicNetwork;
use crate::linalg::{self, Matrix};
use crate::spectral;

/// Largest `λ_max(MᵀPM − P)` accepted for a non-strict certificate.
pub const NON_STRICT_SLACK: f64 = 1e-12;

/// Objective evaluations allowed when refining the Perron-ratio candidate.
pub const SEARCH_BUDGET: usize = 10_000;

/// Rounding allowance for the bound `[B̄]_ii ≤ −(7/8)ΔTβ`.
pub const BBAR_SLACK: f64 = 1e-15;

/// Rounding allowance for `−z(k) ≤ y(k) ≤ z(k)`.
pub const SANDWICH_SLACK: f64 = 1e-12;

/// Positive diagonal `P` with `MᵀPM − P` negative (semi)definite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovCertificate {
    pub p_diag: Vec<f64>,
    /// `λ_max(MᵀPM − P)`.
    pub margin: f64,
    /// `ρ(M) < 1`: the margin is strictly negative.
    pub strict: bool,
    pub rho: f64,
    /// Objective evaluations spent, including the initial candidate.
    pub evaluations: usize,
}

/// `MᵀPM − P` for `P = diag(p)`.
pub fn lyapunov_matrix(m: &Matrix, p: &[f64]) -> Matrix {
    let pm = m.scale_rows(p);
    let mut s = m.transpose().matmul(&pm);
    for (i, pi) in p.iter().enumerate() {
        s[(i, i)] -= pi;
    }
    s
}

pub fn lyapunov_margin(m: &Matrix, p: &[f64]) -> f64 {
    linalg::symmetric_max_eigenvalue(&lyapunov_matrix(m, p))
}

/// Searches for a diagonal Lyapunov matrix of a nonnegative irreducible `m`
/// with `ρ(m) ≤ 1 + tol`.
///
/// The candidate `p_i = u_i / w_i` from the left and right Perron vectors
/// satisfies `MᵀPM ⪯ ρ²P`; if rounding spoils the sign condition the
/// candidate is refined by multiplicative coordinate descent on `λ_max`.
pub fn find_diagonal_lyapunov(m: &Matrix, tol: f64) -> Result<LyapunovCertificate> {
    m.check_nonnegative()?;
    let rho = spectral::spectral_radius(m, spectral::DEFAULT_TOL, spectral::DEFAULT_MAX_ITER)?;
    let perron = spectral::perron_vectors(m, spectral::DEFAULT_TOL)?;
    if rho > 1.0 + tol {
        return Err(Error::SpectralRadiusExceedsOne { rho });
    }
    let strict = rho < 1.0 - tol;
    let accept = |margin: f64| {
        if strict {
            margin < 0.0
        } else {
            margin <= NON_STRICT_SLACK
        }
    };

    let mut p: Vec<f64> = perron
        .left
        .iter()
        .zip(&perron.right)
        .map(|(u, w)| u / w)
        .collect();
    let top = p.iter().copied().fold(0.0, f64::max);
    p.iter_mut().for_each(|v| *v /= top);

    let mut margin = lyapunov_margin(m, &p);
    let mut evaluations = 1;
    let mut step = 0.1;
    while !accept(margin) {
        let mut improved = false;
        for i in 0..p.len() {
            for factor in [1.0 + step, 1.0 / (1.0 + step)] {
                if evaluations >= SEARCH_BUDGET {
                    return Err(Error::SearchExhausted {
                        evaluations,
                        best_margin: margin,
                    });
                }
                let mut trial = p.clone();
                trial[i] *= factor;
                let candidate = lyapunov_margin(m, &trial);
                evaluations += 1;
                if candidate < margin {
                    p = trial;
                    margin = candidate;
                    improved = true;
                    break;
                }
            }
            if accept(margin) {
                break;
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-12 {
                return Err(Error::SearchExhausted {
                    evaluations,
                    best_margin: margin,
                });
            }
        }
    }

    Ok(LyapunovCertificate {
        p_diag: p,
        margin,
        strict,
        rho,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentReport {
    /// Steps `k` with `x(k) ≠ 0` whose successor was examined.
    pub steps_checked: usize,
    pub strictly_decreasing: bool,
    /// Smallest `V(k) − V(k+1)` over the checked steps.
    pub min_decrement: Option<f64>,
    pub violations: Vec<usize>,
    /// `V(k) = x(k)ᵀPx(k)` along the trajectory.
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl DescentReport {
    /// Per-step log with header `k,V,descent_margin,phi_nonneg`; the last
    /// column does not apply to this certificate and is left empty.
    pub fn write_step_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,V,descent_margin,phi_nonneg")?;
        for (k, v) in self.values.iter().enumerate() {
            let margin = self
                .values
                .get(k + 1)
                .map(|next| format!("{:?}", v - next))
                .unwrap_or_default();
            writeln!(out, "{k},{v:?},{margin},")?;
        }
        Ok(())
    }
}

/// Checks that `V(x) = xᵀPx` strictly decreases along the trajectory at
/// every step that starts away from the origin.
pub fn verify_dfe_descent(
    trajectory: &Trajectory,
    m: &Matrix,
    certificate: &LyapunovCertificate,
) -> Result<DescentReport> {
    let n = trajectory.n();
    for found in [m.dim(), certificate.p_diag.len()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    let p = &certificate.p_diag;
    let values: Vec<f64> = trajectory
        .states
        .iter()
        .map(|x| x.values().iter().zip(p).map(|(xi, pi)| pi * xi * xi).sum())
        .collect();

    let mut steps_checked = 0;
    let mut min_decrement: Option<f64> = None;
    let mut violations = Vec::new();
    for k in 0..trajectory.last_step() {
        if trajectory.states[k].is_zero() {
            continue;
        }
        steps_checked += 1;
        let dec = values[k] - values[k + 1];
        min_decrement = Some(min_decrement.map_or(dec, |m: f64| m.min(dec)));
        if !(dec > 0.0) {
            violations.push(k);
        }
    }
    Ok(DescentReport {
        steps_checked,
        strictly_decreasing: violations.is_empty(),
        min_decrement,
        violations,
        values,
    })
}

/// Diagonal of `B̄ = −2ΔTβI + B(x)`, i.e. `ΔTβ(−2x_i² + 3x_i − 2)`.
pub fn bbar_diagonal(x: &StateVector, params: &EpidemicParams) -> Vec<f64> {
    let scale = params.dt() * params.beta();
    x.values()
        .iter()
        .map(|&xi| scale * (-2.0 * xi * xi + 3.0 * xi - 2.0))
        .collect()
}

/// Every entry of `B̄` is at most `−(7/8)ΔTβ`.
pub fn bbar_bound_check(x: &StateVector, params: &EpidemicParams) -> bool {
    let bound = -0.875 * params.dt() * params.beta() + BBAR_SLACK;
    bbar_diagonal(x, params).iter().all(|&b| b <= bound)
}

/// Per-step record of the comparison-matrix checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiCheck {
    pub step: usize,
    pub phi_nonnegative: bool,
    pub phi_min_entry: f64,
    /// Diagonal entries of `Φ(k) − D` that are not negative although `x_i(k) > 0`.
    pub diagonal_violations: usize,
    /// Off-diagonal entries on graph edges that are not negative although `x_i(k) > 0`.
    pub edge_violations: usize,
    /// Agents with `x_i(k) = 0`, whose row of `Φ(k) − D` vanishes.
    pub zero_state_agents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndemicAudit {
    pub x_bar: f64,
    pub d_matrix: Matrix,
    pub d_row_sum_error: f64,
    pub d_nonnegative: bool,
    pub rho_d: f64,
    /// Left Perron vector of `D`, unit sum.
    pub v: Vec<f64>,
    /// `‖vᵀD − vᵀ‖∞`
    pub v_residual: f64,
    #[serde(skip)]
    pub phi_checks: Vec<PhiCheck>,
    pub phi_nonnegative_all: bool,
    pub phi_sign_pattern_ok: bool,
    /// `max_k ‖y(k+1) − Φ(k)y(k)‖∞`: agreement of `Φ` with the dynamics.
    pub phi_replay_error: f64,
    /// `V(k) = vᵀz(k)` along the comparison system.
    #[serde(skip)]
    pub lyap_sequence: Vec<f64>,
    pub steps_checked: usize,
    pub min_descent_margin: Option<f64>,
    pub descent_violations: Vec<usize>,
    pub descent_ok: bool,
    pub sandwich_ok: bool,
    /// `(step, agent)` pairs where `|y| > z`.
    pub sandwich_violations: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

impl EndemicAudit {
    /// All structural and trajectory checks at the stated tolerances.
    pub fn passed(&self) -> bool {
        self.d_row_sum_error <= 1e-12
            && (self.rho_d - 1.0).abs() <= 1e-8
            && self.v.iter().all(|&x| x > 0.0)
            && self.v_residual <= 1e-10
            && self.sandwich_ok
            && self.descent_ok
    }

    /// Per-step log with header `k,V,descent_margin,phi_nonneg`.
    pub fn write_step_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,V,descent_margin,phi_nonneg")?;
        for (k, v) in self.lyap_sequence.iter().enumerate() {
            let margin = self
                .lyap_sequence
                .get(k + 1)
                .map(|next| format!("{:?}", v - next))
                .unwrap_or_default();
            let nonneg = self
                .phi_checks
                .get(k)
                .map(|c| c.phi_nonnegative.to_string())
                .unwrap_or_default();
            writeln!(out, "{k},{v:?},{margin},{nonneg}")?;
        }
        Ok(())
    }
}

/// Builds the comparison system `z(k+1) = Φ(k)z(k)`, `z(0) = |x(0) − x̄|`,
/// that dominates the deviation `y(k) = x(k) − x̄` from the endemic
/// equilibrium, and checks the linear Lyapunov function `vᵀz` along it.
///
/// `Φ(k) = I − ΔTγc·I + 2ΔTγx̄c·diag(x(k)) + ΔTβ(I − 2diag(x(k)))(I − diag(x(k)))A`
/// and `D = I − ΔTγc·I + ΔTβA` with `c = 1/((1 − 2x̄)(1 − x̄))`.
pub fn build_endemic_audit(
    trajectory: &Trajectory,
    network: &EpidemicNetwork,
    params: &EpidemicParams,
    x_bar: f64,
) -> Result<EndemicAudit> {
    let n = network.n();
    if trajectory.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: trajectory.n(),
        });
    }
    if !network.irreducible() || !network.satisfies_weight_assumption() {
        return Err(Error::AssumptionViolation(
            "endemic audit needs a strongly connected, row-stochastic network with a_ii > 1/2"
                .into(),
        ));
    }
    if params.r0() <= 1.0 {
        return Err(Error::AssumptionViolation(format!(
            "endemic audit needs r0 > 1, got {}",
            params.r0()
        )));
    }
    if !(x_bar > 0.0 && x_bar < 0.5) {
        return Err(Error::AssumptionViolation(format!(
            "endemic level {x_bar} is outside (0, 1/2)"
        )));
    }

    let (beta, gamma, dt) = (params.beta(), params.gamma(), params.dt());
    let a = network.weights();
    let c = 1.0 / ((1.0 - 2.0 * x_bar) * (1.0 - x_bar));
    let heal = dt * gamma * c;
    let d_matrix = Matrix::from_fn(n, |i, j| {
        let off = dt * beta * a[(i, j)];
        if i == j {
            1.0 - heal + off
        } else {
            off
        }
    });
    let d_row_sum_error = d_matrix
        .row_sums()
        .iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    let d_nonnegative = d_matrix.min_entry() >= 0.0;
    let mut warnings = Vec::new();
    if !d_nonnegative {
        warnings.push("D has a negative entry; the sampling period is too coarse".to_string());
    }
    let rho_d =
        spectral::spectral_radius(&d_matrix, spectral::DEFAULT_TOL, spectral::DEFAULT_MAX_ITER)?;
    let v = spectral::perron_vectors(&d_matrix, spectral::DEFAULT_TOL)?.left;
    let v_residual = linalg::max_abs_diff(&d_matrix.vec_mul(&v), &v);

    let deviation =
        |x: &StateVector| -> Vec<f64> { x.values().iter().map(|xi| xi - x_bar).collect() };

    let steps = trajectory.last_step();
    let mut z: Vec<f64> = deviation(trajectory.initial_state())
        .iter()
        .map(|y| y.abs())
        .collect();
    let mut lyap_sequence = Vec::with_capacity(steps + 1);
    let mut phi_checks = Vec::with_capacity(steps);
    let mut sandwich_violations = Vec::new();
    let mut descent_violations = Vec::new();
    let mut min_descent_margin: Option<f64> = None;
    let mut steps_checked = 0;
    let mut phi_replay_error: f64 = 0.0;

    for k in 0..=steps {
        let x = &trajectory.states[k];
        let y = deviation(x);
        for (i, (yi, zi)) in y.iter().zip(&z).enumerate() {
            if yi.abs() > zi + SANDWICH_SLACK {
                sandwich_violations.push((k, i));
            }
        }
        lyap_sequence.push(linalg::dot(&v, &z));
        if k == steps {
            break;
        }

        // Φ(k) = diag(phi_diag) + diag(coupling)·A
        let xs = x.values();
        let coupling: Vec<f64> = xs
            .iter()
            .map(|&xi| dt * beta * (1.0 - 2.0 * xi) * (1.0 - xi))
            .collect();
        let phi_diag: Vec<f64> = xs
            .iter()
            .map(|&xi| 1.0 - heal + 2.0 * dt * gamma * x_bar * c * xi)
            .collect();

        let mut check = PhiCheck {
            step: k,
            phi_nonnegative: true,
            phi_min_entry: f64::INFINITY,
            diagonal_violations: 0,
            edge_violations: 0,
            zero_state_agents: 0,
        };
        for i in 0..n {
            for j in 0..n {
                let phi = coupling[i] * a[(i, j)] + if i == j { phi_diag[i] } else { 0.0 };
                check.phi_min_entry = check.phi_min_entry.min(phi);
                if xs[i] == 0.0 {
                    continue;
                }
                let diff = phi - d_matrix[(i, j)];
                if i == j {
                    if !(diff < 0.0) {
                        check.diagonal_violations += 1;
                    }
                } else if a[(i, j)] > 0.0 && !(diff < 0.0) {
                    check.edge_violations += 1;
                }
            }
            if xs[i] == 0.0 {
                check.zero_state_agents += 1;
            }
        }
        check.phi_nonnegative = check.phi_min_entry >= 0.0;

        let apply = |w: &[f64]| -> Vec<f64> {
            let aw = a.mul_vec(w);
            (0..n)
                .map(|i| phi_diag[i] * w[i] + coupling[i] * aw[i])
                .collect()
        };
        let y_next = deviation(&trajectory.states[k + 1]);
        phi_replay_error = phi_replay_error.max(linalg::max_abs_diff(&apply(&y), &y_next));

        let z_next = apply(&z);
        if z.iter().any(|&zi| zi != 0.0) {
            steps_checked += 1;
            let margin = lyap_sequence[k] - linalg::dot(&v, &z_next);
            min_descent_margin = Some(min_descent_margin.map_or(margin, |m: f64| m.min(margin)));
            if !(margin > 0.0) {
                descent_violations.push(k);
            }
        }
        z = z_next;
        phi_checks.push(check);
    }

    let phi_nonnegative_all = phi_checks.iter().all(|c| c.phi_nonnegative);
    let phi_sign_pattern_ok = phi_checks
        .iter()
        .all(|c| c.diagonal_violations == 0 && c.edge_violations == 0);
    if !phi_nonnegative_all {
        let first = phi_checks.iter().find(|c| !c.phi_nonnegative).unwrap();
        warnings.push(format!(
            "Phi(k) has a negative entry {} at step {}",
            first.phi_min_entry, first.step
        ));
    }
    if !phi_sign_pattern_ok {
        warnings.push("Phi(k) - D is not negative on every edge with x_i(k) > 0".to_string());
    }

    Ok(EndemicAudit {
        x_bar,
        d_matrix,
        d_row_sum_error,
        d_nonnegative,
        rho_d,
        v,
        v_residual,
        phi_checks,
        phi_nonnegative_all,
        phi_sign_pattern_ok,
        phi_replay_error,
        lyap_sequence,
        steps_checked,
        min_descent_margin,
        descent_ok: descent_violations.is_empty(),
        descent_violations,
        sandwich_ok: sandwich_violations.is_empty(),
        sandwich_violations,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateIndex {
    pub step: usize,
    pub agent: usize,
}

/// Violations listed individually before only the count is kept.
pub const MAX_LISTED_VIOLATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfBoundReport {
    pub max_state: f64,
    pub argmax: Option<StateIndex>,
    pub bound_holds: bool,
    pub violation_count: usize,
    pub violations: Vec<StateIndex>,
    /// `(1/2)(1 − 1/R₀)`, present when `R₀ > 1`.
    pub cap_threshold: Option<f64>,
    /// States above the threshold whose successor was compared with the
    /// running maximum.
    pub cap_checked: usize,
    pub cap_violation_count: usize,
    pub cap_violations: Vec<StateIndex>,
}

impl HalfBoundReport {
    pub fn passed(&self) -> bool {
        self.bound_holds && self.cap_violation_count == 0
    }
}

/// Checks `x_i(k) < 1/2` everywhere and, for `R₀ > 1`, that any state above
/// `(1/2)(1 − 1/R₀)` moves strictly below the current maximum next step.
pub fn verify_half_bound(trajectory: &Trajectory, params: &EpidemicParams) -> HalfBoundReport {
    let mut max_state = f64::NEG_INFINITY;
    let mut argmax = None;
    let mut violation_count = 0;
    let mut violations = Vec::new();
    for (step, x) in trajectory.states.iter().enumerate() {
        for (agent, &value) in x.values().iter().enumerate() {
            if value > max_state {
                max_state = value;
                argmax = Some(StateIndex { step, agent });
            }
            if !(value < 0.5) {
                violation_count += 1;
                if violations.len() < MAX_LISTED_VIOLATIONS {
                    violations.push(StateIndex { step, agent });
                }
            }
        }
    }

    let r0 = params.r0();
    let cap_threshold = (r0 > 1.0).then(|| 0.5 * (1.0 - 1.0 / r0));
    let mut cap_checked = 0;
    let mut cap_violation_count = 0;
    let mut cap_violations = Vec::new();
    if let Some(threshold) = cap_threshold {
        for (step, pair) in trajectory.states.windows(2).enumerate() {
            let running_max = pair[0].max();
            for (agent, (&now, &next)) in pair[0].values().iter().zip(pair[1].values()).enumerate()
            {
                if now > threshold {
                    cap_checked += 1;
                    if !(next < running_max) {
                        cap_violation_count += 1;
                        if cap_violations.len() < MAX_LISTED_VIOLATIONS {
                            cap_violations.push(StateIndex { step, agent });
                        }
                    }
                }
            }
        }
    }

    HalfBoundReport {
        max_state: if argmax.is_some() { max_state } else { 0.0 },
        argmax,
        bound_holds: violation_count == 0,
        violation_count,
        violations,
        cap_threshold,
        cap_checked,
        cap_violation_count,
        cap_violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, simulate, ControlPolicy, SimulationOptions, StopReason};
    use crate::equilibrium::endemic_level;
    use crate::graph::generate_geometric_network;

    fn params(beta: f64, gamma: f64) -> EpidemicParams {
        EpidemicParams::new(beta, gamma, 0.01).unwrap()
    }

    fn synthetic(states: Vec<Vec<f64>>, p: EpidemicParams) -> Trajectory {
        Trajectory {
            states: states.into_iter().map(StateVector::raw).collect(),
            params: p,
            policy: ControlPolicy::LinearDistancing,
            stop_reason: StopReason::Horizon,
            range_exits: Vec::new(),
        }
    }

    #[test]
    fn scalar_certificate() {
        let m = Matrix::from_rows(&[[0.995]]).unwrap();
        let cert = find_diagonal_lyapunov(&m, 1e-9).unwrap();
        assert_eq!(cert.p_diag, vec![1.0]);
        assert!((cert.margin - (0.995f64.powi(2) - 1.0)).abs() < 1e-15);
        assert!(cert.strict);
    }

    #[test]
    fn certificates_on_geometric_network() {
        let net = generate_geometric_network(100, 50.0, 100.0, 7).unwrap();
        let m = dynamics::linearization(&net, &params(0.5, 1.0));
        let cert = find_diagonal_lyapunov(&m, 1e-9).unwrap();
        assert!(cert.strict && cert.margin < 0.0);
        assert!(cert.p_diag.iter().all(|p| *p > 0.0));

        let m = dynamics::linearization(&net, &params(1.0, 1.0));
        let cert = find_diagonal_lyapunov(&m, 1e-9).unwrap();
        assert!(!cert.strict && cert.margin <= NON_STRICT_SLACK);

        let m = dynamics::linearization(&net, &params(2.0, 1.0));
        assert!(matches!(
            find_diagonal_lyapunov(&m, 1e-9),
            Err(Error::SpectralRadiusExceedsOne { .. })
        ));
    }

    #[test]
    fn reducible_matrix_has_no_certificate_search() {
        let m = Matrix::from_rows(&[[0.5, 0.0], [0.1, 0.5]]).unwrap();
        assert_eq!(find_diagonal_lyapunov(&m, 1e-9), Err(Error::Reducible));
    }

    #[test]
    fn refinement_repairs_a_bad_candidate() {
        // Perron candidate on a non-normal 2x2 already works; start the
        // search from a deliberately bad P to exercise the descent path
        let m = Matrix::from_rows(&[[0.2, 0.7], [0.05, 0.3]]).unwrap();
        let bad = [1.0, 1e-3];
        assert!(lyapunov_margin(&m, &bad) > 0.0);
        let cert = find_diagonal_lyapunov(&m, 1e-9).unwrap();
        assert!(cert.margin < 0.0);
    }

    #[test]
    fn dfe_descent_on_reference_network() {
        let net = generate_geometric_network(100, 50.0, 100.0, 7).unwrap();
        let p = params(0.5, 1.0);
        let x0 = StateVector::uniform(100, 0.3).unwrap();
        let traj = simulate(
            &x0,
            &net,
            &p,
            &ControlPolicy::LinearDistancing,
            &SimulationOptions::default(),
        )
        .unwrap();
        let m = dynamics::linearization(&net, &p);
        let cert = find_diagonal_lyapunov(&m, 1e-9).unwrap();
        let report = verify_dfe_descent(&traj, &m, &cert).unwrap();
        assert!(report.strictly_decreasing);
        assert_eq!(report.steps_checked, traj.last_step());

        let zero = synthetic(vec![vec![0.0; 100]; 3], p);
        let report = verify_dfe_descent(&zero, &m, &cert).unwrap();
        assert_eq!(report.steps_checked, 0);
        assert!(report.strictly_decreasing);

        let short = synthetic(vec![vec![0.1; 3]], p);
        assert!(verify_dfe_descent(&short, &m, &cert).is_err());
    }

    #[test]
    fn bbar_examples() {
        let p = params(2.0, 1.0);
        let scale = p.dt() * p.beta();
        let x = StateVector::new(vec![0.75, 0.0]).unwrap();
        let d = bbar_diagonal(&x, &p);
        assert!((d[0] + 0.875 * scale).abs() < 1e-17);
        assert!((d[1] + 2.0 * scale).abs() < 1e-17);
        assert!(bbar_bound_check(&x, &p));
    }

    #[test]
    fn d_matrix_diagonal_example() {
        let net = EpidemicNetwork::from_rows(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
        let p = params(2.0, 1.0);
        let x_bar = endemic_level(2.0);
        let traj = synthetic(vec![vec![0.2, 0.1]], p);
        let audit = build_endemic_audit(&traj, &net, &p, x_bar).unwrap();
        assert!((audit.d_matrix[(0, 0)] - 0.992).abs() < 1e-15);
        assert!((audit.d_matrix[(0, 1)] - 0.008).abs() < 1e-15);
        assert!(audit.d_row_sum_error <= 1e-12);
    }

    #[test]
    fn equilibrium_start_is_vacuous() {
        let net = generate_geometric_network(10, 60.0, 100.0, 2).unwrap();
        let p = params(2.0, 1.0);
        let x_bar = endemic_level(2.0);
        let traj = simulate(
            &StateVector::uniform(10, x_bar).unwrap(),
            &net,
            &p,
            &ControlPolicy::LinearDistancing,
            &SimulationOptions {
                horizon: 20,
                stop_tol: 0.0,
            },
        )
        .unwrap();
        let audit = build_endemic_audit(&traj, &net, &p, x_bar).unwrap();
        assert!(audit.lyap_sequence.iter().all(|v| *v == 0.0));
        assert_eq!(audit.steps_checked, 0);
        assert!(audit.descent_ok);
    }

    #[test]
    fn endemic_audit_on_reference_network() {
        let net = generate_geometric_network(100, 50.0, 100.0, 7).unwrap();
        let p = params(2.0, 1.0);
        let x0 = StateVector::new((0..100).map(|i| 0.01 + 0.0048 * i as f64).collect()).unwrap();
        let traj = simulate(
            &x0,
            &net,
            &p,
            &ControlPolicy::LinearDistancing,
            &SimulationOptions::default(),
        )
        .unwrap();
        let audit = build_endemic_audit(&traj, &net, &p, endemic_level(2.0)).unwrap();
        assert!(audit.passed(), "{:?}", audit.warnings);
        assert!(audit.phi_nonnegative_all && audit.phi_sign_pattern_ok);
        assert!(audit.phi_replay_error < 1e-14);
        assert!(audit.lyap_sequence.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn endemic_audit_preconditions() {
        let p = params(2.0, 1.0);
        let skewed = EpidemicNetwork::from_rows(&[[0.3, 0.7], [0.6, 0.4]]).unwrap();
        let traj = synthetic(vec![vec![0.2, 0.1]], p);
        assert!(matches!(
            build_endemic_audit(&traj, &skewed, &p, 0.19),
            Err(Error::AssumptionViolation(_))
        ));
        let net = EpidemicNetwork::from_rows(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
        let low = params(0.5, 1.0);
        assert!(build_endemic_audit(&traj, &net, &low, 0.19).is_err());
        let wide = synthetic(vec![vec![0.2; 3]], p);
        assert!(matches!(
            build_endemic_audit(&wide, &net, &p, 0.19),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn half_bound_examples() {
        let p = params(2.0, 1.0);
        let zero = synthetic(vec![vec![0.0; 4]; 5], p);
        let report = verify_half_bound(&zero, &p);
        assert!(report.bound_holds && report.max_state == 0.0);

        let bad = synthetic(vec![vec![0.1, 0.2], vec![0.3, 0.6], vec![0.2, 0.3]], p);
        let report = verify_half_bound(&bad, &p);
        assert!(!report.bound_holds);
        assert_eq!(report.violations, vec![StateIndex { step: 1, agent: 1 }]);
        assert_eq!(report.max_state, 0.6);
        // 0.3 > 0.25 at step 1 and 0.2 < 0.6: fine; 0.6 -> 0.3 also fine
        assert_eq!(report.cap_checked, 2);
        assert_eq!(report.cap_violation_count, 0);

        let rising = synthetic(vec![vec![0.3, 0.1], vec![0.35, 0.1]], p);
        let report = verify_half_bound(&rising, &p);
        assert_eq!(
            report.cap_violations,
            vec![StateIndex { step: 0, agent: 0 }]
        );
        assert!(!report.passed());

        let low = params(0.5, 1.0);
        assert_eq!(verify_half_bound(&rising, &low).cap_threshold, None);
    }

    #[test]
    fn step_csv_layout() {
        let net = generate_geometric_network(6, 80.0, 100.0, 3).unwrap();
        let p = params(2.0, 1.0);
        let traj = simulate(
            &StateVector::uniform(6, 0.05).unwrap(),
            &net,
            &p,
            &ControlPolicy::LinearDistancing,
            &SimulationOptions {
                horizon: 3,
                stop_tol: 0.0,
            },
        )
        .unwrap();
        let audit = build_endemic_audit(&traj, &net, &p, endemic_level(2.0)).unwrap();
        let mut buf = Vec::new();
        audit.write_step_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,V,descent_margin,phi_nonneg");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].ends_with(",true"));
        assert!(lines[4].ends_with(",,"));
    }
}
