//! Discrete-time SIS update maps, with and without a state-dependent contact
//! reduction, their matrix form and trajectory simulation.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, EpidemicNetwork};
use crate::linalg::{self, Matrix};

/// Infection rate `β`, healing rate `γ` and sampling period `ΔT`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpidemicParams {
    beta: f64,
    gamma: f64,
    dt: f64,
}

impl EpidemicParams {
    pub fn new(beta: f64, gamma: f64, dt: f64) -> Result<Self> {
        for (name, value) in [("beta", beta), ("gamma", gamma), ("dt", dt)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveRate { name, value });
            }
        }
        Ok(Self { beta, gamma, dt })
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Basic reproduction number `β/γ`.
    #[inline]
    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }
}

/// Per-agent infected fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    /// Accepts only finite values in `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(Error::StateOutOfRange { index, value });
        }
        Ok(Self(values))
    }

    /// Wraps stepper output without range validation. Use
    /// [`StateVector::in_unit_range`] to detect excursions.
    pub fn raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn in_unit_range(&self) -> bool {
        self.0.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for StateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Piecewise-linear map from an agent's own state to its gain, constant
/// beyond the first and last breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    points: Vec<(f64, f64)>,
}

impl GainTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "gain table needs at least one point".into(),
            ));
        }
        if points.iter().any(|(x, g)| !x.is_finite() || !g.is_finite()) {
            return Err(Error::InvalidArgument(
                "gain table entries must be finite".into(),
            ));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { points })
    }

    /// Interpolated gain, clamped to `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        let g = match pts.iter().position(|&(px, _)| px >= x) {
            None => pts[pts.len() - 1].1,
            Some(0) => pts[0].1,
            Some(k) => {
                let (x0, g0) = pts[k - 1];
                let (x1, g1) = pts[k];
                if x1 == x0 {
                    g1
                } else {
                    g0 + (g1 - g0) * (x - x0) / (x1 - x0)
                }
            }
        };
        g.clamp(0.0, 1.0)
    }
}

/// How each agent scales its infection rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlPolicy {
    /// Nominal contacts, `b_i ≡ 1`.
    None,
    /// `b_i = max(0, 1 − 2x_i)`.
    LinearDistancing,
    /// One lookup table per agent.
    CustomTable(Vec<GainTable>),
}

/// Gain vector `b(x)` with every entry in `[0, 1]`.
pub fn control_gain(policy: &ControlPolicy, x: &StateVector) -> Result<Vec<f64>> {
    match policy {
        ControlPolicy::None => Ok(vec![1.0; x.len()]),
        ControlPolicy::LinearDistancing => Ok(x
            .values()
            .iter()
            .map(|&xi| (1.0 - 2.0 * xi).clamp(0.0, 1.0))
            .collect()),
        ControlPolicy::CustomTable(tables) => {
            if tables.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    found: tables.len(),
                });
            }
            Ok(tables
                .iter()
                .zip(x.values())
                .map(|(t, &xi)| t.eval(xi))
                .collect())
        }
    }
}

fn check_dim(network: &EpidemicNetwork, x: &StateVector) -> Result<()> {
    if x.len() != network.n() {
        return Err(Error::DimensionMismatch {
            expected: network.n(),
            found: x.len(),
        });
    }
    Ok(())
}

fn step_with_gain(
    x: &StateVector,
    network: &EpidemicNetwork,
    params: &EpidemicParams,
    gain: impl Fn(usize, f64) -> f64,
) -> StateVector {
    let (beta, gamma, dt) = (params.beta(), params.gamma(), params.dt());
    let xs = x.values();
    let pressure = network.weights().mul_vec(xs);
    StateVector::raw(
        xs.iter()
            .zip(&pressure)
            .enumerate()
            .map(|(i, (&xi, &p))| xi + dt * (gain(i, xi) * beta * (1.0 - xi) * p - gamma * xi))
            .collect(),
    )
}

/// Uncontrolled Euler step `x_i + ΔT[β(1−x_i)Σ_j a_ij x_j − γx_i]`.
pub fn step_basic(
    x: &StateVector,
    network: &EpidemicNetwork,
    params: &EpidemicParams,
) -> Result<StateVector> {
    check_dim(network, x)?;
    Ok(step_with_gain(x, network, params, |_, _| 1.0))
}

/// Euler step with the infection term of agent `i` scaled by `b_i(x)`.
pub fn step_controlled(
    x: &StateVector,
    network: &EpidemicNetwork,
    params: &EpidemicParams,
    policy: &ControlPolicy,
) -> Result<StateVector> {
    check_dim(network, x)?;
    match policy {
        ControlPolicy::None => Ok(step_with_gain(x, network, params, |_, _| 1.0)),
        // identical to the polynomial map while x_i <= 1/2
        ControlPolicy::LinearDistancing => Ok(step_with_gain(x, network, params, |_, xi| {
            (1.0 - 2.0 * xi).clamp(0.0, 1.0)
        })),
        ControlPolicy::CustomTable(_) => {
            let b = control_gain(policy, x)?;
            Ok(step_with_gain(x, network, params, |i, _| b[i]))
        }
    }
}

/// `M`, `B(x)` and `M̂(x) = M − B(x)A` for the linear-distancing dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub m: Matrix,
    pub b: Matrix,
    pub m_hat: Matrix,
}

/// `M = I + ΔTβA − ΔTγI`.
pub fn linearization(network: &EpidemicNetwork, params: &EpidemicParams) -> Matrix {
    let (beta, gamma, dt) = (params.beta(), params.gamma(), params.dt());
    let a = network.weights();
    Matrix::from_fn(a.dim(), |i, j| {
        let base = dt * beta * a[(i, j)];
        if i == j {
            base + 1.0 - dt * gamma
        } else {
            base
        }
    })
}

pub fn build_system_matrices(
    network: &EpidemicNetwork,
    params: &EpidemicParams,
    x: &StateVector,
) -> Result<SystemMatrices> {
    check_dim(network, x)?;
    let m = linearization(network, params);
    let scale = params.dt() * params.beta();
    let b_diag: Vec<f64> = x
        .values()
        .iter()
        .map(|&xi| scale * xi * (3.0 - 2.0 * xi))
        .collect();
    let ba = network.weights().scale_rows(&b_diag);
    let m_hat = m.zip_map(&ba, |a, b| a - b);
    Ok(SystemMatrices {
        m,
        b: Matrix::diagonal(&b_diag),
        m_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub horizon: usize,
    pub stop_tol: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            horizon: 200_000,
            stop_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "step")]
pub enum StopReason {
    /// The per-step max change fell below `stop_tol` at this step.
    Converged(usize),
    Horizon,
}

/// A state left `[0, 1]` during simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeExit {
    pub step: usize,
    pub agent: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateVector>,
    pub params: EpidemicParams,
    pub policy: ControlPolicy,
    pub stop_reason: StopReason,
    pub range_exits: Vec<RangeExit>,
}

impl Trajectory {
    /// Index of the last recorded state.
    pub fn last_step(&self) -> usize {
        self.states.len() - 1
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    /// Largest deviation between each recorded state and the stepper applied
    /// to its predecessor.
    pub fn replay_error(&self, network: &EpidemicNetwork) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for pair in self.states.windows(2) {
            let next = step_controlled(&pair[0], network, &self.params, &self.policy)?;
            worst = worst.max(linalg::max_abs_diff(next.values(), pair[1].values()));
        }
        Ok(worst)
    }

    /// CSV with header `k,x_1,...,x_n`, values with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.n();
        let mut header = String::from("k");
        for i in 1..=n {
            header.push_str(&format!(",x_{i}"));
        }
        writeln!(out, "{header}")?;
        let mut line = String::new();
        for (k, state) in self.states.iter().enumerate() {
            line.clear();
            line.push_str(&k.to_string());
            for v in state.values() {
                line.push(',');
                line.push_str(&decimal_17(*v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Positional decimal rendering with exactly 17 significant digits.
pub fn decimal_17(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.16e}", v.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if v < 0.0 { "-" } else { "" };
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            format!("{}{}", digits, "0".repeat(int_len - digits.len()))
        } else {
            format!("{}.{}", &digits[..int_len], &digits[int_len..])
        }
    };
    format!("{sign}{body}")
}

/// Iterates the controlled map from `x0` until the per-step max change drops
/// below `stop_tol` or `horizon` steps have been taken.
///
/// Connectivity and the sampling-period condition are enforced; the
/// initial-state and weight assumptions are not, since they only matter for
/// the certificates of the linear-distancing policy.
pub fn simulate(
    x0: &StateVector,
    network: &EpidemicNetwork,
    params: &EpidemicParams,
    policy: &ControlPolicy,
    options: &SimulationOptions,
) -> Result<Trajectory> {
    check_dim(network, x0)?;
    let report = graph::validate_assumptions(network, params, x0)?;
    if !report.hard_checks_pass() {
        let hard: Vec<&str> = report
            .messages
            .iter()
            .filter(|m| m.starts_with("A1:") || m.starts_with("A3:"))
            .map(String::as_str)
            .collect();
        return Err(Error::AssumptionViolation(hard.join("; ")));
    }

    let mut states = Vec::with_capacity(options.horizon.min(1 << 16) + 1);
    states.push(x0.clone());
    let mut range_exits = Vec::new();
    let mut stop_reason = StopReason::Horizon;

    for k in 1..=options.horizon {
        let prev = states.last().unwrap();
        let next = step_controlled(prev, network, params, policy)?;
        let change = linalg::max_abs_diff(prev.values(), next.values());
        for (agent, &value) in next.values().iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                range_exits.push(RangeExit {
                    step: k,
                    agent,
                    value,
                });
            }
        }
        states.push(next);
        if change < options.stop_tol {
            stop_reason = StopReason::Converged(k);
            break;
        }
    }

    Ok(Trajectory {
        states,
        params: *params,
        policy: policy.clone(),
        stop_reason,
        range_exits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> EpidemicNetwork {
        EpidemicNetwork::from_rows(&[[1.0]]).unwrap()
    }

    fn reference_params() -> EpidemicParams {
        EpidemicParams::new(2.0, 1.0, 0.01).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn params_reject_non_positive() {
        assert!(matches!(
            EpidemicParams::new(0.0, 1.0, 0.01),
            Err(Error::NonPositiveRate { name: "beta", .. })
        ));
        assert!(EpidemicParams::new(1.0, -1.0, 0.01).is_err());
        assert!(EpidemicParams::new(1.0, 1.0, f64::INFINITY).is_err());
        assert_eq!(EpidemicParams::new(2.0, 1.0, 0.01).unwrap().r0(), 2.0);
    }

    #[test]
    fn state_vector_range() {
        assert!(StateVector::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert_eq!(
            StateVector::new(vec![0.1, 1.2]),
            Err(Error::StateOutOfRange {
                index: 1,
                value: 1.2
            })
        );
        assert!(StateVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn basic_step_examples() {
        let net = scalar();
        let p = reference_params();
        let zero = step_basic(&StateVector::zeros(1), &net, &p).unwrap();
        assert_eq!(zero.values(), &[0.0]);

        let x = StateVector::new(vec![0.1]).unwrap();
        let next = step_basic(&x, &net, &p).unwrap();
        assert!(close(next.values()[0], 0.1008, 1e-15));

        let ring = EpidemicNetwork::from_rows(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
        let all = step_basic(&StateVector::uniform(2, 1.0).unwrap(), &ring, &p).unwrap();
        for v in all.values() {
            assert!(close(*v, 1.0 - 0.01, 1e-15));
        }
    }

    #[test]
    fn gain_examples() {
        let x = StateVector::new(vec![0.0, 0.25, 0.6]).unwrap();
        assert_eq!(
            control_gain(&ControlPolicy::LinearDistancing, &x).unwrap(),
            vec![1.0, 0.5, 0.0]
        );
        assert_eq!(
            control_gain(&ControlPolicy::None, &x).unwrap(),
            vec![1.0; 3]
        );
    }

    #[test]
    fn custom_table_is_interpolated_and_clamped() {
        let t = GainTable::new(vec![(0.5, -1.0), (0.0, 1.5)]).unwrap();
        assert_eq!(t.eval(-1.0), 1.0);
        assert_eq!(t.eval(0.25), 0.25);
        assert_eq!(t.eval(0.9), 0.0);
        let policy = ControlPolicy::CustomTable(vec![t.clone(), t]);
        let x = StateVector::new(vec![0.1, 0.25]).unwrap();
        let b = control_gain(&policy, &x).unwrap();
        assert!(b.iter().all(|g| (0.0..=1.0).contains(g)));
        assert!(control_gain(&policy, &StateVector::zeros(3)).is_err());
        assert!(GainTable::new(vec![]).is_err());
    }

    #[test]
    fn custom_table_reproducing_linear_policy_matches() {
        let net = EpidemicNetwork::from_rows(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
        let table = GainTable::new(vec![(0.0, 1.0), (0.5, 0.0)]).unwrap();
        let policy = ControlPolicy::CustomTable(vec![table.clone(), table]);
        let x = StateVector::new(vec![0.12, 0.31]).unwrap();
        let a = step_controlled(&x, &net, &reference_params(), &policy).unwrap();
        let b = step_controlled(
            &x,
            &net,
            &reference_params(),
            &ControlPolicy::LinearDistancing,
        )
        .unwrap();
        assert!(linalg::max_abs_diff(a.values(), b.values()) < 1e-16);
    }

    #[test]
    fn controlled_step_examples() {
        let net = scalar();
        let p = reference_params();
        let lin = ControlPolicy::LinearDistancing;
        assert!(step_controlled(&StateVector::zeros(1), &net, &p, &lin)
            .unwrap()
            .is_zero());

        let x = StateVector::new(vec![0.1]).unwrap();
        let next = step_controlled(&x, &net, &p, &lin).unwrap();
        assert!(close(next.values()[0], 0.10044, 1e-15));

        // (6 - √20)/8 is a fixed point at R0 = 2
        let x_bar = (6.0 - 20f64.sqrt()) / 8.0;
        let fixed =
            step_controlled(&StateVector::new(vec![x_bar]).unwrap(), &net, &p, &lin).unwrap();
        assert!(close(fixed.values()[0], x_bar, 1e-12));

        assert!(matches!(
            step_controlled(&StateVector::zeros(2), &net, &p, &lin),
            Err(Error::DimensionMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn system_matrix_examples() {
        let net = scalar();
        let p = reference_params();
        let at_zero = build_system_matrices(&net, &p, &StateVector::zeros(1)).unwrap();
        assert_eq!(at_zero.b[(0, 0)], 0.0);
        assert_eq!(at_zero.m_hat, at_zero.m);
        assert!(close(at_zero.m[(0, 0)], 1.01, 1e-15));

        let x = StateVector::new(vec![0.1]).unwrap();
        let sys = build_system_matrices(&net, &p, &x).unwrap();
        assert!(close(sys.b[(0, 0)], 0.0056, 1e-15));
        assert!(close(sys.m_hat[(0, 0)], 1.0044, 1e-15));
        assert!(close(sys.m_hat.mul_vec(x.values())[0], 0.10044, 1e-15));
    }

    #[test]
    fn zero_start_stops_after_one_step() {
        let net = EpidemicNetwork::from_rows(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
        let traj = simulate(
            &StateVector::zeros(2),
            &net,
            &reference_params(),
            &ControlPolicy::LinearDistancing,
            &SimulationOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.states.len(), 2);
        assert_eq!(traj.stop_reason, StopReason::Converged(1));
        assert!(traj.final_state().is_zero());
    }

    #[test]
    fn simulate_rejects_hard_violations() {
        let split = EpidemicNetwork::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let x0 = StateVector::uniform(2, 0.2).unwrap();
        let err = simulate(
            &x0,
            &split,
            &reference_params(),
            &ControlPolicy::LinearDistancing,
            &SimulationOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation(ref m) if m.contains("A1")));

        let net = scalar();
        let coarse = EpidemicParams::new(0.5, 1.0, 2.0).unwrap();
        let err = simulate(
            &StateVector::new(vec![0.2]).unwrap(),
            &net,
            &coarse,
            &ControlPolicy::LinearDistancing,
            &SimulationOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation(ref m) if m.contains("A3")));
    }

    #[test]
    fn horizon_bounds_length_and_replays() {
        let net = EpidemicNetwork::from_rows(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
        let traj = simulate(
            &StateVector::new(vec![0.1, 0.4]).unwrap(),
            &net,
            &reference_params(),
            &ControlPolicy::LinearDistancing,
            &SimulationOptions {
                horizon: 50,
                stop_tol: 0.0,
            },
        )
        .unwrap();
        assert_eq!(traj.states.len(), 51);
        assert_eq!(traj.stop_reason, StopReason::Horizon);
        assert_eq!(traj.replay_error(&net).unwrap(), 0.0);
        assert!(traj.range_exits.is_empty());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal_17(0.0), "0");
        assert_eq!(decimal_17(0.1), "0.10000000000000001");
        assert_eq!(decimal_17(1.0), "1.0000000000000000");
        assert_eq!(decimal_17(-2.5e-3), "-0.0025000000000000001");
        assert_eq!(decimal_17(123.0), "123.00000000000000");
        assert_eq!(decimal_17(1e20), "100000000000000000000");
        for v in [0.190983005625052, 1e-12, 0.49999999999, 3.0e-300] {
            assert_eq!(decimal_17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_layout() {
        let net = scalar();
        let traj = simulate(
            &StateVector::new(vec![0.1]).unwrap(),
            &net,
            &reference_params(),
            &ControlPolicy::LinearDistancing,
            &SimulationOptions {
                horizon: 2,
                stop_tol: 0.0,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,x_1");
        assert_eq!(lines[1], "0,0.10000000000000001");
        assert!(lines[2].starts_with("1,0.1004400000000000"));
        assert_eq!(lines.len(), 4);
    }
}
