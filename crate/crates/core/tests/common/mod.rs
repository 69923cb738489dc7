#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sisd_core::{EpidemicNetwork, Matrix};

/// Row-stochastic, strongly connected, self-weights in `(1/2, 1)`. A random
/// subset of off-diagonal entries is zeroed, keeping a ring so the graph
/// stays strongly connected.
pub fn weight_network(seed: u64, n: usize) -> EpidemicNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let diag = if n == 1 {
                1.0
            } else {
                rng.gen_range(0.55..0.95)
            };
            let mut row: Vec<f64> = (0..n)
                .map(|j| {
                    let ring = j == (i + 1) % n;
                    if j != i && (ring || rng.gen_bool(0.5)) {
                        rng.gen_range(0.05..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let off: f64 = row.iter().sum();
            if off > 0.0 {
                row.iter_mut().for_each(|v| *v *= (1.0 - diag) / off);
            }
            let rest: f64 = row.iter().sum();
            row[i] = 1.0 - rest;
            row
        })
        .collect();
    EpidemicNetwork::from_rows(&rows).unwrap()
}

pub fn random_nonnegative(seed: u64, n: usize, zero_prob: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen_bool(zero_prob) {
                        0.0
                    } else {
                        rng.gen_range(0.0..2.0)
                    }
                })
                .collect()
        })
        .collect()
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(c, _)| c != j)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * det(&minor)
        })
        .sum()
}

/// Largest real root of the characteristic polynomial, by a downward scan
/// from above the max row sum and bisection of the first sign change.
pub fn char_poly_radius(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let p = |lambda: f64| {
        let shifted: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { lambda - a[i][j] } else { -a[i][j] })
                    .collect()
            })
            .collect();
        det(&shifted)
    };
    let upper = a.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let steps = 20_000;
    let h = upper / steps as f64;
    let mut hi = upper;
    let p_hi = p(hi);
    for s in 1..=steps {
        let lo = upper - s as f64 * h;
        let p_lo = p(lo);
        if p_lo == 0.0 {
            return lo.max(0.0);
        }
        if p_lo.signum() != p_hi.signum() {
            let (mut l, mut r) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                if p(mid).signum() == p_hi.signum() {
                    r = mid;
                } else {
                    l = mid;
                }
            }
            return 0.5 * (l + r);
        }
        hi = lo;
    }
    0.0
}

/// Root of `R(1 - 2x)(1 - x) = 1` in `(0, 1/2)`.
pub fn endemic_level_bisection(r0: f64) -> f64 {
    let f = |x: f64| r0 * (1.0 - 2.0 * x) * (1.0 - x) - 1.0;
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m[(i, j)])
}

pub fn lambda_max(s: &Matrix) -> f64 {
    let sym = to_nalgebra(s);
    let sym = (&sym + sym.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.max()
}

/// Largest eigenvalue modulus via the full nonsymmetric eigen-decomposition.
pub fn spectral_radius_dense(m: &Matrix) -> f64 {
    to_nalgebra(m)
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Spectral radius as the max over strongly connected blocks, each block
/// solved densely. Blocks come from the transitive closure, so this does not
/// share code with the library. On a reducible matrix the dense solver alone
/// can be off by about sqrt(eps) near defective eigenvalues.
pub fn spectral_radius_blockwise(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let reach = closure(rows);
    let mut seen = vec![false; n];
    let mut radius: f64 = 0.0;
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let block: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        block.iter().for_each(|&j| seen[j] = true);
        let sub = DMatrix::from_fn(block.len(), block.len(), |a, b| rows[block[a]][block[b]]);
        let r = sub
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        radius = radius.max(r);
    }
    radius
}

fn closure(rows: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let n = rows.len();
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i == j || rows[i][j] != 0.0).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach
}

/// Transitive closure by Floyd-Warshall; true iff every pair reaches.
pub fn strongly_connected_closure(rows: &[Vec<f64>]) -> bool {
    closure(rows).iter().all(|r| r.iter().all(|&b| b))
}
