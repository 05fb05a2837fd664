//! Dense nonnegative-matrix primitives shared by the analysis modules:
//! spectral radii, Perron eigenvector pairs, stationary row vectors and the
//! directed-graph checks behind irreducibility/aperiodicity tests.

use nalgebra::{DMatrix, DVector, RowDVector};
use thiserror::Error;

/// Errors raised by the low-level matrix routines.
#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("spectral radius iteration did not converge after {iterations} iterations (last bracket [{lower}, {upper}])")]
    SprNonConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("singular linear system in {context}")]
    Singular { context: &'static str },
    #[error("stationary vector requested for a reducible matrix")]
    Reducible,
}

/// Spectral radius of a nonnegative matrix.
///
/// Uses a real Schur decomposition and falls back to shifted power iteration
/// if the QR iteration fails to settle. For the irreducible matrices handled
/// here the result is the Perron root.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64, MatrixError> {
    debug_assert_eq!(m.nrows(), m.ncols());
    if m.nrows() == 1 {
        return Ok(m[(0, 0)].abs());
    }
    if let Some(schur) = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 100_000) {
        let eigs = schur.complex_eigenvalues();
        let rho = eigs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        return Ok(rho);
    }
    spectral_radius_power(m, 1e-13, 100_000).map(|(rho, _)| rho)
}

/// Spectral radius by power iteration on `M + I`, with Collatz–Wielandt
/// brackets as the stopping rule.
///
/// The shift keeps the iteration convergent on periodic support patterns.
/// Returns the estimate together with the iteration count; errors when the
/// bracket has not tightened to `rel_tol` within `max_iter` steps.
pub fn spectral_radius_power(
    m: &DMatrix<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(f64, usize), MatrixError> {
    let n = m.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    for it in 1..=max_iter {
        // y = (M + I) x
        let mut y = m * &x;
        y += &x;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..n {
            if x[i] > 0.0 {
                let ratio = y[i] / x[i];
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        lower = lo;
        upper = hi;
        if hi - lo <= rel_tol * hi.max(1.0) {
            return Ok(((hi + lo) / 2.0 - 1.0, it));
        }
        let norm = y.amax();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        x = y / norm;
    }
    Err(MatrixError::SprNonConvergence {
        iterations: max_iter,
        lower: lower - 1.0,
        upper: upper - 1.0,
    })
}

/// Right and left Perron vectors of an irreducible nonnegative matrix whose
/// spectral radius `rho` is already known.
///
/// One shift-and-invert step per vector is enough: the shift sits within
/// `~1e-12 rho` of the dominant eigenvalue, so the Perron component dominates
/// after a single solve. Vectors are returned entrywise positive with unit
/// 1-norm.
pub fn perron_pair(
    m: &DMatrix<f64>,
    rho: f64,
) -> Result<(DVector<f64>, DVector<f64>), MatrixError> {
    let right = inverse_iteration(m, rho)?;
    let left = inverse_iteration(&m.transpose(), rho)?;
    Ok((left, right))
}

fn inverse_iteration(m: &DMatrix<f64>, rho: f64) -> Result<DVector<f64>, MatrixError> {
    let n = m.nrows();
    let mut offset = 1e-12 * rho.max(1.0) + 1e-300;
    'shift: for _attempt in 0..4 {
        let shifted = m - DMatrix::<f64>::identity(n, n) * (rho + offset);
        let lu = shifted.lu();
        let mut x = DVector::from_element(n, 1.0);
        for _ in 0..3 {
            match lu.solve(&x) {
                Some(y) => {
                    let norm = y.amax();
                    if !norm.is_finite() || norm == 0.0 {
                        offset *= 16.0;
                        continue 'shift;
                    }
                    x = y / norm;
                }
                None => {
                    offset *= 16.0;
                    continue 'shift;
                }
            }
        }
        // Perron vector is positive; fix the sign from the dominant entry.
        let mut idx = 0;
        for i in 0..n {
            if x[i].abs() > x[idx].abs() {
                idx = i;
            }
        }
        if x[idx] < 0.0 {
            x = -x;
        }
        let sum: f64 = x.iter().map(|v| v.abs()).sum();
        if sum == 0.0 || !sum.is_finite() {
            offset *= 16.0;
            continue;
        }
        return Ok(x.map(|v| v.abs()) / sum);
    }
    Err(MatrixError::Singular {
        context: "Perron inverse iteration",
    })
}

/// Stationary row vector of an irreducible stochastic matrix `P`, from the
/// dense balance system with one equation replaced by the normalization.
pub fn stationary_row(p: &DMatrix<f64>) -> Result<RowDVector<f64>, MatrixError> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .full_piv_lu()
        .solve(&b)
        .ok_or(MatrixError::Reducible)?;
    Ok(RowDVector::from_iterator(n, x.iter().copied()))
}

/// Adjacency lists of the directed graph on the positive entries of `m`.
pub fn positive_adjacency(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    (0..n)
        .map(|i| (0..n).filter(|&j| m[(i, j)] > 0.0).collect())
        .collect()
}

/// Strong connectivity of a directed graph given as adjacency lists.
pub fn strongly_connected(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return false;
    }
    let reach = |edges: &dyn Fn(usize) -> Vec<usize>| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for v in edges(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count
    };
    let forward = reach(&|u| adj[u].clone());
    if forward < n {
        return false;
    }
    let mut radj = vec![Vec::new(); n];
    for (u, vs) in adj.iter().enumerate() {
        for &v in vs {
            radj[v].push(u);
        }
    }
    reach(&|u| radj[u].clone()) == n
}

/// Period of a strongly connected directed graph: the gcd over all edges
/// `(u, v)` of `dist(u) + 1 - dist(v)` along a BFS layering from node 0.
/// The graph is aperiodic iff the result is 1.
pub fn graph_period(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[0] = 0;
    queue.push_back(0usize);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: u64 = 0;
    for (u, vs) in adj.iter().enumerate() {
        for &v in vs {
            if dist[u] != usize::MAX && dist[v] != usize::MAX {
                let delta = dist[u] as i64 + 1 - dist[v] as i64;
                g = gcd(g, delta.unsigned_abs());
            }
        }
    }
    g.max(1) as usize
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Entrywise max-norm of the difference of two equally sized matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
