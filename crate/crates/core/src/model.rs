//! Model types for discrete-time two-dimensional quasi-birth-and-death
//! processes.
//!
//! A 2d-QBD process is a skip-free random walk on the quarter lattice with a
//! finite phase that modulates the jump probabilities. Its law is fixed by
//! four families of `s0 x s0` nonnegative blocks:
//!
//! ```text
//! interior  A_{i,j}      i, j in {-1, 0, 1}
//! x1-face   A1_{i,j}     i in {-1, 0, 1}, j in {0, 1}     (rows with x2 = 0)
//! x2-face   A2_{i,j}     i in {0, 1}, j in {-1, 0, 1}     (rows with x1 = 0)
//! origin    A0_{i,j}     i, j in {0, 1}
//! ```
//!
//! where `(i, j)` is the lattice displacement. The sum of each family is a
//! stochastic matrix. Phases are 0-indexed.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix;

/// Lattice displacement range for unbounded coordinates.
pub const H: [i32; 3] = [-1, 0, 1];
/// Lattice displacement range at a reflecting boundary.
pub const H_PLUS: [i32; 2] = [0, 1];

/// Errors from model construction and (de)serialization.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parse error at {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("dimension mismatch at {path}: {reason}")]
    Shape { path: String, reason: String },
}

/// One of the four block families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockFamily {
    /// Interior blocks `A_{i,j}`.
    A,
    /// x1-face blocks `A1_{i,j}`.
    A1,
    /// x2-face blocks `A2_{i,j}`.
    A2,
    /// Origin blocks `A0_{i,j}`.
    A0,
}

impl fmt::Display for BlockFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockFamily::A => write!(f, "A"),
            BlockFamily::A1 => write!(f, "A1"),
            BlockFamily::A2 => write!(f, "A2"),
            BlockFamily::A0 => write!(f, "A0"),
        }
    }
}

/// An irreducible 2d-QBD model given by its four block families.
///
/// Immutable after construction; all analysis operations take `&self` and are
/// safe to call concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdModel {
    s0: usize,
    interior: Vec<DMatrix<f64>>, // 9, index (i+1)*3 + (j+1)
    face1: Vec<DMatrix<f64>>,    // 6, index (i+1)*2 + j
    face2: Vec<DMatrix<f64>>,    // 6, index i*3 + (j+1)
    origin: Vec<DMatrix<f64>>,   // 4, index i*2 + j
}

impl QbdModel {
    /// Builds a model from explicit block lists, checking only shapes.
    ///
    /// `interior` is indexed by `(i+1)*3 + (j+1)` for `i, j in {-1,0,1}`,
    /// `face1` by `(i+1)*2 + j`, `face2` by `i*3 + (j+1)`, `origin` by
    /// `i*2 + j`. Stochasticity and irreducibility are *not* enforced here;
    /// use [`validate`] to audit them.
    pub fn from_blocks(
        s0: usize,
        interior: Vec<DMatrix<f64>>,
        face1: Vec<DMatrix<f64>>,
        face2: Vec<DMatrix<f64>>,
        origin: Vec<DMatrix<f64>>,
    ) -> Result<Self, ModelError> {
        if s0 == 0 {
            return Err(ModelError::InvalidParams("s0 must be positive".into()));
        }
        let expect = |family: &str, blocks: &[DMatrix<f64>], count: usize| {
            if blocks.len() != count {
                return Err(ModelError::Shape {
                    path: family.to_string(),
                    reason: format!("expected {count} blocks, found {}", blocks.len()),
                });
            }
            for (idx, b) in blocks.iter().enumerate() {
                if b.nrows() != s0 || b.ncols() != s0 {
                    return Err(ModelError::Shape {
                        path: format!("{family}[{idx}]"),
                        reason: format!(
                            "expected {s0}x{s0}, found {}x{}",
                            b.nrows(),
                            b.ncols()
                        ),
                    });
                }
            }
            Ok(())
        };
        expect("A", &interior, 9)?;
        expect("A1", &face1, 6)?;
        expect("A2", &face2, 6)?;
        expect("A0", &origin, 4)?;
        Ok(QbdModel {
            s0,
            interior,
            face1,
            face2,
            origin,
        })
    }

    /// Number of phases.
    pub fn s0(&self) -> usize {
        self.s0
    }

    /// Interior block `A_{i,j}`, `i, j in {-1, 0, 1}`.
    pub fn a(&self, i: i32, j: i32) -> &DMatrix<f64> {
        &self.interior[((i + 1) * 3 + (j + 1)) as usize]
    }

    /// x1-face block `A1_{i,j}`, `i in {-1, 0, 1}`, `j in {0, 1}`.
    pub fn a1(&self, i: i32, j: usize) -> &DMatrix<f64> {
        &self.face1[(i + 1) as usize * 2 + j]
    }

    /// x2-face block `A2_{i,j}`, `i in {0, 1}`, `j in {-1, 0, 1}`.
    pub fn a2(&self, i: usize, j: i32) -> &DMatrix<f64> {
        &self.face2[i * 3 + (j + 1) as usize]
    }

    /// Origin block `A0_{i,j}`, `i, j in {0, 1}`.
    pub fn a0(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.origin[i * 2 + j]
    }

    /// `A_{*,*}`: sum of all interior blocks.
    pub fn a_sum(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.s0, self.s0);
        for b in &self.interior {
            m += b;
        }
        m
    }

    /// `A1_{*,*}`, `A2_{*,*}`, `A0_{*,*}`: family sums of the boundary blocks.
    pub fn a1_sum(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.s0, self.s0);
        for b in &self.face1 {
            m += b;
        }
        m
    }

    /// See [`QbdModel::a1_sum`].
    pub fn a2_sum(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.s0, self.s0);
        for b in &self.face2 {
            m += b;
        }
        m
    }

    /// See [`QbdModel::a1_sum`].
    pub fn a0_sum(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.s0, self.s0);
        for b in &self.origin {
            m += b;
        }
        m
    }

    /// `A_{*,j}(z) = sum_i A_{i,j} z^i` — interior blocks aggregated over the
    /// x1 displacement with weight `z`.
    pub fn a_col_z(&self, j: i32, z: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.s0, self.s0);
        for &i in &H {
            m += self.a(i, j) * z.powi(i);
        }
        m
    }

    /// `A_{i,*}(w) = sum_j A_{i,j} w^j`.
    pub fn a_row_z(&self, i: i32, w: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.s0, self.s0);
        for &j in &H {
            m += self.a(i, j) * w.powi(j);
        }
        m
    }

    /// `A_{*,j}` at `z = 1`.
    pub fn a_col(&self, j: i32) -> DMatrix<f64> {
        self.a_col_z(j, 1.0)
    }

    /// `A_{i,*}` at `w = 1`.
    pub fn a_row(&self, i: i32) -> DMatrix<f64> {
        self.a_row_z(i, 1.0)
    }

    /// `A1_{*,k}(z) = sum_{i in H} A1_{i,k} z^i` for `k in {0, 1}`.
    pub fn a1_col_z(&self, k: usize, z: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.s0, self.s0);
        for &i in &H {
            m += self.a1(i, k) * z.powi(i);
        }
        m
    }

    /// `A2_{k,*}(w) = sum_{j in H} A2_{k,j} w^j` for `k in {0, 1}`.
    pub fn a2_row_z(&self, k: usize, w: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.s0, self.s0);
        for &j in &H {
            m += self.a2(k, j) * w.powi(j);
        }
        m
    }

    /// `A1_{*,k}` at `z = 1`.
    pub fn a1_col(&self, k: usize) -> DMatrix<f64> {
        self.a1_col_z(k, 1.0)
    }

    /// `A2_{k,*}` at `w = 1`.
    pub fn a2_row(&self, k: usize) -> DMatrix<f64> {
        self.a2_row_z(k, 1.0)
    }

    /// Relabels phases by `perm`: new phase `r` is old phase `perm[r]`,
    /// applied consistently to every block of every family.
    pub fn permute_phases(&self, perm: &[usize]) -> Result<QbdModel, ModelError> {
        let s0 = self.s0;
        let mut seen = vec![false; s0];
        if perm.len() != s0 || perm.iter().any(|&p| p >= s0 || std::mem::replace(&mut seen[p], true)) {
            return Err(ModelError::InvalidParams(format!(
                "not a permutation of 0..{s0}"
            )));
        }
        let relabel = |b: &DMatrix<f64>| {
            DMatrix::from_fn(s0, s0, |r, c| b[(perm[r], perm[c])])
        };
        Ok(QbdModel {
            s0,
            interior: self.interior.iter().map(relabel).collect(),
            face1: self.face1.iter().map(relabel).collect(),
            face2: self.face2.iter().map(relabel).collect(),
            origin: self.origin.iter().map(relabel).collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// (1,K)-limited-service generator
// ---------------------------------------------------------------------------

/// Parameters of the single-server two-queue model with 1-limited service at
/// queue 1 and K-limited service at queue 2, uniformized with
/// `nu = lambda1 + lambda2 + mu1 + mu2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitedServiceParams {
    /// Service limit at queue 2 per server visit.
    pub k: usize,
    /// Poisson arrival rate at queue 1.
    pub lambda1: f64,
    /// Poisson arrival rate at queue 2.
    pub lambda2: f64,
    /// Exponential service rate at queue 1.
    pub mu1: f64,
    /// Exponential service rate at queue 2.
    pub mu2: f64,
}

impl LimitedServiceParams {
    /// Uniformization constant.
    pub fn nu(&self) -> f64 {
        self.lambda1 + self.lambda2 + self.mu1 + self.mu2
    }
}

/// Builds the (K+1)-phase 2d-QBD model of the (1,K)-limited service queue.
///
/// Phase 0 marks a class-1 customer in service; phase `j >= 1` marks the
/// `(K-j+1)`-th class-2 customer of the current visit.
pub fn build_limited_service(p: &LimitedServiceParams) -> Result<QbdModel, ModelError> {
    if p.k == 0 {
        return Err(ModelError::InvalidParams("K must be at least 1".into()));
    }
    for (name, v) in [
        ("lambda1", p.lambda1),
        ("lambda2", p.lambda2),
        ("mu1", p.mu1),
        ("mu2", p.mu2),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "rate {name} must be positive and finite, got {v}"
            )));
        }
    }
    let s0 = p.k + 1;
    let k = p.k;
    let nu = p.nu();
    let lambda = p.lambda1 + p.lambda2;
    let (l1, l2, m1, m2) = (p.lambda1 / nu, p.lambda2 / nu, p.mu1 / nu, p.mu2 / nu);
    let zero = || DMatrix::<f64>::zeros(s0, s0);
    let scaled_identity = |c: f64| DMatrix::<f64>::identity(s0, s0) * c;

    // interior family
    let mut a = vec![zero(); 9];
    let at = |i: i32, j: i32| ((i + 1) * 3 + (j + 1)) as usize;
    a[at(1, 0)] = scaled_identity(l1);
    a[at(0, 1)] = scaled_identity(l2);
    let mut a_m10 = zero();
    a_m10[(0, k)] = m1;
    a[at(-1, 0)] = a_m10;
    let mut a_0m1 = zero();
    for i in 1..=k {
        a_0m1[(i, i - 1)] = m2;
    }
    a[at(0, -1)] = a_0m1;
    let mut a_00 = zero();
    a_00[(0, 0)] = 1.0 - (lambda + p.mu1) / nu;
    for i in 1..=k {
        a_00[(i, i)] = 1.0 - (lambda + p.mu2) / nu;
    }
    a[at(0, 0)] = a_00;

    // x1-face family
    let mut a1 = vec![zero(); 6];
    let at1 = |i: i32, j: usize| (i + 1) as usize * 2 + j;
    a1[at1(1, 0)] = scaled_identity(l1);
    a1[at1(0, 0)] = scaled_identity(1.0 - (lambda + p.mu1) / nu);
    let mut a1_01 = zero();
    for i in 0..s0 {
        a1_01[(i, 0)] = l2;
    }
    a1[at1(0, 1)] = a1_01;
    a1[at1(-1, 0)] = DMatrix::from_element(s0, s0, m1 / s0 as f64);

    // x2-face family
    let mut a2 = vec![zero(); 6];
    let at2 = |i: usize, j: i32| i * 3 + (j + 1) as usize;
    a2[at2(0, 1)] = scaled_identity(l2);
    a2[at2(0, 0)] = scaled_identity(1.0 - (lambda + p.mu2) / nu);
    let mut a2_10 = zero();
    a2_10[(0, 1)] = l1;
    a2_10[(1, 1)] = l1;
    for i in 2..=k {
        a2_10[(i, i)] = l1;
    }
    a2[at2(1, 0)] = a2_10;
    let mut a2_0m1 = zero();
    if k == 1 {
        // A service completion of the last (= only) per-visit customer leads
        // straight into serving the next visit's last customer, whose phase
        // is drawn from {0, 1} at random.
        for i in 0..2 {
            a2_0m1[(i, 0)] = m2 / 2.0;
            a2_0m1[(i, 1)] = m2 / 2.0;
        }
    } else {
        a2_0m1[(0, k)] = m2;
        a2_0m1[(1, k)] = m2;
        a2_0m1[(2, 0)] = m2 / 2.0;
        a2_0m1[(2, 1)] = m2 / 2.0;
        for i in 3..=k {
            a2_0m1[(i, i - 1)] = m2;
        }
    }
    a2[at2(0, -1)] = a2_0m1;

    // origin family
    let mut a0 = vec![zero(); 4];
    let at0 = |i: usize, j: usize| i * 2 + j;
    a0[at0(1, 0)] = scaled_identity(l1);
    a0[at0(0, 0)] = scaled_identity(1.0 - lambda / nu);
    let mut a0_01 = zero();
    for i in 0..s0 {
        a0_01[(i, k)] = l2;
    }
    a0[at0(0, 1)] = a0_01;

    QbdModel::from_blocks(s0, a, a1, a2, a0)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A single violated model check.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A block entry is negative.
    NegativeEntry {
        family: BlockFamily,
        block: (i32, i32),
        row: usize,
        col: usize,
        value: f64,
    },
    /// A row of a family sum deviates from 1 beyond 1e-12.
    RowSum {
        family: BlockFamily,
        row: usize,
        sum: f64,
    },
    /// The directed graph of `A_{*,*}` is not strongly connected.
    Reducible,
    /// `A_{*,*}` is periodic.
    Periodic { period: usize },
    /// A boundary-removed chain failed the lattice-window reachability or
    /// periodicity heuristic.
    BoundaryWindow {
        chain: &'static str,
        problem: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeEntry {
                family,
                block,
                row,
                col,
                value,
            } => write!(
                f,
                "negative entry, family {family}, block ({}, {}), entry ({row}, {col}) = {value}",
                block.0, block.1
            ),
            Violation::RowSum { family, row, sum } => {
                write!(f, "row-sum violation, family {family}, row {row} (sum = {sum:.15})")
            }
            Violation::Reducible => write!(f, "A_{{*,*}} reducible"),
            Violation::Periodic { period } => {
                write!(f, "A_{{*,*}} periodic (period {period})")
            }
            Violation::BoundaryWindow { chain, problem } => write!(
                f,
                "boundary-removed chain {chain}: {problem} on 5x5 lattice window (heuristic)"
            ),
        }
    }
}

/// Result of [`validate`]: the list of violated checks, empty on success.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Violations in the order the checks ran.
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// True when no check failed.
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Human-readable messages, one per violation.
    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }
}

const ROW_SUM_TOL: f64 = 1e-12;

/// Audits a model: entry nonnegativity, the four family row-sum checks,
/// irreducibility and aperiodicity of `A_{*,*}`, and a reachability heuristic
/// for the boundary-removed chains on a 5x5 lattice window.
///
/// Violations are data, not errors; an ill-formed model yields a populated
/// report. The window checks are heuristic: a pass certifies cycles and
/// communication inside the window only.
pub fn validate(model: &QbdModel) -> ValidationReport {
    let mut violations = Vec::new();
    let s0 = model.s0();

    let scan_family =
        |family: BlockFamily, blocks: Vec<((i32, i32), &DMatrix<f64>)>, violations: &mut Vec<Violation>| {
            let mut sum = DMatrix::<f64>::zeros(s0, s0);
            for ((i, j), b) in &blocks {
                for r in 0..s0 {
                    for c in 0..s0 {
                        if b[(r, c)] < 0.0 {
                            violations.push(Violation::NegativeEntry {
                                family,
                                block: (*i, *j),
                                row: r,
                                col: c,
                                value: b[(r, c)],
                            });
                        }
                    }
                }
                sum += *b;
            }
            for r in 0..s0 {
                let row_sum: f64 = sum.row(r).iter().sum();
                if (row_sum - 1.0).abs() > ROW_SUM_TOL {
                    violations.push(Violation::RowSum {
                        family,
                        row: r,
                        sum: row_sum,
                    });
                }
            }
        };

    let mut blocks_a = Vec::new();
    for &i in &H {
        for &j in &H {
            blocks_a.push(((i, j), model.a(i, j)));
        }
    }
    scan_family(BlockFamily::A, blocks_a, &mut violations);
    let mut blocks_a1 = Vec::new();
    for &i in &H {
        for j in H_PLUS {
            blocks_a1.push(((i, j), model.a1(i, j as usize)));
        }
    }
    scan_family(BlockFamily::A1, blocks_a1, &mut violations);
    let mut blocks_a2 = Vec::new();
    for i in H_PLUS {
        for &j in &H {
            blocks_a2.push(((i, j), model.a2(i as usize, j)));
        }
    }
    scan_family(BlockFamily::A2, blocks_a2, &mut violations);
    let mut blocks_a0 = Vec::new();
    for i in H_PLUS {
        for j in H_PLUS {
            blocks_a0.push(((i, j), model.a0(i as usize, j as usize)));
        }
    }
    scan_family(BlockFamily::A0, blocks_a0, &mut violations);

    let adj = matrix::positive_adjacency(&model.a_sum());
    if !matrix::strongly_connected(&adj) {
        violations.push(Violation::Reducible);
    } else {
        let period = matrix::graph_period(&adj);
        if period > 1 {
            violations.push(Violation::Periodic { period });
        }
    }

    for (chain, kind) in [
        ("interior", WindowChain::Interior),
        ("x1-face", WindowChain::Face1),
        ("x2-face", WindowChain::Face2),
    ] {
        let adj = window_adjacency(model, kind);
        if !matrix::strongly_connected(&adj) {
            violations.push(Violation::BoundaryWindow {
                chain,
                problem: "not irreducible",
            });
        } else if matrix::graph_period(&adj) > 1 {
            violations.push(Violation::BoundaryWindow {
                chain,
                problem: "periodic",
            });
        }
    }

    ValidationReport { violations }
}

#[derive(Clone, Copy)]
enum WindowChain {
    Interior,
    Face1,
    Face2,
}

const WINDOW: usize = 5;

/// Adjacency of a boundary-removed chain restricted to a 5x5 lattice window
/// (edges leaving the window are dropped).
fn window_adjacency(model: &QbdModel, kind: WindowChain) -> Vec<Vec<usize>> {
    let s0 = model.s0();
    let n = WINDOW * WINDOW * s0;
    let idx = |x: usize, y: usize, j: usize| (x * WINDOW + y) * s0 + j;
    let mut adj = vec![Vec::new(); n];
    for x in 0..WINDOW {
        for y in 0..WINDOW {
            // In face chains the boundary coordinate starts at 0; the free
            // coordinate is centered in the window.
            let moves: Vec<((i32, i32), &DMatrix<f64>)> = match kind {
                WindowChain::Interior => H
                    .iter()
                    .flat_map(|&i| H.iter().map(move |&j| ((i, j), model.a(i, j))))
                    .collect(),
                WindowChain::Face1 => {
                    if y == 0 {
                        H.iter()
                            .flat_map(|&i| {
                                H_PLUS.iter().map(move |&j| ((i, j), model.a1(i, j as usize)))
                            })
                            .collect()
                    } else {
                        H.iter()
                            .flat_map(|&i| H.iter().map(move |&j| ((i, j), model.a(i, j))))
                            .collect()
                    }
                }
                WindowChain::Face2 => {
                    if x == 0 {
                        H_PLUS
                            .iter()
                            .flat_map(|&i| {
                                H.iter().map(move |&j| ((i, j), model.a2(i as usize, j)))
                            })
                            .collect()
                    } else {
                        H.iter()
                            .flat_map(|&i| H.iter().map(move |&j| ((i, j), model.a(i, j))))
                            .collect()
                    }
                }
            };
            for ((di, dj), block) in moves {
                let nx = x as i32 + di;
                let ny = y as i32 + dj;
                if nx < 0 || ny < 0 || nx >= WINDOW as i32 || ny >= WINDOW as i32 {
                    continue;
                }
                for r in 0..s0 {
                    for c in 0..s0 {
                        if block[(r, c)] > 0.0 {
                            adj[idx(x, y, r)].push(idx(nx as usize, ny as usize, c));
                        }
                    }
                }
            }
        }
    }
    adj
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelFile {
    s0: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "A1")]
    a1: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "A2")]
    a2: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "A0")]
    a0: Vec<Vec<Vec<Vec<f64>>>>,
}

/// JSON formatter that prints every float with 17 significant digits, so that
/// the decimal text preserves all bits of the f64 on reload.
struct FullPrecisionFormatter;

impl serde_json::ser::Formatter for FullPrecisionFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

/// Serializes a model to its JSON text form. Outer indices of `A`/`A1` run
/// over `i = -1, 0, 1` in that order, inner over ascending `j`.
pub fn save_model(model: &QbdModel) -> String {
    let file = ModelFile {
        s0: model.s0(),
        a: H
            .iter()
            .map(|&i| H.iter().map(|&j| matrix_to_rows(model.a(i, j))).collect())
            .collect(),
        a1: H
            .iter()
            .map(|&i| {
                H_PLUS
                    .iter()
                    .map(|&j| matrix_to_rows(model.a1(i, j as usize)))
                    .collect()
            })
            .collect(),
        a2: H_PLUS
            .iter()
            .map(|&i| {
                H.iter()
                    .map(|&j| matrix_to_rows(model.a2(i as usize, j)))
                    .collect()
            })
            .collect(),
        a0: H_PLUS
            .iter()
            .map(|&i| {
                H_PLUS
                    .iter()
                    .map(|&j| matrix_to_rows(model.a0(i as usize, j as usize)))
                    .collect()
            })
            .collect(),
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecisionFormatter);
    Serialize::serialize(&file, &mut ser).expect("in-memory serialization cannot fail");
    String::from_utf8(out).expect("JSON output is UTF-8")
}

fn rows_to_matrix(path: String, s0: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ModelError> {
    if rows.len() != s0 || rows.iter().any(|r| r.len() != s0) {
        let found_rows = rows.len();
        let found_cols = rows.first().map_or(0, |r| r.len());
        return Err(ModelError::Shape {
            path,
            reason: format!("expected {s0}x{s0} block, found {found_rows}x{found_cols}"),
        });
    }
    Ok(DMatrix::from_fn(s0, s0, |r, c| rows[r][c]))
}

/// Parses a model from its JSON text form, rejecting malformed shapes with an
/// error naming the offending field.
pub fn load_model(text: &str) -> Result<QbdModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        reason: e.to_string(),
    })?;
    let s0 = file.s0;
    if s0 == 0 {
        return Err(ModelError::Shape {
            path: "s0".into(),
            reason: "must be positive".into(),
        });
    }
    let family = |name: &str,
                  raw: &Vec<Vec<Vec<Vec<f64>>>>,
                  outer: usize,
                  inner: usize|
     -> Result<Vec<DMatrix<f64>>, ModelError> {
        if raw.len() != outer {
            return Err(ModelError::Shape {
                path: name.to_string(),
                reason: format!("expected {outer} i-indices, found {}", raw.len()),
            });
        }
        let mut out = Vec::with_capacity(outer * inner);
        for (i, row) in raw.iter().enumerate() {
            if row.len() != inner {
                return Err(ModelError::Shape {
                    path: name.to_string(),
                    reason: format!("expected {inner} j-indices at [{i}], found {}", row.len()),
                });
            }
            for (j, m) in row.iter().enumerate() {
                out.push(rows_to_matrix(format!("{name}[{i}][{j}]"), s0, m)?);
            }
        }
        Ok(out)
    };
    QbdModel::from_blocks(
        s0,
        family("A", &file.a, 3, 3)?,
        family("A1", &file.a1, 3, 2)?,
        family("A2", &file.a2, 2, 3)?,
        family("A0", &file.a0, 2, 2)?,
    )
}
