//! The semibranching function system of a stationary 0-1 diagram.
//!
//! The branches are indexed by the edges `e`: `tau_e` prepends `e` to a path
//! starting at `r(e)`, so `D_e = {x : s(x) = r(e)}` and `R_e = [e]`. The
//! coding map is the shift. Domains depend on `r(e)` only, and each `D_e` is
//! the union of the ranges `R_f` for `f` in `Lambda_e = {f : s(f) = r(e)}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{edge_graph_01, Diagram, DiagramError, Edge, EdgeGraph};
use crate::measures::{level_ratio_products, MarkovMeasure, MeasureError, PathMeasure, RatioProducts};
use crate::path::{enumerate_paths, prepend, FinitePath, PathError};

pub const DEFAULT_QSTAT_TERMS: usize = 64;
pub const DEFAULT_QSTAT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfsError {
    #[error("diagram has an edge multiplicity above one")]
    NotZeroOne,
    #[error("diagram is not stationary")]
    NonStationary,
    #[error("edge {edge} is not an edge of the diagram")]
    UnknownEdge { edge: String },
    #[error("path starts at {start} but the branch domain needs start {range}")]
    DomainViolation { start: i64, range: i64 },
    #[error("path has {len} edges, depth {depth} requested")]
    PathTooShort { len: usize, depth: usize },
    #[error("depth must be at least one")]
    ZeroDepth,
    #[error("cylinder of length {n} has zero measure")]
    ZeroMeasureCylinder { n: usize },
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Sanity checks run while building the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfsChecks {
    /// Every cylinder of length 1 and 2 lies in exactly one range `R_e`.
    pub partition: bool,
    /// `x in D_e <=> x in the union of R_f, f in Lambda_e` for paths of 1 to 3 edges.
    pub ck_identity: bool,
    pub paths_checked: usize,
}

#[derive(Debug, Clone)]
pub struct SemibranchingSystem {
    diagram: Diagram,
    graph: EdgeGraph,
    ck_sets: Vec<Vec<usize>>,
    checks: SfsChecks,
}

/// Build the system of a stationary 0-1 diagram on a finite vertex set.
pub fn build_sfs(diagram: &Diagram) -> Result<SemibranchingSystem, SfsError> {
    if !diagram.is_zero_one() {
        return Err(SfsError::NotZeroOne);
    }
    if !diagram.is_stationary() {
        return Err(SfsError::NonStationary);
    }
    let graph = edge_graph_01(diagram)?;
    let ck_sets = (0..graph.edges.len()).map(|i| graph.successor_row(i)).collect();
    let mut sfs = SemibranchingSystem {
        diagram: diagram.clone(),
        graph,
        ck_sets,
        checks: SfsChecks {
            partition: false,
            ck_identity: false,
            paths_checked: 0,
        },
    };
    sfs.checks = sfs.verify();
    Ok(sfs)
}

impl SemibranchingSystem {
    pub fn diagram(&self) -> &Diagram {
        &self.diagram
    }

    /// The index set, in the order used by [`edge_graph_01`].
    pub fn edges(&self) -> &[Edge] {
        &self.graph.edges
    }

    pub fn index_of(&self, e: &Edge) -> Option<usize> {
        self.graph.index_of(e)
    }

    /// `Lambda_e` as indices into [`SemibranchingSystem::edges`].
    pub fn ck_set(&self, i: usize) -> &[usize] {
        &self.ck_sets[i]
    }

    pub fn ck_set_of(&self, e: &Edge) -> Option<Vec<Edge>> {
        let i = self.index_of(e)?;
        Some(self.ck_sets[i].iter().map(|&j| self.graph.edges[j]).collect())
    }

    pub fn checks(&self) -> SfsChecks {
        self.checks
    }

    /// `x in D_e`.
    pub fn in_domain(&self, e: &Edge, x: &FinitePath) -> bool {
        x.start() == e.target
    }

    /// `x in R_e`, for paths with at least one edge.
    pub fn in_range(&self, e: &Edge, x: &FinitePath) -> bool {
        x.edges().first().is_some_and(|f| f.same_arrow(e))
    }

    /// `tau_e(x)`.
    pub fn branch(&self, e: &Edge, x: &FinitePath) -> Result<FinitePath, SfsError> {
        self.index_of(e).ok_or(SfsError::UnknownEdge { edge: e.to_string() })?;
        Ok(prepend(*e, x)?)
    }

    fn verify(&self) -> SfsChecks {
        let window = self.diagram.default_window();
        let mut partition = true;
        let mut ck_identity = true;
        let mut paths_checked = 0;
        for len in 1..=3 {
            for x in enumerate_paths(&self.diagram, len, window) {
                paths_checked += 1;
                if len <= 2 {
                    let hits = self.edges().iter().filter(|e| self.in_range(e, &x)).count();
                    partition &= hits == 1;
                }
                for (i, e) in self.edges().iter().enumerate() {
                    let union = self.ck_sets[i].iter().any(|&j| self.in_range(&self.graph.edges[j], &x));
                    ck_identity &= union == self.in_domain(e, &x);
                }
            }
        }
        SfsChecks {
            partition,
            ck_identity,
            paths_checked,
        }
    }
}

/// The 0-1 matrix `a[e][f] = 1 <=> s(f) = r(e)` over the edge set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CkMatrix {
    /// Edge labels in index order.
    pub edges: Vec<String>,
    /// Column indices of the nonzero entries of each row.
    pub rows: Vec<Vec<usize>>,
}

pub fn ck_matrix(sfs: &SemibranchingSystem) -> CkMatrix {
    CkMatrix {
        edges: sfs.edges().iter().map(|e| e.to_string()).collect(),
        rows: sfs.ck_sets.clone(),
    }
}

impl CkMatrix {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].contains(&j)
    }

    pub fn dense(&self) -> Vec<Vec<u8>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.dim()];
        for &j in self.rows.iter().flatten() {
            sums[j] += 1;
        }
        sums
    }

    /// Whether `self` is the transpose of the incidence matrix of `graph`,
    /// that is, whether both describe the same successor relation.
    pub fn matches_edge_graph(&self, graph: &EdgeGraph) -> bool {
        let f = graph.diagram.matrix(0);
        let n = self.dim();
        graph.edges.len() == n
            && (0..n).all(|i| (0..n).all(|j| self.get(i, j) == f.get(j as i64, i as i64).is_some()))
    }
}

/// Finite-depth de Possel estimates of `d(m o tau_e)/dm` at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnEstimate {
    pub edge: String,
    pub path: String,
    pub depth: usize,
    pub tol: f64,
    /// `m(tau_e [x|n]) / m([x|n])` for `n = 1..=depth`.
    pub sequence: Vec<f64>,
    /// Last term of the sequence.
    pub limit: f64,
    /// `max - min` over the whole sequence.
    pub spread: f64,
    /// The last half of the sequence lies within `tol` of the last term.
    pub converged: bool,
    /// The derivative in closed form, when the measure has one.
    pub closed_form: Option<f64>,
}

pub fn rn_derivative(
    m: &dyn PathMeasure,
    e: &Edge,
    x: &FinitePath,
    depth: usize,
    tol: f64,
) -> Result<RnEstimate, SfsError> {
    if !m.diagram().has_edge(&e.at_level(0)) {
        return Err(SfsError::UnknownEdge { edge: e.to_string() });
    }
    if x.start() != e.target {
        return Err(SfsError::DomainViolation {
            start: x.start(),
            range: e.target,
        });
    }
    if depth == 0 {
        return Err(SfsError::ZeroDepth);
    }
    if x.len() < depth {
        return Err(SfsError::PathTooShort { len: x.len(), depth });
    }
    let mut sequence = Vec::with_capacity(depth);
    for n in 1..=depth {
        let c = x.prefix(n);
        if m.value(&c)? == 0.0 {
            return Err(SfsError::ZeroMeasureCylinder { n });
        }
        sequence.push(m.ratio(&prepend(e.at_level(0), &c)?, &c)?);
    }
    let limit = sequence[depth - 1];
    let lo = sequence.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sequence.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let converged = sequence[depth / 2..].iter().all(|&s| (s - limit).abs() <= tol);
    Ok(RnEstimate {
        edge: e.to_string(),
        path: x.to_string(),
        depth,
        tol,
        sequence,
        limit,
        spread: hi - lo,
        converged,
        closed_form: m.branch_derivative(e),
    })
}

/// Level-ratio products of `m` along `x` with the bounded-and-Cauchy verdict.
pub fn quasi_stationary_test(
    m: &MarkovMeasure,
    x: &FinitePath,
    n_terms: usize,
    tol: f64,
) -> Result<RatioProducts, SfsError> {
    Ok(level_ratio_products(m, x, n_terms, tol)?)
}

/// `|sigma^{-1}(x)|`, the number of edges ending at `s(x)`.
pub fn preimage_count(d: &Diagram, x: &FinitePath) -> Result<u64, SfsError> {
    if !d.is_stationary() {
        return Err(SfsError::NonStationary);
    }
    Ok(d.matrix(0).row(x.start()).iter().map(|&(_, c)| c).sum())
}
