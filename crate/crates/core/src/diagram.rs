//! Generalized Bratteli diagrams given by a sequence of row-finite incidence
//! matrices.
//!
//! Entry `f[v][w]` of the level-`n` incidence matrix counts the edges from
//! `w` in level `n` to `v` in level `n + 1`, so rows are indexed by targets
//! and columns by sources. The transpose `A_n` drives the consistency
//! relation of tail-invariant measures.
//!
//! A sequence diagram with `K` stored matrices repeats its last matrix at
//! every level `>= K`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::FinitePath;
use crate::sparse::{SparseError, SparseMatrix, VertexDomain, Window};

pub type IncidenceMatrix = SparseMatrix<u64>;

/// Upper bound on the number of vertices a backward cone may touch.
const MAX_CONE: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagramError {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("a diagram needs at least one incidence matrix")]
    EmptySequence,
    #[error("matrix at level {level} is over {found}, expected {expected}")]
    DomainMismatch {
        level: usize,
        expected: VertexDomain,
        found: VertexDomain,
    },
    #[error("operation requires a stationary diagram")]
    NonStationary,
    #[error("{0} is only available on finite vertex domains")]
    InfiniteDomain(&'static str),
    #[error("height H({level})[{vertex}] overflows u64")]
    HeightOverflow { level: usize, vertex: i64 },
    #[error("backward cone touches more than {limit} vertices; use a smaller window or level")]
    ConeTooLarge { limit: usize },
}

/// One edge of the diagram. `index` distinguishes parallel edges and ranges
/// over `0..f[target][source]` at the edge's level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub level: usize,
    pub source: i64,
    pub target: i64,
    pub index: u32,
}

impl Edge {
    pub fn new(level: usize, source: i64, target: i64, index: u32) -> Self {
        Edge {
            level,
            source,
            target,
            index,
        }
    }

    pub fn at_level(self, level: usize) -> Edge {
        Edge { level, ..self }
    }

    /// Same source, target and multiplicity index; levels may differ.
    pub fn same_arrow(&self, other: &Edge) -> bool {
        self.source == other.source && self.target == other.target && self.index == other.index
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            write!(f, "{}->{}", self.source, self.target)
        } else {
            write!(f, "{}->{}#{}", self.source, self.target, self.index)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse edge {0:?}; expected `w->v` or `w->v#k`")]
pub struct ParseEdgeError(pub String);

/// Parses the `Display` form. The level is always 0.
impl std::str::FromStr for Edge {
    type Err = ParseEdgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseEdgeError(s.to_string());
        let t = s.trim();
        // Skip a leading minus so "-1->0" splits at the arrow, not the sign.
        let from = usize::from(t.starts_with('-'));
        let arrow = t[from..].find("->").ok_or_else(bad)? + from;
        let source = t[..arrow].trim().parse().map_err(|_| bad())?;
        let rest = &t[arrow + 2..];
        let (target, index) = match rest.split_once('#') {
            Some((v, k)) => (v, k.trim().parse().map_err(|_| bad())?),
            None => (rest, 0),
        };
        let target = target.trim().parse().map_err(|_| bad())?;
        Ok(Edge::new(0, source, target, index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagramKind {
    Stationary,
    Sequence,
}

/// A generalized Bratteli diagram. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagram {
    kind: DiagramKind,
    domain: VertexDomain,
    matrices: Vec<IncidenceMatrix>,
    zero_one: bool,
}

impl Diagram {
    pub fn stationary(matrix: IncidenceMatrix) -> Self {
        let zero_one = is_zero_one(&matrix);
        Diagram {
            kind: DiagramKind::Stationary,
            domain: matrix.domain(),
            matrices: vec![matrix],
            zero_one,
        }
    }

    pub fn sequence(matrices: Vec<IncidenceMatrix>) -> Result<Self, DiagramError> {
        let first = matrices.first().ok_or(DiagramError::EmptySequence)?;
        let domain = first.domain();
        for (level, m) in matrices.iter().enumerate() {
            if m.domain() != domain {
                return Err(DiagramError::DomainMismatch {
                    level,
                    expected: domain,
                    found: m.domain(),
                });
            }
        }
        let zero_one = matrices.iter().all(is_zero_one);
        Ok(Diagram {
            kind: DiagramKind::Sequence,
            domain,
            matrices,
            zero_one,
        })
    }

    /// Stationary diagram from a dense square matrix over a finite domain.
    pub fn from_dense(rows: &[Vec<u64>]) -> Result<Self, DiagramError> {
        Ok(Diagram::stationary(dense_incidence(rows)?))
    }

    pub fn kind(&self) -> DiagramKind {
        self.kind
    }

    pub fn domain(&self) -> VertexDomain {
        self.domain
    }

    /// Stationary in the strong sense: one matrix for every level. A sequence
    /// diagram whose stored matrices coincide also counts.
    pub fn is_stationary(&self) -> bool {
        self.matrices.windows(2).all(|w| w[0] == w[1])
    }

    pub fn is_zero_one(&self) -> bool {
        self.zero_one
    }

    pub fn matrices(&self) -> &[IncidenceMatrix] {
        &self.matrices
    }

    /// Incidence matrix between level `level` and `level + 1`.
    pub fn matrix(&self, level: usize) -> &IncidenceMatrix {
        &self.matrices[level.min(self.matrices.len() - 1)]
    }

    pub fn edge_count(&self, level: usize, source: i64, target: i64) -> u64 {
        self.matrix(level).get(target, source).unwrap_or(0)
    }

    pub fn has_edge(&self, e: &Edge) -> bool {
        (e.index as u64) < self.edge_count(e.level, e.source, e.target)
    }

    /// Edges leaving `source` at `level`, ordered by target then index.
    pub fn out_edges(&self, level: usize, source: i64) -> Vec<Edge> {
        let mut out = Vec::new();
        for (target, count) in self.matrix(level).col(source) {
            for k in 0..count {
                out.push(Edge::new(level, source, target, k as u32));
            }
        }
        out
    }

    /// Edges entering `target` from `level`, ordered by source then index.
    pub fn in_edges(&self, level: usize, target: i64) -> Vec<Edge> {
        let mut out = Vec::new();
        for (source, count) in self.matrix(level).row(target) {
            for k in 0..count {
                out.push(Edge::new(level, source, target, k as u32));
            }
        }
        out
    }

    /// Default evaluation window: the whole vertex set when finite, radius 8
    /// otherwise.
    pub fn default_window(&self) -> Window {
        self.domain.window(8)
    }

    fn max_bandwidth(&self) -> u64 {
        self.matrices.iter().map(|m| m.bandwidth()).max().unwrap_or(0)
    }
}

fn is_zero_one(m: &IncidenceMatrix) -> bool {
    m.stored_entries().iter().all(|&(_, _, x)| x <= 1)
}

/// Dense square rows (row = target, column = source) to an incidence matrix.
pub fn dense_incidence(rows: &[Vec<u64>]) -> Result<IncidenceMatrix, DiagramError> {
    let n = rows.len();
    let domain = VertexDomain::Finite { count: n };
    let mut entries = Vec::new();
    for (v, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(SparseError::OutOfDomain(row.len() as i64 - 1, domain).into());
        }
        for (w, &x) in row.iter().enumerate() {
            entries.push((v as i64, w as i64, x));
        }
    }
    Ok(SparseMatrix::explicit(domain, entries)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    /// A target vertex receives no edge.
    EmptyRow,
    /// A source vertex emits no edge.
    EmptyColumn,
    /// Column with a single nonzero entry; the path space may have isolated points.
    IsolatedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub level: usize,
    pub vertex: i64,
    pub code: FindingCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub domain: VertexDomain,
    pub window: Window,
    pub zero_one: bool,
    pub stationary: bool,
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Structural checks on every stored matrix: each row and each column needs a
/// nonzero entry; columns with a single nonzero entry are reported as
/// warnings. Translation patterns are checked on a window wide enough to see
/// both the boundary at 0 and the periodic interior.
pub fn validate_diagram(d: &Diagram) -> ValidationReport {
    let window = d.domain.window(2 * d.max_bandwidth() + 2);
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for (level, m) in d.matrices.iter().enumerate() {
        for v in window.iter() {
            if m.row(v).is_empty() {
                errors.push(Finding {
                    level,
                    vertex: v,
                    code: FindingCode::EmptyRow,
                    message: format!(
                        "vertex {v} of level {} has no incoming edge (row {v} of matrix {level} is zero)",
                        level + 1
                    ),
                });
            }
            let col = m.col(v);
            if col.is_empty() {
                errors.push(Finding {
                    level,
                    vertex: v,
                    code: FindingCode::EmptyColumn,
                    message: format!(
                        "vertex {v} of level {level} has no outgoing edge (column {v} of matrix {level} is zero)"
                    ),
                });
            } else if col.len() == 1 {
                warnings.push(Finding {
                    level,
                    vertex: v,
                    code: FindingCode::IsolatedPoint,
                    message: format!(
                        "column {v} of matrix {level} has a single nonzero entry; the path space may have isolated points"
                    ),
                });
            }
        }
    }
    ValidationReport {
        domain: d.domain,
        window,
        zero_one: d.zero_one,
        stationary: d.is_stationary(),
        errors,
        warnings,
    }
}

/// Number of finite paths from level 0 to each vertex of level `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightVector {
    pub level: usize,
    pub values: BTreeMap<i64, u64>,
}

impl HeightVector {
    pub fn get(&self, v: i64) -> Option<u64> {
        self.values.get(&v).copied()
    }
}

/// `H(n) = F_{n-1} ... F_0 1` on `window`, computed exactly. Rows are finite,
/// so the backward cone of the window is finite and is expanded internally.
pub fn height_vector(d: &Diagram, n: usize, window: Window) -> Result<HeightVector, DiagramError> {
    let mut cones: Vec<BTreeSet<i64>> = vec![BTreeSet::new(); n + 1];
    cones[n] = window.iter().filter(|&v| d.domain.contains(v)).collect();
    let mut touched = cones[n].len();
    for k in (0..n).rev() {
        let next: BTreeSet<i64> = cones[k + 1]
            .iter()
            .flat_map(|&v| d.matrix(k).row(v).into_iter().map(|(w, _)| w))
            .collect();
        touched += next.len();
        if touched > MAX_CONE {
            return Err(DiagramError::ConeTooLarge { limit: MAX_CONE });
        }
        cones[k] = next;
    }
    let mut current: BTreeMap<i64, u64> = cones[0].iter().map(|&v| (v, 1)).collect();
    for (k, cone) in cones.iter().enumerate().skip(1) {
        let mut next = BTreeMap::new();
        for &v in cone {
            let mut h: u64 = 0;
            for (w, c) in d.matrix(k - 1).row(v) {
                let term = c
                    .checked_mul(current[&w])
                    .ok_or(DiagramError::HeightOverflow { level: k, vertex: v })?;
                h = h
                    .checked_add(term)
                    .ok_or(DiagramError::HeightOverflow { level: k, vertex: v })?;
            }
            next.insert(v, h);
        }
        current = next;
    }
    Ok(HeightVector {
        level: n,
        values: current,
    })
}

/// The 0-1 diagram whose vertices are the edges of a stationary diagram.
/// Vertex `i` is `edges[i]`; vertex `e` connects to vertex `f` exactly when
/// `s(f) = r(e)`.
#[derive(Debug, Clone)]
pub struct EdgeGraph {
    pub diagram: Diagram,
    pub edges: Vec<Edge>,
    index: HashMap<(i64, i64, u32), usize>,
}

impl EdgeGraph {
    pub fn index_of(&self, e: &Edge) -> Option<usize> {
        self.index.get(&(e.source, e.target, e.index)).copied()
    }

    /// Row `i` of the matrix `a[e][f] = 1 <=> s(f) = r(e)`, as edge indices.
    pub fn successor_row(&self, i: usize) -> Vec<usize> {
        self.diagram
            .matrix(0)
            .col(i as i64)
            .into_iter()
            .map(|(j, _)| j as usize)
            .collect()
    }

    /// Map a path of the original diagram with `m >= 1` edges to the path of
    /// `m - 1` edges through the corresponding edge-vertices.
    pub fn lift(&self, path: &FinitePath) -> Option<FinitePath> {
        let edges = path.edges();
        let first = self.index_of(edges.first()?)? as i64;
        let mut lifted = Vec::with_capacity(edges.len() - 1);
        let mut prev = first;
        for (i, e) in edges.iter().enumerate().skip(1) {
            let cur = self.index_of(e)? as i64;
            lifted.push(Edge::new(i - 1, prev, cur, 0));
            prev = cur;
        }
        Some(FinitePath::from_parts_unchecked(first, lifted))
    }

    /// Inverse of [`EdgeGraph::lift`].
    pub fn lower(&self, path: &FinitePath) -> Option<FinitePath> {
        let mut vertices = vec![path.start()];
        vertices.extend(path.edges().iter().map(|e| e.target));
        let mut edges = Vec::with_capacity(vertices.len());
        for (level, &v) in vertices.iter().enumerate() {
            let e = *self.edges.get(usize::try_from(v).ok()?)?;
            edges.push(e.at_level(level));
        }
        let start = edges[0].source;
        Some(FinitePath::from_parts_unchecked(start, edges))
    }
}

pub fn edge_graph_01(d: &Diagram) -> Result<EdgeGraph, DiagramError> {
    if !d.is_stationary() {
        return Err(DiagramError::NonStationary);
    }
    let VertexDomain::Finite { count } = d.domain else {
        return Err(DiagramError::InfiniteDomain("edge_graph_01"));
    };
    let edges: Vec<Edge> = (0..count as i64).flat_map(|w| d.out_edges(0, w)).collect();
    let index: HashMap<(i64, i64, u32), usize> = edges
        .iter()
        .enumerate()
        .map(|(i, e)| ((e.source, e.target, e.index), i))
        .collect();
    let mut by_source: HashMap<i64, Vec<usize>> = HashMap::new();
    for (j, f) in edges.iter().enumerate() {
        by_source.entry(f.source).or_default().push(j);
    }
    let mut entries = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        for &j in by_source.get(&e.target).map(Vec::as_slice).unwrap_or(&[]) {
            entries.push((j as i64, i as i64, 1u64));
        }
    }
    let domain = VertexDomain::Finite { count: edges.len() };
    let matrix = SparseMatrix::explicit(domain, entries)?;
    Ok(EdgeGraph {
        diagram: Diagram::stationary(matrix),
        edges,
        index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Irreducibility {
    Yes,
    NoWithinHorizon,
    Unknown,
}

/// Irreducibility on a finite window: every ordered pair of window vertices
/// must be joined by a path of length `1..=max_m` starting at each stored
/// level. Paths are confined to the window; when a pair is missed and some
/// search left the window of an infinite domain the verdict is `Unknown`.
pub fn is_irreducible(d: &Diagram, window: Window, max_m: usize) -> Irreducibility {
    let window = Window::new(
        window.lo.max(d.domain.window(0).lo),
        match d.domain {
            VertexDomain::Finite { count } => window.hi.min(count as i64 - 1),
            _ => window.hi,
        },
    );
    let n = window.len();
    let mut leaked = false;
    let mut all_reached = true;
    for start_level in 0..d.matrices.len() {
        for w in window.iter() {
            let mut reached = vec![false; n];
            let mut frontier: BTreeSet<i64> = BTreeSet::from([w]);
            for step in 0..max_m {
                let m = d.matrix(start_level + step);
                let mut next = BTreeSet::new();
                for &u in &frontier {
                    for (v, _) in m.col(u) {
                        if window.contains(v) {
                            next.insert(v);
                        } else {
                            leaked = true;
                        }
                    }
                }
                for &v in &next {
                    reached[window.index_of(v).unwrap()] = true;
                }
                if next.is_empty() || reached.iter().all(|&r| r) {
                    break;
                }
                frontier = next;
            }
            if !reached.iter().all(|&r| r) {
                all_reached = false;
            }
        }
    }
    if all_reached {
        Irreducibility::Yes
    } else if leaked && !d.domain.is_finite() {
        Irreducibility::Unknown
    } else {
        Irreducibility::NoWithinHorizon
    }
}
