//! Finite paths, cylinders, the path metric, shift and prepend.
//!
//! Infinite paths are never materialized. A [`FinitePath`] with edges
//! `e_0 .. e_n` names the cylinder of all infinite paths with that prefix; a
//! path with no edges names the cylinder `[v]` of paths starting at `v`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{height_vector, Diagram, DiagramError, Edge};
use crate::sparse::Window;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("path has no edges")]
    EmptyPath,
    #[error("edge {0} does not start where the previous edge ends")]
    NotAdmissible(usize),
    #[error("edge {0} is not an edge of the diagram")]
    NoSuchEdge(usize),
    #[error("edge {0} sits at the wrong level")]
    WrongLevel(usize),
    #[error("path is too short for this operation")]
    TooShort,
    #[error("shift requires a stationary diagram")]
    NonStationary,
    #[error("path starts at {start} but the prepended edge ends at {range}")]
    DomainViolation { start: i64, range: i64 },
    #[error("paths have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("vertex {vertex} of level {level} has no incoming path from level 0")]
    Unreachable { level: usize, vertex: i64 },
    #[error("cannot parse path literal: {0}")]
    Parse(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

/// An admissible finite path, or the root cylinder `[start]` when empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FinitePath {
    start: i64,
    edges: Vec<Edge>,
}

impl FinitePath {
    pub fn root(v: i64) -> Self {
        FinitePath {
            start: v,
            edges: Vec::new(),
        }
    }

    pub(crate) fn from_parts_unchecked(start: i64, edges: Vec<Edge>) -> Self {
        FinitePath { start, edges }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// Range vertex: the target of the last edge, or the start of a root.
    pub fn end(&self) -> i64 {
        self.edges.last().map_or(self.start, |e| e.target)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[allow(clippy::len_without_is_empty)] // `is_root` plays that role
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_root(&self) -> bool {
        self.edges.is_empty()
    }

    /// Vertex itinerary `s(e_0), r(e_0), ..., r(e_n)`.
    pub fn vertices(&self) -> Vec<i64> {
        let mut out = vec![self.start];
        out.extend(self.edges.iter().map(|e| e.target));
        out
    }

    /// The first `k` edges.
    pub fn prefix(&self, k: usize) -> FinitePath {
        FinitePath {
            start: self.start,
            edges: self.edges[..k.min(self.edges.len())].to_vec(),
        }
    }

    /// Append an edge without checking the diagram.
    pub fn extended(&self, e: Edge) -> FinitePath {
        let mut edges = self.edges.clone();
        edges.push(e.at_level(self.edges.len()));
        FinitePath {
            start: self.start,
            edges,
        }
    }

    /// Parse the literal `v0-v1-...-vn:k0,...,k(n-1)` against a diagram.
    /// Negative vertices are written in parentheses, e.g. `(-1)-0-1`.
    pub fn parse(literal: &str, d: &Diagram) -> Result<FinitePath, PathError> {
        let lit: PathLiteral = literal.parse()?;
        lit.resolve(d)
    }
}

impl fmt::Display for FinitePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verts: Vec<String> = self
            .vertices()
            .iter()
            .map(|&v| if v < 0 { format!("({v})") } else { v.to_string() })
            .collect();
        write!(f, "{}", verts.join("-"))?;
        if self.edges.iter().any(|e| e.index != 0) {
            let ks: Vec<String> = self.edges.iter().map(|e| e.index.to_string()).collect();
            write!(f, ":{}", ks.join(","))?;
        }
        Ok(())
    }
}

/// A parsed but unresolved path literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathLiteral {
    pub vertices: Vec<i64>,
    pub indices: Vec<u32>,
}

impl FromStr for PathLiteral {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, PathError> {
        let bad = || PathError::Parse(s.to_string());
        let (itinerary, ks) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let mut vertices = Vec::new();
        let mut rest = itinerary.trim();
        while !rest.is_empty() {
            let (token, tail) = if let Some(inner) = rest.strip_prefix('(') {
                let close = inner.find(')').ok_or_else(bad)?;
                (&inner[..close], &inner[close + 1..])
            } else {
                match rest.find('-') {
                    Some(i) => (&rest[..i], &rest[i..]),
                    None => (rest, ""),
                }
            };
            vertices.push(token.trim().parse::<i64>().map_err(|_| bad())?);
            rest = match tail.strip_prefix('-') {
                Some(t) if !t.is_empty() => t,
                Some(_) => return Err(bad()),
                None if tail.is_empty() => "",
                None => return Err(bad()),
            };
        }
        if vertices.is_empty() {
            return Err(bad());
        }
        let n_edges = vertices.len() - 1;
        let indices = match ks {
            None => vec![0; n_edges],
            Some(ks) => {
                let parsed: Result<Vec<u32>, _> =
                    ks.split(',').map(|k| k.trim().parse::<u32>()).collect();
                let parsed = parsed.map_err(|_| bad())?;
                if parsed.len() != n_edges {
                    return Err(bad());
                }
                parsed
            }
        };
        Ok(PathLiteral { vertices, indices })
    }
}

impl PathLiteral {
    pub fn resolve(&self, d: &Diagram) -> Result<FinitePath, PathError> {
        if self.vertices.len() == 1 {
            let v = self.vertices[0];
            if !d.domain().contains(v) {
                return Err(PathError::Unreachable { level: 0, vertex: v });
            }
            return Ok(FinitePath::root(v));
        }
        let edges: Vec<Edge> = self
            .vertices
            .windows(2)
            .zip(&self.indices)
            .enumerate()
            .map(|(level, (w, &k))| Edge::new(level, w[0], w[1], k))
            .collect();
        validate_path(d, &edges)
    }
}

/// Check that `edges` is an admissible path of `d`.
pub fn validate_path(d: &Diagram, edges: &[Edge]) -> Result<FinitePath, PathError> {
    let first = edges.first().ok_or(PathError::EmptyPath)?;
    for (i, e) in edges.iter().enumerate() {
        if i > 0 && edges[i - 1].target != e.source {
            return Err(PathError::NotAdmissible(i));
        }
        if e.level != i {
            return Err(PathError::WrongLevel(i));
        }
        if !d.has_edge(e) {
            return Err(PathError::NoSuchEdge(i));
        }
    }
    Ok(FinitePath {
        start: first.source,
        edges: edges.to_vec(),
    })
}

/// Outcome of comparing two finite paths under `dist(x, y) = 2^-N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum Distance {
    Equal,
    /// First disagreement at edge `index`.
    Differ { index: usize },
    /// Paths of different length that agree on the shorter one.
    PrefixEqual { common: usize },
}

impl Distance {
    /// Numeric distance between the cylinders' common refinement; 0 for
    /// `Equal` and `PrefixEqual`.
    pub fn value(&self) -> f64 {
        match *self {
            Distance::Differ { index } => 0.5f64.powi(index as i32),
            _ => 0.0,
        }
    }
}

pub fn dist(x: &FinitePath, y: &FinitePath) -> Distance {
    if let Some(index) = x.edges.iter().zip(&y.edges).position(|(a, b)| a != b) {
        return Distance::Differ { index };
    }
    if x.len() == y.len() {
        if x.start == y.start {
            Distance::Equal
        } else {
            Distance::Differ { index: 0 }
        }
    } else if x.start != y.start {
        Distance::Differ { index: 0 }
    } else {
        Distance::PrefixEqual {
            common: x.len().min(y.len()),
        }
    }
}

/// `sigma`: drop `e_0` and re-level the rest down by one.
pub fn shift(d: &Diagram, x: &FinitePath) -> Result<FinitePath, PathError> {
    if x.len() < 2 {
        return Err(PathError::TooShort);
    }
    if !d.is_stationary() {
        return Err(PathError::NonStationary);
    }
    let edges: Vec<Edge> = x.edges[1..]
        .iter()
        .enumerate()
        .map(|(i, e)| e.at_level(i))
        .collect();
    Ok(FinitePath {
        start: x.edges[0].target,
        edges,
    })
}

/// `tau_e`: prepend `e` and re-level `x` up by one. Roots are allowed for `x`.
pub fn prepend(e: Edge, x: &FinitePath) -> Result<FinitePath, PathError> {
    if x.start != e.target {
        return Err(PathError::DomainViolation {
            start: x.start,
            range: e.target,
        });
    }
    let mut edges = Vec::with_capacity(x.len() + 1);
    edges.push(e.at_level(0));
    edges.extend(x.edges.iter().enumerate().map(|(i, f)| f.at_level(i + 1)));
    Ok(FinitePath {
        start: e.source,
        edges,
    })
}

/// Preimage `tau_e^{-1}(C)` of the cylinder `C` under the branch `tau_e`:
/// `Some(y)` when `C` meets the range of `tau_e`, with `C = tau_e(y)` or
/// `[e] ⊆ C` (then `y` is the root `[r(e)]`).
pub fn branch_preimage(e: &Edge, c: &FinitePath) -> Option<FinitePath> {
    match c.edges.first() {
        None => (c.start == e.source).then(|| FinitePath::root(e.target)),
        Some(first) if first.same_arrow(e) => Some(FinitePath {
            start: e.target,
            edges: c.edges[1..]
                .iter()
                .enumerate()
                .map(|(i, f)| f.at_level(i))
                .collect(),
        }),
        Some(_) => None,
    }
}

/// All one-edge refinements of the cylinder `x`.
pub fn one_edge_extensions(d: &Diagram, x: &FinitePath) -> Vec<FinitePath> {
    d.out_edges(x.len(), x.end())
        .into_iter()
        .map(|e| x.extended(e))
        .collect()
}

/// Whether `x_i = y_i` for every `i >= m` below the common length.
pub fn tail_equivalent_on_prefix(x: &FinitePath, y: &FinitePath, m: usize) -> Result<bool, PathError> {
    if x.len() != y.len() {
        return Err(PathError::LengthMismatch(x.len(), y.len()));
    }
    if m == 0 && x.start != y.start {
        return Ok(false);
    }
    Ok(x.edges.iter().zip(&y.edges).skip(m).all(|(a, b)| a == b))
}

/// The cell `X_v^(n)`: all paths from level 0 ending at `v` in level `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPartitionCell {
    pub level: usize,
    pub vertex: i64,
    pub members: Vec<FinitePath>,
}

/// Enumerate `X_v^(n)`. Member count equals `H^(n)_v`; callers on
/// exponentially growing diagrams should keep `n` small.
pub fn cell(d: &Diagram, n: usize, v: i64) -> Result<LevelPartitionCell, PathError> {
    if !d.domain().contains(v) {
        return Err(PathError::Unreachable { level: n, vertex: v });
    }
    let mut current: Vec<FinitePath> = vec![FinitePath::root(v)];
    // build backwards: reverse paths ending at v
    for level in (0..n).rev() {
        let mut next = Vec::new();
        for p in &current {
            for e in d.in_edges(level, p.start) {
                let mut edges = Vec::with_capacity(p.len() + 1);
                edges.push(e);
                edges.extend_from_slice(&p.edges);
                next.push(FinitePath {
                    start: e.source,
                    edges,
                });
            }
        }
        current = next;
    }
    if current.is_empty() {
        return Err(PathError::Unreachable { level: n, vertex: v });
    }
    current.sort();
    Ok(LevelPartitionCell {
        level: n,
        vertex: v,
        members: current,
    })
}

/// Cell sizes via the height vector, without enumeration.
pub fn cell_size(d: &Diagram, n: usize, v: i64) -> Result<u64, PathError> {
    let h = height_vector(d, n, Window::new(v, v))?;
    match h.get(v) {
        Some(0) | None => Err(PathError::Unreachable { level: n, vertex: v }),
        Some(x) => Ok(x),
    }
}

/// Every admissible path with `len` edges starting in `window`. Length 0
/// gives the root cylinders.
pub fn enumerate_paths(d: &Diagram, len: usize, window: Window) -> Vec<FinitePath> {
    let mut current: Vec<FinitePath> = window
        .iter()
        .filter(|&v| d.domain().contains(v))
        .map(FinitePath::root)
        .collect();
    for _ in 0..len {
        current = current
            .iter()
            .flat_map(|p| one_edge_extensions(d, p))
            .collect();
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_ones() -> Diagram {
        Diagram::from_dense(&[vec![1, 1], vec![1, 1]]).unwrap()
    }

    fn fib() -> Diagram {
        Diagram::from_dense(&[vec![1, 1], vec![1, 0]]).unwrap()
    }

    fn multi() -> Diagram {
        Diagram::from_dense(&[vec![2, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn validate_examples() {
        let d = all_ones();
        assert!(validate_path(&d, &[Edge::new(0, 0, 0, 0), Edge::new(1, 0, 1, 0)]).is_ok());
        assert_eq!(
            validate_path(&d, &[Edge::new(0, 0, 1, 0), Edge::new(1, 0, 1, 0)]),
            Err(PathError::NotAdmissible(1))
        );
        assert_eq!(validate_path(&d, &[]), Err(PathError::EmptyPath));
        assert_eq!(
            validate_path(&fib(), &[Edge::new(0, 1, 1, 0)]),
            Err(PathError::NoSuchEdge(0))
        );
    }

    #[test]
    fn distance_examples() {
        let d = all_ones();
        let x = FinitePath::parse("0-0-1-1-0", &d).unwrap();
        assert_eq!(dist(&x, &x), Distance::Equal);
        assert_eq!(dist(&x, &x).value(), 0.0);
        let y = FinitePath::parse("1-0-1-1-0", &d).unwrap();
        assert_eq!(dist(&x, &y).value(), 1.0);
        let z = FinitePath::parse("0-0-1-0-0", &d).unwrap();
        // edges 0..2 agree, edge 2 is 1->1 vs 1->0
        assert_eq!(dist(&x, &z), Distance::Differ { index: 2 });
        let w = FinitePath::parse("0-0-1-1-1", &d).unwrap();
        assert_eq!(dist(&x, &w).value(), 0.125);
        assert_eq!(dist(&x, &x.prefix(2)), Distance::PrefixEqual { common: 2 });
    }

    #[test]
    fn shift_and_prepend() {
        let d = all_ones();
        let x = FinitePath::parse("0-1-0", &d).unwrap();
        let sx = shift(&d, &x).unwrap();
        assert_eq!(sx.edges(), &[Edge::new(0, 1, 0, 0)]);
        assert_eq!(shift(&d, &x.prefix(1)), Err(PathError::TooShort));
        let e = Edge::new(0, 0, 1, 0);
        let y = FinitePath::parse("1-0", &d).unwrap();
        assert_eq!(prepend(e, &y).unwrap(), x);
        let z = FinitePath::parse("0-1", &d).unwrap();
        assert!(matches!(prepend(e, &z), Err(PathError::DomainViolation { .. })));
    }

    #[test]
    fn shift_rejects_sequences() {
        let a = crate::diagram::dense_incidence(&[vec![1, 1], vec![1, 1]]).unwrap();
        let b = crate::diagram::dense_incidence(&[vec![1, 1], vec![1, 0]]).unwrap();
        let d = Diagram::sequence(vec![a, b]).unwrap();
        let x = FinitePath::parse("0-0-0", &d).unwrap();
        assert_eq!(shift(&d, &x), Err(PathError::NonStationary));
    }

    #[test]
    fn extension_counts() {
        let d = all_ones();
        let x = FinitePath::parse("0-1", &d).unwrap();
        assert_eq!(one_edge_extensions(&d, &x).len(), 2);
        let f = fib();
        assert_eq!(one_edge_extensions(&f, &FinitePath::parse("0-1", &f).unwrap()).len(), 1);
        assert_eq!(one_edge_extensions(&f, &FinitePath::parse("1-0", &f).unwrap()).len(), 2);
    }

    #[test]
    fn tail_equivalence_examples() {
        let d = all_ones();
        let x = FinitePath::parse("0-1-1-0", &d).unwrap();
        let y = FinitePath::parse("1-1-1-0", &d).unwrap();
        let z = FinitePath::parse("0-1-1-1", &d).unwrap();
        assert!(tail_equivalent_on_prefix(&x, &x, 0).unwrap());
        assert!(tail_equivalent_on_prefix(&x, &y, 1).unwrap());
        assert!(!tail_equivalent_on_prefix(&x, &z, 1).unwrap());
        assert!(tail_equivalent_on_prefix(&x, &x.prefix(2), 0).is_err());
    }

    #[test]
    fn cell_examples() {
        let d = fib();
        assert_eq!(cell(&d, 1, 0).unwrap().members.len(), 2);
        assert_eq!(cell(&d, 1, 1).unwrap().members.len(), 1);
        for v in 0..2 {
            let c = cell(&d, 0, v).unwrap();
            assert_eq!(c.members, vec![FinitePath::root(v)]);
        }
        assert!(cell(&d, 1, 5).is_err());
    }

    #[test]
    fn cells_partition_and_match_heights() {
        for d in [fib(), all_ones(), multi()] {
            let w = d.default_window();
            for n in 0..=5 {
                let h = height_vector(&d, n, w).unwrap();
                let mut union = Vec::new();
                for v in w.iter() {
                    let c = cell(&d, n, v).unwrap();
                    assert_eq!(c.members.len() as u64, h.get(v).unwrap());
                    assert_eq!(cell_size(&d, n, v).unwrap(), h.get(v).unwrap());
                    assert!(c.members.iter().all(|p| p.end() == v && p.len() == n));
                    union.extend(c.members);
                }
                let mut all = enumerate_paths(&d, n, w);
                union.sort();
                all.sort();
                assert_eq!(union, all);
            }
        }
    }

    #[test]
    fn literal_round_trip() {
        let d = multi();
        let x = FinitePath::parse("0-0-1:1,0", &d).unwrap();
        assert_eq!(x.edges()[0].index, 1);
        assert_eq!(x.to_string(), "0-0-1:1,0");
        assert_eq!(FinitePath::parse(&x.to_string(), &d).unwrap(), x);
        assert!(FinitePath::parse("0-0-1:1", &d).is_err());
        assert!(FinitePath::parse("0--1", &d).is_err());
        assert_eq!(FinitePath::parse("1", &d).unwrap(), FinitePath::root(1));
    }

    #[test]
    fn literal_negative_vertices() {
        let lit: PathLiteral = "(-1)-0-(-2)".parse().unwrap();
        assert_eq!(lit.vertices, vec![-1, 0, -2]);
        let lit: PathLiteral = "(-3)".parse().unwrap();
        assert_eq!(lit.vertices, vec![-3]);
    }

    #[test]
    fn branch_preimage_inverts_prepend() {
        let d = multi();
        let e = Edge::new(0, 0, 0, 1);
        let y = FinitePath::parse("0-1-0", &d).unwrap();
        let c = prepend(e, &y).unwrap();
        assert_eq!(branch_preimage(&e, &c), Some(y));
        assert_eq!(branch_preimage(&e, &FinitePath::root(0)), Some(FinitePath::root(0)));
        assert_eq!(branch_preimage(&e, &FinitePath::root(1)), None);
        let other = FinitePath::parse("0-0:0", &d).unwrap();
        assert_eq!(branch_preimage(&e, &other), None);
    }

    fn arb_path(d: Diagram, len: usize) -> impl Strategy<Value = FinitePath> {
        let all = enumerate_paths(&d, len, d.default_window());
        (0..all.len()).prop_map(move |i| all[i].clone())
    }

    proptest! {
        #[test]
        fn ultrametric(
            x in arb_path(multi(), 4),
            y in arb_path(multi(), 4),
            z in arb_path(multi(), 4),
        ) {
            let dxz = dist(&x, &z).value();
            prop_assert!(dxz <= dist(&x, &y).value().max(dist(&y, &z).value()));
        }

        #[test]
        fn prepend_halves_distance(x in arb_path(multi(), 4), y in arb_path(multi(), 4)) {
            let d = multi();
            for e in d.in_edges(0, x.start()) {
                if y.start() != e.target { continue; }
                let px = prepend(e, &x).unwrap();
                let py = prepend(e, &y).unwrap();
                prop_assert!(validate_path(&d, px.edges()).is_ok());
                prop_assert_eq!(dist(&px, &py).value(), dist(&x, &y).value() / 2.0);
            }
        }

        #[test]
        fn shift_prepend_sections(x in arb_path(multi(), 4)) {
            let d = multi();
            for e in d.in_edges(0, x.start()) {
                prop_assert_eq!(shift(&d, &prepend(e, &x).unwrap()).unwrap(), x.clone());
            }
            let sx = shift(&d, &x).unwrap();
            prop_assert_eq!(prepend(x.edges()[0], &sx).unwrap(), x.clone());
        }
    }
}
