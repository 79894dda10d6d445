//! Vertex domains, finite evaluation windows and the sparse matrix type shared
//! by incidence matrices, edge weights and solver operators.
//!
//! A matrix over a finite domain stores its nonzero entries explicitly. Over
//! the naturals or the integers it is a translation-invariant band: an entry
//! `(row, col)` is determined by the offset `row - col`. On the naturals the
//! band is simply cut off at vertex 0.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index set shared by every level of a diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum VertexDomain {
    Finite { count: usize },
    Naturals,
    Integers { band: u64 },
}

impl VertexDomain {
    pub fn contains(&self, v: i64) -> bool {
        match *self {
            VertexDomain::Finite { count } => v >= 0 && (v as u64) < count as u64,
            VertexDomain::Naturals => v >= 0,
            VertexDomain::Integers { .. } => true,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, VertexDomain::Finite { .. })
    }

    /// The window of the given radius. Finite domains always return the full
    /// vertex set and ignore the radius.
    pub fn window(&self, radius: u64) -> Window {
        let r = radius.min(i64::MAX as u64 / 4) as i64;
        match *self {
            VertexDomain::Finite { count } => Window::new(0, count as i64 - 1),
            VertexDomain::Naturals => Window::new(0, r),
            VertexDomain::Integers { .. } => Window::new(-r, r),
        }
    }

    /// Radius of `window` measured the same way [`VertexDomain::window`] builds it.
    pub fn radius_of(&self, window: Window) -> u64 {
        match *self {
            VertexDomain::Finite { .. } => 0,
            VertexDomain::Naturals => window.hi.max(0) as u64,
            VertexDomain::Integers { .. } => window.hi.max(-window.lo).max(0) as u64,
        }
    }
}

impl fmt::Display for VertexDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexDomain::Finite { count } => write!(f, "finite({count})"),
            VertexDomain::Naturals => write!(f, "naturals"),
            VertexDomain::Integers { band } => write!(f, "integers(band {band})"),
        }
    }
}

/// A contiguous, inclusive range of vertex indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Self {
        Window { lo, hi }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn len(&self) -> usize {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    pub fn index_of(&self, v: i64) -> Option<usize> {
        self.contains(v).then(|| (v - self.lo) as usize)
    }

    pub fn vertex_at(&self, i: usize) -> i64 {
        self.lo + i as i64
    }

    /// Shrink by `margin` on both sides.
    pub fn shrink(&self, margin: i64) -> Window {
        Window::new(self.lo + margin, self.hi - margin)
    }

    /// Clamp a vertex to the nearest window vertex.
    pub fn clamp(&self, v: i64) -> i64 {
        v.clamp(self.lo, self.hi)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparseError {
    #[error("vertex {0} is outside the {1} domain")]
    OutOfDomain(i64, VertexDomain),
    #[error("duplicate entry at ({0}, {1})")]
    DuplicateEntry(i64, i64),
    #[error("offset {offset} exceeds the declared band {band}")]
    BandExceeded { offset: i64, band: u64 },
    #[error("explicit entries require a finite domain; use a translation pattern for {0}")]
    ExplicitOnInfinite(VertexDomain),
    #[error("translation patterns require an infinite domain")]
    PatternOnFinite,
}

/// Entry types usable in a [`SparseMatrix`].
pub trait Entry: Copy + PartialEq + fmt::Debug {
    fn is_zero(&self) -> bool;
}

impl Entry for u64 {
    fn is_zero(&self) -> bool {
        *self == 0
    }
}

impl Entry for f64 {
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage<T> {
    Explicit {
        by_row: BTreeMap<(i64, i64), T>,
        by_col: BTreeMap<(i64, i64), T>,
    },
    /// offset `row - col` -> value
    Translation(BTreeMap<i64, T>),
}

/// Row-finite sparse matrix indexed by `(row, col)` over a [`VertexDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    domain: VertexDomain,
    storage: Storage<T>,
}

impl<T: Entry> SparseMatrix<T> {
    /// Explicit entries `(row, col, value)` over a finite domain. Zero values
    /// are dropped.
    pub fn explicit(
        domain: VertexDomain,
        entries: impl IntoIterator<Item = (i64, i64, T)>,
    ) -> Result<Self, SparseError> {
        if !domain.is_finite() {
            return Err(SparseError::ExplicitOnInfinite(domain));
        }
        let mut by_row = BTreeMap::new();
        let mut by_col = BTreeMap::new();
        for (r, c, x) in entries {
            for v in [r, c] {
                if !domain.contains(v) {
                    return Err(SparseError::OutOfDomain(v, domain));
                }
            }
            if by_row.contains_key(&(r, c)) {
                return Err(SparseError::DuplicateEntry(r, c));
            }
            if x.is_zero() {
                continue;
            }
            by_row.insert((r, c), x);
            by_col.insert((c, r), x);
        }
        Ok(SparseMatrix {
            domain,
            storage: Storage::Explicit { by_row, by_col },
        })
    }

    /// Translation-invariant band over an infinite domain: `offsets` maps
    /// `row - col` to the entry value.
    pub fn translation(
        domain: VertexDomain,
        offsets: impl IntoIterator<Item = (i64, T)>,
    ) -> Result<Self, SparseError> {
        if domain.is_finite() {
            return Err(SparseError::PatternOnFinite);
        }
        let mut map = BTreeMap::new();
        for (d, x) in offsets {
            if let VertexDomain::Integers { band } = domain {
                if d.unsigned_abs() > band {
                    return Err(SparseError::BandExceeded { offset: d, band });
                }
            }
            if map.contains_key(&d) {
                return Err(SparseError::DuplicateEntry(d, 0));
            }
            if !x.is_zero() {
                map.insert(d, x);
            }
        }
        Ok(SparseMatrix {
            domain,
            storage: Storage::Translation(map),
        })
    }

    pub fn domain(&self) -> VertexDomain {
        self.domain
    }

    pub fn is_pattern(&self) -> bool {
        matches!(self.storage, Storage::Translation(_))
    }

    /// Largest `|row - col|` over the nonzero entries.
    pub fn bandwidth(&self) -> u64 {
        match &self.storage {
            Storage::Explicit { by_row, .. } => by_row
                .keys()
                .map(|(r, c)| (r - c).unsigned_abs())
                .max()
                .unwrap_or(0),
            Storage::Translation(map) => map.keys().map(|d| d.unsigned_abs()).max().unwrap_or(0),
        }
    }

    pub fn get(&self, row: i64, col: i64) -> Option<T> {
        if !self.domain.contains(row) || !self.domain.contains(col) {
            return None;
        }
        match &self.storage {
            Storage::Explicit { by_row, .. } => by_row.get(&(row, col)).copied(),
            Storage::Translation(map) => map.get(&(row - col)).copied(),
        }
    }

    /// Nonzero entries of a row as `(col, value)`, ascending in `col`.
    pub fn row(&self, row: i64) -> Vec<(i64, T)> {
        if !self.domain.contains(row) {
            return Vec::new();
        }
        match &self.storage {
            Storage::Explicit { by_row, .. } => by_row
                .range((row, i64::MIN)..=(row, i64::MAX))
                .map(|(&(_, c), &x)| (c, x))
                .collect(),
            Storage::Translation(map) => {
                let mut out: Vec<(i64, T)> = map
                    .iter()
                    .map(|(&d, &x)| (row - d, x))
                    .filter(|(c, _)| self.domain.contains(*c))
                    .collect();
                out.sort_by_key(|(c, _)| *c);
                out
            }
        }
    }

    /// Nonzero entries of a column as `(row, value)`, ascending in `row`.
    pub fn col(&self, col: i64) -> Vec<(i64, T)> {
        if !self.domain.contains(col) {
            return Vec::new();
        }
        match &self.storage {
            Storage::Explicit { by_col, .. } => by_col
                .range((col, i64::MIN)..=(col, i64::MAX))
                .map(|(&(_, r), &x)| (r, x))
                .collect(),
            Storage::Translation(map) => map
                .iter()
                .map(|(&d, &x)| (col + d, x))
                .filter(|(r, _)| self.domain.contains(*r))
                .collect(),
        }
    }

    pub fn transpose(&self) -> SparseMatrix<T> {
        let storage = match &self.storage {
            Storage::Explicit { by_row, by_col } => Storage::Explicit {
                by_row: by_col.clone(),
                by_col: by_row.clone(),
            },
            Storage::Translation(map) => {
                Storage::Translation(map.iter().map(|(&d, &x)| (-d, x)).collect())
            }
        };
        SparseMatrix {
            domain: self.domain,
            storage,
        }
    }

    pub fn map<U: Entry>(&self, mut f: impl FnMut(T) -> U) -> SparseMatrix<U> {
        let storage = match &self.storage {
            Storage::Explicit { by_row, .. } => {
                let mut r2 = BTreeMap::new();
                let mut c2 = BTreeMap::new();
                for (&(r, c), &x) in by_row {
                    let y = f(x);
                    if !y.is_zero() {
                        r2.insert((r, c), y);
                        c2.insert((c, r), y);
                    }
                }
                Storage::Explicit {
                    by_row: r2,
                    by_col: c2,
                }
            }
            Storage::Translation(map) => Storage::Translation(
                map.iter()
                    .map(|(&d, &x)| (d, f(x)))
                    .filter(|(_, y)| !y.is_zero())
                    .collect(),
            ),
        };
        SparseMatrix {
            domain: self.domain,
            storage,
        }
    }

    /// Explicit entries (finite domain) or offsets (pattern) as stored.
    pub fn stored_entries(&self) -> Vec<(i64, i64, T)> {
        match &self.storage {
            Storage::Explicit { by_row, .. } => {
                by_row.iter().map(|(&(r, c), &x)| (r, c, x)).collect()
            }
            Storage::Translation(map) => map.iter().map(|(&d, &x)| (d, 0, x)).collect(),
        }
    }

    /// All nonzero entries with both indices inside `window`.
    pub fn entries_in(&self, window: Window) -> Vec<(i64, i64, T)> {
        let mut out = Vec::new();
        for r in window.iter() {
            for (c, x) in self.row(r) {
                if window.contains(c) {
                    out.push((r, c, x));
                }
            }
        }
        out
    }
}

/// Boundary rule used when a solver restricts an infinite matrix to a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Columns outside the window are dropped (the vector vanishes outside).
    Zero,
    /// Columns outside the window are folded onto the nearest window vertex
    /// (the vector is extended by its boundary value).
    Clamp,
}

/// Compressed rows of a matrix restricted to a window; the local operator the
/// solvers iterate with.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    pub window: Window,
    rows: Vec<Vec<(usize, f64)>>,
}

impl LocalOperator {
    pub fn restrict(m: &SparseMatrix<f64>, window: Window, boundary: Boundary) -> Self {
        let mut rows = Vec::with_capacity(window.len());
        for r in window.iter() {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (c, x) in m.row(r) {
                let target = if window.contains(c) {
                    Some(c)
                } else {
                    match boundary {
                        Boundary::Zero => None,
                        Boundary::Clamp => Some(window.clamp(c)),
                    }
                };
                if let Some(c) = target {
                    *acc.entry(window.index_of(c).expect("clamped into window")).or_insert(0.0) += x;
                }
            }
            rows.push(acc.into_iter().collect());
        }
        LocalOperator { window, rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, a)| a * x[j]).sum();
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }
}
