//! Measurable Bratteli diagrams discretized by finite cell partitions.
//!
//! Each level is a finite list of labelled cells and the edge set is a set of
//! cell pairs `(x, y)` carrying a positive mass `p(x, y)`. Disintegrating the
//! edge measure over its source gives a marginal `p_hat` and stochastic
//! kernel rows `p(x, .)`. A function `q` with `sum_y p(x, y) q(y) = q(x)`
//! defines the IFS measure
//!
//! `mu([C_0, .., C_N]) = sum p_hat(x_0) p(x_0, x_1) .. p(x_{N-1}, x_N) q(x_N)`
//!
//! over `x_i in C_i`. The fiber of paths starting at `y` carries the measure
//! `mu_y = mu([y] ∩ .) / p_hat(y)`, whose total mass is `q(y)`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::Diagram;
use crate::measures::{markov_measure, MarkovMeasure, MeasureError, PathMeasure, TransitionTable};
use crate::path::{enumerate_paths, FinitePath};
use crate::spectral::closed_classes;

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("cell list {which} is empty")]
    EmptyCells { which: &'static str },
    #[error("cell label {0:?} appears twice")]
    DuplicateLabel(String),
    #[error("unknown cell {0:?}")]
    UnknownCell(String),
    #[error("edge ({x:?}, {y:?}) is listed twice")]
    DuplicateEdge { x: String, y: String },
    #[error("edge ({x:?}, {y:?}) has non-positive mass {mass}")]
    NonPositiveMass { x: String, y: String, mass: f64 },
    #[error("cell {cell:?} is not touched by any edge")]
    NotOnto { cell: String },
    #[error("source cell {cell:?} has zero marginal")]
    ZeroMarginal { cell: String },
    #[error("kernel row {cell:?} sums to {sum}")]
    NotStochastic { cell: String, sum: f64 },
    #[error("row {cell:?} has {found} entries, expected {expected}")]
    RowLength { cell: String, expected: usize, found: usize },
    #[error("q is not harmonic: max residual {residual}")]
    NotHarmonic { residual: f64 },
    #[error("q must be positive, found {value} at {cell:?}")]
    NonPositiveQ { cell: String, value: f64 },
    #[error("q has {found} entries for {expected} cells")]
    QLength { expected: usize, found: usize },
    #[error("source and target cell lists differ")]
    LevelMismatch,
    #[error("malformed cylinder {0:?}")]
    BadCylinder(String),
    #[error("{iterations} iterations requested on a table of depth {depth}")]
    DepthExhausted { iterations: usize, depth: usize },
    #[error("table depth must be at least one")]
    ZeroDepth,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A finite measurable partition of one level, by label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl CellSpace {
    pub fn new(labels: Vec<String>, which: &'static str) -> Result<Self, KernelError> {
        if labels.is_empty() {
            return Err(KernelError::EmptyCells { which });
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(KernelError::DuplicateLabel(l.clone()));
            }
        }
        Ok(CellSpace { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, KernelError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| KernelError::UnknownCell(label.to_string()))
    }
}

/// A finite measure on a set of cell pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMeasure {
    cells0: CellSpace,
    cells1: CellSpace,
    mass: BTreeMap<(usize, usize), f64>,
}

impl EdgeMeasure {
    /// Every mass must be positive and every cell of either level must be
    /// touched by an edge, so that `s` and `r` are onto.
    pub fn new(
        cells0: Vec<String>,
        cells1: Vec<String>,
        edges: Vec<(String, String, f64)>,
    ) -> Result<Self, KernelError> {
        let cells0 = CellSpace::new(cells0, "cells0")?;
        let cells1 = CellSpace::new(cells1, "cells1")?;
        let mut mass = BTreeMap::new();
        for (x, y, m) in edges {
            if !(m > 0.0) || !m.is_finite() {
                return Err(KernelError::NonPositiveMass { x, y, mass: m });
            }
            let key = (cells0.index_of(&x)?, cells1.index_of(&y)?);
            if mass.insert(key, m).is_some() {
                return Err(KernelError::DuplicateEdge { x, y });
            }
        }
        let mut seen0 = vec![false; cells0.len()];
        let mut seen1 = vec![false; cells1.len()];
        for &(x, y) in mass.keys() {
            seen0[x] = true;
            seen1[y] = true;
        }
        if let Some(i) = seen0.iter().position(|s| !s) {
            return Err(KernelError::NotOnto {
                cell: cells0.label(i).to_string(),
            });
        }
        if let Some(i) = seen1.iter().position(|s| !s) {
            return Err(KernelError::NotOnto {
                cell: cells1.label(i).to_string(),
            });
        }
        Ok(EdgeMeasure { cells0, cells1, mass })
    }

    pub fn cells0(&self) -> &CellSpace {
        &self.cells0
    }

    pub fn cells1(&self) -> &CellSpace {
        &self.cells1
    }

    pub fn mass(&self, x: usize, y: usize) -> f64 {
        self.mass.get(&(x, y)).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.mass.iter().map(|(&k, &m)| (k, m))
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }
}

/// Marginal `p_hat` on source cells and stochastic rows `p(x, .)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKernel {
    cells0: CellSpace,
    cells1: CellSpace,
    marginal: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

/// `p_hat(x) = sum_y p(x, y)` and `p(x, y) = p(x, y) / p_hat(x)`.
pub fn disintegrate(p: &EdgeMeasure) -> Result<CellKernel, KernelError> {
    let n = p.cells0.len();
    let mut marginal = vec![0.0; n];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for ((x, y), m) in p.support() {
        marginal[x] += m;
        rows[x].push((y, m));
    }
    for (x, row) in rows.iter_mut().enumerate() {
        if !(marginal[x] > 0.0) {
            return Err(KernelError::ZeroMarginal {
                cell: p.cells0.label(x).to_string(),
            });
        }
        for entry in row.iter_mut() {
            entry.1 /= marginal[x];
        }
    }
    Ok(CellKernel {
        cells0: p.cells0.clone(),
        cells1: p.cells1.clone(),
        marginal,
        rows,
    })
}

impl CellKernel {
    /// Build from a marginal and dense rows over `cells1`; zero entries are
    /// outside the support.
    pub fn from_rows(
        cells0: Vec<String>,
        cells1: Vec<String>,
        marginal: Vec<f64>,
        dense: Vec<Vec<f64>>,
    ) -> Result<Self, KernelError> {
        let cells0 = CellSpace::new(cells0, "cells0")?;
        let cells1 = CellSpace::new(cells1, "cells1")?;
        if marginal.len() != cells0.len() {
            return Err(KernelError::QLength {
                expected: cells0.len(),
                found: marginal.len(),
            });
        }
        if dense.len() != cells0.len() {
            return Err(KernelError::RowLength {
                cell: "rows".into(),
                expected: cells0.len(),
                found: dense.len(),
            });
        }
        let mut rows = Vec::with_capacity(dense.len());
        for (x, row) in dense.into_iter().enumerate() {
            let cell = cells0.label(x).to_string();
            if row.len() != cells1.len() {
                return Err(KernelError::RowLength {
                    cell,
                    expected: cells1.len(),
                    found: row.len(),
                });
            }
            if !(marginal[x] > 0.0) {
                return Err(KernelError::ZeroMarginal { cell });
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0 || p.is_nan()) || (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(KernelError::NotStochastic { cell, sum });
            }
            rows.push(row.into_iter().enumerate().filter(|&(_, p)| p > 0.0).collect());
        }
        Ok(CellKernel {
            cells0,
            cells1,
            marginal,
            rows,
        })
    }

    pub fn cells0(&self) -> &CellSpace {
        &self.cells0
    }

    pub fn cells1(&self) -> &CellSpace {
        &self.cells1
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn row(&self, x: usize) -> &[(usize, f64)] {
        &self.rows[x]
    }

    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.rows[x].iter().find(|e| e.0 == y).map_or(0.0, |e| e.1)
    }

    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        (0..self.cells0.len())
            .map(|x| (0..self.cells1.len()).map(|y| self.p(x, y)).collect())
            .collect()
    }

    /// `p_hat(x) p(x, y)`.
    pub fn edge_mass(&self, x: usize, y: usize) -> f64 {
        self.marginal[x] * self.p(x, y)
    }

    /// `sup |p_hat(x) p(x, y) - p(x, y)|` over the support of `p` and of the kernel.
    pub fn reconstruction_error(&self, p: &EdgeMeasure) -> f64 {
        let from_measure = p.support().map(|((x, y), m)| (self.edge_mass(x, y) - m).abs());
        let from_kernel = (0..self.rows.len())
            .flat_map(|x| self.rows[x].iter().map(move |&(y, _)| (x, y)))
            .map(|(x, y)| (self.edge_mass(x, y) - p.mass(x, y)).abs());
        from_measure.chain(from_kernel).fold(0.0, f64::max)
    }

    /// Both levels carry the same cells, so that cylinders of any length make sense.
    pub fn is_stationary(&self) -> bool {
        self.cells0.labels == self.cells1.labels
    }

    fn require_stationary(&self) -> Result<(), KernelError> {
        if self.is_stationary() {
            Ok(())
        } else {
            Err(KernelError::LevelMismatch)
        }
    }

    fn check_q(&self, q: &[f64]) -> Result<(), KernelError> {
        self.require_stationary()?;
        if q.len() != self.cells1.len() {
            return Err(KernelError::QLength {
                expected: self.cells1.len(),
                found: q.len(),
            });
        }
        if let Some(i) = q.iter().position(|&v| !(v > 0.0)) {
            return Err(KernelError::NonPositiveQ {
                cell: self.cells1.label(i).to_string(),
                value: q[i],
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCheck {
    pub tol: f64,
    /// `|sum_y p(x, y) q(y) - q(x)|` per source cell.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub pass: bool,
}

pub fn harmonic_check(kernel: &CellKernel, q: &[f64], tol: f64) -> Result<HarmonicCheck, KernelError> {
    kernel.check_q(q)?;
    let residuals: Vec<f64> = (0..kernel.cells0.len())
        .map(|x| {
            let pq: f64 = kernel.rows[x].iter().map(|&(y, p)| p * q[y]).sum();
            (pq - q[x]).abs()
        })
        .collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(HarmonicCheck {
        tol,
        residuals,
        max_residual,
        pass: max_residual < tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHarmonic {
    pub q: Vec<f64>,
    pub residual: f64,
    /// Only one closed class, so the positive harmonic functions are the constants.
    pub unique: bool,
    pub closed_classes: Vec<Vec<String>>,
}

/// The sup-one harmonic function `q = 1` of a stochastic kernel.
pub fn solve_harmonic_kernel(kernel: &CellKernel) -> Result<KernelHarmonic, KernelError> {
    kernel.require_stationary()?;
    let q = vec![1.0; kernel.cells0.len()];
    let residual = harmonic_check(kernel, &q, f64::INFINITY)?.max_residual;
    let classes: Vec<Vec<String>> = closed_classes(&kernel.rows)
        .into_iter()
        .map(|c| c.into_iter().map(|i| kernel.cells0.label(i).to_string()).collect())
        .collect();
    Ok(KernelHarmonic {
        q,
        residual,
        unique: classes.len() == 1,
        closed_classes: classes,
    })
}

/// A cell cylinder `[C_0, .., C_N]`; each `C_i` is a sorted set of cell indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellCylinder(pub Vec<Vec<usize>>);

impl CellCylinder {
    /// Cylinder of single cells.
    pub fn atoms(cells: &[usize]) -> Self {
        CellCylinder(cells.iter().map(|&c| vec![c]).collect())
    }

    /// `a,b|c|*`: sets separated by `|`, cells by `,`, `*` for the whole level.
    pub fn parse(s: &str, cells: &CellSpace) -> Result<Self, KernelError> {
        let bad = || KernelError::BadCylinder(s.to_string());
        if s.trim().is_empty() {
            return Err(bad());
        }
        let mut sets = Vec::new();
        for group in s.split('|') {
            let group = group.trim();
            let mut set: Vec<usize> = if group == "*" {
                (0..cells.len()).collect()
            } else {
                group
                    .split(',')
                    .map(|l| cells.index_of(l.trim()))
                    .collect::<Result<_, _>>()?
            };
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(bad());
            }
            sets.push(set);
        }
        Ok(CellCylinder(sets))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn display(&self, cells: &CellSpace) -> String {
        self.0
            .iter()
            .map(|set| {
                if set.len() == cells.len() && set.len() > 1 {
                    "*".to_string()
                } else {
                    set.iter().map(|&i| cells.label(i)).collect::<Vec<_>>().join(",")
                }
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurableIfsMeasure {
    kernel: CellKernel,
    q: Vec<f64>,
    harmonic: HarmonicCheck,
}

/// Check harmonicity of `q` to `tol` and attach it to the kernel.
pub fn measurable_ifs_measure(
    kernel: &CellKernel,
    q: Vec<f64>,
    tol: f64,
) -> Result<MeasurableIfsMeasure, KernelError> {
    let harmonic = harmonic_check(kernel, &q, tol)?;
    if !harmonic.pass {
        return Err(KernelError::NotHarmonic {
            residual: harmonic.max_residual,
        });
    }
    Ok(MeasurableIfsMeasure {
        kernel: kernel.clone(),
        q,
        harmonic,
    })
}

impl MeasurableIfsMeasure {
    /// Skip the harmonicity requirement; for perturbation studies.
    pub fn from_parts(kernel: &CellKernel, q: Vec<f64>) -> Result<Self, KernelError> {
        let harmonic = harmonic_check(kernel, &q, f64::INFINITY)?;
        Ok(MeasurableIfsMeasure {
            kernel: kernel.clone(),
            q,
            harmonic,
        })
    }

    pub fn kernel(&self) -> &CellKernel {
        &self.kernel
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn harmonic(&self) -> &HarmonicCheck {
        &self.harmonic
    }

    pub fn cells(&self) -> &CellSpace {
        &self.kernel.cells0
    }

    fn validate(&self, c: &CellCylinder) -> Result<(), KernelError> {
        let n = self.cells().len();
        if c.is_empty() || c.0.iter().any(|set| set.is_empty() || set.iter().any(|&i| i >= n)) {
            return Err(KernelError::BadCylinder(format!("{:?}", c.0)));
        }
        Ok(())
    }

    /// Push a density over the first set through the remaining sets and pair with `q`.
    fn propagate(&self, mut g: Vec<f64>, rest: &[Vec<usize>]) -> f64 {
        let n = g.len();
        for set in rest {
            let mut next = vec![0.0; n];
            for (x, &gx) in g.iter().enumerate() {
                if gx == 0.0 {
                    continue;
                }
                for &(y, p) in &self.kernel.rows[x] {
                    next[y] += gx * p;
                }
            }
            let mut masked = vec![0.0; n];
            for &y in set {
                masked[y] = next[y];
            }
            g = masked;
        }
        g.iter().zip(&self.q).map(|(a, b)| a * b).sum()
    }

    /// `mu([C_0, .., C_N])`.
    pub fn eval(&self, c: &CellCylinder) -> Result<f64, KernelError> {
        self.validate(c)?;
        let mut g = vec![0.0; self.cells().len()];
        for &x in &c.0[0] {
            g[x] = self.kernel.marginal[x];
        }
        Ok(self.propagate(g, &c.0[1..]))
    }

    /// `mu_y([C_0, .., C_N])`, the fiber measure over paths starting at `y`.
    pub fn fiber(&self, y: usize, c: &CellCylinder) -> Result<f64, KernelError> {
        self.validate(c)?;
        if !c.0[0].contains(&y) {
            return Ok(0.0);
        }
        let mut g = vec![0.0; self.cells().len()];
        g[y] = 1.0;
        Ok(self.propagate(g, &c.0[1..]))
    }

    /// `(integral over E of mu o tau_e^-1 dp(e))([C_0, .., C_N])`.
    pub fn pushed(&self, c: &CellCylinder) -> Result<f64, KernelError> {
        self.validate(c)?;
        let mut total = 0.0;
        for &x in &c.0[0] {
            for &(y, p) in &self.kernel.rows[x] {
                let mass = self.kernel.marginal[x] * p;
                let inner = if c.len() == 1 {
                    self.q[y]
                } else {
                    self.fiber(y, &CellCylinder(c.0[1..].to_vec()))?
                };
                total += mass * inner;
            }
        }
        Ok(total)
    }

    /// The chains `x_0 -> .. -> x_{len-1}` of the support with positive mass.
    pub fn atoms(&self, len: usize) -> Vec<Vec<usize>> {
        let n = self.cells().len();
        let mut out: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
        for _ in 1..len {
            out = out
                .into_iter()
                .flat_map(|chain| {
                    let last = *chain.last().unwrap();
                    self.kernel.rows[last].iter().map(move |&(y, _)| {
                        let mut next = chain.clone();
                        next.push(y);
                        next
                    })
                })
                .collect();
        }
        out
    }

    /// Markov measure on the diagram whose vertices are the cells, with
    /// `mu = scale * markov` on atom cylinders. Uses the Doob transform
    /// `p(w, v) q(v) / q(w)`, which is stochastic because `q` is harmonic.
    pub fn atomic_bridge(&self) -> Result<AtomicBridge, KernelError> {
        let n = self.cells().len();
        let mut dense = vec![vec![0u64; n]; n];
        let mut table = TransitionTable::new();
        for (w, row) in self.kernel.rows.iter().enumerate() {
            for &(v, p) in row {
                dense[v][w] = 1;
                table.insert((w as i64, v as i64, 0), p * self.q[v] / self.q[w]);
            }
        }
        let diagram = Diagram::from_dense(&dense).map_err(MeasureError::from)?;
        let scale: f64 = (0..n).map(|w| self.kernel.marginal[w] * self.q[w]).sum();
        let q0 = (0..n)
            .map(|w| (w as i64, self.kernel.marginal[w] * self.q[w] / scale))
            .collect();
        let markov = markov_measure(&diagram, q0, vec![table])?;
        Ok(AtomicBridge { markov, scale })
    }

    /// Total mass `sum_x p_hat(x) q(x)`.
    pub fn total(&self) -> f64 {
        self.kernel.marginal.iter().zip(&self.q).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone)]
pub struct AtomicBridge {
    pub markov: MarkovMeasure,
    pub scale: f64,
}

impl AtomicBridge {
    /// `sup |mu([x_0..x_{len}]) - scale * m([x_0..x_{len}])|` over all diagram
    /// paths with at most `max_edges` edges.
    pub fn max_error(&self, m: &MeasurableIfsMeasure, max_edges: usize) -> Result<f64, KernelError> {
        let d = self.markov.diagram();
        let mut worst = 0.0f64;
        for len in 0..=max_edges {
            for path in enumerate_paths(d, len, d.default_window()) {
                let cells: Vec<usize> = path.vertices().into_iter().map(|v| v as usize).collect();
                let mu = m.eval(&CellCylinder::atoms(&cells))?;
                worst = worst.max((mu - self.scale * self.markov.value(&path)?).abs());
            }
        }
        Ok(worst)
    }

    /// The path of the bridge diagram through the given cells.
    pub fn path(&self, cells: &[usize]) -> Result<FinitePath, KernelError> {
        let literal = cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("-");
        FinitePath::parse(&literal, self.markov.diagram())
            .map_err(|e| KernelError::Measure(MeasureError::from(e)))
    }
}

/// The sets a checked cylinder may use at each position: every single cell
/// and the whole level, plus every subset when there are at most three cells.
fn cell_choices(n: usize) -> Vec<Vec<usize>> {
    if n <= 3 {
        return (1u32..1 << n)
            .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
            .collect();
    }
    let mut out: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    out.push((0..n).collect());
    out
}

fn cylinders(n_cells: usize, len: usize) -> Vec<CellCylinder> {
    let choices = cell_choices(n_cells);
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Vec<usize>>| {
                choices.iter().map(move |c| {
                    let mut next = prefix.clone();
                    next.push(c.clone());
                    next
                })
            })
            .collect();
    }
    out.into_iter().map(CellCylinder).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderDeviation {
    pub cylinder: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurableFixedPointReport {
    pub tol: f64,
    pub max_len: usize,
    pub cylinders_checked: usize,
    /// Largest `|pushed - mu|`.
    pub max_dev: f64,
    pub worst: Option<CylinderDeviation>,
    pub pass: bool,
}

/// Compare `integral of mu o tau_e^-1 dp(e)` with `mu` on cell cylinders of
/// `1..=max_len` sets.
pub fn check_ifs_fixed_point_measurable(
    m: &MeasurableIfsMeasure,
    max_len: usize,
    tol: f64,
) -> Result<MeasurableFixedPointReport, KernelError> {
    let mut max_dev = 0.0f64;
    let mut worst = None;
    let mut checked = 0;
    for len in 1..=max_len {
        for c in cylinders(m.cells().len(), len) {
            let lhs = m.pushed(&c)?;
            let rhs = m.eval(&c)?;
            let dev = (lhs - rhs).abs();
            checked += 1;
            if dev > max_dev || worst.is_none() {
                max_dev = max_dev.max(dev);
                worst = Some(CylinderDeviation {
                    cylinder: c.display(m.cells()),
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(MeasurableFixedPointReport {
        tol,
        max_len,
        cylinders_checked: checked,
        max_dev,
        worst,
        pass: max_dev < tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConsistencyReport {
    pub tol: f64,
    pub max_len: usize,
    pub cylinders_checked: usize,
    /// Largest `|sum_y mu([.., {y}]) - mu([..])| / mu([..])`.
    pub max_rel_error: f64,
    pub pass: bool,
}

/// Parent against the sum of its one-cell refinements for parents of
/// `1..=max_len` sets.
pub fn check_consistency_measurable(
    m: &MeasurableIfsMeasure,
    max_len: usize,
    tol: f64,
) -> Result<KernelConsistencyReport, KernelError> {
    let n = m.cells().len();
    let mut max_rel_error = 0.0f64;
    let mut checked = 0;
    for len in 1..=max_len {
        for parent in cylinders(n, len) {
            let whole = m.eval(&parent)?;
            let mut sum = 0.0;
            for y in 0..n {
                let mut child = parent.clone();
                child.0.push(vec![y]);
                sum += m.eval(&child)?;
            }
            checked += 1;
            let err = (sum - whole).abs();
            let rel = if whole > 0.0 { err / whole } else { err };
            max_rel_error = max_rel_error.max(rel);
        }
    }
    Ok(KernelConsistencyReport {
        tol,
        max_len,
        cylinders_checked: checked,
        max_rel_error,
        pass: max_rel_error < tol,
    })
}

/// Values of a measure on atom cylinders of `1..=depth` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderTable {
    pub depth: usize,
    pub values: BTreeMap<Vec<usize>, f64>,
}

impl CylinderTable {
    /// Equal mass on the chains of each length.
    pub fn uniform(m: &MeasurableIfsMeasure, depth: usize) -> Result<Self, KernelError> {
        if depth == 0 {
            return Err(KernelError::ZeroDepth);
        }
        let mut values = BTreeMap::new();
        for len in 1..=depth {
            let chains = m.atoms(len);
            let w = 1.0 / chains.len() as f64;
            values.extend(chains.into_iter().map(|c| (c, w)));
        }
        Ok(CylinderTable { depth, values })
    }

    /// The values of `m` itself.
    pub fn of_measure(m: &MeasurableIfsMeasure, depth: usize) -> Result<Self, KernelError> {
        if depth == 0 {
            return Err(KernelError::ZeroDepth);
        }
        let mut values = BTreeMap::new();
        for len in 1..=depth {
            for c in m.atoms(len) {
                let v = m.eval(&CellCylinder::atoms(&c))?;
                values.insert(c, v);
            }
        }
        Ok(CylinderTable { depth, values })
    }

    pub fn get(&self, cells: &[usize]) -> f64 {
        self.values.get(cells).copied().unwrap_or(0.0)
    }

    /// Sup distance over the union of the two key sets.
    pub fn distance(&self, other: &CylinderTable) -> f64 {
        self.values
            .keys()
            .chain(other.values.keys())
            .map(|k| (self.get(k) - other.get(k)).abs())
            .fold(0.0, f64::max)
    }

    /// Sup distance between densities with respect to the path weights
    /// `w([x_0..x_m]) = p_hat(x_0) p(x_0, x_1) .. p(x_{m-1}, x_m)`, over keys
    /// with `w > 0`. One application of the fixed-point operator shifts and
    /// averages densities, so it never increases this distance.
    pub fn density_distance(&self, other: &CylinderTable, kernel: &CellKernel) -> f64 {
        self.values
            .keys()
            .chain(other.values.keys())
            .filter_map(|k| {
                let w = path_weight(kernel, k);
                (w > 0.0).then(|| (self.get(k) - other.get(k)).abs() / w)
            })
            .fold(0.0, f64::max)
    }
}

fn path_weight(kernel: &CellKernel, cells: &[usize]) -> f64 {
    let head = kernel.marginal[cells[0]];
    cells.windows(2).fold(head, |w, e| w * kernel.p(e[0], e[1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRun {
    pub table: CylinderTable,
    /// [`CylinderTable::density_distance`] between successive iterates.
    pub distances: Vec<f64>,
    /// The distances never increase, up to a relative rounding allowance of 1e-12.
    pub monotone: bool,
}

/// Apply `L(nu) = integral of nu o tau_e^-1 dp(e)` to a table `k` times, with
/// fibers read off as `nu_y = nu([y] ∩ .) / p_hat(y)`.
///
/// After `j` applications the entries with at most `j + 1` cells depend on
/// `nu0` only through the root densities, so `depth - 1` applications settle
/// the whole table once those are harmonic; `k >= depth` is rejected.
pub fn fixed_point_iterate(
    kernel: &CellKernel,
    nu0: &CylinderTable,
    k: usize,
) -> Result<FixedPointRun, KernelError> {
    kernel.require_stationary()?;
    if k >= nu0.depth {
        return Err(KernelError::DepthExhausted {
            iterations: k,
            depth: nu0.depth,
        });
    }
    let n = kernel.cells0.len();
    let marginal = &kernel.marginal;
    let mut table = nu0.clone();
    let mut distances = Vec::with_capacity(k);
    for _ in 0..k {
        let mut next = BTreeMap::new();
        for x in 0..n {
            let root: f64 = kernel.rows[x]
                .iter()
                .map(|&(y, p)| p * table.get(&[y]) / marginal[y])
                .sum();
            next.insert(vec![x], marginal[x] * root);
        }
        for (key, _) in table.values.iter().filter(|(key, _)| key.len() >= 2) {
            let (x0, x1) = (key[0], key[1]);
            let mass = kernel.edge_mass(x0, x1);
            next.insert(key.clone(), mass * table.get(&key[1..]) / marginal[x1]);
        }
        let next = CylinderTable {
            depth: table.depth,
            values: next,
        };
        distances.push(next.density_distance(&table, kernel));
        table = next;
    }
    let monotone = distances.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(FixedPointRun {
        table,
        distances,
        monotone,
    })
}
