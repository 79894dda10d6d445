//! Markov measures `m([e_0..e_n]) = q_{s(e_0)} p^(0)_{e_0} ... p^(n)_{e_n}`.

use std::collections::{BTreeMap, BTreeSet};

use crate::diagram::{Diagram, Edge};
use crate::path::FinitePath;
use crate::sparse::Window;

use super::tail::TailInvariantMeasure;
use super::{MeasureError, MeasureKind, PathMeasure};

/// Transition weights of one level keyed by `(source, target, index)`.
pub type TransitionTable = BTreeMap<(i64, i64, u32), f64>;

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MarkovMeasure {
    diagram: Diagram,
    q: BTreeMap<i64, f64>,
    /// Level `n` uses `levels[min(n, len - 1)]` unless `depth_limit` is set.
    levels: Vec<TransitionTable>,
    depth_limit: Option<usize>,
    full_support: bool,
}

fn key(e: &Edge) -> (i64, i64, u32) {
    (e.source, e.target, e.index)
}

/// Validate and build a Markov measure. Every source vertex that appears in
/// a level table must have its outgoing weights sum to one; on finite
/// domains every vertex must appear.
pub fn markov_measure(
    diagram: &Diagram,
    q: BTreeMap<i64, f64>,
    levels: Vec<TransitionTable>,
) -> Result<MarkovMeasure, MeasureError> {
    build(diagram, q, levels, None)
}

fn build(
    diagram: &Diagram,
    q: BTreeMap<i64, f64>,
    levels: Vec<TransitionTable>,
    depth_limit: Option<usize>,
) -> Result<MarkovMeasure, MeasureError> {
    if levels.is_empty() {
        return Err(MeasureError::DepthExceeded { len: 0, max: 0 });
    }
    let domain = diagram.domain();
    let mut full_support = true;
    if domain.is_finite() {
        if let Some(v) = domain.window(0).iter().find(|v| !q.contains_key(v)) {
            return Err(MeasureError::MissingVertex { vertex: v, level: 0 });
        }
    }
    for (&vertex, &value) in &q {
        if !domain.contains(vertex) {
            return Err(MeasureError::MissingVertex { vertex, level: 0 });
        }
        if value < 0.0 || value.is_nan() {
            return Err(MeasureError::NegativeMass {
                vertex,
                level: 0,
                value,
            });
        }
        full_support &= value > 0.0;
    }
    for (level, table) in levels.iter().enumerate() {
        let mut sources: BTreeSet<i64> = BTreeSet::new();
        for (&(s, t, k), &p) in table {
            let e = Edge::new(level, s, t, k);
            if !diagram.has_edge(&e) {
                return Err(MeasureError::SupportMismatch { edge: e.to_string() });
            }
            if p < 0.0 || p.is_nan() {
                return Err(MeasureError::NotStochastic {
                    vertex: s,
                    level,
                    sum: p,
                });
            }
            sources.insert(s);
        }
        if domain.is_finite() {
            sources.extend(domain.window(0).iter());
        }
        for s in sources {
            let mut sum = 0.0;
            for e in diagram.out_edges(level, s) {
                let p = table.get(&key(&e)).copied().unwrap_or(0.0);
                full_support &= p > 0.0;
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(MeasureError::NotStochastic {
                    vertex: s,
                    level,
                    sum,
                });
            }
        }
    }
    Ok(MarkovMeasure {
        diagram: diagram.clone(),
        q,
        levels,
        depth_limit,
        full_support,
    })
}

impl MarkovMeasure {
    pub fn q(&self) -> &BTreeMap<i64, f64> {
        &self.q
    }

    pub fn levels(&self) -> &[TransitionTable] {
        &self.levels
    }

    /// Positive initial vector and positive weights on every edge.
    pub fn full_support(&self) -> bool {
        self.full_support
    }

    pub fn is_stationary(&self) -> bool {
        self.depth_limit.is_none() && self.levels.len() == 1
    }

    fn table(&self, level: usize) -> Result<&TransitionTable, MeasureError> {
        if let Some(max) = self.depth_limit {
            if level >= max {
                return Err(MeasureError::DepthExceeded { len: level + 1, max });
            }
        }
        Ok(&self.levels[level.min(self.levels.len() - 1)])
    }

    /// `p^(level)_{s(e), e}`; the level stored in `e` is ignored.
    pub fn transition(&self, level: usize, e: &Edge) -> Result<f64, MeasureError> {
        let table = self.table(level)?;
        if let Some(&p) = table.get(&key(e)) {
            return Ok(p);
        }
        let row_known = self.diagram.domain().is_finite()
            || table.range((e.source, i64::MIN, 0)..=(e.source, i64::MAX, u32::MAX)).next().is_some();
        if row_known {
            Ok(0.0)
        } else {
            Err(MeasureError::OutsideWindow {
                vertex: e.source,
                window: self.window(),
            })
        }
    }

    pub fn initial(&self, v: i64) -> Result<f64, MeasureError> {
        self.q.get(&v).copied().ok_or(MeasureError::OutsideWindow {
            vertex: v,
            window: self.window(),
        })
    }

    /// `(q P_0)_v = sum over edges e into v of q_{s(e)} p^(0)_e`.
    pub fn push_forward(&self, v: i64) -> Result<f64, MeasureError> {
        let mut sum = 0.0;
        for e in self.diagram.in_edges(0, v) {
            sum += self.initial(e.source)? * self.transition(0, &e)?;
        }
        Ok(sum)
    }

    /// `sup_v |(q P_0)_v - q_v|` over vertices whose predecessors are known.
    pub fn invariance_residual(&self) -> f64 {
        self.q
            .iter()
            .filter_map(|(&v, &qv)| self.push_forward(v).ok().map(|x| (x - qv).abs()))
            .fold(0.0, f64::max)
    }
}

impl PathMeasure for MarkovMeasure {
    fn diagram(&self) -> &Diagram {
        &self.diagram
    }

    fn kind(&self) -> MeasureKind {
        MeasureKind::Markov
    }

    fn window(&self) -> Window {
        let lo = self.q.keys().next().copied().unwrap_or(0);
        let hi = self.q.keys().next_back().copied().unwrap_or(-1);
        Window::new(lo, hi)
    }

    fn value(&self, cylinder: &FinitePath) -> Result<f64, MeasureError> {
        let mut x = self.initial(cylinder.start())?;
        for (level, e) in cylinder.edges().iter().enumerate() {
            x *= self.transition(level, e)?;
        }
        Ok(x)
    }

    /// `(q P)_v / q_v` for stationary measures.
    fn shift_factor(&self, v: i64) -> Option<f64> {
        if !self.is_stationary() {
            return None;
        }
        let qv = self.initial(v).ok().filter(|&x| x > 0.0)?;
        Some(self.push_forward(v).ok()? / qv)
    }

    /// Stationary transitions do not depend on the level, so a common edge
    /// suffix contributes the same factors to both cylinders.
    fn ratio(&self, num: &FinitePath, den: &FinitePath) -> Result<f64, MeasureError> {
        if !self.is_stationary() {
            return Ok(self.value(num)? / self.value(den)?);
        }
        let (a, b) = (num.edges(), den.edges());
        let common = a
            .iter()
            .rev()
            .zip(b.iter().rev())
            .take_while(|(x, y)| x.same_arrow(y))
            .count();
        let head = |p: &FinitePath, keep: usize| -> Result<f64, MeasureError> {
            let mut x = self.initial(p.start())?;
            for e in &p.edges()[..keep] {
                x *= self.transition(0, e)?;
            }
            Ok(x)
        };
        // the shared tail must itself be evaluable
        self.value(den)?;
        Ok(head(num, a.len() - common)? / head(den, b.len() - common)?)
    }

    /// `q_{s(e)} p_e / q_{r(e)}` for stationary measures.
    fn branch_derivative(&self, e: &Edge) -> Option<f64> {
        if !self.is_stationary() {
            return None;
        }
        let qr = self.initial(e.target).ok().filter(|&x| x > 0.0)?;
        Some(self.initial(e.source).ok()? * self.transition(0, e).ok()? / qr)
    }
}

/// Markov measure with the same cylinder values as a tail-invariant measure:
/// `q_w = mu^(0)_w` and `p^(n)_{w,e} = mu^(n+1)_{r(e)} / mu^(n)_w`.
pub fn tail_to_markov(tm: &TailInvariantMeasure) -> Result<MarkovMeasure, MeasureError> {
    let d = tm.diagram();
    let window = tm.window();
    let n_levels = match tm.levels() {
        Some(n) => n - 1,
        None => 1,
    };
    let mut q = BTreeMap::new();
    for v in window.iter() {
        if let Ok(x) = tm.level_value(0, v) {
            q.insert(v, x);
        }
    }
    let mut levels = Vec::with_capacity(n_levels);
    for n in 0..n_levels {
        let mut table = TransitionTable::new();
        for w in window.iter() {
            let Ok(mw) = tm.level_value(n, w) else { continue };
            let edges = d.out_edges(n, w);
            let targets: Result<Vec<f64>, _> =
                edges.iter().map(|e| tm.level_value(n + 1, e.target)).collect();
            // vertices near the window edge lack successor values
            let Ok(targets) = targets else { continue };
            if mw <= 0.0 {
                return Err(MeasureError::ZeroMass {
                    vertex: w,
                    level: n,
                });
            }
            for (e, mt) in edges.iter().zip(targets) {
                table.insert(key(e), mt / mw);
            }
        }
        levels.push(table);
    }
    let depth_limit = tm.levels().map(|n| n - 1);
    if depth_limit == Some(0) {
        return Err(MeasureError::DepthExceeded { len: 1, max: 0 });
    }
    build(d, q, levels, depth_limit)
}
