//! Tail-invariant measures: the value of a cylinder depends only on its
//! length and range vertex.

use std::collections::BTreeMap;

use crate::diagram::{height_vector, Diagram, Edge};
use crate::path::FinitePath;
use crate::sparse::Window;
use crate::spectral::{perron_eigenpair, EigenPair, SolverConfig, Summability};

use super::{MeasureError, MeasureKind, PathMeasure};

#[derive(Debug, Clone)]
enum TailData {
    /// `mu^(n)` for levels `0..vectors.len()`.
    Vectors(Vec<BTreeMap<i64, f64>>),
    /// `mu^(n)_v = t_v / lambda^n`.
    Stationary(EigenPair),
}

#[derive(Debug, Clone)]
pub struct TailInvariantMeasure {
    diagram: Diagram,
    data: TailData,
}

/// Build a measure from explicit level vectors, checking `A_n mu^(n+1) = mu^(n)`
/// to absolute tolerance `tol` wherever all successors are known.
pub fn tail_measure_from_vectors(
    diagram: &Diagram,
    vectors: Vec<BTreeMap<i64, f64>>,
    tol: f64,
) -> Result<TailInvariantMeasure, MeasureError> {
    if vectors.is_empty() {
        return Err(MeasureError::DepthExceeded { len: 0, max: 0 });
    }
    let domain = diagram.domain();
    for (level, vec) in vectors.iter().enumerate() {
        if domain.is_finite() {
            if let Some(v) = domain.window(0).iter().find(|v| !vec.contains_key(v)) {
                return Err(MeasureError::MissingVertex { vertex: v, level });
            }
        }
        for (&vertex, &value) in vec {
            if !domain.contains(vertex) {
                return Err(MeasureError::MissingVertex { vertex, level });
            }
            if value < 0.0 || value.is_nan() {
                return Err(MeasureError::NegativeMass { vertex, level, value });
            }
        }
    }
    let m = TailInvariantMeasure {
        diagram: diagram.clone(),
        data: TailData::Vectors(vectors),
    };
    for (level, residual) in m.consistency_residuals(m.levels().unwrap() - 1).into_iter().enumerate() {
        if residual > tol {
            return Err(MeasureError::InconsistentVectors { level, residual });
        }
    }
    Ok(m)
}

/// The measure `mu([e]) = t_{r(e)} / lambda^n` of a stationary diagram, with
/// `(lambda, t)` the Perron eigenpair of `A = F^T`.
pub fn stationary_tail_measure(
    diagram: &Diagram,
    cfg: &SolverConfig,
) -> Result<TailInvariantMeasure, MeasureError> {
    if !diagram.is_stationary() {
        return Err(MeasureError::NonStationary);
    }
    let a = diagram.matrix(0).map(|x| x as f64).transpose();
    let pair = perron_eigenpair(&a, cfg)?;
    Ok(TailInvariantMeasure {
        diagram: diagram.clone(),
        data: TailData::Stationary(pair),
    })
}

impl TailInvariantMeasure {
    pub fn eigenpair(&self) -> Option<&EigenPair> {
        match &self.data {
            TailData::Stationary(p) => Some(p),
            TailData::Vectors(_) => None,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        self.eigenpair().map(|p| p.lambda)
    }

    /// Finiteness of the total mass, known only for the Perron construction.
    pub fn summable(&self) -> Option<Summability> {
        self.eigenpair().map(|p| p.summable)
    }

    /// Number of stored levels for explicit vectors; `None` when unbounded.
    pub fn levels(&self) -> Option<usize> {
        match &self.data {
            TailData::Vectors(v) => Some(v.len()),
            TailData::Stationary(_) => None,
        }
    }

    /// `mu^(n)_v`.
    pub fn level_value(&self, n: usize, v: i64) -> Result<f64, MeasureError> {
        match &self.data {
            TailData::Vectors(vs) => {
                let vec = vs.get(n).ok_or(MeasureError::DepthExceeded {
                    len: n,
                    max: vs.len() - 1,
                })?;
                vec.get(&v)
                    .copied()
                    .ok_or(MeasureError::MissingVertex { vertex: v, level: n })
            }
            TailData::Stationary(p) => {
                let t = p.t.get(v).ok_or(MeasureError::OutsideWindow {
                    vertex: v,
                    window: p.t.window,
                })?;
                Ok(t / p.lambda.powi(n as i32))
            }
        }
    }

    /// Mass of the cell `X_v^(n)`: `H^(n)_v * mu^(n)_v`.
    pub fn cell_mass(&self, n: usize, v: i64) -> Result<f64, MeasureError> {
        let h = height_vector(&self.diagram, n, Window::new(v, v))?;
        let count = h.get(v).unwrap_or(0);
        Ok(count as f64 * self.level_value(n, v)?)
    }

    /// `sup_w |(A_n mu^(n+1))_w - mu^(n)_w|` for `n < max_level`, over the
    /// vertices whose successors all carry a value.
    pub fn consistency_residuals(&self, max_level: usize) -> Vec<f64> {
        let window = self.window();
        (0..max_level)
            .map(|n| {
                let mut worst = 0.0f64;
                for w in window.iter() {
                    let Ok(here) = self.level_value(n, w) else { continue };
                    let mut sum = 0.0;
                    let mut complete = true;
                    for e in self.diagram.out_edges(n, w) {
                        match self.level_value(n + 1, e.target) {
                            Ok(x) => sum += x,
                            Err(_) => complete = false,
                        }
                    }
                    if complete {
                        worst = worst.max((sum - here).abs());
                    }
                }
                worst
            })
            .collect()
    }
}

impl PathMeasure for TailInvariantMeasure {
    fn diagram(&self) -> &Diagram {
        &self.diagram
    }

    fn kind(&self) -> MeasureKind {
        MeasureKind::Tail
    }

    fn window(&self) -> Window {
        match &self.data {
            TailData::Stationary(p) => p.t.window,
            TailData::Vectors(vs) => {
                let lo = vs[0].keys().next().copied().unwrap_or(0);
                let hi = vs[0].keys().next_back().copied().unwrap_or(-1);
                Window::new(lo, hi)
            }
        }
    }

    fn value(&self, cylinder: &FinitePath) -> Result<f64, MeasureError> {
        self.level_value(cylinder.len(), cylinder.end())
    }

    /// `H^(1)_v / lambda` for the Perron construction.
    fn shift_factor(&self, v: i64) -> Option<f64> {
        let lambda = self.lambda()?;
        let h: u64 = self.diagram.matrix(0).row(v).iter().map(|&(_, c)| c).sum();
        Some(h as f64 / lambda)
    }

    /// Cylinders with a common range differ by a power of `lambda`.
    fn ratio(&self, num: &FinitePath, den: &FinitePath) -> Result<f64, MeasureError> {
        match self.lambda() {
            Some(lambda) if num.end() == den.end() => {
                self.value(num)?;
                self.value(den)?;
                let k = num.len() as i32 - den.len() as i32;
                Ok(if k >= 0 {
                    1.0 / lambda.powi(k)
                } else {
                    lambda.powi(-k)
                })
            }
            _ => Ok(self.value(num)? / self.value(den)?),
        }
    }

    fn branch_derivative(&self, _e: &Edge) -> Option<f64> {
        self.lambda().map(|l| 1.0 / l)
    }
}
