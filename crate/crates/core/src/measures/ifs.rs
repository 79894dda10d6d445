//! IFS measures on a stationary 0-1 diagram.
//!
//! Edge weights `p_e > 0` need not sum to one. The vertex matrix
//! `M_{w,v} = p_{w->v}` must have a positive fixed vector `q`, and then
//! `nu([w]) = q_w` and `nu([f_0..f_{n-1}]) = p_{f_0} ... p_{f_{n-1}} q_{r(f_{n-1})}`
//! satisfy `nu = sum_e p_e nu o tau_e^-1`.

use serde::{Deserialize, Serialize};

use crate::diagram::{Diagram, Edge};
use crate::path::{validate_path, FinitePath};
use crate::sparse::{SparseMatrix, Window};
use crate::spectral::{solve_harmonic, HarmonicVector, SolverConfig, TotalMass, WindowVector};

use super::{MeasureError, MeasureKind, PathMeasure};

#[derive(Debug, Clone)]
pub struct IfsMeasure {
    diagram: Diagram,
    /// Indexed like the incidence matrix: `(target, source)`.
    weights: SparseMatrix<f64>,
    harmonic: HarmonicVector,
}

/// Check the weights against the diagram and solve `M q = q`.
pub fn ifs_measure(
    diagram: &Diagram,
    weights: SparseMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<IfsMeasure, MeasureError> {
    if !diagram.is_zero_one() {
        return Err(MeasureError::NotZeroOne);
    }
    if !diagram.is_stationary() {
        return Err(MeasureError::NonStationary);
    }
    if weights.domain() != diagram.domain() {
        return Err(MeasureError::DomainMismatch {
            expected: diagram.domain(),
            found: weights.domain(),
        });
    }
    let f = diagram.matrix(0);
    let band = f.bandwidth().max(weights.bandwidth());
    for v in diagram.domain().window(2 * band + 2).iter() {
        for (w, p) in weights.row(v) {
            let e = Edge::new(0, w, v, 0);
            if f.get(v, w).is_none() {
                return Err(MeasureError::SupportMismatch { edge: e.to_string() });
            }
            if !(p > 0.0) {
                return Err(MeasureError::NonPositiveWeight { edge: e.to_string() });
            }
        }
        for (w, _) in f.row(v) {
            if weights.get(v, w).is_none() {
                return Err(MeasureError::NonPositiveWeight {
                    edge: Edge::new(0, w, v, 0).to_string(),
                });
            }
        }
    }
    let harmonic = solve_harmonic(&weights.transpose(), cfg)?;
    Ok(IfsMeasure {
        diagram: diagram.clone(),
        weights,
        harmonic,
    })
}

impl IfsMeasure {
    /// Assemble without checks or solving; `q` need not be harmonic. Used to
    /// study how the fixed-point identity degrades under perturbation.
    pub fn from_parts(diagram: Diagram, weights: SparseMatrix<f64>, q: WindowVector) -> Self {
        IfsMeasure {
            diagram,
            weights,
            harmonic: HarmonicVector {
                q,
                residual: f64::NAN,
                total_mass: TotalMass::Infinite,
                spectral_radius: f64::NAN,
                iterations: 0,
            },
        }
    }

    pub fn weights(&self) -> &SparseMatrix<f64> {
        &self.weights
    }

    pub fn harmonic(&self) -> &HarmonicVector {
        &self.harmonic
    }

    pub fn q(&self, v: i64) -> Option<f64> {
        self.harmonic.q.get(v)
    }

    pub fn total_mass(&self) -> TotalMass {
        self.harmonic.total_mass
    }

    pub fn weight(&self, e: &Edge) -> f64 {
        self.weights.get(e.target, e.source).unwrap_or(0.0)
    }

    /// `c_w = sum of p_e over edges with r(e) = w`.
    pub fn column_sum(&self, w: i64) -> f64 {
        self.weights.row(w).iter().map(|&(_, p)| p).sum()
    }

    fn q_or_err(&self, v: i64) -> Result<f64, MeasureError> {
        self.q(v).ok_or(MeasureError::OutsideWindow {
            vertex: v,
            window: self.harmonic.q.window,
        })
    }

    /// Value of the cylinder named by an encoding word; inadmissible words
    /// name the empty set.
    pub fn word_value(&self, word: &EncodingWord) -> Result<f64, MeasureError> {
        match word.to_path(&self.diagram) {
            Some(p) => self.value(&p),
            None => Ok(0.0),
        }
    }
}

impl PathMeasure for IfsMeasure {
    fn diagram(&self) -> &Diagram {
        &self.diagram
    }

    fn kind(&self) -> MeasureKind {
        MeasureKind::Ifs
    }

    fn window(&self) -> Window {
        self.harmonic.q.window
    }

    fn value(&self, cylinder: &FinitePath) -> Result<f64, MeasureError> {
        let mut x = self.q_or_err(cylinder.end())?;
        for e in cylinder.edges() {
            x *= self.weight(e);
        }
        Ok(x)
    }

    fn shift_factor(&self, v: i64) -> Option<f64> {
        Some(self.column_sum(v))
    }

    /// Cylinders with a common range share the factor `q_r` and the weights
    /// of their common edge suffix.
    fn ratio(&self, num: &FinitePath, den: &FinitePath) -> Result<f64, MeasureError> {
        if num.end() != den.end() {
            return Ok(self.value(num)? / self.value(den)?);
        }
        self.value(num)?;
        self.value(den)?;
        let (a, b) = (num.edges(), den.edges());
        let common = a
            .iter()
            .rev()
            .zip(b.iter().rev())
            .take_while(|(x, y)| x.same_arrow(y))
            .count();
        let product = |edges: &[Edge]| edges.iter().map(|e| self.weight(e)).product::<f64>();
        Ok(product(&a[..a.len() - common]) / product(&b[..b.len() - common]))
    }

    fn branch_derivative(&self, e: &Edge) -> Option<f64> {
        Some(self.weight(e))
    }

    fn as_ifs(&self) -> Option<&IfsMeasure> {
        Some(self)
    }
}

/// A finite word over the edge alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingWord {
    pub letters: Vec<Edge>,
}

impl EncodingWord {
    /// `r(w_i) = s(w_{i+1})` for consecutive letters.
    pub fn is_admissible(&self) -> bool {
        self.letters.windows(2).all(|w| w[0].target == w[1].source)
    }

    /// The cylinder `tau_{w_0} o ... o tau_{w_{n-1}}(X)`, or `None` when the
    /// composition is empty.
    pub fn to_path(&self, d: &Diagram) -> Option<FinitePath> {
        if !self.is_admissible() {
            return None;
        }
        let edges: Vec<Edge> = self
            .letters
            .iter()
            .enumerate()
            .map(|(i, e)| e.at_level(i))
            .collect();
        validate_path(d, &edges).ok()
    }
}
