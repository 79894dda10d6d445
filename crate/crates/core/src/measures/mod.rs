//! Measures on the path space, evaluated on cylinders.
//!
//! Three families are provided: tail-invariant measures given by vector
//! sequences or a Perron eigenvector, Markov measures given by an initial
//! vector and per-level transition weights, and IFS measures given by
//! positive edge weights and a harmonic vector. [`checks`] audits the
//! invariance properties and [`sampling`] draws seeded random paths.

pub mod checks;
pub mod ifs;
pub mod markov;
pub mod sampling;
pub mod tail;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{Diagram, DiagramError, Edge};
use crate::path::{FinitePath, PathError};
use crate::sparse::Window;
use crate::spectral::SpectralError;

pub use checks::{
    check_consistency, check_ifs_fixed_point, check_shift_invariance, check_tail_invariance,
    level_ratio_products, nonstationary_shift_product, shift_condition_tail, ConsistencyReport,
    IfsFixedPointReport, RatioProducts, ShiftConditionReport, ShiftInvarianceReport,
    TailInvarianceReport,
};
pub use ifs::{ifs_measure, EncodingWord, IfsMeasure};
pub use markov::{markov_measure, tail_to_markov, MarkovMeasure, TransitionTable};
pub use sampling::{empirical_check, sample_path, EmpiricalReport, PathSampler, Sampleable};
pub use tail::{stationary_tail_measure, tail_measure_from_vectors, TailInvariantMeasure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("vectors at levels {level} and {} disagree by {residual:e}", level + 1)]
    InconsistentVectors { level: usize, residual: f64 },
    #[error("transitions out of vertex {vertex} at level {level} sum to {sum}")]
    NotStochastic { vertex: i64, level: usize, sum: f64 },
    #[error("weight given for {edge}, which is not an edge of the diagram")]
    SupportMismatch { edge: String },
    #[error("edge {edge} needs a strictly positive weight")]
    NonPositiveWeight { edge: String },
    #[error("negative mass {value} at vertex {vertex} of level {level}")]
    NegativeMass { vertex: i64, level: usize, value: f64 },
    #[error("vertex {vertex} of level {level} has zero mass")]
    ZeroMass { vertex: i64, level: usize },
    #[error("no value for vertex {vertex} of level {level}")]
    MissingVertex { vertex: i64, level: usize },
    #[error("weights are over {found}, the diagram over {expected}")]
    DomainMismatch {
        expected: crate::sparse::VertexDomain,
        found: crate::sparse::VertexDomain,
    },
    #[error("IFS measures need a 0-1 diagram")]
    NotZeroOne,
    #[error("operation needs a stationary diagram")]
    NonStationary,
    #[error("cylinder length {len} exceeds the {max} levels this measure defines")]
    DepthExceeded { len: usize, max: usize },
    #[error("vertex {vertex} lies outside the evaluation window {window}")]
    OutsideWindow { vertex: i64, window: Window },
    #[error("total mass is infinite; give a start vertex")]
    InfiniteMass,
    #[error("transition along edge {index} of the path is zero")]
    ZeroTransition { index: usize },
    #[error("initial vector is not invariant under the first transition matrix (residual {residual:e})")]
    InitialNotInvariant { residual: f64 },
    #[error("no cylinders to sample from")]
    EmptySupport,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Tail,
    Markov,
    Ifs,
}

/// Anything that assigns a nonnegative value to every cylinder.
pub trait PathMeasure {
    fn diagram(&self) -> &Diagram;

    fn kind(&self) -> MeasureKind;

    /// Level-0 vertices on which the measure is known.
    fn window(&self) -> Window;

    fn value(&self, cylinder: &FinitePath) -> Result<f64, MeasureError>;

    /// Predicted ratio `m(sigma^-1 C) / m(C)` for cylinders starting at `v`,
    /// when it depends on `v` only.
    fn shift_factor(&self, v: i64) -> Option<f64>;

    /// `m(num) / m(den)`. Implementations cancel the factors the two
    /// cylinders share instead of dividing rounded values.
    fn ratio(&self, num: &FinitePath, den: &FinitePath) -> Result<f64, MeasureError> {
        Ok(self.value(num)? / self.value(den)?)
    }

    /// The constant value of `m(tau_e C) / m(C)` over cylinders `C` with
    /// `s(C) = r(e)`, when the measure has one.
    fn branch_derivative(&self, _e: &Edge) -> Option<f64> {
        None
    }

    fn as_ifs(&self) -> Option<&IfsMeasure> {
        None
    }
}

/// Closed sum over the measure families, for callers that pick one at runtime.
#[derive(Debug, Clone)]
pub enum AnyMeasure {
    Tail(TailInvariantMeasure),
    Markov(MarkovMeasure),
    Ifs(IfsMeasure),
}

impl AnyMeasure {
    fn inner(&self) -> &dyn PathMeasure {
        match self {
            AnyMeasure::Tail(m) => m,
            AnyMeasure::Markov(m) => m,
            AnyMeasure::Ifs(m) => m,
        }
    }
}

impl PathMeasure for AnyMeasure {
    fn diagram(&self) -> &Diagram {
        self.inner().diagram()
    }

    fn kind(&self) -> MeasureKind {
        self.inner().kind()
    }

    fn window(&self) -> Window {
        self.inner().window()
    }

    fn value(&self, cylinder: &FinitePath) -> Result<f64, MeasureError> {
        self.inner().value(cylinder)
    }

    fn shift_factor(&self, v: i64) -> Option<f64> {
        self.inner().shift_factor(v)
    }

    fn ratio(&self, num: &FinitePath, den: &FinitePath) -> Result<f64, MeasureError> {
        self.inner().ratio(num, den)
    }

    fn branch_derivative(&self, e: &Edge) -> Option<f64> {
        self.inner().branch_derivative(e)
    }

    fn as_ifs(&self) -> Option<&IfsMeasure> {
        self.inner().as_ifs()
    }
}
