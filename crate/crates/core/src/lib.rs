//! Measures on path spaces of generalized Bratteli diagrams.
//!
//! A diagram is a sequence of row-finite incidence matrices over a finite or
//! countable vertex set. The crate builds tail-invariant, Markov and IFS
//! measures on its path space, audits them on cylinder sets, studies the
//! semibranching function system of a stationary 0-1 diagram, and
//! discretizes measurable diagrams by finite cell partitions.

// Checks are written as `!(dev <= tol)` so that NaN deviations fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagram;
pub mod io;
pub mod kernel;
pub mod measures;
pub mod path;
pub mod sfs;
pub mod sparse;
pub mod spectral;

use thiserror::Error;

pub use diagram::{
    height_vector, validate_diagram, Diagram, DiagramError, DiagramKind, Edge, HeightVector, IncidenceMatrix,
    ParseEdgeError, ValidationReport,
};
pub use io::{parse_diagram, parse_kernel, parse_measure, DiagramSpec, IoError, KernelSpec, MeasureSpec};
pub use kernel::{CellKernel, EdgeMeasure, KernelError, MeasurableIfsMeasure};
pub use measures::{AnyMeasure, IfsMeasure, MarkovMeasure, MeasureError, PathMeasure, TailInvariantMeasure};
pub use path::{FinitePath, PathError};
pub use sfs::{SemibranchingSystem, SfsError};
pub use sparse::{SparseError, SparseMatrix, VertexDomain, Window};
pub use spectral::{EigenPair, SolverConfig, SpectralError};

/// Any error raised by the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Sfs(#[from] SfsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] IoError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
