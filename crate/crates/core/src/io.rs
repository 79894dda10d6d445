//! JSON input formats for diagrams, measures and cell kernels.
//!
//! Incidence triplets are `[target, source, count]`. On `naturals` and
//! `integers` a triplet describes the translation-invariant pattern: it puts
//! `count` edges from every `w` to `w + (target - source)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{Diagram, DiagramError, DiagramKind, IncidenceMatrix};
use crate::kernel::{EdgeMeasure, KernelError};
use crate::measures::{
    ifs_measure, markov_measure, stationary_tail_measure, tail_measure_from_vectors, AnyMeasure, MeasureError,
    TransitionTable,
};
use crate::sparse::{Entry, SparseError, SparseMatrix, VertexDomain};
use crate::spectral::{stationary_distribution, SolverConfig, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Json(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub triplets: Vec<(i64, i64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramSpec {
    pub kind: DiagramKind,
    pub vertices: VertexDomain,
    pub matrices: Vec<MatrixSpec>,
}

/// Explicit entries on finite domains, translation offsets otherwise.
/// Repeated positions are added up.
fn matrix_from_triplets<T: Entry + Default + std::ops::Add<Output = T>>(
    domain: VertexDomain,
    triplets: impl IntoIterator<Item = (i64, i64, T)>,
) -> Result<SparseMatrix<T>, IoError> {
    if domain.is_finite() {
        let mut acc: BTreeMap<(i64, i64), T> = BTreeMap::new();
        for (v, w, x) in triplets {
            let slot = acc.entry((v, w)).or_default();
            *slot = *slot + x;
        }
        Ok(SparseMatrix::explicit(domain, acc.into_iter().map(|((v, w), x)| (v, w, x)))?)
    } else {
        let mut acc: BTreeMap<i64, T> = BTreeMap::new();
        for (v, w, x) in triplets {
            let slot = acc.entry(v - w).or_default();
            *slot = *slot + x;
        }
        Ok(SparseMatrix::translation(domain, acc)?)
    }
}

impl DiagramSpec {
    pub fn build(&self) -> Result<Diagram, IoError> {
        let matrices = self
            .matrices
            .iter()
            .map(|m| matrix_from_triplets(self.vertices, m.triplets.iter().copied()))
            .collect::<Result<Vec<IncidenceMatrix>, _>>()?;
        match self.kind {
            DiagramKind::Stationary => match <[IncidenceMatrix; 1]>::try_from(matrices) {
                Ok([m]) => Ok(Diagram::stationary(m)),
                Err(ms) => Err(IoError::Invalid(format!(
                    "a stationary diagram takes exactly one matrix, found {}",
                    ms.len()
                ))),
            },
            DiagramKind::Sequence => Ok(Diagram::sequence(matrices)?),
        }
    }

    pub fn from_diagram(d: &Diagram) -> Self {
        DiagramSpec {
            kind: d.kind(),
            vertices: d.domain(),
            matrices: d
                .matrices()
                .iter()
                .map(|m| MatrixSpec {
                    triplets: m.stored_entries(),
                })
                .collect(),
        }
    }
}

pub fn parse_diagram(json: &str) -> Result<Diagram, IoError> {
    serde_json::from_str::<DiagramSpec>(json)?.build()
}

pub fn diagram_to_json(d: &Diagram) -> String {
    serde_json::to_string(&DiagramSpec::from_diagram(d)).expect("diagram serializes")
}

/// `[source, target, p]` or `[source, target, index, p]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionEntry {
    Indexed(i64, i64, u32, f64),
    Plain(i64, i64, f64),
}

impl TransitionEntry {
    fn key(self) -> ((i64, i64, u32), f64) {
        match self {
            TransitionEntry::Indexed(s, t, k, p) => ((s, t, k), p),
            TransitionEntry::Plain(s, t, p) => ((s, t, 0), p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MeasureSpec {
    /// The Perron measure when `vectors` is absent, else explicit level
    /// vectors of `[vertex, value]` pairs.
    Tail {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vectors: Option<Vec<Vec<(i64, f64)>>>,
    },
    /// Without `q` a single finite-domain level uses its stationary distribution.
    Markov {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<(i64, f64)>>,
        levels: Vec<Vec<TransitionEntry>>,
    },
    /// Weight triplets `[target, source, p]`, read like incidence triplets.
    Ifs { weights: Vec<(i64, i64, f64)> },
}

impl MeasureSpec {
    /// `cfg.tol` also bounds the consistency residual of explicit tail vectors.
    pub fn build(&self, d: &Diagram, cfg: &SolverConfig) -> Result<AnyMeasure, IoError> {
        match self {
            MeasureSpec::Tail { vectors: None } => Ok(AnyMeasure::Tail(stationary_tail_measure(d, cfg)?)),
            MeasureSpec::Tail { vectors: Some(vs) } => {
                let vs = vs.iter().map(|v| v.iter().copied().collect()).collect();
                Ok(AnyMeasure::Tail(tail_measure_from_vectors(d, vs, cfg.tol)?))
            }
            MeasureSpec::Markov { q, levels } => {
                let tables: Vec<TransitionTable> = levels
                    .iter()
                    .map(|l| l.iter().map(|e| e.key()).collect())
                    .collect();
                let q = match q {
                    Some(q) => q.iter().copied().collect(),
                    None => stationary_q(d, &tables, cfg)?,
                };
                Ok(AnyMeasure::Markov(markov_measure(d, q, tables)?))
            }
            MeasureSpec::Ifs { weights } => {
                let w = matrix_from_triplets(d.domain(), weights.iter().copied())?;
                Ok(AnyMeasure::Ifs(ifs_measure(d, w, cfg)?))
            }
        }
    }
}

fn stationary_q(d: &Diagram, tables: &[TransitionTable], cfg: &SolverConfig) -> Result<BTreeMap<i64, f64>, IoError> {
    let [table] = tables else {
        return Err(IoError::Invalid(
            "q may only be omitted for a single transition level".into(),
        ));
    };
    if !d.domain().is_finite() {
        return Err(IoError::Invalid("q may only be omitted on a finite vertex set".into()));
    }
    let mut p: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for (&(s, t, _), &x) in table {
        *p.entry((s, t)).or_default() += x;
    }
    let p = SparseMatrix::explicit(d.domain(), p.into_iter().map(|((s, t), x)| (s, t, x)))?;
    let sd = stationary_distribution(&p, cfg.tol, cfg.max_iter)?;
    Ok(sd.q.iter().collect())
}

pub fn parse_measure(json: &str, d: &Diagram, cfg: &SolverConfig) -> Result<AnyMeasure, IoError> {
    serde_json::from_str::<MeasureSpec>(json)?.build(d, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub cells0: Vec<String>,
    pub cells1: Vec<String>,
    pub edges: Vec<(String, String, f64)>,
    /// Harmonic function over `cells1`; `q = 1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn build(&self) -> Result<EdgeMeasure, IoError> {
        Ok(EdgeMeasure::new(
            self.cells0.clone(),
            self.cells1.clone(),
            self.edges.clone(),
        )?)
    }
}

pub fn parse_kernel(json: &str) -> Result<KernelSpec, IoError> {
    Ok(serde_json::from_str(json)?)
}
