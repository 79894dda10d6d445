//! Fixtures shared by the benchmarks.

use pathmeas::kernel::disintegrate;
use pathmeas::measures::{ifs_measure, stationary_tail_measure, tail_to_markov};
use pathmeas::{
    CellKernel, Diagram, EdgeMeasure, IfsMeasure, MarkovMeasure, SolverConfig, SparseMatrix, TailInvariantMeasure,
    VertexDomain,
};

/// Stationary diagram on `n` vertices with an edge between every ordered pair.
pub fn complete(n: usize) -> Diagram {
    Diagram::from_dense(&vec![vec![1; n]; n]).expect("square matrix")
}

/// Stationary diagram on the integers with edges `w -> w - 1, w, w + 1`.
pub fn tridiagonal_z() -> Diagram {
    let m = SparseMatrix::translation(VertexDomain::Integers { band: 1 }, [(-1, 1), (0, 1), (1, 1)])
        .expect("band 1 pattern");
    Diagram::stationary(m)
}

pub fn tail(d: &Diagram) -> TailInvariantMeasure {
    stationary_tail_measure(d, &SolverConfig::default()).expect("Perron measure")
}

pub fn markov(n: usize) -> MarkovMeasure {
    tail_to_markov(&tail(&complete(n))).expect("finite tail measure")
}

/// IFS on the complete diagram with `p_(w -> v) = a_w / sum(a)`, `a_w = 1 + w mod 3`.
/// The weight matrix has rank one and spectral radius 1, so `q` is positive.
pub fn ifs(n: usize) -> IfsMeasure {
    let d = complete(n);
    let a = |w: i64| (1 + w % 3) as f64;
    let total: f64 = (0..n as i64).map(a).sum();
    let entries = (0..n as i64).flat_map(move |v| (0..n as i64).map(move |w| (v, w, a(w) / total)));
    let w = SparseMatrix::explicit(d.domain(), entries).expect("finite weights");
    ifs_measure(&d, w, &SolverConfig::default()).expect("IFS measure")
}

/// Stationary kernel on `n` cells with uneven, strictly positive rows.
pub fn kernel(n: usize) -> CellKernel {
    let labels: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let raw: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y, 1.0 + ((3 * x + 7 * y) % 5) as f64)))
        .collect();
    let total: f64 = raw.iter().map(|e| e.2).sum();
    let edges = raw
        .iter()
        .map(|&(x, y, m)| (labels[x].clone(), labels[y].clone(), m / total))
        .collect();
    let p = EdgeMeasure::new(labels.clone(), labels, edges).expect("onto edge measure");
    disintegrate(&p).expect("positive marginal")
}
