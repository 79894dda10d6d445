//! Perron eigenpairs and harmonic vectors of nonnegative sparse matrices.
//!
//! Infinite matrices are solved on a schedule of growing windows. The
//! eigenvalue solver uses Dirichlet truncation (the vector vanishes outside
//! the window), which makes the truncated eigenvalue nondecreasing in the
//! window. The harmonic solver extends by boundary values instead, so that
//! row-stochastic patterns keep the constant vector as a fixed point.

use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{Boundary, LocalOperator, SparseMatrix, VertexDomain, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("no convergence after {max_iter} iterations (residual {residual:e})")]
    NoConvergence { max_iter: usize, residual: f64 },
    #[error("iterate support collapsed at vertex {vertex}; the matrix looks reducible")]
    ReducibleSuspected { vertex: i64 },
    #[error("matrix has spectral radius zero on the window")]
    ZeroSpectralRadius,
    #[error("no positive fixed vector: spectral radius is {spectral_radius}")]
    DegenerateSolution { spectral_radius: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: i64, sum: f64 },
    #[error("{0} requires a finite vertex domain")]
    InfiniteDomain(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Window radii tried in order on infinite domains.
    pub schedule: Vec<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 100_000,
            schedule: vec![8, 16, 32, 64],
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Powers of two from 8 up to `radius`, ending exactly at `radius`.
    pub fn up_to_radius(mut self, radius: u64) -> Self {
        let mut schedule: Vec<u64> = std::iter::successors(Some(8u64), |r| r.checked_mul(2))
            .take_while(|&r| r < radius)
            .collect();
        schedule.push(radius);
        self.schedule = schedule;
        self
    }

    fn windows(&self, domain: VertexDomain) -> Vec<Window> {
        if domain.is_finite() {
            vec![domain.window(0)]
        } else {
            self.schedule.iter().map(|&r| domain.window(r)).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    SumOne,
    SupOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Summability {
    Yes,
    No,
    Unknown,
}

/// A vector indexed by the vertices of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVector {
    pub window: Window,
    pub values: Vec<f64>,
}

impl WindowVector {
    pub fn get(&self, v: i64) -> Option<f64> {
        self.window.index_of(v).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.window.iter().zip(self.values.iter().copied())
    }

    pub fn scaled(&self, c: f64) -> WindowVector {
        WindowVector {
            window: self.window,
            values: self.values.iter().map(|x| x * c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub t: WindowVector,
    pub normalization: Normalization,
    /// `sup |A t - lambda t| / lambda` on the reported window.
    pub residual: f64,
    pub summable: Summability,
    pub iterations: usize,
    /// `(radius, lambda)` for each window of the schedule.
    pub lambda_history: Vec<(u64, f64)>,
    /// `|lambda_last - lambda_previous|` over the schedule; 0 on finite domains.
    pub drift: f64,
    pub window_converged: bool,
    /// `(iteration, residual)` samples from the final window.
    pub trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum TotalMass {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicVector {
    pub q: WindowVector,
    /// `sup |M q - q|` on the window.
    pub residual: f64,
    pub total_mass: TotalMass,
    pub spectral_radius: f64,
    pub iterations: usize,
}

struct PowerResult {
    lambda: f64,
    vec: Vec<f64>,
    residual: f64,
    iterations: usize,
    trace: Vec<(usize, f64)>,
}

fn normalize(v: &mut [f64], norm: Normalization) -> f64 {
    let s = match norm {
        Normalization::SumOne => v.iter().sum::<f64>(),
        Normalization::SupOne => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    };
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    s
}

fn keep_in_trace(k: usize) -> bool {
    k <= 64 || k.is_multiple_of(64)
}

/// Shifted power iteration `t <- (A + I) t` from the all-ones vector. The
/// shift removes the oscillation of periodic matrices without moving the
/// Perron vector.
fn power_iterate(
    op: &LocalOperator,
    norm: Normalization,
    tol: f64,
    max_iter: usize,
) -> Result<PowerResult, SpectralError> {
    let n = op.dim();
    let mut t = vec![1.0; n];
    normalize(&mut t, norm);
    let mut y = vec![0.0; n];
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    for k in 1..=max_iter {
        op.apply(&t, &mut y);
        let lambda = y.iter().sum::<f64>() / t.iter().sum::<f64>();
        if !(lambda > 0.0) {
            return Err(SpectralError::ZeroSpectralRadius);
        }
        residual = y
            .iter()
            .zip(&t)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max)
            / lambda;
        if keep_in_trace(k) {
            trace.push((k, residual));
        }
        if residual < tol {
            if trace.last().map(|&(i, _)| i) != Some(k) {
                trace.push((k, residual));
            }
            return Ok(PowerResult {
                lambda,
                vec: t,
                residual,
                iterations: k,
                trace,
            });
        }
        for (ti, yi) in t.iter_mut().zip(&y) {
            *ti += yi;
        }
        normalize(&mut t, norm);
    }
    Err(SpectralError::NoConvergence { max_iter, residual })
}

fn summability(domain: VertexDomain, t: &WindowVector) -> Summability {
    if domain.is_finite() {
        return Summability::Yes;
    }
    let radius = domain.radius_of(t.window) as i64;
    let half = radius / 2;
    let probes: Vec<f64> = match domain {
        VertexDomain::Naturals => vec![t.get(half).unwrap_or(0.0)],
        _ => vec![t.get(half).unwrap_or(0.0), t.get(-half).unwrap_or(0.0)],
    };
    let max = t.values.iter().fold(0.0f64, |m, x| m.max(*x));
    let far = probes.iter().fold(f64::INFINITY, |m, x| m.min(*x)) / max;
    if far >= 0.05 {
        return Summability::No;
    }
    let total: f64 = t.values.iter().sum();
    let tail: f64 = t
        .iter()
        .filter(|(v, _)| v.abs() > half)
        .map(|(_, x)| x)
        .sum();
    if tail / total < 1e-6 {
        Summability::Yes
    } else {
        Summability::Unknown
    }
}

/// Perron eigenpair of a nonnegative matrix acting on column vectors.
/// For tail-invariant measures pass `A = F^T`.
pub fn perron_eigenpair(a: &SparseMatrix<f64>, cfg: &SolverConfig) -> Result<EigenPair, SpectralError> {
    let domain = a.domain();
    let norm = if domain.is_finite() {
        Normalization::SumOne
    } else {
        Normalization::SupOne
    };
    let mut history = Vec::new();
    let mut last = None;
    for window in cfg.windows(domain) {
        let op = LocalOperator::restrict(a, window, Boundary::Zero);
        let res = power_iterate(&op, norm, cfg.tol, cfg.max_iter)?;
        history.push((domain.radius_of(window), res.lambda));
        last = Some((window, res));
    }
    let (window, res) = last.expect("schedule is nonempty");
    if domain.is_finite() {
        let max = res.vec.iter().fold(0.0f64, |m, x| m.max(*x));
        if let Some(i) = res.vec.iter().position(|&x| x < 10.0 * cfg.tol * max) {
            return Err(SpectralError::ReducibleSuspected {
                vertex: window.vertex_at(i),
            });
        }
    }
    let drift = match history.as_slice() {
        [.., (_, a), (_, b)] => (b - a).abs(),
        _ => 0.0,
    };
    let t = WindowVector {
        window,
        values: res.vec,
    };
    Ok(EigenPair {
        lambda: res.lambda,
        summable: summability(domain, &t),
        t,
        normalization: norm,
        residual: res.residual,
        iterations: res.iterations,
        lambda_history: history,
        drift,
        window_converged: drift < cfg.tol,
        trace: res.trace,
    })
}

/// Positive solution of `M q = q`, normalized to sup one.
pub fn solve_harmonic(m: &SparseMatrix<f64>, cfg: &SolverConfig) -> Result<HarmonicVector, SpectralError> {
    let domain = m.domain();
    let mut masses = Vec::new();
    let mut last = None;
    for window in cfg.windows(domain) {
        let op = LocalOperator::restrict(m, window, Boundary::Clamp);
        let res = match power_iterate(&op, Normalization::SupOne, cfg.tol, cfg.max_iter) {
            Err(SpectralError::ZeroSpectralRadius) => {
                return Err(SpectralError::DegenerateSolution {
                    spectral_radius: 0.0,
                })
            }
            r => r?,
        };
        if (res.lambda - 1.0).abs() > 100.0 * cfg.tol {
            return Err(SpectralError::DegenerateSolution {
                spectral_radius: res.lambda,
            });
        }
        let mut out = vec![0.0; op.dim()];
        op.apply(&res.vec, &mut out);
        let residual = out
            .iter()
            .zip(&res.vec)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        masses.push(res.vec.iter().sum::<f64>());
        last = Some((window, res, residual));
    }
    let (window, res, residual) = last.expect("schedule is nonempty");
    let total_mass = match masses.as_slice() {
        [only] => TotalMass::Finite(*only),
        [.., a, b] if domain.is_finite() || (b - a).abs() <= 1e-6 * b => TotalMass::Finite(*b),
        _ => TotalMass::Infinite,
    };
    Ok(HarmonicVector {
        q: WindowVector {
            window,
            values: res.vec,
        },
        residual,
        total_mass,
        spectral_radius: res.lambda,
        iterations: res.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub q: WindowVector,
    /// False when the chain has more than one closed class.
    pub unique: bool,
    pub closed_classes: Vec<Vec<i64>>,
    pub residual: f64,
}

/// Closed communicating classes of the support graph of a square matrix on
/// a finite window, each sorted, in order of smallest member.
pub fn closed_classes(rows: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    let n = rows.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (i, row) in rows.iter().enumerate() {
        for &(j, x) in row {
            if x > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; n];
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            comp[node.index()] = c;
        }
    }
    let mut out: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter().all(|node| {
                rows[node.index()]
                    .iter()
                    .all(|&(j, x)| x == 0.0 || comp[j] == *c)
            })
        })
        .map(|(_, scc)| {
            let mut members: Vec<usize> = scc.iter().map(|n| n.index()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    out.sort();
    out
}

/// Left fixed probability vector `q P = q` of a row-stochastic matrix on a
/// finite domain. With several closed classes the class distributions are
/// averaged with equal weights and `unique` is false.
pub fn stationary_distribution(
    p: &SparseMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryDistribution, SpectralError> {
    let domain = p.domain();
    if !domain.is_finite() {
        return Err(SpectralError::InfiniteDomain("stationary_distribution"));
    }
    let window = domain.window(0);
    let n = window.len();
    let op = LocalOperator::restrict(p, window, Boundary::Zero);
    for i in 0..n {
        let sum: f64 = op.row(i).iter().map(|&(_, x)| x).sum();
        if (sum - 1.0).abs() > tol.max(1e-12) {
            return Err(SpectralError::NotStochastic {
                row: window.vertex_at(i),
                sum,
            });
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| op.row(i).to_vec()).collect();
    let classes = closed_classes(&rows);
    let mut q = vec![0.0; n];
    for class in &classes {
        let local: BTreeMap<usize, usize> = class.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut x = vec![1.0 / class.len() as f64; class.len()];
        let mut converged = false;
        let mut change = f64::INFINITY;
        for _ in 0..max_iter {
            // lazy chain (P + I) / 2 removes periodicity
            let mut y: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
            for (k, &i) in class.iter().enumerate() {
                for &(j, pij) in &rows[i] {
                    if let Some(&l) = local.get(&j) {
                        y[l] += 0.5 * x[k] * pij;
                    }
                }
            }
            normalize(&mut y, Normalization::SumOne);
            change = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = y;
            if change < tol * 1e-2 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpectralError::NoConvergence {
                max_iter,
                residual: change,
            });
        }
        for (k, &i) in class.iter().enumerate() {
            q[i] += x[k] / classes.len() as f64;
        }
    }
    let mut qp = vec![0.0; n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, pij) in row {
            qp[j] += q[i] * pij;
        }
    }
    let residual = qp.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(StationaryDistribution {
        q: WindowVector { window, values: q },
        unique: classes.len() == 1,
        closed_classes: classes
            .iter()
            .map(|c| c.iter().map(|&i| window.vertex_at(i)).collect())
            .collect(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(rows: &[&[f64]]) -> SparseMatrix<f64> {
        let n = rows.len();
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &x)| (i as i64, j as i64, x)));
        SparseMatrix::explicit(VertexDomain::Finite { count: n }, entries).unwrap()
    }

    fn tridiagonal_z() -> SparseMatrix<f64> {
        SparseMatrix::translation(VertexDomain::Integers { band: 1 }, [(-1, 1.0), (0, 1.0), (1, 1.0)])
            .unwrap()
    }

    /// Post hoc residual by a plain sparse multiply, independent of the
    /// solver's local operator.
    fn recomputed_residual(a: &SparseMatrix<f64>, pair: &EigenPair) -> f64 {
        pair.t
            .iter()
            .map(|(v, tv)| {
                let at: f64 = a.row(v).iter().map(|&(w, x)| x * pair.t.get(w).unwrap_or(0.0)).sum();
                (at - pair.lambda * tv).abs()
            })
            .fold(0.0, f64::max)
            / pair.lambda
    }

    #[test]
    fn all_ones_perron() {
        let a = dense(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let p = perron_eigenpair(&a, &SolverConfig::default()).unwrap();
        assert!((p.lambda - 2.0).abs() < 1e-12);
        assert_eq!(p.t.values, vec![0.5, 0.5]);
        assert!(p.residual < 1e-12);
        assert_eq!(p.summable, Summability::Yes);
    }

    #[test]
    fn fibonacci_perron() {
        let a = dense(&[&[1.0, 1.0], &[1.0, 0.0]]);
        let p = perron_eigenpair(&a, &SolverConfig::default()).unwrap();
        assert!((p.lambda - 1.618_033_988_749_895).abs() < 1e-10);
        assert!((p.t.values[0] - 0.618_034_0).abs() < 1e-7);
        assert!((p.t.values[1] - 0.381_966_0).abs() < 1e-7);
        assert!((recomputed_residual(&a, &p) - p.residual).abs() <= 2e-10);
    }

    #[test]
    fn periodic_matrix_converges() {
        // swap matrix has eigenvalues +1 and -1
        let a = dense(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let p = perron_eigenpair(&a, &SolverConfig::default()).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_integers_approach_three() {
        let a = tridiagonal_z();
        let cfg = SolverConfig::default().up_to_radius(50);
        let p = perron_eigenpair(&a, &cfg).unwrap();
        // Dirichlet truncation on 101 vertices: 1 + 2 cos(pi / 102)
        let exact = 1.0 + 2.0 * (std::f64::consts::PI / 102.0).cos();
        assert!((p.lambda - exact).abs() < 1e-9);
        assert!(3.0 - p.lambda < 2e-3);
        assert_eq!(p.summable, Summability::No);
        assert!(!p.window_converged);
        for w in p.lambda_history.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
        assert!((recomputed_residual(&a, &p) - p.residual).abs() <= 2.0 * cfg.tol);
    }

    #[test]
    fn decaying_pattern_is_summable() {
        // strong pull toward 0 on the naturals: eigenvector decays geometrically
        let a = SparseMatrix::translation(VertexDomain::Naturals, [(-1, 4.0), (1, 0.01)]).unwrap();
        let p = perron_eigenpair(&a, &SolverConfig::default().up_to_radius(32)).unwrap();
        assert_eq!(p.summable, Summability::Yes);
    }

    #[test]
    fn reducible_matrix_is_flagged() {
        let a = dense(&[&[2.0, 1.0], &[0.0, 1.0]]);
        assert!(matches!(
            perron_eigenpair(&a, &SolverConfig::default()),
            Err(SpectralError::ReducibleSuspected { vertex: 1 })
        ));
    }

    #[test]
    fn harmonic_examples() {
        let cfg = SolverConfig::default();
        for m in [
            dense(&[&[0.5, 0.5], &[0.5, 0.5]]),
            dense(&[&[0.6, 0.4], &[0.4, 0.6]]),
        ] {
            let h = solve_harmonic(&m, &cfg).unwrap();
            assert_eq!(h.q.values, vec![1.0, 1.0]);
            assert!(h.residual < 1e-12);
            assert_eq!(h.total_mass, TotalMass::Finite(2.0));
        }
        let m = dense(&[&[0.25, 0.25], &[0.25, 0.25]]);
        match solve_harmonic(&m, &cfg) {
            Err(SpectralError::DegenerateSolution { spectral_radius }) => {
                assert!((spectral_radius - 0.5).abs() < 1e-12)
            }
            other => panic!("expected DegenerateSolution, got {other:?}"),
        }
    }

    #[test]
    fn harmonic_on_integers_has_infinite_mass() {
        let m = SparseMatrix::translation(VertexDomain::Integers { band: 1 }, [(-1, 0.25), (0, 0.5), (1, 0.25)])
            .unwrap();
        let h = solve_harmonic(&m, &SolverConfig::default()).unwrap();
        assert!(h.q.values.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert_eq!(h.total_mass, TotalMass::Infinite);
    }

    #[test]
    fn stationary_examples() {
        let s = stationary_distribution(&dense(&[&[0.5, 0.5], &[0.5, 0.5]]), 1e-12, 100_000).unwrap();
        assert!(s.q.values.iter().all(|&x| (x - 0.5).abs() < 1e-12));
        assert!(s.unique);
        let s = stationary_distribution(&dense(&[&[1.0, 0.0], &[0.0, 1.0]]), 1e-12, 100_000).unwrap();
        assert_eq!(s.q.values, vec![0.5, 0.5]);
        assert!(!s.unique);
        assert_eq!(s.closed_classes, vec![vec![0], vec![1]]);
        let s = stationary_distribution(&dense(&[&[0.9, 0.1], &[0.5, 0.5]]), 1e-12, 100_000).unwrap();
        assert!((s.q.values[0] - 5.0 / 6.0).abs() < 1e-10);
        assert!((s.q.values[1] - 1.0 / 6.0).abs() < 1e-10);
        assert!(matches!(
            stationary_distribution(&dense(&[&[0.5, 0.4], &[0.5, 0.5]]), 1e-12, 100),
            Err(SpectralError::NotStochastic { row: 0, .. })
        ));
    }

    #[test]
    fn transient_states_get_zero_mass() {
        let s = stationary_distribution(&dense(&[&[0.5, 0.5], &[0.0, 1.0]]), 1e-12, 100_000).unwrap();
        assert!(s.q.values[0].abs() < 1e-12);
        assert!(s.unique);
    }

    proptest! {
        #[test]
        fn harmonic_residual_is_scale_invariant(a in 0.05f64..0.95, b in 0.05f64..0.95, c in 0.1f64..10.0) {
            let m = dense(&[&[a, 1.0 - a], &[b, 1.0 - b]]);
            let h = solve_harmonic(&m, &SolverConfig::default()).unwrap();
            let q = h.q.scaled(c);
            let res = (0..2i64).map(|v| {
                let mq: f64 = m.row(v).iter().map(|&(w, x)| x * q.get(w).unwrap()).sum();
                (mq - q.get(v).unwrap()).abs()
            }).fold(0.0, f64::max);
            prop_assert!(res <= c * 2e-10);
        }

        #[test]
        fn perron_residual_matches_recomputation(x in proptest::collection::vec(0.1f64..5.0, 9)) {
            let rows: Vec<&[f64]> = x.chunks(3).collect();
            let a = dense(&rows);
            let cfg = SolverConfig::default();
            let p = perron_eigenpair(&a, &cfg).unwrap();
            prop_assert!(p.t.values.iter().all(|&t| t > 0.0));
            prop_assert!((recomputed_residual(&a, &p) - p.residual).abs() <= 2.0 * cfg.tol);
        }
    }
}
