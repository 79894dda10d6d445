//! Frozen expected values, each worked out by hand from a closed form and
//! written down as a literal. A change to any of them is a behavior change.

use std::collections::BTreeMap;

use pathmeas::diagram::{edge_graph_01, is_irreducible, Irreducibility};
use pathmeas::kernel::{
    disintegrate, fixed_point_iterate, harmonic_check, measurable_ifs_measure, solve_harmonic_kernel, CellCylinder,
    CellKernel, CylinderTable, EdgeMeasure,
};
use pathmeas::measures::{
    check_ifs_fixed_point, check_shift_invariance, check_tail_invariance, empirical_check, ifs_measure,
    level_ratio_products, markov_measure, shift_condition_tail, stationary_tail_measure, tail_measure_from_vectors,
    tail_to_markov, IfsMeasure, PathMeasure, Sampleable, TailInvariantMeasure, TransitionTable,
};
use pathmeas::path::{cell_size, dist, one_edge_extensions, prepend, FinitePath};
use pathmeas::sfs::{build_sfs, ck_matrix, preimage_count, rn_derivative};
use pathmeas::spectral::{perron_eigenpair, solve_harmonic, stationary_distribution, SpectralError, Summability};
use pathmeas::{height_vector, Diagram, Edge, MeasureError, SolverConfig, SparseMatrix, VertexDomain};

const PHI: f64 = 1.618_033_988_749_895;
const INV_PHI: f64 = 0.618_033_988_749_895;
const INV_PHI2: f64 = 0.381_966_011_250_105;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() < tol, "{a} vs {b} (tol {tol})");
}

fn fib() -> Diagram {
    Diagram::from_dense(&[vec![1, 1], vec![1, 0]]).unwrap()
}

fn ones() -> Diagram {
    Diagram::from_dense(&[vec![1, 1], vec![1, 1]]).unwrap()
}

fn tridiagonal() -> Diagram {
    let m = SparseMatrix::translation(VertexDomain::Integers { band: 1 }, [(-1, 1u64), (0, 1), (1, 1)]).unwrap();
    Diagram::stationary(m)
}

fn path(s: &str, d: &Diagram) -> FinitePath {
    FinitePath::parse(s, d).unwrap()
}

fn cfg() -> SolverConfig {
    SolverConfig::default().with_tol(1e-14)
}

fn tail(d: &Diagram) -> TailInvariantMeasure {
    stationary_tail_measure(d, &cfg()).unwrap()
}

fn dense2(rows: [[f64; 2]; 2]) -> SparseMatrix<f64> {
    let entries = (0..2).flat_map(|i| (0..2).map(move |j| (i as i64, j as i64, rows[i][j])));
    SparseMatrix::explicit(VertexDomain::Finite { count: 2 }, entries).unwrap()
}

/// `p[source][target]` stored as `(target, source)`.
fn ifs(p: [[f64; 2]; 2]) -> Result<IfsMeasure, MeasureError> {
    let entries = (0..2).flat_map(|s| (0..2).map(move |t| (t as i64, s as i64, p[s][t])));
    let w = SparseMatrix::explicit(VertexDomain::Finite { count: 2 }, entries).unwrap();
    ifs_measure(&ones(), w, &cfg())
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

// diagram

#[test]
fn fibonacci_heights() {
    let w = fib().default_window();
    let h1 = height_vector(&fib(), 1, w).unwrap();
    assert_eq!(h1.values, BTreeMap::from([(0, 2), (1, 1)]));
    let h2 = height_vector(&fib(), 2, w).unwrap();
    assert_eq!(h2.values, BTreeMap::from([(0, 3), (1, 2)]));
}

#[test]
fn edge_graphs() {
    let g = edge_graph_01(&ones()).unwrap();
    assert_eq!(g.edges.len(), 4);
    assert!((0..4).all(|i| g.successor_row(i).len() == 2));

    let g = edge_graph_01(&fib()).unwrap();
    let labels: Vec<String> = g.edges.iter().map(|e| e.to_string()).collect();
    assert_eq!(labels, ["0->0", "0->1", "1->0"]);
    let sums: Vec<usize> = (0..3).map(|i| g.successor_row(i).len()).collect();
    assert_eq!(sums, [2, 1, 2]);
}

#[test]
fn irreducibility() {
    assert_eq!(is_irreducible(&fib(), fib().default_window(), 4), Irreducibility::Yes);
    // Within a window of radius 4, every pair is joined by a confined path of length <= 8.
    let z = tridiagonal();
    assert_eq!(is_irreducible(&z, z.domain().window(4), 1), Irreducibility::Unknown);
    assert_eq!(is_irreducible(&z, z.domain().window(4), 16), Irreducibility::Yes);
}

// path space

#[test]
fn metric_halves_under_a_common_prepended_edge() {
    let d = ones();
    let x = path("0-1-1-0", &d);
    let y = path("0-1-0-0", &d);
    // First disagreement at edge 1.
    close(dist(&x, &y).value(), 0.5, 1e-15);
    let e = Edge::new(0, 1, 0, 0);
    let (px, py) = (prepend(e, &x).unwrap(), prepend(e, &y).unwrap());
    close(dist(&px, &py).value(), 0.25, 1e-15);
}

#[test]
fn extensions_and_cells() {
    let d = fib();
    assert_eq!(one_edge_extensions(&d, &path("0-1", &d)).len(), 1);
    assert_eq!(one_edge_extensions(&d, &path("0-0", &d)).len(), 2);
    assert_eq!(cell_size(&d, 1, 0).unwrap(), 2);
    assert_eq!(cell_size(&d, 1, 1).unwrap(), 1);
}

// spectral

#[test]
fn fibonacci_perron_pair() {
    let a = fib().matrix(0).map(|x| x as f64).transpose();
    let pair = perron_eigenpair(&a, &cfg()).unwrap();
    close(pair.lambda, PHI, 1e-12);
    close(pair.t.values[0], INV_PHI, 1e-12);
    close(pair.t.values[1], INV_PHI2, 1e-12);
    assert_eq!(pair.summable, Summability::Yes);
}

#[test]
fn tridiagonal_eigenvalue_tends_to_three() {
    let a = tridiagonal().matrix(0).map(|x| x as f64).transpose();
    let pair = perron_eigenpair(&a, &SolverConfig::default().up_to_radius(50)).unwrap();
    // Dirichlet truncation to 101 vertices: 1 + 2 cos(pi / 102).
    close(pair.lambda, 1.0 + 2.0 * (std::f64::consts::PI / 102.0).cos(), 1e-3);
    assert!(pair.lambda < 3.0 && pair.lambda > 2.99);
    assert_eq!(pair.summable, Summability::No);
}

#[test]
fn degenerate_harmonic_problem() {
    match solve_harmonic(&dense2([[0.25, 0.25], [0.25, 0.25]]), &cfg()) {
        Err(SpectralError::DegenerateSolution { spectral_radius }) => close(spectral_radius, 0.5, 1e-9),
        other => panic!("expected DegenerateSolution, got {other:?}"),
    }
}

#[test]
fn two_state_stationary_distribution() {
    let sd = stationary_distribution(&dense2([[0.9, 0.1], [0.5, 0.5]]), 1e-14, 100_000).unwrap();
    close(sd.q.values[0], 5.0 / 6.0, 1e-12);
    close(sd.q.values[1], 1.0 / 6.0, 1e-12);
    assert!(sd.unique);
}

// measures

#[test]
fn explicit_tail_vectors() {
    let halves: Vec<BTreeMap<i64, f64>> = (0..6)
        .map(|n| {
            let x = 0.5f64.powi(n + 1);
            BTreeMap::from([(0, x), (1, x)])
        })
        .collect();
    assert!(tail_measure_from_vectors(&ones(), halves, 1e-15).is_ok());

    let golden: Vec<BTreeMap<i64, f64>> = (0..6)
        .map(|n| BTreeMap::from([(0, INV_PHI / PHI.powi(n)), (1, INV_PHI2 / PHI.powi(n))]))
        .collect();
    assert!(tail_measure_from_vectors(&fib(), golden, 1e-12).is_ok());
}

#[test]
fn fibonacci_tail_values() {
    let d = fib();
    let m = tail(&d);
    close(m.value(&path("0-0", &d)).unwrap(), 0.381_966_011_250_105, 1e-12);
    close(m.value(&path("1-0", &d)).unwrap(), 0.381_966_011_250_105, 1e-12);
    close(m.cell_mass(1, 0).unwrap(), 0.763_932_022_500_210, 1e-12);
}

#[test]
fn tail_to_markov_transitions() {
    let m = tail_to_markov(&tail(&ones())).unwrap();
    close(m.initial(0).unwrap(), 0.5, 1e-12);
    close(m.transition(0, &Edge::new(0, 0, 1, 0)).unwrap(), 0.5, 1e-12);

    let d = fib();
    let tm = tail(&d);
    let m = tail_to_markov(&tm).unwrap();
    close(m.transition(0, &Edge::new(0, 0, 0, 0)).unwrap(), INV_PHI, 1e-12);
    close(m.transition(0, &Edge::new(0, 0, 1, 0)).unwrap(), INV_PHI2, 1e-12);
    for len in 0..=4 {
        for c in pathmeas::path::enumerate_paths(&d, len, d.default_window()) {
            close(m.value(&c).unwrap(), tm.value(&c).unwrap(), 1e-12);
        }
    }
}

#[test]
fn ifs_closed_forms() {
    let sym = ifs([[0.5, 0.5], [0.5, 0.5]]).unwrap();
    assert_eq!((sym.q(0), sym.q(1)), (Some(1.0), Some(1.0)));
    close(sym.value(&path("0-1-1", &ones())).unwrap(), 0.25, 1e-15);
    match sym.total_mass() {
        pathmeas::spectral::TotalMass::Finite(t) => close(t, 2.0, 1e-12),
        other => panic!("expected finite mass, got {other:?}"),
    }

    let asym = ifs([[0.6, 0.4], [0.4, 0.6]]).unwrap();
    close(asym.value(&path("0-0", &ones())).unwrap(), 0.6, 1e-12);
    close(asym.value(&path("1-0", &ones())).unwrap(), 0.4, 1e-12);

    assert!(ifs([[0.25, 0.25], [0.25, 0.25]]).is_err());
}

#[test]
fn ifs_audits() {
    let sym = ifs([[0.5, 0.5], [0.5, 0.5]]).unwrap();
    let asym = ifs([[0.6, 0.4], [0.4, 0.6]]).unwrap();
    assert!(check_ifs_fixed_point(&sym, 4, 1e-12).max_abs_deviation < 1e-12);
    assert!(check_ifs_fixed_point(&asym, 4, 1e-12).max_abs_deviation < 1e-12);

    close(check_tail_invariance(&asym, 1, 1e-12).max_spread, 0.2, 1e-12);
    assert_eq!(check_tail_invariance(&sym, 1, 1e-12).max_spread, 0.0);
    assert!(check_shift_invariance(&asym, 3, 1e-12).unwrap().invariant);
}

#[test]
fn fibonacci_shift_factors() {
    let m = tail(&fib());
    let r = check_shift_invariance(&m, 3, 1e-12).unwrap();
    assert!(!r.invariant);
    for f in &r.factors {
        let expected = if f.vertex == 0 { 2.0 / PHI } else { 1.0 / PHI };
        close(f.measured, expected, 1e-12);
    }
}

#[test]
fn shift_condition() {
    let r = shift_condition_tail(&fib(), &cfg()).unwrap();
    assert!(!r.holds);
    assert!(r.violators.contains(&1));
    let z = shift_condition_tail(&tridiagonal(), &SolverConfig::default().up_to_radius(64)).unwrap();
    assert!(z.holds, "{:?}", z.violators);
}

#[test]
fn empirical_frequencies_of_symmetric_ifs() {
    let sym = ifs([[0.5, 0.5], [0.5, 0.5]]).unwrap();
    let r = empirical_check(Sampleable::Ifs(&sym, None), 3, 100_000, 7).unwrap();
    assert!(r.max_abs_z < 4.0, "{r:?}");
}

fn chain(levels: Vec<[f64; 2]>) -> pathmeas::measures::MarkovMeasure {
    let tables = levels
        .into_iter()
        .map(|[a, b]| TransitionTable::from([((0, 0, 0), a), ((0, 1, 0), 1.0 - a), ((1, 0, 0), b), ((1, 1, 0), 1.0 - b)]))
        .collect();
    markov_measure(&ones(), BTreeMap::from([(0, 0.5), (1, 0.5)]), tables).unwrap()
}

#[test]
fn level_ratio_verdicts() {
    let d = ones();
    let x = path(&vec!["0"; 70].join("-"), &d);

    let alternating = chain((0..70).map(|i| if i % 2 == 0 { [0.5, 0.5] } else { [0.7, 0.5] }).collect());
    let r = level_ratio_products(&alternating, &x, 64, 1e-6).unwrap();
    assert!(!r.converges && !r.converges_to_one);

    // a_i = 1/2 + 2^-(i+2): the products telescope to a_(k+1) / a_1 -> 0.5 / 0.625.
    let geometric = chain((0..70).map(|i| [0.5 + 0.5f64.powi(i + 2), 0.5]).collect());
    let r = level_ratio_products(&geometric, &x, 64, 1e-6).unwrap();
    assert!(r.quasi_stationary);
    close(r.limit.unwrap(), 0.8, 1e-12);
}

// semibranching function systems

#[test]
fn cuntz_krieger_sets() {
    let s = build_sfs(&fib()).unwrap();
    let name = |e: &Edge| e.to_string();
    let sets: Vec<Vec<String>> = s
        .edges()
        .iter()
        .map(|e| s.ck_set_of(e).unwrap().iter().map(name).collect())
        .collect();
    assert_eq!(sets, [vec!["0->0", "0->1"], vec!["1->0"], vec!["0->0", "0->1"]]);
    assert_eq!(ck_matrix(&s).row_sums(), [2, 1, 2]);

    let ck = ck_matrix(&build_sfs(&ones()).unwrap());
    assert_eq!(ck.row_sums(), [2; 4]);
    assert_eq!(ck.col_sums(), [2; 4]);
}

#[test]
fn radon_nikodym_constants() {
    let e = Edge::new(0, 1, 0, 0);
    let d = ones();
    let x = path("0-1-0-0-1-1", &d);
    let r = rn_derivative(&tail(&d), &e, &x, 5, 1e-12).unwrap();
    assert!(r.sequence.iter().all(|&s| (s - 0.5).abs() < 1e-12));

    let markov = chain(vec![[0.5, 0.5]]);
    let r = rn_derivative(&markov, &e, &x, 5, 1e-12).unwrap();
    assert!(r.sequence.iter().all(|&s| (s - 0.5).abs() < 1e-12));

    let d = fib();
    let x = path("0-0-1-0-0-1", &d);
    let r = rn_derivative(&tail(&d), &e, &x, 5, 1e-12).unwrap();
    assert!(r.sequence.iter().all(|&s| (s - INV_PHI).abs() < 1e-12));
}

#[test]
fn preimage_counts() {
    let d = fib();
    assert_eq!(preimage_count(&d, &path("0-1", &d)).unwrap(), 2);
    assert_eq!(preimage_count(&d, &path("1-0", &d)).unwrap(), 1);
}

// kernel

fn example_kernel() -> CellKernel {
    let cells = labels(&["0", "1"]);
    CellKernel::from_rows(cells.clone(), cells, vec![0.5, 0.5], vec![vec![0.6, 0.4], vec![0.5, 0.5]]).unwrap()
}

#[test]
fn disintegration_of_atoms() {
    let e = |x: &str, y: &str, m| (x.to_string(), y.to_string(), m);
    let p = EdgeMeasure::new(
        labels(&["0", "1"]),
        labels(&["0", "1"]),
        vec![e("0", "0", 0.3), e("0", "1", 0.2), e("1", "0", 0.25), e("1", "1", 0.25)],
    )
    .unwrap();
    let k = disintegrate(&p).unwrap();
    assert_eq!(k.marginal(), [0.5, 0.5]);
    let rows = k.dense_rows();
    close(rows[0][0], 0.6, 1e-15);
    close(rows[0][1], 0.4, 1e-15);
    close(rows[1][0], 0.5, 1e-15);
    close(rows[1][1], 0.5, 1e-15);
}

#[test]
fn harmonicity_residual() {
    let r = harmonic_check(&example_kernel(), &[2.0, 1.0], 1e-12).unwrap();
    assert!(!r.pass);
    close(r.residuals[0], 0.4, 1e-12);
}

#[test]
fn reducible_kernel_has_two_closed_classes() {
    let cells = labels(&["a", "b", "c"]);
    let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.5, 0.5, 0.0]];
    let k = CellKernel::from_rows(cells.clone(), cells, vec![0.4, 0.4, 0.2], rows).unwrap();
    let h = solve_harmonic_kernel(&k).unwrap();
    assert!(!h.unique);
    assert_eq!(h.closed_classes, [vec!["a".to_string()], vec!["b".to_string()]]);
    assert_eq!(h.q, [1.0; 3]);
}

#[test]
fn cell_cylinder_values() {
    let k = example_kernel();
    let m = measurable_ifs_measure(&k, vec![1.0, 1.0], 1e-12).unwrap();
    let c = |s: &str| CellCylinder::parse(s, m.cells()).unwrap();
    close(m.eval(&c("0|1")).unwrap(), 0.2, 1e-15);
    close(m.eval(&c("0|*")).unwrap(), 0.5, 1e-15);
    close(m.eval(&c("*|0")).unwrap(), 0.55, 1e-15);
}

#[test]
fn fixed_point_iteration_on_symmetric_kernel() {
    let cells = labels(&["0", "1"]);
    let k = CellKernel::from_rows(cells.clone(), cells, vec![0.5, 0.5], vec![vec![0.5; 2]; 2]).unwrap();
    let m = measurable_ifs_measure(&k, vec![1.0, 1.0], 1e-12).unwrap();
    let depth = 5;
    let start = CylinderTable::uniform(&m, depth).unwrap();
    for iterations in 1..depth {
        let run = fixed_point_iterate(&k, &start, iterations).unwrap();
        for (key, &v) in &run.table.values {
            if key.len() <= depth - iterations {
                close(v, 0.5f64.powi(key.len() as i32), 1e-12);
            }
        }
    }
}
