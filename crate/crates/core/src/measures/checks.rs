//! Audits of measure identities on finite families of cylinders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagram::Diagram;
use crate::path::{branch_preimage, enumerate_paths, one_edge_extensions, prepend, FinitePath};
use crate::sparse::Window;
use crate::spectral::{perron_eigenpair, SolverConfig};

use super::markov::MarkovMeasure;
use super::{IfsMeasure, MeasureError, MeasureKind, PathMeasure};

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub kind: MeasureKind,
    pub max_len: usize,
    pub tol: f64,
    pub window: Window,
    pub cylinders_checked: usize,
    /// Cylinders whose value or children fall outside the known window.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst_cylinder: Option<String>,
    pub pass: bool,
}

/// Kolmogorov consistency: `m(C) = sum of m(C e)` over one-edge extensions,
/// for every cylinder of length `0..=max_len` starting in the measure's window.
pub fn check_consistency(m: &dyn PathMeasure, max_len: usize, tol: f64) -> ConsistencyReport {
    let d = m.diagram();
    let window = m.window();
    let mut level = enumerate_paths(d, 0, window);
    let mut checked = 0;
    let mut skipped = 0;
    let mut worst = (0.0f64, None);
    for _ in 0..=max_len {
        let mut next = Vec::new();
        for c in &level {
            let children = one_edge_extensions(d, c);
            let parent = m.value(c);
            let sum: Result<f64, _> = children.iter().map(|x| m.value(x)).sum();
            match (parent, sum) {
                (Ok(p), Ok(s)) => {
                    checked += 1;
                    let err = relative(p, s);
                    if err > worst.0 || worst.1.is_none() {
                        worst = (err, Some(c.to_string()));
                    }
                }
                _ => skipped += 1,
            }
            next.extend(children);
        }
        level = next;
    }
    ConsistencyReport {
        kind: m.kind(),
        max_len,
        tol,
        window,
        cylinders_checked: checked,
        skipped,
        max_rel_error: worst.0,
        worst_cylinder: worst.1,
        pass: checked > 0 && worst.0 < tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpread {
    pub vertex: i64,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioExample {
    pub numerator: String,
    pub denominator: String,
    pub value_ratio: f64,
    pub weight_ratio: f64,
}

/// `nu(f) / nu(e) = p(f) / p(e)` for equal-length cylinders with a common
/// range, where `p` is the product of edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioLawReport {
    pub pairs_checked: usize,
    pub max_rel_deviation: f64,
    /// The pair with the largest value ratio.
    pub example: Option<RatioExample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailInvarianceReport {
    pub kind: MeasureKind,
    pub len: usize,
    pub tol: f64,
    pub window: Window,
    pub groups: Vec<GroupSpread>,
    pub max_spread: f64,
    pub tail_invariant: bool,
    pub ratio_law: Option<RatioLawReport>,
}

/// Group length-`n` cylinders by range vertex and report the spread of
/// values inside each group.
pub fn check_tail_invariance(m: &dyn PathMeasure, n: usize, tol: f64) -> TailInvarianceReport {
    let d = m.diagram();
    let window = m.window();
    let mut groups: BTreeMap<i64, Vec<(FinitePath, f64)>> = BTreeMap::new();
    for c in enumerate_paths(d, n, window) {
        if let Ok(x) = m.value(&c) {
            groups.entry(c.end()).or_default().push((c, x));
        }
    }
    let spreads: Vec<GroupSpread> = groups
        .iter()
        .map(|(&vertex, members)| {
            let min = members.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
            let max = members.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
            GroupSpread {
                vertex,
                count: members.len(),
                min,
                max,
                spread: max - min,
            }
        })
        .collect();
    let max_spread = spreads.iter().map(|g| g.spread).fold(0.0, f64::max);
    let ratio_law = m.as_ifs().map(|ifs| ratio_law(ifs, &groups));
    TailInvarianceReport {
        kind: m.kind(),
        len: n,
        tol,
        window,
        groups: spreads,
        max_spread,
        tail_invariant: max_spread <= tol,
        ratio_law,
    }
}

fn ratio_law(ifs: &IfsMeasure, groups: &BTreeMap<i64, Vec<(FinitePath, f64)>>) -> RatioLawReport {
    let weight = |c: &FinitePath| c.edges().iter().map(|e| ifs.weight(e)).product::<f64>();
    let mut pairs = 0;
    let mut max_dev = 0.0f64;
    let mut example: Option<RatioExample> = None;
    for members in groups.values() {
        for (f, vf) in members {
            for (e, ve) in members {
                if f == e || *ve == 0.0 {
                    continue;
                }
                pairs += 1;
                let value_ratio = vf / ve;
                let weight_ratio = weight(f) / weight(e);
                max_dev = max_dev.max(relative(value_ratio, weight_ratio));
                if example.as_ref().is_none_or(|x| value_ratio > x.value_ratio) {
                    example = Some(RatioExample {
                        numerator: f.to_string(),
                        denominator: e.to_string(),
                        value_ratio,
                        weight_ratio,
                    });
                }
            }
        }
    }
    RatioLawReport {
        pairs_checked: pairs,
        max_rel_deviation: max_dev,
        example,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFactor {
    pub vertex: i64,
    /// `m(sigma^-1 [v]) / m([v])`.
    pub measured: f64,
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftInvarianceReport {
    pub kind: MeasureKind,
    pub max_len: usize,
    pub tol: f64,
    pub window: Window,
    pub cylinders_checked: usize,
    /// `max |m(sigma^-1 C) - m(C)| / m(C)`.
    pub max_rel_deviation: f64,
    /// `max |measured factor - predicted factor|`, when a prediction exists.
    pub max_factor_error: Option<f64>,
    pub factors: Vec<VertexFactor>,
    /// IFS only: the column sums `c_w`, which are the predicted factors.
    pub column_sums: Option<Vec<(i64, f64)>>,
    pub invariant: bool,
}

/// Compare `m(sigma^-1 C) = sum over f with r(f) = s(C) of m([f, C])` with
/// `m(C)` for every cylinder of length `0..=max_len`.
pub fn check_shift_invariance(
    m: &dyn PathMeasure,
    max_len: usize,
    tol: f64,
) -> Result<ShiftInvarianceReport, MeasureError> {
    let d = m.diagram();
    if !d.is_stationary() {
        return Err(MeasureError::NonStationary);
    }
    let window = m.window();
    let mut checked = 0;
    let mut max_dev = 0.0f64;
    let mut max_factor_err: Option<f64> = None;
    let mut factors = Vec::new();
    for len in 0..=max_len {
        for c in enumerate_paths(d, len, window) {
            let Ok(mc) = m.value(&c) else { continue };
            if mc == 0.0 {
                continue;
            }
            let pre: Result<f64, MeasureError> = d
                .in_edges(0, c.start())
                .into_iter()
                .map(|f| m.value(&prepend(f, &c)?))
                .sum();
            let Ok(pre) = pre else { continue };
            checked += 1;
            max_dev = max_dev.max((pre - mc).abs() / mc);
            let measured = pre / mc;
            let predicted = m.shift_factor(c.start());
            if let Some(p) = predicted {
                let err = (measured - p).abs();
                max_factor_err = Some(max_factor_err.map_or(err, |x| x.max(err)));
            }
            if len == 0 {
                factors.push(VertexFactor {
                    vertex: c.start(),
                    measured,
                    predicted,
                });
            }
        }
    }
    let column_sums = m
        .as_ifs()
        .map(|ifs| window.iter().map(|w| (w, ifs.column_sum(w))).collect());
    Ok(ShiftInvarianceReport {
        kind: m.kind(),
        max_len,
        tol,
        window,
        cylinders_checked: checked,
        max_rel_deviation: max_dev,
        max_factor_error: max_factor_err,
        factors,
        column_sums,
        invariant: checked > 0 && max_dev < tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsFixedPointReport {
    pub max_len: usize,
    pub tol: f64,
    pub window: Window,
    pub cylinders_checked: usize,
    pub max_abs_deviation: f64,
    pub worst_cylinder: Option<String>,
    pub pass: bool,
}

/// `sum_e p_e nu(tau_e^-1 C) = nu(C)` for roots and cylinders of length
/// `1..=max_len`. Only edges leaving `s(C)` have a nonempty preimage.
pub fn check_ifs_fixed_point(ifs: &IfsMeasure, max_len: usize, tol: f64) -> IfsFixedPointReport {
    let d = ifs.diagram();
    let window = ifs.window();
    let mut checked = 0;
    let mut worst = (0.0f64, None);
    for len in 0..=max_len {
        for c in enumerate_paths(d, len, window) {
            let Ok(direct) = ifs.value(&c) else { continue };
            let mut image = 0.0;
            let mut complete = true;
            for e in d.out_edges(0, c.start()) {
                if let Some(pre) = branch_preimage(&e, &c) {
                    match ifs.value(&pre) {
                        Ok(x) => image += ifs.weight(&e) * x,
                        Err(_) => complete = false,
                    }
                }
            }
            if !complete {
                continue;
            }
            checked += 1;
            let dev = (image - direct).abs();
            if dev > worst.0 || worst.1.is_none() {
                worst = (dev, Some(c.to_string()));
            }
        }
    }
    IfsFixedPointReport {
        max_len,
        tol,
        window,
        cylinders_checked: checked,
        max_abs_deviation: worst.0,
        worst_cylinder: worst.1,
        pass: checked > 0 && worst.0 < tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConditionReport {
    pub lambda: f64,
    /// Window-to-window change of the eigenvalue; 0 on finite domains.
    pub lambda_drift: f64,
    pub tol: f64,
    /// `tol + lambda_drift`: the eigenvalue of an infinite diagram is only
    /// known up to its truncation drift.
    pub effective_tol: f64,
    pub window: Window,
    pub heights: Vec<(i64, u64)>,
    /// Vertices with `|H^(1)_v - lambda| >= effective_tol`.
    pub violators: Vec<i64>,
    pub holds: bool,
    /// `[1 / lambda, max H^(1) / lambda]`, the range of the shift derivative.
    pub bound: [f64; 2],
}

/// Shift invariance of the stationary tail measure holds exactly when
/// `H^(1)_v = lambda` for every vertex.
pub fn shift_condition_tail(d: &Diagram, cfg: &SolverConfig) -> Result<ShiftConditionReport, MeasureError> {
    if !d.is_stationary() {
        return Err(MeasureError::NonStationary);
    }
    let a = d.matrix(0).map(|x| x as f64).transpose();
    let pair = perron_eigenpair(&a, cfg)?;
    let window = pair.t.window;
    let effective_tol = cfg.tol + pair.drift;
    let heights: Vec<(i64, u64)> = window
        .iter()
        .map(|v| (v, d.matrix(0).row(v).iter().map(|&(_, c)| c).sum()))
        .collect();
    let violators: Vec<i64> = heights
        .iter()
        .filter(|&&(_, h)| (h as f64 - pair.lambda).abs() >= effective_tol)
        .map(|&(v, _)| v)
        .collect();
    let max_h = heights.iter().map(|&(_, h)| h).max().unwrap_or(0);
    Ok(ShiftConditionReport {
        lambda: pair.lambda,
        lambda_drift: pair.drift,
        tol: cfg.tol,
        effective_tol,
        window,
        holds: violators.is_empty(),
        violators,
        heights,
        bound: [1.0 / pair.lambda, max_h as f64 / pair.lambda],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioProducts {
    pub tol: f64,
    /// Partial products `prod_{i=1}^k p^(i+1)_{f_i} / p^(i)_{f_i}`, `k = 1..=n_terms`.
    pub partials: Vec<f64>,
    /// Every partial product lies in `[tol, 1/tol]`.
    pub bounded: bool,
    /// Partial products over the last half are within `tol` of the last one.
    pub converges: bool,
    pub limit: Option<f64>,
    pub converges_to_one: bool,
    /// Bounded and convergent.
    pub quasi_stationary: bool,
}

/// Level-ratio products along `path`, which needs at least `n_terms + 1` edges.
pub fn level_ratio_products(
    m: &MarkovMeasure,
    path: &FinitePath,
    n_terms: usize,
    tol: f64,
) -> Result<RatioProducts, MeasureError> {
    if path.len() < n_terms + 1 {
        return Err(MeasureError::DepthExceeded {
            len: n_terms + 1,
            max: path.len(),
        });
    }
    let mut partials = Vec::with_capacity(n_terms);
    let mut prod = 1.0;
    for i in 1..=n_terms {
        let e = &path.edges()[i];
        let num = m.transition(i + 1, e)?;
        let den = m.transition(i, e)?;
        if num == 0.0 || den == 0.0 {
            return Err(MeasureError::ZeroTransition { index: i });
        }
        prod *= num / den;
        partials.push(prod);
    }
    let bounded = partials.iter().all(|&x| x >= tol && x <= 1.0 / tol);
    let last = partials.last().copied().unwrap_or(1.0);
    let converges = partials[partials.len() / 2..]
        .iter()
        .all(|&x| (x - last).abs() <= tol);
    let limit = converges.then_some(last);
    Ok(RatioProducts {
        tol,
        partials,
        bounded,
        converges,
        limit,
        converges_to_one: converges && (last - 1.0).abs() <= tol,
        quasi_stationary: bounded && converges,
    })
}

/// The shift derivative of a non-stationary Markov measure along `path`,
/// valid when `q P_0 = q`.
pub fn nonstationary_shift_product(
    m: &MarkovMeasure,
    path: &FinitePath,
    n_terms: usize,
    tol: f64,
) -> Result<RatioProducts, MeasureError> {
    let residual = m.invariance_residual();
    if residual > tol {
        return Err(MeasureError::InitialNotInvariant { residual });
    }
    level_ratio_products(m, path, n_terms, tol)
}
