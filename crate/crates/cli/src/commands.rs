use pathmeas::diagram::{edge_graph_01, is_irreducible};
use pathmeas::kernel::{
    check_consistency_measurable, check_ifs_fixed_point_measurable, disintegrate, fixed_point_iterate,
    harmonic_check, measurable_ifs_measure, solve_harmonic_kernel, CellCylinder, CylinderTable,
};
use pathmeas::measures::{
    check_consistency, check_ifs_fixed_point, check_shift_invariance, check_tail_invariance, empirical_check,
    shift_condition_tail, tail_to_markov, MarkovMeasure, PathSampler, Sampleable,
};
use pathmeas::sfs::{build_sfs, ck_matrix, quasi_stationary_test, rn_derivative};
use pathmeas::spectral::perron_eigenpair;
use pathmeas::{
    height_vector, parse_diagram, parse_kernel, parse_measure, validate_diagram, AnyMeasure, Diagram, Edge,
    FinitePath, PathMeasure, SolverConfig, Window,
};
use serde_json::{json, Value};

use crate::report::{read, to_value, usage, CliError, OrCore, Outcome};
use crate::{
    CheckArgs, Command, DiagramCmd, EvalArgs, Format, KernelCmd, MeasureCmd, MeasureInput, SampleArgs, SfsCmd,
    What,
};

pub fn run(cmd: Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Validate { diagram } => {
            let d = load_diagram(&diagram)?;
            let report = validate_diagram(&d);
            let valid = report.is_valid();
            Ok(Outcome::json(report)?.with_pass(valid))
        }
        Command::Eigen { diagram, solver, format } => {
            let d = load_diagram(&diagram)?;
            eigen(&d, &solver.config()?, format)
        }
        Command::Measure(MeasureCmd::Eval(args)) => eval(args),
        Command::Measure(MeasureCmd::Check(args)) | Command::Check(args) => check(args),
        Command::Measure(MeasureCmd::Sample(args)) | Command::Sample(args) => sample(args),
        Command::Sfs(cmd) => sfs(cmd),
        Command::Kernel(cmd) => kernel(cmd),
        Command::Diagram(cmd) => diagram(cmd),
    }
}

fn load_diagram(path: &std::path::Path) -> Result<Diagram, CliError> {
    parse_diagram(&read(path)?).core()
}

fn load_measure(input: &MeasureInput, cfg: &SolverConfig) -> Result<AnyMeasure, CliError> {
    let d = load_diagram(&input.diagram)?;
    parse_measure(&read(&input.measure)?, &d, cfg).core()
}

fn parse_path(literal: &str, d: &Diagram) -> Result<FinitePath, CliError> {
    FinitePath::parse(literal, d).core()
}

fn window_for(d: &Diagram, radius: Option<u64>) -> Window {
    match radius {
        Some(r) => d.domain().window(r),
        None => d.default_window(),
    }
}

fn with_audit(mut v: Value, tol: f64, window: impl serde::Serialize) -> Result<Value, CliError> {
    let window = to_value(window)?;
    if let Value::Object(map) = &mut v {
        map.insert("tol".into(), json!(tol));
        map.insert("window".into(), window);
    }
    Ok(v)
}

fn eigen(d: &Diagram, cfg: &SolverConfig, format: Format) -> Result<Outcome, CliError> {
    if !d.is_stationary() {
        return Err(usage("eigen needs a stationary diagram"));
    }
    let a = d.matrix(0).map(|x| x as f64).transpose();
    let pair = perron_eigenpair(&a, cfg).core()?;
    if format == Format::Csv {
        return Ok(Outcome::csv("iteration,residual", pair.trace.iter().copied()));
    }
    let mut v = to_value(&pair)?;
    if let Value::Object(map) = &mut v {
        map.remove("trace");
    }
    let window = pair.t.window;
    Outcome::json(with_audit(v, cfg.tol, window)?)
}

fn eval(args: EvalArgs) -> Result<Outcome, CliError> {
    let cfg = args.solver.config()?;
    let m = load_measure(&args.input, &cfg)?;
    let values = args
        .path
        .iter()
        .map(|lit| {
            let c = parse_path(lit, m.diagram())?;
            let value = m.value(&c).core()?;
            Ok(json!({ "cylinder": c.to_string(), "value": value }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let v = json!({ "kind": m.kind(), "values": values });
    Outcome::json(with_audit(v, cfg.tol, m.window())?)
}

fn check(args: CheckArgs) -> Result<Outcome, CliError> {
    let cfg = args.solver.config()?;
    let tol = cfg.tol;
    if args.what == What::ShiftCondition {
        let d = load_diagram(&args.diagram)?;
        let r = shift_condition_tail(&d, &cfg).core()?;
        let max_dev = r
            .heights
            .iter()
            .map(|&(_, h)| (h as f64 - r.lambda).abs())
            .fold(0.0, f64::max);
        return envelope(args.what, r.holds, max_dev, tol, r.window, &r);
    }
    let measure = args
        .measure
        .clone()
        .ok_or_else(|| usage(format!("--what {} needs --measure", args.what.name())))?;
    let input = MeasureInput {
        diagram: args.diagram.clone(),
        measure,
    };
    let m = load_measure(&input, &cfg)?;
    let window = m.window();
    match args.what {
        What::Consistency => {
            let r = check_consistency(&m, args.len, tol);
            envelope(args.what, r.pass, r.max_rel_error, tol, window, &r)
        }
        What::Tail => {
            let r = check_tail_invariance(&m, args.len, tol);
            envelope(args.what, r.tail_invariant, r.max_spread, tol, window, &r)
        }
        What::Shift => {
            let r = check_shift_invariance(&m, args.len, tol).core()?;
            envelope(args.what, r.invariant, r.max_rel_deviation, tol, window, &r)
        }
        What::Ifs => {
            let ifs = m.as_ifs().ok_or_else(|| usage("--what ifs needs an ifs measure"))?;
            let r = check_ifs_fixed_point(ifs, args.len, tol);
            envelope(args.what, r.pass, r.max_abs_deviation, tol, window, &r)
        }
        What::Empirical => {
            let mut slot = None;
            let target = sampleable(&m, args.start, &mut slot)?;
            let r = empirical_check(target, args.len, args.samples, args.seed).core()?;
            envelope(args.what, r.pass, r.max_abs_z, tol, window, &r)
        }
        What::ShiftCondition => unreachable!("handled above"),
    }
}

fn envelope(
    what: What,
    pass: bool,
    max_dev: f64,
    tol: f64,
    window: Window,
    report: impl serde::Serialize,
) -> Result<Outcome, CliError> {
    let v = json!({
        "what": what.name(),
        "pass": pass,
        "max_dev": max_dev,
        "tol": tol,
        "window": to_value(window)?,
        "report": to_value(report)?,
    });
    Ok(Outcome::json(v)?.with_pass(pass))
}

/// Tail measures are sampled through their Markov form, stored in `slot`.
fn sampleable<'a>(
    m: &'a AnyMeasure,
    start: Option<i64>,
    slot: &'a mut Option<MarkovMeasure>,
) -> Result<Sampleable<'a>, CliError> {
    Ok(match m {
        AnyMeasure::Markov(mm) => Sampleable::Markov(mm),
        AnyMeasure::Ifs(ifs) => Sampleable::Ifs(ifs, start),
        AnyMeasure::Tail(t) => Sampleable::Markov(slot.insert(tail_to_markov(t).core()?)),
    })
}

fn sample(args: SampleArgs) -> Result<Outcome, CliError> {
    let cfg = args.solver.config()?;
    let m = load_measure(&args.input, &cfg)?;
    let mut slot = None;
    let target = sampleable(&m, args.start, &mut slot)?;
    let mut sampler = PathSampler::new(args.seed);
    let paths = (0..args.count)
        .map(|_| sampler.sample(target, args.len).map(|p| p.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .core()?;
    let v = json!({
        "kind": m.kind(),
        "seed": args.seed,
        "len": args.len,
        "count": args.count,
        "paths": paths,
    });
    Outcome::json(with_audit(v, cfg.tol, m.window())?)
}

fn sfs(cmd: SfsCmd) -> Result<Outcome, CliError> {
    match cmd {
        SfsCmd::Rn {
            input,
            edge,
            path,
            depth,
            solver,
        } => {
            let cfg = solver.config()?;
            let m = load_measure(&input, &cfg)?;
            let e: Edge = edge.parse().map_err(|e: pathmeas::ParseEdgeError| usage(e.to_string()))?;
            let x = parse_path(&path, m.diagram())?;
            let r = rn_derivative(&m, &e, &x, depth, cfg.tol).core()?;
            Outcome::json(with_audit(to_value(&r)?, cfg.tol, m.window())?)
        }
        SfsCmd::Qstat {
            input,
            path,
            terms,
            tol,
            window,
        } => {
            let tol = crate::positive_tol(tol)?;
            let mut cfg = SolverConfig::default();
            if let Some(r) = window {
                cfg = cfg.up_to_radius(r);
            }
            let m = load_measure(&input, &cfg)?;
            let AnyMeasure::Markov(markov) = &m else {
                return Err(usage("qstat needs a markov measure"));
            };
            let x = parse_path(&path, m.diagram())?;
            let r = quasi_stationary_test(markov, &x, terms, tol).core()?;
            Outcome::json(with_audit(to_value(&r)?, tol, m.window())?)
        }
        SfsCmd::Ck { diagram } => {
            let d = load_diagram(&diagram)?;
            let system = build_sfs(&d).core()?;
            let graph = edge_graph_01(&d).core()?;
            let ck = ck_matrix(&system);
            Outcome::json(json!({
                "edges": ck.edges,
                "rows": ck.rows,
                "dense": ck.dense(),
                "row_sums": ck.row_sums(),
                "col_sums": ck.col_sums(),
                "matches_edge_graph": ck.matches_edge_graph(&graph),
                "checks": system.checks(),
                "window": d.default_window(),
            }))
        }
    }
}

struct LoadedKernel {
    kernel: pathmeas::CellKernel,
    edges: pathmeas::EdgeMeasure,
    q: Option<Vec<f64>>,
}

fn load_kernel(path: &std::path::Path) -> Result<LoadedKernel, CliError> {
    let file = parse_kernel(&read(path)?).core()?;
    let edges = file.build().core()?;
    let kernel = disintegrate(&edges).core()?;
    Ok(LoadedKernel {
        kernel,
        edges,
        q: file.q,
    })
}

impl LoadedKernel {
    fn q(&self) -> Vec<f64> {
        self.q
            .clone()
            .unwrap_or_else(|| vec![1.0; self.kernel.cells1().len()])
    }

    /// Cells are indexed from 0, so the whole cell set is the window.
    fn window(&self) -> Window {
        Window::new(0, self.kernel.cells0().len() as i64 - 1)
    }
}

fn kernel(cmd: KernelCmd) -> Result<Outcome, CliError> {
    match cmd {
        KernelCmd::Disintegrate { kernel } => {
            let k = load_kernel(&kernel)?;
            Outcome::json(json!({
                "cells0": k.kernel.cells0().labels(),
                "cells1": k.kernel.cells1().labels(),
                "marginal": k.kernel.marginal(),
                "rows": k.kernel.dense_rows(),
                "total": k.edges.total(),
                "stationary": k.kernel.is_stationary(),
                "reconstruction_error": k.kernel.reconstruction_error(&k.edges),
                "window": k.window(),
            }))
        }
        KernelCmd::Check { kernel, len, tol } => {
            let tol = crate::positive_tol(tol)?;
            let k = load_kernel(&kernel)?;
            let q = k.q();
            let harmonic = harmonic_check(&k.kernel, &q, tol).core()?;
            let solved = solve_harmonic_kernel(&k.kernel).core()?;
            let m = pathmeas::kernel::MeasurableIfsMeasure::from_parts(&k.kernel, q).core()?;
            let fixed = check_ifs_fixed_point_measurable(&m, len, tol).core()?;
            let consistency = check_consistency_measurable(&m, len, tol).core()?;
            let bridge = m
                .atomic_bridge()
                .and_then(|b| b.max_error(&m, len.saturating_sub(1)))
                .ok();
            let pass = harmonic.pass && fixed.pass && consistency.pass;
            let v = json!({
                "pass": pass,
                "max_dev": fixed.max_dev.max(harmonic.max_residual),
                "total": m.total(),
                "harmonic": harmonic,
                "solved": solved,
                "fixed_point": fixed,
                "consistency": consistency,
                "atomic_bridge_error": bridge,
            });
            Ok(Outcome::json(with_audit(v, tol, k.window())?)?.with_pass(pass))
        }
        KernelCmd::Eval { kernel, cylinder, tol } => {
            let tol = crate::positive_tol(tol)?;
            let k = load_kernel(&kernel)?;
            let m = measurable_ifs_measure(&k.kernel, k.q(), tol).core()?;
            let values = cylinder
                .iter()
                .map(|s| {
                    let c = CellCylinder::parse(s, m.cells()).core()?;
                    let value = m.eval(&c).core()?;
                    Ok(json!({ "cylinder": c.display(m.cells()), "value": value }))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Outcome::json(with_audit(json!({ "values": values }), tol, k.window())?)
        }
        KernelCmd::Iterate {
            kernel,
            depth,
            iterations,
            tol,
            format,
        } => {
            let tol = crate::positive_tol(tol)?;
            if depth == 0 {
                return Err(usage("--depth must be at least 1"));
            }
            let k = load_kernel(&kernel)?;
            let m = measurable_ifs_measure(&k.kernel, k.q(), tol).core()?;
            let start = CylinderTable::uniform(&m, depth).core()?;
            let run = fixed_point_iterate(&k.kernel, &start, iterations.unwrap_or(depth - 1)).core()?;
            if format == Format::Csv {
                return Ok(Outcome::csv(
                    "iteration,distance",
                    run.distances.iter().enumerate().map(|(i, &x)| (i + 1, x)),
                ));
            }
            let target = CylinderTable::of_measure(&m, depth).core()?;
            let cells = m.cells();
            let table: Vec<Value> = run
                .table
                .values
                .iter()
                .map(|(key, value)| json!({ "cylinder": CellCylinder::atoms(key).display(cells), "value": value }))
                .collect();
            let v = json!({
                "depth": depth,
                "iterations": run.distances.len(),
                "distances": run.distances,
                "monotone": run.monotone,
                "distance_to_measure": run.table.distance(&target),
                "table": table,
            });
            Outcome::json(with_audit(v, tol, k.window())?)
        }
    }
}

fn diagram(cmd: DiagramCmd) -> Result<Outcome, CliError> {
    match cmd {
        DiagramCmd::Height { diagram, level, window } => {
            let d = load_diagram(&diagram)?;
            let w = window_for(&d, window);
            let h = height_vector(&d, level, w).core()?;
            Outcome::json(json!({ "level": level, "heights": h, "window": w }))
        }
        DiagramCmd::EdgeGraph { diagram } => {
            let d = load_diagram(&diagram)?;
            let g = edge_graph_01(&d).core()?;
            let successors: Vec<Vec<usize>> = (0..g.edges.len()).map(|i| g.successor_row(i)).collect();
            Outcome::json(json!({
                "edges": g.edges.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                "successors": successors,
                "window": d.default_window(),
            }))
        }
        DiagramCmd::Irreducible { diagram, window, max_m } => {
            let d = load_diagram(&diagram)?;
            let w = window_for(&d, window);
            let verdict = is_irreducible(&d, w, max_m);
            Outcome::json(json!({ "verdict": verdict, "max_m": max_m, "window": w }))
        }
    }
}
