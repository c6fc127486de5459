use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use viewprop_core::io::{load_graph, read_labels, write_dataset, write_labels, LoadOptions};
use viewprop_core::optimizer::{row_peakedness, v_stationarity_residual, FitEvent, StopReason};
use viewprop_core::{
    evaluate, extract_clusters, fit_from, generate, init_factors, ClusterAssignment, EdgeCleanup,
    Error, EvalReport, FactorDims, GuardPolicy, Hyperparams, LatentFactors, ModelData,
    MultiViewGraph, ObjectiveBreakdown, PlantedSpec, Result,
};

use crate::args::{EvalArgs, FitArgs, InputArgs, SweepArgs, SynthArgs};
use crate::manifest::{hash_file, io_error, write_json, write_text, InputHash, Manifest};

struct Dataset {
    graph: MultiViewGraph,
    cleanup: EdgeCleanup,
    labels: Option<Vec<Option<usize>>>,
    hashes: Vec<InputHash>,
}

fn load(input: &InputArgs) -> Result<Dataset> {
    let mut hashes = vec![hash_file(&input.edges)?];
    for v in &input.views {
        hashes.push(hash_file(v)?);
    }
    if let Some(l) = &input.labels {
        hashes.push(hash_file(l)?);
    }
    let options = LoadOptions {
        strict_binary: input.strict_binary,
        ..LoadOptions::default()
    };
    let (graph, cleanup) = load_graph(&input.edges, &input.views, options)?;
    if cleanup.self_loops_dropped + cleanup.duplicates_merged > 0 {
        info!(
            "edge cleanup: {} self-loops dropped, {} duplicates merged",
            cleanup.self_loops_dropped, cleanup.duplicates_merged
        );
    }
    let labels = input.labels.as_ref().map(read_labels).transpose()?;
    if let Some(l) = &labels {
        if l.len() != graph.n_vertices() {
            return Err(Error::Shape(format!(
                "{} labels for {} vertices",
                l.len(),
                graph.n_vertices()
            )));
        }
    }
    Ok(Dataset {
        graph,
        cleanup,
        labels,
        hashes,
    })
}

/// Prints a line to stdout. A closed pipe (`viewprop eval ... | head`) is
/// not an error worth failing the run for.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn dims(data: &ModelData, hp: &Hyperparams) -> FactorDims {
    FactorDims {
        n_vertices: data.n_vertices(),
        view_sizes: data.view_sizes(),
        k_clusters: hp.k_clusters,
        s_dim: hp.s_dim,
    }
}

#[derive(Serialize)]
struct FitConfig<'a> {
    edges: &'a Path,
    views: &'a [PathBuf],
    labels: Option<&'a Path>,
    strict_binary: bool,
    init: Option<&'a Path>,
    checkpoint_every: usize,
    hyperparams: &'a Hyperparams,
}

#[derive(Serialize)]
struct FitReport<'a> {
    n_vertices: usize,
    n_edges: usize,
    view_sizes: Vec<usize>,
    self_loops_dropped: usize,
    duplicates_merged: usize,
    iterations: usize,
    converged: bool,
    stop_reason: StopReason,
    threshold: f64,
    initial_objective: &'a ObjectiveBreakdown,
    final_objective: &'a ObjectiveBreakdown,
    /// Vertices whose row of V is all zero; they are assigned to cluster 0.
    zero_rows: usize,
    peakedness_c: f64,
    peakedness_w: f64,
    v_stationarity_residual: f64,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    evaluation: Option<EvalReport>,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let hp = args.model.hyperparams(args.alpha, args.lambda);
    hp.validate()?;
    let mut ds = load(&args.input)?;
    let data = ModelData::prepare(&ds.graph)?;
    let init = match &args.init {
        Some(p) => {
            ds.hashes.push(hash_file(p)?);
            LatentFactors::load(p)?
        }
        None => init_factors(&dims(&data, &hp), hp.seed)?,
    };

    let out = &args.out_dir;
    create_dir(out)?;
    let checkpoints = out.join("checkpoints");
    if args.checkpoint_every > 0 {
        create_dir(&checkpoints)?;
    }
    let mut checkpoint_error = None;
    let mut saved = Vec::new();
    let result = fit_from(&data, &hp, init, &GuardPolicy::default(), |e| {
        if let FitEvent::Iteration {
            iteration, factors, ..
        } = e
        {
            if args.checkpoint_every > 0
                && iteration % args.checkpoint_every == 0
                && checkpoint_error.is_none()
            {
                let name = format!("factors_{iteration:05}.txt");
                match factors.save(checkpoints.join(&name)) {
                    Ok(()) => saved.push(format!("checkpoints/{name}")),
                    Err(err) => checkpoint_error = Some(err),
                }
            }
        }
    })?;
    if let Some(err) = checkpoint_error {
        return Err(err);
    }

    let (assignment, zero_rows) = extract_clusters(&result.factors.v)?;
    let evaluation = ds
        .labels
        .as_ref()
        .map(|l| evaluate(&assignment, l))
        .transpose()?;
    let trace = &result.trace;
    let report = FitReport {
        n_vertices: ds.graph.n_vertices(),
        n_edges: ds.graph.n_edges(),
        view_sizes: ds.graph.view_sizes(),
        self_loops_dropped: ds.cleanup.self_loops_dropped,
        duplicates_merged: ds.cleanup.duplicates_merged,
        iterations: trace.iterations.len(),
        converged: trace.converged,
        stop_reason: trace.stop_reason,
        threshold: trace.threshold,
        initial_objective: &trace.initial,
        final_objective: trace.final_objective(),
        zero_rows,
        peakedness_c: row_peakedness(&result.factors.c),
        peakedness_w: row_peakedness(&result.factors.w),
        v_stationarity_residual: v_stationarity_residual(&result.factors, &data, &hp, 1e-6),
        evaluation,
    };

    write_labels(out.join("assignments.txt"), assignment.labels())?;
    write_text(&out.join("trace.csv"), &trace.to_csv())?;
    result.factors.save(out.join("factors.txt"))?;
    write_json(&out.join("report.json"), &report)?;

    let config = FitConfig {
        edges: &args.input.edges,
        views: &args.input.views,
        labels: args.input.labels.as_deref(),
        strict_binary: args.input.strict_binary,
        init: args.init.as_deref(),
        checkpoint_every: args.checkpoint_every,
        hyperparams: &hp,
    };
    let mut manifest = Manifest::new("fit", hp.seed, config, ds.hashes);
    manifest.outputs = ["assignments.txt", "trace.csv", "factors.txt", "report.json"]
        .map(String::from)
        .to_vec();
    manifest.outputs.extend(saved);
    write_json(&out.join("manifest.json"), &manifest)?;

    let mut summary = format!(
        "{} after {} sweeps ({:?}), objective {:.6e}",
        if trace.converged {
            "converged"
        } else {
            "stopped"
        },
        trace.iterations.len(),
        trace.stop_reason,
        trace.final_objective().total
    );
    if let Some(e) = &report.evaluation {
        summary.push_str(&format!(", nmi {:.4}, accuracy {:.4}", e.nmi, e.accuracy));
    }
    say(&summary);
    Ok(())
}

#[derive(Serialize)]
struct SweepConfig<'a> {
    edges: &'a Path,
    views: &'a [PathBuf],
    labels: Option<&'a Path>,
    strict_binary: bool,
    alpha: &'a [f64],
    lambda: &'a [f64],
    /// Hyperparameters shared by every cell; alpha and lambda are overridden.
    base: &'a Hyperparams,
}

struct Cell {
    alpha: f64,
    lambda: f64,
    outcome: Result<CellResult>,
}

struct CellResult {
    nmi: Option<f64>,
    accuracy: Option<f64>,
    iterations: usize,
    converged: bool,
    objective: f64,
}

fn run_cell(
    data: &ModelData,
    labels: Option<&[Option<usize>]>,
    hp: &Hyperparams,
) -> Result<CellResult> {
    hp.validate()?;
    let init = init_factors(&dims(data, hp), hp.seed)?;
    let result = fit_from(data, hp, init, &GuardPolicy::default(), |_| {})?;
    let (assignment, _) = extract_clusters(&result.factors.v)?;
    let eval = labels.map(|l| evaluate(&assignment, l)).transpose()?;
    Ok(CellResult {
        nmi: eval.as_ref().map(|e| e.nmi),
        accuracy: eval.as_ref().map(|e| e.accuracy),
        iterations: result.trace.iterations.len(),
        converged: result.trace.converged,
        objective: result.trace.final_objective().total,
    })
}

fn sweep_csv(cells: &[Cell]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let mut out = String::from("alpha,lambda,nmi,accuracy,iterations,converged,objective,error\n");
    for c in cells {
        match &c.outcome {
            Ok(r) => out.push_str(&format!(
                "{},{},{},{},{},{},{:e},\n",
                c.alpha,
                c.lambda,
                opt(r.nmi),
                opt(r.accuracy),
                r.iterations,
                r.converged,
                r.objective
            )),
            Err(e) => {
                let msg = format!("{}: {e}", e.class()).replace([',', '\n'], ";");
                out.push_str(&format!("{},{},,,,,,{msg}\n", c.alpha, c.lambda));
            }
        }
    }
    out
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    if args.alpha.is_empty() || args.lambda.is_empty() {
        return Err(Error::Validation("sweep grids must be non-empty".into()));
    }
    let base = args.model.hyperparams(args.alpha[0], args.lambda[0]);
    let ds = load(&args.input)?;
    let data = ModelData::prepare(&ds.graph)?;
    let out = &args.out_dir;
    create_dir(out)?;

    let grid: Vec<(f64, f64)> = args
        .alpha
        .iter()
        .flat_map(|&a| args.lambda.iter().map(move |&l| (a, l)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {} jobs: {e}", args.jobs)))?;
    let labels = ds.labels.as_deref();
    let cells: Vec<Cell> = pool.install(|| {
        grid.par_iter()
            .map(|&(alpha, lambda)| {
                let hp = Hyperparams {
                    alpha,
                    lambda,
                    ..base.clone()
                };
                let outcome = run_cell(&data, labels, &hp);
                info!("alpha {alpha}, lambda {lambda}: done");
                Cell {
                    alpha,
                    lambda,
                    outcome,
                }
            })
            .collect()
    });
    write_text(&out.join("sweep.csv"), &sweep_csv(&cells))?;

    let config = SweepConfig {
        edges: &args.input.edges,
        views: &args.input.views,
        labels: args.input.labels.as_deref(),
        strict_binary: args.input.strict_binary,
        alpha: &args.alpha,
        lambda: &args.lambda,
        base: &base,
    };
    let mut manifest = Manifest::new("sweep", base.seed, config, ds.hashes);
    manifest.outputs = vec!["sweep.csv".into()];
    write_json(&out.join("manifest.json"), &manifest)?;

    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    let best = cells
        .iter()
        .filter_map(|c| Some((c, c.outcome.as_ref().ok()?.nmi?)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((c, nmi)) => say(&format!(
            "{} cells ({failed} failed); best nmi {nmi:.4} at alpha {}, lambda {}",
            cells.len(),
            c.alpha,
            c.lambda
        )),
        None => say(&format!("{} cells ({failed} failed)", cells.len())),
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let spec = PlantedSpec {
        n_vertices: args.n,
        k_clusters: args.k,
        p_in: args.p_in,
        p_out: args.p_out,
        views: args.views.clone(),
        seed: args.seed,
    };
    let (graph, labels) = generate(&spec)?;
    let paths = write_dataset(&args.out_dir, &graph, &labels)?;
    let mut manifest = Manifest::new("synth", spec.seed, &spec, Vec::new());
    let name = |p: &Path| {
        p.file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned()
    };
    manifest.outputs = std::iter::once(&paths.edges)
        .chain(&paths.views)
        .chain(std::iter::once(&paths.labels))
        .map(|p| name(p))
        .collect();
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;
    say(&format!(
        "{} vertices, {} edges, {} views written to {}",
        graph.n_vertices(),
        graph.n_edges(),
        graph.views().len(),
        args.out_dir.display()
    ));
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let truth = read_labels(&args.labels)?;
    let pred: Vec<usize> = read_labels(&args.assignments)?
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| {
                Error::InvalidValue(format!("assignment on line {} is negative", i + 1))
            })
        })
        .collect::<Result<_>>()?;
    let report = evaluate(&ClusterAssignment::from_labels(pred), &truth)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidValue(format!("cannot serialize report: {e}")))?;
    say(&text);
    if let Some(out) = &args.out_dir {
        create_dir(out)?;
        write_json(&out.join("report.json"), &report)?;
        let inputs = vec![hash_file(&args.assignments)?, hash_file(&args.labels)?];
        let mut manifest = Manifest::new("eval", 0, args_config(args), inputs);
        manifest.outputs = vec!["report.json".into()];
        write_json(&out.join("manifest.json"), &manifest)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalConfig<'a> {
    assignments: &'a Path,
    labels: &'a Path,
}

fn args_config(args: &EvalArgs) -> EvalConfig<'_> {
    EvalConfig {
        assignments: &args.assignments,
        labels: &args.labels,
    }
}
