//! Acceptance suite. Prints one PASS/FAIL/INFO/SKIP line per criterion and
//! exits nonzero if any gating criterion fails.
//!
//! Set `VIEWPROP_CORNELL` to a directory holding `edges.txt`, `view_1.txt`
//! and `labels.txt` to run the real-data smoke test.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viewprop_core::io::{load_graph, read_labels, LoadOptions};
use viewprop_core::optimizer::{
    row_peakedness, u_fixed_point_ratios, update_c, update_p, update_u, update_v, update_w,
    update_x, v_stationarity_residual, FitEvent,
};
use viewprop_core::synth::oracle_update;
use viewprop_core::{
    diffusion_reweight, extract_clusters, fit_from, fit_with, generate, init_factors, nmi,
    random_instance, EpsilonMode, FactorDims, FitResult, GuardPolicy, Hyperparams, ModelData,
    MultiViewGraph, PlantedSpec, Rule, StopReason, ViewSpec,
};

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Info,
    Skip,
}

struct Outcome {
    id: u32,
    name: &'static str,
    gating: bool,
    status: Status,
    detail: String,
}

impl Outcome {
    fn gate(id: u32, name: &'static str, ok: bool, detail: String) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Outcome {
            id,
            name,
            gating: true,
            status,
            detail,
        }
    }

    fn report(id: u32, name: &'static str, ok: bool, detail: String) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Outcome {
            id,
            name,
            gating: false,
            status,
            detail,
        }
    }

    fn line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Skip => "SKIP",
        };
        let gate = if self.gating { "" } else { " (non-gating)" };
        format!(
            "[{tag}] {:>2}. {}{gate}: {}",
            self.id, self.name, self.detail
        )
    }
}

fn planted_spec(seed: u64, n_views: usize) -> PlantedSpec {
    PlantedSpec {
        n_vertices: 120,
        k_clusters: 3,
        p_in: 0.3,
        p_out: 0.02,
        views: vec![
            ViewSpec {
                features_per_cluster: 10,
                flip_noise: 0.05,
            };
            n_views
        ],
        seed,
    }
}

/// One fit plus everything observed while it ran.
struct Run {
    result: FitResult,
    data: ModelData,
    hp: Hyperparams,
    truth: Vec<usize>,
    negative_updates: usize,
}

fn run_planted(seed: u64, n_views: usize, delta: f64) -> Run {
    let (graph, truth) = generate(&planted_spec(seed, n_views)).unwrap();
    let mut hp = Hyperparams::new(3);
    hp.seed = seed;
    hp.delta = delta;
    let data = ModelData::prepare(&graph).unwrap();
    let mut negative_updates = 0;
    let result = fit_with(&graph, &hp, &GuardPolicy::default(), |e| {
        if let FitEvent::Updated { factors, .. } = e {
            if !factors.is_nonnegative() {
                negative_updates += 1;
            }
        }
    })
    .unwrap();
    Run {
        result,
        data,
        hp,
        truth,
        negative_updates,
    }
}

fn truth_nmi(run: &Run) -> f64 {
    let (pred, _) = extract_clusters(&run.result.factors.v).unwrap();
    let truth: Vec<Option<usize>> = run.truth.iter().map(|&l| Some(l)).collect();
    nmi(&pred, &truth).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let guard = GuardPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..50u64 {
        let n = rng.random_range(2..=12);
        let d = rng.random_range(1..=3);
        let sizes: Vec<usize> = (0..d).map(|_| rng.random_range(1..=12)).collect();
        let (k, s) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let inst = random_instance(seed, n, &sizes, k, s).unwrap();
        let mut hp = Hyperparams::new(k);
        hp.s_dim = s;
        hp.alpha = rng.random_range(0.0..20.0);
        hp.lambda = rng.random_range(0.0..10.0);
        hp.delta = [10.0, 1e3, 1e5][seed as usize % 3];

        let (f, data) = (&inst.factors, &inst.data);
        let mut rules = vec![Rule::V, Rule::U, Rule::X, Rule::C, Rule::W];
        rules.extend((0..d).map(Rule::P));
        for rule in rules {
            let fast = match rule {
                Rule::V => update_v(f, data, &hp, &guard),
                Rule::U => update_u(f, data, &hp, &guard),
                Rule::P(i) => update_p(f, data, &hp, &guard, i),
                Rule::X => update_x(f, data, &hp, &guard),
                Rule::C => update_c(f, &hp, &guard),
                Rule::W => update_w(f, &hp, &guard),
            }
            .unwrap();
            let slow = oracle_update(rule, f, data, &hp, &guard).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst = worst.max((a - b).abs() / scale);
                }
                checked += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    Outcome::gate(
        1,
        "oracle equivalence",
        worst <= 1e-10 && elapsed < Duration::from_secs(10),
        format!(
            "50 instances, {checked} entries, worst relative gap {worst:.2e} (tol 1e-10), {:.2}s (limit 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn descent(runs: &[Run]) -> Vec<Outcome> {
    let mut bad = 0;
    let mut bad_runs = 0;
    let mut worst = 0.0f64;
    let mut pen_bad = 0;
    let mut pen_worst = 0.0f64;
    let mut total_iters = 0;
    for run in runs {
        let t = &run.result.trace;
        let mut prev = &t.initial;
        let mut run_bad = false;
        for rec in &t.iterations {
            let o = &rec.objective;
            let rise = (o.total - prev.total) / prev.total.abs();
            if o.total > prev.total + 1e-9 * prev.total.abs() {
                bad += 1;
                run_bad = true;
                worst = worst.max(rise);
            }
            if o.penalized > prev.penalized + 1e-9 * prev.penalized.abs() {
                pen_bad += 1;
            }
            pen_worst = pen_worst.max((o.penalized - prev.penalized) / prev.penalized.abs());
            prev = o;
            total_iters += 1;
        }
        if run_bad {
            bad_runs += 1;
        }
    }
    vec![
        Outcome::gate(
            2,
            "monotone descent of the unified objective",
            bad == 0,
            format!(
                "{bad} of {total_iters} iterations rose by more than 1e-9 relative, in {bad_runs} of {} runs; worst rise {worst:.2e}",
                runs.len()
            ),
        ),
        Outcome {
            id: 2,
            name: "monotone descent of the penalized objective",
            gating: false,
            status: if pen_bad == 0 { Status::Info } else { Status::Fail },
            detail: format!(
                "{pen_bad} of {total_iters} iterations rose; largest relative change {pen_worst:.2e}"
            ),
        },
    ]
}

fn convergence(runs: &[Run], elapsed: Duration) -> Outcome {
    let converged: Vec<usize> = runs
        .iter()
        .filter(|r| r.result.trace.converged && r.result.trace.iterations.len() < 300)
        .map(|r| r.result.trace.iterations.len())
        .collect();
    let max_iters = runs
        .iter()
        .map(|r| r.result.trace.iterations.len())
        .max()
        .unwrap_or(0);
    Outcome::gate(
        3,
        "convergence within 300 iterations",
        converged.len() == runs.len() && elapsed < Duration::from_secs(60),
        format!(
            "{}/{} runs below relative delta 1e-6 before iteration 300 (max {max_iters} sweeps), {:.1}s (limit 60s)",
            converged.len(),
            runs.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn recovery(runs: &[Run]) -> Outcome {
    let scores: Vec<f64> = runs.iter().take(10).map(truth_nmi).collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let min = scores.iter().cloned().fold(f64::MAX, f64::min);

    let mut clique = Vec::new();
    for seed in 0..3 {
        let spec = PlantedSpec {
            n_vertices: 120,
            k_clusters: 3,
            p_in: 1.0,
            p_out: 0.0,
            views: vec![ViewSpec {
                features_per_cluster: 10,
                flip_noise: 0.0,
            }],
            seed,
        };
        let (graph, truth) = generate(&spec).unwrap();
        let mut hp = Hyperparams::new(3);
        hp.seed = seed;
        let r = fit_with(&graph, &hp, &GuardPolicy::default(), |_| {}).unwrap();
        let (pred, _) = extract_clusters(&r.factors.v).unwrap();
        let truth: Vec<Option<usize>> = truth.into_iter().map(Some).collect();
        clique.push(nmi(&pred, &truth).unwrap());
    }
    Outcome::gate(
        4,
        "cluster recovery",
        mean >= 0.90 && clique.iter().all(|&s| s == 1.0),
        format!(
            "mean NMI {mean:.4} over 10 seeds (min {min:.4}, need >= 0.90); noiseless cliques NMI {clique:?} (need exactly 1.0)"
        ),
    )
}

fn nonnegativity(runs: &[Run]) -> Outcome {
    let negative: usize = runs.iter().map(|r| r.negative_updates).sum();

    // Zeros injected into every block must survive every individual update.
    let (graph, _) = generate(&planted_spec(77, 2)).unwrap();
    let data = ModelData::prepare(&graph).unwrap();
    let hp = Hyperparams::new(3);
    let dims = FactorDims {
        n_vertices: data.n_vertices(),
        view_sizes: data.view_sizes(),
        k_clusters: 3,
        s_dim: 3,
    };
    let mut init = init_factors(&dims, 77).unwrap();
    init.v[[5, 1]] = 0.0;
    init.v[[60, 2]] = 0.0;
    init.u[[3, 0]] = 0.0;
    init.x[[10, 2]] = 0.0;
    init.p_views[0][[4, 1]] = 0.0;
    init.p_views[1][[0, 0]] = 0.0;
    init.c[[2, 1]] = 0.0;
    init.w[[0, 2]] = 0.0;
    let mut revived = 0;
    let mut updates = 0;
    fit_from(&data, &hp, init, &GuardPolicy::default(), |e| {
        if let FitEvent::Updated { factors: f, .. } = e {
            updates += 1;
            let zeros = [
                f.v[[5, 1]],
                f.v[[60, 2]],
                f.u[[3, 0]],
                f.x[[10, 2]],
                f.p_views[0][[4, 1]],
                f.p_views[1][[0, 0]],
                f.c[[2, 1]],
                f.w[[0, 2]],
            ];
            revived += zeros.iter().filter(|&&z| z != 0.0).count();
            if !f.is_nonnegative() {
                revived += 1;
            }
        }
    })
    .unwrap();
    Outcome::gate(
        5,
        "nonnegativity and zero absorption",
        negative == 0 && revived == 0,
        format!(
            "{negative} updates with a negative entry across {} runs; {revived} injected zeros revived over {updates} updates",
            runs.len()
        ),
    )
}

fn diffusion() -> Outcome {
    let weight = |n: usize, edges: &[(usize, usize)], i: usize, j: usize| {
        let g = MultiViewGraph::from_edges(n, edges, vec![sprs::CsMat::eye(n)]).unwrap();
        let d = diffusion_reweight(&g).unwrap();
        *d.matrix().get(i, j).unwrap()
    };
    let k3 = [(0, 1), (1, 2), (0, 2)];
    let k3_ok = k3
        .iter()
        .all(|&(i, j)| weight(3, &k3, i, j) == 1.0 && weight(3, &k3, j, i) == 1.0);
    let p3 = [(0, 1), (1, 2)];
    let p3_ok = p3
        .iter()
        .all(|&(i, j)| weight(3, &p3, i, j) == 0.75 && weight(3, &p3, j, i) == 0.75);
    let single = weight(2, &[(0, 1)], 0, 1);
    Outcome::gate(
        6,
        "diffusion re-weighting",
        k3_ok && p3_ok && single == 1.0,
        format!("K3 all 1: {k3_ok}; P3 all 0.75: {p3_ok}; single edge {single}"),
    )
}

fn kkt(runs: &[Run]) -> Outcome {
    let mut worst_v = 0.0f64;
    let mut worst_u = 0.0f64;
    let mut n = 0;
    for run in runs.iter().filter(|r| r.result.trace.converged) {
        let f = &run.result.factors;
        worst_v = worst_v.max(v_stationarity_residual(f, &run.data, &run.hp, 1e-6));
        for r in u_fixed_point_ratios(f, &run.data, 1e-6) {
            worst_u = worst_u.max((r - 1.0).abs());
        }
        n += 1;
    }
    Outcome::gate(
        7,
        "KKT residual at convergence",
        n > 0 && worst_v <= 1e-3 && worst_u <= 1e-3,
        format!(
            "{n} converged runs; worst V residual {worst_v:.2e}, worst |U ratio - 1| {worst_u:.2e} (tol 1e-3)"
        ),
    )
}

fn discreteness(runs: &[Run]) -> Outcome {
    let score =
        |r: &Run| (row_peakedness(&r.result.factors.c) + row_peakedness(&r.result.factors.w)) / 2.0;
    let seeds = runs.len().min(10);
    let high: f64 = runs[..seeds].iter().map(score).sum::<f64>() / seeds as f64;
    let low: f64 = runs[..seeds]
        .iter()
        .enumerate()
        .map(|(i, _)| score(&run_planted(i as u64, 1 + i % 3, 10.0)))
        .sum::<f64>()
        / seeds as f64;
    Outcome::gate(
        8,
        "discreteness trend in delta",
        high > low,
        format!(
            "mean row peakedness of C, W: {high:.10} at delta 1e5 vs {low:.10} at delta 10 (gap {:.2e})",
            high - low
        ),
    )
}

fn scaling() -> Outcome {
    let mut points = Vec::new();
    for n in [100usize, 200, 400] {
        let spec = PlantedSpec {
            n_vertices: n,
            k_clusters: 4,
            p_in: 0.3,
            p_out: 0.02,
            views: vec![ViewSpec {
                features_per_cluster: 10,
                flip_noise: 0.05,
            }],
            seed: 9,
        };
        let (graph, _) = generate(&spec).unwrap();
        let mut hp = Hyperparams::new(4);
        hp.t_max = 20;
        hp.epsilon_mode = EpsilonMode::Absolute;
        hp.epsilon = f64::MIN_POSITIVE;
        let r = fit_with(&graph, &hp, &GuardPolicy::default(), |_| {}).unwrap();
        let mut times: Vec<f64> = r
            .trace
            .iterations
            .iter()
            .map(|i| i.wall_time.as_secs_f64())
            .collect();
        times.sort_by(f64::total_cmp);
        points.push(((n as f64).ln(), times[times.len() / 2].ln()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = points.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let ms: Vec<String> = points
        .iter()
        .map(|p| format!("{:.3}ms", p.1.exp() * 1e3))
        .collect();
    Outcome::report(
        9,
        "per-iteration complexity in N",
        slope <= 2.3,
        format!(
            "median sweep time at N = 100, 200, 400: {}; log-log slope {slope:.2} (limit 2.3)",
            ms.join(", ")
        ),
    )
}

fn cornell() -> Outcome {
    let name = "real-data smoke test";
    let Some(dir) = std::env::var_os("VIEWPROP_CORNELL").map(PathBuf::from) else {
        return Outcome {
            id: 10,
            name,
            gating: false,
            status: Status::Skip,
            detail: "VIEWPROP_CORNELL not set".into(),
        };
    };
    let run = || -> viewprop_core::Result<(bool, f64, usize)> {
        let (graph, _) = load_graph(
            dir.join("edges.txt"),
            &[dir.join("view_1.txt")],
            LoadOptions::default(),
        )?;
        let labels = read_labels(dir.join("labels.txt"))?;
        let k = labels.iter().flatten().max().map_or(2, |m| m + 1).max(2);
        let r = fit_with(
            &graph,
            &Hyperparams::new(k),
            &GuardPolicy::default(),
            |_| {},
        )?;
        let (pred, _) = extract_clusters(&r.factors.v)?;
        Ok((
            r.trace.converged,
            nmi(&pred, &labels)?,
            r.trace.iterations.len(),
        ))
    };
    match run() {
        Ok((converged, score, iters)) => Outcome::report(
            10,
            name,
            converged && score > 0.10,
            format!("converged {converged} after {iters} sweeps, NMI {score:.4} (need > 0.10)"),
        ),
        Err(e) => Outcome::report(10, name, false, format!("{}: {e}", e.class())),
    }
}

fn main() -> ExitCode {
    let mut outcomes = vec![oracle_equivalence()];

    let started = Instant::now();
    let runs: Vec<Run> = (0..20u64)
        .map(|seed| run_planted(seed, 1 + seed as usize % 3, 1e5))
        .collect();
    let elapsed = started.elapsed();
    let guard_stops = runs
        .iter()
        .filter(|r| r.result.trace.stop_reason == StopReason::NumericGuard)
        .count();
    if guard_stops > 0 {
        eprintln!("warning: {guard_stops} planted runs hit the numeric guard");
    }

    outcomes.extend(descent(&runs));
    outcomes.push(convergence(&runs, elapsed));
    outcomes.push(recovery(&runs));
    outcomes.push(nonnegativity(&runs));
    outcomes.push(diffusion());
    outcomes.push(kkt(&runs));
    outcomes.push(discreteness(&runs));
    outcomes.push(scaling());
    outcomes.push(cornell());

    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u32> = outcomes
        .iter()
        .filter(|o| o.gating && o.status == Status::Fail)
        .map(|o| o.id)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all gating criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: gating criteria failed: {failed:?}");
        ExitCode::FAILURE
    }
}
