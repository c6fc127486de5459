use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::Serialize;

use super::rules::{update_c, update_p, update_u, update_v, update_w, update_x, GuardPolicy, Rule};
use crate::error::{Error, Result};
use crate::factors::{init_factors, EpsilonMode, FactorDims, Hyperparams, LatentFactors};
use crate::graph::MultiViewGraph;
use crate::model::ModelData;
use crate::objective::{objective, ObjectiveBreakdown};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    TMax,
    NumericGuard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based sweep index.
    pub iteration: usize,
    pub objective: ObjectiveBreakdown,
    /// Decrease of the penalized objective, `O(l-1) - O(l)`.
    pub delta: f64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub initial: ObjectiveBreakdown,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Absolute decrease threshold the run was checked against.
    pub threshold: f64,
}

impl FitTrace {
    pub fn final_objective(&self) -> &ObjectiveBreakdown {
        self.iterations
            .last()
            .map(|r| &r.objective)
            .unwrap_or(&self.initial)
    }

    /// CSV with one row per sweep, preceded by an iteration-0 row for the
    /// initial factors (empty `delta`). Columns: `iteration,total,feature,
    /// propagation_1..propagation_D,coupling_u,structural,coupling_v,ortho_c,
    /// ortho_w,penalized,delta,wall_ms`.
    pub fn to_csv(&self) -> String {
        let n_views = self.initial.propagation_terms.len();
        let mut out = String::from("iteration,total,feature");
        for i in 1..=n_views {
            out.push_str(&format!(",propagation_{i}"));
        }
        out.push_str(",coupling_u,structural,coupling_v,ortho_c,ortho_w,penalized,delta,wall_ms\n");

        let row = |it: usize, o: &ObjectiveBreakdown, delta: String, ms: f64| {
            let mut line = format!("{it},{:e},{:e}", o.total, o.feature_term);
            for t in &o.propagation_terms {
                line.push_str(&format!(",{t:e}"));
            }
            line.push_str(&format!(
                ",{:e},{:e},{:e},{:e},{:e},{:e},{delta},{ms:.3}\n",
                o.coupling_u, o.structural, o.coupling_v, o.ortho_c, o.ortho_w, o.penalized
            ));
            line
        };
        out.push_str(&row(0, &self.initial, String::new(), 0.0));
        for r in &self.iterations {
            out.push_str(&row(
                r.iteration,
                &r.objective,
                format!("{:e}", r.delta),
                r.wall_time.as_secs_f64() * 1e3,
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub factors: LatentFactors,
    pub trace: FitTrace,
}

/// Progress notifications emitted by [`fit_from`].
#[derive(Debug)]
pub enum FitEvent<'a> {
    /// One factor block was just replaced.
    Updated {
        iteration: usize,
        rule: Rule,
        factors: &'a LatentFactors,
    },
    /// A full sweep finished and its objective was evaluated.
    Iteration {
        iteration: usize,
        factors: &'a LatentFactors,
        objective: &'a ObjectiveBreakdown,
    },
}

/// One pass of all six rules in the order V, U, P^1..P^D, X, C, W. Each rule
/// sees the values produced by the rules before it.
pub fn sweep(
    factors: &mut LatentFactors,
    data: &ModelData,
    hp: &Hyperparams,
    guard: &GuardPolicy,
    mut on_update: impl FnMut(Rule, &LatentFactors),
) -> Result<()> {
    factors.v = update_v(factors, data, hp, guard)?;
    on_update(Rule::V, factors);
    factors.u = update_u(factors, data, hp, guard)?;
    on_update(Rule::U, factors);
    for i in 0..factors.p_views.len() {
        factors.p_views[i] = update_p(factors, data, hp, guard, i)?;
        on_update(Rule::P(i), factors);
    }
    factors.x = update_x(factors, data, hp, guard)?;
    on_update(Rule::X, factors);
    factors.c = update_c(factors, hp, guard)?;
    on_update(Rule::C, factors);
    factors.w = update_w(factors, hp, guard)?;
    on_update(Rule::W, factors);
    Ok(())
}

/// Fits `graph` with default guards, starting from seeded random factors.
pub fn fit(graph: &MultiViewGraph, hp: &Hyperparams) -> Result<FitResult> {
    fit_with(graph, hp, &GuardPolicy::default(), |_| {})
}

pub fn fit_with(
    graph: &MultiViewGraph,
    hp: &Hyperparams,
    guard: &GuardPolicy,
    observer: impl FnMut(FitEvent<'_>),
) -> Result<FitResult> {
    hp.validate()?;
    let data = ModelData::prepare(graph)?;
    let dims = FactorDims {
        n_vertices: data.n_vertices(),
        view_sizes: data.view_sizes(),
        k_clusters: hp.k_clusters,
        s_dim: hp.s_dim,
    };
    let init = init_factors(&dims, hp.seed)?;
    fit_from(&data, hp, init, guard, observer)
}

/// Runs the alternating loop from explicit starting factors.
///
/// `O` here is the penalized objective (`ObjectiveBreakdown::penalized`). The
/// `C` and `W` rules can raise the unpenalized `total` while lowering the
/// penalty, so only the penalized value decreases monotonically.
///
/// Stops once `O(l-1) - O(l) <= threshold`, after `t_max` sweeps, or when an
/// update or objective term turns non-finite. In the last case the factors
/// from before the failing sweep are returned.
pub fn fit_from(
    data: &ModelData,
    hp: &Hyperparams,
    init: LatentFactors,
    guard: &GuardPolicy,
    mut observer: impl FnMut(FitEvent<'_>),
) -> Result<FitResult> {
    hp.validate()?;
    if init.v.ncols() != hp.k_clusters || init.x.ncols() != hp.s_dim {
        return Err(Error::Shape(format!(
            "factors have K={} S={}, hyperparameters ask for K={} S={}",
            init.v.ncols(),
            init.x.ncols(),
            hp.k_clusters,
            hp.s_dim
        )));
    }
    let initial = objective(&init, data, hp)?;
    let threshold = match hp.epsilon_mode {
        EpsilonMode::Relative => hp.epsilon * initial.penalized,
        EpsilonMode::Absolute => hp.epsilon,
    };

    let mut factors = init;
    let mut previous = initial.penalized;
    let mut iterations = Vec::new();
    let mut stop_reason = StopReason::TMax;

    for iteration in 1..=hp.t_max {
        let started = Instant::now();
        let mut next = factors.clone();
        let swept = sweep(&mut next, data, hp, guard, |rule, f| {
            observer(FitEvent::Updated {
                iteration,
                rule,
                factors: f,
            })
        })
        .and_then(|_| objective(&next, data, hp));
        let current = match swept {
            Ok(o) => o,
            Err(Error::NonFinite { term }) => {
                warn!("iteration {iteration}: non-finite {term}, keeping previous factors");
                stop_reason = StopReason::NumericGuard;
                break;
            }
            Err(e) => return Err(e),
        };
        factors = next;

        let delta = previous - current.penalized;
        previous = current.penalized;
        observer(FitEvent::Iteration {
            iteration,
            factors: &factors,
            objective: &current,
        });
        debug!(
            "iteration {iteration}: O = {:e}, penalized = {:e}, delta = {delta:e}",
            current.total, current.penalized
        );
        iterations.push(IterationRecord {
            iteration,
            objective: current,
            delta,
            wall_time: started.elapsed(),
        });
        if delta <= threshold {
            stop_reason = StopReason::Threshold;
            break;
        }
    }

    Ok(FitResult {
        factors,
        trace: FitTrace {
            initial,
            iterations,
            converged: stop_reason == StopReason::Threshold,
            stop_reason,
            threshold,
        },
    })
}
