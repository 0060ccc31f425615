//! Empirical testers for the stability notions and for the geometric
//! hypotheses behind the instability theorem.
//!
//! Every probe is deterministic given its seed: trial t of grid cell c draws
//! from `SplitMix64::stream(seed, tag(c, t))`, so results do not depend on
//! thread count or scheduling. Hot loops stream iterates instead of storing
//! traces and, where the question is a yes/no escape, stop at the first exit.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::flow::{integrate, FlowParams};
use crate::hull::min_norm_point;
use crate::methods::{run_subgradient, IterateTrace, MethodParams, DIVERGENCE_NORM};
use crate::oracles::{catalog_get, ObjectiveSpec, SubgradientSelection};
use crate::rng::SplitMix64;
use crate::{all_finite, dist, norm, norm_sq, Point};

/// Grid of candidate weak-convexity moduli scanned by [`sharp_weak_check`].
/// Includes 36, the exact modulus of the strict2d entry.
const RHO_GRID: [f64; 14] = [
    0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 36.0, 64.0, 128.0, 256.0, 512.0, 1024.0,
];

/// Samples with d(x, S) or d(0, ∂f(x)) below this are treated as lying on
/// the respective set and excluded from ratios and log-log fits.
const ON_SET_TOL: f64 = 1e-13;

/// Outcome of a stability probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Some (δ, α) cell had zero escapes and every finer cell did too.
    StableEvidence,
    /// At least one run left the target ball and no clean corner exists.
    EscapeEvidence,
    /// The grids produced no usable runs.
    Inconclusive,
}

/// One escaping run: start, step size, exit index, and the exit point.
#[derive(Clone, Debug, Serialize)]
pub struct EscapeWitness {
    pub x0: Point,
    pub alpha: f64,
    pub step: usize,
    pub exit_point: Point,
}

/// Per-trial record of [`probe_strong_instability`].
#[derive(Clone, Debug, Serialize)]
pub struct InstabilityTrial {
    pub alpha: f64,
    pub x0: Point,
    /// First step whose iterate left B(x*, ε), if any.
    pub escaped_at: Option<usize>,
    /// min over ledgered steps of C(x_{k+1}) − C(x_k) − c₁(α)·d(x_k,S)^{θ₁};
    /// +∞ when no step stayed inside the valid neighborhood.
    pub chetaev_min_slack: f64,
    /// Number of steps the ledger covers.
    pub chetaev_steps: usize,
    /// Step at which an iterate left the valid neighborhood, closing the
    /// ledger, if that happened.
    pub chetaev_truncated_at: Option<usize>,
    /// max |C(x_{k+1}) − C(x_k) − exact_increment| over ledgered steps.
    pub identity_max_abs_dev: f64,
    /// The same deviation relative to max(1, |C(x_k)|, |C(x_{k+1})|).
    pub identity_max_rel_dev: f64,
    /// Extremes of f over the last 20% of iterates.
    pub tail_f_max: f64,
    pub tail_f_min: f64,
    pub final_f: f64,
}

/// Structured verdict shared by the stability probes.
///
/// `escape_fraction` is indexed by the probe's own grid: (δ row, α column)
/// for the local probe, one row per α with a single column for the global
/// and instability probes. `delta_grid`/`alpha_grid` carry the row/column
/// labels in the order used (coarse to fine).
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub verdict: Verdict,
    pub delta_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub escape_fraction: Vec<Vec<f64>>,
    /// Present iff some cell has a positive escape (or failure) fraction.
    pub witness: Option<EscapeWitness>,
    /// Named fitted constants (sup-ratios, slacks, tail statistics).
    pub fitted: BTreeMap<String, f64>,
    /// Per-trial ledgers; populated only by [`probe_strong_instability`].
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trials: Vec<InstabilityTrial>,
}

/// Grids and budgets of [`probe_local_stability`].
#[derive(Clone, Debug, Serialize)]
pub struct StabilityProbeParams {
    /// Target ball radius ε; a run escapes when an iterate leaves B(x*, ε).
    pub epsilon: f64,
    /// Initialization radii, scanned coarse to fine.
    pub delta_grid: Vec<f64>,
    /// Step sizes, scanned coarse to fine.
    pub alpha_grid: Vec<f64>,
    /// Seeded starts per (δ, α) cell.
    pub trials: usize,
    /// Iteration budget per start.
    pub k_steps: usize,
    /// The candidate stable point x*.
    pub anchor: Point,
    pub seed: u64,
    pub selection: SubgradientSelection,
}

impl StabilityProbeParams {
    /// Default grids: δ ∈ {0.1, 0.05, 0.01}, α ∈ {0.05, 0.02, 0.005},
    /// 40 trials per cell, 10⁴ iterations. Fine enough that the unstable
    /// catalog entries escape from every cell within the budget while the
    /// stable ones never leave.
    pub fn defaults(anchor: Point, epsilon: f64, seed: u64) -> Self {
        StabilityProbeParams {
            epsilon,
            delta_grid: vec![0.1, 0.05, 0.01],
            alpha_grid: vec![0.05, 0.02, 0.005],
            trials: 40,
            k_steps: 10_000,
            anchor,
            seed,
            selection: SubgradientSelection::default(),
        }
    }

    fn validate(&self, spec: &ObjectiveSpec) -> Result<(), Error> {
        spec.validate_point(&self.anchor)?;
        let grids_ok = !self.delta_grid.is_empty()
            && !self.alpha_grid.is_empty()
            && self.delta_grid.iter().chain(&self.alpha_grid).all(|v| *v > 0.0);
        if !grids_ok || self.epsilon <= 0.0 || self.trials == 0 || self.k_steps == 0 {
            return Err(Error::Precondition(
                "stability probe needs nonempty positive grids, ε > 0, and positive budgets"
                    .to_string(),
            ));
        }
        Ok(())
    }
}

/// Runs `trials` seeded starts uniform in B(x*, δ) for every (δ, α) cell and
/// counts runs with an iterate outside B(x*, ε) within the budget (divergent
/// and non-finite runs count as escapes). The verdict is stable evidence iff
/// some cell has zero escapes and all finer cells (smaller δ and α) do too.
pub fn probe_local_stability(
    spec: &ObjectiveSpec,
    p: &StabilityProbeParams,
) -> Result<ProbeReport, Error> {
    p.validate(spec)?;
    let mut deltas = p.delta_grid.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let mut alphas = p.alpha_grid.clone();
    alphas.sort_by(|a, b| b.total_cmp(a));
    let (nd, na) = (deltas.len(), alphas.len());

    let outcomes: Vec<Option<(usize, Point, Point)>> = (0..nd * na * p.trials)
        .into_par_iter()
        .map(|idx| {
            let cell = idx / p.trials;
            let (i, j) = (cell / na, cell % na);
            let mut g = SplitMix64::stream(p.seed, idx as u64);
            let x0 = g.in_ball(&p.anchor, deltas[i]);
            first_escape(spec, &x0, alphas[j], p.selection, &p.anchor, p.epsilon, p.k_steps)
                .map(|(k, exit)| (k, x0, exit))
        })
        .collect();

    let mut escapes = vec![vec![0usize; na]; nd];
    let mut witness = None;
    for (idx, outcome) in outcomes.iter().enumerate() {
        if let Some((k, x0, exit)) = outcome {
            let cell = idx / p.trials;
            escapes[cell / na][cell % na] += 1;
            if witness.is_none() {
                witness = Some(EscapeWitness {
                    x0: x0.clone(),
                    alpha: alphas[cell % na],
                    step: *k,
                    exit_point: exit.clone(),
                });
            }
        }
    }

    let stable = (0..nd).any(|i| {
        (0..na).any(|j| (i..nd).all(|i2| (j..na).all(|j2| escapes[i2][j2] == 0)))
    });
    let escape_fraction: Vec<Vec<f64>> = escapes
        .iter()
        .map(|row| row.iter().map(|&e| e as f64 / p.trials as f64).collect())
        .collect();
    let max_frac = escape_fraction
        .iter()
        .flatten()
        .fold(0.0f64, |a, &v| a.max(v));
    let mut fitted = BTreeMap::new();
    fitted.insert("max_escape_fraction".to_string(), max_frac);

    Ok(ProbeReport {
        verdict: if stable {
            Verdict::StableEvidence
        } else {
            Verdict::EscapeEvidence
        },
        delta_grid: deltas,
        alpha_grid: alphas,
        escape_fraction,
        witness,
        fitted,
        trials: Vec::new(),
    })
}

/// Streams constant-step subgradient iterates from `x0` and returns the
/// first (step, point) outside B(anchor, ε), treating divergence as an
/// escape; `None` when all `k_steps` iterates stay inside.
fn first_escape(
    spec: &ObjectiveSpec,
    x0: &[f64],
    alpha: f64,
    sel: SubgradientSelection,
    anchor: &[f64],
    epsilon: f64,
    k_steps: usize,
) -> Option<(usize, Point)> {
    if dist(x0, anchor) > epsilon {
        return Some((0, x0.to_vec()));
    }
    let mut x = x0.to_vec();
    for k in 1..=k_steps {
        let s = spec.subgrad(&x, sel);
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi -= alpha * si;
        }
        if !all_finite(&x) || dist(&x, anchor) > epsilon {
            return Some((k, x));
        }
    }
    None
}

/// Evaluates the boundary-segment construction showing δ < ε is necessary
/// for the strict2d entry: builds
/// x(t) = t·(√(−9/128 + √(81/16384 + 9ε²/64)), −3/16 + √(9/256 + ε²)),
/// which lies on the sphere of radius ε at t = 1, applies one subgradient
/// step of size α, and returns (start, ‖after one step‖). For t close
/// enough to 1 the norm exceeds ε; at t = 0 the min-norm step from the
/// origin is zero and the norm stays 0.
pub fn probe_boundary_exit_strict2d(
    epsilon: f64,
    alpha: f64,
    t: f64,
) -> Result<(Point, f64), Error> {
    if !(epsilon > 0.0 && alpha > 0.0) {
        return Err(Error::Precondition(format!(
            "boundary probe needs ε, α > 0, got ε={epsilon}, α={alpha}"
        )));
    }
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Precondition(format!(
            "boundary probe needs t in [0, 1), got {t}"
        )));
    }
    let x1 = t * (-9.0 / 128.0 + (81.0 / 16384.0 + 9.0 / 64.0 * epsilon * epsilon).sqrt()).sqrt();
    let x2 = t * (-3.0 / 16.0 + (9.0 / 256.0 + epsilon * epsilon).sqrt());
    let start = vec![x1, x2];
    let spec = catalog_get("strict2d")?;
    let s = spec.subgrad(&start, SubgradientSelection::min_norm());
    let after: Point = start
        .iter()
        .zip(&s)
        .map(|(xi, si)| xi - alpha * si)
        .collect();
    Ok((start, norm(&after)))
}

/// Which iteration to drive in [`probe_global_stability`].
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GlobalMethod {
    Subgradient,
    Momentum { beta: f64, gamma: f64 },
    Reshuffling { beta: f64, gamma: f64 },
    CyclicCd,
}

/// Budgets of [`probe_global_stability`].
#[derive(Clone, Debug, Serialize)]
pub struct GlobalProbeParams {
    /// Tail tolerance: both the f-value oscillation over the last 20% of
    /// iterates and the tail minimum of the ε-criticality proxy (min-norm
    /// over the hull of pieces active within ε of the iterate) must stay
    /// within ε.
    pub epsilon: f64,
    pub alpha_grid: Vec<f64>,
    pub trials: usize,
    /// Total iterate updates per run (inner steps for the epoch methods).
    pub k_steps: usize,
    pub seed: u64,
    pub selection: SubgradientSelection,
    pub method: GlobalMethod,
}

/// Runs `trials` seeded starts uniform in `x0_box` for every α, streams
/// `k_steps` updates of the chosen method, and tests the tail (last 20% of
/// iterates): f-value oscillation ⩽ ε and tail minimum of the ε-criticality
/// proxy ⩽ ε. The proxy is the min-norm element over the hull of
/// [`ObjectiveSpec::generators_within`] at radius ε rather than pointwise
/// d(0, ∂f(x_k)): around a sharp (kink) critical point the subdifferential
/// jumps, so iterates chatter at step-size distance without ever landing on
/// the kink and the pointwise distance never drops, while the widened hull
/// contains 0 exactly when a critical kink lies within ε. The per-α "escape
/// fraction" column is the fraction of failing trials.
pub fn probe_global_stability(
    spec: &ObjectiveSpec,
    x0_box: &[(f64, f64)],
    p: &GlobalProbeParams,
) -> Result<ProbeReport, Error> {
    if x0_box.is_empty() || x0_box.iter().any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::Precondition(
            "x0 box must be nonempty with lo ⩽ hi per axis".to_string(),
        ));
    }
    if let Some(d) = spec.dim() {
        if d != x0_box.len() {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x0_box.len(),
            });
        }
    }
    if p.alpha_grid.is_empty()
        || p.alpha_grid.iter().any(|a| *a <= 0.0)
        || p.epsilon <= 0.0
        || p.trials == 0
        || p.k_steps == 0
    {
        return Err(Error::Precondition(
            "global probe needs a positive α grid, ε > 0, and positive budgets".to_string(),
        ));
    }
    let center: Point = x0_box.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    if spec.generators(&center).is_none() {
        return Err(Error::UnsupportedOracle {
            id: spec.id().to_string(),
            oracle: "min-norm proxy (generators)",
        });
    }
    match p.method {
        GlobalMethod::Reshuffling { .. } if spec.num_components().is_none() => {
            return Err(Error::UnsupportedOracle {
                id: spec.id().to_string(),
                oracle: "components",
            });
        }
        GlobalMethod::CyclicCd if spec.gradient(&center).is_none() => {
            return Err(Error::UnsupportedOracle {
                id: spec.id().to_string(),
                oracle: "gradient",
            });
        }
        _ => {}
    }

    struct Tail {
        failed: bool,
        osc: f64,
        dmin: f64,
        x0: Point,
        last: Point,
    }

    let na = p.alpha_grid.len();
    let outcomes: Vec<Tail> = (0..na * p.trials)
        .into_par_iter()
        .map(|idx| {
            let j = idx / p.trials;
            let mut g = SplitMix64::stream(p.seed, idx as u64);
            let x0 = g.in_box(x0_box);
            let alpha = p.alpha_grid[j];
            let total = planned_iterates(spec, &p.method, p.k_steps, x0_box.len());
            let tail_start = total.saturating_sub(total / 5);
            let (mut fmin, mut fmax, mut dmin) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
            let mut last = x0.clone();
            let end = stream_iterates(
                spec,
                &p.method,
                &x0,
                alpha,
                p.selection,
                p.seed ^ idx as u64,
                p.k_steps,
                &mut |k, x| {
                    if k + 1 == total {
                        last = x.to_vec();
                    }
                    if k >= tail_start {
                        let f = spec.value(x);
                        fmin = fmin.min(f);
                        fmax = fmax.max(f);
                        // Once the tail minimum sits far below ε the verdict
                        // cannot change, so the hull solve is skipped.
                        if dmin > 1e-6 * p.epsilon {
                            let d = spec
                                .generators_within(x, p.epsilon)
                                .map(|gens| min_norm_point(&gens).1)
                                .unwrap_or(f64::NAN);
                            if !d.is_nan() {
                                dmin = dmin.min(d);
                            }
                        }
                    }
                    true
                },
            );
            let osc = fmax - fmin;
            let failed =
                end != StreamEnd::Completed || !(osc <= p.epsilon) || !(dmin <= p.epsilon);
            Tail {
                failed,
                osc,
                dmin,
                x0,
                last,
            }
        })
        .collect();

    let mut escape_fraction = vec![vec![0.0f64]; na];
    let mut witness = None;
    let (mut worst_osc, mut worst_dmin) = (0.0f64, 0.0f64);
    for (idx, o) in outcomes.iter().enumerate() {
        let j = idx / p.trials;
        if o.failed {
            escape_fraction[j][0] += 1.0 / p.trials as f64;
            if witness.is_none() {
                witness = Some(EscapeWitness {
                    x0: o.x0.clone(),
                    alpha: p.alpha_grid[j],
                    step: p.k_steps,
                    exit_point: o.last.clone(),
                });
            }
        }
        worst_osc = worst_osc.max(o.osc);
        if o.dmin.is_finite() {
            worst_dmin = worst_dmin.max(o.dmin);
        }
    }
    let mut fitted = BTreeMap::new();
    fitted.insert("max_tail_oscillation".to_string(), worst_osc);
    fitted.insert("max_tail_dproxy".to_string(), worst_dmin);

    Ok(ProbeReport {
        verdict: if witness.is_none() {
            Verdict::StableEvidence
        } else {
            Verdict::EscapeEvidence
        },
        delta_grid: Vec::new(),
        alpha_grid: p.alpha_grid.clone(),
        escape_fraction,
        witness,
        fitted,
        trials: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StreamEnd {
    Completed,
    Diverged,
    Stopped,
}

/// Total iterates (including x0) a streamed run will visit.
fn planned_iterates(
    spec: &ObjectiveSpec,
    method: &GlobalMethod,
    k_steps: usize,
    dim: usize,
) -> usize {
    match method {
        GlobalMethod::Subgradient | GlobalMethod::Momentum { .. } => k_steps + 1,
        GlobalMethod::Reshuffling { .. } => {
            let n = spec.num_components().unwrap_or(1);
            (k_steps / n).max(1) * n + 1
        }
        GlobalMethod::CyclicCd => (k_steps / dim).max(1) * dim + 1,
    }
}

/// Streams the iterates of one run, calling `visit(k, x_k)` for k = 0, 1, …
/// until the budget is exhausted, the iterates diverge, or `visit` returns
/// false. The epoch methods run ⌊k_steps/n⌋ epochs (at least one).
#[allow(clippy::too_many_arguments)]
fn stream_iterates(
    spec: &ObjectiveSpec,
    method: &GlobalMethod,
    x0: &[f64],
    alpha: f64,
    sel: SubgradientSelection,
    seed: u64,
    k_steps: usize,
    visit: &mut dyn FnMut(usize, &[f64]) -> bool,
) -> StreamEnd {
    if !visit(0, x0) {
        return StreamEnd::Stopped;
    }
    let step_from = |x: &[f64], s: &[f64]| -> Point {
        x.iter().zip(s).map(|(xi, si)| xi - alpha * si).collect()
    };
    let bad = |x: &[f64]| !all_finite(x) || norm(x) > DIVERGENCE_NORM;

    match *method {
        GlobalMethod::Subgradient => {
            let mut x = x0.to_vec();
            for k in 1..=k_steps {
                let s = spec.subgrad(&x, sel);
                x = step_from(&x, &s);
                if bad(&x) {
                    return StreamEnd::Diverged;
                }
                if !visit(k, &x) {
                    return StreamEnd::Stopped;
                }
            }
        }
        GlobalMethod::Momentum { beta, gamma } => {
            let mut prev = x0.to_vec();
            let mut cur = x0.to_vec();
            for k in 1..=k_steps {
                let y: Point = cur
                    .iter()
                    .zip(&prev)
                    .map(|(c, p)| c + gamma * (c - p))
                    .collect();
                let s = spec.subgrad(&y, sel);
                let xn: Point = cur
                    .iter()
                    .zip(&prev)
                    .zip(&s)
                    .map(|((c, p), si)| c + beta * (c - p) - alpha * si)
                    .collect();
                if bad(&xn) {
                    return StreamEnd::Diverged;
                }
                if !visit(k, &xn) {
                    return StreamEnd::Stopped;
                }
                prev = cur;
                cur = xn;
            }
        }
        GlobalMethod::Reshuffling { beta, gamma } => {
            let n = spec.num_components().expect("checked by the caller");
            let epochs = (k_steps / n).max(1);
            let mut rng = SplitMix64::stream(seed, 0x5217);
            let mut prev = x0.to_vec();
            let mut cur = x0.to_vec();
            let mut k = 0;
            for _ in 0..epochs {
                for comp in rng.permutation(n) {
                    let y: Point = cur
                        .iter()
                        .zip(&prev)
                        .map(|(c, p)| c + gamma * (c - p))
                        .collect();
                    let s = spec.component_subgrad(comp, &y, sel);
                    let xn: Point = cur
                        .iter()
                        .zip(&prev)
                        .zip(&s)
                        .map(|((c, p), si)| c + beta * (c - p) - alpha * si)
                        .collect();
                    if bad(&xn) {
                        return StreamEnd::Diverged;
                    }
                    k += 1;
                    if !visit(k, &xn) {
                        return StreamEnd::Stopped;
                    }
                    prev = cur;
                    cur = xn;
                }
            }
        }
        GlobalMethod::CyclicCd => {
            let n = x0.len();
            let epochs = (k_steps / n).max(1);
            let mut rng = SplitMix64::stream(seed, 0xccd0);
            let mut x = x0.to_vec();
            let mut k = 0;
            for _ in 0..epochs {
                for j in rng.permutation(n) {
                    let grad = spec.gradient(&x).expect("checked by the caller");
                    x[j] -= alpha * grad[j];
                    if bad(&x) {
                        return StreamEnd::Diverged;
                    }
                    k += 1;
                    if !visit(k, &x) {
                        return StreamEnd::Stopped;
                    }
                }
            }
        }
    }
    StreamEnd::Completed
}

/// Budgets of [`probe_strong_instability`].
#[derive(Clone, Debug, Serialize)]
pub struct InstabilityParams {
    /// Escape ball radius ε around x*.
    pub epsilon: f64,
    /// Starts are uniform in B(x*, radius0·(1 + ‖x*‖)).
    pub radius0: f64,
    /// Step sizes are uniform in [alpha_lo, alpha_hi].
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub trials: usize,
    pub k_steps: usize,
    pub seed: u64,
    pub selection: SubgradientSelection,
}

/// Samples (α, x₀) per trial, streams constant-step subgradient iterates,
/// and reports the fraction of trials escaping B(x*, ε) within the budget.
/// When the entry carries a Chetaev bundle, each run also gets an increment
/// ledger over the steps whose endpoints stay inside the valid neighborhood:
/// slack against the c₁(α)·d(x,S)^{θ₁} lower bound and deviation from the
/// exact increment. Entries without the bundle (stable negative controls)
/// still report the escape fraction.
pub fn probe_strong_instability(
    spec: &ObjectiveSpec,
    x_star: &[f64],
    p: &InstabilityParams,
) -> Result<ProbeReport, Error> {
    spec.validate_point(x_star)?;
    if !(p.epsilon > 0.0
        && p.radius0 > 0.0
        && p.alpha_lo > 0.0
        && p.alpha_lo <= p.alpha_hi
        && p.trials > 0
        && p.k_steps > 0)
    {
        return Err(Error::Precondition(
            "instability probe needs ε, radius0 > 0, 0 < α_lo ⩽ α_hi, and positive budgets"
                .to_string(),
        ));
    }

    let trials: Vec<InstabilityTrial> = (0..p.trials)
        .into_par_iter()
        .map(|t| run_instability_trial(spec, x_star, p, t))
        .collect();

    let escaped = trials.iter().filter(|t| t.escaped_at.is_some()).count();
    let fraction = escaped as f64 / p.trials as f64;
    let witness = trials.iter().find(|t| t.escaped_at.is_some()).map(|t| EscapeWitness {
        x0: t.x0.clone(),
        alpha: t.alpha,
        step: t.escaped_at.unwrap(),
        exit_point: Vec::new(),
    });

    let mut fitted = BTreeMap::new();
    fitted.insert("escape_fraction".to_string(), fraction);
    let min_slack = trials.iter().fold(f64::INFINITY, |a, t| a.min(t.chetaev_min_slack));
    if min_slack.is_finite() {
        fitted.insert("min_chetaev_slack".to_string(), min_slack);
    }
    fitted.insert(
        "identity_max_abs_dev".to_string(),
        trials.iter().fold(0.0f64, |a, t| a.max(t.identity_max_abs_dev)),
    );
    fitted.insert(
        "identity_max_rel_dev".to_string(),
        trials.iter().fold(0.0f64, |a, t| a.max(t.identity_max_rel_dev)),
    );
    fitted.insert(
        "tail_f_max".to_string(),
        trials.iter().fold(f64::NEG_INFINITY, |a, t| a.max(t.tail_f_max)),
    );
    fitted.insert(
        "tail_f_min".to_string(),
        trials.iter().fold(f64::INFINITY, |a, t| a.min(t.tail_f_min)),
    );

    Ok(ProbeReport {
        verdict: if escaped > 0 {
            Verdict::EscapeEvidence
        } else {
            Verdict::StableEvidence
        },
        delta_grid: Vec::new(),
        alpha_grid: vec![p.alpha_lo, p.alpha_hi],
        escape_fraction: vec![vec![fraction]],
        witness,
        fitted,
        trials,
    })
}

fn run_instability_trial(
    spec: &ObjectiveSpec,
    x_star: &[f64],
    p: &InstabilityParams,
    t: usize,
) -> InstabilityTrial {
    let bundle = spec.chetaev();
    let cs = spec.critical_set();

    let mut g = SplitMix64::stream(p.seed, t as u64);
    let alpha = g.uniform(p.alpha_lo, p.alpha_hi);
    let x0 = g.in_ball(x_star, p.radius0 * (1.0 + norm(x_star)));
    let (anchor, radius, c1, theta1) = match (&bundle, &cs) {
        (Some(b), Some(c)) => (c.anchor(), c.valid_radius(), b.c1_of_alpha(alpha), b.theta1()),
        _ => (x_star.to_vec(), 0.0, 0.0, 0.0),
    };

    let tail_start = (p.k_steps + 1).saturating_sub((p.k_steps + 1) / 5);
    let in_hood = |x: &[f64]| dist(x, &anchor) <= radius;

    let mut x = x0.clone();
    let mut escaped_at = if dist(&x, x_star) > p.epsilon { Some(0) } else { None };
    let mut ledger_open = bundle.is_some() && cs.is_some();
    let mut truncated_at = None;
    let mut min_slack = f64::INFINITY;
    let mut steps = 0usize;
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    let (mut tail_min, mut tail_max) = (f64::INFINITY, f64::NEG_INFINITY);

    for k in 1..=p.k_steps {
        let ledger_this = ledger_open && in_hood(&x);
        let (c_before, d_before, exact) = if ledger_this {
            let b = bundle.as_ref().expect("ledger implies bundle");
            let c = cs.as_ref().expect("ledger implies critical set");
            (b.c(&x), c.distance(&x), b.exact_increment(&x, p.selection, alpha))
        } else {
            (0.0, 0.0, 0.0)
        };

        let s = spec.subgrad(&x, p.selection);
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi -= alpha * si;
        }
        if !all_finite(&x) || norm(&x) > DIVERGENCE_NORM {
            escaped_at.get_or_insert(k);
            break;
        }

        if ledger_this {
            if in_hood(&x) {
                let c_after = bundle.as_ref().expect("ledger implies bundle").c(&x);
                let inc = c_after - c_before;
                min_slack = min_slack.min(inc - c1 * d_before.powf(theta1));
                let dev = (inc - exact).abs();
                max_abs = max_abs.max(dev);
                max_rel = max_rel.max(dev / 1.0f64.max(c_before.abs()).max(c_after.abs()));
                steps += 1;
            } else {
                ledger_open = false;
                truncated_at = Some(k);
            }
        } else if ledger_open && !in_hood(&x) {
            ledger_open = false;
            truncated_at = Some(k);
        }

        if escaped_at.is_none() && dist(&x, x_star) > p.epsilon {
            escaped_at = Some(k);
        }
        if k + 1 > tail_start {
            let f = spec.value(&x);
            tail_min = tail_min.min(f);
            tail_max = tail_max.max(f);
        }
    }
    let final_f = spec.value(&x);
    if !tail_min.is_finite() {
        tail_min = final_f;
        tail_max = final_f;
    }

    InstabilityTrial {
        alpha,
        x0,
        escaped_at,
        chetaev_min_slack: min_slack,
        chetaev_steps: steps,
        chetaev_truncated_at: truncated_at,
        identity_max_abs_dev: max_abs,
        identity_max_rel_dev: max_rel,
        tail_f_max: tail_max,
        tail_f_min: tail_min,
        final_f,
    }
}

/// Chetaev increment ledger of a stored trace.
#[derive(Clone, Debug, Serialize)]
pub struct ChetaevLedger {
    /// residuals[k] = C(x_{k+1}) − C(x_k) − c₁(α)·d(x_k, S)^{θ₁}.
    pub residuals: Vec<f64>,
    pub min_slack: f64,
    /// First step with an endpoint outside the valid neighborhood, if any;
    /// the ledger stops there.
    pub truncated_at: Option<usize>,
}

/// Recomputes the Chetaev increments along a subgradient trace and checks
/// them against the c₁(α)·d^{θ₁} lower bound; truncates at the first step
/// with an endpoint outside the oracle's valid neighborhood.
pub fn chetaev_increment_check(
    trace: &IterateTrace,
    spec: &ObjectiveSpec,
) -> Result<ChetaevLedger, Error> {
    let bundle = spec.chetaev().ok_or_else(|| Error::UnsupportedOracle {
        id: spec.id().to_string(),
        oracle: "chetaev",
    })?;
    let cs = spec.critical_set().expect("chetaev entries carry a critical set");
    let anchor = cs.anchor();
    let alpha = trace.params.alpha;
    let c1 = bundle.c1_of_alpha(alpha);
    let theta1 = bundle.theta1();
    let in_hood = |x: &[f64]| dist(x, &anchor) <= cs.valid_radius();

    let mut residuals = Vec::new();
    let mut truncated_at = None;
    for k in 0..trace.points.len().saturating_sub(1) {
        let x = &trace.points[k];
        let xn = &trace.points[k + 1];
        if !in_hood(x) || !in_hood(xn) {
            truncated_at = Some(k);
            break;
        }
        let inc = bundle.c(xn) - bundle.c(x);
        residuals.push(inc - c1 * cs.distance(x).powf(theta1));
    }
    if residuals.is_empty() {
        return Err(Error::InsufficientData(
            "no trace step lies inside the valid neighborhood".to_string(),
        ));
    }
    let min_slack = residuals.iter().fold(f64::INFINITY, |a, &r| a.min(r));
    Ok(ChetaevLedger {
        residuals,
        min_slack,
        truncated_at,
    })
}

/// Samples the punctured ball around x* with log-uniform radii, collects
/// (d(0, ∂f(x)), d(x, S)) pairs, and fits log d(x, S) = log c₂ + θ₂·log
/// d(0, ∂f(x)) by least squares on the upper envelope (per-bin maxima of
/// log d(x,S) over 12 bins in log d(0,∂f)). Returns (θ₂_hat, c₂_hat).
pub fn fit_metric_subregularity(
    spec: &ObjectiveSpec,
    x_star: &[f64],
    sample_radius: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), Error> {
    spec.validate_point(x_star)?;
    let cs = spec.critical_set().ok_or_else(|| Error::UnsupportedOracle {
        id: spec.id().to_string(),
        oracle: "critical_set",
    })?;
    if sample_radius <= 0.0 {
        return Err(Error::Precondition("sample_radius must be positive".to_string()));
    }

    let mut g = SplitMix64::stream(seed, 0xf17);
    let mut pairs = Vec::new();
    for _ in 0..samples {
        let x = match log_radius_sample(&mut g, x_star, sample_radius) {
            Some(x) => x,
            None => continue,
        };
        if dist(&x, &cs.anchor()) > cs.valid_radius() {
            continue;
        }
        let ds = cs.distance(&x);
        let gn = match spec.min_norm_subgradient(&x) {
            Ok((_, gn)) => gn,
            Err(_) => continue,
        };
        if ds < ON_SET_TOL || gn < ON_SET_TOL {
            continue;
        }
        pairs.push((gn.ln(), ds.ln()));
    }
    if pairs.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "only {} usable samples for the subregularity fit",
            pairs.len()
        )));
    }

    let envelope = binned_maxima(&pairs, 12);
    if envelope.len() < 3 {
        return Err(Error::InsufficientData(
            "fewer than 3 nonempty bins in the subregularity envelope".to_string(),
        ));
    }
    let (slope, intercept) = least_squares(&envelope);
    Ok((slope, intercept.exp()))
}

/// Uniform direction scaled to a log-uniform radius in (radius·10⁻⁶, radius].
fn log_radius_sample(g: &mut SplitMix64, center: &[f64], radius: f64) -> Option<Point> {
    let r = radius * 10.0f64.powf(g.uniform(-6.0, 0.0));
    let raw = g.in_ball(&vec![0.0; center.len()], 1.0);
    let n = norm(&raw);
    if n < 1e-9 {
        return None;
    }
    Some(
        center
            .iter()
            .zip(&raw)
            .map(|(c, d)| c + r * d / n)
            .collect(),
    )
}

/// Per-bin maxima of y over `bins` equal-width bins in x; returns the (x, y)
/// sample attaining the max in each nonempty bin, so the envelope fit is
/// unbiased by the bin width.
fn binned_maxima(pairs: &[(f64, f64)], bins: usize) -> Vec<(f64, f64)> {
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo).is_finite() || hi - lo < 1e-12 {
        return Vec::new();
    }
    let width = (hi - lo) / bins as f64;
    let mut maxima: Vec<Option<(f64, f64)>> = vec![None; bins];
    for &(x, y) in pairs {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        if maxima[b].map_or(true, |(_, best)| y > best) {
            maxima[b] = Some((x, y));
        }
    }
    maxima.into_iter().flatten().collect()
}

/// Ordinary least squares y = intercept + slope·x.
fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Max over v ∈ ∂f(x) of ‖P_{T_S(y)}(v) − ∇_S f(y)‖ / ‖x − y‖ for a given
/// pair (x off S, y on S∩U).
pub fn verdier_ratio_at(spec: &ObjectiveSpec, x: &[f64], y: &[f64]) -> Result<f64, Error> {
    let cs = spec.critical_set().ok_or_else(|| Error::UnsupportedOracle {
        id: spec.id().to_string(),
        oracle: "critical_set",
    })?;
    let d = dist(x, y);
    if d < ON_SET_TOL {
        return Err(Error::Precondition("x and y coincide".to_string()));
    }
    let vs = spec
        .generators(x)
        .unwrap_or_else(|| vec![spec.subgrad(x, SubgradientSelection::min_norm())]);
    let rg = cs.riemannian_grad(y);
    Ok(vs
        .iter()
        .map(|v| {
            let pt = cs.tangent_project(y, v);
            let diff: Vec<f64> = pt.iter().zip(&rg).map(|(a, b)| a - b).collect();
            norm(&diff) / d
        })
        .fold(0.0f64, f64::max))
}

/// Samples pairs (x ∈ U∖S, y = P_S(x)) with log-uniform distances, plus the
/// entry's kink-manifold points at shrinking radii, and evaluates the
/// Verdier ratio over every generator at x. Returns (sup ratio, diverging),
/// where diverging means the per-bin suprema grow as ‖x − y‖ → 0 (fitted
/// log-log slope below −0.25 over ⩾ 3 log bins).
pub fn verdier_ratio_scan(
    spec: &ObjectiveSpec,
    x_star: &[f64],
    sample_radius: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, bool), Error> {
    spec.validate_point(x_star)?;
    let cs = spec.critical_set().ok_or_else(|| Error::UnsupportedOracle {
        id: spec.id().to_string(),
        oracle: "critical_set",
    })?;
    if sample_radius <= 0.0 {
        return Err(Error::Precondition("sample_radius must be positive".to_string()));
    }

    let mut g = SplitMix64::stream(seed, 0x7e5d);
    let mut records: Vec<(f64, f64)> = Vec::new();
    for i in 0..samples {
        let candidates: Vec<Point> = if i % 2 == 0 {
            log_radius_sample(&mut g, x_star, sample_radius)
                .into_iter()
                .collect()
        } else {
            let r = sample_radius * 10.0f64.powf(g.uniform(-4.0, 0.0));
            spec.kink_samples(x_star, r, 2, seed.wrapping_add(i as u64))
        };
        for x in candidates {
            if dist(&x, &cs.anchor()) > cs.valid_radius() {
                continue;
            }
            let d = cs.distance(&x);
            if d < ON_SET_TOL {
                continue;
            }
            let y = cs.project(&x);
            if let Ok(ratio) = verdier_ratio_at(spec, &x, &y) {
                records.push((dist(&x, &y).ln(), ratio.max(1e-300).ln()));
            }
        }
    }
    if records.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "only {} usable samples for the Verdier scan",
            records.len()
        )));
    }

    let sup_ratio = records.iter().map(|r| r.1.exp()).fold(0.0f64, f64::max);
    let envelope = binned_maxima(&records, 8);
    let diverging = if envelope.len() >= 3 {
        least_squares(&envelope).0 < -0.25
    } else {
        false
    };
    Ok((sup_ratio, diverging))
}

/// Witness pair for a failed weak-convexity upper bound.
#[derive(Clone, Debug, Serialize)]
pub struct SharpWeakWitness {
    pub x: Point,
    pub s: Point,
    /// The modulus ρ the pair would require.
    pub rho_needed: f64,
}

/// Result of [`sharp_weak_check`].
#[derive(Clone, Debug, Serialize)]
pub struct SharpWeakReport {
    /// inf over samples of (f(x) − f(x*)) / ‖x − x*‖.
    pub mu_hat: f64,
    /// Smallest grid ρ making f(x) − f(x*) ⩽ ⟨x − x*, s⟩ + (ρ/2)‖x − x*‖²
    /// hold for all sampled (x, s); None when no grid value works.
    pub rho_hat: Option<f64>,
    /// Largest ρ any sampled pair demands.
    pub rho_required: f64,
    /// A pair exceeding the whole grid, present iff `rho_hat` is None.
    pub violated: Option<SharpWeakWitness>,
}

/// Estimates the sharpness modulus μ and weak-convexity modulus ρ around x*
/// from ball samples (log-uniform radii) plus the entry's kink-manifold
/// points at radii shrinking to ~10⁻¹⁴·radius, so scale-dependent
/// violations near x* are found.
pub fn sharp_weak_check(
    spec: &ObjectiveSpec,
    x_star: &[f64],
    sample_radius: f64,
    samples: usize,
    seed: u64,
) -> Result<SharpWeakReport, Error> {
    spec.validate_point(x_star)?;
    if sample_radius <= 0.0 {
        return Err(Error::Precondition("sample_radius must be positive".to_string()));
    }
    let mut g = SplitMix64::stream(seed, 0x5a9);
    let mut points: Vec<Point> = Vec::new();
    for _ in 0..samples {
        if let Some(x) = log_radius_sample(&mut g, x_star, sample_radius) {
            points.push(x);
        }
    }
    for j in 0..46u32 {
        points.extend(spec.kink_samples(
            x_star,
            sample_radius * 0.5f64.powi(j as i32),
            4,
            seed.wrapping_add(j as u64),
        ));
    }

    let f_star = spec.value(x_star);
    let mut mu_hat = f64::INFINITY;
    let mut rho_required = 0.0f64;
    let mut violated_pair: Option<(Point, Point)> = None;
    for x in &points {
        let r2: f64 = norm_sq(&x.iter().zip(x_star).map(|(a, b)| a - b).collect::<Vec<_>>());
        let r = r2.sqrt();
        if r < 1e-12 {
            continue;
        }
        let fx = spec.value(x);
        mu_hat = mu_hat.min((fx - f_star) / r);

        let gens = spec
            .generators(x)
            .unwrap_or_else(|| vec![spec.subgrad(x, SubgradientSelection::default())]);
        for s in gens {
            let inner: f64 = x.iter().zip(x_star).zip(&s).map(|((a, b), si)| (a - b) * si).sum();
            let excess = fx - f_star - inner;
            let tol = 1e-10 * (1.0 + fx.abs() + r2);
            if excess > tol {
                let needed = excess / (0.5 * r2);
                if needed > rho_required {
                    rho_required = needed;
                    violated_pair = Some((x.clone(), s.clone()));
                }
            }
        }
    }
    if !mu_hat.is_finite() {
        return Err(Error::InsufficientData(
            "no sample distinct from x*".to_string(),
        ));
    }

    let rho_hat = RHO_GRID.iter().copied().find(|rho| *rho >= rho_required);
    let violated = if rho_hat.is_none() {
        violated_pair.map(|(x, s)| SharpWeakWitness {
            x,
            s,
            rho_needed: rho_required,
        })
    } else {
        None
    };
    Ok(SharpWeakReport {
        mu_hat,
        rho_hat,
        rho_required,
        violated,
    })
}

/// For each α runs the subgradient method with min-norm selection for
/// K = ⌊T/α⌋ steps, integrates the trajectory with h = α/100 and the given
/// scaling c, and reports sup over k ⩽ K of ‖x_k − x(kα)‖. Divergence of
/// either side propagates as an error.
pub fn probe_trajectory_approximation(
    spec: &ObjectiveSpec,
    x0: &[f64],
    alpha_grid: &[f64],
    t_end: f64,
    c: f64,
) -> Result<Vec<(f64, f64)>, Error> {
    spec.validate_point(x0)?;
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a > 0.0 && *a <= t_end)) {
        return Err(Error::Precondition(
            "alpha grid must be nonempty with 0 < α ⩽ T".to_string(),
        ));
    }
    let mut out = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let k_steps = (t_end / alpha).floor() as usize;
        let mut params = MethodParams::new(alpha);
        params.selection = SubgradientSelection::min_norm();
        let trace = run_subgradient(spec, x0, params, k_steps)?;
        let flow = integrate(
            spec,
            x0,
            FlowParams {
                c,
                h: alpha / 100.0,
                t_end: k_steps as f64 * alpha,
                selection: SubgradientSelection::min_norm(),
            },
        )?;
        let sup = (0..=k_steps)
            .map(|k| {
                let idx = (k * 100).min(flow.states.len() - 1);
                dist(&trace.points[k], &flow.states[idx])
            })
            .fold(0.0f64, f64::max);
        out.push((alpha, sup));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::catalog_get;

    #[test]
    fn boundary_exit_leaves_the_ball_near_t_one() {
        let (start, after) = probe_boundary_exit_strict2d(1.0, 0.1, 0.999).unwrap();
        assert!(norm(&start) < 1.0);
        assert!(after > 1.0, "norm after one step {after}");
    }

    #[test]
    fn boundary_exit_smaller_ball() {
        let (_, after) = probe_boundary_exit_strict2d(0.5, 0.05, 0.9999).unwrap();
        assert!(after > 0.5, "norm after one step {after}");
    }

    #[test]
    fn boundary_exit_origin_rests() {
        let (start, after) = probe_boundary_exit_strict2d(1.0, 0.1, 0.0).unwrap();
        assert_eq!(start, vec![0.0, 0.0]);
        assert_eq!(after, 0.0);
    }

    #[test]
    fn boundary_exit_rejects_bad_t() {
        assert!(probe_boundary_exit_strict2d(1.0, 0.1, 1.0).is_err());
        assert!(probe_boundary_exit_strict2d(1.0, 0.1, -0.1).is_err());
        assert!(probe_boundary_exit_strict2d(0.0, 0.1, 0.5).is_err());
    }

    #[test]
    fn abs1d_local_probe_is_stable() {
        let spec = catalog_get("abs1d").unwrap();
        let mut p = StabilityProbeParams::defaults(vec![0.0], 0.1, 7);
        p.trials = 20;
        p.k_steps = 2_000;
        let report = probe_local_stability(&spec, &p).unwrap();
        assert_eq!(report.verdict, Verdict::StableEvidence);
        assert!(report.witness.is_none());
        assert!(report.escape_fraction.iter().flatten().all(|&f| f == 0.0));
    }

    #[test]
    fn relu_local_probe_escapes_with_witness() {
        let spec = catalog_get("relu_net").unwrap();
        let mut p = StabilityProbeParams::defaults(vec![1.0, 1.0, 0.0], 0.25, 7);
        p.trials = 10;
        let report = probe_local_stability(&spec, &p).unwrap();
        assert_eq!(report.verdict, Verdict::EscapeEvidence);
        let w = report.witness.expect("escaping run recorded");
        assert!(dist(&w.exit_point, &[1.0, 1.0, 0.0]) > 0.25);
    }

    #[test]
    fn local_probe_is_deterministic() {
        let spec = catalog_get("relu_net").unwrap();
        let mut p = StabilityProbeParams::defaults(vec![1.0, 1.0, 0.0], 0.25, 7);
        p.trials = 5;
        p.k_steps = 2_000;
        let a = probe_local_stability(&spec, &p).unwrap();
        let b = probe_local_stability(&spec, &p).unwrap();
        assert_eq!(a.escape_fraction, b.escape_fraction);
        assert_eq!(
            a.witness.as_ref().map(|w| w.x0.clone()),
            b.witness.as_ref().map(|w| w.x0.clone())
        );
    }

    #[test]
    fn global_probe_quad_stabilizes() {
        let spec = catalog_get("quad").unwrap();
        let p = GlobalProbeParams {
            epsilon: 0.01,
            alpha_grid: vec![0.1],
            trials: 10,
            k_steps: 2_000,
            seed: 11,
            selection: SubgradientSelection::default(),
            method: GlobalMethod::Subgradient,
        };
        let report = probe_global_stability(&spec, &[(-1.0, 1.0), (-1.0, 1.0)], &p).unwrap();
        assert_eq!(report.verdict, Verdict::StableEvidence);
        assert!(report.fitted["max_tail_dproxy"] <= 0.01);
    }

    #[test]
    fn global_probe_cyclic_cd_on_pow32() {
        // The square-root-type gradient chatters around the minimizers with
        // amplitude ~(cα)², so the tail d-proxy scales like α²: 0.25 at
        // α = 1e-2 and 0.025 at α = 1e-3. The finer step meets ε = 0.1.
        let spec = catalog_get("global_pow32").unwrap();
        let p = GlobalProbeParams {
            epsilon: 0.1,
            alpha_grid: vec![1e-3],
            trials: 5,
            k_steps: 40_000,
            seed: 11,
            selection: SubgradientSelection::default(),
            method: GlobalMethod::CyclicCd,
        };
        let report = probe_global_stability(&spec, &[(-2.0, 2.0), (-2.0, 2.0)], &p).unwrap();
        assert_eq!(report.verdict, Verdict::StableEvidence);
    }

    #[test]
    fn global_probe_rejects_missing_oracles() {
        let spec = catalog_get("global_l1").unwrap();
        let p = GlobalProbeParams {
            epsilon: 0.1,
            alpha_grid: vec![1e-3],
            trials: 1,
            k_steps: 10,
            seed: 0,
            selection: SubgradientSelection::default(),
            method: GlobalMethod::CyclicCd,
        };
        let err = probe_global_stability(&spec, &[(-2.0, 2.0), (-2.0, 2.0)], &p).unwrap_err();
        assert!(matches!(err, Error::UnsupportedOracle { .. }));
    }

    fn instability_params(epsilon: f64, trials: usize, k_steps: usize) -> InstabilityParams {
        InstabilityParams {
            epsilon,
            radius0: 1e-3,
            alpha_lo: 0.05,
            alpha_hi: 0.15,
            trials,
            k_steps,
            seed: 3,
            selection: SubgradientSelection::default(),
        }
    }

    #[test]
    fn relu_instability_escapes_with_exact_ledger() {
        let spec = catalog_get("relu_net").unwrap();
        let report =
            probe_strong_instability(&spec, &[1.0, 1.0, 0.0], &instability_params(0.5, 5, 10_000))
                .unwrap();
        assert_eq!(report.escape_fraction[0][0], 1.0);
        assert!(report.fitted["identity_max_abs_dev"] <= 1e-14);
        assert!(report.fitted["min_chetaev_slack"] >= -1e-14);
    }

    #[test]
    fn strict2d_negative_control_never_escapes() {
        let spec = catalog_get("strict2d").unwrap();
        let mut p = instability_params(0.5, 5, 5_000);
        p.alpha_lo = 1e-3;
        p.alpha_hi = 5e-3;
        let report = probe_strong_instability(&spec, &[0.0, 0.0], &p).unwrap();
        assert_eq!(report.escape_fraction[0][0], 0.0);
        assert_eq!(report.verdict, Verdict::StableEvidence);
        // No Chetaev bundle: the ledger stays empty.
        assert!(report.trials.iter().all(|t| t.chetaev_steps == 0));
    }

    #[test]
    fn chetaev_ledger_matches_identity_on_relu_trace() {
        let spec = catalog_get("relu_net").unwrap();
        let mut params = MethodParams::new(0.05);
        params.selection = SubgradientSelection::default();
        let trace = run_subgradient(&spec, &[1.0, 1.0, 0.01], params, 200).unwrap();
        let ledger = chetaev_increment_check(&trace, &spec).unwrap();
        assert!(!ledger.residuals.is_empty());
        // c₁(α)·d^θ₁ = α|x₃| is the exact increment, so every residual is
        // zero up to rounding.
        assert!(ledger.min_slack >= -1e-14);
        assert!(ledger.residuals.iter().all(|r| r.abs() <= 1e-14));
    }

    #[test]
    fn chetaev_ledger_truncates_outside_neighborhood() {
        let spec = catalog_get("relu_net").unwrap();
        let mut params = MethodParams::new(0.3);
        params.selection = SubgradientSelection::default();
        let trace = run_subgradient(&spec, &[1.0, 1.0, 0.3], params, 50).unwrap();
        let result = chetaev_increment_check(&trace, &spec);
        match result {
            Ok(ledger) => assert!(ledger.truncated_at.is_some()),
            Err(Error::InsufficientData(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn subregularity_fit_on_quad_is_identity() {
        let spec = catalog_get("quad").unwrap();
        let (theta2, c2) = fit_metric_subregularity(&spec, &[0.0, 0.0], 0.5, 2_000, 5).unwrap();
        assert!((theta2 - 1.0).abs() <= 0.05, "theta2 {theta2}");
        assert!((c2 - 1.0).abs() <= 0.1, "c2 {c2}");
    }

    #[test]
    fn subregularity_fit_needs_samples() {
        let spec = catalog_get("quad").unwrap();
        let err = fit_metric_subregularity(&spec, &[0.0, 0.0], 0.5, 5, 5).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn verdier_ok_ratio_bounded_by_one() {
        let spec = catalog_get("verdier_ok").unwrap();
        let (sup, diverging) = verdier_ratio_scan(&spec, &[1.0, 1.0], 0.4, 2_000, 9).unwrap();
        assert!(sup <= 1.0 + 1e-6, "sup {sup}");
        assert!(!diverging);
    }

    #[test]
    fn verdier_bad_ratio_diverges() {
        let spec = catalog_get("verdier_bad").unwrap();
        let (sup, diverging) = verdier_ratio_scan(&spec, &[0.0, 0.0], 0.4, 2_000, 9).unwrap();
        assert!(diverging, "sup {sup} should diverge");
        assert!(sup > 20.0);
    }

    #[test]
    fn verdier_bad_paper_sequence_point() {
        let spec = catalog_get("verdier_bad").unwrap();
        let ratio = verdier_ratio_at(&spec, &[0.1, 0.01], &[0.1, 0.0]).unwrap();
        assert!((ratio - 20.0).abs() <= 1e-9, "ratio {ratio}");
    }

    #[test]
    fn relu_ratio_bounded_by_sqrt_five() {
        let spec = catalog_get("relu_net").unwrap();
        let (sup, diverging) =
            verdier_ratio_scan(&spec, &[1.0, 1.0, 0.0], 0.35, 2_000, 9).unwrap();
        assert!(sup <= 5.0f64.sqrt() + 1e-6, "sup {sup}");
        assert!((sup - 5.0f64.sqrt()).abs() <= 1e-3, "sup {sup} should be attained");
        assert!(!diverging);
    }

    #[test]
    fn sharp_weak_on_abs() {
        let spec = catalog_get("abs1d").unwrap();
        let report = sharp_weak_check(&spec, &[0.0], 1.0, 2_000, 13).unwrap();
        assert!((report.mu_hat - 1.0).abs() <= 1e-12);
        assert_eq!(report.rho_hat, Some(0.0));
        assert!(report.violated.is_none());
    }

    #[test]
    fn sharp_weak_on_strict2d_finds_modulus_36() {
        let spec = catalog_get("strict2d").unwrap();
        let report = sharp_weak_check(&spec, &[0.0, 0.0], 0.5, 2_000, 13).unwrap();
        assert_eq!(report.rho_hat, Some(36.0), "required {}", report.rho_required);
        assert!(report.violated.is_none());
    }

    #[test]
    fn sharp_weak_on_strict2d_mod_is_violated() {
        let spec = catalog_get("strict2d_mod").unwrap();
        let report = sharp_weak_check(&spec, &[0.0, 0.0], 0.5, 2_000, 13).unwrap();
        assert!(report.mu_hat < 0.05, "mu_hat {}", report.mu_hat);
        assert!(report.rho_hat.is_none());
        let w = report.violated.expect("witness pair");
        assert!(w.rho_needed > 1024.0);
    }

    #[test]
    fn sharp_weak_on_quad_is_not_sharp() {
        let spec = catalog_get("quad").unwrap();
        let report = sharp_weak_check(&spec, &[0.0, 0.0], 1.0, 2_000, 13).unwrap();
        assert!(report.mu_hat < 1e-5);
        assert_eq!(report.rho_hat, Some(0.0));
    }

    #[test]
    fn trajectory_approximation_on_quad() {
        let spec = catalog_get("quad").unwrap();
        let devs =
            probe_trajectory_approximation(&spec, &[1.0], &[0.1, 0.05, 0.025], 1.0, 1.0).unwrap();
        for (alpha, sup) in &devs {
            assert!(*sup <= *alpha + 1e-6, "α={alpha}: sup {sup}");
        }
        assert!(devs[1].1 < devs[0].1 && devs[2].1 < devs[1].1);
    }

    #[test]
    fn trajectory_approximation_on_abs() {
        let spec = catalog_get("abs1d").unwrap();
        let devs =
            probe_trajectory_approximation(&spec, &[0.5], &[0.1, 0.05, 0.025], 1.0, 1.0).unwrap();
        for (alpha, sup) in &devs {
            assert!(*sup <= *alpha + 1e-6, "α={alpha}: sup {sup}");
        }
    }

    #[test]
    fn trajectory_approximation_stationary_start() {
        let spec = catalog_get("strict2d").unwrap();
        let devs =
            probe_trajectory_approximation(&spec, &[0.0, 0.0], &[0.1, 0.05], 1.0, 1.0).unwrap();
        assert!(devs.iter().all(|(_, sup)| *sup == 0.0));
    }
}
