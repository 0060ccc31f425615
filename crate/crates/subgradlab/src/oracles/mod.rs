//! Objective catalog with exact Clarke-subdifferential oracles.
//!
//! Each entry provides an exact value oracle and a subgradient-selection
//! oracle; where the structure allows it, also a generator oracle (a finite
//! list of active-piece gradients whose convex hull is ∂f(x)), a component
//! split f = (1/N)·Σ fᵢ, a gradient (C¹ entries only), a critical-set oracle
//! with closed-form distance/projection/tangent maps, and a Chetaev bundle
//! for the instability checkers.
//!
//! All oracles are pure functions; a spec is immutable after construction
//! and safe to share across worker threads.

pub mod rpca;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::hull::min_norm_point;
use crate::rng::{hash_point, SplitMix64};
use crate::{all_finite, norm, Point};

pub use rpca::{RpcaInstance, DEFAULT_RPCA_SEED, RPCA_DIM};

/// Stable catalog ids, in documentation order.
pub const CATALOG_IDS: [&str; 11] = [
    "abs1d",
    "sin_example",
    "strict2d",
    "strict2d_mod",
    "verdier_ok",
    "verdier_bad",
    "global_l1",
    "global_pow32",
    "relu_net",
    "rpca_l1",
    "quad",
];

/// How to pick one element out of ∂f(x).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// The unique minimum-norm element of the subdifferential (computed over
    /// the generator hull; falls back to the sign(0)→0 selection on entries
    /// without generators, where the min-norm element has no closed form).
    MinNorm,
    /// Branch-following selection with the sign(0) → 0 convention at every
    /// ℓ₁/abs kink; coordinatewise this is the min-norm choice.
    DeterministicSign,
    /// An extreme point of the subdifferential chosen as a pure function of
    /// (x, seed).
    SeededRandomExtreme,
}

impl SelectionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionRule::MinNorm => "min_norm",
            SelectionRule::DeterministicSign => "deterministic_sign",
            SelectionRule::SeededRandomExtreme => "seeded_random_extreme",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "min_norm" => Some(SelectionRule::MinNorm),
            "deterministic_sign" => Some(SelectionRule::DeterministicSign),
            "seeded_random_extreme" => Some(SelectionRule::SeededRandomExtreme),
            _ => None,
        }
    }
}

/// Selection rule plus the seed consumed by `seeded_random_extreme`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SubgradientSelection {
    pub rule: SelectionRule,
    pub seed: u64,
}

impl SubgradientSelection {
    pub fn min_norm() -> Self {
        SubgradientSelection {
            rule: SelectionRule::MinNorm,
            seed: 0,
        }
    }

    pub fn deterministic_sign() -> Self {
        SubgradientSelection {
            rule: SelectionRule::DeterministicSign,
            seed: 0,
        }
    }

    pub fn seeded_random_extreme(seed: u64) -> Self {
        SubgradientSelection {
            rule: SelectionRule::SeededRandomExtreme,
            seed,
        }
    }
}

impl Default for SubgradientSelection {
    fn default() -> Self {
        SubgradientSelection::deterministic_sign()
    }
}

/// sign with sign(0) = 0.
fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Extreme sign branches of |u| at u, with a relative tolerance for switching
/// values that cannot be hit exactly in floating point (piece ties, bilinear
/// kinks).
fn sign_branches(u: f64, tol: f64) -> Vec<f64> {
    if u > tol {
        vec![1.0]
    } else if u < -tol {
        vec![-1.0]
    } else {
        vec![-1.0, 1.0]
    }
}

/// Extreme branches of ∂max(u, 0) = {1}, {0}, or [0,1].
fn relu_branches(u: f64, tol: f64) -> Vec<f64> {
    if u > tol {
        vec![1.0]
    } else if u < -tol {
        vec![0.0]
    } else {
        vec![0.0, 1.0]
    }
}

/// Catalog entry. Construct via [`catalog_get`] or [`rpca_with_seed`].
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Abs1d,
    SinExample,
    Strict2d,
    Strict2dMod,
    VerdierOk,
    VerdierBad,
    GlobalL1,
    GlobalPow32,
    ReluNet,
    Rpca(RpcaInstance),
    Quad,
}

/// Build a catalog entry by id.
///
/// `rpca_l1` uses the documented default seed so the bare id is
/// reproducible; use [`rpca_with_seed`] to tie the synthetic instance to a
/// run seed.
pub fn catalog_get(id: &str) -> Result<ObjectiveSpec, Error> {
    let kind = match id {
        "abs1d" => Kind::Abs1d,
        "sin_example" => Kind::SinExample,
        "strict2d" => Kind::Strict2d,
        "strict2d_mod" => Kind::Strict2dMod,
        "verdier_ok" => Kind::VerdierOk,
        "verdier_bad" => Kind::VerdierBad,
        "global_l1" => Kind::GlobalL1,
        "global_pow32" => Kind::GlobalPow32,
        "relu_net" => Kind::ReluNet,
        "rpca_l1" => Kind::Rpca(RpcaInstance::generate(DEFAULT_RPCA_SEED)),
        "quad" => Kind::Quad,
        _ => {
            return Err(Error::UnknownObjective {
                id: id.to_string(),
                valid: CATALOG_IDS.join(", "),
            })
        }
    };
    Ok(ObjectiveSpec { kind })
}

/// The rpca_l1 entry with its synthetic M generated from `seed`.
pub fn rpca_with_seed(seed: u64) -> ObjectiveSpec {
    ObjectiveSpec {
        kind: Kind::Rpca(RpcaInstance::generate(seed)),
    }
}

/// One element of ∂f(x) under the given selection rule (validating wrapper).
pub fn subgradient_select(
    spec: &ObjectiveSpec,
    x: &[f64],
    sel: SubgradientSelection,
) -> Result<Point, Error> {
    spec.validate_point(x)?;
    Ok(spec.subgrad(x, sel))
}

/// Minimum-norm element of ∂f(x) and its norm d(0, ∂f(x)).
pub fn min_norm_subgradient(spec: &ObjectiveSpec, x: &[f64]) -> Result<(Point, f64), Error> {
    spec.validate_point(x)?;
    spec.min_norm_subgradient(x)
}

/// Closed-form d(x, S) from the spec's critical-set oracle.
pub fn distance_to_critical(spec: &ObjectiveSpec, x: &[f64]) -> Result<f64, Error> {
    spec.validate_point(x)?;
    let cs = spec.critical_set().ok_or_else(|| Error::UnsupportedOracle {
        id: spec.id().to_string(),
        oracle: "critical_set",
    })?;
    cs.check_in_neighborhood(x)?;
    Ok(cs.distance(x))
}

impl ObjectiveSpec {
    pub fn id(&self) -> &'static str {
        match self.kind {
            Kind::Abs1d => "abs1d",
            Kind::SinExample => "sin_example",
            Kind::Strict2d => "strict2d",
            Kind::Strict2dMod => "strict2d_mod",
            Kind::VerdierOk => "verdier_ok",
            Kind::VerdierBad => "verdier_bad",
            Kind::GlobalL1 => "global_l1",
            Kind::GlobalPow32 => "global_pow32",
            Kind::ReluNet => "relu_net",
            Kind::Rpca(_) => "rpca_l1",
            Kind::Quad => "quad",
        }
    }

    /// Fixed dimension, or None for the dimension-generic quad baseline.
    pub fn dim(&self) -> Option<usize> {
        match self.kind {
            Kind::Abs1d | Kind::SinExample => Some(1),
            Kind::Strict2d
            | Kind::Strict2dMod
            | Kind::VerdierOk
            | Kind::VerdierBad
            | Kind::GlobalL1
            | Kind::GlobalPow32 => Some(2),
            Kind::ReluNet => Some(3),
            Kind::Rpca(_) => Some(RPCA_DIM),
            Kind::Quad => None,
        }
    }

    /// The rpca instance when this entry is rpca_l1.
    pub fn rpca(&self) -> Option<&RpcaInstance> {
        match &self.kind {
            Kind::Rpca(inst) => Some(inst),
            _ => None,
        }
    }

    pub fn validate_point(&self, x: &[f64]) -> Result<(), Error> {
        if let Some(n) = self.dim() {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        } else if x.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if !all_finite(x) {
            return Err(Error::NonFinitePoint);
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Abs1d => x[0].abs(),
            Kind::SinExample => sin_value(x[0]),
            Kind::Strict2d => {
                let (p1, p2) = strict2d_pieces(x);
                p1.max(p2)
            }
            Kind::Strict2dMod => {
                let (p1, p2) = strict2d_mod_pieces(x);
                p1.max(p2)
            }
            Kind::VerdierOk => (x[0] * x[1] - 1.0).abs(),
            Kind::VerdierBad => (-x[0] * x[0] + 2.0 * x[1]).max(x[1].abs()),
            Kind::GlobalL1 => {
                let (u, _) = global_terms(x);
                u[0].abs() + 2.0 * u[1].abs() + u[2].abs()
            }
            Kind::GlobalPow32 => {
                let (u, _) = global_terms(x);
                pow32(u[0]) + 2.0 * pow32(u[1]) + pow32(u[2])
            }
            Kind::ReluNet => {
                let t = relu_terms(x);
                t.t1.abs() + t.t2.abs()
            }
            Kind::Rpca(inst) => inst.value(x),
            Kind::Quad => 0.5 * crate::norm_sq(x),
        }
    }

    /// Active-piece gradients whose convex hull is ∂f(x), where the entry's
    /// structure gives a finite list (every entry except rpca_l1, whose
    /// subdifferential at kinks is a high-dimensional zonotope).
    pub fn generators(&self, x: &[f64]) -> Option<Vec<Point>> {
        self.generators_within(x, 0.0)
    }

    /// Like [`Self::generators`], but each piece-activity test is widened by
    /// `radius` times a local Lipschitz bound of its tie residual, so every
    /// piece whose switching surface passes within `radius` of x contributes
    /// its gradient. The min-norm element over the returned hull is the
    /// radius-scale criticality proxy used by the stability probes: at a
    /// sharp critical point ∂f jumps, so iterates chattering around it keep
    /// pointwise d(0, ∂f(x_k)) bounded away from zero, while this hull
    /// contains (a point within O(radius) of) zero as soon as x is within
    /// `radius` of the kink. `radius = 0` recovers exact active-set
    /// detection.
    pub fn generators_within(&self, x: &[f64], radius: f64) -> Option<Vec<Point>> {
        let tol = kink_tol(x);
        let gens = match &self.kind {
            Kind::Abs1d => sign_branches(x[0], tol + radius)
                .into_iter()
                .map(|s| vec![s])
                .collect(),
            Kind::SinExample => {
                if sin_at_origin(x[0]) {
                    vec![vec![-1.0], vec![1.0]]
                } else if x[0].abs() <= tol + radius {
                    // Within radius of the origin the derivative sweeps the
                    // whole band [−1−2|x|, 1+2|x|]; the extreme unit slopes
                    // plus the local slope give a hull containing 0.
                    vec![vec![-1.0], vec![1.0], vec![sin_derivative(x[0])]]
                } else {
                    vec![vec![sin_derivative(x[0])]]
                }
            }
            Kind::Strict2d => {
                let (p1, p2) = strict2d_pieces(x);
                let slack = radius * (48.0 * x[0]).hypot(9.0);
                let mut out = Vec::new();
                for piece in active_pieces(p1, p2, tol, slack) {
                    for s in sign_branches(x[1], radius) {
                        out.push(match piece {
                            1 => vec![-36.0 * x[0], 12.0 * s],
                            _ => vec![12.0 * x[0], 3.0 * s],
                        });
                    }
                }
                out
            }
            Kind::Strict2dMod => {
                let (p1, p2) = strict2d_mod_pieces(x);
                let root = x[0].abs().sqrt();
                let s1 = sign0(x[0]);
                let slack = radius * (36.0 * root).hypot(9.0);
                let mut out = Vec::new();
                for piece in active_pieces(p1, p2, tol, slack) {
                    for s in sign_branches(x[1], radius) {
                        out.push(match piece {
                            1 => vec![-27.0 * s1 * root, 12.0 * s],
                            _ => vec![9.0 * s1 * root, 3.0 * s],
                        });
                    }
                }
                out
            }
            Kind::VerdierOk => {
                let r = x[0] * x[1] - 1.0;
                sign_branches(r, tol + radius * x[1].hypot(x[0]))
                    .into_iter()
                    .map(|s| vec![s * x[1], s * x[0]])
                    .collect()
            }
            Kind::VerdierBad => {
                let p1 = -x[0] * x[0] + 2.0 * x[1];
                let p2 = x[1].abs();
                let slack = radius * (2.0 * x[0]).hypot(3.0);
                let mut out = Vec::new();
                for piece in active_pieces(p1, p2, tol, slack) {
                    match piece {
                        1 => out.push(vec![-2.0 * x[0], 2.0]),
                        _ => {
                            for s in sign_branches(x[1], radius) {
                                out.push(vec![0.0, s]);
                            }
                        }
                    }
                }
                out
            }
            Kind::GlobalL1 => {
                let (u, grads) = global_terms(x);
                let w = [1.0, 2.0, 1.0];
                let mut out = vec![vec![0.0, 0.0]];
                for i in 0..3 {
                    let branches =
                        sign_branches(u[i], tol + radius * grads[i][0].hypot(grads[i][1]));
                    let mut next = Vec::with_capacity(out.len() * branches.len());
                    for base in &out {
                        for &s in &branches {
                            next.push(vec![
                                base[0] + w[i] * s * grads[i][0],
                                base[1] + w[i] * s * grads[i][1],
                            ]);
                        }
                    }
                    out = next;
                }
                out
            }
            Kind::GlobalPow32 => vec![self.gradient(x).expect("global_pow32 is C¹")],
            Kind::ReluNet => {
                let t = relu_terms(x);
                let slack1 = radius * x[2].hypot(t.r2);
                let slack2 = radius * (2.0 * x[2] * x[2] + t.r12 * t.r12).sqrt();
                let mut out = Vec::new();
                for &s1 in &sign_branches(t.t1, tol + slack1) {
                    for &s2 in &sign_branches(t.t2, tol + slack2) {
                        for &a2 in &relu_branches(x[1], radius) {
                            for &a12 in &relu_branches(x[0] + x[1], radius * std::f64::consts::SQRT_2)
                            {
                                out.push(relu_piece_gradient(x, &t, s1, s2, a2, a12));
                            }
                        }
                    }
                }
                dedupe_points(&mut out);
                out
            }
            Kind::Rpca(_) => return None,
            Kind::Quad => vec![x.to_vec()],
        };
        Some(gens)
    }

    /// One element of ∂f(x). Deterministic given (x, sel). Callers that need
    /// validation use [`subgradient_select`].
    pub fn subgrad(&self, x: &[f64], sel: SubgradientSelection) -> Point {
        // The origin of sin_example returns 0 under every rule: the paper's
        // set there is [−1, 1], the min-norm element is canonical and keeps
        // 0 a fixed point of all methods.
        if matches!(self.kind, Kind::SinExample) && sin_at_origin(x[0]) {
            return vec![0.0];
        }
        match sel.rule {
            SelectionRule::DeterministicSign => self.sign_subgrad(x, None),
            SelectionRule::MinNorm => match self.generators(x) {
                Some(gens) => min_norm_point(&gens).0,
                // rpca_l1: no generator list; the sign(0)→0 selection is the
                // documented fallback (min_norm_subgradient errors at kinks).
                None => self.sign_subgrad(x, None),
            },
            SelectionRule::SeededRandomExtreme => match self.generators(x) {
                Some(gens) => {
                    let idx = (hash_point(sel.seed, x) % gens.len() as u64) as usize;
                    gens[idx].clone()
                }
                None => self.sign_subgrad(x, Some(sel.seed)),
            },
        }
    }

    /// Branch-following selection: sign(0) → 0 everywhere, ReLU kinks take
    /// slope 0. For rpca_l1 with `extreme_seed` set, zero residual entries
    /// instead draw ±1 from a (x, seed)-keyed stream.
    fn sign_subgrad(&self, x: &[f64], extreme_seed: Option<u64>) -> Point {
        match &self.kind {
            Kind::Abs1d => vec![sign0(x[0])],
            Kind::SinExample => vec![sin_derivative(x[0])],
            Kind::Strict2d => {
                let (p1, p2) = strict2d_pieces(x);
                let s = sign0(x[1]);
                if p1 >= p2 {
                    vec![-36.0 * x[0], 12.0 * s]
                } else {
                    vec![12.0 * x[0], 3.0 * s]
                }
            }
            Kind::Strict2dMod => {
                let (p1, p2) = strict2d_mod_pieces(x);
                let s1 = sign0(x[0]);
                let root = x[0].abs().sqrt();
                let s = sign0(x[1]);
                if p1 >= p2 {
                    vec![-27.0 * s1 * root, 12.0 * s]
                } else {
                    vec![9.0 * s1 * root, 3.0 * s]
                }
            }
            Kind::VerdierOk => {
                let s = sign0(x[0] * x[1] - 1.0);
                vec![s * x[1], s * x[0]]
            }
            Kind::VerdierBad => {
                let p1 = -x[0] * x[0] + 2.0 * x[1];
                let p2 = x[1].abs();
                if p1 >= p2 {
                    vec![-2.0 * x[0], 2.0]
                } else {
                    vec![0.0, sign0(x[1])]
                }
            }
            Kind::GlobalL1 => {
                let (u, grads) = global_terms(x);
                let w = [1.0, 2.0, 1.0];
                let mut g = vec![0.0, 0.0];
                for i in 0..3 {
                    let s = sign0(u[i]);
                    g[0] += w[i] * s * grads[i][0];
                    g[1] += w[i] * s * grads[i][1];
                }
                g
            }
            Kind::GlobalPow32 => self.gradient(x).expect("global_pow32 is C¹"),
            Kind::ReluNet => {
                let t = relu_terms(x);
                let a2 = if x[1] > 0.0 { 1.0 } else { 0.0 };
                let a12 = if x[0] + x[1] > 0.0 { 1.0 } else { 0.0 };
                relu_piece_gradient(x, &t, sign0(t.t1), sign0(t.t2), a2, a12)
            }
            Kind::Rpca(inst) => {
                let r = inst.residual(x);
                let lambda = rpca_lambda(&r, x, extreme_seed);
                inst.subgradient_for_lambda(x, &lambda)
            }
            Kind::Quad => x.to_vec(),
        }
    }

    /// Minimum-norm element of ∂f(x) with its norm d(0, ∂f(x)).
    pub fn min_norm_subgradient(&self, x: &[f64]) -> Result<(Point, f64), Error> {
        match self.generators(x) {
            Some(gens) => Ok(min_norm_point(&gens)),
            None => {
                let inst = self.rpca().expect("only rpca_l1 lacks generators");
                let r = inst.residual(x);
                if r.iter().all(|e| *e != 0.0) {
                    let g = self.sign_subgrad(x, None);
                    let n = norm(&g);
                    Ok((g, n))
                } else {
                    Err(Error::UnsupportedOracle {
                        id: self.id().to_string(),
                        oracle: "generator (min-norm at an rpca_l1 kink)",
                    })
                }
            }
        }
    }

    /// Gradient oracle; present only for C¹ entries (global_pow32, quad).
    pub fn gradient(&self, x: &[f64]) -> Option<Point> {
        match &self.kind {
            Kind::GlobalPow32 => {
                let (u, grads) = global_terms(x);
                let w = [1.0, 2.0, 1.0];
                let mut g = vec![0.0, 0.0];
                for i in 0..3 {
                    let factor = w[i] * 1.5 * u[i].abs().sqrt() * sign0(u[i]);
                    g[0] += factor * grads[i][0];
                    g[1] += factor * grads[i][1];
                }
                Some(g)
            }
            Kind::Quad => Some(x.to_vec()),
            _ => None,
        }
    }

    /// Number of components N in the split f = (1/N)·Σ fᵢ, when present.
    pub fn num_components(&self) -> Option<usize> {
        match self.kind {
            Kind::GlobalL1 | Kind::GlobalPow32 => Some(3),
            _ => None,
        }
    }

    /// Component value fᵢ(x). Components are stored pre-scaled (fᵢ = N·term)
    /// so per-component steps use ∂f_{σᵏᵢ} exactly as the reshuffling
    /// recursion is written.
    pub fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let (u, _) = global_terms(x);
        let w = [1.0, 2.0, 1.0];
        match self.kind {
            Kind::GlobalL1 => 3.0 * w[i] * u[i].abs(),
            Kind::GlobalPow32 => 3.0 * w[i] * pow32(u[i]),
            _ => panic!("objective '{}' has no components", self.id()),
        }
    }

    /// One element of ∂fᵢ(x).
    pub fn component_subgrad(&self, i: usize, x: &[f64], sel: SubgradientSelection) -> Point {
        let (u, grads) = global_terms(x);
        let w = [1.0, 2.0, 1.0];
        match self.kind {
            Kind::GlobalL1 => {
                let s = match sel.rule {
                    SelectionRule::DeterministicSign | SelectionRule::MinNorm => sign0(u[i]),
                    SelectionRule::SeededRandomExtreme => {
                        if u[i] != 0.0 {
                            sign0(u[i])
                        } else if hash_point(sel.seed.wrapping_add(i as u64), x) & 1 == 0 {
                            -1.0
                        } else {
                            1.0
                        }
                    }
                };
                let factor = 3.0 * w[i] * s;
                vec![factor * grads[i][0], factor * grads[i][1]]
            }
            Kind::GlobalPow32 => {
                let factor = 3.0 * w[i] * 1.5 * u[i].abs().sqrt() * sign0(u[i]);
                vec![factor * grads[i][0], factor * grads[i][1]]
            }
            _ => panic!("objective '{}' has no components", self.id()),
        }
    }

    /// Critical-set oracle (relu_net, rpca_l1, verdier_ok, verdier_bad, quad).
    pub fn critical_set(&self) -> Option<CriticalSetOracle<'_>> {
        match self.kind {
            Kind::ReluNet | Kind::Rpca(_) | Kind::VerdierOk | Kind::VerdierBad | Kind::Quad => {
                Some(CriticalSetOracle { spec: self })
            }
            _ => None,
        }
    }

    /// Chetaev bundle (relu_net, rpca_l1).
    pub fn chetaev(&self) -> Option<ChetaevBundle<'_>> {
        match self.kind {
            Kind::ReluNet | Kind::Rpca(_) => Some(ChetaevBundle { spec: self }),
            _ => None,
        }
    }

    /// Margin to the nearest finite-difference hazard (kink crossing or
    /// higher-derivative blowup), used by tests and samplers to pick smooth
    /// points. Infinity for quad.
    pub fn kink_margin(&self, x: &[f64]) -> f64 {
        let scale = 1.0 + norm(x);
        match &self.kind {
            Kind::Abs1d | Kind::SinExample => x[0].abs(),
            Kind::Strict2d => {
                let (p1, p2) = strict2d_pieces(x);
                x[1].abs().min((p1 - p2).abs() / (9.0 + 48.0 * x[0].abs()))
            }
            Kind::Strict2dMod => {
                let (p1, p2) = strict2d_mod_pieces(x);
                x[1].abs()
                    .min(x[0].abs())
                    .min((p1 - p2).abs() / (9.0 + 36.0 * x[0].abs().sqrt()))
            }
            Kind::VerdierOk => (x[0] * x[1] - 1.0).abs() / scale,
            Kind::VerdierBad => {
                let p1 = -x[0] * x[0] + 2.0 * x[1];
                let p2 = x[1].abs();
                x[1].abs().min((p1 - p2).abs() / (3.0 + 2.0 * x[0].abs()))
            }
            Kind::GlobalL1 | Kind::GlobalPow32 => {
                let (u, _) = global_terms(x);
                u.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min) / scale
            }
            Kind::ReluNet => {
                let t = relu_terms(x);
                t.t1.abs()
                    .min(t.t2.abs())
                    .min(x[1].abs())
                    .min((x[0] + x[1]).abs())
                    / scale
            }
            Kind::Rpca(inst) => inst
                .residual(x)
                .iter()
                .map(|e| e.abs())
                .fold(f64::INFINITY, f64::min),
            Kind::Quad => f64::INFINITY,
        }
    }

    /// Points lying exactly on the entry's kink manifolds within `radius` of
    /// `center` (empty for smooth entries and rpca_l1). Used by the oracle
    /// membership suite and the sharpness/weak-convexity witness search.
    pub fn kink_samples(&self, center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Point> {
        let mut g = SplitMix64::stream(seed, 0x4b1e);
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let p = match &self.kind {
                Kind::Abs1d | Kind::SinExample => {
                    if center[0].abs() <= radius {
                        vec![0.0]
                    } else {
                        break;
                    }
                }
                Kind::Strict2d => {
                    let t = g.uniform(-radius, radius) + center[0];
                    if k % 2 == 0 {
                        vec![t, 0.0]
                    } else {
                        // Piece tie 3|x₂| = 8x₁².
                        vec![t, sign_flip(&mut g) * 8.0 * t * t / 3.0]
                    }
                }
                Kind::Strict2dMod => {
                    let t = g.uniform(-radius, radius) + center[0];
                    if k % 2 == 0 {
                        vec![t, 0.0]
                    } else {
                        // Piece tie 3|x₂| = 8|x₁|^{3/2}.
                        vec![t, sign_flip(&mut g) * 8.0 * t.abs().powf(1.5) / 3.0]
                    }
                }
                Kind::VerdierOk => {
                    let t = (center[0] + g.uniform(-radius, radius)).max(0.2);
                    vec![t, 1.0 / t]
                }
                Kind::VerdierBad => {
                    let t = g.uniform(-radius, radius) + center[0];
                    if k % 2 == 0 {
                        vec![t, 0.0]
                    } else {
                        // Piece tie −x₁² + 2x₂ = |x₂| at x₂ = x₁² ⩾ 0.
                        vec![t, t * t]
                    }
                }
                Kind::GlobalL1 => {
                    let t = g.uniform(-radius, radius);
                    match k % 3 {
                        0 => vec![sign_flip(&mut g), center[1] + t],
                        1 => vec![center[0] + t, sign_flip(&mut g)],
                        _ => {
                            let a = sign_flip(&mut g) * (1.0 + t.abs());
                            vec![a, -1.0 / a]
                        }
                    }
                }
                Kind::ReluNet => {
                    vec![
                        center[0] + g.uniform(-radius, radius),
                        center[1] + g.uniform(-radius, radius),
                        0.0,
                    ]
                }
                Kind::GlobalPow32 | Kind::Rpca(_) | Kind::Quad => break,
            };
            out.push(p);
        }
        out
    }
}

fn sign_flip(g: &mut SplitMix64) -> f64 {
    if g.next_u64() & 1 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Relative tolerance used when testing whether a switching value vanishes;
/// manifold points constructed in floating point land within this band.
fn kink_tol(x: &[f64]) -> f64 {
    1e-11 * (1.0 + crate::norm_sq(x))
}

/// Indices of the active pieces of max{p1, p2} (1-based, piece 1 first).
/// `slack` widens the tie window by an absolute amount (radius times the
/// gap's Lipschitz bound, for near-active detection).
fn active_pieces(p1: f64, p2: f64, tol: f64, slack: f64) -> Vec<usize> {
    let gap = p1 - p2;
    let gtol = tol * (1.0 + p1.abs() + p2.abs()) + slack;
    if gap > gtol {
        vec![1]
    } else if gap < -gtol {
        vec![2]
    } else {
        vec![1, 2]
    }
}

fn dedupe_points(points: &mut Vec<Point>) {
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    points.dedup();
}

fn pow32(u: f64) -> f64 {
    u.abs().powf(1.5)
}

/// f(x) = x² sin(1/x), f(0) = 0. Treated as the origin whenever 1/x
/// overflows (|x| below ~5.6e−309, where |f| underflows to 0 anyway).
fn sin_at_origin(x: f64) -> bool {
    x == 0.0 || !(1.0 / x).is_finite()
}

fn sin_value(x: f64) -> f64 {
    if sin_at_origin(x) {
        0.0
    } else {
        x * x * (1.0 / x).sin()
    }
}

/// f′(x) = 2x sin(1/x) − cos(1/x) away from 0; the sign(0)→0-style value at
/// the origin itself is 0 (handled by the caller).
fn sin_derivative(x: f64) -> f64 {
    if sin_at_origin(x) {
        0.0
    } else {
        let r = 1.0 / x;
        2.0 * x * r.sin() - r.cos()
    }
}

fn strict2d_pieces(x: &[f64]) -> (f64, f64) {
    let a = x[0] * x[0];
    let b = x[1].abs();
    (-18.0 * a + 12.0 * b, 6.0 * a + 3.0 * b)
}

fn strict2d_mod_pieces(x: &[f64]) -> (f64, f64) {
    let a = pow32(x[0]);
    let b = x[1].abs();
    (-18.0 * a + 12.0 * b, 6.0 * a + 3.0 * b)
}

/// Terms u and gradients ∇u of the two global-stability objectives:
/// u = (x₁²−1, x₁x₂+1, x₂²−1).
fn global_terms(x: &[f64]) -> ([f64; 3], [[f64; 2]; 3]) {
    let u = [
        x[0] * x[0] - 1.0,
        x[0] * x[1] + 1.0,
        x[1] * x[1] - 1.0,
    ];
    let grads = [
        [2.0 * x[0], 0.0],
        [x[1], x[0]],
        [0.0, 2.0 * x[1]],
    ];
    (u, grads)
}

/// Switching values of relu_net: t1 = x₃·max{x₂,0} − 1, t2 = x₃·max{x₁+x₂,0}.
struct ReluTerms {
    r2: f64,
    r12: f64,
    t1: f64,
    t2: f64,
}

fn relu_terms(x: &[f64]) -> ReluTerms {
    let r2 = x[1].max(0.0);
    let r12 = (x[0] + x[1]).max(0.0);
    ReluTerms {
        r2,
        r12,
        t1: x[2] * r2 - 1.0,
        t2: x[2] * r12,
    }
}

/// Gradient of the piece of relu_net selected by the sign branches s1, s2
/// and ReLU slopes a2, a12.
fn relu_piece_gradient(x: &[f64], t: &ReluTerms, s1: f64, s2: f64, a2: f64, a12: f64) -> Point {
    vec![
        s2 * x[2] * a12,
        s1 * x[2] * a2 + s2 * x[2] * a12,
        s1 * t.r2 + s2 * t.r12,
    ]
}

/// Sign matrix Λ ∈ sign(XYᵀ − M): sign(0) → 0, or ±1 drawn from an
/// (x, seed)-keyed stream for the extreme selection.
fn rpca_lambda(residual: &[f64], x: &[f64], extreme_seed: Option<u64>) -> Vec<f64> {
    match extreme_seed {
        None => residual.iter().map(|&e| sign0(e)).collect(),
        Some(seed) => {
            let mut g = SplitMix64::stream(hash_point(seed, x), 0x0e7e);
            residual
                .iter()
                .map(|&e| if e != 0.0 { sign0(e) } else { sign_flip(&mut g) })
                .collect()
        }
    }
}

/// Closed-form geometry of the critical set S near the entry's anchor.
///
/// Valid only within `valid_radius` of the anchor; every accessor assumes
/// the caller has checked that (the free functions do).
pub struct CriticalSetOracle<'a> {
    spec: &'a ObjectiveSpec,
}

impl CriticalSetOracle<'_> {
    /// The anchor critical point x*.
    pub fn anchor(&self) -> Point {
        match &self.spec.kind {
            Kind::ReluNet => vec![1.0, 1.0, 0.0],
            Kind::Rpca(inst) => inst.x_star.clone(),
            Kind::VerdierOk => vec![1.0, 1.0],
            Kind::VerdierBad => vec![0.0, 0.0],
            Kind::Quad => vec![0.0, 0.0],
            _ => unreachable!(),
        }
    }

    /// Radius of the neighborhood U in which the closed forms are certified.
    pub fn valid_radius(&self) -> f64 {
        match &self.spec.kind {
            // Keeps x₁, x₂ ⩾ 1/2 and x₂x₃ < 1, as the instability proof needs.
            Kind::ReluNet => 0.4,
            // Keeps X̂ invertible: half the smallest singular value of X̂*.
            Kind::Rpca(_) => rpca::SIGMA_MIN_XHAT / 2.0,
            Kind::VerdierOk | Kind::VerdierBad => 0.5,
            Kind::Quad => f64::INFINITY,
            _ => unreachable!(),
        }
    }

    pub fn check_in_neighborhood(&self, x: &[f64]) -> Result<(), Error> {
        let radius = self.valid_radius();
        let d = crate::dist(x, &self.anchor());
        if d <= radius {
            Ok(())
        } else {
            Err(Error::OutOfNeighborhood {
                distance: d,
                radius,
            })
        }
    }

    /// d(x, S).
    pub fn distance(&self, x: &[f64]) -> f64 {
        match &self.spec.kind {
            Kind::ReluNet => x[2].abs(),
            Kind::Rpca(inst) => {
                let (_, y) = inst.split(x);
                norm(y)
            }
            Kind::VerdierOk => crate::dist(x, &self.project(x)),
            Kind::VerdierBad => x[1].abs(),
            Kind::Quad => norm(x),
            _ => unreachable!(),
        }
    }

    /// Nearest point P_S(x).
    pub fn project(&self, x: &[f64]) -> Point {
        match &self.spec.kind {
            Kind::ReluNet => vec![x[0], x[1], 0.0],
            Kind::Rpca(inst) => {
                let (xs, _) = inst.split(x);
                let mut p = vec![0.0; RPCA_DIM];
                p[..xs.len()].copy_from_slice(xs);
                p
            }
            Kind::VerdierOk => {
                let t = hyperbola_project(x);
                vec![t, 1.0 / t]
            }
            Kind::VerdierBad => vec![x[0], 0.0],
            Kind::Quad => vec![0.0; x.len()],
            _ => unreachable!(),
        }
    }

    /// Orthogonal projection of v onto the tangent space T_S(y).
    pub fn tangent_project(&self, y: &[f64], v: &[f64]) -> Point {
        match &self.spec.kind {
            Kind::ReluNet => vec![v[0], v[1], 0.0],
            Kind::Rpca(inst) => {
                let nx = inst.split(v).0.len();
                let mut p = vec![0.0; RPCA_DIM];
                p[..nx].copy_from_slice(&v[..nx]);
                p
            }
            Kind::VerdierOk => {
                // Normal direction is ∇(y₁y₂ − 1) = (y₂, y₁).
                let g = [y[1], y[0]];
                let g2 = g[0] * g[0] + g[1] * g[1];
                let c = (v[0] * g[0] + v[1] * g[1]) / g2;
                vec![v[0] - c * g[0], v[1] - c * g[1]]
            }
            Kind::VerdierBad => vec![v[0], 0.0],
            Kind::Quad => vec![0.0; v.len()],
            _ => unreachable!(),
        }
    }

    /// Riemannian gradient ∇_S f(y); f is constant on S∩U for every entry
    /// carrying this oracle, so it vanishes identically.
    pub fn riemannian_grad(&self, y: &[f64]) -> Point {
        vec![0.0; y.len()]
    }
}

/// Nearest-point parameter t of the hyperbola (t, 1/t) to x near (1, 1):
/// the stationarity condition (t − x₁) − (1/t − x₂)/t² = 0 is strictly
/// increasing on [0.3, 3] for x within the valid radius, so bisection is
/// exact to machine precision.
fn hyperbola_project(x: &[f64]) -> f64 {
    let g = |t: f64| (t - x[0]) - (1.0 / t - x[1]) / (t * t);
    let (mut lo, mut hi) = (0.3, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Chetaev function and constants for the instability theorem's checkers.
pub struct ChetaevBundle<'a> {
    spec: &'a ObjectiveSpec,
}

impl ChetaevBundle<'_> {
    /// C(x): relu_net 1 − x₁; rpca_l1 ‖X*‖² − ‖Y*‖² + ‖Y‖² − ‖X‖².
    pub fn c(&self, x: &[f64]) -> f64 {
        match &self.spec.kind {
            Kind::ReluNet => 1.0 - x[0],
            Kind::Rpca(inst) => {
                let (xs, ys) = inst.split(x);
                let star = crate::norm_sq(inst.split(&inst.x_star).0);
                star + crate::norm_sq(ys) - crate::norm_sq(xs)
            }
            _ => unreachable!(),
        }
    }

    /// Exponent θ₁ in C(x_{k+1}) − C(x_k) ⩾ c₁·d(x_k, S)^{θ₁}.
    pub fn theta1(&self) -> f64 {
        match &self.spec.kind {
            Kind::ReluNet => 1.0,
            Kind::Rpca(_) => 0.0,
            _ => unreachable!(),
        }
    }

    /// The per-problem constant c₁(α): relu_net exactly α; rpca_l1 a safe
    /// instance lower bound α²·σ_min(X̂*)²/8 (some entry of Λ̂ is ±1, so
    /// ‖Λ̂ᵀX̂‖_F ⩾ σ_min(X̂) ⩾ σ_min(X̂*)/2 inside the valid neighborhood,
    /// and the increment dominates half its square).
    pub fn c1_of_alpha(&self, alpha: f64) -> f64 {
        match &self.spec.kind {
            Kind::ReluNet => alpha,
            Kind::Rpca(_) => {
                alpha * alpha * rpca::SIGMA_MIN_XHAT * rpca::SIGMA_MIN_XHAT / 8.0
            }
            _ => unreachable!(),
        }
    }

    pub fn anchor(&self) -> Point {
        self.spec
            .critical_set()
            .expect("chetaev entries carry a critical set")
            .anchor()
    }

    pub fn neighborhood_radius(&self) -> f64 {
        self.spec
            .critical_set()
            .expect("chetaev entries carry a critical set")
            .valid_radius()
    }

    /// The paper's exact per-step increment of C for one subgradient step of
    /// size `alpha` from x under `sel`: relu_net α·|x₃|; rpca_l1
    /// α²(‖ΛᵀX‖_F² − ‖ΛY‖_F²) with the Λ the selection uses at x.
    pub fn exact_increment(&self, x: &[f64], sel: SubgradientSelection, alpha: f64) -> f64 {
        match &self.spec.kind {
            Kind::ReluNet => alpha * x[2].abs(),
            Kind::Rpca(inst) => {
                let r = inst.residual(x);
                let seed = match sel.rule {
                    SelectionRule::SeededRandomExtreme => Some(sel.seed),
                    _ => None,
                };
                let lambda = rpca_lambda(&r, x, seed);
                alpha * alpha * inst.increment_rate(x, &lambda)
            }
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn get(id: &str) -> ObjectiveSpec {
        catalog_get(id).unwrap()
    }

    #[test]
    fn catalog_values() {
        assert_abs_diff_eq!(get("relu_net").value(&[1.0, 1.0, 0.0]), 1.0);
        assert_abs_diff_eq!(get("abs1d").value(&[0.0]), 0.0);
        assert_abs_diff_eq!(get("global_l1").value(&[1.0, -1.0]), 0.0);
    }

    #[test]
    fn unknown_id_lists_catalog() {
        let err = catalog_get("nope").unwrap_err();
        assert!(err.to_string().contains("abs1d"));
        assert!(err.to_string().contains("rpca_l1"));
    }

    #[test]
    fn selection_examples() {
        let sin = get("sin_example");
        for sel in [
            SubgradientSelection::min_norm(),
            SubgradientSelection::deterministic_sign(),
            SubgradientSelection::seeded_random_extreme(9),
        ] {
            assert_eq!(subgradient_select(&sin, &[0.0], sel).unwrap(), vec![0.0]);
        }
        let abs = get("abs1d");
        for sel in [
            SubgradientSelection::min_norm(),
            SubgradientSelection::deterministic_sign(),
            SubgradientSelection::seeded_random_extreme(9),
        ] {
            assert_eq!(subgradient_select(&abs, &[2.0], sel).unwrap(), vec![1.0]);
        }
        let relu = get("relu_net");
        for sel in [
            SubgradientSelection::min_norm(),
            SubgradientSelection::deterministic_sign(),
            SubgradientSelection::seeded_random_extreme(9),
        ] {
            let g = subgradient_select(&relu, &[1.0, 1.0, 0.1], sel).unwrap();
            assert_abs_diff_eq!(g[0], 0.1, epsilon = 1e-15);
            assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(g[2], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn radius_widened_generators_detect_sharp_critical_kinks() {
        let spec = catalog_get("global_l1").unwrap();
        // Near the sharp minimizer (1, −1) the exact subdifferential is a
        // far-from-zero singleton, while the hull of pieces active within
        // radius 0.1 opens all three ties and contains ≈0.
        let x = [0.9993, -1.0008];
        let (_, exact) = spec.min_norm_subgradient(&x).unwrap();
        assert!(exact > 3.0);
        let gens = spec.generators_within(&x, 0.1).unwrap();
        assert_eq!(gens.len(), 8);
        let (_, d) = min_norm_point(&gens);
        assert!(d <= 1e-2);
        // Near a non-critical stretch of the x₁² = 1 kink surface the
        // widened hull still excludes 0.
        let y = [1.0003, 0.5];
        let gens = spec.generators_within(&y, 0.1).unwrap();
        let (_, d) = min_norm_point(&gens);
        assert!(d > 0.5);
    }

    #[test]
    fn min_norm_examples() {
        let abs = get("abs1d");
        let (v, n) = min_norm_subgradient(&abs, &[0.0]).unwrap();
        assert_eq!((v[0], n), (0.0, 0.0));

        // At (0, 0.5) only the first piece attains the max (6 > 1.5), so the
        // subdifferential is the singleton {(0, 12)}.
        let strict = get("strict2d");
        let (_, n) = min_norm_subgradient(&strict, &[0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(n, 12.0, epsilon = 1e-10);

        let quad = get("quad");
        let (v, n) = min_norm_subgradient(&quad, &[3.0, 4.0]).unwrap();
        assert_eq!(v, vec![3.0, 4.0]);
        assert_abs_diff_eq!(n, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_examples() {
        let relu = get("relu_net");
        assert_abs_diff_eq!(
            distance_to_critical(&relu, &[1.02, 0.97, -0.05]).unwrap(),
            0.05,
            epsilon = 1e-15
        );
        assert_eq!(distance_to_critical(&relu, &[1.0, 1.0, 0.0]).unwrap(), 0.0);

        let rpca = get("rpca_l1");
        let x_star = rpca.rpca().unwrap().x_star.clone();
        assert_eq!(distance_to_critical(&rpca, &x_star).unwrap(), 0.0);

        let far = vec![2.0, 2.0, 2.0];
        assert!(matches!(
            distance_to_critical(&relu, &far),
            Err(Error::OutOfNeighborhood { .. })
        ));
    }

    #[test]
    fn component_sum_identity() {
        let spec = get("global_l1");
        let mut g = SplitMix64::new(11);
        for _ in 0..200 {
            let x = [g.uniform(-2.0, 2.0), g.uniform(-2.0, 2.0)];
            let sum: f64 = (0..3).map(|i| spec.component_value(i, &x)).sum();
            assert_abs_diff_eq!(spec.value(&x), sum / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn strict2d_generators_at_origin_contain_zero() {
        let spec = get("strict2d");
        let gens = spec.generators(&[0.0, 0.0]).unwrap();
        assert_eq!(gens.len(), 4);
        let (_, d) = min_norm_point(&gens);
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn verdier_ok_projection_lands_on_hyperbola() {
        let spec = get("verdier_ok");
        let cs = spec.critical_set().unwrap();
        let mut g = SplitMix64::new(5);
        for _ in 0..100 {
            let x = g.in_ball(&[1.0, 1.0], 0.4);
            let p = cs.project(&x);
            assert_abs_diff_eq!(p[0] * p[1], 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(cs.distance(&x), crate::dist(&x, &p), epsilon = 1e-10);
            assert!(cs.distance(&p) <= 1e-12);
        }
    }

    #[test]
    fn tangent_projection_idempotent_and_orthogonal() {
        for id in ["verdier_ok", "verdier_bad", "relu_net", "quad"] {
            let spec = get(id);
            let cs = spec.critical_set().unwrap();
            let anchor = cs.anchor();
            let mut g = SplitMix64::new(17);
            for _ in 0..50 {
                let y = cs.project(&g.in_ball(&anchor, 0.3 * cs.valid_radius().min(1.0)));
                let v: Vec<f64> = (0..y.len()).map(|_| g.uniform(-1.0, 1.0)).collect();
                let pv = cs.tangent_project(&y, &v);
                let ppv = cs.tangent_project(&y, &pv);
                for (a, b) in pv.iter().zip(&ppv) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn rpca_subgrad_structure() {
        let spec = get("rpca_l1");
        let inst = spec.rpca().unwrap();
        let mut g = SplitMix64::new(23);
        for _ in 0..20 {
            let x: Vec<f64> = (0..RPCA_DIM).map(|_| g.uniform(-1.0, 1.0)).collect();
            let sg = spec.subgrad(&x, SubgradientSelection::deterministic_sign());
            let r = inst.residual(&x);
            let lambda: Vec<f64> = r.iter().map(|&e| sign0(e)).collect();
            let expect = inst.subgradient_for_lambda(&x, &lambda);
            assert_eq!(sg, expect);
        }
    }

    #[test]
    fn seeded_extreme_is_deterministic_and_a_vertex() {
        let spec = get("strict2d");
        let x = [0.3, 0.0];
        let sel = SubgradientSelection::seeded_random_extreme(77);
        let a = spec.subgrad(&x, sel);
        let b = spec.subgrad(&x, sel);
        assert_eq!(a, b);
        let gens = spec.generators(&x).unwrap();
        assert!(gens.contains(&a));
    }

    #[test]
    fn dimension_validation() {
        let spec = get("strict2d");
        assert!(matches!(
            subgradient_select(&spec, &[1.0], SubgradientSelection::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            subgradient_select(&spec, &[f64::NAN, 0.0], SubgradientSelection::default()),
            Err(Error::NonFinitePoint)
        ));
    }
}
