//! The four constant-step-size first-order methods, as deterministic seeded
//! iterations producing replayable traces.
//!
//! - subgradient: x_{k+1} = x_k − α·s(x_k)
//! - momentum:    y_k = x_k + γ(x_k − x_{k−1}),
//!                x_{k+1} = x_k + β(x_k − x_{k−1}) − α·s(y_k)
//! - reshuffling: per epoch a seeded permutation σᵏ of the components; the
//!   momentum recursion applied with ∂f_{σᵏᵢ} on each inner step
//! - cyclic coordinate descent: per epoch a seeded permutation of the
//!   coordinates; x ← x − α·[∇f(x)]ⱼ eⱼ one coordinate at a time
//!
//! Every trace replays bit-for-bit from (spec, params, x₀): randomness is
//! confined to the seeded permutation/selection streams, and the update
//! arithmetic is fixed expression-for-expression (see [`replay_check`]).

use serde::Serialize;

use crate::error::Error;
use crate::oracles::{ObjectiveSpec, SubgradientSelection};
use crate::rng::SplitMix64;
use crate::{all_finite, dist, norm, Point};

/// Iterates whose norm exceeds this count as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Step size and momentum/initialization constants shared by all methods.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MethodParams {
    /// Step size α > 0.
    pub alpha: f64,
    /// Momentum β ∈ (−1, 1).
    pub beta: f64,
    /// Look-ahead momentum γ.
    pub gamma: f64,
    /// Initialization bound constant δ: momentum methods require
    /// ‖x₋₁ − x₀‖ ⩽ δα.
    pub delta: f64,
    /// Seed for permutation draws and the seeded selection rule.
    pub seed: u64,
    /// Subgradient selection rule.
    pub selection: SubgradientSelection,
}

impl MethodParams {
    pub fn new(alpha: f64) -> Self {
        MethodParams {
            alpha,
            beta: 0.0,
            gamma: 0.0,
            delta: 1.0,
            seed: 0,
            selection: SubgradientSelection::default(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Precondition(format!(
                "alpha must be a positive real, got {}",
                self.alpha
            )));
        }
        if !(self.beta.abs() < 1.0) {
            return Err(Error::Precondition(format!(
                "beta must lie in (-1, 1), got {}",
                self.beta
            )));
        }
        if !self.gamma.is_finite() || !self.delta.is_finite() {
            return Err(Error::Precondition("gamma/delta must be finite".into()));
        }
        Ok(())
    }
}

/// One seeded method run: iterates, values, the subgradients consumed by
/// each step, criticality proxies where the entry has generators, and the
/// permutations drawn by the epoch-based methods.
#[derive(Clone, Debug, Serialize)]
pub struct IterateTrace {
    /// Method tag: "sg", "momentum", "rr", or "cd".
    pub method_id: &'static str,
    pub params: MethodParams,
    /// x₀ … x_K; epoch-based methods record every inner iterate.
    pub points: Vec<Point>,
    /// f(x_k) for each recorded point.
    pub f_values: Vec<f64>,
    /// Subgradient consumed by step k (at y_k for momentum methods); for
    /// cyclic coordinate descent, the coordinate gradient zero-padded to a
    /// full vector. Length = points.len() − 1.
    pub selected_subgrads: Vec<Point>,
    /// d(0, ∂f(x_k)) per recorded point, when the entry has generators.
    pub min_norm_proxy: Option<Vec<f64>>,
    /// x₋₁ for momentum, x_prev_tail for reshuffling.
    pub pre_point: Option<Point>,
    /// σᵏ for each epoch (reshuffling: component indices; cd: coordinates).
    pub permutations: Vec<Vec<usize>>,
}

impl IterateTrace {
    fn new(method_id: &'static str, params: MethodParams, x0: &[f64]) -> Self {
        IterateTrace {
            method_id,
            params,
            points: vec![x0.to_vec()],
            f_values: Vec::new(),
            selected_subgrads: Vec::new(),
            min_norm_proxy: None,
            pre_point: None,
            permutations: Vec::new(),
        }
    }

    /// Number of recorded points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> &Point {
        self.points.last().expect("traces hold at least x0")
    }

    /// Fill f_values and, when the entry has generators, the min-norm proxy.
    fn finalize(mut self, spec: &ObjectiveSpec) -> Self {
        self.f_values = self.points.iter().map(|p| spec.value(p)).collect();
        if spec.generators(&self.points[0]).is_some() {
            self.min_norm_proxy = Some(
                self.points
                    .iter()
                    .map(|p| spec.min_norm_subgradient(p).map(|(_, d)| d).unwrap_or(f64::NAN))
                    .collect(),
            );
        }
        self
    }
}

fn diverged(x: &[f64]) -> bool {
    !all_finite(x) || norm(x) > DIVERGENCE_NORM
}

fn divergence_error(trace: IterateTrace, spec: &ObjectiveSpec, bad: Point) -> Error {
    let mut trace = trace;
    if all_finite(&bad) {
        trace.points.push(bad);
    }
    let at = trace.points.len() - 1;
    Error::Divergence {
        at,
        partial: Box::new(trace.finalize(spec)),
    }
}

/// Alg. 1: constant-step subgradient method.
pub fn run_subgradient(
    spec: &ObjectiveSpec,
    x0: &[f64],
    params: MethodParams,
    k_steps: usize,
) -> Result<IterateTrace, Error> {
    spec.validate_point(x0)?;
    params.validate()?;
    let mut trace = IterateTrace::new("sg", params, x0);
    let mut x = x0.to_vec();
    for _ in 0..k_steps {
        let s = spec.subgrad(&x, params.selection);
        let xn: Point = x
            .iter()
            .zip(&s)
            .map(|(xi, si)| xi - params.alpha * si)
            .collect();
        trace.selected_subgrads.push(s);
        if diverged(&xn) {
            return Err(divergence_error(trace, spec, xn));
        }
        trace.points.push(xn.clone());
        x = xn;
    }
    Ok(trace.finalize(spec))
}

/// Alg. 2: subgradient method with (heavy-ball/Nesterov-style) momentum.
pub fn run_momentum(
    spec: &ObjectiveSpec,
    x0: &[f64],
    x_minus1: &[f64],
    params: MethodParams,
    k_steps: usize,
) -> Result<IterateTrace, Error> {
    spec.validate_point(x0)?;
    spec.validate_point(x_minus1)?;
    params.validate()?;
    check_init_bound(x_minus1, x0, &params)?;

    let mut trace = IterateTrace::new("momentum", params, x0);
    trace.pre_point = Some(x_minus1.to_vec());
    let mut prev = x_minus1.to_vec();
    let mut cur = x0.to_vec();
    for _ in 0..k_steps {
        let s = {
            let y = look_ahead(&cur, &prev, params.gamma);
            spec.subgrad(&y, params.selection)
        };
        let xn = momentum_step(&cur, &prev, &s, params.beta, params.alpha);
        trace.selected_subgrads.push(s);
        if diverged(&xn) {
            return Err(divergence_error(trace, spec, xn));
        }
        trace.points.push(xn.clone());
        prev = cur;
        cur = xn;
    }
    Ok(trace.finalize(spec))
}

/// Alg. 3: random reshuffling with momentum over the component split.
pub fn run_reshuffling(
    spec: &ObjectiveSpec,
    x0: &[f64],
    x_prev_tail: &[f64],
    params: MethodParams,
    epochs: usize,
) -> Result<IterateTrace, Error> {
    spec.validate_point(x0)?;
    spec.validate_point(x_prev_tail)?;
    params.validate()?;
    check_init_bound(x_prev_tail, x0, &params)?;
    let n_comp = spec.num_components().ok_or_else(|| Error::UnsupportedOracle {
        id: spec.id().to_string(),
        oracle: "components",
    })?;

    let mut rng = SplitMix64::stream(params.seed, 0x5217);
    let mut trace = IterateTrace::new("rr", params, x0);
    trace.pre_point = Some(x_prev_tail.to_vec());
    let mut prev = x_prev_tail.to_vec();
    let mut cur = x0.to_vec();
    for _ in 0..epochs {
        let perm = rng.permutation(n_comp);
        for &comp in &perm {
            let s = {
                let y = look_ahead(&cur, &prev, params.gamma);
                spec.component_subgrad(comp, &y, params.selection)
            };
            let xn = momentum_step(&cur, &prev, &s, params.beta, params.alpha);
            trace.selected_subgrads.push(s);
            if diverged(&xn) {
                trace.permutations.push(perm);
                return Err(divergence_error(trace, spec, xn));
            }
            trace.points.push(xn.clone());
            prev = cur;
            cur = xn;
        }
        trace.permutations.push(perm);
    }
    Ok(trace.finalize(spec))
}

/// Alg. 4: cyclic coordinate descent over random coordinate permutations;
/// requires the gradient oracle (C¹ entries).
pub fn run_cyclic_cd(
    spec: &ObjectiveSpec,
    x0: &[f64],
    params: MethodParams,
    epochs: usize,
) -> Result<IterateTrace, Error> {
    spec.validate_point(x0)?;
    params.validate()?;
    if spec.gradient(x0).is_none() {
        return Err(Error::UnsupportedOracle {
            id: spec.id().to_string(),
            oracle: "gradient",
        });
    }

    let n = x0.len();
    let mut rng = SplitMix64::stream(params.seed, 0xccd0);
    let mut trace = IterateTrace::new("cd", params, x0);
    let mut x = x0.to_vec();
    for _ in 0..epochs {
        let perm = rng.permutation(n);
        for &j in &perm {
            let grad = spec.gradient(&x).expect("checked above");
            let mut s = vec![0.0; n];
            s[j] = grad[j];
            let xn: Point = x
                .iter()
                .zip(&s)
                .map(|(xi, si)| xi - params.alpha * si)
                .collect();
            trace.selected_subgrads.push(s);
            if diverged(&xn) {
                trace.permutations.push(perm);
                return Err(divergence_error(trace, spec, xn));
            }
            trace.points.push(xn.clone());
            x = xn;
        }
        trace.permutations.push(perm);
    }
    Ok(trace.finalize(spec))
}

fn check_init_bound(x_prev: &[f64], x0: &[f64], params: &MethodParams) -> Result<(), Error> {
    let d = dist(x_prev, x0);
    if d > params.delta * params.alpha {
        return Err(Error::Precondition(format!(
            "initialization bound violated: ‖x₋₁ − x₀‖ = {} > δα = {}",
            d,
            params.delta * params.alpha
        )));
    }
    Ok(())
}

/// y = cur + γ(cur − prev); written so γ = 0 is bitwise the identity.
fn look_ahead(cur: &[f64], prev: &[f64], gamma: f64) -> Point {
    if gamma == 0.0 {
        cur.to_vec()
    } else {
        cur.iter()
            .zip(prev)
            .map(|(c, p)| c + gamma * (c - p))
            .collect()
    }
}

/// x⁺ = cur + β(cur − prev) − α·s; written so β = 0 is bitwise the plain
/// subgradient step.
fn momentum_step(cur: &[f64], prev: &[f64], s: &[f64], beta: f64, alpha: f64) -> Point {
    if beta == 0.0 {
        cur.iter().zip(s).map(|(c, si)| c - alpha * si).collect()
    } else {
        cur.iter()
            .zip(prev)
            .zip(s)
            .map(|((c, p), si)| c + beta * (c - p) - alpha * si)
            .collect()
    }
}

/// Re-derive every stored point from its predecessor and the stored
/// subgradient; true only if the whole trace reproduces to 0 ulp.
pub fn replay_check(trace: &IterateTrace) -> bool {
    let p = &trace.params;
    let mut prev: Option<&Point> = trace.pre_point.as_ref();
    for k in 0..trace.selected_subgrads.len() {
        let cur = &trace.points[k];
        let s = &trace.selected_subgrads[k];
        let expect = match trace.method_id {
            "sg" | "cd" => cur
                .iter()
                .zip(s)
                .map(|(xi, si)| xi - p.alpha * si)
                .collect::<Point>(),
            "momentum" | "rr" => momentum_step(cur, prev.expect("pre_point recorded"), s, p.beta, p.alpha),
            other => panic!("unknown method id {other}"),
        };
        if expect
            .iter()
            .zip(&trace.points[k + 1])
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return false;
        }
        prev = Some(&trace.points[k]);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::catalog_get;
    use approx::assert_abs_diff_eq;

    #[test]
    fn abs1d_hand_iteration() {
        let spec = catalog_get("abs1d").unwrap();
        let trace = run_subgradient(&spec, &[1.0], MethodParams::new(0.3), 4).unwrap();
        let xs: Vec<f64> = trace.points.iter().map(|p| p[0]).collect();
        for (got, want) in xs.iter().zip([1.0, 0.7, 0.4, 0.1, -0.2]) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-15);
        }
        assert!(replay_check(&trace));
    }

    #[test]
    fn quad_contraction() {
        let spec = catalog_get("quad").unwrap();
        let trace = run_subgradient(&spec, &[1.0, 0.0], MethodParams::new(0.1), 2).unwrap();
        assert_eq!(trace.points[1], vec![0.9, 0.0]);
        assert_abs_diff_eq!(trace.points[2][0], 0.81, epsilon = 1e-15);
    }

    #[test]
    fn momentum_hand_iteration() {
        let spec = catalog_get("quad").unwrap();
        let mut params = MethodParams::new(0.1);
        params.beta = 0.5;
        let x0 = [1.0, 0.0];
        let trace = run_momentum(&spec, &x0, &x0, params, 2).unwrap();
        assert_abs_diff_eq!(trace.points[1][0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(trace.points[2][0], 0.76, epsilon = 1e-15);
        assert!(replay_check(&trace));
    }

    #[test]
    fn momentum_degenerates_to_subgradient_bitwise() {
        let spec = catalog_get("strict2d").unwrap();
        let params = MethodParams::new(0.07);
        let x0 = [0.3, -0.2];
        let a = run_subgradient(&spec, &x0, params, 50).unwrap();
        let b = run_momentum(&spec, &x0, &x0, params, 50).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            for (u, v) in p.iter().zip(q) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn momentum_zero_stays_at_abs_kink() {
        let spec = catalog_get("abs1d").unwrap();
        let mut params = MethodParams::new(0.2);
        params.beta = 0.4;
        params.gamma = 0.3;
        params.selection = SubgradientSelection::min_norm();
        let trace = run_momentum(&spec, &[0.0], &[0.0], params, 5).unwrap();
        assert!(trace.points.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn reshuffling_structure() {
        let spec = catalog_get("global_l1").unwrap();
        let mut params = MethodParams::new(0.01);
        params.seed = 7;
        let x0 = [2.0, 2.0];
        let trace = run_reshuffling(&spec, &x0, &x0, params, 3).unwrap();
        assert_eq!(trace.permutations.len(), 3);
        assert_eq!(trace.selected_subgrads.len(), 9);
        assert_eq!(trace.points.len(), 10);
        for perm in &trace.permutations {
            let mut sorted = perm.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2]);
        }
        assert!(replay_check(&trace));

        let again = run_reshuffling(&spec, &x0, &x0, params, 3).unwrap();
        assert_eq!(trace.permutations, again.permutations);
    }

    #[test]
    fn cyclic_cd_on_quad() {
        let spec = catalog_get("quad").unwrap();
        let trace = run_cyclic_cd(&spec, &[1.0, 1.0], MethodParams::new(0.25), 1).unwrap();
        assert_eq!(trace.last(), &vec![0.75, 0.75]);
        let trace2 = run_cyclic_cd(&spec, &[1.0, 1.0], MethodParams::new(0.25), 2).unwrap();
        assert_eq!(trace2.last(), &vec![0.5625, 0.5625]);
        assert!(replay_check(&trace2));
    }

    #[test]
    fn cyclic_cd_needs_gradient() {
        let spec = catalog_get("abs1d").unwrap();
        assert!(matches!(
            run_cyclic_cd(&spec, &[1.0], MethodParams::new(0.1), 1),
            Err(Error::UnsupportedOracle { .. })
        ));
    }

    #[test]
    fn initialization_bound_enforced() {
        let spec = catalog_get("quad").unwrap();
        let params = MethodParams::new(0.1);
        let err = run_momentum(&spec, &[1.0, 0.0], &[2.0, 0.0], params, 1);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn divergence_carries_partial_trace() {
        let spec = catalog_get("quad").unwrap();
        let err = run_subgradient(&spec, &[1.0], MethodParams::new(3.0), 200).unwrap_err();
        match err {
            Error::Divergence { at, partial } => {
                assert!(at > 0);
                assert!(partial.points.len() > 1);
                assert!(partial.points.iter().all(|p| all_finite(p)));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn sin_iterates_stay_near_origin() {
        let spec = catalog_get("sin_example").unwrap();
        // The iterates drift to a two-cycle straddling the critical point
        // 1/t₄ ≈ 0.0583 and peak at ≈ 0.0637 (verified in 60-digit
        // arithmetic), so 0.07 is the honest envelope.
        let trace = run_subgradient(&spec, &[-0.01], MethodParams::new(0.01), 100).unwrap();
        assert!(trace.points.iter().all(|p| p[0].abs() <= 0.07));
        let max = trace.points.iter().map(|p| p[0].abs()).fold(0.0f64, f64::max);
        assert!(max > 0.05, "expected the two-cycle excursion, max {max}");
    }

    #[test]
    fn f_values_match_oracle() {
        let spec = catalog_get("global_l1").unwrap();
        let trace = run_subgradient(&spec, &[1.5, -0.5], MethodParams::new(0.01), 100).unwrap();
        for (p, f) in trace.points.iter().zip(&trace.f_values) {
            assert_abs_diff_eq!(spec.value(p), *f, epsilon = 1e-12);
        }
        let proxy = trace.min_norm_proxy.as_ref().unwrap();
        assert_eq!(proxy.len(), trace.points.len());
        assert!(proxy.iter().all(|d| d.is_finite()));
    }
}
