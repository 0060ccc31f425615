//! Closed-form computations for f(x) = x²sin(1/x).
//!
//! The nonzero critical points of f are the reciprocals of the roots of
//! tan(t) = t/2: writing φ(t) = tan(t) − t/2, φ is strictly increasing from
//! −∞ to +∞ on each branch interval (π/2 + kπ, π/2 + (k+1)π), so it has
//! exactly one root t_k there, found by bisection. The second derivative at
//! 1/t_k has the sign of cos(t_k)·(−t_k − t_k³/2): positive (local minimum)
//! for even k, negative for odd k.
//!
//! [`sin_stability_constants`] turns the root table into the explicit
//! (δ, ᾱ) certificate used by the local-stability experiment: for a target
//! ball [−ε, ε] it picks the even-index regime below ε, sets δ to the
//! critical point two indices deeper, and caps the step size by half the
//! smallest of the three surrounding gaps.

use serde::Serialize;

use crate::error::Error;

/// Sign of f″ at a critical point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SecondDerivSign {
    /// Local minimum.
    Plus,
    /// Local maximum.
    Minus,
}

/// Root table of tan(t) = t/2, one root per branch interval.
#[derive(Clone, Debug, Serialize)]
pub struct SinCriticalTable {
    /// t₀ < t₁ < …, root k in (π/2 + kπ, π/2 + (k+1)π).
    pub roots: Vec<f64>,
    /// Critical points 1/t_k of f, decreasing in k.
    pub critical_points: Vec<f64>,
    /// Sign of f″(1/t_k); alternates starting with Plus at k = 0.
    pub second_deriv_signs: Vec<SecondDerivSign>,
}

impl SinCriticalTable {
    /// CSV rendering: `k,t_k,1/t_k,sign` with one row per root.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t_k,inv_t_k,sign\n");
        for (k, (t, s)) in self.roots.iter().zip(&self.second_deriv_signs).enumerate() {
            let sign = match s {
                SecondDerivSign::Plus => "+",
                SecondDerivSign::Minus => "-",
            };
            out.push_str(&format!("{},{},{},{}\n", k, t, self.critical_points[k], sign));
        }
        out
    }
}

/// Roots t₀ … t_{k_max} of tan(t) = t/2 by bracketed bisection, accurate to
/// the conditioning limit of tan (residual ~ sec²(t_k)·ulp(t_k)).
pub fn sin_critical_points(k_max: usize) -> SinCriticalTable {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let pi = std::f64::consts::PI;
    let mut roots = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let lo = half_pi + k as f64 * pi;
        let hi = lo + pi;
        roots.push(bisect_tan_branch(lo, hi));
    }
    let critical_points = roots.iter().map(|t| 1.0 / t).collect();
    let second_deriv_signs = roots
        .iter()
        .map(|&t| {
            // f″(1/t) ∝ cos(t)·(−t − t³/2); the second factor is negative.
            if t.cos() < 0.0 {
                SecondDerivSign::Plus
            } else {
                SecondDerivSign::Minus
            }
        })
        .collect();
    SinCriticalTable {
        roots,
        critical_points,
        second_deriv_signs,
    }
}

/// Bisection for φ(t) = tan(t) − t/2 on one branch (lo, hi) where φ runs
/// from −∞ to +∞; 200 iterations cap, which exhausts f64 resolution.
fn bisect_tan_branch(lo: f64, hi: f64) -> f64 {
    let phi = |t: f64| t.tan() - t / 2.0;
    // Stay strictly inside the branch so tan is finite.
    let mut a = lo + 1e-9 * (1.0 + lo.abs());
    let mut b = hi - 1e-9 * (1.0 + hi.abs());
    debug_assert!(phi(a) < 0.0 && phi(b) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if phi(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

/// The (N, δ, ᾱ) certificate for the ball [−ε, ε].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SinStabilityConstants {
    /// Index of the governing critical point 1/t_N ⩽ ε, forced even.
    pub n_index: usize,
    /// Initialization radius δ = 1/t_{N+2} < ε.
    pub delta: f64,
    /// Step-size cap ᾱ = ½·min of the three consecutive gaps from N.
    pub alpha_bar: f64,
    /// True when the largest admissible index was odd and the construction
    /// moved to the next even regime.
    pub adjusted: bool,
}

/// Stability constants for f(x) = x²sin(1/x) on [−ε, ε], 0 < ε < ½.
pub fn sin_stability_constants(epsilon: f64) -> Result<SinStabilityConstants, Error> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Precondition(format!(
            "epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    // 1/t_k decreases in k, so the greatest critical point ⩽ ε has the
    // smallest index with 1/t_k ⩽ ε. Grow the table until found.
    let mut k_max = 8;
    loop {
        let table = sin_critical_points(k_max);
        if let Some(first) = table.critical_points.iter().position(|&c| c <= epsilon) {
            let adjusted = first % 2 == 1;
            let n = if adjusted { first + 1 } else { first };
            if n + 3 > k_max {
                k_max = n + 3;
                continue;
            }
            let c = &table.critical_points;
            let gaps = [c[n] - c[n + 1], c[n + 1] - c[n + 2], c[n + 2] - c[n + 3]];
            let alpha_bar = 0.5 * gaps.iter().fold(f64::INFINITY, |a, &g| a.min(g));
            return Ok(SinStabilityConstants {
                n_index: n,
                delta: c[n + 2],
                alpha_bar,
                adjusted,
            });
        }
        k_max *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn known_critical_points() {
        let table = sin_critical_points(4);
        assert_abs_diff_eq!(table.critical_points[0], 0.23393, epsilon = 5e-5);
        assert_abs_diff_eq!(table.critical_points[1], 0.13164, epsilon = 5e-5);
        assert_abs_diff_eq!(table.critical_points[2], 0.09248, epsilon = 5e-5);
    }

    #[test]
    fn roots_inside_brackets_and_accurate() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let pi = std::f64::consts::PI;
        let table = sin_critical_points(8);
        for (k, &t) in table.roots.iter().enumerate() {
            let lo = half_pi + k as f64 * pi;
            assert!(t > lo && t < lo + pi);
            assert!(
                (t.tan() - t / 2.0).abs() <= 1e-12,
                "k={k}: residual {}",
                (t.tan() - t / 2.0).abs()
            );
        }
    }

    #[test]
    fn signs_alternate_starting_plus() {
        let table = sin_critical_points(7);
        for (k, s) in table.second_deriv_signs.iter().enumerate() {
            let want = if k % 2 == 0 {
                SecondDerivSign::Plus
            } else {
                SecondDerivSign::Minus
            };
            assert_eq!(*s, want, "k={k}");
        }
    }

    #[test]
    fn gaps_positive() {
        let table = sin_critical_points(12);
        for w in table.critical_points.windows(2) {
            assert!(w[0] - w[1] > 0.0);
        }
    }

    #[test]
    fn constants_for_easy_epsilon() {
        let c = sin_stability_constants(0.45).unwrap();
        assert_eq!(c.n_index, 0);
        assert!(!c.adjusted);
        assert_abs_diff_eq!(c.delta, 0.09248, epsilon = 5e-5);
        assert!(c.alpha_bar > 0.0);
    }

    #[test]
    fn odd_index_regimes_are_adjusted() {
        // 1/t₀ ≈ 0.234 > 0.2 ⩾ 1/t₁, so the largest admissible index is 1
        // and the construction moves to the even regime N = 2.
        let c = sin_stability_constants(0.2).unwrap();
        assert!(c.adjusted);
        assert_eq!(c.n_index, 2);
        assert!(c.delta <= 0.2 && c.alpha_bar > 0.0);
    }

    #[test]
    fn epsilon_range_enforced() {
        assert!(sin_stability_constants(0.5).is_err());
        assert!(sin_stability_constants(0.0).is_err());
    }

    #[test]
    fn derivative_bounded_by_two_on_half_ball() {
        // |f′| = |2x sin(1/x) − cos(1/x)| ⩽ 2|x| + 1 ⩽ 2 on |x| ⩽ ½.
        let spec = crate::oracles::catalog_get("sin_example").unwrap();
        let mut g = crate::rng::SplitMix64::new(41);
        for _ in 0..10_000 {
            let x = [g.uniform(-0.5, 0.5)];
            let s = spec.subgrad(&x, crate::oracles::SubgradientSelection::default());
            assert!(s[0].abs() <= 2.0);
        }
    }

    #[test]
    fn csv_export_shape() {
        let table = sin_critical_points(3);
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("k,t_k,inv_t_k,sign"));
    }
}
