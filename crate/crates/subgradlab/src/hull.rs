//! Minimum-norm point in the convex hull of a small set of vectors.
//!
//! The Clarke subdifferential of every catalog entry with a generator oracle
//! is the convex hull of at most 8 active-piece gradients, so exhaustive
//! face enumeration is exact and cheap: the minimum-norm point of a polytope
//! lies in the relative interior of some face, and the affine minimizer over
//! that face's (affinely independent) vertex set has nonnegative barycentric
//! coordinates. Enumerating all vertex subsets therefore finds it.

/// Coefficient threshold below which a barycentric coordinate counts as
/// nonnegative; absorbs roundoff in the KKT solves.
const COEF_TOL: f64 = 1e-12;

/// Minimum-norm point of conv(generators) and its norm.
///
/// Exact up to roundoff for up to ~20 generators (cost 2^m subset solves);
/// catalog entries provide at most 8. Panics on an empty generator list
/// (the Clarke subdifferential is never empty).
pub fn min_norm_point(generators: &[Vec<f64>]) -> (Vec<f64>, f64) {
    assert!(!generators.is_empty(), "empty generator list");
    let n = generators[0].len();
    let m = generators.len();

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if let Some(coef) = affine_min_norm_coefficients(generators, &idx) {
            if coef.iter().all(|&c| c >= -COEF_TOL) {
                let mut p = vec![0.0; n];
                for (&i, &c) in idx.iter().zip(&coef) {
                    for (pj, gj) in p.iter_mut().zip(&generators[i]) {
                        *pj += c * gj;
                    }
                }
                let nrm2 = crate::norm_sq(&p);
                if best.as_ref().map_or(true, |(_, b)| nrm2 < *b) {
                    best = Some((p, nrm2));
                }
            }
        }
    }
    let (p, nrm2) = best.expect("singleton subsets always solve");
    let nrm = nrm2.sqrt();
    (p, nrm)
}

/// Distance from `point` to conv(generators), with the nearest hull point.
pub fn project_onto_hull(point: &[f64], generators: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let shifted: Vec<Vec<f64>> = generators
        .iter()
        .map(|g| g.iter().zip(point).map(|(a, b)| a - b).collect())
        .collect();
    let (q, d) = min_norm_point(&shifted);
    let nearest = q.iter().zip(point).map(|(a, b)| a + b).collect();
    (nearest, d)
}

/// Barycentric coordinates of the min-norm point of the affine hull of the
/// selected generators, or None when the KKT system is singular (affinely
/// dependent subset; a smaller independent subset covers the same face).
fn affine_min_norm_coefficients(generators: &[Vec<f64>], idx: &[usize]) -> Option<Vec<f64>> {
    let k = idx.len();
    if k == 1 {
        return Some(vec![1.0]);
    }
    // Minimize ‖Σ λᵢ gᵢ‖² subject to Σ λᵢ = 1:
    // [ G  1 ] [λ]   [0]
    // [ 1ᵀ 0 ] [μ] = [1]   with Gᵢⱼ = ⟨gᵢ, gⱼ⟩.
    let dim = k + 1;
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    for r in 0..k {
        for c in 0..k {
            let mut dot = 0.0;
            for (u, v) in generators[idx[r]].iter().zip(&generators[idx[c]]) {
                dot += u * v;
            }
            a[r * dim + c] = dot;
        }
        a[r * dim + k] = 1.0;
        a[k * dim + r] = 1.0;
    }
    b[k] = 1.0;
    solve_dense(&mut a, &mut b, dim).map(|mut sol| {
        sol.truncate(k);
        sol
    })
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale: f64 = a
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot <= 1e-13 * scale {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(pivot_row * n + c, col * n + c);
            }
            b.swap(pivot_row, col);
        }
        for r in col + 1..n {
            let factor = a[r * n + col] / a[col * n + col];
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r * n + c] * x[c];
        }
        x[r] = acc / a[r * n + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interval_containing_zero() {
        let (p, d) = min_norm_point(&[vec![-1.0], vec![1.0]]);
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn one_sided_interval() {
        let (p, d) = min_norm_point(&[vec![0.5], vec![2.0]]);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn segment_in_the_plane() {
        // Segment (1,1) + t(2,-2): ‖(1+2t, 1-2t)‖² = 2 + 8t², minimized at
        // the endpoint t=0, so the min-norm point is the vertex (1,1).
        let (p, d) = min_norm_point(&[vec![1.0, 1.0], vec![3.0, -1.0]]);
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d, 2.0f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn triangle_containing_origin() {
        let gens = vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let (_, d) = min_norm_point(&gens);
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_generators_are_harmless() {
        let gens = vec![vec![2.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]];
        let (p, d) = min_norm_point(&gens);
        assert_abs_diff_eq!(d, 2.0f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn projection_distance_matches_shift() {
        let gens = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (nearest, d) = project_onto_hull(&[0.0, 0.0], &gens);
        assert_abs_diff_eq!(d, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
        assert_abs_diff_eq!(nearest[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(nearest[1], 0.5, epsilon = 1e-10);
    }
}
