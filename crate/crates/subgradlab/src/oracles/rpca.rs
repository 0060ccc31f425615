//! Synthetic robust-PCA instance: f(X, Y) = ‖XYᵀ − M‖₁.
//!
//! M is 20×12, rank 2 plus 5% sparse outliers, with its first r = 3 rows
//! identically zero. The zero rows make (X*, 0) with X* = [I₃; 0] a spurious
//! critical point at value ‖M‖₁: the residual there is −M, whose first three
//! rows vanish, so the sign matrix can be chosen zero on exactly the block
//! that multiplies X̂* = I₃.

use crate::rng::SplitMix64;
use crate::Point;

/// Rows of M (and of X).
pub const RPCA_ROWS: usize = 20;
/// Columns of M (and rows of Y).
pub const RPCA_COLS: usize = 12;
/// Factorization rank r (columns of X and Y); also the number of zero rows.
pub const RPCA_RANK: usize = 3;
/// Rank of the clean component of M.
const CLEAN_RANK: usize = 2;
/// Number of sparse outlier entries: 5% of 20·12.
const OUTLIERS: usize = RPCA_ROWS * RPCA_COLS / 20;

/// Seed used by `catalog_get("rpca_l1")` so the bare id is reproducible;
/// per-run instances come from `rpca_with_seed`.
pub const DEFAULT_RPCA_SEED: u64 = 0x5ca1_ab1e;

/// One synthetic instance, generated deterministically from a seed.
#[derive(Clone, Debug)]
pub struct RpcaInstance {
    /// Generating seed, recorded in run metadata.
    pub seed: u64,
    /// M, row-major 20×12.
    pub m: Vec<f64>,
    /// ‖M‖₁ = f(X*, 0), the spurious critical value.
    pub m_norm1: f64,
    /// Flattened (X*, Y*) = ([I₃; 0], 0), the spurious critical point.
    pub x_star: Point,
}

/// Total flattened dimension: X is 20×3, Y is 12×3.
pub const RPCA_DIM: usize = RPCA_ROWS * RPCA_RANK + RPCA_COLS * RPCA_RANK;

/// Smallest singular value of X̂* = I₃; the critical-set oracle is certified
/// within half of it, where X̂ stays invertible.
pub const SIGMA_MIN_XHAT: f64 = 1.0;

impl RpcaInstance {
    pub fn generate(seed: u64) -> Self {
        let mut g = SplitMix64::stream(seed, 0x7bca);
        // Rank-2 component U·Vᵀ with uniform(-1,1) factors.
        let u: Vec<f64> = (0..RPCA_ROWS * CLEAN_RANK)
            .map(|_| g.uniform(-1.0, 1.0))
            .collect();
        let v: Vec<f64> = (0..RPCA_COLS * CLEAN_RANK)
            .map(|_| g.uniform(-1.0, 1.0))
            .collect();
        let mut m = vec![0.0; RPCA_ROWS * RPCA_COLS];
        for i in RPCA_RANK..RPCA_ROWS {
            for j in 0..RPCA_COLS {
                let mut acc = 0.0;
                for k in 0..CLEAN_RANK {
                    acc += u[i * CLEAN_RANK + k] * v[j * CLEAN_RANK + k];
                }
                m[i * RPCA_COLS + j] = acc;
            }
        }
        // Sparse outliers, kept out of the first r rows so those stay zero.
        let mut cells: Vec<usize> = (RPCA_RANK * RPCA_COLS..RPCA_ROWS * RPCA_COLS).collect();
        g.shuffle(&mut cells);
        for &cell in cells.iter().take(OUTLIERS) {
            let magnitude = g.uniform(2.0, 5.0);
            let sign = if g.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
            m[cell] += sign * magnitude;
        }
        let m_norm1 = m.iter().map(|e| e.abs()).sum();

        let mut x_star = vec![0.0; RPCA_DIM];
        for k in 0..RPCA_RANK {
            x_star[k * RPCA_RANK + k] = 1.0;
        }
        RpcaInstance {
            seed,
            m,
            m_norm1,
            x_star,
        }
    }

    /// Split a flattened point into (X, Y) views.
    pub fn split<'a>(&self, point: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        point.split_at(RPCA_ROWS * RPCA_RANK)
    }

    /// Residual R = XYᵀ − M, row-major 20×12.
    pub fn residual(&self, point: &[f64]) -> Vec<f64> {
        let (x, y) = self.split(point);
        let mut r = vec![0.0; RPCA_ROWS * RPCA_COLS];
        for i in 0..RPCA_ROWS {
            for j in 0..RPCA_COLS {
                let mut acc = 0.0;
                for k in 0..RPCA_RANK {
                    acc += x[i * RPCA_RANK + k] * y[j * RPCA_RANK + k];
                }
                r[i * RPCA_COLS + j] = acc - self.m[i * RPCA_COLS + j];
            }
        }
        r
    }

    pub fn value(&self, point: &[f64]) -> f64 {
        self.residual(point).iter().map(|e| e.abs()).sum()
    }

    /// Subgradient pair (ΛY, ΛᵀX) for a given sign matrix Λ ∈ sign(R).
    pub fn subgradient_for_lambda(&self, point: &[f64], lambda: &[f64]) -> Point {
        let (x, y) = self.split(point);
        let mut g = vec![0.0; RPCA_DIM];
        let (gx, gy) = g.split_at_mut(RPCA_ROWS * RPCA_RANK);
        for i in 0..RPCA_ROWS {
            for k in 0..RPCA_RANK {
                let mut acc = 0.0;
                for j in 0..RPCA_COLS {
                    acc += lambda[i * RPCA_COLS + j] * y[j * RPCA_RANK + k];
                }
                gx[i * RPCA_RANK + k] = acc;
            }
        }
        for j in 0..RPCA_COLS {
            for k in 0..RPCA_RANK {
                let mut acc = 0.0;
                for i in 0..RPCA_ROWS {
                    acc += lambda[i * RPCA_COLS + j] * x[i * RPCA_RANK + k];
                }
                gy[j * RPCA_RANK + k] = acc;
            }
        }
        g
    }

    /// ‖ΛᵀX‖_F² − ‖ΛY‖_F², the per-step Chetaev increment divided by α².
    pub fn increment_rate(&self, point: &[f64], lambda: &[f64]) -> f64 {
        let g = self.subgradient_for_lambda(point, lambda);
        let (gx, gy) = g.split_at(RPCA_ROWS * RPCA_RANK);
        crate::norm_sq(gy) - crate::norm_sq(gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_rows_are_zero() {
        let inst = RpcaInstance::generate(DEFAULT_RPCA_SEED);
        for j in 0..RPCA_RANK * RPCA_COLS {
            assert_eq!(inst.m[j], 0.0);
        }
    }

    #[test]
    fn spurious_value_is_m_norm() {
        let inst = RpcaInstance::generate(DEFAULT_RPCA_SEED);
        assert!((inst.value(&inst.x_star) - inst.m_norm1).abs() < 1e-12);
    }

    #[test]
    fn instance_depends_on_seed_but_is_reproducible() {
        let a = RpcaInstance::generate(1);
        let b = RpcaInstance::generate(1);
        let c = RpcaInstance::generate(2);
        assert_eq!(a.m, b.m);
        assert_ne!(a.m, c.m);
    }

    #[test]
    fn outliers_present() {
        // The clean rank-2 part has entries in [-2, 2]; outliers push past it.
        let inst = RpcaInstance::generate(DEFAULT_RPCA_SEED);
        let max = inst.m.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        assert!(max > 2.0);
    }
}
