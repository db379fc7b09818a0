//! Dense kernel for ridge design matrices.
//!
//! A [`DesignMatrix`] keeps `V = reg·I + Σ y yᵀ` and its inverse side by
//! side. Rank-one updates touch the inverse through the Sherman-Morrison
//! identity in O(d²); every [`REFRESH_INTERVAL`] updates the inverse is
//! rebuilt from scratch to bound accumulated rounding error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported context dimension.
pub const MAX_DIM: usize = 128;

/// Number of rank-one updates between full re-inversions.
pub const REFRESH_INTERVAL: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    dim: usize,
    reg: f64,
    /// Row-major `dim × dim`.
    gram: Vec<f64>,
    inv: Vec<f64>,
    updates: usize,
}

impl DesignMatrix {
    /// `reg·I` together with its inverse `(1/reg)·I`.
    pub fn new(dim: usize, reg: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::config(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if !(reg.is_finite() && reg > 0.0) {
            return Err(Error::config(format!(
                "ridge penalty must be positive and finite, got {reg}"
            )));
        }
        let mut gram = vec![0.0; dim * dim];
        let mut inv = vec![0.0; dim * dim];
        for i in 0..dim {
            gram[i * dim + i] = reg;
            inv[i * dim + i] = 1.0 / reg;
        }
        Ok(Self {
            dim,
            reg,
            gram,
            inv,
            updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn inv(&self) -> &[f64] {
        &self.inv
    }

    /// Number of rank-one updates applied so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `V += y yᵀ`, with the inverse updated by Sherman-Morrison.
    pub fn update(&mut self, y: &[f64]) -> Result<()> {
        self.check_dim(y)?;
        let d = self.dim;
        if y.iter().all(|&v| v == 0.0) {
            return Ok(());
        }
        for i in 0..d {
            for j in 0..d {
                self.gram[i * d + j] += y[i] * y[j];
            }
        }

        let u = mat_vec(&self.inv, y, d);
        let denom = 1.0 + dot(y, &u);
        for i in 0..d {
            for j in 0..d {
                self.inv[i * d + j] -= u[i] * u[j] / denom;
            }
        }
        // keep the stored inverse exactly symmetric
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (self.inv[i * d + j] + self.inv[j * d + i]);
                self.inv[i * d + j] = avg;
                self.inv[j * d + i] = avg;
            }
        }

        self.updates += 1;
        if self.updates.is_multiple_of(REFRESH_INTERVAL) {
            self.refresh();
        }
        Ok(())
    }

    /// Recompute the inverse directly from the Gram matrix.
    pub fn refresh(&mut self) {
        if let Some(inv) = invert(&self.gram, self.dim) {
            self.inv = inv;
        }
    }

    /// `sqrt(yᵀ V⁻¹ y)`.
    pub fn quad_norm(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        let u = mat_vec(&self.inv, y, self.dim);
        Ok(dot(y, &u).max(0.0).sqrt())
    }

    /// `V⁻¹ rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(rhs)?;
        Ok(mat_vec(&self.inv, rhs, self.dim))
    }

    /// Largest entry of `|V·V⁻¹ − I|`.
    pub fn identity_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.gram[i * d + k] * self.inv[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scale `v` back onto the unit ball if it lies outside.
pub fn project_unit_ball(v: &mut [f64]) {
    let n = norm(v);
    if n > 1.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn mat_vec(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| dot(&m[i * d..(i + 1) * d], v))
        .collect()
}

/// Gauss-Jordan inversion with partial pivoting. `None` if singular.
pub fn invert(m: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
    for col in 0..d {
        let pivot = (col..d).max_by(|&r, &s| {
            a[r * d + col]
                .abs()
                .partial_cmp(&a[s * d + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot * d + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..d {
                a.swap(pivot * d + j, col * d + j);
                out.swap(pivot * d + j, col * d + j);
            }
        }
        let p = a[col * d + col];
        for j in 0..d {
            a[col * d + j] /= p;
            out[col * d + j] /= p;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let f = a[r * d + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..d {
                a[r * d + j] -= f * a[col * d + j];
                out[r * d + j] -= f * out[col * d + j];
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn new_is_scaled_identity() {
        let m = DesignMatrix::new(2, 1.0).unwrap();
        assert_eq!(m.gram(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.inv(), &[1.0, 0.0, 0.0, 1.0]);

        let m = DesignMatrix::new(3, 2.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let g = if i == j { 2.0 } else { 0.0 };
                assert_eq!(m.gram()[i * 3 + j], g);
                assert_eq!(m.inv()[i * 3 + j], g / 4.0);
            }
        }
    }

    #[test]
    fn new_rejects_bad_config() {
        assert!(matches!(DesignMatrix::new(2, 0.0), Err(Error::Config(_))));
        assert!(DesignMatrix::new(0, 1.0).is_err());
        assert!(DesignMatrix::new(129, 1.0).is_err());
    }

    #[test]
    fn update_axis_vector() {
        let mut m = DesignMatrix::new(2, 1.0).unwrap();
        m.update(&[1.0, 0.0]).unwrap();
        assert!(close(m.gram(), &[2.0, 0.0, 0.0, 1.0], 0.0));
        assert!(close(m.inv(), &[0.5, 0.0, 0.0, 1.0], 1e-15));
    }

    #[test]
    fn update_zero_vector_is_noop() {
        let mut m = DesignMatrix::new(2, 1.0).unwrap();
        let before = m.clone();
        m.update(&[0.0, 0.0]).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn update_diagonal_direction() {
        let mut m = DesignMatrix::new(2, 2.0).unwrap();
        m.update(&[1.0, 1.0]).unwrap();
        assert!(close(m.gram(), &[3.0, 1.0, 1.0, 3.0], 0.0));
        let expected = [3.0 / 8.0, -1.0 / 8.0, -1.0 / 8.0, 3.0 / 8.0];
        assert!(close(m.inv(), &expected, 1e-15));
    }

    #[test]
    fn update_dimension_mismatch() {
        let mut m = DesignMatrix::new(2, 1.0).unwrap();
        assert!(matches!(
            m.update(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(m.quad_norm(&[1.0, 2.0, 3.0]).is_err());
        assert!(m.solve(&[1.0]).is_err());
    }

    #[test]
    fn quad_norm_cases() {
        let m = DesignMatrix::new(2, 1.0).unwrap();
        assert_eq!(m.quad_norm(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(m.quad_norm(&[0.0, 0.0]).unwrap(), 0.0);

        let mut m = DesignMatrix::new(2, 1.0).unwrap();
        m.update(&[1.0, 0.0]).unwrap();
        assert!((m.quad_norm(&[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn solve_cases() {
        let m = DesignMatrix::new(2, 1.0).unwrap();
        assert_eq!(m.solve(&[2.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        let m = DesignMatrix::new(2, 2.0).unwrap();
        assert_eq!(m.solve(&[2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
        let mut m = DesignMatrix::new(2, 1.0).unwrap();
        m.update(&[1.0, 0.0]).unwrap();
        assert!(close(&m.solve(&[2.0, 0.0]).unwrap(), &[1.0, 0.0], 1e-15));
    }

    #[test]
    fn refresh_fires_on_schedule() {
        let mut m = DesignMatrix::new(3, 1.0).unwrap();
        for i in 0..REFRESH_INTERVAL {
            let x = (i as f64 * 0.37).sin();
            m.update(&[x, 1.0 - x, 0.5]).unwrap();
        }
        assert_eq!(m.updates(), REFRESH_INTERVAL);
        assert!(m.identity_residual() < 1e-10);
    }

    #[test]
    fn project_unit_ball_only_shrinks() {
        let mut v = [3.0, 4.0];
        project_unit_ball(&mut v);
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        let mut w = [0.3, 0.4];
        project_unit_ball(&mut w);
        assert_eq!(w, [0.3, 0.4]);
    }
}
