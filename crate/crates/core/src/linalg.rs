//! 2×2 real matrix helpers for IQ-plane statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn scaled(self, s: f64) -> Self {
        let m = self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn add(self, other: Mat2) -> Self {
        let (a, b) = (self.0, other.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }

    pub fn add_ridge(self, eps: f64) -> Self {
        self.add(Mat2::IDENTITY.scaled(eps))
    }

    pub fn det(&self) -> f64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.0;
        let scale = m[0][1].abs().max(m[1][0].abs()).max(1.0);
        (m[0][1] - m[1][0]).abs() <= 1e-12 * scale
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> (f64, f64) {
        let m = self.0;
        let off = 0.5 * (m[0][1] + m[1][0]);
        let mean = 0.5 * (m[0][0] + m[1][1]);
        let half_diff = 0.5 * (m[0][0] - m[1][1]);
        let r = half_diff.hypot(off);
        (mean - r, mean + r)
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        let m = self.0;
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if !det.is_finite() || det.abs() <= 1e-300 || det.abs() <= 1e-13 * scale * scale {
            return Err(Error::Numerical(format!(
                "singular matrix [[{}, {}], [{}, {}]] (det {det:e})",
                m[0][0], m[0][1], m[1][0], m[1][1]
            )));
        }
        Ok(Mat2([
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ]))
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = self`.
    pub fn cholesky(&self) -> Result<Mat2> {
        let m = self.0;
        if m[0][0] <= 0.0 {
            return Err(Error::ModelValidation(format!(
                "covariance not positive definite (leading entry {})",
                m[0][0]
            )));
        }
        let l00 = m[0][0].sqrt();
        let l10 = m[1][0] / l00;
        let rem = m[1][1] - l10 * l10;
        if rem <= 0.0 {
            return Err(Error::ModelValidation(format!(
                "covariance not positive definite (Schur complement {rem})"
            )));
        }
        Ok(Mat2([[l00, 0.0], [l10, rem.sqrt()]]))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// `vᵀ M v`
    pub fn quad_form(&self, v: [f64; 2]) -> f64 {
        let mv = self.apply(v);
        v[0] * mv[0] + v[1] * mv[1]
    }
}
