//! Flat-disk equilibrium and its in-plane linear stability.
//!
//! All quantities are in the dimensionless group `γ = σL³/α`. A planar
//! boundary perturbation `ρ_k sin kφ` of the disk raises the energy while
//! `C̃(k, γ) > 0`; the disk loses stability to mode k once γ passes
//! `16π³(k²−1)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::energy::k_l3_from_gamma;
use crate::error::{Error, Result};

/// Circular equilibrium of a film with boundary length `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskSolution {
    pub radius: f64,
    /// Multiplier of the length constraint.
    pub lagrange_multiplier: f64,
    pub gamma: f64,
}

impl DiskSolution {
    /// `σR³ + βR² − α`, zero at equilibrium.
    pub fn cubic_residual(&self, sigma: f64, alpha: f64) -> f64 {
        let r = self.radius;
        sigma * r.powi(3) + self.lagrange_multiplier * r * r - alpha
    }
}

pub fn disk_solution(length: f64, sigma: f64, alpha: f64) -> Result<DiskSolution> {
    if !(length > 0.0 && alpha > 0.0 && sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need L > 0, α > 0, σ ≥ 0 (got L={length}, α={alpha}, σ={sigma})"
        )));
    }
    let r = length / (2.0 * PI);
    Ok(DiskSolution {
        radius: r,
        lagrange_multiplier: (alpha - sigma * r.powi(3)) / (r * r),
        gamma: sigma * length.powi(3) / alpha,
    })
}

/// Dimensionless second-order energy coefficient of mode `k` (times `R³/α`).
pub fn second_order_coefficient(k: u32, gamma: f64) -> f64 {
    let k2 = f64::from(k) * f64::from(k);
    (1.0 - k2) * gamma / (8.0 * PI.powi(3)) + 2.0 * (k2 - 1.0).powi(2)
}

/// γ above which mode `k` lowers the energy of the disk.
pub fn critical_gamma(k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "mode {k} has no buckling threshold (need k ≥ 2)"
        )));
    }
    let k2 = f64::from(k) * f64::from(k);
    Ok(16.0 * PI.powi(3) * (k2 - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub mode: u32,
    pub gamma: f64,
    pub k_l3_over_alpha: f64,
}

/// Thresholds for modes `2..=max_mode`.
pub fn thresholds(max_mode: u32) -> Vec<Threshold> {
    (2..=max_mode)
        .map(|mode| {
            let gamma = 16.0 * PI.powi(3) * (f64::from(mode * mode) - 1.0);
            Threshold {
                mode,
                gamma,
                k_l3_over_alpha: k_l3_from_gamma(gamma),
            }
        })
        .collect()
}
