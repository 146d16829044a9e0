//! Diagnostics for the full Lie-derivative noise `L_sigma xi = sigma . grad xi - xi . grad sigma`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use super::working_truncation;
use crate::error::Result;
use crate::lattice::{self, ThetaWeights};
use crate::spectral::{lie_derivative_of_sigma, ModeSet, SigmaMode, SpectralField};
use crate::sum::NeumaierSum;

/// Truncation large enough to hold `L_{sigma_k} xi` for every `k` in the support.
pub fn advection_working_modes(theta: &ThetaWeights, max_mode: u32) -> Arc<ModeSet> {
    ModeSet::new(working_truncation(theta, max_mode))
}

/// `sum_{k,alpha} theta_k^2 L_{sigma_{k,alpha}}(L_{sigma_{-k,alpha}} xi)`, which
/// equals `(2/3) ||theta||^2 Delta xi`.
pub fn advection_double_lie(theta: &ThetaWeights, xi: &SpectralField) -> Result<SpectralField> {
    let big = advection_working_modes(theta, xi.max_mode());
    let mut acc = SpectralField::zeros(xi.modes());
    for e in theta.entries() {
        for alpha in [1, 2] {
            let inner =
                lie_derivative_of_sigma(SigmaMode::new(lattice::neg(e.k), alpha)?, xi, &big);
            let outer = lie_derivative_of_sigma(SigmaMode::new(e.k, alpha)?, &inner, xi.modes());
            acc.axpy(e.theta_sq, &outer)?;
        }
    }
    Ok(acc)
}

/// Both sides of the energy balance for Lie-derivative noise:
/// `lhs = (3 nu / ||theta||^2) sum_{k,alpha} theta_k^2 ||L_{sigma_{k,alpha}} xi||^2`
/// and `rhs = 2 nu ||grad xi||^2 + 8 nu pi^2 (||theta||_{h1}^2 / ||theta||_{l2}^2) ||xi||^2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JBalance {
    pub lhs: f64,
    pub rhs: f64,
    pub gradient_term: f64,
    pub stretching_term: f64,
    /// `||theta||_{h1}^2 / ||theta||_{l2}^2`.
    pub h1_over_l2: f64,
}

impl JBalance {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs.abs()
    }
}

pub fn advection_energy_j(theta: &ThetaWeights, nu: f64, xi: &SpectralField) -> Result<JBalance> {
    let big = advection_working_modes(theta, xi.max_mode());
    let mut total = NeumaierSum::new();
    for e in theta.entries() {
        for alpha in [1, 2] {
            let l = lie_derivative_of_sigma(SigmaMode::new(e.k, alpha)?, xi, &big);
            total += e.theta_sq * l.norm_sq();
        }
    }
    let norms = theta.norms();
    let ratio = norms.h1_sq / norms.l2_sq;
    let gradient_term = 2.0 * nu * xi.grad_norm_sq();
    let stretching_term = 8.0 * nu * PI * PI * ratio * xi.norm_sq();
    Ok(JBalance {
        lhs: 3.0 * nu / norms.l2_sq * total.value(),
        rhs: gradient_term + stretching_term,
        gradient_term,
        stretching_term,
        h1_over_l2: ratio,
    })
}
