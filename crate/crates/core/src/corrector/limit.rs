//! High-mode limit of the corrector: `S_{theta^N} -> (3/5) nu Delta`.

use std::f64::consts::PI;

use serde::Serialize;

use super::perp_lattice_sum;
use crate::error::{Error, Result};
use crate::lattice::{self, frame_of, theta_shell, Lattice3, ThetaWeights};
use crate::quadrature::integrate;
use crate::sum::VecSum3;
use crate::vec3::{dot, norm, scale, sub};

/// Limit of the normalized lattice sum, `(4/15) a_{l,beta}`.
pub const POLARIZATION_SUM_LIMIT: f64 = 4.0 / 15.0;

fn check_args(l: Lattice3, beta: usize) -> Result<()> {
    if l == [0, 0, 0] {
        return Err(Error::domain("mode l must be nonzero"));
    }
    if !(beta == 1 || beta == 2) {
        return Err(Error::domain(format!(
            "polarization index {beta} not in {{1, 2}}"
        )));
    }
    Ok(())
}

/// `(1/||theta||^2) sum_{k != l} theta_k^2 sin^2(k, l) (a_{l,beta} . (k - l)) (k - l) / |k - l|^2`.
pub fn polarization_sum_for(theta: &ThetaWeights, l: Lattice3, beta: usize) -> Result<[f64; 3]> {
    check_args(l, beta)?;
    let a = frame_of(l).get(beta);
    let l_sq = lattice::norm_sq(l) as f64;
    let mut acc = VecSum3::default();
    for e in theta.entries() {
        if e.k == l {
            continue;
        }
        let kf = lattice::to_f64(e.k);
        let lf = lattice::to_f64(l);
        let kl = dot(kf, lf);
        let sin_sq = 1.0 - kl * kl / (e.norm_sq as f64 * l_sq);
        let d = lattice::sub(e.k, l);
        let df = lattice::to_f64(d);
        let w = e.theta_sq * sin_sq * dot(a, df) / lattice::norm_sq(d) as f64;
        acc.add_scaled(w, df);
    }
    Ok(scale(1.0 / theta.l2_sq(), acc.value()))
}

pub fn polarization_sum(n: u32, gamma: f64, l: Lattice3, beta: usize) -> Result<[f64; 3]> {
    polarization_sum_for(&theta_shell(n, gamma)?, l, beta)
}

/// Deviation of the lattice sum from `(4/15) a_{l,beta}`, split along the
/// frame of `l`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PolarizationSumError {
    pub total: f64,
    /// `|sum . a_{l,beta} - 4/15|`.
    pub parallel: f64,
    /// `|sum . a_{l,beta'}|` for the other polarization.
    pub other_polarization: f64,
    /// `|sum . l/|l||`.
    pub longitudinal: f64,
}

pub fn polarization_sum_error(
    n: u32,
    gamma: f64,
    l: Lattice3,
    beta: usize,
) -> Result<PolarizationSumError> {
    polarization_sum_error_for(&theta_shell(n, gamma)?, l, beta)
}

pub fn polarization_sum_error_for(
    theta: &ThetaWeights,
    l: Lattice3,
    beta: usize,
) -> Result<PolarizationSumError> {
    let s = polarization_sum_for(theta, l, beta)?;
    let f = frame_of(l);
    let a = f.get(beta);
    let other = f.get(3 - beta);
    let lf = lattice::to_f64(l);
    let lhat = scale(1.0 / norm(lf), lf);
    Ok(PolarizationSumError {
        total: norm(sub(s, scale(POLARIZATION_SUM_LIMIT, a))),
        parallel: (dot(s, a) - POLARIZATION_SUM_LIMIT).abs(),
        other_polarization: dot(s, other).abs(),
        longitudinal: dot(s, lhat).abs(),
    })
}

/// `||S_{theta^N}(sigma_{l,beta}) - (3/5) nu Delta sigma_{l,beta}|| / ((12/5) pi^2 nu |l|^2)`.
pub fn limit_defect(n: u32, gamma: f64, nu: f64, l: Lattice3, beta: usize) -> Result<f64> {
    limit_defect_for(&theta_shell(n, gamma)?, nu, l, beta)
}

pub fn limit_defect_for(theta: &ThetaWeights, nu: f64, l: Lattice3, beta: usize) -> Result<f64> {
    check_args(l, beta)?;
    if !(nu > 0.0) {
        return Err(Error::domain("nu must be positive"));
    }
    let l_sq = lattice::norm_sq(l) as f64;
    let raw = perp_lattice_sum(theta, l);
    let perp_scale = -6.0 * PI * PI * nu / theta.l2_sq();
    let lap = -4.0 * PI * PI * nu * l_sq;
    let b = beta - 1;
    // column beta of nu Delta - S_perp minus (3/5) nu Delta
    let mut col = [0.0; 2];
    for (bp, c) in col.iter_mut().enumerate() {
        let delta = if bp == b { 1.0 } else { 0.0 };
        *c = delta * lap - perp_scale * raw[bp][b] - delta * 0.6 * lap;
    }
    Ok((col[0].powi(2) + col[1].powi(2)).sqrt() / (2.4 * PI * PI * nu * l_sq))
}

/// `<S_perp(v), v> / (pi^2 nu |l|^2)` for `v = sigma_{l,1} + sigma_{l,2}`;
/// tends to `-16/5`.
pub fn heuristic_quadratic_form(theta: &ThetaWeights, l: Lattice3) -> Result<f64> {
    check_args(l, 1)?;
    let raw = perp_lattice_sum(theta, l);
    let total: f64 = raw.iter().flatten().sum();
    let l_sq = lattice::norm_sq(l) as f64;
    Ok(-6.0 * total / (theta.l2_sq() * l_sq))
}

/// `int_0^pi sin^5 = 16/15` by Gauss-Legendre quadrature.
pub fn sin5_integral() -> f64 {
    integrate(|psi| psi.sin().powi(5), 0.0, PI, 24)
}

/// Continuum counterpart of the lattice sum after reduction to spherical
/// coordinates about `l`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContinuumPolarizationSum {
    /// `int_N^{2N} r^{2 - 2 gamma} dr`.
    pub radial: f64,
    /// `int_0^pi sin^5 psi dpsi`.
    pub polar: f64,
    /// `int_0^{2 pi} cos^2 phi dphi`.
    pub azimuthal: f64,
    /// Parallel component normalized by the lattice `||theta^N||^2`.
    pub lattice_normalized: f64,
    /// Parallel component normalized by the continuum mass `4 pi radial`.
    pub continuum_normalized: f64,
}

pub fn continuum_polarization_sum(n: u32, gamma: f64) -> Result<ContinuumPolarizationSum> {
    let theta = theta_shell(n, gamma)?;
    let nf = f64::from(n);
    let radial = integrate(|r| r.powf(2.0 - 2.0 * gamma), nf, 2.0 * nf, 32);
    let polar = sin5_integral();
    let azimuthal = integrate(|p| p.cos().powi(2), 0.0, 2.0 * PI, 24);
    let product = radial * polar * azimuthal;
    Ok(ContinuumPolarizationSum {
        radial,
        polar,
        azimuthal,
        lattice_normalized: product / theta.l2_sq(),
        continuum_normalized: product / (4.0 * PI * radial),
    })
}
