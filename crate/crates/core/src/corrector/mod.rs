//! The Stratonovich-to-Ito corrector
//! `S_theta(v) = (C_nu^2 / ||theta||^2) sum_{k,alpha} theta_k^2
//! Pi[sigma_{k,alpha} . grad Pi(sigma_{-k,alpha} . grad v)]`, `C_nu^2 = 3 nu / 2`.
//!
//! `S_theta` maps each Fourier mode `l` to itself. In the frame coordinates
//! `(v_{l,1}, v_{l,2})` it is a real symmetric 2x2 block, and splits as
//! `S_theta = nu Delta - S_perp` where `S_perp` collects the gradient parts
//! removed by the inner Leray projection:
//!
//! ```text
//! S_perp[b', b] = -(6 pi^2 nu / ||theta||^2) sum_{k != l} theta_k^2 |l|^2 sin^2(k, l)
//!                  (a_{l,b} . k)(a_{l,b'} . k) / |k - l|^2
//! ```

mod advection;
mod limit;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

pub use advection::{advection_double_lie, advection_energy_j, advection_working_modes, JBalance};
pub use limit::{
    continuum_polarization_sum, heuristic_quadratic_form, limit_defect, limit_defect_for,
    polarization_sum, polarization_sum_error, polarization_sum_error_for, polarization_sum_for,
    sin5_integral, ContinuumPolarizationSum, PolarizationSumError, POLARIZATION_SUM_LIMIT,
};

use crate::error::{Error, Result};
use crate::lattice::{self, frame_of, Lattice3, ThetaWeights};
use crate::spectral::{advect_by_sigma_into, ModeSet, SigmaMode, SpectralField, FOUR_PI_SQ};
use crate::sum::NeumaierSum;
use crate::vec3::dot;

pub type Block = [[f64; 2]; 2];

/// `C_nu^2 = 3 nu / 2`, so that the velocity covariance at the origin is `nu I`.
pub fn noise_intensity_sq(nu: f64) -> f64 {
    1.5 * nu
}

/// `sum_{k,alpha} theta_k^2 a_{k,alpha} (x) a_{k,alpha}`.
pub fn coefficient_covariance(theta: &ThetaWeights) -> [[f64; 3]; 3] {
    let mut acc = [[NeumaierSum::new(); 3]; 3];
    for e in theta.entries() {
        for a in frame_of(e.k).vectors() {
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += e.theta_sq * a[i] * a[j];
                }
            }
        }
    }
    acc.map(|row| row.map(|s| s.value()))
}

/// Largest entrywise deviation of the covariance from `(2/3) ||theta||^2 I`.
pub fn covariance_identity_defect(theta: &ThetaWeights) -> f64 {
    let c = coefficient_covariance(theta);
    let target = 2.0 / 3.0 * theta.l2_sq();
    let mut worst = 0.0f64;
    for (i, row) in c.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let t = if i == j { target } else { 0.0 };
            worst = worst.max((v - t).abs());
        }
    }
    worst
}

pub fn covariance_max_offdiag(theta: &ThetaWeights) -> f64 {
    let c = coefficient_covariance(theta);
    [c[0][1], c[0][2], c[1][2], c[1][0], c[2][0], c[2][1]]
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
}

#[inline]
fn frame_dots(fl: &lattice::Frame, k: [f64; 3]) -> [f64; 2] {
    [dot(fl.a1, k), dot(fl.a2, k)]
}

/// `sum_{k != l} theta_k^2 |l|^2 sin^2(k, l) (a_{l,b} . k)(a_{l,b'} . k) / |k - l|^2`,
/// with `|l|^2 sin^2(k, l) = |k x l|^2 / |k|^2` evaluated in integers.
pub fn perp_lattice_sum(theta: &ThetaWeights, l: Lattice3) -> Block {
    let fl = frame_of(l);
    let mut acc = [[NeumaierSum::new(); 2]; 2];
    for e in theta.entries() {
        if e.k == l {
            continue;
        }
        let kl = cross_sq(e.k, l) as f64 / e.norm_sq as f64;
        let d = lattice::norm_sq(lattice::sub(e.k, l)) as f64;
        let p = frame_dots(&fl, lattice::to_f64(e.k));
        let w = e.theta_sq * kl / d;
        for b in 0..2 {
            for bp in 0..2 {
                acc[bp][b] += w * (p[b] * p[bp]);
            }
        }
    }
    acc.map(|row| row.map(|s| s.value()))
}

/// The same sum written with the explicit polarization sum
/// `sum_alpha (a_{k,alpha} . l)^2` and the shifted vector `k - l`.
pub fn perp_lattice_sum_frame_form(theta: &ThetaWeights, l: Lattice3) -> Block {
    let fl = frame_of(l);
    let lf = lattice::to_f64(l);
    let mut acc = [[NeumaierSum::new(); 2]; 2];
    for e in theta.entries() {
        if e.k == l {
            continue;
        }
        let fk = frame_of(e.k);
        let pol: f64 = fk.vectors().iter().map(|a| dot(*a, lf).powi(2)).sum();
        let kml = lattice::to_f64(lattice::sub(e.k, l));
        let d = dot(kml, kml);
        let p = frame_dots(&fl, kml);
        for b in 0..2 {
            for bp in 0..2 {
                acc[bp][b] += e.theta_sq * pol * (p[b] * p[bp]) / d;
            }
        }
    }
    acc.map(|row| row.map(|s| s.value()))
}

/// Lattice sum of the Galerkin corrector generated when the intermediate
/// modes `l - k` are restricted to `0 < |l - k| <= max_mode`:
/// `sum theta_k^2 |l|^2 sin^2(k, l) [delta_{b b'} - (a_b . k)(a_b' . k)/|k - l|^2]`.
pub fn galerkin_lattice_sum(theta: &ThetaWeights, l: Lattice3, max_mode: u32) -> Block {
    let fl = frame_of(l);
    let m_sq = i64::from(max_mode) * i64::from(max_mode);
    let mut acc = [[NeumaierSum::new(); 2]; 2];
    for e in theta.entries() {
        let d = lattice::norm_sq(lattice::sub(e.k, l));
        if d == 0 || d > m_sq {
            continue;
        }
        let kl = cross_sq(e.k, l) as f64 / e.norm_sq as f64;
        let p = frame_dots(&fl, lattice::to_f64(e.k));
        let w = e.theta_sq * kl;
        for b in 0..2 {
            for bp in 0..2 {
                let delta = if b == bp { 1.0 } else { 0.0 };
                acc[bp][b] += w * (delta - (p[b] * p[bp]) / d as f64);
            }
        }
    }
    acc.map(|row| row.map(|s| s.value()))
}

#[inline]
fn cross_sq(k: Lattice3, l: Lattice3) -> i64 {
    let [a, b, c] = k.map(i64::from);
    let [x, y, z] = l.map(i64::from);
    lattice::norm_sq_i64([b * z - c * y, c * x - a * z, a * y - b * x])
}

/// Which lattice sum produces the gradient-part blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockForm {
    /// `|l|^2 sin^2` of the angle between `k` and `l`.
    Angle,
    /// Explicit sum over the polarizations of `k`.
    Frame,
}

/// `S_theta` and `S_perp` as per-mode 2x2 blocks on a fixed truncation.
#[derive(Clone, Debug)]
pub struct Corrector {
    modes: Arc<ModeSet>,
    nu: f64,
    perp: Vec<Block>,
}

impl Corrector {
    pub fn new(theta: &ThetaWeights, nu: f64, modes: &Arc<ModeSet>) -> Result<Self> {
        Self::with_form(theta, nu, modes, BlockForm::Angle)
    }

    pub fn with_form(
        theta: &ThetaWeights,
        nu: f64,
        modes: &Arc<ModeSet>,
        form: BlockForm,
    ) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!(
                "noise strength nu must be >= 0, got {nu}"
            )));
        }
        let scale = -6.0 * PI * PI * nu / theta.l2_sq();
        let sums = per_plus_mode(modes, |l| match form {
            BlockForm::Angle => perp_lattice_sum(theta, l),
            BlockForm::Frame => perp_lattice_sum_frame_form(theta, l),
        });
        let perp = sums
            .into_iter()
            .map(|b| b.map(|r| r.map(|x| scale * x)))
            .collect();
        Ok(Self {
            modes: Arc::clone(modes),
            nu,
            perp,
        })
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Block of `S_perp` at mode index `i`.
    pub fn perp_block(&self, i: usize) -> Block {
        self.perp[i]
    }

    /// Block of `S_theta = nu Delta - S_perp` at mode index `i`.
    pub fn block(&self, i: usize) -> Block {
        let lap = -FOUR_PI_SQ * self.nu * self.modes.norm_sq_at(i) as f64;
        let p = self.perp[i];
        [[lap - p[0][0], -p[0][1]], [-p[1][0], lap - p[1][1]]]
    }

    pub fn apply_perp(&self, v: &SpectralField) -> Result<SpectralField> {
        self.apply_blocks(v, |i| self.perp_block(i))
    }

    pub fn apply(&self, v: &SpectralField) -> Result<SpectralField> {
        self.apply_blocks(v, |i| self.block(i))
    }

    fn apply_blocks(
        &self,
        v: &SpectralField,
        block: impl Fn(usize) -> Block,
    ) -> Result<SpectralField> {
        if v.max_mode() != self.modes.max_mode() {
            return Err(Error::Truncation(format!(
                "corrector built for truncation {}, field has {}",
                self.modes.max_mode(),
                v.max_mode()
            )));
        }
        let mut out = SpectralField::zeros(&self.modes);
        for i in 0..self.modes.len() {
            out.set_frame_coords(i, apply_block(&block(i), v.frame_coords(i)));
        }
        Ok(out)
    }
}

/// Blocks of the Galerkin corrector `S_N` (intermediate modes restricted to
/// the truncation), scaled by `-6 pi^2 nu / ||theta||^2`.
pub fn galerkin_corrector_blocks(
    theta: &ThetaWeights,
    nu: f64,
    modes: &Arc<ModeSet>,
) -> Vec<Block> {
    let scale = -6.0 * PI * PI * nu / theta.l2_sq();
    per_plus_mode(modes, |l| galerkin_lattice_sum(theta, l, modes.max_mode()))
        .into_iter()
        .map(|b| b.map(|r| r.map(|x| scale * x)))
        .collect()
}

/// Evaluates `f` on plus modes and copies to `-l`; the sums are even in `l`
/// (substitute `k -> -k`).
fn per_plus_mode(modes: &Arc<ModeSet>, f: impl Fn(Lattice3) -> Block + Sync) -> Vec<Block> {
    let plus: Vec<usize> = modes.plus_indices().collect();
    let blocks: Vec<Block> = plus.par_iter().map(|&i| f(modes.mode(i))).collect();
    let mut out = vec![[[0.0; 2]; 2]; modes.len()];
    for (&i, b) in plus.iter().zip(blocks) {
        out[i] = b;
        out[modes.neg_index(i)] = b;
    }
    out
}

#[inline]
pub fn apply_block(b: &Block, v: [Complex64; 2]) -> [Complex64; 2] {
    [
        b[0][0] * v[0] + b[0][1] * v[1],
        b[1][0] * v[0] + b[1][1] * v[1],
    ]
}

pub fn s_theta_perp_apply(
    theta: &ThetaWeights,
    nu: f64,
    v: &SpectralField,
) -> Result<SpectralField> {
    Corrector::new(theta, nu, v.modes())?.apply_perp(v)
}

pub fn s_theta_apply(theta: &ThetaWeights, nu: f64, v: &SpectralField) -> Result<SpectralField> {
    Corrector::new(theta, nu, v.modes())?.apply(v)
}

/// Smallest working truncation holding every intermediate mode `l - k`.
pub fn working_truncation(theta: &ThetaWeights, max_mode: u32) -> u32 {
    max_mode + theta.max_norm().ceil() as u32
}

/// `S_theta(xi)` by literal composition of transport by each `sigma_{k,alpha}`
/// and Leray projections on an enlarged truncation. With
/// `inner_projection = false` the inner Leray projection is skipped.
pub fn s_theta_direct(
    theta: &ThetaWeights,
    nu: f64,
    xi: &SpectralField,
    inner_projection: bool,
) -> Result<SpectralField> {
    let working = working_truncation(theta, xi.max_mode());
    s_theta_direct_with(theta, nu, xi, working, inner_projection)
}

pub fn s_theta_direct_with(
    theta: &ThetaWeights,
    nu: f64,
    xi: &SpectralField,
    working: u32,
    inner_projection: bool,
) -> Result<SpectralField> {
    let needed = working_truncation(theta, xi.max_mode());
    if working < needed {
        return Err(Error::domain(format!(
            "working truncation {working} cannot hold intermediate modes, need {needed}"
        )));
    }
    let big = ModeSet::new(working);
    let xi_big = xi.resample(&big);
    let one = Complex64::new(1.0, 0.0);
    let mut acc = SpectralField::zeros(&big);
    let mut inner = SpectralField::zeros(&big);
    let mut outer = SpectralField::zeros(&big);
    for e in theta.entries() {
        for alpha in [1, 2] {
            inner
                .coeffs_mut()
                .iter_mut()
                .for_each(|c| *c = crate::vec3::CZERO3);
            outer
                .coeffs_mut()
                .iter_mut()
                .for_each(|c| *c = crate::vec3::CZERO3);
            advect_by_sigma_into(
                SigmaMode::new(lattice::neg(e.k), alpha)?,
                one,
                &xi_big,
                &mut inner,
            );
            if inner_projection {
                inner.leray_project_in_place();
            }
            advect_by_sigma_into(SigmaMode::new(e.k, alpha)?, one, &inner, &mut outer);
            outer.leray_project_in_place();
            acc.axpy(e.theta_sq, &outer)?;
        }
    }
    acc.scale_in_place(noise_intensity_sq(nu) / theta.l2_sq());
    Ok(acc.resample(xi.modes()))
}

/// `-(3 nu / ||theta||^2) sum_{k,alpha} theta_k^2 ||Pi(sigma_{k,alpha} . grad xi)||^2`,
/// which equals `2 <xi, S_theta xi>` for real `xi`.
pub fn dissipation_sum_of_squares(
    theta: &ThetaWeights,
    nu: f64,
    xi: &SpectralField,
) -> Result<f64> {
    let big = ModeSet::new(working_truncation(theta, xi.max_mode()));
    let xi_big = xi.resample(&big);
    let mut total = NeumaierSum::new();
    let mut buf = SpectralField::zeros(&big);
    for e in theta.entries() {
        for alpha in [1, 2] {
            buf.coeffs_mut()
                .iter_mut()
                .for_each(|c| *c = crate::vec3::CZERO3);
            advect_by_sigma_into(
                SigmaMode::new(e.k, alpha)?,
                Complex64::new(1.0, 0.0),
                &xi_big,
                &mut buf,
            );
            buf.leray_project_in_place();
            total += e.theta_sq * buf.norm_sq();
        }
    }
    Ok(-3.0 * nu / theta.l2_sq() * total.value())
}

/// `max_{l, j} ||S_theta(sigma_{l,j})|| / (pi^2 nu |l|^2)`; bounded by 10.
pub fn basis_response_ratio(op: &Corrector) -> f64 {
    let modes = op.modes();
    let mut worst = 0.0f64;
    for i in modes.plus_indices() {
        let b = op.block(i);
        let scale = PI * PI * op.nu() * modes.norm_sq_at(i) as f64;
        for j in 0..2 {
            let col = (b[0][j].powi(2) + b[1][j].powi(2)).sqrt();
            worst = worst.max(col / scale);
        }
    }
    worst
}
