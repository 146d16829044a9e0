//! Transport by a single noise mode and the Lie-derivative nonlinearity.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{ModeSet, SpectralField, TWO_PI};
use crate::error::{Error, Result};
use crate::lattice::{self, frame_of, Lattice3};
use crate::vec3::{self, cross_c, rcross, rdot, CVec3, CZERO3};

/// The basis field `sigma_{k,alpha} = a_{k,alpha} e_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SigmaMode {
    pub k: Lattice3,
    pub alpha: usize,
}

impl SigmaMode {
    pub fn new(k: Lattice3, alpha: usize) -> Result<Self> {
        if k == [0, 0, 0] {
            return Err(Error::domain("noise mode with k = 0"));
        }
        if !(alpha == 1 || alpha == 2) {
            return Err(Error::domain(format!(
                "polarization index {alpha} not in {{1, 2}}"
            )));
        }
        Ok(Self { k, alpha })
    }

    pub fn direction(&self) -> [f64; 3] {
        frame_of(self.k).get(self.alpha)
    }
}

/// `sigma_{k,alpha} . grad xi`, restricted to the truncation of `xi`: mode
/// `l + k` receives `2 pi i (a_{k,alpha} . l) xi_l`. No Leray projection.
pub fn advect_by_sigma(sigma: SigmaMode, xi: &SpectralField) -> SpectralField {
    let mut out = SpectralField::zeros(xi.modes());
    advect_by_sigma_into(sigma, Complex64::new(1.0, 0.0), xi, &mut out);
    out
}

/// `out += scale * (sigma . grad xi)` on the truncation of `out`.
pub fn advect_by_sigma_into(
    sigma: SigmaMode,
    scale: Complex64,
    xi: &SpectralField,
    out: &mut SpectralField,
) {
    let a = sigma.direction();
    let target = Arc::clone(out.modes());
    let src = xi.modes();
    for (i, z) in xi.coeffs().iter().enumerate() {
        let l = src.mode(i);
        let Some(j) = target.index(lattice::add(l, sigma.k)) else {
            continue;
        };
        let w = scale * Complex64::new(0.0, TWO_PI * vec3::dot(a, lattice::to_f64(l)));
        vec3::axpy(&mut out.coeffs_mut()[j], w, z);
    }
}

/// `L_sigma xi = sigma . grad xi - xi . grad sigma` for `sigma = sigma_{k,alpha}`;
/// mode `l + k` receives `2 pi i [(a . l) xi_l - (k . xi_l) a]`. Output is
/// restricted to the truncation of `out_modes`.
pub fn lie_derivative_of_sigma(
    sigma: SigmaMode,
    xi: &SpectralField,
    out_modes: &Arc<ModeSet>,
) -> SpectralField {
    let a = sigma.direction();
    let kf = lattice::to_f64(sigma.k);
    let mut out = SpectralField::zeros(out_modes);
    let src = xi.modes();
    for (i, z) in xi.coeffs().iter().enumerate() {
        let l = src.mode(i);
        let Some(j) = out_modes.index(lattice::add(l, sigma.k)) else {
            continue;
        };
        let al = vec3::dot(a, lattice::to_f64(l));
        let kz = rdot(kf, z);
        let i2pi = Complex64::new(0.0, TWO_PI);
        let c = &mut out.coeffs_mut()[j];
        for d in 0..3 {
            c[d] += i2pi * (z[d] * al - kz * a[d]);
        }
    }
    out
}

/// Galerkin Lie derivative `Pi_N (u . grad xi - xi . grad u)` by direct
/// summation over mode pairs `j + l = m`.
pub fn lie_derivative_direct(u: &SpectralField, xi: &SpectralField) -> Result<SpectralField> {
    u.check_same(xi)?;
    let modes = Arc::clone(xi.modes());
    let mut out = SpectralField::zeros(&modes);
    let i2pi = Complex64::new(0.0, TWO_PI);
    for mi in 0..modes.len() {
        let m = modes.mode(mi);
        let mut acc = CZERO3;
        for (ji, uj) in u.coeffs().iter().enumerate() {
            let j = modes.mode(ji);
            let Some(li) = modes.index(lattice::sub(m, j)) else {
                continue;
            };
            let l = lattice::sub(m, j);
            let xl = &xi.coeffs()[li];
            let ul = rdot(lattice::to_f64(l), uj);
            let xj = rdot(lattice::to_f64(j), xl);
            for d in 0..3 {
                acc[d] += ul * xl[d] - xj * uj[d];
            }
        }
        out.coeffs_mut()[mi] = acc.map(|c| c * i2pi);
    }
    out.leray_project_in_place();
    Ok(out)
}

/// Same as [`lie_derivative_direct`].
pub fn lie_derivative(u: &SpectralField, xi: &SpectralField) -> Result<SpectralField> {
    lie_derivative_direct(u, xi)
}

/// Grid evaluation of `L_u xi = -curl(u x xi)` for divergence-free `u`,
/// `xi`. With `n > 3M` grid points per axis the product is alias-free on
/// the retained modes, so the result agrees with the direct sum to
/// rounding.
#[derive(Clone)]
pub struct PseudoSpectral {
    modes: Arc<ModeSet>,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    slots: Vec<usize>,
    grids: Vec<Vec<Complex64>>,
    scratch: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
}

impl PseudoSpectral {
    pub fn new(modes: &Arc<ModeSet>) -> Self {
        let n = Self::grid_size(modes.max_mode());
        Self::with_grid(modes, n).expect("default grid is alias-free")
    }

    /// Smallest alias-free grid size `3M + 1`, rounded up to an even size.
    pub fn grid_size(max_mode: u32) -> usize {
        let n = 3 * max_mode as usize + 1;
        n + n % 2
    }

    pub fn with_grid(modes: &Arc<ModeSet>, n: usize) -> Result<Self> {
        if n <= 3 * modes.max_mode() as usize {
            return Err(Error::domain(format!(
                "grid of {n} points aliases modes up to {}",
                modes.max_mode()
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wrap = |x: i32| x.rem_euclid(n as i32) as usize;
        let slots = modes
            .modes()
            .iter()
            .map(|l| (wrap(l[0]) * n + wrap(l[1])) * n + wrap(l[2]))
            .collect();
        let len = n * n * n;
        let fft_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            modes: Arc::clone(modes),
            n,
            forward,
            inverse,
            slots,
            grids: vec![vec![Complex64::default(); len]; 6],
            scratch: vec![Complex64::default(); len],
            fft_scratch: vec![Complex64::default(); fft_len],
        })
    }

    pub fn grid_points(&self) -> usize {
        self.n
    }

    fn fft3(&mut self, which: usize, inverse: bool) {
        let n = self.n;
        let plan = if inverse {
            &self.inverse
        } else {
            &self.forward
        };
        for _ in 0..3 {
            let g = &mut self.grids[which];
            plan.process_with_scratch(g, &mut self.fft_scratch);
            // rotate axes (a, b, c) -> (c, a, b) so each pass transforms a new axis
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        self.scratch[(c * n + a) * n + b] = g[(a * n + b) * n + c];
                    }
                }
            }
            std::mem::swap(g, &mut self.scratch);
        }
    }

    fn load(&mut self, base: usize, f: &SpectralField) {
        for d in 0..3 {
            let g = &mut self.grids[base + d];
            g.iter_mut().for_each(|c| *c = Complex64::default());
            for (slot, z) in self.slots.iter().zip(f.coeffs()) {
                g[*slot] = z[d];
            }
        }
        for d in 0..3 {
            self.fft3(base + d, true);
        }
    }

    /// Galerkin Lie derivative on the grid.
    pub fn lie_derivative(
        &mut self,
        u: &SpectralField,
        xi: &SpectralField,
    ) -> Result<SpectralField> {
        u.check_same(xi)?;
        if xi.max_mode() != self.modes.max_mode() {
            return Err(Error::Truncation(
                "grid built for another truncation".into(),
            ));
        }
        self.load(0, u);
        self.load(3, xi);
        let len = self.n * self.n * self.n;
        for p in 0..len {
            let uu = [self.grids[0][p], self.grids[1][p], self.grids[2][p]];
            let xx = [self.grids[3][p], self.grids[4][p], self.grids[5][p]];
            let w = cross_c(&uu, &xx);
            for d in 0..3 {
                self.grids[d][p] = w[d];
            }
        }
        for d in 0..3 {
            self.fft3(d, false);
        }
        let norm = 1.0 / len as f64;
        let mut out = SpectralField::zeros(&self.modes);
        for (i, slot) in self.slots.iter().enumerate() {
            let w: CVec3 = [0, 1, 2].map(|d| self.grids[d][*slot] * norm);
            let l = lattice::to_f64(self.modes.mode(i));
            out.coeffs_mut()[i] = rcross(l, &w).map(|c| c * Complex64::new(0.0, -TWO_PI));
        }
        out.leray_project_in_place();
        Ok(out)
    }

    /// `L_{B xi} xi`, the vorticity nonlinearity.
    pub fn nonlinearity(&mut self, xi: &SpectralField) -> Result<SpectralField> {
        let u = xi.biot_savart();
        self.lie_derivative(&u, xi)
    }
}
