//! Complex Brownian increments and the Galerkin transport-noise operator.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::corrector::noise_intensity_sq;
use crate::error::{Error, Result};
use crate::lattice::{self, frame_of, is_plus, Lattice3, ThetaWeights};
use crate::spectral::{ModeSet, SpectralField};
use crate::vec3::{self, rdot, CVec3, CZERO3};

/// Identifier recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.3; seed_from_u64, stream = sample index)";

/// Source of the increments `dW^{k,alpha} = dB^1 + i dB^2` for plus `k`;
/// increments of `-k` are the conjugates and are never sampled.
#[derive(Clone, Debug)]
pub struct NoiseDriver {
    indices: Vec<(Lattice3, usize)>,
    rng: ChaCha20Rng,
    seed: u64,
    stream: u64,
}

/// One step's increments, aligned with the driver's index list.
#[derive(Clone, Debug)]
pub struct Increments {
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl NoiseDriver {
    pub fn new(indices: Vec<(Lattice3, usize)>, seed: u64, stream: u64) -> Result<Self> {
        for &(k, alpha) in &indices {
            if k == [0, 0, 0] || !is_plus(k) {
                return Err(Error::domain(format!(
                    "driver index {k:?} is not in the plus half"
                )));
            }
            if !(alpha == 1 || alpha == 2) {
                return Err(Error::domain(format!(
                    "polarization index {alpha} not in {{1, 2}}"
                )));
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self {
            indices,
            rng,
            seed,
            stream,
        })
    }

    /// Every `(k, alpha)` with `k` in the plus half of the support of `theta`.
    pub fn for_theta(theta: &ThetaWeights, seed: u64, stream: u64) -> Self {
        let indices = theta
            .plus_entries()
            .flat_map(|e| [(e.k, 1), (e.k, 2)])
            .collect();
        Self::new(indices, seed, stream).expect("plus support")
    }

    pub fn indices(&self) -> &[(Lattice3, usize)] {
        &self.indices
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn sample_increments(&mut self, dt: f64) -> Result<Increments> {
        if !(dt > 0.0) {
            return Err(Error::domain(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let s = dt.sqrt();
        let values = (0..self.indices.len())
            .map(|_| {
                let re: f64 = self.rng.sample(StandardNormal);
                let im: f64 = self.rng.sample(StandardNormal);
                Complex64::new(re * s, im * s)
            })
            .collect();
        Ok(Increments { dt, values })
    }
}

#[derive(Clone, Copy, Debug)]
struct Coupling {
    input: u32,
    k: u32,
    conj: bool,
}

/// The increment operator
/// `G xi = (C_nu / ||theta||) sum_{k,alpha} theta_k Pi_N(sigma_{k,alpha} . grad xi) dW^{k,alpha}`
/// on a fixed truncation. Only `|k| <= 2M` can couple two retained modes,
/// so the remaining support is inactive.
#[derive(Clone, Debug)]
pub struct NoiseOperator {
    modes: Arc<ModeSet>,
    ks: Vec<Lattice3>,
    amplitude: Vec<f64>,
    plus_out: Vec<u32>,
    ranges: Vec<(u32, u32)>,
    couplings: Vec<Coupling>,
}

impl NoiseOperator {
    pub fn new(theta: &ThetaWeights, nu: f64, modes: &Arc<ModeSet>) -> Self {
        let reach = 4 * i64::from(modes.max_mode()).pow(2);
        let scale = (noise_intensity_sq(nu) / theta.l2_sq()).sqrt();
        let mut ks = Vec::new();
        let mut amplitude = Vec::new();
        for e in theta.plus_entries() {
            if e.norm_sq <= reach && e.theta > 0.0 {
                ks.push(e.k);
                amplitude.push(scale * e.theta);
            }
        }
        let side = 4 * modes.max_mode() as i32 + 1;
        let slot = |k: Lattice3| -> usize {
            let o = 2 * modes.max_mode() as i32;
            (((k[0] + o) * side + k[1] + o) * side + k[2] + o) as usize
        };
        let mut k_lookup = vec![u32::MAX; (side * side * side) as usize];
        for (i, k) in ks.iter().enumerate() {
            k_lookup[slot(*k)] = i as u32;
        }
        let mut plus_out = Vec::new();
        let mut ranges = Vec::new();
        let mut couplings = Vec::new();
        for m in modes.plus_indices() {
            let start = couplings.len() as u32;
            let mm = modes.mode(m);
            for li in 0..modes.len() {
                let k = lattice::sub(mm, modes.mode(li));
                if k == [0, 0, 0] {
                    continue;
                }
                let plus = is_plus(k);
                let kp = if plus { k } else { lattice::neg(k) };
                let ki = k_lookup[slot(kp)];
                if ki != u32::MAX {
                    couplings.push(Coupling {
                        input: li as u32,
                        k: ki,
                        conj: !plus,
                    });
                }
            }
            plus_out.push(m as u32);
            ranges.push((start, couplings.len() as u32));
        }
        Self {
            modes: Arc::clone(modes),
            ks,
            amplitude,
            plus_out,
            ranges,
            couplings,
        }
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// Active plus wave vectors, in driver order.
    pub fn active_wave_vectors(&self) -> &[Lattice3] {
        &self.ks
    }

    pub fn coupling_count(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_inactive(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn driver(&self, seed: u64, stream: u64) -> NoiseDriver {
        let indices = self.ks.iter().flat_map(|k| [(*k, 1), (*k, 2)]).collect();
        NoiseDriver::new(indices, seed, stream).expect("plus support")
    }

    /// Velocity increment `eta_k = amplitude_k sum_alpha dW^{k,alpha} a_{k,alpha}`
    /// for every active plus `k`.
    fn velocity(&self, inc: &Increments) -> Vec<CVec3> {
        assert_eq!(
            inc.values.len(),
            2 * self.ks.len(),
            "increments do not match the operator"
        );
        self.ks
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let f = frame_of(*k);
                let mut v = vec3::cscale(inc.values[2 * i], f.a1);
                vec3::axpy(
                    &mut v,
                    Complex64::new(1.0, 0.0),
                    &vec3::cscale(inc.values[2 * i + 1], f.a2),
                );
                v.map(|c| c * self.amplitude[i])
            })
            .collect()
    }

    /// Per-coupling weights `2 pi i (eta_{m-l} . l)` for one step.
    pub fn weights(&self, inc: &Increments) -> Vec<Complex64> {
        let eta = self.velocity(inc);
        let i2pi = Complex64::new(0.0, 2.0 * PI);
        let mut w = Vec::with_capacity(self.couplings.len());
        for (&(start, end), _) in self.ranges.iter().zip(&self.plus_out) {
            for c in &self.couplings[start as usize..end as usize] {
                let e = &eta[c.k as usize];
                let l = lattice::to_f64(self.modes.mode(c.input as usize));
                let d = rdot(l, e);
                w.push(i2pi * if c.conj { d.conj() } else { d });
            }
        }
        w
    }

    /// `out = G x` for real `x`, given the step weights.
    pub fn apply(&self, weights: &[Complex64], x: &SpectralField, out: &mut SpectralField) {
        let xc = x.coeffs();
        for (r, &m) in self.plus_out.iter().enumerate() {
            let (start, end) = self.ranges[r];
            let mut acc = CZERO3;
            for t in start as usize..end as usize {
                let c = self.couplings[t];
                vec3::axpy(&mut acc, weights[t], &xc[c.input as usize]);
            }
            let m = m as usize;
            let l = lattice::to_f64(self.modes.mode(m));
            let p = rdot(l, &acc) / self.modes.norm_sq_at(m) as f64;
            let projected = [acc[0] - p * l[0], acc[1] - p * l[1], acc[2] - p * l[2]];
            let coeffs = out.coeffs_mut();
            coeffs[m] = projected;
            coeffs[self.modes.neg_index(m)] = vec3::cconj(&projected);
        }
    }

    /// `exp(G) x` by a Taylor series truncated once a term falls below
    /// `tol * |y|`. `G` is skew-adjoint, so the result has the norm of `x`
    /// up to the truncation error.
    pub fn exponential(
        &self,
        weights: &[Complex64],
        x: &SpectralField,
        tol: f64,
    ) -> Result<(SpectralField, usize)> {
        let mut y = x.clone();
        let mut term = x.clone();
        let mut next = SpectralField::zeros(&self.modes);
        let scale = x.norm().max(f64::MIN_POSITIVE);
        for j in 1..=MAX_TAYLOR_TERMS {
            self.apply(weights, &term, &mut next);
            next.scale_in_place(1.0 / j as f64);
            std::mem::swap(&mut term, &mut next);
            y.axpy(1.0, &term)?;
            let size = term.norm();
            if !size.is_finite() {
                break;
            }
            if size <= tol * scale {
                return Ok((y, j));
            }
        }
        Err(Error::Integration {
            time: f64::NAN,
            reason: format!("noise exponential did not converge in {MAX_TAYLOR_TERMS} terms"),
        })
    }

    /// `max_{k,alpha} |<xi, Pi_N(sigma_{k,alpha} . grad xi)>| / (||xi||^2 |k|)` over
    /// the active indices.
    pub fn transport_bracket_max(&self, xi: &SpectralField) -> f64 {
        let e = xi.norm_sq();
        if e == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for k in &self.ks {
            let f = frame_of(*k);
            let kn = (lattice::norm_sq(*k) as f64).sqrt();
            for a in f.vectors() {
                let b = transport_bracket(xi, *k, a);
                worst = worst.max(b.norm() / (e * kn));
            }
        }
        worst
    }

    /// `(3 nu / ||theta||^2) sum theta_k^2 ||Pi_N(sigma_{k,alpha} . grad xi)||^2`, the
    /// quadratic variation rate of `||xi||`-preserving Galerkin noise.
    pub fn quadratic_variation_rate(&self, xi: &SpectralField) -> f64 {
        let mut total = 0.0;
        let one = Complex64::new(1.0, 0.0);
        for (i, k) in self.ks.iter().enumerate() {
            for alpha in [1, 2] {
                let mut buf = SpectralField::zeros(&self.modes);
                let s = crate::spectral::SigmaMode::new(*k, alpha).expect("nonzero");
                crate::spectral::advect_by_sigma_into(s, one, xi, &mut buf);
                buf.leray_project_in_place();
                // k and -k contribute equally for real xi, and E|dW|^2 = 2 dt
                total += 4.0 * self.amplitude[i].powi(2) * buf.norm_sq();
            }
        }
        total
    }
}

const MAX_TAYLOR_TERMS: usize = 80;

/// `<xi, sigma . grad xi>` restricted to the truncation, for `sigma = a e_k`.
pub fn transport_bracket(xi: &SpectralField, k: Lattice3, a: [f64; 3]) -> Complex64 {
    let modes = xi.modes();
    let c = xi.coeffs();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, z) in c.iter().enumerate() {
        let l = modes.mode(i);
        let Some(j) = modes.index(lattice::add(l, k)) else {
            continue;
        };
        let f = Complex64::new(0.0, 2.0 * PI * vec3::dot(a, lattice::to_f64(l)));
        acc += f * vec3::hdot(z, &c[j]);
    }
    acc
}
