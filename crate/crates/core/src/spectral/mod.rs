//! Divergence-free vector fields on the torus in Fourier coordinates.
//!
//! A field is a map `l -> xi_l` from the spherically truncated lattice
//! `0 < |l| <= M` to complex 3-vectors, meaning `sum_l xi_l e_l(x)` with
//! `e_l(x) = exp(2 pi i l.x)`. Real-valued fields satisfy
//! `xi_{-l} = conj(xi_l)`.

mod io;
mod nonlinear;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub use io::{read_binary, read_json, write_binary, write_json, FIELD_FORMAT_VERSION};
pub use nonlinear::{
    advect_by_sigma, advect_by_sigma_into, lie_derivative, lie_derivative_direct,
    lie_derivative_of_sigma, PseudoSpectral, SigmaMode,
};

use crate::error::{Error, Result};
use crate::lattice::{self, frame_of, is_plus, lattice_points, norm_sq, Frame, Lattice3};
use crate::sum::NeumaierSum;
use crate::vec3::{self, cdot, cnorm_sqr, hdot, rcross, rdot, CVec3, Vec3, CZERO3};

pub const TWO_PI: f64 = 2.0 * PI;
pub const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// The modes `0 < |l| <= M` in canonical order, with lookup tables.
#[derive(Debug)]
pub struct ModeSet {
    max_mode: u32,
    modes: Vec<Lattice3>,
    norm_sq: Vec<i64>,
    frames: Vec<Frame>,
    neg_index: Vec<usize>,
    lookup: Vec<u32>,
}

const NO_MODE: u32 = u32::MAX;

impl ModeSet {
    pub fn new(max_mode: u32) -> Arc<ModeSet> {
        assert!(max_mode >= 1, "truncation must be at least 1");
        let m = i64::from(max_mode);
        let modes = lattice_points(1, m * m);
        let side = 2 * max_mode as usize + 1;
        let mut lookup = vec![NO_MODE; side * side * side];
        for (i, l) in modes.iter().enumerate() {
            lookup[Self::slot(max_mode, *l)] = i as u32;
        }
        let mut set = ModeSet {
            max_mode,
            norm_sq: modes.iter().map(|l| norm_sq(*l)).collect(),
            frames: modes.iter().map(|l| frame_of(*l)).collect(),
            neg_index: Vec::new(),
            modes,
            lookup,
        };
        set.neg_index = set
            .modes
            .iter()
            .map(|l| {
                set.index(lattice::neg(*l))
                    .expect("truncation is symmetric")
            })
            .collect();
        Arc::new(set)
    }

    #[inline]
    fn slot(max_mode: u32, l: Lattice3) -> usize {
        let m = max_mode as i32;
        let side = (2 * m + 1) as usize;
        let [a, b, c] = l.map(|x| (x + m) as usize);
        (a * side + b) * side + c
    }

    pub fn max_mode(&self) -> u32 {
        self.max_mode
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Lattice3] {
        &self.modes
    }

    #[inline]
    pub fn mode(&self, i: usize) -> Lattice3 {
        self.modes[i]
    }

    #[inline]
    pub fn norm_sq_at(&self, i: usize) -> i64 {
        self.norm_sq[i]
    }

    #[inline]
    pub fn frame_at(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    #[inline]
    pub fn neg_index(&self, i: usize) -> usize {
        self.neg_index[i]
    }

    /// Index of `l`, or `None` when `l` is zero or outside the truncation.
    #[inline]
    pub fn index(&self, l: Lattice3) -> Option<usize> {
        let m = self.max_mode as i32;
        if l.iter().any(|&x| x.abs() > m) {
            return None;
        }
        match self.lookup[Self::slot(self.max_mode, l)] {
            NO_MODE => None,
            i => Some(i as usize),
        }
    }

    /// Indices of the plus half of the truncation.
    pub fn plus_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| is_plus(self.modes[i]))
    }
}

/// Fourier coefficients of a (complex or real) vector field.
#[derive(Clone, Debug)]
pub struct SpectralField {
    modes: Arc<ModeSet>,
    coeffs: Vec<CVec3>,
}

impl SpectralField {
    pub fn zeros(modes: &Arc<ModeSet>) -> Self {
        Self {
            modes: Arc::clone(modes),
            coeffs: vec![CZERO3; modes.len()],
        }
    }

    pub fn from_coeffs(modes: &Arc<ModeSet>, coeffs: Vec<CVec3>) -> Result<Self> {
        if coeffs.len() != modes.len() {
            return Err(Error::Truncation(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                modes.len()
            )));
        }
        Ok(Self {
            modes: Arc::clone(modes),
            coeffs,
        })
    }

    /// The basis field `sigma_{l,beta} = a_{l,beta} e_l`.
    pub fn sigma(modes: &Arc<ModeSet>, l: Lattice3, beta: usize) -> Result<Self> {
        let i = modes.index(l).ok_or_else(|| {
            Error::Truncation(format!("mode {l:?} outside |l| <= {}", modes.max_mode()))
        })?;
        let mut f = Self::zeros(modes);
        f.coeffs[i] = vec3::cscale(Complex64::new(1.0, 0.0), modes.frame_at(i).get(beta));
        Ok(f)
    }

    /// Real divergence-free field with independent Gaussian frame
    /// coordinates on `|l| <= band`, scaled by `amplitude(|l|^2)`.
    pub fn random_real<R: Rng + ?Sized>(
        modes: &Arc<ModeSet>,
        rng: &mut R,
        band: u32,
        amplitude: impl Fn(i64) -> f64,
    ) -> Self {
        let mut f = Self::zeros(modes);
        let band_sq = i64::from(band) * i64::from(band);
        for i in 0..modes.len() {
            if !is_plus(modes.mode(i)) || modes.norm_sq_at(i) > band_sq {
                continue;
            }
            let amp = amplitude(modes.norm_sq_at(i));
            let mut c = || {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * amp
            };
            let (v1, v2) = (c(), c());
            let fr = modes.frame_at(i);
            let mut z = vec3::cscale(v1, fr.a1);
            vec3::axpy(&mut z, v2, &vec3::cscale(Complex64::new(1.0, 0.0), fr.a2));
            f.coeffs[i] = z;
            f.coeffs[modes.neg_index(i)] = vec3::cconj(&z);
        }
        f
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn max_mode(&self) -> u32 {
        self.modes.max_mode()
    }

    pub fn coeffs(&self) -> &[CVec3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [CVec3] {
        &mut self.coeffs
    }

    pub fn coeff(&self, l: Lattice3) -> Option<CVec3> {
        self.modes.index(l).map(|i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, l: Lattice3, value: CVec3) -> Result<()> {
        let i = self
            .modes
            .index(l)
            .ok_or_else(|| Error::Truncation(format!("mode {l:?} outside truncation")))?;
        self.coeffs[i] = value;
        Ok(())
    }

    pub(crate) fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.max_mode() != other.max_mode() {
            return Err(Error::Truncation(format!(
                "fields truncated at {} and {}",
                self.max_mode(),
                other.max_mode()
            )));
        }
        Ok(())
    }

    /// Frame coordinates `(v_{l,1}, v_{l,2})` at mode index `i`, i.e. the
    /// hermitian projections onto `a_{l,1}, a_{l,2}`.
    #[inline]
    pub fn frame_coords(&self, i: usize) -> [Complex64; 2] {
        let f = self.modes.frame_at(i);
        [rdot(f.a1, &self.coeffs[i]), rdot(f.a2, &self.coeffs[i])]
    }

    #[inline]
    pub fn set_frame_coords(&mut self, i: usize, v: [Complex64; 2]) {
        let f = *self.modes.frame_at(i);
        let mut z = vec3::cscale(v[0], f.a1);
        vec3::axpy(&mut z, v[1], &vec3::cscale(Complex64::new(1.0, 0.0), f.a2));
        self.coeffs[i] = z;
    }

    /// Restriction or zero-extension onto another truncation.
    pub fn resample(&self, target: &Arc<ModeSet>) -> SpectralField {
        let mut out = SpectralField::zeros(target);
        for (i, l) in target.modes().iter().enumerate() {
            if let Some(j) = self.modes.index(*l) {
                out.coeffs[i] = self.coeffs[j];
            }
        }
        out
    }

    pub fn map_modes(&self, f: impl Fn(usize, &CVec3) -> CVec3) -> SpectralField {
        SpectralField {
            modes: Arc::clone(&self.modes),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, z)| f(i, z))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        self.map_modes(|_, z| z.map(|c| c * s))
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for z in &mut self.coeffs {
            for c in z.iter_mut() {
                *c *= s;
            }
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SpectralField) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            vec3::axpy(a, Complex64::new(s, 0.0), b);
        }
        Ok(())
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    /// Hermitian `L^2` inner product `sum_l f_l . conj(g_l)`; for real
    /// fields this is the real `L^2` pairing.
    pub fn inner(&self, other: &SpectralField) -> Result<Complex64> {
        self.check_same(other)?;
        let mut re = NeumaierSum::new();
        let mut im = NeumaierSum::new();
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            let z = hdot(a, b);
            re += z.re;
            im += z.im;
        }
        Ok(Complex64::new(re.value(), im.value()))
    }

    /// Bilinear pairing `sum_l f_l . g_{-l}`, i.e. `int f . g dx`.
    pub fn pairing(&self, other: &SpectralField) -> Result<Complex64> {
        self.check_same(other)?;
        let mut re = NeumaierSum::new();
        let mut im = NeumaierSum::new();
        for (i, a) in self.coeffs.iter().enumerate() {
            let z = cdot(a, &other.coeffs[self.modes.neg_index(i)]);
            re += z.re;
            im += z.im;
        }
        Ok(Complex64::new(re.value(), im.value()))
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .map(cnorm_sqr)
            .collect::<NeumaierSum>()
            .value()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `||f||_s^2 = sum_l (4 pi^2 |l|^2)^s |f_l|^2`.
    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for (i, z) in self.coeffs.iter().enumerate() {
            let w = if s == 0.0 {
                1.0
            } else {
                (FOUR_PI_SQ * self.modes.norm_sq_at(i) as f64).powf(s)
            };
            acc += w * cnorm_sqr(z);
        }
        acc.value()
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    /// `||grad f||^2 = sum 4 pi^2 |l|^2 |f_l|^2`.
    pub fn grad_norm_sq(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for (i, z) in self.coeffs.iter().enumerate() {
            acc += FOUR_PI_SQ * self.modes.norm_sq_at(i) as f64 * cnorm_sqr(z);
        }
        acc.value()
    }

    pub fn laplacian(&self) -> SpectralField {
        self.map_modes(|i, z| {
            let s = -FOUR_PI_SQ * self.modes.norm_sq_at(i) as f64;
            z.map(|c| c * s)
        })
    }

    /// Divergence-free part: `f_l - (l . f_l) l / |l|^2` per mode.
    pub fn leray_project(&self) -> SpectralField {
        self.map_modes(|i, z| {
            let p = self.perp_part(i, z);
            [z[0] - p[0], z[1] - p[1], z[2] - p[2]]
        })
    }

    pub fn leray_project_in_place(&mut self) {
        for i in 0..self.coeffs.len() {
            let z = self.coeffs[i];
            let p = self.perp_part(i, &z);
            self.coeffs[i] = [z[0] - p[0], z[1] - p[1], z[2] - p[2]];
        }
    }

    /// Gradient part `(l . f_l) l / |l|^2` per mode.
    pub fn leray_perp(&self) -> SpectralField {
        self.map_modes(|i, z| self.perp_part(i, z))
    }

    #[inline]
    fn perp_part(&self, i: usize, z: &CVec3) -> CVec3 {
        let l = lattice::to_f64(self.modes.mode(i));
        let c = rdot(l, z) / self.modes.norm_sq_at(i) as f64;
        vec3::cscale(c, l)
    }

    /// `(curl f)_l = 2 pi i l x f_l`.
    pub fn curl(&self) -> SpectralField {
        let i2pi = Complex64::new(0.0, TWO_PI);
        self.map_modes(|i, z| {
            let l = lattice::to_f64(self.modes.mode(i));
            rcross(l, z).map(|c| c * i2pi)
        })
    }

    /// Inverse curl on zero-mean divergence-free fields:
    /// `u_l = i (l x xi_l) / (2 pi |l|^2)`.
    pub fn biot_savart(&self) -> SpectralField {
        self.map_modes(|i, z| {
            let l = lattice::to_f64(self.modes.mode(i));
            let s = Complex64::new(0.0, 1.0 / (TWO_PI * self.modes.norm_sq_at(i) as f64));
            rcross(l, z).map(|c| c * s)
        })
    }

    /// `max_l |l . f_l| / |l|`.
    pub fn divergence_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let l = lattice::to_f64(self.modes.mode(i));
                rdot(l, z).norm() / (self.modes.norm_sq_at(i) as f64).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max_l |conj(f_l) - f_{-l}|`.
    pub fn reality_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let w = &self.coeffs[self.modes.neg_index(i)];
                (0..3)
                    .map(|c| (z[c].conj() - w[c]).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Replace the field by its real part `(f + conj(f(-.)))/2`.
    pub fn enforce_reality(&mut self) {
        for i in 0..self.coeffs.len() {
            let j = self.modes.neg_index(i);
            if i < j {
                let a = self.coeffs[i];
                let b = vec3::cconj(&self.coeffs[j]);
                let avg = [
                    (a[0] + b[0]) * 0.5,
                    (a[1] + b[1]) * 0.5,
                    (a[2] + b[2]) * 0.5,
                ];
                self.coeffs[i] = avg;
                self.coeffs[j] = vec3::cconj(&avg);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|z| z.iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|z| z.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    /// Support: indices of nonzero modes.
    pub fn support(&self) -> Vec<Lattice3> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, z)| cnorm_sqr(z) > 0.0)
            .map(|(i, _)| self.modes.mode(i))
            .collect()
    }
}

pub fn real_vec(v: Vec3) -> CVec3 {
    v.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random(m: u32, seed: u64) -> SpectralField {
        let modes = ModeSet::new(m);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        SpectralField::random_real(&modes, &mut rng, m, |n| 1.0 / (1.0 + n as f64))
    }

    fn random_raw(m: u32, seed: u64) -> SpectralField {
        let modes = ModeSet::new(m);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let coeffs = (0..modes.len())
            .map(|_| {
                [(); 3]
                    .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            })
            .collect();
        SpectralField::from_coeffs(&modes, coeffs).unwrap()
    }

    fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
        a.sub(b).unwrap().norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn mode_counts() {
        assert_eq!(ModeSet::new(1).len(), 6);
        assert_eq!(ModeSet::new(2).len(), 32);
        assert_eq!(ModeSet::new(6).len(), 924);
        let ms = ModeSet::new(3);
        for i in 0..ms.len() {
            assert_eq!(ms.index(ms.mode(i)), Some(i));
            assert_eq!(ms.mode(ms.neg_index(i)), lattice::neg(ms.mode(i)));
        }
        assert_eq!(ms.index([0, 0, 0]), None);
        assert_eq!(ms.index([3, 1, 0]), None);
        assert_eq!(ms.index([4, 0, 0]), None);
    }

    #[test]
    fn random_fields_are_real_and_solenoidal() {
        let f = random(4, 3);
        assert!(f.reality_defect() == 0.0);
        assert!(f.divergence_defect() <= 1e-14 * f.max_abs());
    }

    #[test]
    fn leray_examples() {
        let f = random(3, 1);
        assert!(rel(&f.leray_project(), &f) <= 1e-15);
        let modes = f.modes().clone();
        let mut g = SpectralField::zeros(&modes);
        g.set_coeff([1, 2, 0], real_vec([1.0, 2.0, 0.0])).unwrap();
        assert_eq!(g.leray_project().norm(), 0.0);
        let raw = random_raw(3, 2);
        let sum = raw.leray_project().add(&raw.leray_perp()).unwrap();
        assert!(rel(&sum, &raw) <= 1e-15);
        let p = raw.leray_perp();
        assert!(rel(&p.leray_perp(), &p) <= 1e-15);
        let s = SpectralField::sigma(&modes, [1, 1, 2], 2).unwrap();
        assert!(s.leray_perp().norm() <= 1e-16);
    }

    #[test]
    fn leray_is_self_adjoint_and_orthogonal() {
        let f = random_raw(3, 4);
        let g = random_raw(3, 5);
        let a = f.leray_project().inner(&g).unwrap();
        let b = f.inner(&g.leray_project()).unwrap();
        assert!((a - b).norm() <= 1e-12 * f.norm() * g.norm());
        let c = f.leray_project().inner(&g.leray_perp()).unwrap();
        assert!(c.norm() <= 1e-12 * f.norm() * g.norm());
    }

    #[test]
    fn curl_of_basis_fields() {
        let modes = ModeSet::new(3);
        for k in [[1, 0, 0], [1, 2, 2], [0, -1, 1], [-2, 1, 0]] {
            let kn = (norm_sq(k) as f64).sqrt();
            let s1 = SpectralField::sigma(&modes, k, 1).unwrap();
            let s2 = SpectralField::sigma(&modes, k, 2).unwrap();
            let i2pik = Complex64::new(0.0, TWO_PI * kn);
            let expect1 = s2.map_modes(|_, z| z.map(|c| c * i2pik));
            let expect2 = s1.map_modes(|_, z| z.map(|c| -c * i2pik));
            if is_plus(k) {
                assert!(rel(&s1.curl(), &expect1) <= 1e-15);
                assert!(rel(&s2.curl(), &expect2) <= 1e-15);
                assert!(rel(&expect1.biot_savart(), &s1) <= 1e-15);
            } else {
                // minus modes share the frame of -k, so the orientation flips
                assert!(rel(&s1.curl(), &expect1.scale(-1.0)) <= 1e-15);
            }
        }
        assert_eq!(SpectralField::zeros(&modes).curl().norm(), 0.0);
    }

    #[test]
    fn curl_and_biot_savart_are_inverse() {
        let xi = random(5, 9);
        assert!(rel(&xi.biot_savart().curl(), &xi) <= 1e-12);
        assert!(rel(&xi.curl().biot_savart(), &xi) <= 1e-12);
        assert!(xi.curl().divergence_defect() <= 1e-12 * xi.curl().max_abs());
        assert!(xi.curl().reality_defect() <= 1e-12 * xi.norm());
        assert!(xi.biot_savart().reality_defect() <= 1e-12 * xi.norm());
    }

    #[test]
    fn laplacian_and_norms() {
        let modes = ModeSet::new(3);
        let l = [1, -2, 1];
        let s = SpectralField::sigma(&modes, l, 2).unwrap();
        let expect = s.scale(-FOUR_PI_SQ * 6.0);
        assert!(rel(&s.laplacian(), &expect) <= 1e-15);
        assert!((s.norm() - 1.0).abs() <= 1e-15);
        let f = random(4, 1);
        assert!(f.sobolev_norm(-0.25) <= f.sobolev_norm(0.0));
        assert_eq!(f.sobolev_norm_sq(0.0), f.norm_sq());
        assert!((f.sobolev_norm_sq(1.0) - f.grad_norm_sq()).abs() <= 1e-12 * f.grad_norm_sq());
        let direct: f64 = f.coeffs().iter().map(cnorm_sqr).sum();
        assert!((f.norm_sq() - direct).abs() <= 1e-13 * direct);
    }

    #[test]
    fn pairing_equals_inner_for_real_fields() {
        let f = random(3, 11);
        let g = random(3, 12);
        let a = f.inner(&g).unwrap();
        let b = f.pairing(&g).unwrap();
        assert!((a - b).norm() <= 1e-13 * f.norm() * g.norm());
        assert!(a.im.abs() <= 1e-13 * f.norm() * g.norm());
    }

    #[test]
    fn truncation_mismatch_is_reported() {
        let f = random(3, 1);
        let g = random(4, 1);
        assert!(matches!(f.inner(&g), Err(Error::Truncation(_))));
        assert!(SpectralField::sigma(f.modes(), [4, 0, 0], 1).is_err());
    }

    #[test]
    fn resample_round_trip() {
        let f = random(3, 2);
        let big = ModeSet::new(5);
        let g = f.resample(&big).resample(f.modes());
        assert_eq!(rel(&g, &f), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn operators_preserve_reality(seed in 0u64..10_000) {
            let f = random(3, seed);
            let n = f.norm();
            prop_assert!(f.curl().reality_defect() <= 1e-12 * f.curl().norm());
            prop_assert!(f.laplacian().reality_defect() <= 1e-12 * f.laplacian().norm());
            prop_assert!(f.leray_project().reality_defect() <= 1e-12 * n);
            let mut g = random_raw(3, seed);
            g.enforce_reality();
            prop_assert!(g.reality_defect() == 0.0);
        }

        #[test]
        fn leray_idempotent(seed in 0u64..10_000) {
            let raw = random_raw(2, seed);
            let p = raw.leray_project();
            prop_assert!(rel(&p.leray_project(), &p) <= 1e-15);
            prop_assert!(p.divergence_defect() <= 1e-14 * raw.max_abs());
        }
    }
}
