//! Integer lattice, sign partition, polarization frames and noise weights.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;
use crate::vec3::{cross, dot, norm, scale, Vec3};

pub type Lattice3 = [i32; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignClass {
    Plus,
    Minus,
}

/// A nonzero lattice point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WaveVector {
    k: Lattice3,
}

impl WaveVector {
    pub fn new(k: Lattice3) -> Result<Self> {
        if k == [0, 0, 0] {
            return Err(Error::domain("the zero vector is not a wave vector"));
        }
        Ok(Self { k })
    }

    pub fn components(&self) -> Lattice3 {
        self.k
    }

    pub fn norm_sq(&self) -> i64 {
        norm_sq(self.k)
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn as_f64(&self) -> Vec3 {
        to_f64(self.k)
    }

    pub fn neg(&self) -> Self {
        Self { k: neg(self.k) }
    }

    pub fn sign_class(&self) -> SignClass {
        sign_class_of(self.k)
    }

    pub fn frame(&self) -> Frame {
        frame_of(self.k)
    }
}

impl std::ops::Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector::neg(&self)
    }
}

impl PartialOrd for WaveVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WaveVector {
    fn cmp(&self, other: &Self) -> Ordering {
        lattice_order(&self.k, &other.k)
    }
}

#[inline]
pub fn norm_sq(k: Lattice3) -> i64 {
    let [a, b, c] = k.map(i64::from);
    a * a + b * b + c * c
}

#[inline]
pub fn norm_sq_i64(k: [i64; 3]) -> i64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

#[inline]
pub fn to_f64(k: Lattice3) -> Vec3 {
    [k[0] as f64, k[1] as f64, k[2] as f64]
}

#[inline]
pub fn neg(k: Lattice3) -> Lattice3 {
    [-k[0], -k[1], -k[2]]
}

#[inline]
pub fn add(a: Lattice3, b: Lattice3) -> Lattice3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Lattice3, b: Lattice3) -> Lattice3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Canonical ordering: by `|k|^2`, then lexicographically.
pub fn lattice_order(a: &Lattice3, b: &Lattice3) -> Ordering {
    norm_sq(*a).cmp(&norm_sq(*b)).then_with(|| a.cmp(b))
}

/// Plus iff the first nonzero coordinate is positive.
pub fn sign_class(k: Lattice3) -> Result<SignClass> {
    if k == [0, 0, 0] {
        return Err(Error::domain("sign class of the zero vector"));
    }
    Ok(sign_class_of(k))
}

#[inline]
pub(crate) fn sign_class_of(k: Lattice3) -> SignClass {
    match k.iter().find(|&&c| c != 0) {
        Some(&c) if c > 0 => SignClass::Plus,
        _ => SignClass::Minus,
    }
}

#[inline]
pub(crate) fn is_plus(k: Lattice3) -> bool {
    sign_class_of(k) == SignClass::Plus
}

/// Orthonormal pair completing `k/|k|` to a right-handed basis for plus
/// vectors; minus vectors share the frame of their negation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub a1: Vec3,
    pub a2: Vec3,
}

impl Frame {
    pub fn get(&self, alpha: usize) -> Vec3 {
        match alpha {
            1 => self.a1,
            2 => self.a2,
            _ => panic!("polarization index must be 1 or 2, got {alpha}"),
        }
    }

    pub fn vectors(&self) -> [Vec3; 2] {
        [self.a1, self.a2]
    }
}

pub fn frame(k: Lattice3) -> Result<Frame> {
    if k == [0, 0, 0] {
        return Err(Error::domain("frame of the zero vector"));
    }
    Ok(frame_of(k))
}

pub(crate) fn frame_of(k: Lattice3) -> Frame {
    let k = if is_plus(k) { k } else { neg(k) };
    let kf = to_f64(k);
    let h: Vec3 = if k[1] == 0 && k[2] == 0 {
        [0.0, 1.0, 0.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let c = cross(kf, h);
    let a1 = scale(1.0 / norm(c), c);
    let a2 = cross(scale(1.0 / norm(kf), kf), a1);
    Frame { a1, a2 }
}

/// All nonzero lattice points with `min_sq <= |k|^2 <= max_sq`, in
/// canonical order.
pub fn lattice_points(min_sq: i64, max_sq: i64) -> Vec<Lattice3> {
    let r = (max_sq.max(0) as f64).sqrt().floor() as i32;
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let k = [a, b, c];
                let n = norm_sq(k);
                if n >= min_sq.max(1) && n <= max_sq {
                    out.push(k);
                }
            }
        }
    }
    out.sort_by(lattice_order);
    out
}

/// Shape of a weight sequence, as used in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSpec {
    Shell { n: u32, gamma: f64 },
    Ball { n: u32, gamma: f64 },
}

impl ThetaSpec {
    pub fn build(&self) -> Result<ThetaWeights> {
        match *self {
            ThetaSpec::Shell { n, gamma } => theta_shell(n, gamma),
            ThetaSpec::Ball { n, gamma } => theta_ball(n, gamma),
        }
    }

    pub fn with_n(&self, n: u32) -> ThetaSpec {
        match *self {
            ThetaSpec::Shell { gamma, .. } => ThetaSpec::Shell { n, gamma },
            ThetaSpec::Ball { gamma, .. } => ThetaSpec::Ball { n, gamma },
        }
    }

    pub fn n(&self) -> u32 {
        match *self {
            ThetaSpec::Shell { n, .. } | ThetaSpec::Ball { n, .. } => n,
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            ThetaSpec::Shell { gamma, .. } | ThetaSpec::Ball { gamma, .. } => gamma,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaEntry {
    pub k: Lattice3,
    pub norm_sq: i64,
    pub theta: f64,
    pub theta_sq: f64,
}

/// All support points sharing one value of `|k|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaShell {
    pub norm_sq: i64,
    pub count: usize,
    pub theta: f64,
    pub theta_sq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaNorms {
    pub l2_sq: f64,
    pub linf: f64,
    pub h1_sq: f64,
}

impl ThetaNorms {
    pub fn l2(&self) -> f64 {
        self.l2_sq.sqrt()
    }

    pub fn h1(&self) -> f64 {
        self.h1_sq.sqrt()
    }
}

/// Radially symmetric, finitely supported nonnegative weights `theta_k`.
///
/// Weights are a function of `|k|^2` only, evaluated once per shell, so
/// equal-norm orbits carry bit-identical values.
#[derive(Clone, Debug)]
pub struct ThetaWeights {
    entries: Vec<ThetaEntry>,
    shells: Vec<ThetaShell>,
    norms: ThetaNorms,
    integer_exponent: Option<i32>,
}

/// `theta_k = |k|^-gamma` on `N <= |k| <= 2N`.
pub fn theta_shell(n: u32, gamma: f64) -> Result<ThetaWeights> {
    if n < 1 {
        return Err(Error::domain("shell weights need N >= 1"));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::domain(format!("gamma must be >= 0, got {gamma}")));
    }
    let n = i64::from(n);
    ThetaWeights::power_law(n * n, 4 * n * n, gamma)
}

/// `theta_k = |k|^-gamma` on `1 <= |k| <= N`, `gamma` in `[0, 3/2]`.
pub fn theta_ball(n: u32, gamma: f64) -> Result<ThetaWeights> {
    if n < 1 {
        return Err(Error::domain("ball weights need N >= 1"));
    }
    if !(0.0..=1.5).contains(&gamma) {
        return Err(Error::domain(format!(
            "ball weights need gamma in [0, 3/2], got {gamma}"
        )));
    }
    let n = i64::from(n);
    ThetaWeights::power_law(1, n * n, gamma)
}

pub fn theta_norms(theta: &ThetaWeights) -> ThetaNorms {
    theta.norms()
}

impl ThetaWeights {
    fn power_law(min_sq: i64, max_sq: i64, gamma: f64) -> Result<Self> {
        let integer_exponent = (gamma.fract() == 0.0 && gamma <= 64.0).then_some(gamma as i32);
        let weight = |n: i64| -> (f64, f64) {
            let nf = n as f64;
            match integer_exponent {
                Some(0) => (1.0, 1.0),
                Some(g) if g % 2 == 0 => {
                    let t = nf.powi(-(g / 2));
                    (t, nf.powi(-g))
                }
                Some(g) => (nf.powf(-gamma / 2.0), nf.powi(-g)),
                None => {
                    let t = nf.powf(-gamma / 2.0);
                    (t, t * t)
                }
            }
        };
        let mut w = Self::from_radial(min_sq, max_sq, weight)?;
        w.integer_exponent = integer_exponent;
        Ok(w)
    }

    /// Weights given by `weight(|k|^2) -> (theta, theta^2)` on
    /// `min_sq <= |k|^2 <= max_sq`.
    pub fn from_radial(
        min_sq: i64,
        max_sq: i64,
        weight: impl Fn(i64) -> (f64, f64),
    ) -> Result<Self> {
        let points = lattice_points(min_sq, max_sq);
        let mut entries = Vec::with_capacity(points.len());
        let mut shells: Vec<ThetaShell> = Vec::new();
        for k in points {
            let n = norm_sq(k);
            if shells.last().map(|s| s.norm_sq) != Some(n) {
                let (theta, theta_sq) = weight(n);
                if !(theta.is_finite() && theta >= 0.0) {
                    return Err(Error::domain(format!(
                        "invalid weight {theta} at |k|^2 = {n}"
                    )));
                }
                shells.push(ThetaShell {
                    norm_sq: n,
                    count: 0,
                    theta,
                    theta_sq,
                });
            }
            let shell = shells.last_mut().unwrap();
            shell.count += 1;
            entries.push(ThetaEntry {
                k,
                norm_sq: n,
                theta: shell.theta,
                theta_sq: shell.theta_sq,
            });
        }
        let mut l2 = NeumaierSum::new();
        let mut h1 = NeumaierSum::new();
        let mut linf = 0.0f64;
        for s in &shells {
            l2 += s.count as f64 * s.theta_sq;
            h1 += s.count as f64 * s.theta_sq * s.norm_sq as f64;
            linf = linf.max(s.theta);
        }
        let norms = ThetaNorms {
            l2_sq: l2.value(),
            linf,
            h1_sq: h1.value(),
        };
        if !(norms.l2_sq > 0.0) {
            return Err(Error::domain("weights have zero l2 norm"));
        }
        Ok(Self {
            entries,
            shells,
            norms,
            integer_exponent: None,
        })
    }

    pub fn entries(&self) -> &[ThetaEntry] {
        &self.entries
    }

    /// Support points in the plus half, one per `{k, -k}` pair.
    pub fn plus_entries(&self) -> impl Iterator<Item = &ThetaEntry> + '_ {
        self.entries.iter().filter(|e| is_plus(e.k))
    }

    pub fn shells(&self) -> &[ThetaShell] {
        &self.shells
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norms(&self) -> ThetaNorms {
        self.norms
    }

    pub fn l2_sq(&self) -> f64 {
        self.norms.l2_sq
    }

    pub fn max_norm_sq(&self) -> i64 {
        self.shells.last().map_or(0, |s| s.norm_sq)
    }

    pub fn max_norm(&self) -> f64 {
        (self.max_norm_sq() as f64).sqrt()
    }

    /// `theta_k`, zero off the support.
    pub fn weight(&self, k: Lattice3) -> f64 {
        let n = norm_sq(k);
        self.shells
            .binary_search_by_key(&n, |s| s.norm_sq)
            .map_or(0.0, |i| self.shells[i].theta)
    }

    /// Exact `sum theta_k^2` when `theta_k^2 = |k|^(-2 gamma)` is rational,
    /// i.e. for integer `gamma`.
    pub fn l2_sq_exact(&self) -> Option<BigRational> {
        self.exact_moment(0)
    }

    /// Exact `sum theta_k^2 |k|^2` for integer `gamma`.
    pub fn h1_sq_exact(&self) -> Option<BigRational> {
        self.exact_moment(1)
    }

    fn exact_moment(&self, power: i32) -> Option<BigRational> {
        let g = self.integer_exponent?;
        let mut total = BigRational::zero();
        for s in &self.shells {
            let n = BigInt::from(s.norm_sq);
            let e = power - g;
            let term = if e >= 0 {
                BigRational::from_integer(num_traits::pow(n, e as usize))
            } else {
                BigRational::new(BigInt::from(1), num_traits::pow(n, (-e) as usize))
            };
            total += term * BigRational::from_integer(BigInt::from(s.count));
        }
        Some(total)
    }

    pub fn l2_sq_exact_f64(&self) -> Option<f64> {
        self.l2_sq_exact().and_then(|r| r.to_f64())
    }
}

/// Checks the frame invariants for `k`, returning the largest violation.
pub fn frame_defect(k: Lattice3) -> f64 {
    let f = frame_of(k);
    let kf = to_f64(k);
    let khat = scale(1.0 / norm(kf), kf);
    let plus_hat = if is_plus(k) { khat } else { scale(-1.0, khat) };
    let c = cross(f.a1, f.a2);
    [
        dot(f.a1, khat).abs(),
        dot(f.a2, khat).abs(),
        (dot(f.a1, f.a1) - 1.0).abs(),
        (dot(f.a2, f.a2) - 1.0).abs(),
        dot(f.a1, f.a2).abs(),
        (c[0] - plus_hat[0]).abs(),
        (c[1] - plus_hat[1]).abs(),
        (c[2] - plus_hat[2]).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}
