//! Small fixed-size vector helpers for real and complex 3-vectors.

use num_complex::Complex64;

pub type Vec3 = [f64; 3];
pub type CVec3 = [Complex64; 3];

pub const CZERO3: CVec3 = [Complex64::new(0.0, 0.0); 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Real vector dotted with a complex one: `a . z`.
#[inline]
pub fn rdot(a: Vec3, z: &CVec3) -> Complex64 {
    z[0] * a[0] + z[1] * a[1] + z[2] * a[2]
}

/// Bilinear complex dot product (no conjugation).
#[inline]
pub fn cdot(z: &CVec3, w: &CVec3) -> Complex64 {
    z[0] * w[0] + z[1] * w[1] + z[2] * w[2]
}

/// Hermitian product `z . conj(w)`.
#[inline]
pub fn hdot(z: &CVec3, w: &CVec3) -> Complex64 {
    z[0] * w[0].conj() + z[1] * w[1].conj() + z[2] * w[2].conj()
}

#[inline]
pub fn cnorm_sqr(z: &CVec3) -> f64 {
    z[0].norm_sqr() + z[1].norm_sqr() + z[2].norm_sqr()
}

#[inline]
pub fn cscale(s: Complex64, a: Vec3) -> CVec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn cconj(z: &CVec3) -> CVec3 {
    [z[0].conj(), z[1].conj(), z[2].conj()]
}

/// `a x z` for real `a` and complex `z`.
#[inline]
pub fn rcross(a: Vec3, z: &CVec3) -> CVec3 {
    [
        z[2] * a[1] - z[1] * a[2],
        z[0] * a[2] - z[2] * a[0],
        z[1] * a[0] - z[0] * a[1],
    ]
}

#[inline]
pub fn cross_c(z: &CVec3, w: &CVec3) -> CVec3 {
    [
        z[1] * w[2] - z[2] * w[1],
        z[2] * w[0] - z[0] * w[2],
        z[0] * w[1] - z[1] * w[0],
    ]
}

#[inline]
pub fn add_assign(acc: &mut CVec3, z: &CVec3) {
    acc[0] += z[0];
    acc[1] += z[1];
    acc[2] += z[2];
}

#[inline]
pub fn axpy(acc: &mut CVec3, s: Complex64, z: &CVec3) {
    acc[0] += s * z[0];
    acc[1] += s * z[1];
    acc[2] += s * z[2];
}
