use super::*;
use crate::corrector::{apply_block, galerkin_corrector_blocks};
use crate::lattice::{theta_shell, ThetaSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn random(m: u32, seed: u64, band: u32) -> SpectralField {
    let modes = ModeSet::new(m);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    SpectralField::random_real(&modes, &mut rng, band, |n| 1.0 / (1.0 + n as f64))
}

fn noisy_model(n: u32, nu: f64) -> Model {
    Model {
        viscosity: 1.0,
        nu,
        theta: Some(ThetaSpec::Shell { n, gamma: 1.0 }.build().unwrap()),
        cutoff_radius: Some(1e6),
        delta: 0.25,
        nonlinear: false,
    }
}

#[test]
fn cutoff_examples() {
    let r = 3.0;
    assert_eq!(cutoff_fr(0.5 * r, r).unwrap(), 1.0);
    assert_eq!(cutoff_fr(r + 2.0, r).unwrap(), 0.0);
    assert!((cutoff_fr(r + 0.5, r).unwrap() - 0.5).abs() < 1e-15);
    assert!(cutoff_fr(1.0, 0.0).is_err());
    let xs: Vec<f64> = (0..=100).map(|i| r - 0.5 + 0.02 * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| cutoff_fr(*x, r).unwrap()).collect();
    assert!(ys.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn increment_covariation() {
    let theta = theta_shell(1, 0.0).unwrap();
    let mut d = NoiseDriver::for_theta(&theta, 7, 0);
    let dt = 0.01;
    let samples = 100_000;
    let mut pair = Complex64::new(0.0, 0.0);
    let mut same = Complex64::new(0.0, 0.0);
    for _ in 0..samples {
        let inc = d.sample_increments(dt).unwrap();
        let w = inc.values[0];
        pair += w * w.conj();
        same += w * w;
    }
    let pair = pair / samples as f64;
    let same = same / samples as f64;
    assert!((pair.re - 2.0 * dt).abs() <= 0.05 * 2.0 * dt);
    assert!(same.norm() <= 0.05 * 2.0 * dt);
}

#[test]
fn increments_are_reproducible() {
    let theta = theta_shell(2, 1.0).unwrap();
    let mut a = NoiseDriver::for_theta(&theta, 99, 3);
    let mut b = NoiseDriver::for_theta(&theta, 99, 3);
    let mut c = NoiseDriver::for_theta(&theta, 99, 4);
    for _ in 0..5 {
        let (x, y, z) = (
            a.sample_increments(1e-3).unwrap(),
            b.sample_increments(1e-3).unwrap(),
            c.sample_increments(1e-3).unwrap(),
        );
        assert_eq!(x.values, y.values);
        assert_ne!(x.values, z.values);
    }
    assert!(a.sample_increments(0.0).is_err());
    assert!(NoiseDriver::new(vec![([-1, 0, 0], 1)], 0, 0).is_err());
}

#[test]
fn heat_flow_on_one_mode() {
    let modes = ModeSet::new(3);
    let mut xi = SpectralField::sigma(&modes, [1, 1, 0], 1).unwrap();
    xi.enforce_reality();
    let mut model = Model::deterministic(1.0);
    model.nonlinear = false;
    let dt = 1e-3;
    let mut integ = Integrator::new(&modes, &model, StepOptions::new(dt)).unwrap();
    let (next, _) = integ.step(&xi, None, 0.0).unwrap();
    let rate = (-FOUR_PI_SQ * 2.0 * dt).exp();
    let expect = xi.scale(rate);
    assert!(next.sub(&expect).unwrap().norm() <= 1e-15);
}

#[test]
fn zero_data_stays_zero() {
    let modes = ModeSet::new(4);
    let xi = SpectralField::zeros(&modes);
    let mut model = noisy_model(2, 1.0);
    model.nonlinear = true;
    let run = RunOptions {
        step: StepOptions::new(1e-3),
        horizon: 0.02,
        output_every: 5,
        seed: 1,
        stream: 0,
        track_brackets: true,
        keep_fields: false,
    };
    let s = simulate(&model, &xi, &run).unwrap();
    assert!(s.rows.iter().all(|r| r.energy == 0.0 && r.enstrophy == 0.0));
    assert_eq!(s.rows.len(), 5);
    assert_eq!(s.exit_time, None);
}

#[test]
fn noise_operator_is_skew_and_exponential_is_unitary() {
    let modes = ModeSet::new(4);
    let theta = theta_shell(2, 1.0).unwrap();
    let op = NoiseOperator::new(&theta, 2.0, &modes);
    let mut d = op.driver(5, 0);
    let inc = d.sample_increments(1e-3).unwrap();
    let w = op.weights(&inc);
    let x = random(4, 1, 4);
    let y = random(4, 2, 4);
    let mut gx = SpectralField::zeros(&modes);
    let mut gy = SpectralField::zeros(&modes);
    op.apply(&w, &x, &mut gx);
    op.apply(&w, &y, &mut gy);
    let a = gx.inner(&y).unwrap();
    let b = x.inner(&gy).unwrap();
    assert!((a + b).norm() <= 1e-12 * gx.norm() * y.norm());
    assert!(gx.reality_defect() == 0.0);
    let (ex, terms) = op.exponential(&w, &x, 1e-14).unwrap();
    assert!(terms > 2);
    assert!((ex.norm() - x.norm()).abs() <= 1e-12 * x.norm());
}

#[test]
fn galerkin_corrector_balances_quadratic_variation() {
    let modes = ModeSet::new(4);
    let theta = theta_shell(2, 1.0).unwrap();
    let nu = 1.5;
    let xi = random(4, 3, 4);
    let op = NoiseOperator::new(&theta, nu, &modes);
    let blocks = galerkin_corrector_blocks(&theta, nu, &modes);
    let mut sx = SpectralField::zeros(&modes);
    for i in 0..modes.len() {
        sx.set_frame_coords(i, apply_block(&blocks[i], xi.frame_coords(i)));
    }
    let drift = 2.0 * xi.inner(&sx).unwrap().re;
    let qv = op.quadratic_variation_rate(&xi);
    assert!((drift + qv).abs() <= 1e-10 * qv);
}

#[test]
fn increment_energy_matches_quadratic_variation() {
    let modes = ModeSet::new(3);
    let theta = theta_shell(1, 1.0).unwrap();
    let op = NoiseOperator::new(&theta, 1.0, &modes);
    let xi = random(3, 8, 3);
    let dt = 1e-3;
    let mut d = op.driver(11, 0);
    let samples = 4000;
    let mut total = 0.0;
    let mut g = SpectralField::zeros(&modes);
    for _ in 0..samples {
        let w = op.weights(&d.sample_increments(dt).unwrap());
        op.apply(&w, &xi, &mut g);
        total += g.norm_sq();
    }
    let mean = total / samples as f64;
    let expect = dt * op.quadratic_variation_rate(&xi);
    assert!((mean - expect).abs() <= 0.05 * expect, "{mean} vs {expect}");
}

#[test]
fn brackets_vanish_and_structure_is_preserved() {
    let modes = ModeSet::new(5);
    let mut model = noisy_model(2, 2.0);
    model.nonlinear = true;
    let xi0 = random(5, 4, 3);
    let run = RunOptions {
        step: StepOptions::new(1e-3),
        horizon: 0.01,
        output_every: 1,
        seed: 3,
        stream: 1,
        track_brackets: true,
        keep_fields: true,
    };
    let s = simulate(&model, &xi0, &run).unwrap();
    assert!(s.bracket_max <= 1e-12);
    for f in &s.fields {
        assert_eq!(f.reality_defect(), 0.0);
        assert!(f.divergence_defect() <= 1e-10 * f.max_abs());
    }
    assert_eq!(s.fields[0].modes().len(), modes.len());
}

#[test]
fn pathwise_energy_bound_without_nonlinearity() {
    let modes = ModeSet::new(4);
    let model = noisy_model(1, 3.0);
    let xi0 = random(4, 6, 4);
    let run = RunOptions {
        step: StepOptions::new(1e-3),
        horizon: 0.05,
        output_every: 1,
        seed: 2,
        stream: 0,
        track_brackets: false,
        keep_fields: false,
    };
    let s = simulate(&model, &xi0, &run).unwrap();
    let e0 = s.rows[0].energy;
    assert_eq!(s.apriori_constant, 0.0);
    for r in &s.rows {
        assert!(r.energy + r.dissipation <= e0 * (1.0 + 1e-10), "{r:?}");
    }
    assert_eq!(s.rows[0].t, 0.0);
    assert_eq!(modes.max_mode(), 4);
}

#[test]
fn zero_noise_strength_matches_deterministic_solver() {
    let xi0 = random(4, 9, 2);
    let mut a = noisy_model(2, 0.0);
    a.nonlinear = true;
    a.cutoff_radius = None;
    let b = Model::deterministic(1.0);
    let run = RunOptions {
        step: StepOptions::new(1e-3),
        horizon: 0.01,
        output_every: 2,
        seed: 0,
        stream: 0,
        track_brackets: false,
        keep_fields: true,
    };
    let sa = simulate(&a, &xi0, &run).unwrap();
    let sb = simulate(&b, &xi0, &run).unwrap();
    for (x, y) in sa.fields.iter().zip(&sb.fields) {
        assert_eq!(x.coeffs(), y.coeffs());
    }
}

#[test]
fn guard_aborts_runaway() {
    let modes = ModeSet::new(3);
    let xi0 = random(3, 1, 3);
    let model = noisy_model(1, 1.0);
    let mut opts = StepOptions::new(1e-3);
    opts.guard = 1e-6;
    let mut integ = Integrator::new(&modes, &model, opts).unwrap();
    let err = integ.step(&xi0, None, 0.5).unwrap_err();
    assert!(matches!(err, Error::Integration { time, .. } if (time - 0.501).abs() < 1e-12));
    let bad = StepOptions {
        dt: 0.0,
        ..StepOptions::new(1.0)
    };
    assert!(Integrator::new(&modes, &model, bad).is_err());
    let mut m = noisy_model(1, 1.0);
    m.delta = 0.5;
    assert!(Integrator::new(&modes, &m, StepOptions::new(1e-3)).is_err());
}
