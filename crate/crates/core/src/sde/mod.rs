//! Time integration of the Galerkin system
//! `d xi = [-f_R(||xi||_{-delta}) Pi_N L_{u} xi + Delta xi + S_theta xi] dt
//!        + (C_nu / ||theta||) sum theta_k Pi_N(sigma_{k,alpha} . grad xi) dW^{k,alpha}`.
//!
//! Two schemes are provided. [`Scheme::SplitExponential`] treats the noise
//! in Stratonovich form: each step applies the exact exponential of the
//! linear block `Delta + S_theta - S_N` (with `S_N` the Galerkin corrector
//! produced by the projected noise) and exponential-Euler nonlinearity,
//! followed by the exact exponential of the increment operator, which is
//! skew-adjoint and preserves `||xi||`. [`Scheme::EulerMaruyama`] is the
//! plain Ito scheme `xi + dt (...) + G xi`; it is mean-square unstable once
//! `dt` times the noise quadratic-variation rate exceeds one.

mod noise;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use noise::{transport_bracket, Increments, NoiseDriver, NoiseOperator, RNG_ALGORITHM};

use crate::corrector::{galerkin_corrector_blocks, Block, Corrector};
use crate::error::{Error, Result};
use crate::lattice::ThetaWeights;
use crate::spectral::{ModeSet, PseudoSpectral, SpectralField, FOUR_PI_SQ};

/// Smooth non-increasing cut-off: 1 on `[0, R]`, `cos^2(pi (x - R) / 2)` on
/// `(R, R + 1)`, 0 beyond.
pub fn cutoff_fr(x: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!(
            "cut-off radius must be positive, got {r}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!(
            "cut-off argument must be >= 0, got {x}"
        )));
    }
    Ok(if x <= r {
        1.0
    } else if x >= r + 1.0 {
        0.0
    } else {
        (0.5 * PI * (x - r)).cos().powi(2)
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    SplitExponential,
    EulerMaruyama,
}

/// Physical content of the equation being integrated.
#[derive(Clone, Debug)]
pub struct Model {
    /// Coefficient of `Delta` (1 for the stochastic equation, `nu_1` for the
    /// deterministic limit).
    pub viscosity: f64,
    /// Noise strength `nu`; with `theta = None` there is neither noise nor corrector.
    pub nu: f64,
    pub theta: Option<ThetaWeights>,
    /// Cut-off radius `R`; `None` means `f_R = 1`.
    pub cutoff_radius: Option<f64>,
    pub delta: f64,
    pub nonlinear: bool,
}

impl Model {
    pub fn deterministic(viscosity: f64) -> Self {
        Self {
            viscosity,
            nu: 0.0,
            theta: None,
            cutoff_radius: None,
            delta: 0.25,
            nonlinear: true,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepOptions {
    pub dt: f64,
    pub scheme: Scheme,
    /// Relative truncation threshold of the noise exponential series.
    pub taylor_tol: f64,
    /// Abort once `||xi||` exceeds this value.
    pub guard: f64,
}

impl StepOptions {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::default(),
            taylor_tol: 1e-13,
            guard: 1e12,
        }
    }
}

/// Per-mode data of the symmetric linear block `L = V diag(lambda) V^T`.
#[derive(Clone, Copy, Debug)]
struct LinearMode {
    exp: Block,
    phi: Block,
    rotation: Block,
    /// `4 pi^2 |l|^2 (exp(2 lambda dt) - 1) / (2 lambda)` per eigenvalue.
    dissipation: [f64; 2],
}

fn eigen_sym(b: &Block) -> ([f64; 2], Block) {
    let (a, c, o) = (b[0][0], b[1][1], 0.5 * (b[0][1] + b[1][0]));
    let phi = 0.5 * (2.0 * o).atan2(a - c);
    let (s, co) = phi.sin_cos();
    let l1 = a * co * co + 2.0 * o * s * co + c * s * s;
    let l2 = a * s * s - 2.0 * o * s * co + c * co * co;
    ([l1, l2], [[co, -s], [s, co]])
}

fn reassemble(v: &Block, d: [f64; 2]) -> Block {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = v[i][0] * d[0] * v[j][0] + v[i][1] * d[1] * v[j][1];
        }
    }
    out
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

impl LinearMode {
    fn new(block: &Block, dt: f64, norm_sq: i64) -> Self {
        let (lambda, rotation) = eigen_sym(block);
        let grad = FOUR_PI_SQ * norm_sq as f64;
        Self {
            exp: reassemble(&rotation, lambda.map(|l| (l * dt).exp())),
            phi: reassemble(&rotation, lambda.map(|l| dt * phi1(l * dt))),
            rotation,
            dissipation: lambda.map(|l| grad * dt * phi1(2.0 * l * dt)),
        }
    }
}

#[inline]
fn apply(b: &Block, v: [Complex64; 2]) -> [Complex64; 2] {
    crate::corrector::apply_block(b, v)
}

/// Outcome of one step.
#[derive(Clone, Debug)]
pub struct StepReport {
    /// `int ||grad xi||^2` over the step along the linear flow.
    pub dissipation: f64,
    /// `f_R(||xi_n||_{-delta})`.
    pub cutoff: f64,
    /// `2 f_R |<xi_n, L_u xi_n>|`, the energy the nonlinearity can inject.
    pub nonlinear_power: f64,
    pub taylor_terms: usize,
}

#[derive(Clone)]
pub struct Integrator {
    modes: Arc<ModeSet>,
    options: StepOptions,
    cutoff_radius: Option<f64>,
    delta: f64,
    linear: Vec<LinearMode>,
    noise: Option<NoiseOperator>,
    grid: Option<PseudoSpectral>,
}

impl Integrator {
    pub fn new(modes: &Arc<ModeSet>, model: &Model, options: StepOptions) -> Result<Self> {
        if !(options.dt > 0.0 && options.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                options.dt
            )));
        }
        if !(model.delta > 0.0 && model.delta < 0.5) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1/2), got {}",
                model.delta
            )));
        }
        if let Some(r) = model.cutoff_radius {
            cutoff_fr(0.0, r)?;
        }
        let n = modes.len();
        let mut blocks: Vec<Block> = (0..n)
            .map(|i| {
                let d = -FOUR_PI_SQ * model.viscosity * modes.norm_sq_at(i) as f64;
                [[d, 0.0], [0.0, d]]
            })
            .collect();
        let mut noise = None;
        if let Some(theta) = &model.theta {
            if model.nu > 0.0 {
                let corrector = Corrector::new(theta, model.nu, modes)?;
                for (i, b) in blocks.iter_mut().enumerate() {
                    add_into(b, &corrector.block(i), 1.0);
                }
                if options.scheme == Scheme::SplitExponential {
                    for (b, g) in blocks
                        .iter_mut()
                        .zip(galerkin_corrector_blocks(theta, model.nu, modes))
                    {
                        add_into(b, &g, -1.0);
                    }
                }
                let op = NoiseOperator::new(theta, model.nu, modes);
                if !op.is_inactive() {
                    noise = Some(op);
                }
            }
        }
        let linear = blocks
            .iter()
            .enumerate()
            .map(|(i, b)| LinearMode::new(b, options.dt, modes.norm_sq_at(i)))
            .collect();
        Ok(Self {
            modes: Arc::clone(modes),
            options,
            cutoff_radius: model.cutoff_radius,
            delta: model.delta,
            linear,
            noise,
            grid: model.nonlinear.then(|| PseudoSpectral::new(modes)),
        })
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn options(&self) -> &StepOptions {
        &self.options
    }

    pub fn noise(&self) -> Option<&NoiseOperator> {
        self.noise.as_ref()
    }

    /// Driver for the active noise indices, or `None` when the noise cannot
    /// reach the truncation.
    pub fn driver(&self, seed: u64, stream: u64) -> Option<NoiseDriver> {
        self.noise.as_ref().map(|op| op.driver(seed, stream))
    }

    pub fn cutoff_value(&self, xi: &SpectralField) -> f64 {
        match self.cutoff_radius {
            Some(r) => cutoff_fr(xi.sobolev_norm(-self.delta), r).unwrap_or(0.0),
            None => 1.0,
        }
    }

    /// `f_R(||xi||_{-delta}) Pi_N L_{B xi} xi`.
    pub fn drift_nonlinearity(
        &mut self,
        xi: &SpectralField,
    ) -> Result<Option<(SpectralField, f64)>> {
        let f = self.cutoff_value(xi);
        let Some(grid) = self.grid.as_mut() else {
            return Ok(None);
        };
        if f == 0.0 {
            return Ok(Some((SpectralField::zeros(&self.modes), 0.0)));
        }
        let mut b = grid.nonlinearity(xi)?;
        b.scale_in_place(f);
        Ok(Some((b, f)))
    }

    /// Advances `xi` from time `t` by one step.
    pub fn step(
        &mut self,
        xi: &SpectralField,
        increments: Option<&Increments>,
        t: f64,
    ) -> Result<(SpectralField, StepReport)> {
        if xi.max_mode() != self.modes.max_mode() {
            return Err(Error::Truncation(
                "state and integrator truncations differ".into(),
            ));
        }
        let cutoff = self.cutoff_value(xi);
        let nonlinear = self.drift_nonlinearity(xi)?;
        let nonlinear_power = match &nonlinear {
            Some((b, _)) => 2.0 * xi.inner(b)?.re.abs(),
            None => 0.0,
        };
        let mut next = SpectralField::zeros(&self.modes);
        let mut dissipation = 0.0;
        for i in 0..self.modes.len() {
            let lm = &self.linear[i];
            let v = xi.frame_coords(i);
            let mut y = apply(&lm.exp, v);
            if let Some((b, _)) = &nonlinear {
                let nb = b.frame_coords(i).map(|c| -c);
                let p = apply(&lm.phi, nb);
                y = [y[0] + p[0], y[1] + p[1]];
            }
            next.set_frame_coords(i, y);
            let r = &lm.rotation;
            let u = [
                r[0][0] * v[0] + r[1][0] * v[1],
                r[0][1] * v[0] + r[1][1] * v[1],
            ];
            dissipation +=
                lm.dissipation[0] * u[0].norm_sqr() + lm.dissipation[1] * u[1].norm_sqr();
        }
        let mut taylor_terms = 0;
        if let (Some(op), Some(inc)) = (&self.noise, increments) {
            let w = op.weights(inc);
            match self.options.scheme {
                Scheme::SplitExponential => {
                    let (y, terms) = op
                        .exponential(&w, &next, self.options.taylor_tol)
                        .map_err(|e| retime(e, t))?;
                    next = y;
                    taylor_terms = terms;
                }
                Scheme::EulerMaruyama => {
                    let mut g = SpectralField::zeros(&self.modes);
                    op.apply(&w, xi, &mut g);
                    next.axpy(1.0, &g)?;
                }
            }
        }
        next.enforce_reality();
        if !next.is_finite() {
            return Err(Error::Integration {
                time: t + self.options.dt,
                reason: "non-finite state".into(),
            });
        }
        let norm = next.norm();
        if norm > self.options.guard {
            return Err(Error::Integration {
                time: t + self.options.dt,
                reason: format!("norm {norm:.3e} exceeded guard {:.3e}", self.options.guard),
            });
        }
        Ok((
            next,
            StepReport {
                dissipation,
                cutoff,
                nonlinear_power,
                taylor_terms,
            },
        ))
    }
}

fn retime(e: Error, t: f64) -> Error {
    match e {
        Error::Integration { reason, .. } => Error::Integration { time: t, reason },
        other => other,
    }
}

fn add_into(a: &mut Block, b: &Block, s: f64) {
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] += s * b[i][j];
        }
    }
}

/// Run parameters besides the model.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub step: StepOptions,
    pub horizon: f64,
    pub output_every: usize,
    pub seed: u64,
    pub stream: u64,
    /// Evaluate the transport brackets at every output time.
    pub track_brackets: bool,
    /// Keep a copy of the field at every output time.
    pub keep_fields: bool,
}

impl RunOptions {
    pub fn steps(&self) -> usize {
        (self.horizon / self.step.dt).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    /// `||xi||^2`.
    pub energy: f64,
    /// `||grad xi||^2`.
    pub enstrophy: f64,
    /// `||xi||_{-delta}`.
    pub neg_sobolev: f64,
    /// `f_R(||xi||_{-delta})`.
    pub cutoff: f64,
    /// `int_0^t ||grad xi||^2` along the scheme's linear flow.
    pub dissipation: f64,
}

#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub rows: Vec<SeriesRow>,
    pub fields: Vec<SpectralField>,
    /// First step time with `||xi||_{-delta} > R`.
    pub exit_time: Option<f64>,
    /// Largest normalized transport bracket seen at output times.
    pub bracket_max: f64,
    /// `sup_n (2 f_R |<xi_n, L_u xi_n>| - D_n / dt)_+`, with `D_n` the
    /// step dissipation: the growth constant of the a-priori energy bound.
    pub apriori_constant: f64,
    pub max_taylor_terms: usize,
    pub steps: usize,
}

impl TimeSeries {
    pub fn final_field(&self) -> Option<&SpectralField> {
        self.fields.last()
    }

    /// `max_t (||xi_t||^2 + int_0^t ||grad xi||^2 - ||xi_0||^2 - C t)` with
    /// `C` the measured [`Self::apriori_constant`]; nonpositive when the
    /// a-priori energy bound holds on this path.
    pub fn apriori_excess(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        self.rows
            .iter()
            .map(|r| r.energy + r.dissipation - first.energy - self.apriori_constant * r.t)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Integrates from `xi0` over `[0, horizon]`.
pub fn simulate(model: &Model, xi0: &SpectralField, run: &RunOptions) -> Result<TimeSeries> {
    let mut integrator = Integrator::new(xi0.modes(), model, run.step)?;
    simulate_with(&mut integrator, model.cutoff_radius, model.delta, xi0, run)
}

pub fn simulate_with(
    integrator: &mut Integrator,
    cutoff_radius: Option<f64>,
    delta: f64,
    xi0: &SpectralField,
    run: &RunOptions,
) -> Result<TimeSeries> {
    let dt = run.step.dt;
    let steps = run.steps();
    let every = run.output_every.max(1);
    let mut driver = integrator.driver(run.seed, run.stream);
    let mut xi = xi0.clone();
    let mut series = TimeSeries {
        rows: Vec::new(),
        fields: Vec::new(),
        exit_time: None,
        bracket_max: 0.0,
        apriori_constant: 0.0,
        max_taylor_terms: 0,
        steps,
    };
    let mut dissipation = 0.0;
    let record = |series: &mut TimeSeries,
                  xi: &SpectralField,
                  t: f64,
                  dissipation: f64,
                  integrator: &Integrator| {
        series.rows.push(SeriesRow {
            t,
            energy: xi.norm_sq(),
            enstrophy: xi.grad_norm_sq(),
            neg_sobolev: xi.sobolev_norm(-delta),
            cutoff: integrator.cutoff_value(xi),
            dissipation,
        });
        if run.keep_fields {
            series.fields.push(xi.clone());
        }
        if run.track_brackets {
            if let Some(op) = integrator.noise() {
                series.bracket_max = series.bracket_max.max(op.transport_bracket_max(xi));
            }
        }
    };
    let check_exit = |series: &mut TimeSeries, xi: &SpectralField, t: f64| {
        if let (None, Some(r)) = (series.exit_time, cutoff_radius) {
            if xi.sobolev_norm(-delta) > r {
                series.exit_time = Some(t);
            }
        }
    };
    record(&mut series, &xi, 0.0, 0.0, integrator);
    check_exit(&mut series, &xi, 0.0);
    for n in 0..steps {
        let t = n as f64 * dt;
        let inc = match driver.as_mut() {
            Some(d) => Some(d.sample_increments(dt)?),
            None => None,
        };
        let (next, report) = integrator.step(&xi, inc.as_ref(), t)?;
        dissipation += report.dissipation;
        series.apriori_constant = series
            .apriori_constant
            .max(report.nonlinear_power - report.dissipation / dt);
        series.max_taylor_terms = series.max_taylor_terms.max(report.taylor_terms);
        xi = next;
        let t1 = (n + 1) as f64 * dt;
        check_exit(&mut series, &xi, t1);
        if (n + 1) % every == 0 || n + 1 == steps {
            record(&mut series, &xi, t1, dissipation, integrator);
        }
    }
    if !run.keep_fields {
        series.fields.push(xi);
    }
    Ok(series)
}

#[cfg(test)]
mod tests;
