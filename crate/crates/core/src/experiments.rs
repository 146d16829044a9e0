//! Deterministic reference solver, the small-data decay envelopes and the
//! Monte-Carlo experiments comparing the noisy system with its viscous
//! limit `d xi + L_u xi dt = nu_1 Delta xi dt`, `nu_1 = 1 + 3 nu / 5`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::sde::{simulate, simulate_with, Integrator, Model, RunOptions, StepOptions, TimeSeries};
use crate::spectral::{ModeSet, SpectralField};
use crate::sum::NeumaierSum;

/// Galerkin solution of the deterministic equation with viscosity `nu1`:
/// the `theta = 0`, `f_R = 1` path of the stochastic integrator.
pub fn deterministic_solve(
    nu1: f64,
    xi0: &SpectralField,
    horizon: f64,
    step: StepOptions,
    output_every: usize,
    nonlinear: bool,
) -> Result<TimeSeries> {
    if !(nu1 > 0.0) {
        return Err(Error::domain(format!(
            "viscosity must be positive, got {nu1}"
        )));
    }
    let model = Model {
        nonlinear,
        ..Model::deterministic(nu1)
    };
    let run = RunOptions {
        step,
        horizon,
        output_every,
        seed: 0,
        stream: 0,
        track_brackets: false,
        keep_fields: true,
    };
    simulate(&model, xi0, &run)
}

/// Closed-form norm envelopes of the small-data decay estimates for
/// `y' <= -4 pi^2 nu_1 y + (C_0^4 / nu_1^3) y^3`, `y = ||xi||^2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayEnvelopes {
    pub c0: f64,
    pub nu1: f64,
    pub norm0: f64,
}

impl DecayEnvelopes {
    pub fn new(c0: f64, nu1: f64, norm0: f64) -> Self {
        Self { c0, nu1, norm0 }
    }

    fn a(&self) -> f64 {
        self.c0.powi(4) / (4.0 * PI * PI * self.nu1.powi(4))
    }

    /// The global bound needs `nu_1 > C_0 ||xi_0|| / sqrt(2 pi)`.
    pub fn global_applicable(&self) -> bool {
        self.nu1 > self.c0 * self.norm0 / (2.0 * PI).sqrt()
    }

    /// `[(||xi_0||^-4 - C_0^4/(4 pi^2 nu_1^4)) e^{8 pi^2 nu_1 t} + C_0^4/(4 pi^2 nu_1^4)]^{-1/4}`,
    /// infinite where the bracket is not positive.
    pub fn global(&self, t: f64) -> f64 {
        let a = self.a();
        let b = (self.norm0.powi(-4) - a) * (8.0 * PI * PI * self.nu1 * t).exp() + a;
        if b > 0.0 {
            b.powf(-0.25)
        } else {
            f64::INFINITY
        }
    }

    /// `sqrt(2 pi) nu_1 / C_0`, the uniform bound on [`Self::global`].
    pub fn global_ceiling(&self) -> f64 {
        (2.0 * PI).sqrt() * self.nu1 / self.c0
    }

    /// `(2 pi^2)^{1/4} nu_1 / C_0`; at `nu_1 = 1` this is `r_0`.
    pub fn small_data_radius(&self) -> f64 {
        small_data_radius(self.c0, self.nu1)
    }

    pub fn small_data_applicable(&self) -> bool {
        self.norm0 <= self.small_data_radius()
    }

    /// `2^{1/4} ||xi_0|| e^{-2 pi^2 nu_1 t}`.
    pub fn small_data(&self, t: f64) -> f64 {
        2f64.powf(0.25) * self.norm0 * (-2.0 * PI * PI * self.nu1 * t).exp()
    }
}

pub fn small_data_radius(c0: f64, nu1: f64) -> f64 {
    (2.0 * PI * PI).powf(0.25) * nu1 / c0
}

/// Parameter thresholds of the long-time statements as functions of `C_0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Thresholds {
    pub c0: f64,
    pub r0: f64,
    /// `r_0 = (2 pi^2)^{1/4} / C_0`.
    pub small_data_radius: f64,
    /// `(5/3) [C_0 R_0 / (2 pi^2)^{1/4} - 1]`, the noise strength that makes
    /// the whole ball `B(R_0)` small data for the limit equation.
    pub nu_lower_bound: f64,
    /// `(5/3) (C_0 R_0 / sqrt(2 pi) - 1)`, the global-solvability threshold.
    pub nu_global_bound: f64,
    /// `sqrt(2 pi) (1 + 3 nu / 5) / C_0` for the configured `nu`.
    pub cutoff_lower_bound: f64,
    /// Largest admissible `epsilon`, `(2 pi^2)^{1/4} / (2 C_0)`.
    pub epsilon_max: f64,
}

impl Thresholds {
    pub fn new(c0: f64, r0: f64, nu: f64) -> Self {
        let q = (2.0 * PI * PI).powf(0.25);
        Self {
            c0,
            r0,
            small_data_radius: q / c0,
            nu_lower_bound: 5.0 / 3.0 * (c0 * r0 / q - 1.0),
            nu_global_bound: 5.0 / 3.0 * (c0 * r0 / (2.0 * PI).sqrt() - 1.0),
            cutoff_lower_bound: (2.0 * PI).sqrt() * (1.0 + 0.6 * nu) / c0,
            epsilon_max: q / (2.0 * c0),
        }
    }

    /// `2 R_0 e^{-2 pi^2 nu_1 (T - 1)}`, which must not exceed `epsilon`.
    pub fn horizon_condition(&self, nu1: f64, horizon: f64) -> f64 {
        2.0 * self.r0 * (-2.0 * PI * PI * nu1 * (horizon - 1.0)).exp()
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct DecayRow {
    pub t: f64,
    pub norm: f64,
    pub global_envelope: f64,
    pub small_data_envelope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub envelopes: DecayEnvelopes,
    pub rows: Vec<DecayRow>,
    /// `min_t (envelope - ||xi_t||)` for each envelope.
    pub global_margin: f64,
    pub small_data_margin: f64,
    /// Output-time energies never increase.
    pub energy_monotone: bool,
    pub passed: bool,
}

/// Runs the deterministic solver and compares `||xi_t||` with both
/// envelopes at every output time.
pub fn decay_check(
    xi0: &SpectralField,
    nu1: f64,
    c0: f64,
    horizon: f64,
    step: StepOptions,
    output_every: usize,
) -> Result<DecayReport> {
    let env = DecayEnvelopes::new(c0, nu1, xi0.norm());
    let series = deterministic_solve(nu1, xi0, horizon, step, output_every, true)?;
    let rows: Vec<DecayRow> = series
        .rows
        .iter()
        .map(|r| DecayRow {
            t: r.t,
            norm: r.energy.sqrt(),
            global_envelope: env.global(r.t),
            small_data_envelope: env.small_data(r.t),
        })
        .collect();
    let margin = |f: fn(&DecayRow) -> f64| {
        rows.iter()
            .map(|r| f(r) - r.norm)
            .fold(f64::INFINITY, f64::min)
    };
    let global_margin = margin(|r| r.global_envelope);
    let small_data_margin = margin(|r| r.small_data_envelope);
    let energy_monotone = series.rows.windows(2).all(|w| w[1].energy <= w[0].energy);
    let passed = env.small_data_applicable()
        && env.global_applicable()
        && small_data_margin >= 0.0
        && global_margin >= 0.0;
    Ok(DecayReport {
        envelopes: env,
        rows,
        global_margin,
        small_data_margin,
        energy_monotone,
        passed,
    })
}

/// Seeded band-limited real fields, each rescaled to `||xi|| = norm`.
pub fn initial_family(
    modes: &std::sync::Arc<ModeSet>,
    count: usize,
    band: u32,
    norm: f64,
    seed: u64,
) -> Vec<SpectralField> {
    (0..count)
        .map(|j| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let f = SpectralField::random_real(modes, &mut rng, band, |n| 1.0 / n as f64);
            f.scale(norm / f.norm())
        })
        .collect()
}

/// `(||a - b||_{L^2(0,T;H)}, sup_t ||a_t - b_t||_{-delta})` over matching
/// output grids, the time integral by the trapezoid rule.
pub fn trajectory_distances(a: &TimeSeries, b: &TimeSeries, delta: f64) -> Result<(f64, f64)> {
    if a.fields.len() != b.fields.len() || a.rows.len() != a.fields.len() {
        return Err(Error::Truncation(
            "trajectories need fields on the same output grid".into(),
        ));
    }
    let mut sq = Vec::with_capacity(a.fields.len());
    let mut sup = 0.0f64;
    for (i, (x, y)) in a.fields.iter().zip(&b.fields).enumerate() {
        if a.rows[i].t != b.rows[i].t {
            return Err(Error::Truncation("output times differ".into()));
        }
        let d = x.sub(y)?;
        sq.push(d.norm_sq());
        sup = sup.max(d.sobolev_norm(-delta));
    }
    let times: Vec<f64> = a.rows.iter().map(|r| r.t).collect();
    Ok((trapezoid(&times, &sq).sqrt(), sup))
}

pub fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2)
        .zip(f.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .collect::<NeumaierSum>()
        .value()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Percentile bootstrap interval of the median.
pub fn bootstrap_median_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; values.len()];
    let mut medians: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.gen_range(0..values.len())];
            }
            median(&buf)
        })
        .collect();
    medians.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    (quantile(&medians, tail), quantile(&medians, 1.0 - tail))
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SampleRecord {
    pub n: u32,
    pub sample: usize,
    pub initial: usize,
    pub seed: u64,
    pub stream: u64,
    pub l2_distance: Option<f64>,
    pub sup_distance: Option<f64>,
    /// First time with `||xi||_{-delta} > R`.
    pub exit_time: Option<f64>,
    pub failure: Option<String>,
}

impl SampleRecord {
    /// `tau_R^N >= T`: no exit and no failure.
    pub fn survived(&self) -> bool {
        self.exit_time.is_none() && self.failure.is_none()
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LadderStats {
    pub n: u32,
    pub completed: usize,
    pub failures: usize,
    pub l2_quantiles: [f64; 5],
    pub sup_quantiles: [f64; 5],
    pub l2_median_ci: (f64, f64),
    pub stopping_fraction: f64,
}

fn ladder_stats(n: u32, records: &[SampleRecord], seed: u64) -> LadderStats {
    let mine: Vec<&SampleRecord> = records.iter().filter(|r| r.n == n).collect();
    let sorted = |f: fn(&SampleRecord) -> Option<f64>| {
        let mut v: Vec<f64> = mine.iter().filter_map(|r| f(r)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let l2 = sorted(|r| r.l2_distance);
    let sup = sorted(|r| r.sup_distance);
    LadderStats {
        n,
        completed: l2.len(),
        failures: mine.iter().filter(|r| r.failure.is_some()).count(),
        l2_quantiles: QUANTILE_LEVELS.map(|q| quantile(&l2, q)),
        sup_quantiles: QUANTILE_LEVELS.map(|q| quantile(&sup, q)),
        l2_median_ci: bootstrap_median_ci(&l2, 1000, 0.95, seed ^ u64::from(n)),
        stopping_fraction: mine.iter().filter(|r| r.survived()).count() as f64
            / mine.len().max(1) as f64,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub nu1: f64,
    pub thresholds: Thresholds,
    pub initial_norms: Vec<f64>,
    pub records: Vec<SampleRecord>,
    pub stats: Vec<LadderStats>,
}

impl ScalingReport {
    pub fn stats_for(&self, n: u32) -> Option<&LadderStats> {
        self.stats.iter().find(|s| s.n == n)
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))
}

fn initial_data(cfg: &SimConfig, modes: &std::sync::Arc<ModeSet>) -> Vec<SpectralField> {
    let norm = cfg.initial.norm_fraction * cfg.r0;
    initial_family(
        modes,
        cfg.initial.family,
        cfg.initial.band,
        norm,
        cfg.initial.seed,
    )
}

/// References `xi(xi_0)` of the viscous limit for every initial field.
fn references(cfg: &SimConfig, family: &[SpectralField], horizon: f64) -> Result<Vec<TimeSeries>> {
    family
        .par_iter()
        .map(|xi0| {
            deterministic_solve(
                cfg.nu1(),
                xi0,
                horizon,
                cfg.step_options(),
                cfg.output_every,
                cfg.nonlinear,
            )
        })
        .collect()
}

struct PathResult {
    record: SampleRecord,
    series: Option<TimeSeries>,
}

fn run_ladder(
    cfg: &SimConfig,
    family: &[SpectralField],
    refs: &[TimeSeries],
    horizon: f64,
) -> Result<Vec<PathResult>> {
    let modes = family[0].modes();
    let mut out = Vec::new();
    for &n in &cfg.ladder {
        let model = cfg.stochastic_model(&cfg.theta_for(n))?;
        let template = Integrator::new(modes, &model, cfg.step_options())?;
        let mut batch: Vec<PathResult> = (0..cfg.samples)
            .into_par_iter()
            .map(|s| {
                let ic = s % family.len();
                let run = cfg.run_options(horizon, s as u64);
                let mut integ = template.clone();
                let mut record = SampleRecord {
                    n,
                    sample: s,
                    initial: ic,
                    seed: run.seed,
                    stream: run.stream,
                    l2_distance: None,
                    sup_distance: None,
                    exit_time: None,
                    failure: None,
                };
                let series = match simulate_with(
                    &mut integ,
                    model.cutoff_radius,
                    model.delta,
                    &family[ic],
                    &run,
                ) {
                    Ok(series) => series,
                    Err(e) => {
                        record.failure = Some(e.to_string());
                        return PathResult {
                            record,
                            series: None,
                        };
                    }
                };
                record.exit_time = series.exit_time;
                match trajectory_distances(&series, &refs[ic], cfg.delta) {
                    Ok((l2, sup)) => {
                        record.l2_distance = Some(l2);
                        record.sup_distance = Some(sup);
                    }
                    Err(e) => record.failure = Some(e.to_string()),
                }
                PathResult {
                    record,
                    series: Some(series),
                }
            })
            .collect();
        batch.sort_by_key(|p| p.record.sample);
        out.extend(batch);
    }
    Ok(out)
}

/// Distances between the noisy cut-off system with weights `theta^N` and
/// the viscous limit from the same initial field, for every `N` of the
/// ladder and every sample.
pub fn scaling_limit_experiment(cfg: &SimConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let modes = ModeSet::new(cfg.max_mode);
    let family = initial_data(cfg, &modes);
    pool(cfg.threads)?.install(|| {
        let refs = references(cfg, &family, cfg.horizon)?;
        let results = run_ladder(cfg, &family, &refs, cfg.horizon)?;
        let records: Vec<SampleRecord> = results.into_iter().map(|p| p.record).collect();
        Ok(ScalingReport {
            nu1: cfg.nu1(),
            thresholds: Thresholds::new(cfg.c0, cfg.r0, cfg.nu),
            initial_norms: family.iter().map(|f| f.norm()).collect(),
            stats: cfg
                .ladder
                .iter()
                .map(|&n| ladder_stats(n, &records, cfg.seed))
                .collect(),
            records,
        })
    })
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ContinuationRecord {
    pub n: u32,
    pub sample: usize,
    pub survived: bool,
    /// First output time in `[T - 1, T]` with `||xi^N_t|| <= r_0`.
    pub small_time: Option<f64>,
    pub small_norm: Option<f64>,
    /// Continuation without cut-off stayed finite.
    pub continued: bool,
    /// `min (2^{1/4} ||xi(t*)|| e^{-2 pi^2 (t - t*)} - ||xi_t||)` on the continuation.
    pub envelope_margin: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LongHorizonReport {
    pub scaling: ScalingReport,
    /// `2 R_0 e^{-2 pi^2 nu_1 (T - 1)}`.
    pub horizon_condition: f64,
    /// `max_ic ||xi||_{L^2(T-1,T;H)}` of the reference.
    pub reference_tail_norm: f64,
    pub continuations: Vec<ContinuationRecord>,
}

impl LongHorizonReport {
    /// Fraction of surviving paths of shell `n` that reach small data in
    /// `[T - 1, T]` and continue within the envelope.
    pub fn continuation_fraction(&self, n: u32) -> f64 {
        let mine: Vec<_> = self
            .continuations
            .iter()
            .filter(|c| c.n == n && c.survived)
            .collect();
        let ok = mine
            .iter()
            .filter(|c| c.continued && c.envelope_margin.is_some_and(|m| m >= 0.0))
            .count();
        ok as f64 / mine.len().max(1) as f64
    }
}

fn tail_norm(series: &TimeSeries, from: f64) -> f64 {
    let (t, e): (Vec<f64>, Vec<f64>) = series
        .rows
        .iter()
        .filter(|r| r.t >= from - 1e-12)
        .map(|r| (r.t, r.energy))
        .unzip();
    trapezoid(&t, &e).sqrt()
}

/// Runs the scaling experiment to a horizon `T > 1`, then restarts every
/// surviving path from a small-norm time in `[T - 1, T]` without cut-off.
pub fn long_horizon_experiment(cfg: &SimConfig) -> Result<LongHorizonReport> {
    cfg.validate()?;
    let modes = ModeSet::new(cfg.max_mode);
    let family = initial_data(cfg, &modes);
    let thresholds = Thresholds::new(cfg.c0, cfg.r0, cfg.nu);
    let t = cfg.long_horizon;
    pool(cfg.threads)?.install(|| {
        let refs = references(cfg, &family, t)?;
        let reference_tail_norm = refs
            .iter()
            .map(|r| tail_norm(r, t - 1.0))
            .fold(0.0, f64::max);
        let results = run_ladder(cfg, &family, &refs, t)?;
        let mut continuations: Vec<ContinuationRecord> = results
            .par_iter()
            .map(|p| continue_path(cfg, p, &thresholds))
            .collect::<Result<_>>()?;
        continuations.sort_by_key(|c| (cfg.ladder.iter().position(|&n| n == c.n), c.sample));
        let records: Vec<SampleRecord> = results.into_iter().map(|p| p.record).collect();
        let scaling = ScalingReport {
            nu1: cfg.nu1(),
            thresholds,
            initial_norms: family.iter().map(|f| f.norm()).collect(),
            stats: cfg
                .ladder
                .iter()
                .map(|&n| ladder_stats(n, &records, cfg.seed))
                .collect(),
            records,
        };
        Ok(LongHorizonReport {
            scaling,
            horizon_condition: thresholds.horizon_condition(cfg.nu1(), t),
            reference_tail_norm,
            continuations,
        })
    })
}

fn continue_path(cfg: &SimConfig, p: &PathResult, th: &Thresholds) -> Result<ContinuationRecord> {
    let mut rec = ContinuationRecord {
        n: p.record.n,
        sample: p.record.sample,
        survived: p.record.survived(),
        small_time: None,
        small_norm: None,
        continued: false,
        envelope_margin: None,
        failure: p.record.failure.clone(),
    };
    let Some(series) = p.series.as_ref().filter(|_| rec.survived) else {
        return Ok(rec);
    };
    let t = cfg.long_horizon;
    let hit = series
        .rows
        .iter()
        .zip(&series.fields)
        .find(|(r, _)| r.t >= t - 1.0 - 1e-12 && r.energy.sqrt() <= th.small_data_radius);
    let Some((row, start)) = hit else {
        return Ok(rec);
    };
    rec.small_time = Some(row.t);
    rec.small_norm = Some(start.norm());
    let model = Model {
        cutoff_radius: None,
        ..cfg.stochastic_model(&cfg.theta_for(p.record.n))?
    };
    let mut run = cfg.run_options(cfg.extra_horizon, p.record.stream | (1 << 32));
    run.keep_fields = false;
    match simulate(&model, start, &run) {
        Ok(cont) => {
            let env = DecayEnvelopes::new(cfg.c0, 1.0, start.norm());
            rec.continued = true;
            rec.envelope_margin = Some(
                cont.rows
                    .iter()
                    .map(|r| env.small_data(r.t) - r.energy.sqrt())
                    .fold(f64::INFINITY, f64::min),
            );
        }
        Err(e) => rec.failure = Some(e.to_string()),
    }
    Ok(rec)
}
