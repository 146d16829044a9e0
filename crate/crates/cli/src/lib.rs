//! Command-line front end: parses arguments, loads the run configuration,
//! dispatches to the experiment drivers and writes `report.json` plus CSV
//! tables into one directory per run.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use transport_noise::config::SimConfig;
use transport_noise::corrector::{
    advection_double_lie, advection_energy_j, basis_response_ratio, covariance_identity_defect,
    covariance_max_offdiag, dissipation_sum_of_squares, heuristic_quadratic_form, limit_defect_for,
    polarization_sum_error_for, s_theta_apply, s_theta_direct, Corrector,
};
use transport_noise::experiments::{
    decay_check, initial_family, loglog_slope, long_horizon_experiment, scaling_limit_experiment,
    small_data_radius, ScalingReport,
};
use transport_noise::lattice::{Lattice3, ThetaSpec};
use transport_noise::output::{
    fmt_f64, run_directory, series_table, Check, Metadata, Report, Table,
};
use transport_noise::sde::{simulate, RunOptions};
use transport_noise::{Error, ModeSet};

/// Environment variable overriding the output root.
pub const OUTPUT_ROOT_ENV: &str = "TNOISE_OUTPUT_ROOT";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "tnoise",
    version,
    about = "Transport-noise Navier-Stokes laboratory"
)]
pub struct Cli {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted-path override `key=value`, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output root; beats the environment variable and `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Shell parameters: `corrector.ladder` for the corrector commands'
    /// ladder, `ladder` for the experiments, `theta.n` for `simulate`.
    #[arg(long = "N", global = true, value_delimiter = ',')]
    pub n: Vec<u32>,
    /// Mode `l` as `l1,l2,l3` (sets `corrector.l`).
    #[arg(
        long = "l",
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub l: Vec<i32>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Covariance identity, corrector oracle, dissipativity and advection diagnostics.
    VerifyIdentities,
    /// High-mode limit of the corrector over a ladder of shells.
    CorrectorLimit,
    /// Sample paths of the noisy cut-off system.
    Simulate,
    /// Distances between noisy paths and the viscous limit over the shell ladder.
    ScalingLimit,
    /// Small-data decay envelopes of the deterministic limit.
    Decay,
    /// Long-horizon continuation from small data.
    LongHorizon,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyIdentities => "verify-identities",
            Command::CorrectorLimit => "corrector-limit",
            Command::Simulate => "simulate",
            Command::ScalingLimit => "scaling-limit",
            Command::Decay => "decay",
            Command::LongHorizon => "long-horizon",
        }
    }
}

/// Everything a subcommand produces besides metadata.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<(String, Table)>,
    pub results: Value,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl Cli {
    /// Config overrides implied by the convenience flags, applied after `--set`.
    fn flag_overrides(&self) -> Vec<String> {
        let mut o = self.overrides.clone();
        if !self.n.is_empty() {
            match self.command {
                Command::VerifyIdentities | Command::Simulate => {
                    o.push(format!("theta.n={}", self.n[0]))
                }
                Command::CorrectorLimit => o.push(format!("corrector.ladder=[{}]", join(&self.n))),
                _ => o.push(format!("ladder=[{}]", join(&self.n))),
            }
        }
        if !self.l.is_empty() {
            o.push(format!("corrector.l=[{}]", join(&self.l)));
        }
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(s) = self.samples {
            o.push(format!("samples={s}"));
        }
        o
    }

    pub fn load_config(&self) -> Result<SimConfig, Error> {
        if !self.l.is_empty() && self.l.len() != 3 {
            return Err(Error::Config(format!(
                "l: expected three components, got {}",
                self.l.len()
            )));
        }
        let mut overrides = self.flag_overrides();
        let root = self
            .out
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from));
        if let Some(root) = root {
            let s = root
                .to_str()
                .ok_or_else(|| Error::Config("out: path is not valid UTF-8".into()))?;
            overrides.push(format!("output.dir={}", toml_string(s)));
        }
        SimConfig::load(self.config.as_deref(), &overrides)
    }
}

fn toml_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match cli.load_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match execute(cli.command, &cfg) {
        Ok((dir, passed)) => {
            println!(
                "{} {} -> {}",
                if passed { "PASS" } else { "FAIL" },
                cli.command.name(),
                dir.display()
            );
            if passed {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Runs `command` and writes its artifacts; returns the run directory and
/// whether every check passed.
pub fn execute(command: Command, cfg: &SimConfig) -> Result<(PathBuf, bool), Error> {
    let outcome = match command {
        Command::VerifyIdentities => verify_identities(cfg)?,
        Command::CorrectorLimit => corrector_limit(cfg)?,
        Command::Simulate => simulate_paths(cfg)?,
        Command::ScalingLimit => scaling_limit(cfg)?,
        Command::Decay => decay(cfg)?,
        Command::LongHorizon => long_horizon(cfg)?,
    };
    let hash = cfg.hash();
    let dir = run_directory(&cfg.output.dir, command.name(), &hash)?;
    for (name, table) in &outcome.tables {
        table.write(&dir.join(name))?;
    }
    let created = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let meta = Metadata::new(command.name(), &hash, cfg.seed, created);
    for c in &outcome.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let report = Report::new(meta, cfg.canonical(), outcome.checks, outcome.results);
    report.write(&dir)?;
    Ok((dir, report.passed))
}

fn l_label(l: Lattice3) -> String {
    format!("{} {} {}", l[0], l[1], l[2])
}

fn corrector_row(
    table: &mut Table,
    spec: &ThetaSpec,
    nu: f64,
    l: Lattice3,
    beta: usize,
) -> Result<Value, Error> {
    let theta = spec.build()?;
    let n = spec.n();
    // the normalized defect does not depend on nu
    let nu = if nu > 0.0 { nu } else { 1.0 };
    let defect = limit_defect_for(&theta, nu, l, beta)?;
    let p = polarization_sum_error_for(&theta, l, beta)?;
    let off = covariance_max_offdiag(&theta);
    table.push(vec![
        n.to_string(),
        fmt_f64(spec.gamma()),
        l_label(l),
        beta.to_string(),
        fmt_f64(defect),
        fmt_f64(p.total),
        fmt_f64(off),
    ]);
    Ok(
        json!({ "n": n, "beta": beta, "defect": defect, "polarization_sum": p, "covariance_max_offdiag": off }),
    )
}

const CORRECTOR_COLUMNS: [&str; 7] = [
    "N",
    "gamma",
    "l",
    "beta",
    "defect",
    "polarization_sum_error",
    "covariance_max_offdiag",
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn verify_identities(cfg: &SimConfig) -> Result<Outcome, Error> {
    let theta = cfg.theta.build()?;
    let l2 = theta.l2_sq();
    let nu = cfg.nu;
    let mut checks = vec![
        Check::le(
            "covariance_identity",
            covariance_identity_defect(&theta),
            1e-12 * l2,
        ),
        Check::le(
            "covariance_offdiag",
            covariance_max_offdiag(&theta),
            1e-13 * l2,
        ),
    ];
    let modes = ModeSet::new(cfg.corrector.max_mode);
    let fields = initial_family(
        &modes,
        cfg.corrector.fields,
        cfg.corrector.max_mode,
        1.0,
        cfg.seed,
    );
    let (mut oracle, mut dissip, mut sym, mut sos, mut jgap, mut lie) =
        (0.0f64, f64::MIN, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut h1_ratio = 0.0;
    for (j, xi) in fields.iter().enumerate() {
        let fast = s_theta_apply(&theta, nu, xi)?;
        let direct = s_theta_direct(&theta, nu, xi, true)?;
        oracle = oracle.max(direct.sub(&fast)?.norm() / fast.norm());
        let q = xi.inner(&fast)?.re;
        dissip = dissip.max(q / xi.norm_sq());
        let w = &fields[(j + 1) % fields.len()];
        let sw = s_theta_apply(&theta, nu, w)?;
        sym = sym.max((fast.inner(w)? - xi.inner(&sw)?).norm() / (xi.norm() * w.norm()));
        sos = sos.max(rel(2.0 * q, dissipation_sum_of_squares(&theta, nu, xi)?));
        let jb = advection_energy_j(&theta, nu, xi)?;
        jgap = jgap.max(jb.relative_gap());
        h1_ratio = jb.h1_over_l2;
        if j == 0 {
            let target = xi.laplacian().scale(2.0 / 3.0 * l2);
            lie = advection_double_lie(&theta, xi)?.sub(&target)?.norm() / target.norm();
        }
    }
    checks.push(Check::le("corrector_oracle", oracle, 1e-10));
    checks.push(Check::le("dissipativity", dissip, 0.0));
    checks.push(Check::le("symmetry", sym, 1e-11));
    checks.push(Check::le("sum_of_squares", sos, 1e-10));
    let op = Corrector::new(&theta, if nu > 0.0 { nu } else { 1.0 }, &modes)?;
    checks.push(Check::le("basis_response", basis_response_ratio(&op), 10.0));
    checks.push(Check::le("advection_balance", jgap, 1e-10));
    checks.push(Check::le("double_lie", lie, 1e-12));
    if let ThetaSpec::Shell { n, .. } = cfg.theta {
        let n_sq = f64::from(n).powi(2);
        checks.push(Check::ge("h1_over_l2", h1_ratio, n_sq));
    }
    let mut identities = Table::new(&["check", "value", "bound", "passed"]);
    for c in &checks {
        identities.push(vec![
            c.name.clone(),
            c.value.map_or("".into(), fmt_f64),
            c.bound.map_or("".into(), fmt_f64),
            c.passed.to_string(),
        ]);
    }
    let mut corrector = Table::new(&CORRECTOR_COLUMNS);
    let mut rows = Vec::new();
    for beta in [1, 2] {
        rows.push(corrector_row(
            &mut corrector,
            &cfg.theta,
            nu,
            cfg.corrector.l,
            beta,
        )?);
    }
    Ok(Outcome {
        checks,
        tables: vec![
            ("identities.csv".into(), identities),
            ("corrector.csv".into(), corrector),
        ],
        results: json!({ "theta_l2_sq": l2, "theta_norms": theta.norms(), "h1_over_l2": h1_ratio, "rows": rows }),
    })
}

fn corrector_limit(cfg: &SimConfig) -> Result<Outcome, Error> {
    let c = &cfg.corrector;
    let mut table = Table::new(&CORRECTOR_COLUMNS);
    let mut rows = Vec::new();
    let (mut defects, mut p54, mut ortho_ok) = (Vec::new(), Vec::new(), true);
    for &n in &c.ladder {
        let row = corrector_row(&mut table, &cfg.corrector_theta(n), cfg.nu, c.l, c.beta)?;
        defects.push(row["defect"].as_f64().unwrap_or(f64::NAN));
        let p = &row["polarization_sum"];
        let par = p["parallel"].as_f64().unwrap_or(f64::NAN);
        p54.push(p["total"].as_f64().unwrap_or(f64::NAN));
        let orth = p["other_polarization"]
            .as_f64()
            .unwrap_or(f64::NAN)
            .max(p["longitudinal"].as_f64().unwrap_or(f64::NAN));
        ortho_ok &= orth <= 10.0 * par;
        rows.push(row);
    }
    let ns: Vec<f64> = c.ladder.iter().map(|&n| f64::from(n)).collect();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let ratio_ok = |v: &[f64]| {
        c.ladder
            .windows(2)
            .zip(v.windows(2))
            .all(|(n, d)| n[0] < 8 || n[1] != 2 * n[0] || d[1] <= 0.7 * d[0])
    };
    let mut checks = vec![
        Check::flag(
            "defect_decreasing",
            decreasing(&defects),
            format!("defects {}", join(&defects)),
        ),
        Check::flag(
            "defect_ratio",
            ratio_ok(&defects),
            "defect(2N) <= 0.7 defect(N) for N >= 8",
        ),
        Check::flag(
            "polarization_sum_decreasing",
            decreasing(&p54),
            format!("errors {}", join(&p54)),
        ),
        Check::flag(
            "polarization_sum_ratio",
            ratio_ok(&p54),
            "error(2N) <= 0.7 error(N) for N >= 8",
        ),
        Check::flag(
            "polarization_sum_orthogonal",
            ortho_ok,
            "orthogonal components <= 10x parallel error",
        ),
    ];
    let slope = if ns.len() >= 2 {
        loglog_slope(&ns, &defects)
    } else {
        f64::NAN
    };
    if ns.len() >= 2 {
        checks.push(Check {
            name: "defect_slope".into(),
            passed: (slope + 1.0).abs() <= 0.3,
            value: Some(slope),
            bound: Some(0.3),
            detail: format!("log-log slope {} vs -1 +- 0.3", fmt_f64(slope)),
        });
    }
    let largest = *c.ladder.iter().max().expect("validated ladder");
    let heuristic = heuristic_quadratic_form(&cfg.corrector_theta(largest).build()?, c.l)?;
    if largest >= 32 {
        checks.push(Check::le("heuristic_form", rel(heuristic, -3.2), 0.05));
    }
    Ok(Outcome {
        checks,
        tables: vec![("corrector.csv".into(), table)],
        results: json!({ "rows": rows, "slope": slope, "heuristic_form": heuristic, "heuristic_n": largest }),
    })
}

fn simulate_paths(cfg: &SimConfig) -> Result<Outcome, Error> {
    let modes = ModeSet::new(cfg.max_mode);
    let family = initial_family(
        &modes,
        cfg.initial.family,
        cfg.initial.band,
        cfg.initial.norm_fraction * cfg.r0,
        cfg.initial.seed,
    );
    let model = cfg.stochastic_model(&cfg.theta)?;
    let mut tables = Vec::new();
    let mut summary = Table::new(&[
        "sample",
        "initial",
        "stream",
        "bracket_max",
        "apriori_constant",
        "apriori_excess",
        "max_taylor_terms",
        "exit_time",
        "final_energy",
    ]);
    let (mut bracket, mut excess) = (0.0f64, f64::NEG_INFINITY);
    for s in 0..cfg.samples {
        let ic = s % family.len();
        let run = RunOptions {
            track_brackets: true,
            keep_fields: false,
            ..cfg.run_options(cfg.horizon, s as u64)
        };
        let series = simulate(&model, &family[ic], &run)?;
        let e0 = series.rows[0].energy;
        bracket = bracket.max(series.bracket_max);
        excess = excess.max(series.apriori_excess() / e0);
        summary.push(vec![
            s.to_string(),
            ic.to_string(),
            run.stream.to_string(),
            fmt_f64(series.bracket_max),
            fmt_f64(series.apriori_constant),
            fmt_f64(series.apriori_excess()),
            series.max_taylor_terms.to_string(),
            series.exit_time.map_or("".into(), fmt_f64),
            fmt_f64(series.rows.last().map_or(f64::NAN, |r| r.energy)),
        ]);
        tables.push((format!("series_{s:04}.csv"), series_table(&series)));
    }
    tables.push(("summary.csv".into(), summary));
    let checks = vec![
        Check::le("transport_bracket", bracket, 1e-12),
        Check::le("apriori_bound", excess, 1e-10),
    ];
    Ok(Outcome {
        checks,
        tables,
        results: json!({ "bracket_max": bracket, "apriori_excess": excess }),
    })
}

fn ladder_tables(rep: &ScalingReport) -> Vec<(String, Table)> {
    let opt = |x: Option<f64>| x.map_or(String::new(), fmt_f64);
    let mut samples = Table::new(&[
        "N",
        "sample",
        "initial",
        "stream",
        "l2_distance",
        "sup_distance",
        "exit_time",
        "failure",
    ]);
    for r in &rep.records {
        samples.push(vec![
            r.n.to_string(),
            r.sample.to_string(),
            r.initial.to_string(),
            r.stream.to_string(),
            opt(r.l2_distance),
            opt(r.sup_distance),
            opt(r.exit_time),
            r.failure.clone().unwrap_or_default(),
        ]);
    }
    let mut stats = Table::new(&[
        "N",
        "completed",
        "failures",
        "l2_q10",
        "l2_q25",
        "l2_median",
        "l2_q75",
        "l2_q90",
        "l2_median_lo",
        "l2_median_hi",
        "sup_median",
        "stopping_fraction",
    ]);
    for s in &rep.stats {
        let mut row = vec![
            s.n.to_string(),
            s.completed.to_string(),
            s.failures.to_string(),
        ];
        row.extend(s.l2_quantiles.iter().map(|x| fmt_f64(*x)));
        row.extend([
            fmt_f64(s.l2_median_ci.0),
            fmt_f64(s.l2_median_ci.1),
            fmt_f64(s.sup_quantiles[2]),
            fmt_f64(s.stopping_fraction),
        ]);
        stats.push(row);
    }
    vec![("samples.csv".into(), samples), ("stats.csv".into(), stats)]
}

fn ladder_checks(rep: &ScalingReport) -> Vec<Check> {
    let mut checks = vec![Check::le(
        "sample_failures",
        rep.stats.iter().map(|s| s.failures).sum::<usize>() as f64,
        0.0,
    )];
    if let (Some(first), Some(last)) = (rep.stats.first(), rep.stats.last()) {
        if rep.stats.len() >= 2 {
            checks.push(Check::le(
                "median_distance_ratio",
                last.l2_quantiles[2] / first.l2_quantiles[2],
                0.75,
            ));
            let monotone = rep
                .stats
                .windows(2)
                .all(|w| w[1].stopping_fraction >= w[0].stopping_fraction);
            let fr: Vec<f64> = rep.stats.iter().map(|s| s.stopping_fraction).collect();
            checks.push(Check::flag(
                "stopping_fraction_monotone",
                monotone,
                format!("fractions {}", join(&fr)),
            ));
        }
    }
    checks
}

fn scaling_limit(cfg: &SimConfig) -> Result<Outcome, Error> {
    let rep = scaling_limit_experiment(cfg)?;
    Ok(Outcome {
        checks: ladder_checks(&rep),
        tables: ladder_tables(&rep),
        results: serde_json::to_value(&rep)?,
    })
}

fn decay(cfg: &SimConfig) -> Result<Outcome, Error> {
    let d = &cfg.decay;
    let modes = ModeSet::new(cfg.max_mode);
    let norm = d.norm_fraction * small_data_radius(cfg.c0, d.nu1);
    let xi0 = &initial_family(&modes, 1, cfg.initial.band, norm, cfg.initial.seed)[0];
    let rep = decay_check(
        xi0,
        d.nu1,
        cfg.c0,
        d.horizon,
        cfg.step_options(),
        cfg.output_every,
    )?;
    let mut table = Table::new(&["t", "norm", "global_envelope", "small_data_envelope"]);
    for r in &rep.rows {
        table.push(
            [r.t, r.norm, r.global_envelope, r.small_data_envelope]
                .iter()
                .map(|x| fmt_f64(*x))
                .collect(),
        );
    }
    let ceiling = rep.envelopes.global_ceiling();
    let checks = vec![
        Check::flag(
            "small_data_applicable",
            rep.envelopes.small_data_applicable(),
            format!("||xi_0|| = {}", fmt_f64(norm)),
        ),
        Check::flag(
            "global_applicable",
            rep.envelopes.global_applicable(),
            "nu_1 > C_0 ||xi_0|| / sqrt(2 pi)",
        ),
        Check::ge("small_data_margin", rep.small_data_margin, 0.0),
        Check::ge("global_margin", rep.global_margin, 0.0),
        Check::le(
            "global_ceiling",
            rep.rows
                .iter()
                .map(|r| r.global_envelope)
                .fold(0.0, f64::max),
            ceiling,
        ),
    ];
    Ok(Outcome {
        checks,
        tables: vec![("decay.csv".into(), table)],
        results: serde_json::to_value(&rep)?,
    })
}

fn long_horizon(cfg: &SimConfig) -> Result<Outcome, Error> {
    let rep = long_horizon_experiment(cfg)?;
    let th = &rep.scaling.thresholds;
    let mut checks = vec![
        Check::le("noise_strength", th.nu_lower_bound, cfg.nu),
        Check::le("horizon_condition", rep.horizon_condition, th.epsilon_max),
        Check::le(
            "reference_tail",
            rep.reference_tail_norm,
            rep.horizon_condition,
        ),
    ];
    for &n in &cfg.ladder {
        checks.push(Check::ge(
            &format!("continuation_N{n}"),
            rep.continuation_fraction(n),
            1.0,
        ));
    }
    let opt = |x: Option<f64>| x.map_or(String::new(), fmt_f64);
    let mut table = Table::new(&[
        "N",
        "sample",
        "survived",
        "small_time",
        "small_norm",
        "continued",
        "envelope_margin",
        "failure",
    ]);
    for c in &rep.continuations {
        table.push(vec![
            c.n.to_string(),
            c.sample.to_string(),
            c.survived.to_string(),
            opt(c.small_time),
            opt(c.small_norm),
            c.continued.to_string(),
            opt(c.envelope_margin),
            c.failure.clone().unwrap_or_default(),
        ]);
    }
    let mut tables = ladder_tables(&rep.scaling);
    tables.push(("continuation.csv".into(), table));
    Ok(Outcome {
        checks,
        tables,
        results: serde_json::to_value(&rep)?,
    })
}
