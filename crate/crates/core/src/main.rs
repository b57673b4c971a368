use clap::{Args, Parser, Subcommand};
use micropolar::harness::commands::{initdata, linear, sample_times, simulate};
use micropolar::harness::config::ExperimentConfig;
use micropolar::harness::report::report_dir;
use micropolar::harness::scaling::{run_scaling, write_scaling_csv};
use micropolar::harness::verify::{run_verify, Fault};
use micropolar::harness::{commands::write_json_file, exit_code};
use micropolar::Result;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Micropolar fluid solver and verification harness.
#[derive(Parser)]
#[command(name = "mps", version)]
struct Cli {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct DatumArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Grid points, e.g. 64x64x64.
    #[arg(long, value_parser = parse_dims)]
    grid: Option<[usize; 3]>,
    /// Box lengths, e.g. 62.8,62.8,201.
    #[arg(long = "box", value_parser = parse_box)]
    lengths: Option<[f64; 3]>,
    /// Output directory (overrides MPS_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the datum and report support, largeness and condition terms.
    Initdata {
        #[command(flatten)]
        datum: DatumArgs,
        /// Datum amplitude: paper, unit or a number.
        #[arg(long)]
        amp: Option<String>,
        /// Constant in the smallness condition.
        #[arg(long = "const-C")]
        const_c: Option<f64>,
    },
    /// Decay certificate of the Green matrix and the smallness series.
    Linear {
        #[command(flatten)]
        datum: DatumArgs,
        /// Last time of the smallness series.
        #[arg(long = "t-max", default_value_t = 5.0)]
        t_max: f64,
        #[arg(long = "t-samples", default_value_t = 11)]
        t_samples: usize,
    },
    /// Evolve the full, perturbation or both systems.
    Simulate {
        #[command(flatten)]
        datum: DatumArgs,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        #[arg(long = "eta-mult")]
        eta_mult: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Scale of the random perturbation (v0, c0).
        #[arg(long)]
        amplitude: Option<f64>,
        /// Comma-separated coarser steps calibrating the oracle envelope.
        #[arg(long, value_delimiter = ',')]
        calibrate: Option<Vec<f64>>,
        #[arg(long)]
        snapshots: bool,
    },
    /// Run every invariant check and print a machine-readable summary.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject: Option<Fault>,
    },
    /// Sweep eps and fit the scaling exponents.
    Scaling {
        /// Comma-separated eps values.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a finished run directory.
    Report { dir: PathBuf },
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> std::result::Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(['x', ',']).map(str::trim).collect();
    match parts.as_slice() {
        [a, b, c] => {
            let p = |v: &str| v.parse::<T>().map_err(|_| format!("bad value {v:?} in {s:?}"));
            Ok([p(a)?, p(b)?, p(c)?])
        }
        _ => Err(format!("expected three values, got {s:?}")),
    }
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    parse_triple(s)
}

fn parse_box(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_triple(s)
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
}

fn apply(config: &mut ExperimentConfig, d: &DatumArgs) {
    if let Some(eps) = d.eps {
        config.datum.eps = eps;
    }
    if let Some(p) = d.p {
        config.datum.p = p;
    }
    if d.grid.is_some() {
        config.grid.dims = d.grid;
    }
    if d.lengths.is_some() {
        config.grid.lengths = d.lengths;
    }
}

fn verdict(passed: bool) -> ExitCode {
    ExitCode::from(if passed { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = load(cli.config.as_deref())?;
    match cli.command {
        Command::Initdata { datum: d, amp, const_c } => {
            apply(&mut config, &d);
            if let Some(amp) = amp {
                config.datum.amplitude = amp;
            }
            if let Some(c) = const_c {
                config.datum.gronwall_c = c;
            }
            config.validate()?;
            let out = config.output_dir(d.out.as_deref())?;
            let r = initdata(&config, &out)?;
            println!(
                "eps {} amplitude {:.6e} modes {} outside support {} |u0|_inf {:.6e} |omega0_hat|_1 {:.6e} condition lhs {:.6e}",
                r.eps, r.amplitude, r.nonzero_modes, r.support_violations, r.largeness.u0_linf, r.largeness.omega_hat_l1, r.condition.lhs
            );
            Ok(verdict(r.passed))
        }
        Command::Linear { datum: d, t_max, t_samples } => {
            apply(&mut config, &d);
            config.validate()?;
            let times = sample_times(t_max, t_samples)?;
            let out = config.output_dir(d.out.as_deref())?;
            let r = linear(&config, &out, &times)?;
            println!(
                "decay certificate {} (max ratio {:.4}, eigen slack {:.3e}); smallness rate {:.4} vs slowest {:.4}",
                if r.certificate.holds { "holds" } else { "FAILS" },
                r.certificate.max_ratio,
                r.certificate.min_eigen_slack,
                r.smallness.fitted_rate,
                r.smallness.slowest_rate
            );
            Ok(verdict(r.passed))
        }
        Command::Simulate { datum, mode, dt, t_end, eta_mult, stride, seed, amplitude, calibrate, snapshots } => {
            apply(&mut config, &datum);
            let run = &mut config.run;
            if let Some(m) = mode {
                run.mode = m;
            }
            macro_rules! set {
                ($($field:ident = $value:expr),*) => { $(if let Some(v) = $value { run.$field = v; })* };
            }
            set!(dt = dt, t_end = t_end, eta_mult = eta_mult, stride = stride, seed = seed, perturbation_amplitude = amplitude, calibration_dts = calibrate);
            run.snapshots |= snapshots;
            config.validate()?;
            let out = config.output_dir(datum.out.as_deref())?;
            let s = simulate(&config, &out)?;
            let opt = |v: Option<f64>| v.map_or("-".into(), |x: f64| format!("{x:.6e}"));
            println!(
                "{} steps; eta {} max monitor {} gamma {} blowup {} oracle diff {}",
                s.steps,
                opt(s.eta),
                opt(s.max_monitor),
                opt(s.gamma_time),
                opt(s.blowup_time),
                opt(s.max_oracle_diff)
            );
            Ok(verdict(s.passed))
        }
        Command::Verify { seed, out, inject } => {
            if let Some(seed) = seed {
                config.run.seed = seed;
            }
            let report = run_verify(&config, inject)?;
            let json = report.to_json();
            if let Some(dir) = out.or_else(|| std::env::var_os(micropolar::harness::config::OUT_ENV).map(PathBuf::from)) {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("verify.json"), &json)?;
            }
            print!("{json}");
            for c in report.failed() {
                eprintln!("FAILED {}: value {:?}, limit {}", c.name, c.value, c.limit);
            }
            Ok(verdict(report.passed))
        }
        Command::Scaling { eps, p, out } => {
            let eps = eps.unwrap_or_else(|| config.sweep.eps.clone());
            let p = p.unwrap_or(config.datum.p);
            let out = config.output_dir(out.as_deref())?;
            let report = run_scaling(&config, &eps, p)?;
            write_scaling_csv(&report, &out.join("scaling.csv"))?;
            write_json_file(&out.join("scaling.json"), &report)?;
            println!("{:>10} {:>12} {:>12} {:>12} {:>12}", "eps", "|a_hat|_p'", "pre-exp", "omega_hat_1", "lhs");
            for r in &report.rows {
                println!(
                    "{:>10.6} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e}",
                    r.eps, r.a_hat_dual, r.pre_exponential, r.omega_hat_l1, r.lhs
                );
            }
            for f in &report.fits {
                println!(
                    "slope {:?}: {:.4} (expected {:.4}, rel. error {:.3}, tolerance {}){}",
                    f.quantity,
                    f.slope,
                    f.expected,
                    f.relative_error,
                    f.tolerance,
                    if f.gating { "" } else { " [informational]" }
                );
            }
            println!("omega band {:.4}", report.omega_band);
            Ok(verdict(report.passed))
        }
        Command::Report { dir } => {
            let r = report_dir(&dir)?;
            print!("{}", r.render());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
