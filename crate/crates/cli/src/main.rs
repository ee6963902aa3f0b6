use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alq_cli::config::{parse_config, Config};
use alq_cli::output::{write_summary, write_trace_csv};
use alq_cli::presets::{preset_by_name, preset_scenarios};
use alq_core::lq::{are_residual, augment, integrate_riccati_differential, solve_lq_analytical};
use alq_core::sim::{
    reproduce_spectra, reproduce_table1, run_closed_loop, run_ideal_lq, IdealRun, NormKind,
};
use clap::{Args, Parser, Subcommand};

/// Adaptive linear-quadratic self-tuning regulator simulator.
#[derive(Parser)]
#[command(name = "alq", version, about, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a closed-loop scenario and emit trace/summary files
    Run(RunArgs),
    /// Reproduce the matrix-exponential truncation-error table as CSV
    Table1 {
        /// norm used for the error entries
        #[arg(long, default_value = "frobenius", value_parser = ["frobenius", "spectral"])]
        norm: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Report the benchmark Hamiltonian eigenvalue sets
    Spectra {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Cross-validate the closed-form Riccati solution against integration
    RiccatiCheck {
        #[arg(long, default_value = "sec4_1")]
        preset: String,
    },
    /// Simulate the fixed optimal law over a sweep of design horizons
    IdealSweep {
        #[arg(long, default_value = "sec4_1")]
        preset: String,
        /// comma-separated list of horizons
        #[arg(long, default_value = "0.5,1,3,7")]
        tau_inf: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// built-in scenario name
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// keep every k-th sample in the trace CSV
    #[arg(long)]
    decimate: Option<usize>,
    /// integration step override, seconds
    #[arg(long)]
    dt: Option<f64>,
    /// simulated duration override, seconds
    #[arg(long)]
    duration: Option<f64>,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERIC: u8 = 2;

fn numeric_error(e: &alq_core::Error) -> bool {
    use alq_core::Error::*;
    matches!(
        e,
        NonFinite { .. }
            | AnalyticSingular { .. }
            | Singular { .. }
            | Instability { .. }
            | EigenConvergence { .. }
    )
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn core_fail(e: alq_core::Error) -> ExitCode {
    let code = if numeric_error(&e) { EXIT_NUMERIC } else { EXIT_VALIDATION };
    fail(code, e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's rendering, but argument problems always exit 1
            let _ = e.print();
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Table1 { norm, out } => cmd_table1(&norm, &out),
        Command::Spectra { out } => cmd_spectra(&out),
        Command::RiccatiCheck { preset } => cmd_riccati_check(&preset),
        Command::IdealSweep { preset, tau_inf, out } => cmd_ideal_sweep(&preset, &tau_inf, &out),
    }
}

fn ensure_dir(dir: &Path) -> std::io::Result<()> {
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), None) => Config { preset: Some(name.clone()), ..Config::default() },
        (None, Some(path)) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_VALIDATION, format!("{}: {e}", path.display())),
            };
            match parse_config(&text) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_VALIDATION, e),
            }
        }
        _ => {
            return fail(
                EXIT_VALIDATION,
                "run needs exactly one of --preset or --config",
            )
        }
    };
    if let Some(dt) = args.dt {
        config.overrides.dt = Some(dt);
    }
    if let Some(duration) = args.duration {
        config.overrides.duration = Some(duration);
    }
    if let Some(decimate) = args.decimate {
        config.overrides.decimate = Some(decimate);
    }
    let (scenario, decimate) = match config.resolve() {
        Ok(v) => v,
        Err(e) => return fail(EXIT_VALIDATION, e),
    };
    let out_dir = args
        .out
        .or(config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = ensure_dir(&out_dir) {
        return fail(EXIT_VALIDATION, format!("{}: {e}", out_dir.display()));
    }

    let (trace, summary) = match run_closed_loop(&scenario) {
        Ok(v) => v,
        Err(e) => return core_fail(e),
    };
    if config.emit.trace {
        let path = out_dir.join("trace.csv");
        let mut file = match fs::File::create(&path) {
            Ok(f) => std::io::BufWriter::new(f),
            Err(e) => return fail(EXIT_VALIDATION, format!("{}: {e}", path.display())),
        };
        if let Err(e) = write_trace_csv(&trace, &mut file, decimate) {
            return fail(EXIT_VALIDATION, format!("{}: {e}", path.display()));
        }
        println!("trace: {}", path.display());
    }
    if config.emit.summary {
        let path = out_dir.join("summary.txt");
        let mut file = match fs::File::create(&path) {
            Ok(f) => f,
            Err(e) => return fail(EXIT_VALIDATION, format!("{}: {e}", path.display())),
        };
        if let Err(e) = write_summary(&summary, &mut file) {
            return fail(EXIT_VALIDATION, format!("{}: {e}", path.display()));
        }
        println!("summary: {}", path.display());
    }
    if config.emit.table1 {
        match render_table1(NormKind::Frobenius) {
            Ok(text) => {
                let path = out_dir.join("table1.csv");
                if let Err(e) = fs::write(&path, &text) {
                    return fail(EXIT_VALIDATION, format!("{}: {e}", path.display()));
                }
                println!("table1: {}", path.display());
            }
            Err(e) => return core_fail(e),
        }
    }
    if config.emit.spectra {
        match render_spectra() {
            Ok(text) => {
                let path = out_dir.join("spectra.txt");
                if let Err(e) = fs::write(&path, &text) {
                    return fail(EXIT_VALIDATION, format!("{}: {e}", path.display()));
                }
                println!("spectra: {}", path.display());
            }
            Err(e) => return core_fail(e),
        }
    }
    println!(
        "final_theta_err = {:.6e}, activation = {:?}, monotone_fraction = {:.4}",
        summary.final_theta_err, summary.activation_time, summary.monotone_fraction
    );
    if summary.overflow_flag {
        eprintln!("error: run overflowed; partial trace was written");
        return ExitCode::from(EXIT_NUMERIC);
    }
    ExitCode::SUCCESS
}

fn render_table1(kind: NormKind) -> Result<String, alq_core::Error> {
    let cells = reproduce_table1(kind)?;
    let mut text = String::from("tau_inf,p,eps_norm\n");
    for c in &cells {
        text.push_str(&format!("{},{},{:.16e}\n", c.tau_inf, c.p, c.eps_norm));
    }
    Ok(text)
}

fn render_spectra() -> Result<String, alq_core::Error> {
    let reports = reproduce_spectra()?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&format!("{}\n", r.label));
        for &(re, im) in &r.spectrum.eigenvalues {
            if im == 0.0 {
                text.push_str(&format!("  {re:+.6}\n"));
            } else {
                text.push_str(&format!("  {re:+.6} {im:+.6}i\n"));
            }
        }
    }
    Ok(text)
}

fn cmd_table1(norm: &str, out: &Path) -> ExitCode {
    let kind = if norm == "spectral" { NormKind::Spectral } else { NormKind::Frobenius };
    let text = match render_table1(kind) {
        Ok(t) => t,
        Err(e) => return core_fail(e),
    };
    if let Err(e) = ensure_dir(out) {
        return fail(EXIT_VALIDATION, format!("{}: {e}", out.display()));
    }
    let path = out.join("table1.csv");
    if let Err(e) = fs::write(&path, &text) {
        return fail(EXIT_VALIDATION, format!("{}: {e}", path.display()));
    }
    print!("{text}");
    println!("written: {}", path.display());
    ExitCode::SUCCESS
}

fn cmd_spectra(out: &Path) -> ExitCode {
    let text = match render_spectra() {
        Ok(t) => t,
        Err(e) => return core_fail(e),
    };
    if let Err(e) = ensure_dir(out) {
        return fail(EXIT_VALIDATION, format!("{}: {e}", out.display()));
    }
    let path = out.join("spectra.txt");
    if let Err(e) = fs::write(&path, &text) {
        return fail(EXIT_VALIDATION, format!("{}: {e}", path.display()));
    }
    print!("{text}");
    println!("written: {}", path.display());
    ExitCode::SUCCESS
}

fn cmd_riccati_check(preset: &str) -> ExitCode {
    let scenario = match preset_by_name(preset) {
        Some(s) => s,
        None => return fail(EXIT_VALIDATION, format!("unknown preset `{preset}`")),
    };
    let sys = match augment(&scenario.plant, scenario.vartheta) {
        Ok(s) => s,
        Err(e) => return core_fail(e),
    };
    let tau = scenario.pipeline.tau_inf;
    let sol = match solve_lq_analytical(&sys, &scenario.weights, tau) {
        Ok(s) => s,
        Err(e) => return core_fail(e),
    };
    let step = (tau / 1e4).min(1e-3);
    let same_horizon = match integrate_riccati_differential(&sys, &scenario.weights, tau, step) {
        Ok(r) => r,
        Err(e) => return core_fail(e),
    };
    let rel = sol.p.sub(&same_horizon.p_final).frobenius() / same_horizon.p_final.frobenius();
    println!("closed-form P(tau={tau}) vs integrated: relative difference {rel:.3e}");
    let steady = match integrate_riccati_differential(&sys, &scenario.weights, 60.0, step) {
        Ok(r) => r,
        Err(e) => return core_fail(e),
    };
    let resid = match are_residual(&sys, &scenario.weights, &steady.p_final) {
        Ok(r) => r,
        Err(e) => return core_fail(e),
    };
    println!(
        "steady-state residual of the algebraic equation: {resid:.3e} (converged: {})",
        steady.converged
    );
    let gap = sol.p.sub(&steady.p_final).frobenius() / steady.p_final.frobenius();
    println!("P(tau) vs steady state: relative gap {gap:.3e}");
    ExitCode::SUCCESS
}

fn cmd_ideal_sweep(preset: &str, tau_list: &str, out: &Path) -> ExitCode {
    let scenario = match preset_by_name(preset) {
        Some(s) => s,
        None => {
            let known: Vec<&str> = preset_scenarios().iter().map(|(n, _)| *n).collect();
            return fail(
                EXIT_VALIDATION,
                format!("unknown preset `{preset}` (known: {})", known.join(", ")),
            );
        }
    };
    let taus: Result<Vec<f64>, _> = tau_list.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let taus = match taus {
        Ok(t) if !t.is_empty() => t,
        _ => return fail(EXIT_VALIDATION, "could not parse --tau-inf list"),
    };
    let runs = match run_ideal_lq(&scenario, &taus) {
        Ok(r) => r,
        Err(e) => return core_fail(e),
    };
    let mut text = String::from("tau_inf,cost,singular\n");
    for run in &runs {
        match run {
            IdealRun::Solved { tau_inf, cost, .. } => {
                text.push_str(&format!("{tau_inf},{cost:.16e},false\n"));
            }
            IdealRun::Singular { tau_inf } => {
                text.push_str(&format!("{tau_inf},,true\n"));
            }
        }
    }
    if let Err(e) = ensure_dir(out) {
        return fail(EXIT_VALIDATION, format!("{}: {e}", out.display()));
    }
    let path = out.join("ideal_sweep.csv");
    if let Err(e) = fs::write(&path, &text) {
        return fail(EXIT_VALIDATION, format!("{}: {e}", path.display()));
    }
    print!("{text}");
    println!("written: {}", path.display());
    ExitCode::SUCCESS
}
