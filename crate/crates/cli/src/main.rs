//! Experiment CLI: run single configs, sweep grids of configs, validate the
//! pipelines against the reference solver, and inspect the calibration.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 I/O error,
//! 4 capacity/infeasibility.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use stencilflow::accel::MachineSpec;
use stencilflow::cost::{end_to_end, Method, Scenario, ScenarioKind, Workload};
use stencilflow::harness::{
    self, emit_report, ExperimentConfig, HarnessError, ReportFormat, SweepResult,
};
use stencilflow::numerics::{jacobi_run_reference, StencilKernel};

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_CAPACITY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "stencilflow",
    version,
    about = "Functional and timing simulation of heterogeneous stencil pipelines \
             on a 32x32-tile dataflow accelerator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and emit its report.
    Run(RunArgs),
    /// Run a grid of experiments and emit reports plus a ratio table.
    Sweep(SweepArgs),
    /// Check every pipeline against the reference solver.
    Validate(ValidateArgs),
    /// Show modeled kernel times against the calibration anchors.
    Calibrate(CalibrateArgs),
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method '{s}' (cpu, axpy, matmul)"))
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    ScenarioKind::parse(s).ok_or_else(|| format!("unknown scenario '{s}' (pcie, uvm, upm)"))
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    ReportFormat::parse(s).ok_or_else(|| format!("unknown format '{s}' (json, csv)"))
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Grid edge length; grids are square.
    #[arg(long)]
    size: usize,
    #[arg(long)]
    iterations: usize,
    #[arg(long, default_value = "pcie", value_parser = parse_scenario)]
    scenario: ScenarioKind,
    /// Machine description JSON; missing fields take defaults.
    #[arg(long)]
    machine: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the cpu method's measured run.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Compare the result against the reference solver.
    #[arg(long)]
    validate: bool,
    /// Skip functional execution; emit the analytic model only.
    #[arg(long)]
    model_only: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated methods.
    #[arg(long, default_value = "cpu,axpy,matmul")]
    methods: String,
    /// Comma-separated grid sizes.
    #[arg(long, default_value = "1024,2048,4096,8192,16384,30720")]
    sizes: String,
    /// Comma-separated iteration counts.
    #[arg(long, default_value = "100,500,1000")]
    iters: String,
    /// Comma-separated scenarios.
    #[arg(long, default_value = "pcie")]
    scenarios: String,
    #[arg(long)]
    machine: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    validate: bool,
    /// Execute grids for real instead of model-only. The default presets
    /// cover grids that are only feasible as models.
    #[arg(long)]
    functional: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    machine: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    machine: Option<PathBuf>,
    /// Write a machine JSON with the fitted suggestions.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Validation { .. } => EXIT_VALIDATION,
        HarnessError::Usage(_) => EXIT_USAGE,
        HarnessError::Io(_) => EXIT_IO,
        HarnessError::Capacity(_) => EXIT_CAPACITY,
        HarnessError::Pipeline(_) => EXIT_USAGE,
    }
}

fn load_machine(path: Option<&Path>) -> Result<MachineSpec, HarnessError> {
    let Some(path) = path else {
        return Ok(MachineSpec::default());
    };
    let text = std::fs::read_to_string(path)?;
    let spec: MachineSpec = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Usage(format!("machine config {}: {e}", path.display())))?;
    spec.validate()
        .map_err(|e| HarnessError::Usage(format!("machine config {}: {e}", path.display())))?;
    Ok(spec)
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), HarnessError> {
    match out {
        Some(path) => Ok(std::fs::write(path, format!("{content}\n"))?),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, HarnessError> {
    let config = ExperimentConfig {
        method: args.method,
        size: args.size,
        iterations: args.iterations,
        scenario: args.scenario,
        machine: load_machine(args.machine.as_deref())?,
        seed: args.seed,
        validate: args.validate,
        threads: args.threads,
        model_only: args.model_only,
    };
    let report = harness::run(&config)?;
    let failed = report.validation.is_some_and(|v| !v.passed);
    write_output(args.out.as_deref(), &emit_report(&[report], args.format))?;
    Ok(if failed {
        ExitCode::from(EXIT_VALIDATION)
    } else {
        ExitCode::SUCCESS
    })
}

fn parse_list<T: Copy>(
    raw: &str,
    what: &str,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>, HarnessError> {
    let items: Vec<T> = raw
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            parse(s.trim()).ok_or_else(|| HarnessError::Usage(format!("bad {what} '{}'", s.trim())))
        })
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(HarnessError::Usage(format!("no {what} given")));
    }
    Ok(items)
}

#[derive(Serialize)]
struct SweepOut<'a> {
    schema: &'a str,
    #[serde(flatten)]
    result: &'a SweepResult,
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, HarnessError> {
    if args.validate && !args.functional {
        return Err(HarnessError::Usage(
            "--validate needs --functional (model-only sweeps have nothing to check)".into(),
        ));
    }
    let methods = parse_list(&args.methods, "method", Method::parse)?;
    let sizes = parse_list(&args.sizes, "size", |s| s.parse::<usize>().ok())?;
    let iters = parse_list(&args.iters, "iteration count", |s| s.parse::<usize>().ok())?;
    let scenarios = parse_list(&args.scenarios, "scenario", ScenarioKind::parse)?;
    let machine = load_machine(args.machine.as_deref())?;

    let mut configs = Vec::new();
    for &scenario in &scenarios {
        for &size in &sizes {
            for &iterations in &iters {
                for &method in &methods {
                    configs.push(ExperimentConfig {
                        method,
                        size,
                        iterations,
                        scenario,
                        machine,
                        seed: args.seed,
                        validate: args.validate,
                        threads: args.threads,
                        model_only: !args.functional,
                    });
                }
            }
        }
    }

    let result = harness::sweep(&configs)?;
    let any_validation_failed = result
        .reports
        .iter()
        .any(|r| r.validation.is_some_and(|v| !v.passed));

    match args.format {
        ReportFormat::Json => {
            let json = serde_json::to_string(&SweepOut {
                schema: "v1",
                result: &result,
            })
            .expect("sweep result serializes");
            write_output(args.out.as_deref(), &json)?;
        }
        ReportFormat::Csv => {
            write_output(
                args.out.as_deref(),
                &emit_report(&result.reports, ReportFormat::Csv),
            )?;
            for row in &result.ratios {
                eprintln!(
                    "ratio size={} iters={} scenario={}: matmul/axpy={} cpu/axpy={}",
                    row.size,
                    row.iterations,
                    row.scenario.name(),
                    row.matmul_over_axpy_total
                        .map_or("-".into(), |v| format!("{v:.3}")),
                    row.cpu_over_axpy_total
                        .map_or("-".into(), |v| format!("{v:.3}")),
                );
            }
        }
    }
    for failure in &result.failures {
        eprintln!(
            "skipped {} size={} iters={} scenario={}: {}",
            failure.method.name(),
            failure.size,
            failure.iterations,
            failure.scenario.name(),
            failure.error
        );
    }

    if result.reports.is_empty() {
        return Err(HarnessError::Usage("every sweep config failed".into()));
    }
    Ok(if any_validation_failed {
        ExitCode::from(EXIT_VALIDATION)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode, HarnessError> {
    let machine = load_machine(args.machine.as_deref())?;
    let mut all_ok = true;
    let mut check = |name: String, pass: bool| {
        println!("{} {}", if pass { "PASS" } else { "FAIL" }, name);
        all_ok &= pass;
    };

    for &size in &[4usize, 8, 31, 32, 33, 128] {
        for &iterations in &[1usize, 3, 10] {
            let mut config =
                ExperimentConfig::new(Method::Axpy, size, iterations, ScenarioKind::Pcie);
            config.machine = machine;
            config.seed = args.seed;
            config.validate = true;
            let report = harness::run(&config)?;
            let v = report.validation.expect("validation requested");
            check(
                format!("axpy {size}x{size} x{iterations} bit-exact"),
                v.bit_exact,
            );
        }
    }

    for &size in &[4usize, 8, 16, 33, 128] {
        let mut config = ExperimentConfig::new(Method::Matmul, size, 1, ScenarioKind::Pcie);
        config.machine = machine;
        config.seed = args.seed;
        config.validate = true;
        let report = harness::run(&config)?;
        let v = report.validation.expect("validation requested");
        check(
            format!(
                "matmul {size}x{size} x1 max err {} <= {}",
                v.max_abs_err, v.tolerance
            ),
            v.passed,
        );
    }
    {
        let mut config = ExperimentConfig::new(Method::Matmul, 16, 10, ScenarioKind::Pcie);
        config.machine = machine;
        config.seed = args.seed;
        config.validate = true;
        let report = harness::run(&config)?;
        let v = report.validation.expect("validation requested");
        check(
            format!(
                "matmul 16x16 x10 drift {} <= {}",
                v.max_abs_err, v.tolerance
            ),
            v.passed,
        );
    }

    {
        let input = harness::seeded_grid(64, 64, args.seed);
        let (_, one) = harness::cpu_native_run(&input, 10, 1);
        let (_, eight) = harness::cpu_native_run(&input, 10, 8);
        let reference = jacobi_run_reference(&input, &StencilKernel::laplace(), 10);
        check(
            "cpu 64x64 x10 threads 1 == threads 8".into(),
            one.bits_eq(&eight),
        );
        check(
            "cpu 64x64 x10 bit-exact vs reference".into(),
            one.bits_eq(&reference),
        );
    }

    Ok(if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VALIDATION)
    })
}

/// Kernel-time anchors the default machine is fitted to: measured Axpy
/// kernel milliseconds at (iterations, size).
const KERNEL_ANCHORS_MS: [(usize, usize, f64); 4] = [
    (100, 128, 0.50),
    (1000, 128, 4.96),
    (100, 1024, 12.6),
    (1000, 1024, 124.0),
];

fn cmd_calibrate(args: CalibrateArgs) -> Result<ExitCode, HarnessError> {
    let machine = load_machine(args.machine.as_deref())?;
    let scenario = Scenario::pcie(&machine);

    println!("kernel-time anchors (axpy, pcie):");
    println!(
        "{:>6} {:>6} {:>12} {:>12} {:>7}",
        "iters", "size", "target_ms", "modeled_ms", "ratio"
    );
    let mut implied = Vec::new();
    for (iterations, size, target_ms) in KERNEL_ANCHORS_MS {
        let wl = Workload {
            method: Method::Axpy,
            size,
            iterations,
        };
        let b = end_to_end(&wl, &machine, &scenario)?;
        let modeled_ms = b.kernel_total_s() * 1e3;
        println!(
            "{iterations:>6} {size:>6} {target_ms:>12.3} {modeled_ms:>12.3} {:>7.3}",
            modeled_ms / target_ms
        );
        // Cycles per core round that would hit this anchor exactly.
        let tiles = (size * size / 1024).max(1) as u64;
        let rounds = tiles.div_ceil(machine.num_cores);
        implied.push(target_ms / 1e3 / iterations as f64 / rounds as f64 * machine.clock_hz);
    }

    let geomean = implied.iter().map(|c| c.ln()).sum::<f64>() / implied.len() as f64;
    let suggested_bottleneck = geomean.exp();
    let ops = Method::Axpy.tile_ops();
    let current_bottleneck = ops.bottleneck_cycles(&machine) as f64;
    let scale = suggested_bottleneck / current_bottleneck;
    println!(
        "\ncurrent bottleneck {current_bottleneck} cycles/tile-round; \
         geometric-mean fit {suggested_bottleneck:.0} (scale {scale:.3})"
    );

    let mut suggestion = machine;
    suggestion.tile_cycles_unpack = (machine.tile_cycles_unpack as f64 * scale).round() as u64;
    suggestion.tile_cycles_math = (machine.tile_cycles_math as f64 * scale).round() as u64;
    suggestion.tile_cycles_pack = (machine.tile_cycles_pack as f64 * scale).round() as u64;

    // Host baseline rate that makes the baseline exactly 3x faster than the
    // modeled pipeline at the largest anchor.
    let wl = Workload {
        method: Method::Axpy,
        size: 1024,
        iterations: 1000,
    };
    let axpy_total = end_to_end(&wl, &suggestion, &Scenario::pcie(&suggestion))?.total_s();
    let updates = (1024u64 * 1024 * 1000) as f64;
    suggestion.cpu_stencil_throughput_updates_per_s = updates / (axpy_total / 3.0);
    println!(
        "baseline throughput for the 3x end-to-end anchor: {:.4e} updates/s (current {:.4e})",
        suggestion.cpu_stencil_throughput_updates_per_s,
        machine.cpu_stencil_throughput_updates_per_s
    );

    if let Some(path) = args.out.as_deref() {
        let json = serde_json::to_string_pretty(&suggestion).expect("machine serializes");
        write_output(Some(path), &json)?;
        println!("wrote fitted machine to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use stencilflow::cost::ModelError;

    #[test]
    fn error_to_exit_code_mapping() {
        assert_eq!(
            exit_code_for(&HarnessError::Validation {
                max_abs_err: 1.0,
                tolerance: 0.0
            }),
            1
        );
        assert_eq!(exit_code_for(&HarnessError::Usage("x".into())), 2);
        assert_eq!(
            exit_code_for(&HarnessError::Io(std::io::Error::other("x"))),
            3
        );
        assert_eq!(
            exit_code_for(&HarnessError::Capacity(ModelError::Capacity {
                method: "matmul",
                size: 16384,
                resource: "DRAM",
                required: 1,
                available: 0,
            })),
            4
        );
    }
}
