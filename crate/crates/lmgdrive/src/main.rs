use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lmgdrive::analysis::{compare_solvers, scaling_report, FitModel};
use lmgdrive::config::{GridPoint, Integrator, NumericSettings, PathKind, ProtocolKind, SolverKind, SweepConfig};
use lmgdrive::error::{exit, AppError, Result};
use lmgdrive::output::{write_expansion, write_schedule, write_spectrum, write_trajectory};
use lmgdrive::run::drive;
use lmgdrive::sweep::{read_records, run_sweep_with, SweepEvent};
use lmgdrive_core::bath::{default_matsubara_cutoff, matsubara_expansion, terminator_residual, BathModel};
use lmgdrive_core::driving::{build_schedule, DEFAULT_GRID};
use lmgdrive_core::spin::{spectrum_scan, ControlPoint, SpinSystem};

#[derive(Parser)]
#[command(name = "lmgdrive", version, about = "Finite-time driving of an open LMG qubit system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues and gap along a straight segment of the control plane.
    Spectrum(SpectrumArgs),
    /// Time schedule of one protocol: t, s, lambda, chi, planar and geometric speed.
    Schedule(ScheduleArgs),
    /// Matsubara expansion coefficients of the bath correlation function.
    Expansion(ExpansionArgs),
    /// One driven trajectory with instantaneous occupations.
    Drive(DriveArgs),
    /// Run (or resume) a sweep described by a TOML config file.
    Sweep(SweepArgs),
    /// Optimal temperatures and scaling fits from a sweep's records.
    Fit(FitArgs),
    /// Hierarchy versus Lindblad fidelities along one temperature curve.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| AppError::io(p, e))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn parse_point(s: &str) -> std::result::Result<ControlPoint, String> {
    let (l, c) = s.split_once(',').ok_or("expected `lambda,chi`")?;
    let l = l.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let c = c.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(ControlPoint::new(l, c))
}

#[derive(Args)]
struct SpectrumArgs {
    /// Number of qubits.
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    /// Segment of the path preset; overridden by --start/--end.
    #[arg(long, value_enum, default_value_t = PathKind::FirstOrder)]
    path: PathKind,
    /// Start point `lambda,chi`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    start: Option<ControlPoint>,
    /// End point `lambda,chi`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    end: Option<ControlPoint>,
    /// Grid points along the segment.
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_enum, default_value_t = PathKind::FirstOrder)]
    path: PathKind,
    #[arg(long, value_enum, default_value_t = ProtocolKind::A)]
    protocol: ProtocolKind,
    /// Drive time t_F.
    #[arg(long)]
    tf: f64,
    /// Protocol-B table size.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Output rows.
    #[arg(long, default_value_t = 201)]
    samples: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ExpansionArgs {
    /// Coupling strength q.
    #[arg(long)]
    q: f64,
    /// Drude width.
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    #[arg(short = 'T', long)]
    temperature: f64,
    /// Matsubara cutoff; 18 below T = 1 and 5 at or above by default.
    #[arg(short = 'M', long)]
    m: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DriveArgs {
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_enum, default_value_t = PathKind::FirstOrder)]
    path: PathKind,
    #[arg(long, value_enum, default_value_t = ProtocolKind::A)]
    protocol: ProtocolKind,
    #[arg(long, value_enum, default_value_t = SolverKind::Heom)]
    solver: SolverKind,
    #[arg(short = 'T', long)]
    temperature: f64,
    #[arg(long)]
    tf: f64,
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    /// Coupling angle; 0 couples to jz, pi/2 to jx.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    /// 1 adds the counterterm (q/N) Q^2.
    #[arg(long, default_value_t = 0)]
    r: u8,
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    /// Matsubara cutoff; 18 below T = 1 and 5 at or above by default.
    #[arg(short = 'M', long)]
    m: Option<usize>,
    /// Hierarchy depth L.
    #[arg(short = 'L', long, default_value_t = 3)]
    depth: usize,
    #[arg(long, value_enum, default_value_t = Integrator::Exponential)]
    integrator: Integrator,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    /// Output samples over [0, t_F].
    #[arg(long, default_value_t = 201)]
    samples: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep config.
    config: PathBuf,
    /// Override the config's worker count.
    #[arg(short, long)]
    workers: Option<usize>,
    /// Suppress per-point progress on standard error.
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep records (records.csv) holding one F(T) curve per N.
    records: PathBuf,
    /// Model for the maximum fidelity against N.
    #[arg(long, value_enum, default_value_t = FitModel::Power)]
    model: FitModel,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CompareArgs {
    /// TOML sweep config restricted to one curve (single N, t_F, q, theta, r).
    config: PathBuf,
    #[command(flatten)]
    output: Output,
}

fn spectrum(a: &SpectrumArgs) -> Result<()> {
    let sys = SpinSystem::new(a.n)?;
    let preset = a.path.drive_path();
    let rows = spectrum_scan(&sys, a.start.unwrap_or(preset.start), a.end.unwrap_or(preset.end), a.points)?;
    write_spectrum(a.output.open()?, &rows)
}

fn schedule(a: &ScheduleArgs) -> Result<()> {
    let sys = SpinSystem::new(a.n)?;
    let sched = build_schedule(&sys, a.path.drive_path(), a.protocol.protocol(), a.tf, a.grid)?;
    write_schedule(a.output.open()?, &sys, &sched, a.samples)
}

fn expansion(a: &ExpansionArgs) -> Result<()> {
    let m = a.m.unwrap_or_else(|| default_matsubara_cutoff(a.temperature));
    let bath = BathModel::new(a.q, a.gamma, a.temperature, m)?;
    let terms = matsubara_expansion(&bath)?;
    eprintln!("terminator residual Delta_M = {:e}", terminator_residual(&bath)?);
    write_expansion(a.output.open()?, &terms)
}

fn drive_cmd(a: &DriveArgs) -> Result<()> {
    if a.r > 1 {
        return Err(AppError::Config("r must be 0 or 1".into()));
    }
    if a.r == 1 && (a.q == 0.0 || a.theta == 0.0) {
        return Err(AppError::Config("r = 1 requires q > 0 and theta != 0".into()));
    }
    let bath_solver = a.solver != SolverKind::Unitary;
    let point = GridPoint {
        path: a.path,
        protocol: a.protocol,
        solver: a.solver,
        n: a.n,
        temperature: a.temperature,
        t_final: a.tf,
        q: a.q,
        theta: a.theta,
        r: a.r,
        m_cut: if bath_solver { a.m.unwrap_or_else(|| default_matsubara_cutoff(a.temperature)) } else { 0 },
        depth: if a.solver == SolverKind::Heom { a.depth } else { 0 },
    };
    let settings = NumericSettings {
        gamma: a.gamma,
        integrator: a.integrator,
        rel_tol: a.rel_tol,
        abs_tol: a.abs_tol,
        ..NumericSettings::default()
    };
    let outcome = drive(&point, &settings, a.samples)?;
    write_trajectory(a.output.open()?, &outcome.observables, a.solver)?;
    eprintln!(
        "{:?} = {:.6}  trace drift = {:.2e}",
        outcome.fidelity.kind,
        outcome.fidelity.value,
        outcome.trajectory.trace_drift()
    );
    Ok(())
}

fn sweep_cmd(a: &SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::load(&a.config)?;
    if a.workers.is_some() {
        cfg.workers = a.workers;
        cfg.validate()?;
    }
    let quiet = a.quiet;
    let mut done = 0usize;
    let mut pending = 0usize;
    let outcome = run_sweep_with(&cfg, &mut |event| {
        if quiet {
            return;
        }
        match event {
            SweepEvent::Started { pending: p, total } => {
                pending = p;
                eprintln!("{total} grid points, {} already recorded, {p} to run", total - p);
            }
            SweepEvent::Finished { point, value, wall_seconds } => {
                done += 1;
                eprintln!(
                    "[{done}/{pending}] N={} T={:.4} tF={:.4} q={} {}: F={:.6} ({wall_seconds:.1}s)",
                    point.n, point.temperature, point.t_final, point.q, point.solver, value.fidelity
                );
            }
            SweepEvent::Failed { point, error } => {
                done += 1;
                eprintln!(
                    "[{done}/{pending}] N={} T={:.4} tF={:.4} q={} {}: error: {error}",
                    point.n, point.temperature, point.t_final, point.q, point.solver
                );
            }
        }
    })?;
    eprintln!(
        "{} records ({} new), {} failed -> {}",
        outcome.records.len(),
        outcome.computed,
        outcome.failures.len(),
        cfg.output_dir.display()
    );
    if let Some(first) = outcome.failures.first() {
        return Err(AppError::PointFailures {
            count: outcome.failures.len(),
            sidecar: cfg.output_dir.join(lmgdrive::sweep::ERRORS_FILE),
            first: first.message.clone(),
        });
    }
    Ok(())
}

fn fit_cmd(a: &FitArgs) -> Result<()> {
    let records = read_records(&a.records)?;
    let report = scaling_report(&records, a.model)?;
    let mut out = a.output.open()?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out).map_err(|e| AppError::io(output_name(&a.output), e))?;
    Ok(())
}

fn compare_cmd(a: &CompareArgs) -> Result<()> {
    let cfg = SweepConfig::load(&a.config)?;
    let rows = compare_solvers(&cfg)?;
    let mut w = csv::Writer::from_writer(a.output.open()?);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| AppError::io(output_name(&a.output), e))?;
    Ok(())
}

fn output_name(o: &Output) -> &Path {
    o.out.as_deref().unwrap_or(Path::new("<stdout>"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Spectrum(a) => spectrum(a),
        Command::Schedule(a) => schedule(a),
        Command::Expansion(a) => expansion(a),
        Command::Drive(a) => drive_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Compare(a) => compare_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) if e.is_broken_pipe() => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
