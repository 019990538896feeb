use clap::{Args, Parser, Subcommand};
use enbound::config::RunConfig;
use enbound::error::Error;
use enbound::runner;
use std::path::PathBuf;
use std::process::ExitCode;

/// Certification toolkit for energy-norm bounds of adiabatically switched
/// time-dependent Hamiltonians on finite truncations.
#[derive(Parser)]
#[command(name = "enbound", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for independent certification cells (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Verbose logging.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full certification pipeline and emit certificate artifacts.
    Certify(CommonArgs),
    /// Audit the gauge identity relating the physical and rotating frames.
    GaugeCheck(CommonArgs),
    /// Run the magnetic-patch application: spectrum audit, commutator
    /// identity decay, and a reduced certification.
    Landau(CommonArgs),
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn setup(common: &CommonArgs) {
    let level = if common.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    enbound::linalg::pin_blas_single_thread();
    if common.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global();
    }
}

fn error_exit(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } | Error::InvalidInput(_) | Error::Io { .. } => {
            ExitCode::from(EXIT_CONFIG)
        }
        Error::Numeric(_) => ExitCode::from(EXIT_NUMERIC),
    }
}

fn load(common: &CommonArgs) -> Result<(RunConfig, PathBuf), Error> {
    let config = RunConfig::from_path(&common.config)?;
    let out_dir = common
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    Ok((config, out_dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Certify(common) => {
            setup(&common);
            let (config, out_dir) = match load(&common) {
                Ok(v) => v,
                Err(e) => return error_exit(&e),
            };
            match runner::run_certify(&config, &out_dir) {
                Ok(artifacts) => {
                    let c = &artifacts.certificate;
                    println!(
                        "certified {:?} model (dim {}) at eps = {}, {} eta values, n in [-{}, {}]",
                        c.model_kind,
                        c.dim,
                        c.epsilon,
                        c.eta_sweep.len(),
                        c.n_max,
                        c.n_max
                    );
                    for cell in &c.cells {
                        println!(
                            "  n = {:+} eta = {:<6} sup = {:.9} bound = {:<12.6e} margin = {:.3e}",
                            cell.n,
                            cell.eta,
                            cell.sup_physical,
                            cell.theoretical,
                            cell.margin_theorem
                        );
                    }
                    for w in &c.warnings {
                        println!("  warning: {w}");
                    }
                    println!(
                        "verdicts: theorem={} corollary={} lemma={} proposition={} gauge={} overall={}",
                        c.verdicts.theorem,
                        c.verdicts.corollary,
                        c.verdicts.lemma,
                        c.verdicts.proposition,
                        c.verdicts.gauge,
                        c.verdicts.overall
                    );
                    for p in &artifacts.written {
                        println!("wrote {}", p.display());
                    }
                    if artifacts.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAIL)
                    }
                }
                Err(e) => error_exit(&e),
            }
        }
        Command::GaugeCheck(common) => {
            setup(&common);
            let (config, out_dir) = match load(&common) {
                Ok(v) => v,
                Err(e) => return error_exit(&e),
            };
            match runner::run_gauge_check(&config, &out_dir) {
                Ok(artifacts) => {
                    for r in &artifacts.reports {
                        println!(
                            "eta = {:<6} max residual = {:.3e} (threshold {:.1e}) {}",
                            r.eta,
                            r.max_residual,
                            r.threshold,
                            if r.pass { "ok" } else { "FAIL" }
                        );
                    }
                    for p in &artifacts.written {
                        println!("wrote {}", p.display());
                    }
                    if artifacts.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAIL)
                    }
                }
                Err(e) => error_exit(&e),
            }
        }
        Command::Landau(common) => {
            setup(&common);
            let (config, out_dir) = match load(&common) {
                Ok(v) => v,
                Err(e) => return error_exit(&e),
            };
            match runner::run_landau(&config, &out_dir) {
                Ok(artifacts) => {
                    println!("energy shift = {:.6}", artifacts.energy_shift);
                    for w in &artifacts.warnings {
                        println!("warning: {w}");
                    }
                    for c in &artifacts.clusters {
                        println!(
                            "level {}: mean = {:.6} target = {:.6} rel err = {:.4} ({} states)",
                            c.index, c.mean_energy, c.target, c.relative_error, c.count
                        );
                    }
                    let cm = &artifacts.commutator;
                    println!(
                        "commutator identity: residual {:.3e} (N={}) -> {:.3e} (N={}), ratio {:.2} {}",
                        cm.coarse_residual,
                        cm.coarse_grid,
                        cm.fine_residual,
                        cm.fine_grid,
                        cm.ratio,
                        if cm.pass { "ok" } else { "FAIL" }
                    );
                    println!(
                        "switch column: {:.3} at x = {:.2}, {:.3} at x = {:.2} ({})",
                        artifacts.switch_column.value_first,
                        artifacts.switch_column.x_first,
                        artifacts.switch_column.value_last,
                        artifacts.switch_column.x_last,
                        if artifacts.switch_column.endpoints_exact {
                            "exact"
                        } else {
                            "NOT exact"
                        }
                    );
                    println!(
                        "reduced certification overall = {}",
                        artifacts.certificate.verdicts.overall
                    );
                    for p in &artifacts.written {
                        println!("wrote {}", p.display());
                    }
                    if artifacts.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAIL)
                    }
                }
                Err(e) => error_exit(&e),
            }
        }
    }
}
