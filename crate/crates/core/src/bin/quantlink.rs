use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quantlink::experiments::{self, ExperimentConfig, ExperimentKind};
use quantlink::hermite::{check_limit_trends, HermiteExpansion, HermiteRow};
use quantlink::quantization::{distortion_factor, make_uniform_quantizer, optimal_uniform_quantizer};
use quantlink::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "quantlink", version, about = "Quantized massive-MIMO link simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equalizer MSE (dB) versus Eb/N0.
    Mse(RunArgs),
    /// Bit error rate versus Eb/N0.
    Ber(RunArgs),
    /// Sum spectral efficiency with estimated CSI.
    Se(RunArgs),
    /// One-bit output collisions.
    Collision(RunArgs),
    /// Hermite coefficients and distortion factors per resolution.
    HermiteReport(HermiteArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "QUANTLINK_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct HermiteArgs {
    /// Resolutions to tabulate.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    bits: Vec<u32>,
    /// Evaluate uniform quantizers with this step at unit complex input
    /// variance instead of the MSE-optimal quantizers after AGC.
    #[arg(long)]
    step: Option<f64>,
    /// Optional CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "{} is a '{}' config, not '{}'",
            args.config.display(),
            cfg.experiment.as_str(),
            kind.as_str()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let records = pool.install(|| experiments::run(&cfg))?;
    experiments::write_csv(&records, &args.out)?;
    print!("{}", experiments::summary_table(&records));
    println!("wrote {} rows to {}", records.len(), args.out.display());
    Ok(())
}

fn hermite_report(args: HermiteArgs) -> Result<(), Error> {
    let mut rows = Vec::new();
    let mut rhos = Vec::new();
    for &b in &args.bits {
        let (exp, rho) = match args.step {
            Some(step) => {
                let spec = make_uniform_quantizer(b, step)?;
                (HermiteExpansion::new(&spec), distortion_factor(&spec.rescaled(2f64.sqrt())?))
            }
            None => {
                let spec = optimal_uniform_quantizer(b)?;
                (HermiteExpansion::at_design_variance(&spec), distortion_factor(&spec))
            }
        };
        rows.push(HermiteRow::from_expansion(&exp)?);
        rhos.push(rho);
    }
    println!("{:>3} {:>12} {:>12} {:>10} {:>12} {:>10}", "b", "omega1", "omega2", "lambda", "residual_l2", "rho");
    for (r, rho) in rows.iter().zip(&rhos) {
        println!(
            "{:>3} {:>12.6} {:>12.3e} {:>10.6} {:>12.6} {:>10.6}",
            r.bits, r.omega1, r.omega2, r.lambda, r.residual_l2, rho
        );
    }
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.bits);
    match check_limit_trends(&sorted) {
        Ok(()) => println!("limit trends: ok (|omega2| non-increasing, |lambda - 1| decreasing)"),
        Err(e) => println!("limit trends: {e}"),
    }
    if let Some(path) = args.out {
        let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
        w.write_record(["b", "omega1", "omega2", "lambda", "residual_l2"]).map_err(Error::from)?;
        for r in &rows {
            w.write_record([
                r.bits.to_string(),
                format!("{:e}", r.omega1),
                format!("{:e}", r.omega2),
                format!("{:e}", r.lambda),
                format!("{:e}", r.residual_l2),
            ])
            .map_err(Error::from)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Mse(a) => run_experiment(ExperimentKind::Mse, a),
        Command::Ber(a) => run_experiment(ExperimentKind::Ber, a),
        Command::Se(a) => run_experiment(ExperimentKind::Se, a),
        Command::Collision(a) => run_experiment(ExperimentKind::Collision, a),
        Command::HermiteReport(a) => hermite_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
