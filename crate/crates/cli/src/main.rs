use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qpuk_cli::commands;
use qpuk_cli::config::{load_channel, CommandKind, ParamArgs};

/// Security bounds and attack simulations for CV quantum authentication of PUKs.
#[derive(Parser)]
#[command(name = "qpuk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the security margin D at one parameter point (exit 0 secure, 2 insecure).
    SecurityCheck(ParamArgs),
    /// Write D over a parameter grid as CSV.
    Sweep(ParamArgs),
    /// Run verification sessions against an adversary strategy.
    Simulate(ParamArgs),
    /// Generate or inspect CRP table files.
    #[command(subcommand)]
    Crp(CrpCommand),
}

#[derive(Subcommand)]
enum CrpCommand {
    /// Enrol a key without noise and write its CRP table.
    Gen(CrpGenArgs),
    /// List a CRP table; with --out, also rewrite it in canonical form.
    Show(CrpShowArgs),
}

#[derive(Args)]
struct CrpGenArgs {
    #[arg(long)]
    n: usize,
    /// Response photon number μ_R.
    #[arg(long, conflicts_with_all = ["mu_r_ratio", "channel_file"])]
    mu_r: Option<f64>,
    #[arg(long, conflicts_with = "channel_file")]
    mu_r_ratio: Option<f64>,
    #[arg(long, default_value_t = qpuk_cli::config::DEFAULT_MU_P)]
    mu_p: f64,
    #[arg(long)]
    channel_file: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "channel_file")]
    arg_f: Option<f64>,
    #[arg(long, default_value = qpuk::protocol::DEFAULT_MASK_ID)]
    mask_id: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrpShowArgs {
    path: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("QPUK_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("QPUK_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::SecurityCheck(args) => {
            let params = args.resolve(CommandKind::SecurityCheck)?;
            let outcome = commands::security_check(&params)?;
            eprintln!("{}", outcome.summary);
            write_out(params.out.as_ref(), &(outcome.json + "\n"))?;
            Ok(if outcome.report.secure {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Sweep(args) => {
            let params = args.resolve(CommandKind::Sweep)?;
            let rows = commands::sweep(&params)?;
            if let Some(p) = &params.out {
                eprintln!("wrote {} rows to {}", rows.len(), p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(args) => {
            let params = args.resolve(CommandKind::Simulate)?;
            let json = commands::simulate(&params)?;
            write_out(params.out.as_ref(), &(json + "\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Crp(CrpCommand::Gen(a)) => {
            let (mu_r, arg_f) = match &a.channel_file {
                Some(path) => {
                    let ch = load_channel(path)?;
                    (qpuk::mu_response(&ch, a.mu_p)?, ch.arg_f)
                }
                None => {
                    let mu_r = match (a.mu_r, a.mu_r_ratio) {
                        (Some(m), _) => m,
                        (None, Some(r)) => r * a.mu_p,
                        (None, None) => bail!("give --mu-r, --mu-r-ratio or --channel-file"),
                    };
                    (mu_r, a.arg_f.unwrap_or(0.0))
                }
            };
            let text = commands::crp_gen(mu_r, arg_f, a.n, &a.mask_id)?;
            write_out(a.out.as_ref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Crp(CrpCommand::Show(a)) => {
            let table = commands::crp_load(&a.path)?;
            print!("{}", commands::crp_listing(&table));
            if let Some(out) = &a.out {
                table
                    .save(out)
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
