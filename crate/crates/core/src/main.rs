use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tate_spectral::cli::{self, CliError, Invocation};

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "kebab-case")]
enum Command {
    RingInfo,
    MahlerFit,
    MahlerEval,
    Opmat,
    Charseries,
    Polygon,
    Factor,
    UpSlopes,
    Classicality,
    Nbound,
    Detratio,
    Selftest,
}

/// Spectral computations over truncated Tate rings. Reads a JSON config, writes a JSON manifest.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    command: Command,
    /// JSON config; see README for the fields each command reads
    #[arg(long)]
    config: Option<PathBuf>,
    /// output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// seed for sampled checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("config error: --threads must be ≥ 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool");
    }
    let name = args.command.to_possible_value().expect("named").get_name().to_string();
    let inv = Invocation { command: name, config: args.config, out: args.out.clone(), seed: args.seed, threads: args.threads };
    match cli::run(&inv) {
        Ok((text, failed)) => {
            let written = match &args.out {
                Some(p) => cli::write_atomic(p, text.as_bytes()).map_err(CliError::from),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            ExitCode::from(if failed { 1 } else { 0 })
        }
        Err(e) => {
            eprintln!("{e}");
            if let CliError::Precision(_) = e {
                eprintln!("hint: grow the cutoff D or lower the target precision");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
