use std::io::{Read, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use hahn_cli::job::{parse_bounds, parse_format, parse_window};
use hahn_cli::{execute, CliError, Defaults};
use hahn_core::ffield::Field;

/// Roots, Artin-Schreier solutions and algebraicity certificates for
/// generalized power series over finite fields.
///
/// Statements in the job text take precedence over the flags.
#[derive(Parser)]
#[command(name = "hahn", version)]
struct Args {
    /// Job text such as `field 2^1; roots x^2 + x + t^-1`; read from stdin
    /// when absent or `-`.
    job: Option<String>,
    /// Default field `p^d`.
    #[arg(long, env = "HAHN_FIELD")]
    field: Option<String>,
    /// Window `r,E`: exponents below r, depth at most E.
    #[arg(long)]
    window: Option<String>,
    /// Period bounds `M,N`.
    #[arg(long = "period-bounds")]
    period_bounds: Option<String>,
    /// Node budget of the root expansion.
    #[arg(long)]
    budget: Option<usize>,
    /// Samples per tail sequence when certifying.
    #[arg(long)]
    samples: Option<usize>,
    /// `text` or `json`.
    #[arg(long)]
    format: Option<String>,
}

fn defaults(args: &Args) -> Result<Defaults, CliError> {
    let mut d = Defaults::default();
    if let Some(f) = &args.field {
        d.field = Some(Field::parse(f)?);
    }
    if let Some(w) = &args.window {
        (d.r, d.depth) = parse_window(w, 0)?;
    }
    if let Some(b) = &args.period_bounds {
        d.period = parse_bounds(b, 0)?;
    }
    if let Some(b) = args.budget {
        d.budget = b;
    }
    if let Some(s) = args.samples {
        d.samples = s;
    }
    if let Some(f) = &args.format {
        d.format = parse_format(f, 0)?;
    }
    Ok(d)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            // usage errors are errors, not "not found"
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let defaults = match defaults(&args) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error {}: {e}", e.code());
            return ExitCode::from(1);
        }
    };
    let text = match args.job.as_deref() {
        Some(t) if t != "-" => t.to_string(),
        _ => {
            let mut s = String::new();
            if let Err(e) = std::io::stdin().read_to_string(&mut s) {
                eprintln!("error cli::Io: {e}");
                return ExitCode::from(1);
            }
            s
        }
    };
    let out = execute(&text, &defaults);
    // a closed pipe is not worth a panic
    let _ = writeln!(std::io::stdout(), "{}", out.report);
    ExitCode::from(out.code as u8)
}
