//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::builder::PossibleValuesParser;
use clap::Parser;

use crate::config::Kind;
use crate::{RunArgs, EXIT_CONFIG};

const THREADS_VAR: &str = "MKVLAB_THREADS";

fn commands() -> Vec<&'static str> {
    let mut v = vec!["run"];
    v.extend(Kind::ALL.iter().map(|k| k.name()));
    v
}

#[derive(Debug, Parser)]
#[command(
    name = "mkvlab",
    version,
    about = "Run mean-field SDE experiments and verification suites",
    after_help = "Set MKVLAB_THREADS to cap the number of worker threads."
)]
struct Cli {
    /// Print the JSON schema of experiment configs and exit
    #[arg(long)]
    emit_schema: bool,

    /// Experiment kind, or `run` to take it from the config's `kind` field
    #[arg(value_parser = PossibleValuesParser::new(commands()), required_unless_present = "emit_schema")]
    command: Option<String>,

    /// Experiment config (JSON)
    #[arg(long, required_unless_present = "emit_schema")]
    config: Option<PathBuf>,

    /// Seed; overrides the config's `seed`
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot size the thread pool: {e}"))
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    if cli.emit_schema {
        println!("{}", serde_json::to_string_pretty(&crate::schema::schema()).expect("schema serializes"));
        return 0;
    }
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let command = cli.command.expect("required by clap");
    let args = RunArgs {
        config: cli.config.expect("required by clap"),
        kind: Kind::from_name(&command),
        seed: cli.seed,
        out: cli.out,
    };
    match crate::run(&args) {
        Ok(r) => {
            for c in &r.report.checks {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            if let Some(e) = &r.report.error {
                eprintln!("error: {}: {}", e.kind, e.message);
            }
            println!(
                "{}: {:?} ({} checks) -> {}",
                r.report.kind,
                r.report.status,
                r.report.checks.len(),
                args.out.display()
            );
            r.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
