use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irrevkit_cli::io::{self, json_bytes, write_atomic};
use irrevkit_cli::{fixtures, sweep, CliError, EXIT_CHECK, EXIT_SCHEMA};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "irrevkit", version, about = "Run irreversibility scenarios from JSON files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run {
        files: Vec<PathBuf>,
        /// Report path; only with a single scenario file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a scenario over a grid of values for one parameter; emits CSV.
    Sweep {
        file: PathBuf,
        /// "theta" for the extraction grid, or a JSON pointer such as /payload/scenario/tau.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate scenario files without running them.
    Validate { files: Vec<PathBuf> },
    /// Write the built-in example scenarios into a directory.
    Fixtures { dir: PathBuf },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("IRREVKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| CliError::schema(format!("IRREVKIT_THREADS: expected a positive integer, found {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::io(e.to_string()))
}

fn run(files: &[PathBuf], out: Option<PathBuf>) -> Result<i32, CliError> {
    if files.is_empty() {
        return Err(CliError::schema("no scenario files given"));
    }
    if out.is_some() && files.len() > 1 {
        return Err(CliError::schema("--out needs exactly one scenario file"));
    }
    let results: Vec<_> = files.par_iter().map(|f| io::run_file(f, out.as_deref())).collect();
    let mut code = 0;
    for (f, r) in files.iter().zip(results) {
        match r {
            Ok(o) => {
                match &o.written {
                    Some(p) => eprintln!("{}: {} -> {}", f.display(), if o.report.passed { "ok" } else { "FAILED" }, p.display()),
                    None => print!("{}", String::from_utf8_lossy(&json_bytes(&o.report))),
                }
                for c in o.report.checks.iter().filter(|c| !c.passed) {
                    eprintln!("{}: check failed: {} (value {:e}, tolerance {:e})", f.display(), c.name, c.value, c.tolerance);
                }
                if !o.report.passed {
                    code = code.max(EXIT_CHECK);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(e.code);
            }
        }
    }
    Ok(code)
}

fn sweep_cmd(file: PathBuf, param: &str, grid: &str, out: Option<PathBuf>) -> Result<i32, CliError> {
    let grid = sweep::parse_grid(grid)?;
    let text = std::fs::read_to_string(&file).map_err(|e| CliError::schema(format!("{}: {e}", file.display())))?;
    let doc = serde_json::from_str(&text).map_err(|e| CliError::schema(format!("malformed JSON: {e}")))?;
    let table = sweep::sweep(&doc, param, &grid)?;
    let csv = table.to_csv();
    match out {
        Some(p) => {
            write_atomic(&p, csv.as_bytes())?;
            io::write_meta(&p, &file)?;
        }
        None => print!("{csv}"),
    }
    Ok(if table.passed { 0 } else { EXIT_CHECK })
}

fn validate(files: &[PathBuf]) -> Result<i32, CliError> {
    let mut code = 0;
    for f in files {
        match io::read_scenario(f) {
            Ok(_) => println!("{}: ok", f.display()),
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(e.code);
            }
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_SCHEMA as u8 } else { 0 });
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run { files, out } => run(&files, out),
        Command::Sweep { file, param, grid, out } => sweep_cmd(file, &param, &grid, out),
        Command::Validate { files } => validate(&files),
        Command::Fixtures { dir } => fixtures::write_corpus(&dir).map(|ps| {
            for p in ps {
                println!("{}", p.display());
            }
            0
        }),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
