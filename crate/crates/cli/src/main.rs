use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Runs one stochastic Volterra experiment from a TOML configuration.
#[derive(Debug, Parser)]
#[command(name = "volterra", version)]
struct Args {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: the config's `output`, else ./out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Overrides the noise seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.threads == 0 {
        eprintln!(
            "{}",
            serde_json::json!({"error": "validation", "reason": "--threads must be at least 1"})
        );
        return ExitCode::from(3);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build_global()
        .expect("thread pool is configured once");
    match volterra_cli::execute(&args.config, args.out, args.seed) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": e.kind(), "reason": e.to_string()}));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
