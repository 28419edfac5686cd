//! `attrmine`: runs the attribute discovery and zero-shot pipeline one step
//! at a time. Errors are reported on stderr as a single JSON object and the
//! exit status encodes their category (2 config, 3 io, 4 dimension, 5 numeric).

mod cli;
mod commands;
mod config;
mod pipeline;
mod provenance;

use clap::Parser;

use attrmine_core::{Error, Result};

fn run(args: cli::Cli) -> Result<()> {
    let mut cfg = config::PipelineConfig::load(args.config.as_deref())?;
    args.command.apply(&mut cfg);
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    cfg.validate()?;
    let p = pipeline::Pipeline { cfg, out: args.out_dir };
    commands::run(&p, &args.command)
}

fn report(e: &Error) -> i32 {
    let category = e.category();
    let line = serde_json::json!({ "error": category.to_string(), "message": e.to_string() });
    eprintln!("{line}");
    category.exit_code()
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = cli::Cli::parse();
    if let Err(e) = run(args) {
        std::process::exit(report(&e));
    }
}
