//! Command-line entry points and the ranking HTTP API.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod ranking;

use std::ffi::OsString;
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::Parser;
use maats_pipeline::RunStore;
use serde_json::json;

use crate::cli::{Cli, Command};
use crate::config::Config;
use crate::error::CliError;

pub fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(store) = &cli.store {
        config.store = store.clone();
    }
    Ok(config)
}

/// Runs one subcommand. Returns the JSON summary for stdout, `Null` when the
/// command already printed its output.
pub async fn execute(cli: Cli) -> Result<serde_json::Value, CliError> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Run(args) => {
            let summary = commands::run(args, &config).await?;
            Ok(serde_json::to_value(summary).expect("summary serializes"))
        }
        Command::Eval(args) => commands::eval(args, &config),
        Command::Confusion(args) => commands::confusion(args, &config),
        Command::DumpPrompts(args) => commands::dump_prompts(args, &config),
        Command::RankExport(args) => {
            let store = RunStore::open(&config.store)?;
            let report = ranking::export(&store, &args.session, args.out.as_deref())?;
            Ok(serde_json::to_value(report).expect("report serializes"))
        }
        Command::RankServe(args) => {
            let store = RunStore::open(&config.store)?;
            let service = ranking::RankingService::open(&store, &args.session, &args.runs, &args.annotators)?;
            let tasks = service.session().tasks.len();
            let app = ranking::router(Arc::new(service), args.static_dir.as_deref());
            let listener = tokio::net::TcpListener::bind(args.bind)
                .await
                .map_err(|e| CliError::new("io", format!("bind {}: {e}", args.bind)))?;
            let addr = listener.local_addr().map_err(|e| CliError::new("io", e.to_string()))?;
            println!(
                "{}",
                json!({"listening": addr.to_string(), "session": args.session, "tasks": tasks})
            );
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
                .map_err(|e| CliError::new("io", e.to_string()))?;
            Ok(serde_json::Value::Null)
        }
    }
}

/// Parses `args`, runs the command and reports failures as one JSON line on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("{}", CliError::new("usage", message).to_json());
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(false)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("{}", CliError::new("io", e.to_string()).to_json());
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(execute(cli)) {
        Ok(serde_json::Value::Null) => ExitCode::SUCCESS,
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
