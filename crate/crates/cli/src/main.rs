//! `qmetro` command-line runner.

mod commands;
mod config;
mod output;

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use config::{parse_config, parse_override_value, Command, RunConfig};

/// Multiparameter qubit metrology workbench.
///
/// Any config key can be given on the command line as `--key value`;
/// command-line values override the config file.
#[derive(Parser, Debug)]
#[command(name = "qmetro", version)]
struct Cli {
    /// qfi, weak-comm, kappa-scan, optimize, tomography, simulate-counts,
    /// conjecture-search or gate-model
    command: Option<String>,
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// `--key value` overrides
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

#[derive(Debug)]
pub enum RunError {
    Config(Vec<String>),
    Io(String),
    Runtime(String),
}

impl RunError {
    pub fn io(msg: impl Into<String>) -> Self {
        RunError::Io(msg.into())
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        RunError::Runtime(msg.to_string())
    }

    fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Io(_) => "io",
            RunError::Runtime(_) => "runtime",
        }
    }

    fn messages(&self) -> Vec<String> {
        match self {
            RunError::Config(m) => m.clone(),
            RunError::Io(m) | RunError::Runtime(m) => vec![m.clone()],
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

type Overrides = Vec<(String, toml::Value)>;

/// Splits `--key value` pairs; `--config` is pulled out.
fn split_overrides(raw: &[String]) -> Result<(Option<PathBuf>, Overrides), RunError> {
    let mut config = None;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let Some(flag) = raw[i].strip_prefix("--") else {
            errors.push(format!("unexpected argument '{}'", raw[i]));
            i += 1;
            continue;
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => match raw.get(i + 1) {
                Some(v) => {
                    i += 1;
                    (flag.to_string(), v.clone())
                }
                None => {
                    errors.push(format!("flag '--{flag}' needs a value"));
                    i += 1;
                    continue;
                }
            },
        };
        i += 1;
        if key == "config" {
            config = Some(PathBuf::from(value));
        } else {
            out.push((key.replace('-', "_"), parse_override_value(&value)));
        }
    }
    if errors.is_empty() {
        Ok((config, out))
    } else {
        Err(RunError::Config(errors))
    }
}

fn load(cli: &Cli) -> Result<RunConfig, RunError> {
    let (extra_config, mut overrides) = split_overrides(&cli.overrides)?;
    if let Some(seed) = cli.seed {
        overrides.insert(0, ("seed".into(), toml::Value::Integer(seed as i64)));
    }
    if let Some(out) = &cli.out {
        overrides.insert(0, ("out".into(), toml::Value::String(out.display().to_string())));
    }
    let config_path = extra_config.or_else(|| cli.config.clone());
    let text = match &config_path {
        Some(p) => fs::read_to_string(p).map_err(|e| RunError::io(format!("reading {}: {e}", p.display())))?,
        None => String::new(),
    };
    let command = match &cli.command {
        Some(name) => {
            Some(Command::parse(name).ok_or_else(|| RunError::Config(vec![format!("unknown command '{name}'")]))?)
        }
        None => None,
    };
    let mut config = parse_config(&text, command, &overrides).map_err(|e| RunError::Config(e.0))?;
    if let Some(p) = config_path {
        config.input_paths.push(p);
    }
    Ok(config)
}

fn execute(config: &RunConfig) -> Result<serde_json::Value, RunError> {
    let start = Instant::now();
    let params = commands::Params::new(&config.parameters);
    let mut outputs = output::Outputs::new(&config.output_dir, &config.input_paths)?;
    let report = commands::run(config, &params, &mut outputs)?;
    let mut written = outputs.written().to_vec();
    written.push("manifest.json".into());
    let manifest = json!({
        "tool": "qmetro",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": qmetro::VERSION,
        "command": config.command.name(),
        "seed": config.seed,
        "config": params.resolved(),
        "inputs": config.input_paths,
        "outputs": written,
        "notes": report.notes,
    });
    outputs.write_json("manifest.json", &manifest)?;
    let elapsed = start.elapsed().as_secs_f64();
    outputs.write("timing.txt", &format!("wall_time_seconds = {elapsed:.6}\n"))?;
    Ok(json!({
        "command": config.command.name(),
        "out": config.output_dir,
        "summary": report.summary,
        "notes": report.notes,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match load(&cli).and_then(|c| execute(&c)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = json!({ "error": { "kind": e.kind(), "messages": e.messages() } });
            eprintln!("{body}");
            ExitCode::from(e.exit_code())
        }
    }
}
