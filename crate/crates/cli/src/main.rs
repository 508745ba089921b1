mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::Cli;
use commands::UsageError;

const THREADS_ENV: &str = "HVSISP_THREADS";

/// 1 for bad input or configuration, 2 for internal failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<hvsisp_core::Error>() {
            return if e.is_input_error() { 1 } else { 2 };
        }
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 1;
        }
    }
    2
}

/// The error chain joined by `: `, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn failure_json(command: &str, err: &anyhow::Error) -> serde_json::Value {
    let core = err.chain().find_map(|c| c.downcast_ref::<hvsisp_core::Error>());
    let (kind, stage) = match core {
        Some(hvsisp_core::Error::Config { stage, .. }) => ("ConfigError", stage.as_str()),
        Some(e) => (e.kind(), command),
        None if err.chain().any(|c| c.is::<UsageError>()) => ("UsageError", command),
        None => ("Error", command),
    };
    json!({"ok": false, "command": command, "stage": stage, "kind": kind, "error": describe(err)})
}

fn configure_threads() -> Result<(), UsageError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("{THREADS_ENV}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| UsageError(format!("{THREADS_ENV}: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let wants_json = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if wants_json {
                println!("{}", json!({"ok": false, "command": null, "stage": "arguments", "kind": "UsageError", "error": e.to_string().trim()}));
            } else {
                let _ = e.print();
            }
            return ExitCode::from(1);
        }
    };
    let name = cli.command.name();
    let result = configure_threads()
        .map_err(anyhow::Error::from)
        .and_then(|()| commands::dispatch(cli.command))
        .map_err(|e| e.context(name));
    match result {
        Ok(out) => {
            if cli.json {
                let mut doc = json!({"ok": true, "command": name});
                if let (Some(d), serde_json::Value::Object(extra)) = (doc.as_object_mut(), out.json) {
                    d.extend(extra);
                }
                println!("{doc}");
            } else {
                println!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if cli.json {
                println!("{}", failure_json(name, &e));
            } else {
                eprintln!("error: {}", describe(&e));
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
