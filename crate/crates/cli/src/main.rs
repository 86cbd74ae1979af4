mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Subcommands whose `--config` is a structured experiment file rather than
/// a list of flags.
const STRUCTURED_CONFIG: [&str; 2] = ["train", "gd-sq"];

/// Replaces `--config FILE` by the flags it lists: `{"n": 10, "gamma_prime": 0.5}`
/// becomes `--n 10 --gamma-prime 0.5`. Keys that are not flags of the
/// subcommand are rejected by the parser.
fn expand_config(argv: Vec<String>) -> anyhow::Result<Vec<String>> {
    let sub = argv.iter().skip(1).find(|a| !a.starts_with('-')).cloned();
    if sub.as_deref().is_some_and(|s| STRUCTURED_CONFIG.contains(&s)) {
        return Ok(argv);
    }
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let (path, consumed) = match argv[pos].strip_prefix("--config=") {
        Some(p) => (p.to_string(), 1),
        None => (
            argv.get(pos + 1)
                .cloned()
                .ok_or_else(|| anyhow::anyhow!("--config needs a file"))?,
            2,
        ),
    };
    let text = std::fs::read_to_string(&path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| anyhow::anyhow!("{path}: config must be a JSON object"))?;
    let mut flags = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => flags.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => flags.extend([flag, s.clone()]),
            serde_json::Value::Number(n) => flags.extend([flag, n.to_string()]),
            serde_json::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                flags.extend([flag, parts.join(",")]);
            }
            serde_json::Value::Object(_) => anyhow::bail!("{path}: key '{key}' must not be an object"),
        }
    }
    let mut out: Vec<String> = argv[..pos].to_vec();
    out.extend(flags);
    out.extend(argv[pos + consumed..].iter().cloned());
    Ok(out)
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SQHARDNET_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("SQHARDNET_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            anyhow::bail!("SQHARDNET_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(&cli, &argv) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
