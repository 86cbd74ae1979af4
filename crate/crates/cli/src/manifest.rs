use std::path::Path;

use serde::Serialize;

/// Written as `manifest.json` next to every run's outputs.
#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub argv: &'a [String],
    pub config: &'a C,
}

pub fn write<C: Serialize>(dir: &Path, command: &str, argv: &[String], config: &C) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let m = Manifest {
        tool: "sqhardnet",
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv: argv.get(1..).unwrap_or(&[]),
        config,
    };
    let mut text = serde_json::to_string_pretty(&m)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// Directory that holds a file output.
pub fn dir_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}
