//! Result files: a `#`-prefixed manifest header followed by the
//! comma-delimited result table. The manifest embeds the fully resolved
//! configuration, so a file can be regenerated from its header alone.

use std::path::{Path, PathBuf};

use crate::config::{parse_config_str, ConfigFile};
use crate::error::{Error, Result};
use crate::experiments::{run_scenario, sweep, ResultTable, SCHEMA_VERSION};

/// Optional override for the directory of relative `--out` paths.
pub const OUT_DIR_ENV: &str = "RINGQKD_OUT_DIR";

const TIMESTAMP_KEY: &str = "generated: ";
const CONFIG_BEGIN: &str = "--- config ---";
const CONFIG_END: &str = "--- end config ---";

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    /// `simulate` or `sweep`.
    pub command: String,
    pub seed: u64,
    pub timestamp: String,
    pub config: ConfigFile,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ConfigFile, outputs: Vec<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.scenario.seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config: config.clone(),
            outputs,
        }
    }

    fn header(&self) -> String {
        let mut lines = vec![
            format!("ringqkd {}", self.tool_version),
            format!("schema: {SCHEMA_VERSION}"),
            format!("command: {}", self.command),
            format!("seed: {}", self.seed),
            format!("{TIMESTAMP_KEY}{}", self.timestamp),
            format!("outputs: {}", self.outputs.join(" ")),
            CONFIG_BEGIN.to_string(),
        ];
        lines.extend(self.config.to_toml().lines().map(str::to_string));
        lines.push(CONFIG_END.to_string());
        lines.iter().map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") }).collect()
    }
}

/// Full file contents for `table`.
pub fn render_results(table: &ResultTable, manifest: &RunManifest) -> String {
    manifest.header() + &table.to_csv()
}

pub fn write_results(table: &ResultTable, manifest: &RunManifest, path: &Path) -> Result<()> {
    std::fs::write(path, render_results(table, manifest)).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Resolves a relative output path against `$RINGQKD_OUT_DIR` when set.
pub fn resolve_out_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Drops the timestamp line, for comparing reruns.
pub fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(&format!("# {TIMESTAMP_KEY}")))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// Command and configuration recovered from a result file header.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<(String, ConfigFile)> {
    let bad = |m: &str| Error::Syntax {
        path: origin.to_path_buf(),
        message: m.to_string(),
    };
    let mut command = None;
    let mut config = String::new();
    let mut in_config = false;
    for line in text.lines() {
        let Some(body) = line.strip_prefix('#') else { break };
        let body = body.strip_prefix(' ').unwrap_or(body);
        if body == CONFIG_BEGIN {
            in_config = true;
        } else if body == CONFIG_END {
            in_config = false;
        } else if in_config {
            config.push_str(body);
            config.push('\n');
        } else if let Some(c) = body.strip_prefix("command: ") {
            command = Some(c.to_string());
        }
    }
    let command = command.ok_or_else(|| bad("result file has no manifest header"))?;
    let parsed = parse_config_str(&config, origin, true)?;
    Ok((command, parsed.config))
}

/// Runs the command described by a configuration.
pub fn execute(command: &str, config: &ConfigFile) -> Result<ResultTable> {
    match (command, &config.sweep) {
        ("sweep", Some(spec)) => sweep(spec, &config.scenario),
        ("sweep", None) => Err(Error::invariant("sweep", "configuration has no [sweep] table")),
        ("simulate", _) => Ok(ResultTable {
            rows: run_scenario(&config.scenario)?,
        }),
        (other, _) => Err(Error::Input(format!("cannot replay command `{other}`"))),
    }
}

/// Regenerates the table of a result file from its manifest.
pub fn replay(text: &str, origin: &Path) -> Result<(RunManifest, ResultTable)> {
    let (command, config) = parse_manifest(text, origin)?;
    let table = execute(&command, &config)?;
    Ok((RunManifest::new(&command, &config, Vec::new()), table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_preset;
    use crate::experiments::COLUMNS;

    #[test]
    fn empty_table_is_header_only() {
        let m = RunManifest::new("simulate", &ConfigFile::default(), vec![]);
        let text = render_results(&ResultTable::default(), &m);
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec![COLUMNS.join(",")]);
    }

    #[test]
    fn sweep_rows_in_order_and_reproducible() {
        let mut cfg = load_preset("paper_fig2c").unwrap();
        cfg.sweep.as_mut().unwrap().values = vec![12.0, 14.0, 16.0, 18.0, 20.0];
        let run = || {
            let t = execute("sweep", &cfg).unwrap();
            render_results(&t, &RunManifest::new("sweep", &cfg, vec!["out.csv".into()]))
        };
        let (a, b) = (run(), run());
        assert_eq!(strip_timestamp(&a), strip_timestamp(&b));
        let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), 5);
        for (i, r) in rows.iter().enumerate() {
            assert!(r.starts_with(&format!("{i},extinction_db,")));
        }
    }

    #[test]
    fn manifest_round_trip_regenerates_file() {
        let cfg = load_preset("paper_bicmos").unwrap();
        let t = execute("simulate", &cfg).unwrap();
        let text = render_results(&t, &RunManifest::new("simulate", &cfg, vec![]));
        let (cmd, back) = parse_manifest(&text, Path::new("r.csv")).unwrap();
        assert_eq!(cmd, "simulate");
        assert_eq!(back, cfg);
        let (m, again) = replay(&text, Path::new("r.csv")).unwrap();
        assert_eq!(strip_timestamp(&render_results(&again, &m)), strip_timestamp(&text));
    }

    #[test]
    fn write_failure_names_path() {
        let m = RunManifest::new("simulate", &ConfigFile::default(), vec![]);
        let err = write_results(&ResultTable::default(), &m, Path::new("/nonexistent/dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
    }

    #[test]
    fn headerless_file_is_rejected() {
        assert!(parse_manifest("index,variable\n", Path::new("x")).is_err());
    }
}
