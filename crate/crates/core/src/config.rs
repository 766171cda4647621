//! TOML configuration files and the embedded presets.
//!
//! A file holds the scenario keys at top level and an optional `[sweep]`
//! table. Every key has a default; the resolved configuration (defaults
//! expanded) serialises back to TOML that parses to the same value.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{ScenarioConfig, SweepSpec};

/// Shipped presets as `(name, TOML source)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("paper_fig2c", include_str!("../presets/paper_fig2c.toml")),
    ("paper_fig4b", include_str!("../presets/paper_fig4b.toml")),
    ("paper_colorless", include_str!("../presets/paper_colorless.toml")),
    ("paper_bicmos", include_str!("../presets/paper_bicmos.toml")),
    ("paper_keyrate", include_str!("../presets/paper_keyrate.toml")),
    ("paper_penalty_mrr", include_str!("../presets/paper_penalty_mrr.toml")),
    ("paper_penalty_mzi", include_str!("../presets/paper_penalty_mzi.toml")),
    ("paper_ring", include_str!("../presets/paper_ring.toml")),
];

/// Prefix selecting an embedded preset instead of a file path.
pub const PRESET_PREFIX: &str = "preset:";

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub scenario: ScenarioConfig,
    pub sweep: Option<SweepSpec>,
}

impl ConfigFile {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if let Some(s) = &self.sweep {
            s.validate(&self.scenario)?;
        }
        Ok(())
    }

    /// Fully resolved TOML.
    pub fn to_toml(&self) -> String {
        let mut table = to_table(&self.scenario);
        if let Some(s) = &self.sweep {
            table.insert("sweep".into(), toml::Value::Table(to_table(s)));
        }
        toml::to_string(&table).expect("configuration types serialise to TOML")
    }
}

fn to_table<S: Serialize>(value: &S) -> toml::Table {
    toml::Table::try_from(value).expect("configuration types serialise to TOML tables")
}

/// Parsed configuration plus the unknown keys that were ignored.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub config: ConfigFile,
    pub unknown_keys: Vec<String>,
}

fn deserialize_tracking<T: DeserializeOwned>(
    value: toml::Value,
    prefix: &str,
    unknown: &mut Vec<String>,
) -> std::result::Result<T, String> {
    serde_ignored::deserialize(value, |path| {
        let p = path.to_string();
        unknown.push(if prefix.is_empty() { p } else { format!("{prefix}.{p}") });
    })
    .map_err(|e: toml::de::Error| e.to_string())
}

/// Parses configuration text. `origin` only labels error messages.
///
/// In strict mode unknown keys are an error; otherwise they are returned in
/// [`Parsed::unknown_keys`] for the caller to report. Values are validated
/// either way.
pub fn parse_config_str(text: &str, origin: &Path, strict: bool) -> Result<Parsed> {
    let syntax = |message: String| Error::Syntax {
        path: origin.to_path_buf(),
        message,
    };
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| syntax(e.to_string()))?;
    let mut unknown = Vec::new();
    let sweep = match table.remove("sweep") {
        Some(v) => Some(deserialize_tracking::<SweepSpec>(v, "sweep", &mut unknown).map_err(syntax)?),
        None => None,
    };
    let scenario = deserialize_tracking::<ScenarioConfig>(toml::Value::Table(table), "", &mut unknown).map_err(syntax)?;
    unknown.sort();
    unknown.dedup();
    if strict && !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    let config = ConfigFile { scenario, sweep };
    config.validate()?;
    Ok(Parsed {
        config,
        unknown_keys: unknown,
    })
}

/// Loads a file path, or an embedded preset written as `preset:NAME`.
pub fn load_config(source: &str, strict: bool) -> Result<Parsed> {
    if let Some(name) = source.strip_prefix(PRESET_PREFIX) {
        let text = preset_source(name).ok_or_else(|| Error::Read {
            path: PathBuf::from(source),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such preset"),
        })?;
        return parse_config_str(text, Path::new(source), strict);
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| Error::Read {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config_str(&text, path, strict)
}

/// Parses a preset in strict mode.
pub fn load_preset(name: &str) -> Result<ConfigFile> {
    Ok(load_config(&format!("{PRESET_PREFIX}{name}"), true)?.config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{DemodKind, Mode, SweepVariable};

    fn parse(text: &str, strict: bool) -> Result<Parsed> {
        parse_config_str(text, Path::new("test.toml"), strict)
    }

    #[test]
    fn empty_file_resolves_to_defaults() {
        let p = parse("", true).unwrap();
        assert_eq!(p.config.scenario, ScenarioConfig::default());
        assert!(p.config.sweep.is_none());
    }

    #[test]
    fn fig2c_preset_resolves_paper_parameters() {
        let c = load_preset("paper_fig2c").unwrap();
        let s = &c.scenario;
        assert_eq!(s.link.mu, 0.1);
        assert_eq!(s.link.symbol_rate_hz, 1e9);
        assert_eq!(s.link.total_loss_db, 23.5);
        assert_eq!(s.spad.eta, 0.1);
        assert_eq!(s.spad.dark_cps, 550.0);
        let sweep = c.sweep.unwrap();
        assert_eq!(sweep.variable, SweepVariable::ExtinctionDb);
        assert!(sweep.values.contains(&18.0));
    }

    #[test]
    fn every_preset_parses_strictly_and_round_trips() {
        for (name, _) in PRESETS {
            let c = load_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = parse(&c.to_toml(), true).unwrap().config;
            assert_eq!(c, again, "{name}");
        }
    }

    #[test]
    fn invariant_violation_names_key() {
        match parse("[spad]\neta = 1.5\n", true) {
            Err(Error::Invariant { key, .. }) => assert_eq!(key, "spad.eta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_strict_and_lenient() {
        let text = "seeed = 3\n[spad]\netta = 0.2\n[sweep]\nvariable = \"total_loss_db\"\nvalues = [20.0]\nbogus = 1\n";
        match parse(text, true) {
            Err(Error::UnknownKeys(keys)) => {
                assert_eq!(keys, vec!["seeed", "spad.etta", "sweep.bogus"]);
            }
            other => panic!("{other:?}"),
        }
        let lenient = parse(text, false).unwrap();
        assert_eq!(lenient.unknown_keys.len(), 3);
    }

    #[test]
    fn syntax_and_type_errors() {
        assert!(matches!(parse("[spad\n", true), Err(Error::Syntax { .. })));
        assert!(matches!(parse("[spad]\neta = \"high\"\n", true), Err(Error::Syntax { .. })));
    }

    #[test]
    fn nested_demodulator_and_mode_alias() {
        let p = parse("mode = \"mc\"\nframe_length = 20000\n[demodulator]\nkind = \"mzi\"\n[demodulator.mzi]\nphase_trim_rad = 0.1\n", true).unwrap();
        assert_eq!(p.config.scenario.mode, Mode::MonteCarlo);
        assert_eq!(p.config.scenario.demodulator.kind, DemodKind::Mzi);
        assert_eq!(p.config.scenario.demodulator.mzi.phase_trim_rad, 0.1);
    }

    #[test]
    fn missing_file_and_preset() {
        assert!(matches!(load_config("/nonexistent/x.toml", true), Err(Error::Read { .. })));
        assert!(matches!(load_config("preset:nope", true), Err(Error::Read { .. })));
    }
}
