//! Run records and config-file flag injection.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;
use serde::{Deserialize, Serialize};

use crate::cli::{Cli, Command};
use crate::error::{Error, Result};

pub const RUN_FILE: &str = "run.json";

/// Everything needed to re-execute one command. Thread count and paths are
/// left out: they do not change results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub invocation: Command,
}

impl RunConfig {
    pub fn new(seed: u64, command: Command) -> Self {
        RunConfig {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            invocation: command,
        }
    }
}

/// Flag names a config file may not set.
const RESERVED: [&str; 3] = ["config", "help", "version"];

fn parse_config(path: &Path) -> Result<BTreeMap<String, serde_json::Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let is_toml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: serde_json::Value = if is_toml {
        let t: toml::Value = toml::from_str(&text).map_err(|e| {
            Error::Config(format!("{}: {e}", path.display()))
        })?;
        serde_json::to_value(t).map_err(|e| Error::Config(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    match value {
        serde_json::Value::Object(m) => Ok(m.into_iter().collect()),
        _ => Err(Error::Config(format!("{}: top level must be a table", path.display()))),
    }
}

fn render(key: &str, v: &serde_json::Value) -> Result<Option<String>> {
    use serde_json::Value as V;
    Ok(match v {
        V::Bool(_) => None,
        V::Number(n) => Some(n.to_string()),
        V::String(s) => Some(s.clone()),
        V::Array(items) => {
            let parts = items
                .iter()
                .map(|i| match i {
                    V::Number(n) => Ok(n.to_string()),
                    V::String(s) => Ok(s.clone()),
                    _ => Err(Error::Config(format!("'{key}': list items must be numbers or strings"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Some(parts.join(","))
        }
        _ => return Err(Error::Config(format!("'{key}': unsupported value {v}"))),
    })
}

fn long_flags(cmd: &clap::Command) -> Vec<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}

/// Appends flags from the `--config` file to `argv` for every key not
/// already given on the command line.
///
/// Keys use flag names (`min-pts` or `min_pts`). Top-level keys apply to
/// the invoked subcommand and the global flags; a table named after a
/// subcommand applies to that subcommand only. Booleans switch flags on or
/// off and lists become comma-separated values.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config_path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            config_path = args.get(i + 1).cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            config_path = Some(v.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let table = parse_config(Path::new(&path))?;
    let root = Cli::command();
    let sub_names: Vec<String> = root.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(sub) = args.iter().skip(1).find(|a| sub_names.contains(a)) else {
        return Ok(argv);
    };
    let sub_cmd = root.find_subcommand(sub).expect("listed above");
    let global = long_flags(&root);
    let local = long_flags(sub_cmd);
    let given = |flag: &str| {
        let f = format!("--{flag}");
        args.iter().any(|a| *a == f || a.starts_with(&format!("{f}=")))
    };

    let mut pairs: Vec<(String, serde_json::Value)> = Vec::new();
    for (k, v) in &table {
        if let serde_json::Value::Object(inner) = v {
            if sub_names.contains(k) {
                if k == sub {
                    pairs.extend(inner.iter().map(|(a, b)| (a.clone(), b.clone())));
                }
                continue;
            }
        }
        pairs.push((k.clone(), v.clone()));
    }

    let mut out = argv;
    for (key, value) in pairs {
        let flag = key.replace('_', "-");
        if RESERVED.contains(&flag.as_str()) {
            return Err(Error::Config(format!("'{key}' cannot be set from a config file")));
        }
        if !global.contains(&flag) && !local.contains(&flag) {
            return Err(Error::Config(format!("'{key}' is not a flag of {sub}")));
        }
        if given(&flag) {
            continue;
        }
        match (&value, render(&key, &value)?) {
            (serde_json::Value::Bool(true), _) => out.push(format!("--{flag}").into()),
            (serde_json::Value::Bool(false), _) => {}
            (_, Some(v)) => {
                out.push(format!("--{flag}").into());
                out.push(v.into());
            }
            (_, None) => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn argv(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    #[test]
    fn json_and_toml_fill_missing_flags() {
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("c.json");
        std::fs::write(&json, r#"{"seed": 9, "pores": 12, "size": [50, 20, 3], "ascii_stl": true}"#).unwrap();
        let a = expand_config(argv(&format!("radisynth gen-plate --config {} --pores 5", json.display()))).unwrap();
        let cli = Cli::try_parse_from(a).unwrap();
        assert_eq!(cli.seed, 9);
        match cli.command {
            Command::GenPlate(g) => {
                assert_eq!(g.pores, Some(5));
                assert_eq!(g.size, vec![50.0, 20.0, 3.0]);
                assert!(g.ascii_stl);
            }
            other => panic!("{other:?}"),
        }
        let toml = dir.path().join("c.toml");
        std::fs::write(&toml, "seed = 4\n[cluster]\neps = 3.5\nmin_pts = 2\n[fit]\nrefine = true\n").unwrap();
        let a = expand_config(argv(&format!("radisynth --config {} cluster --map m", toml.display()))).unwrap();
        let cli = Cli::try_parse_from(a).unwrap();
        assert_eq!(cli.seed, 4);
        match cli.command {
            Command::Cluster(c) => assert_eq!((c.eps, c.min_pts), (3.5, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"bogus": 1}"#).unwrap();
        let e = expand_config(argv(&format!("radisynth verify --config {}", p.display()))).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn run_config_round_trips() {
        let cli = Cli::try_parse_from(argv("radisynth --seed 3 experiment-71 --size 64 --no-ablation")).unwrap();
        let rc = RunConfig::new(cli.seed, cli.command);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&rc).unwrap()).unwrap();
        assert_eq!(back, rc);
    }
}
