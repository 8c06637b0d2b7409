//! `--config` TOML files. Top-level keys apply to any command that has a
//! flag of that name; a `[command]` table applies to that command only and
//! must name real flags. Keys may be written `snake_case` or `kebab-case`.
//! A flag present on the command line is never overridden.
//!
//! ```toml
//! out = "runs/2015"
//!
//! [fit]
//! data = ["y2012.csv", "y2013.csv"]
//! structure = "structure.json"
//! alpha = "auto"
//! ```

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::CommandFactory;

use crate::{Cli, CliError, CliResult};

/// `--config` value and the subcommand name, found without a full parse.
pub fn scan(argv: &[OsString]) -> (Option<PathBuf>, Option<String>) {
    let subs: BTreeSet<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_owned())
        .collect();
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if sub.is_none() && subs.contains(a.as_ref()) {
            sub = Some(a.into_owned());
        }
        i += 1;
    }
    (config, sub)
}

fn flag_names(sub: &str) -> CliResult<BTreeSet<String>> {
    let cmd = Cli::command();
    let c = cmd
        .find_subcommand(sub)
        .ok_or_else(|| CliError::Usage(format!("unknown command `{sub}`")))?;
    Ok(c.get_arguments()
        .filter_map(|a| a.get_long().map(str::to_owned))
        .filter(|l| l != "config")
        .collect())
}

fn value_args(key: &str, v: &toml::Value, out: &mut Vec<OsString>) -> CliResult<()> {
    let flag = format!("--{key}");
    match v {
        toml::Value::Boolean(true) => out.push(flag.into()),
        toml::Value::Boolean(false) => {}
        toml::Value::Array(items) => {
            for it in items {
                value_args(key, it, out)?;
            }
        }
        toml::Value::String(s) => out.extend([flag.into(), s.into()]),
        toml::Value::Integer(n) => out.extend([flag.into(), n.to_string().into()]),
        toml::Value::Float(x) => out.extend([flag.into(), x.to_string().into()]),
        other => {
            return Err(CliError::Usage(format!(
                "config key `{key}`: unsupported value {other}"
            )))
        }
    }
    Ok(())
}

/// `argv` plus flags from the config file that the command line leaves unset.
pub fn merge_config(argv: &[OsString], sub: &str, path: &Path) -> CliResult<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    let flags = flag_names(sub)?;
    let given: BTreeSet<String> = argv
        .iter()
        .filter_map(|a| {
            let a = a.to_string_lossy();
            a.strip_prefix("--")
                .map(|f| f.split('=').next().unwrap_or(f).to_owned())
        })
        .collect();

    let mut extra = Vec::new();
    let mut apply = |key: &str, v: &toml::Value, strict: bool| -> CliResult<()> {
        let key = key.replace('_', "-");
        if !flags.contains(&key) {
            return if strict {
                Err(CliError::Usage(format!(
                    "config [{sub}] sets `{key}`, which `{sub}` does not accept"
                )))
            } else {
                Ok(())
            };
        }
        if given.contains(&key) {
            return Ok(());
        }
        value_args(&key, v, &mut extra)
    };
    // the command's own table first so it wins over top-level keys
    if let Some(section) = table.get(sub) {
        let section = section
            .as_table()
            .ok_or_else(|| CliError::Usage(format!("config `{sub}` must be a table")))?;
        for (k, v) in section {
            apply(k, v, true)?;
        }
    }
    let section_keys: BTreeSet<String> = table
        .get(sub)
        .and_then(toml::Value::as_table)
        .map(|t| t.keys().map(|k| k.replace('_', "-")).collect())
        .unwrap_or_default();
    for (k, v) in &table {
        if v.is_table() || section_keys.contains(&k.replace('_', "-")) {
            continue;
        }
        apply(k, v, false)?;
    }

    let mut merged = argv.to_vec();
    merged.extend(extra);
    Ok(merged)
}
