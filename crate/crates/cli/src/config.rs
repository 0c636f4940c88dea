//! Config files, resolved-config dumps and the worker pool.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use clap::{ArgMatches, Command};
use mmreg::kv::KeyValues;

/// Splices the entries of `--config FILE` in front of the subcommand's own
/// flags. Arguments override themselves, so later command-line flags win.
pub fn expand_config_file(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate().skip(2) {
        let a = a.to_string_lossy();
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            path = args.get(i + 1).map(|p| p.to_string_lossy().into_owned());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config file {path}"))?;
    let kv: KeyValues = text.parse().with_context(|| format!("parsing config file {path}"))?;
    let from_file = kv
        .iter()
        .filter(|(k, _)| !matches!(*k, "config" | "command"))
        .map(|(k, v)| OsString::from(format!("--{}={v}", k.replace('_', "-"))));
    let mut out: Vec<OsString> = args[..2].to_vec();
    out.extend(from_file);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

/// Every flag value of the chosen subcommand, as `key=value` entries.
pub fn resolved(command: &Command, matches: &ArgMatches) -> KeyValues {
    let mut kv = KeyValues::new();
    if let Some((name, sub)) = matches.subcommand() {
        kv.push("command", name);
        let Some(def) = command.find_subcommand(name) else {
            return kv;
        };
        for arg in def.get_arguments() {
            let id = arg.get_id().as_str();
            if id == "config" {
                continue;
            }
            if let Ok(Some(raw)) = sub.try_get_raw(id) {
                let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
                kv.push(id.replace('_', "-").as_str(), vals.join(","));
            }
        }
    }
    kv
}

pub fn write_resolved(dir: &Path, kv: &KeyValues) -> anyhow::Result<()> {
    let name = format!("{}_config.txt", kv.get("command").unwrap_or("run"));
    let path = dir.join(name);
    fs::write(&path, kv.to_text()).with_context(|| format!("writing {}", path.display()))
}

pub fn init_thread_pool() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("MMREG_THREADS") else {
        return Ok(());
    };
    let Ok(n) = raw.trim().parse::<usize>() else {
        bail!("MMREG_THREADS must be a non-negative integer, got {raw:?}");
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")
}
