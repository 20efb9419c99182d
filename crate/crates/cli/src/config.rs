//! `key = value` config files.
//!
//! Each non-empty line not starting with `#` sets one long flag: `seed = 7`
//! behaves like `--seed 7`, `strict = true` like `--strict`, and
//! `strict = false` is skipped. Values may be quoted. The lines are spliced
//! in right after the subcommand so flags on the command line win.

use std::ffi::OsString;
use std::path::Path;

use crate::error::{CliError, Result};

pub fn parse_config(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected `key = value`, got '{line}'", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.starts_with('-') {
            return Err(CliError::Usage(format!("config line {}: bad key '{key}'", i + 1)));
        }
        if key == "config" {
            return Err(CliError::Usage("config files cannot include other config files".into()));
        }
        let value = value.trim().trim_matches('"');
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Expands `--config FILE` into explicit flags placed after the subcommand.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let extra = parse_config(&text)?;
    // first positional after the program name is the subcommand
    let sub = args
        .iter()
        .enumerate()
        .skip(1)
        .find(|(i, a)| {
            let s = a.to_string_lossy();
            let prev = args[i - 1].to_string_lossy();
            !s.starts_with('-') && prev != "--config" && prev != "--workers"
        })
        .map(|(i, _)| i);
    let Some(sub) = sub else {
        return Ok(args);
    };
    let mut out = args[..=sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags_and_switches() {
        let args = parse_config("# comment\nseed = 7\nstrict = true\nquantile_credible=false\nformat = \"markdown\"\n").unwrap();
        let args: Vec<String> = args.into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(args, ["--seed", "7", "--strict", "--format", "markdown"]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("seed 7").is_err());
        assert!(parse_config("config = other.cfg").is_err());
    }
}
