//! `--config file.json` support: every key of the JSON object becomes the
//! matching long flag, placed before the command-line flags so that the
//! latter win.

use std::ffi::OsString;
use std::fs;

use serde_json::Value;

/// Locate `--config <path>` / `--config=<path>` in raw arguments.
fn find_config(args: &[OsString]) -> Option<(usize, usize, String)> {
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return args.get(i + 1).map(|p| (i, 2, p.to_string_lossy().into_owned()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some((i, 1, p.to_string()));
        }
    }
    None
}

fn scalar(key: &str, v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(format!("config key `{key}`: expected a string, number, boolean or array")),
    }
}

/// Flags encoded by a JSON config object.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
    let Value::Object(map) = value else {
        return Err("config: top level must be a JSON object".into());
    };
    let mut out = Vec::new();
    for (key, v) in &map {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    out.push(flag.clone().into());
                    out.push(scalar(key, item)?.into());
                }
            }
            other => {
                out.push(flag.into());
                out.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(out)
}

/// Splice config-file flags in right after the subcommand name.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some((at, width, path)) = find_config(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("config {path}: {e}"))?;
    let flags = config_flags(&text)?;
    let mut rest: Vec<OsString> = args.clone();
    rest.drain(at..at + width);
    // argv[0], then the subcommand (first non-flag token), then config flags.
    let sub = rest
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| !a.to_string_lossy().starts_with('-'))
        .map(|(i, _)| i);
    let insert_at = sub.map_or(rest.len(), |i| i + 1);
    let mut out = rest[..insert_at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&rest[insert_at..]);
    Ok(out)
}
