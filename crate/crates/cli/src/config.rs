//! Config files supply default flags per subcommand.
//!
//! The file is a JSON object with one section per subcommand, keyed by long
//! flag names (underscores and hyphens are interchangeable):
//!
//! ```json
//! { "verify": { "walkers": 20000, "seed": 42, "format": ["json", "csv"] },
//!   "plan":   { "forward": true, "theta1": "-0.25pi", "theta2": "pi/6" } }
//! ```
//!
//! Each entry becomes `--flag value` placed before the command-line flags, so
//! flags given explicitly take precedence. `true` emits a bare switch, `false`
//! and `null` emit nothing, arrays are joined with commas.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

fn scalar(key: &str, v: &Value) -> Result<Option<String>, CliError> {
    match v {
        Value::Null | Value::Bool(false) => Ok(None),
        Value::String(s) => Ok(Some(s.clone())),
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|item| match item {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(CliError::Usage(format!("config key {key:?}: arrays hold numbers or strings"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Some(parts.join(",")))
        }
        Value::Bool(true) | Value::Object(_) => unreachable!(),
    }
}

/// Flags for `command` from the config text.
pub fn flags_for(text: &str, command: &str) -> Result<Vec<OsString>, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
    let Value::Object(sections) = root else {
        return Err(CliError::Usage("config must be a JSON object of subcommand sections".into()));
    };
    let Some(section) = sections.get(command) else {
        return Ok(Vec::new());
    };
    let Value::Object(entries) = section else {
        return Err(CliError::Usage(format!("config section {command:?} must be an object")));
    };
    let mut out = Vec::new();
    for (key, v) in entries {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Object(_) => {
                return Err(CliError::Usage(format!("config key {key:?} must not be an object")));
            }
            _ => {
                if let Some(s) = scalar(key, v)? {
                    out.push(flag.into());
                    out.push(s.into());
                }
            }
        }
    }
    Ok(out)
}

/// Removes `--config PATH` from `args` and splices the flags of the named
/// subcommand's section right after the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    if let Some(prog) = it.next() {
        rest.push(prog);
    }
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a path".into()))?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", Path::new(&path).display())))?;
    let Some(pos) = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(rest);
    };
    let pos = pos + 1;
    let command = rest[pos].to_string_lossy().into_owned();
    let flags = flags_for(&text, &command)?;
    let tail = rest.split_off(pos + 1);
    rest.extend(flags);
    rest.extend(tail);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: Vec<OsString>) -> Vec<String> {
        v.into_iter().map(|s| s.into_string().unwrap()).collect()
    }

    #[test]
    fn sections_become_flags() {
        let text = r#"{"verify": {"walkers": 20, "no_surgery": true, "format": ["json", "csv"], "seed": null},
                       "plan": {"r1": 6}}"#;
        assert_eq!(
            strings(flags_for(text, "verify").unwrap()),
            ["--format", "json,csv", "--no-surgery", "--walkers", "20"]
        );
        assert!(flags_for(text, "model").unwrap().is_empty());
        assert!(flags_for("[1]", "plan").is_err());
        assert!(flags_for("{\"plan\": {\"r1\": {}}}", "plan").is_err());
    }
}
