use std::path::Path;

use ttn_born::Error;

use crate::CliError;

const SUBCOMMANDS: [&str; 5] = ["train", "eval", "sample", "correlate", "gen-random"];
const SWITCHES: [&str; 2] = ["timing", "distinct"];

/// Parses `key = value` lines into long-flag arguments.
fn read_config(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            column: 1,
            message: format!("expected `key = value`, found {line:?}"),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key == "config" {
            return Err(Error::Parse {
                line: i + 1,
                column: 1,
                message: "config files cannot include other config files".into(),
            }
            .into());
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" => args.push(format!("--{key}")),
                "false" => {}
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        column: 1,
                        message: format!("{key} takes true or false"),
                    }
                    .into())
                }
            }
        } else {
            args.push(format!("--{key}"));
            args.push(value.to_string());
        }
    }
    Ok(args)
}

/// Splices the flags of a `--config` file in front of the command-line
/// flags, so that explicit flags override file values.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let extra = read_config(Path::new(&path))?;
    let Some(at) = args.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let mut out = args[..=at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}
