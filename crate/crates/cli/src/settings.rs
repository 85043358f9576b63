//! Flat `key = value` configuration merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Keys are flag names without the leading dashes; `_` and `-` are interchangeable.
pub fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Parse a configuration file: one `key = value` per line, `#` comments.
pub fn parse_config(text: &str, source: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CliError::Config {
            source_name: source.to_string(),
            line: i + 1,
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let key = normalize_key(k);
        if key.is_empty() {
            return Err(err("empty key".into()));
        }
        let value = v.trim().trim_matches('"').to_string();
        if out.insert(key.clone(), value).is_some() {
            return Err(err(format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// File entries first, then flags on top. Unknown keys are rejected.
    pub fn merge(
        file: BTreeMap<String, String>,
        flags: BTreeMap<String, String>,
        known: &[String],
    ) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (k, v) in file.into_iter().chain(flags) {
            if !known.contains(&k) {
                return Err(CliError::usage(format!(
                    "unknown setting `{k}` (known: {})",
                    known.join(", ")
                )));
            }
            values.insert(k, v);
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::usage(format!("invalid value `{v}` for `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::usage(format!("missing required setting `{key}`")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::usage(format!("invalid entry `{s}` in `{key}`: {e}")))
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }
}

/// Flatten resolved parameters back into `key = value` lines, so a run can
/// be repeated with `--config run.conf`.
pub fn to_config_text<P: Serialize>(params: &P) -> CliResult<String> {
    let value = serde_json::to_value(params).map_err(mvgsa::Error::from)?;
    let mut out = String::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let text = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::String(s) => s,
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            out.push_str(&format!("{} = {}\n", normalize_key(&k), text));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_quotes() {
        let m = parse_config(
            "# run\nn_base = 1024\nevaluator = \"direct:ishigami\"  # inline\n\n",
            "c",
        )
        .unwrap();
        assert_eq!(m["n-base"], "1024");
        assert_eq!(m["evaluator"], "direct:ishigami");
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_config("a = 1\nnonsense\n", "cfg.txt").unwrap_err();
        assert_eq!(
            err.to_string(),
            "cfg.txt:2: expected `key = value`, found `nonsense`"
        );
        assert!(parse_config("a = 1\na = 2", "c").is_err());
    }

    #[test]
    fn flags_override_file() {
        let known = vec!["seed".to_string(), "levels".to_string()];
        let file = BTreeMap::from([
            ("seed".to_string(), "1".to_string()),
            ("levels".to_string(), "2, 5".to_string()),
        ]);
        let flags = BTreeMap::from([("seed".to_string(), "9".to_string())]);
        let s = Settings::merge(file, flags, &known).unwrap();
        assert_eq!(s.get::<u64>("seed").unwrap(), Some(9));
        assert_eq!(s.list::<usize>("levels").unwrap(), Some(vec![2, 5]));
        assert!(s.get::<u64>("levels").is_err());
        let bad = BTreeMap::from([("sede".to_string(), "1".to_string())]);
        assert!(Settings::merge(bad, BTreeMap::new(), &known).is_err());
    }

    #[test]
    fn config_text_round_trip() {
        #[derive(Serialize)]
        struct P {
            n_base: usize,
            levels: Vec<usize>,
            name: String,
            skip: Option<u8>,
        }
        let text = to_config_text(&P {
            n_base: 8,
            levels: vec![2, 5],
            name: "x".into(),
            skip: None,
        })
        .unwrap();
        let m = parse_config(&text, "t").unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m["levels"], "2,5");
        assert_eq!(m["n-base"], "8");
    }
}
