//! Line-oriented configuration files: `[section]` headers, `key = value`
//! pairs, `#` comments.  Unknown sections or keys are rejected so typos
//! surface instead of silently falling back to defaults.

use std::collections::HashMap;

use crate::CliError;

const SCHEMA: &[(&str, &[&str])] = &[
    ("detector", &["kind"]),
    ("spec", &["p0", "p1", "alpha", "beta"]),
    ("params", &["a", "b", "zeta"]),
    ("trwa", &["k0", "k1", "horizon"]),
    (
        "triple",
        &[
            "p0", "p1", "p0_lo", "p0_hi", "p1_lo", "p1_hi", "delta0", "delta1", "delta2", "kmax",
        ],
    ),
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: HashMap<(String, String), String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        CliError::InvalidConfig(format!("line {lineno}: unterminated section"))
                    })?
                    .trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(CliError::InvalidConfig(format!(
                        "line {lineno}: unknown section [{name}]"
                    )));
                }
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::InvalidConfig(format!(
                    "line {lineno}: expected `key = value`, got `{line}`"
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            if section.is_empty() {
                return Err(CliError::InvalidConfig(format!(
                    "line {lineno}: `{key}` appears before any [section]"
                )));
            }
            let allowed = SCHEMA
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| keys.contains(&key))
                .unwrap_or(false);
            if !allowed {
                return Err(CliError::InvalidConfig(format!(
                    "line {lineno}: unknown key `{key}` in section [{section}]"
                )));
            }
            if values
                .insert((section.clone(), key.to_string()), value.to_string())
                .is_some()
            {
                return Err(CliError::InvalidConfig(format!(
                    "line {lineno}: duplicate key `{key}` in section [{section}]"
                )));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        self.get(section, key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    CliError::InvalidConfig(format!("[{section}] {key} = {v} is not a number"))
                })
            })
            .transpose()
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<Option<u64>, CliError> {
        self.get(section, key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| {
                    CliError::InvalidConfig(format!("[{section}] {key} = {v} is not an integer"))
                })
            })
            .transpose()
    }
}
