//! Flat structured-text config: `[section]` headers with `key = value`
//! lines, `#` comments, scalar or comma-list values. Unknown sections and
//! keys are rejected so typos cannot silently change an experiment.

use crate::CliError;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct Config {
    /// section -> key -> raw value, in file order inside BTreeMaps for
    /// deterministic echoes.
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            if current.is_empty() {
                return Err(CliError::Validation(format!(
                    "line {}: `{}` appears before any [section]",
                    lineno + 1,
                    key.trim()
                )));
            }
            let prev = sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
            if prev.is_some() {
                return Err(CliError::Validation(format!(
                    "duplicate key `{}` in section [{current}]",
                    key.trim()
                )));
            }
        }
        Ok(Self { sections })
    }

    pub fn section(&self, name: &str) -> Result<&BTreeMap<String, String>, CliError> {
        self.sections
            .get(name)
            .ok_or_else(|| CliError::Validation(format!("missing section [{name}]")))
    }

    /// Rejects any key of `section` outside `allowed`, naming the offender.
    pub fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<(), CliError> {
        if let Some(map) = self.sections.get(section) {
            for key in map.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(CliError::Validation(format!(
                        "unknown key `{key}` in section [{section}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn check_sections(&self, allowed: &[&str]) -> Result<(), CliError> {
        for name in self.sections.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(CliError::Validation(format!("unknown section [{name}]")));
            }
        }
        Ok(())
    }
}

pub fn get_str<'a>(
    map: &'a BTreeMap<String, String>,
    section: &str,
    key: &str,
) -> Result<&'a str, CliError> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| CliError::Validation(format!("missing key `{key}` in section [{section}]")))
}

pub fn parse_scalar<T: std::str::FromStr>(
    raw: &str,
    section: &str,
    key: &str,
) -> Result<T, CliError> {
    raw.parse().map_err(|_| {
        CliError::Validation(format!("key `{key}` in [{section}]: cannot parse `{raw}`"))
    })
}

pub fn get_scalar<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    section: &str,
    key: &str,
) -> Result<T, CliError> {
    parse_scalar(get_str(map, section, key)?, section, key)
}

pub fn get_scalar_or<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    section: &str,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    match map.get(key) {
        Some(raw) => parse_scalar(raw, section, key),
        None => Ok(default),
    }
}

pub fn get_list<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    section: &str,
    key: &str,
) -> Result<Vec<T>, CliError> {
    get_str(map, section, key)?
        .split(',')
        .map(|item| parse_scalar(item.trim(), section, key))
        .collect()
}
