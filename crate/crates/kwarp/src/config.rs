//! Flat `key = value` run configuration, with command-line flags taking precedence.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub struct Cfg {
    command: String,
    file: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
    resolved: RefCell<BTreeMap<String, String>>,
}

/// Parses `key = value` lines; `#` starts a comment, dashes in keys read as underscores.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::config(format!("config line {}: expected key = value, got `{}`", no + 1, raw.trim())));
        };
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(CliError::config(format!("config line {}: empty key", no + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::config(format!("config key `{key}` given twice")));
        }
    }
    Ok(out)
}

impl Cfg {
    pub fn load(command: &str, path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
                parse_pairs(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(c) = file.get("command") {
            if c != command {
                return Err(CliError::config(format!("config is for `{c}`, not `{command}`")));
            }
        }
        let cfg = Cfg { command: command.to_string(), file, used: RefCell::new(BTreeSet::new()), resolved: RefCell::new(BTreeMap::new()) };
        cfg.used.borrow_mut().insert("command".into());
        Ok(cfg)
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.used.borrow_mut().insert(key.to_string());
        match self.file.get(key) {
            Some(v) => v.parse().map(Some).map_err(|_| CliError::config(format!("bad value `{v}` for key `{key}`"))),
            None => Ok(None),
        }
    }

    /// Flag, else file, else nothing.
    pub fn opt<T: FromStr + Display>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        self.used.borrow_mut().insert(key.to_string());
        if let Some(v) = &v {
            self.resolved.borrow_mut().insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    /// Flag, else file, else `default`.
    pub fn get<T: FromStr + Display>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.resolved.borrow_mut().insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Rejects file keys the command never asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.file.keys().filter(|k| !used.contains(*k)).collect();
        if !unknown.is_empty() {
            let list: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            return Err(CliError::config(format!("unknown config keys for `{}`: {}", self.command, list.join(", "))));
        }
        Ok(())
    }

    /// The resolved configuration as a file that reproduces the run.
    pub fn echo(&self) -> String {
        let mut out = format!("command = {}\n", self.command);
        for (k, v) in self.resolved.borrow().iter() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
