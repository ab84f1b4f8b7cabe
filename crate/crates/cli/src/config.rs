//! Run configuration: command-line flags merged over an optional
//! `key=value` file.
//!
//! Every value is kept as the string the user wrote and parsed on access.
//! Accessors record the keys a command actually read, together with the
//! value used (defaults included), so that certificates can carry their
//! inputs and be recomputed later.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use torus_spread::Point;

use crate::Failure;

/// Every key accepted on the command line or in a config file.
pub const KEYS: &[&str] = &[
    "n",
    "q",
    "m",
    "alpha",
    "eps",
    "tol",
    "kmax",
    "grid-spacing",
    "rho",
    "grid-density",
    "directions",
    "threshold",
    "iters",
    "center",
    "json",
    "csv",
    "svg",
    "seed",
    "family",
    "omega",
    "coupling",
    "y0",
    "map",
    "mode",
    "identity-map",
    "allow-rational",
];

/// Keys naming output files; never recorded as inputs.
const OUTPUT_KEYS: &[&str] = &["json", "csv", "svg"];

#[derive(Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

impl Clone for RunConfig {
    fn clone(&self) -> Self {
        RunConfig::from_map(self.values.clone())
    }
}

impl PartialEq for RunConfig {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl RunConfig {
    pub fn from_map(values: BTreeMap<String, String>) -> Self {
        RunConfig {
            values,
            used: RefCell::default(),
        }
    }

    /// Parses `key=value` lines. Blank lines and lines starting with `#`
    /// are skipped; unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Failure::usage(format!(
                    "config line {}: expected key=value, got {line:?}",
                    i + 1
                ))
            })?;
            let key = key.trim();
            check_key(key)
                .map_err(|f| Failure::usage(format!("config line {}: {}", i + 1, f.message)))?;
            if values
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Failure::usage(format!(
                    "config line {}: duplicate key {key}",
                    i + 1
                )));
            }
        }
        Ok(RunConfig::from_map(values))
    }

    /// The inverse of [`RunConfig::parse`].
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// `other` wins on shared keys.
    pub fn merged(mut self, other: RunConfig) -> RunConfig {
        self.values.extend(other.values);
        RunConfig::from_map(self.values)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), Failure> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Keys read so far with the values used, output paths excluded.
    pub fn used(&self) -> BTreeMap<String, String> {
        self.used.borrow().clone()
    }

    fn record(&self, key: &str, value: String) {
        if !OUTPUT_KEYS.contains(&key) {
            self.used.borrow_mut().insert(key.to_string(), value);
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let v = self.values.get(key).map(String::as_str);
        if let Some(v) = v {
            self.record(key, v.to_string());
        }
        v
    }

    pub fn output(&self, key: &str) -> Option<&str> {
        debug_assert!(OUTPUT_KEYS.contains(&key));
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::usage(format!("--{key}: cannot parse {v:?}"))),
        }
    }

    /// Value of `key`, or `default` (recorded as used) when absent.
    pub fn get_or<T: FromStr + ToString>(&self, key: &str, default: T) -> Result<T, Failure> {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, Failure> {
        self.get(key)?
            .ok_or_else(|| Failure::usage(format!("--{key} is required")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, Failure> {
        match self.raw(key) {
            None => Ok(false),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Failure::usage(format!(
                "--{key}: expected true or false, got {v:?}"
            ))),
        }
    }

    /// `m` as a number, or `None` for `auto` and when absent.
    pub fn m_or_auto(&self) -> Result<Option<u64>, Failure> {
        match self.raw("m") {
            None => {
                self.record("m", "auto".into());
                Ok(None)
            }
            Some("auto") => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Failure::usage(format!(
                    "--m: expected a positive integer or auto, got {v:?}"
                ))
            }),
        }
    }

    pub fn point(&self, key: &str) -> Result<Option<Point>, Failure> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let parse = || -> Option<Point> {
            let (x, y) = v.split_once(',')?;
            let p = Point::new(x.trim().parse().ok()?, y.trim().parse().ok()?);
            p.is_finite().then_some(p)
        };
        parse()
            .map(Some)
            .ok_or_else(|| Failure::usage(format!("--{key}: expected x,y, got {v:?}")))
    }
}

fn check_key(key: &str) -> Result<(), Failure> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Failure::usage(format!("unknown key {key:?}")))
    }
}
