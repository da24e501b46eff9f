use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};

/// A bad flag, config value or config file; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(usage(format!("config line {}: expected `key = value`", no + 1)));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(usage(format!("config line {}: empty key", no + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: Option<&Path>) -> Result<BTreeMap<String, String>> {
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse_config(&text)
        }
    }
}

/// Resolves each parameter as flag, then config file, then default, and
/// records the resolved value for the run manifest.
pub struct Resolver {
    file: BTreeMap<String, String>,
    pub manifest: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Self { file, manifest: Vec::new() }
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.get(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|e| usage(format!("config key {key}: {e}"))),
        }
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    /// Boolean switch: set by the flag, or by `key = true` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        let v = flag || self.file_value::<bool>(key)?.unwrap_or(false);
        self.record(key, &v);
        Ok(v)
    }

    pub fn record(&mut self, key: &str, v: &dyn Display) {
        self.manifest.retain(|(k, _)| k != key);
        self.manifest.push((key.to_string(), v.to_string()));
    }

    /// File keys that no parameter asked for.
    pub fn unused(&self) -> Vec<&str> {
        self.file
            .keys()
            .filter(|k| k.as_str() != "command" && !self.manifest.iter().any(|(m, _)| m == *k))
            .map(String::as_str)
            .collect()
    }

    pub fn manifest_text(&self, command: &str) -> String {
        let mut out = format!("command = {command}\n");
        for (k, v) in &self.manifest {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// Grid given as `start:stop:count` (inclusive endpoints), a comma list,
/// or a single value. Displays as it was written so manifests re-parse to
/// the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    text: String,
    pub values: Vec<f64>,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad number {x:?}: {e}"));
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("range {s:?} must be start:stop:count"));
            }
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let count: usize = parts[2].trim().parse().map_err(|e| format!("bad count in {s:?}: {e}"))?;
            match count {
                0 => return Err(format!("range {s:?} has zero points")),
                1 if a != b => return Err(format!("range {s:?}: one point needs start = stop")),
                1 => vec![a],
                _ => (0..count).map(|k| a + (b - a) * k as f64 / (count - 1) as f64).collect(),
            }
        } else {
            s.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("grid {s:?} has non-finite values"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(format!("grid {s:?} must be strictly increasing"));
        }
        Ok(Grid { text: s.to_string(), values })
    }
}

impl Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Comma-separated list of sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeList(pub Vec<usize>);

impl FromStr for SizeList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v = s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|e| format!("bad size {x:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("empty size list".into());
        }
        Ok(SizeList(v))
    }
}

impl Display for SizeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp.{}", std::process::id()));
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
