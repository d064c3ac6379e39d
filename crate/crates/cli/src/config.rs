//! Flat `key = value` configuration files with `[section]` headers.
//!
//! Values are applied on top of the preset of the selected experiment, and
//! command-line flags are applied on top of the file.

use std::path::{Path, PathBuf};

use bpfem::experiments::{ExperimentConfig, ExperimentId, MeshSource, ReactionModel, FIXED_H_CELLS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), message: message.into() }
    }

    pub fn new(message: impl Into<String>) -> Self {
        ConfigError { line: None, message: message.into() }
    }
}

pub const SECTIONS: [(&str, &[&str]); 6] = [
    ("experiment", &["id", "degree", "levels"]),
    ("mesh", &["family", "n", "level", "path", "apex_shift"]),
    (
        "problem",
        &["eps", "eps_values", "mu", "p", "anisotropy", "theta", "source", "marker_values", "discbc_closed_ones"],
    ),
    ("solver", &["alpha", "omega", "tol", "max_iter", "auto_damp", "small_eps_omega", "small_eps_threshold"]),
    ("bounds", &["lower", "upper"]),
    ("output", &["dir"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parsed file contents, not yet interpreted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: Vec<Entry>,
    /// relative mesh paths resolve against this directory
    pub base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, format!("malformed section header `{content}`")))?
                    .trim();
                if !SECTIONS.iter().any(|s| s.0 == name) {
                    return Err(ConfigError::at(line, format!("unknown section `{name}`")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.as_deref().ok_or_else(|| ConfigError::at(line, format!("key `{key}` outside of a section")))?;
            let known = SECTIONS.iter().find(|s| s.0 == sec).map_or(&[][..], |s| s.1);
            if !known.contains(&key) {
                return Err(ConfigError::at(line, format!("unknown key `{key}` in section [{sec}]")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("empty value for `{sec}.{key}`")));
            }
            if let Some(prev) = entries.iter().find(|e| e.section == sec && e.key == key) {
                return Err(ConfigError::at(line, format!("duplicate key `{sec}.{key}` (first set on line {})", prev.line)));
            }
            entries.push(Entry { section: sec.into(), key: key.into(), value: value.into(), line });
        }
        Ok(RawConfig { entries, base_dir: PathBuf::new() })
    }

    pub fn read(path: &Path) -> Result<RawConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        let mut raw = RawConfig::parse(&text)?;
        raw.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(raw)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    pub fn experiment_id(&self) -> Result<Option<ExperimentId>, ConfigError> {
        self.get("experiment", "id").map(|e| e.value.parse().map_err(|_| ConfigError::at(e.line, format!("unknown experiment `{}`", e.value)))).transpose()
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.get("output", "dir").map(|e| self.base_dir.join(&e.value))
    }

    /// Applies every key except `experiment.id` and `output.dir` to `cfg`.
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        let mut mu = None;
        let mut p = None;
        let mut family = None;
        let mut n = None;
        let mut level = None;
        let mut path = None;
        for e in &self.entries {
            let line = e.line;
            let v = e.value.as_str();
            match (e.section.as_str(), e.key.as_str()) {
                ("experiment", "id") | ("output", "dir") => {}
                ("experiment", "degree") => cfg.degree = parse_num(v, line)?,
                ("experiment", "levels") => cfg.levels = parse_levels(v).map_err(|m| ConfigError::at(line, m))?,
                ("mesh", "family") => family = Some((v.to_string(), line)),
                ("mesh", "n") => n = Some(parse_num::<usize>(v, line)?),
                ("mesh", "level") => level = Some(parse_num::<usize>(v, line)?),
                ("mesh", "path") => path = Some(self.base_dir.join(v)),
                ("mesh", "apex_shift") => cfg.apex_shift = parse_num(v, line)?,
                ("problem", "eps") => cfg.eps = parse_num(v, line)?,
                ("problem", "eps_values") => cfg.eps_values = parse_list(v, line)?,
                ("problem", "mu") => mu = Some(parse_num::<f64>(v, line)?),
                ("problem", "p") => p = Some(parse_num::<f64>(v, line)?),
                ("problem", "anisotropy") => {
                    let a: Vec<f64> = parse_list(v, line)?;
                    let [a0, a1] = a[..] else {
                        return Err(ConfigError::at(line, "anisotropy needs two eigenvalues"));
                    };
                    cfg.anisotropy = (a0, a1);
                }
                ("problem", "theta") => cfg.theta = parse_num(v, line)?,
                ("problem", "source") => cfg.source = parse_num(v, line)?,
                ("problem", "marker_values") => cfg.marker_values = parse_markers(v, line)?,
                ("problem", "discbc_closed_ones") => cfg.discbc_closed_ones = parse_bool(v, line)?,
                ("solver", "alpha") => cfg.solver.alpha = parse_num(v, line)?,
                ("solver", "omega") => cfg.solver.omega = parse_num(v, line)?,
                ("solver", "tol") => cfg.solver.tol = parse_num(v, line)?,
                ("solver", "max_iter") => cfg.solver.max_iter = parse_num(v, line)?,
                ("solver", "auto_damp") => cfg.solver.auto_damp = parse_bool(v, line)?,
                ("solver", "small_eps_omega") => cfg.small_eps_omega = parse_num(v, line)?,
                ("solver", "small_eps_threshold") => cfg.small_eps_threshold = parse_num(v, line)?,
                ("bounds", "lower") => cfg.lower = parse_num(v, line)?,
                ("bounds", "upper") => cfg.upper = parse_num(v, line)?,
                (s, k) => return Err(ConfigError::at(line, format!("unknown key `{k}` in section [{s}]"))),
            }
        }
        match (mu, p) {
            (Some(_), Some(_)) => {
                let line = self.get("problem", "p").map_or(0, |e| e.line);
                return Err(ConfigError::at(line, "`mu` and `p` are mutually exclusive"));
            }
            (Some(mu), None) => cfg.reaction = ReactionModel::Linear { mu },
            (None, Some(p)) => cfg.reaction = ReactionModel::Power { p },
            (None, None) => {}
        }
        let family = match family {
            Some((f, line)) => Some(match f.as_str() {
                "criss-cross" | "obtuse" | "file" => f,
                other => return Err(ConfigError::at(line, format!("unknown mesh family `{other}`"))),
            }),
            None if path.is_some() => Some("file".into()),
            None if level.is_some() => Some("obtuse".into()),
            None if n.is_some() => Some("criss-cross".into()),
            None => None,
        };
        match family.as_deref() {
            Some("criss-cross") => cfg.mesh = MeshSource::CrissCross { n: n.unwrap_or(FIXED_H_CELLS) },
            Some("obtuse") => cfg.mesh = MeshSource::ObtuseLayer { level: level.unwrap_or(5) },
            Some("file") => {
                let line = self.get("mesh", "family").map_or(0, |e| e.line);
                cfg.mesh = MeshSource::File(path.ok_or_else(|| ConfigError::at(line, "mesh family `file` needs `path`"))?);
            }
            _ => {}
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(v: &str, line: usize) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::at(line, format!("invalid number `{v}`")))
}

fn parse_bool(v: &str, line: usize) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::at(line, format!("invalid boolean `{v}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(v: &str, line: usize) -> Result<Vec<T>, ConfigError> {
    v.split(',').map(|x| parse_num(x.trim(), line)).collect()
}

fn parse_markers(v: &str, line: usize) -> Result<Vec<(i32, f64)>, ConfigError> {
    v.split(',')
        .map(|item| {
            let (m, x) = item
                .split_once(':')
                .ok_or_else(|| ConfigError::at(line, format!("expected `marker:value`, found `{}`", item.trim())))?;
            Ok((parse_num(m.trim(), line)?, parse_num(x.trim(), line)?))
        })
        .collect()
}

/// `3,4,5`, `3-6` or a mix of both.
pub fn parse_levels(v: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim) {
        let bad = || format!("invalid level list `{v}`");
        match item.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(item.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}
