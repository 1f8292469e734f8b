//! Flat sectioned `key = value` run configuration.
//!
//! Four sections describe a run: `[grid]`, `[physics]`, `[solver]`,
//! `[guesses]`, plus an optional `[output]`. Keys are flat, values are
//! whitespace- or comma-separated scalars. Parse errors carry the line
//! number of the offending entry.

use spings::grid::GridSpec;
use spings::guess::GuessKind;
use spings::physics::PhysicsParams;
use spings::potential::TrapPotential;
use spings::precond::PrecondKind;
use spings::solver::{SolverConfig, StopKind, StopRule};
use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }
    fn general(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pcg,
    CmPcg,
    Pgf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuessPlan {
    Triple([GuessKind; 3]),
    SweepIdentical(Vec<GuessKind>),
    SweepAll(Vec<GuessKind>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitSet {
    pub field: bool,
    pub csv: bool,
    pub summary: bool,
    pub density: bool,
}

impl Default for EmitSet {
    fn default() -> Self {
        Self { field: true, csv: true, summary: true, density: true }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub coarsest_points: Option<Vec<usize>>,
    pub params: PhysicsParams,
    pub method: Method,
    pub solver: SolverConfig,
    pub dt: Option<f64>,
    pub compare_pgf: bool,
    pub guesses: GuessPlan,
    pub output_dir: PathBuf,
    pub emit: EmitSet,
}

struct Entry {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

struct Sections {
    map: HashMap<(String, String), Entry>,
}

impl Sections {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = HashMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    ConfigError::at(line_no, format!("malformed section header '{raw}'"))
                })?;
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(ConfigError::at(line_no, format!("expected 'key = value', got '{line}'")));
            };
            if section.is_empty() {
                return Err(ConfigError::at(line_no, "entry before any [section] header"));
            }
            let key = line[..eq].trim().to_ascii_lowercase();
            let value = line[eq + 1..].trim().to_string();
            if map
                .insert(
                    (section.clone(), key.clone()),
                    Entry { line: line_no, value, used: std::cell::Cell::new(false) },
                )
                .is_some()
            {
                return Err(ConfigError::at(line_no, format!("duplicate key '{key}' in [{section}]")));
            }
        }
        Ok(Self { map })
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.map.get(&(section.to_string(), key.to_string()));
        if let Some(e) = e {
            e.used.set(true);
        }
        e
    }

    fn require(&self, section: &str, key: &str) -> Result<&Entry, ConfigError> {
        self.get(section, key).ok_or_else(|| {
            ConfigError::general(format!("missing key '{key}' in section [{section}]"))
        })
    }

    fn unused(&self) -> Option<(&str, &str, usize)> {
        self.map
            .iter()
            .filter(|(_, e)| !e.used.get())
            .min_by_key(|(_, e)| e.line)
            .map(|((s, k), e)| (s.as_str(), k.as_str(), e.line))
    }
}

fn parse_scalar<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<T, ConfigError> {
    e.value
        .parse::<T>()
        .map_err(|_| ConfigError::at(e.line, format!("cannot parse '{}' as {what}", e.value)))
}

fn parse_list<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<Vec<T>, ConfigError> {
    e.value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| ConfigError::at(e.line, format!("cannot parse '{s}' as {what}")))
        })
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::general(format!("cannot read config '{}': {e}", path.display()))
        })?;
        let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
        Self::from_str_with_base(&text, &base)
    }

    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let s = Sections::parse(text)?;

        // [grid]
        let dim: usize = parse_scalar(s.require("grid", "dim")?, "an integer")?;
        let half_width: Vec<f64> = parse_list(s.require("grid", "half_width")?, "a number")?;
        let points: Vec<usize> = parse_list(s.require("grid", "points")?, "an integer")?;
        let grid = GridSpec::new(dim, &half_width, &points)
            .map_err(|e| ConfigError::general(format!("[grid]: {e}")))?;
        let coarsest_points = match s.get("grid", "coarsest_points") {
            Some(e) => Some(parse_list::<usize>(e, "an integer")?),
            None => None,
        };

        // [physics]
        let c0: f64 = parse_scalar(s.require("physics", "c0")?, "a number")?;
        let c1: f64 = parse_scalar(s.require("physics", "c1")?, "a number")?;
        let omega: f64 = parse_scalar(s.require("physics", "omega")?, "a number")?;
        let gamma_soc: f64 = parse_scalar(s.require("physics", "gamma")?, "a number")?;
        let trap_entry = s.require("physics", "trap")?;
        let trap = match trap_entry.value.to_ascii_lowercase().as_str() {
            "harmonic" => {
                let freqs = match s.get("physics", "trap_frequencies") {
                    Some(e) => parse_list::<f64>(e, "a number")?,
                    None => vec![1.0; dim],
                };
                TrapPotential::Harmonic { freqs }
            }
            "harmonic_quartic" => TrapPotential::HarmonicQuartic {
                a2: parse_scalar(s.require("physics", "trap_a2")?, "a number")?,
                a4: parse_scalar(s.require("physics", "trap_a4")?, "a number")?,
            },
            "tabulated" => {
                let file = s.require("physics", "trap_file")?;
                let p = base.join(&file.value);
                let text = std::fs::read_to_string(&p).map_err(|e| {
                    ConfigError::at(file.line, format!("cannot read trap file '{}': {e}", p.display()))
                })?;
                let values: Result<Vec<f64>, _> = text
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| {
                            ConfigError::at(file.line, format!("bad trap value '{t}'"))
                        })
                    })
                    .collect();
                TrapPotential::Tabulated { values: values? }
            }
            other => {
                return Err(ConfigError::at(
                    trap_entry.line,
                    format!("unknown trap kind '{other}' (harmonic | harmonic_quartic | tabulated)"),
                ))
            }
        };
        let params = PhysicsParams { c0, c1, omega, gamma_soc, trap };
        params
            .trap
            .validate(&grid)
            .map_err(|e| ConfigError::general(format!("[physics]: {e}")))?;

        // [solver]
        let method_entry = s.require("solver", "method")?;
        let method = match method_entry.value.to_ascii_lowercase().as_str() {
            "pcg" => Method::Pcg,
            "cm_pcg" => Method::CmPcg,
            "pgf" => Method::Pgf,
            other => {
                return Err(ConfigError::at(
                    method_entry.line,
                    format!("unknown method '{other}' (pcg | cm_pcg | pgf)"),
                ))
            }
        };
        let mut solver = SolverConfig::default();
        if let Some(e) = s.get("solver", "preconditioner") {
            solver.preconditioner = match e.value.to_ascii_lowercase().as_str() {
                "kinetic" => PrecondKind::Kinetic,
                "potential" => PrecondKind::Potential,
                "combined" => PrecondKind::Combined,
                "none" => PrecondKind::None,
                other => {
                    return Err(ConfigError::at(
                        e.line,
                        format!("unknown preconditioner '{other}'"),
                    ))
                }
            };
        }
        if let Some(e) = s.get("solver", "stop") {
            let kind = match e.value.to_ascii_lowercase().as_str() {
                "wavefn_diff" => StopKind::WavefnDiff,
                "residual_inf" => StopKind::ResidualInf,
                "energy_diff" => StopKind::EnergyDiff,
                other => {
                    return Err(ConfigError::at(e.line, format!("unknown stop criterion '{other}'")))
                }
            };
            solver.stop = StopRule { kind, tol: solver.stop.tol };
        }
        if let Some(e) = s.get("solver", "tol") {
            solver.stop.tol = parse_scalar(e, "a number")?;
        }
        if let Some(e) = s.get("solver", "theta_trial") {
            solver.theta_trial = parse_scalar(e, "a number")?;
        }
        if let Some(e) = s.get("solver", "backtrack_factor") {
            solver.backtrack_factor = parse_scalar(e, "a number")?;
        }
        if let Some(e) = s.get("solver", "max_iters") {
            solver.max_iters = parse_scalar(e, "an integer")?;
        }
        if let Some(e) = s.get("solver", "max_backtracks") {
            solver.max_backtracks = parse_scalar(e, "an integer")?;
        }
        solver
            .validate()
            .map_err(|e| ConfigError::general(format!("[solver]: {e}")))?;
        let dt = match s.get("solver", "dt") {
            Some(e) => Some(parse_scalar::<f64>(e, "a number")?),
            None => None,
        };
        let compare_pgf = match s.get("solver", "compare_pgf") {
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "on" | "true" | "yes" => true,
                "off" | "false" | "no" => false,
                other => {
                    return Err(ConfigError::at(e.line, format!("bad compare_pgf value '{other}'")))
                }
            },
            None => false,
        };
        if method == Method::Pgf && dt.is_none() {
            return Err(ConfigError::general(
                "missing key 'dt' in section [solver] (required by method = pgf)",
            ));
        }
        if method == Method::CmPcg && coarsest_points.is_none() {
            return Err(ConfigError::general(
                "missing key 'coarsest_points' in section [grid] (required by method = cm_pcg)",
            ));
        }
        if let Some(cp) = &coarsest_points {
            GridSpec::new(dim, &half_width, cp)
                .map_err(|e| ConfigError::general(format!("[grid] coarsest_points: {e}")))?;
        }

        // [guesses]
        let guesses = if let Some(e) = s.get("guesses", "tags") {
            let tags: Vec<&str> = e.value.split_whitespace().collect();
            if tags.len() != 3 {
                return Err(ConfigError::at(
                    e.line,
                    format!("expected three guess tags, got {}", tags.len()),
                ));
            }
            let parse = |t: &str| {
                GuessKind::parse(t).map_err(|err| ConfigError::at(e.line, err.to_string()))
            };
            GuessPlan::Triple([parse(tags[0])?, parse(tags[1])?, parse(tags[2])?])
        } else if let Some(e) = s.get("guesses", "mode") {
            let set = match s.get("guesses", "sweep_tags") {
                Some(t) => t
                    .value
                    .split_whitespace()
                    .map(|x| GuessKind::parse(x).map_err(|err| ConfigError::at(t.line, err.to_string())))
                    .collect::<Result<Vec<_>, _>>()?,
                None => GuessKind::ALL.to_vec(),
            };
            match e.value.to_ascii_lowercase().as_str() {
                "sweep-identical" => GuessPlan::SweepIdentical(set),
                "sweep-all" => GuessPlan::SweepAll(set),
                other => {
                    return Err(ConfigError::at(e.line, format!("unknown guesses mode '{other}'")))
                }
            }
        } else {
            return Err(ConfigError::general(
                "section [guesses] needs either 'tags' or 'mode'",
            ));
        };

        // [output]
        let output_dir = match s.get("output", "directory") {
            Some(e) => base.join(&e.value),
            None => base.join("out"),
        };
        let emit = match s.get("output", "emit") {
            Some(e) => {
                let mut set = EmitSet { field: false, csv: false, summary: false, density: false };
                for part in e.value.split(|c: char| c.is_whitespace() || c == ',') {
                    match part.trim().to_ascii_lowercase().as_str() {
                        "" => {}
                        "field" => set.field = true,
                        "csv" => set.csv = true,
                        "summary" => set.summary = true,
                        "density" => set.density = true,
                        other => {
                            return Err(ConfigError::at(e.line, format!("unknown emit item '{other}'")))
                        }
                    }
                }
                set
            }
            None => EmitSet::default(),
        };

        if let Some((sec, key, line)) = s.unused() {
            return Err(ConfigError::at(line, format!("unknown key '{key}' in [{sec}]")));
        }

        Ok(RunConfig {
            grid,
            coarsest_points,
            params,
            method,
            solver,
            dt,
            compare_pgf,
            guesses,
            output_dir,
            emit,
        })
    }

    pub fn coarsest_grid(&self) -> Option<GridSpec> {
        self.coarsest_points
            .as_ref()
            .map(|p| GridSpec::new(self.grid.dim(), self.grid.half_width(), p).expect("validated"))
    }
}
