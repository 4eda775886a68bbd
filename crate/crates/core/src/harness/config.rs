use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::Error;
use crate::flow::{DEFAULT_C1, DEFAULT_C2};
use crate::mms::case_by_name;
use crate::sparse::{LinearSolver, Preconditioner};
use crate::Method;

/// Environment variables `STABFEM_<KEY>` override config-file keys.
pub const ENV_PREFIX: &str = "STABFEM_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSelection {
    Galerkin,
    Sgs,
    Both,
}

impl MethodSelection {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSelection::Galerkin => vec![Method::Galerkin],
            MethodSelection::Sgs => vec![Method::Sgs],
            MethodSelection::Both => vec![Method::Galerkin, Method::Sgs],
        }
    }
}

impl FromStr for MethodSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "galerkin" => Ok(MethodSelection::Galerkin),
            "sgs" => Ok(MethodSelection::Sgs),
            "both" => Ok(MethodSelection::Both),
            other => Err(format!("unknown method '{other}' (expected galerkin, sgs or both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Lu,
    Bicgstab,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Lu => "lu",
            SolverKind::Bicgstab => "bicgstab",
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lu" => Ok(SolverKind::Lu),
            "bicgstab" => Ok(SolverKind::Bicgstab),
            other => Err(format!("unknown solver '{other}' (expected lu or bicgstab)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: String,
    pub method: MethodSelection,
    pub meshes: Vec<usize>,
    pub solver: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub c2: f64,
    pub out: Option<PathBuf>,
    pub markdown: Option<PathBuf>,
    pub vtk: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: "smooth".into(),
            method: MethodSelection::Both,
            meshes: vec![10, 20, 40, 80, 160],
            solver: SolverKind::Lu,
            tol: 1e-10,
            max_iter: 20_000,
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            out: None,
            markdown: None,
            vtk: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Error>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key} = '{value}': {e}")))
}

fn parse_meshes(value: &str) -> Result<Vec<usize>, Error> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse::<usize>("meshes", s))
        .collect()
}

impl RunConfig {
    /// Known keys, in the spelling used by config files.
    pub const KEYS: [&'static str; 11] = [
        "case", "method", "meshes", "solver", "tol", "max_iter", "c1", "c2", "out", "markdown", "vtk",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let v = value.trim();
        match key.trim() {
            "case" => self.case = v.to_string(),
            "method" => self.method = parse(key, v)?,
            "meshes" => self.meshes = parse_meshes(v)?,
            "solver" => self.solver = parse(key, v)?,
            "tol" => self.tol = parse(key, v)?,
            "max_iter" => self.max_iter = parse(key, v)?,
            "c1" => self.c1 = parse(key, v)?,
            "c2" => self.c2 = parse(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "markdown" => self.markdown = Some(PathBuf::from(v)),
            "vtk" => self.vtk = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Flat `key = value` lines; `#` starts a comment.
    pub fn parse_file_contents(text: &str) -> Result<BTreeMap<String, String>, Error> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(map)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (k, v) in Self::parse_file_contents(&text)? {
            self.set(&k, &v)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    /// Environment name of a config key: uppercased, dots to underscores.
    pub fn env_name(key: &str) -> String {
        format!("{ENV_PREFIX}{}", key.to_ascii_uppercase().replace('.', "_"))
    }

    pub fn apply_env_from(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), Error> {
        for key in Self::KEYS {
            let name = Self::env_name(key);
            if let Some(v) = lookup(&name) {
                self.set(key, &v).map_err(|e| Error::Config(format!("{name}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn apply_env(&mut self) -> Result<(), Error> {
        self.apply_env_from(|name| std::env::var(name).ok())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if case_by_name(&self.case).is_none() {
            return Err(Error::Config(format!(
                "unknown case '{}' (expected smooth, small-diffusion or diffusion-dominated)",
                self.case
            )));
        }
        let Some(&first) = self.meshes.first() else {
            return Err(Error::Config("mesh list is empty".into()));
        };
        if first == 0 {
            return Err(Error::Config("mesh sizes must be positive".into()));
        }
        for w in self.meshes.windows(2) {
            if w[1] <= w[0] || w[1] % first != 0 || !(w[1] / first).is_power_of_two() {
                return Err(Error::Config(format!(
                    "mesh list must be strictly increasing power-of-two multiples of {first}, got {:?}",
                    self.meshes
                )));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return Err(Error::Config("c1 and c2 must be positive".into()));
        }
        Ok(())
    }

    pub fn linear_solver(&self) -> LinearSolver {
        match self.solver {
            SolverKind::Lu => LinearSolver::Lu,
            SolverKind::Bicgstab => LinearSolver::Bicgstab {
                tol: self.tol,
                max_iter: self.max_iter,
                preconditioner: Preconditioner::Ilu0,
            },
        }
    }
}
