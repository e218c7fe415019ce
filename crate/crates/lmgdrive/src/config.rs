//! Declarative sweep configuration (flat TOML) and its expansion into grid points.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};

use lmgdrive_core::bath::default_matsubara_cutoff;
use lmgdrive_core::driving::{DrivePath, Protocol, DEFAULT_GRID, MIN_GRID};
use lmgdrive_core::heom::DEFAULT_ADO_CAP;
use lmgdrive_core::ode::Method;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{AppError, Result};

/// Default temperature window, `log10 T` in `[-0.8, 1.4]`.
pub const DEFAULT_LOG10_T_RANGE: (f64, f64) = (-0.8, 1.4);
pub const DEFAULT_T_POINTS: usize = 12;
pub const DEFAULT_GAMMA: f64 = 10.0;
pub const DEFAULT_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PathKind {
    FirstOrder,
    SecondOrder,
}

impl PathKind {
    pub fn drive_path(self) -> DrivePath {
        match self {
            Self::FirstOrder => DrivePath::first_order(),
            Self::SecondOrder => DrivePath::second_order(),
        }
    }

    /// Default drive times, `10^{0.4..3.6}` (first order) or `10^{0..1.6}`
    /// (second order) in steps of 0.4 decades.
    pub fn default_tf_grid(self) -> Vec<f64> {
        let (lo, hi) = match self {
            Self::FirstOrder => (0.4, 3.6),
            Self::SecondOrder => (0.0, 1.6),
        };
        log_grid(lo, hi, ((hi - lo) / 0.4).round() as usize + 1)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FirstOrder => "first_order",
            Self::SecondOrder => "second_order",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
pub enum ProtocolKind {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

impl ProtocolKind {
    pub fn protocol(self) -> Protocol {
        match self {
            Self::A => Protocol::A,
            Self::B => Protocol::B,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SolverKind {
    Heom,
    Lindblad,
    Unitary,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Heom => "heom",
            Self::Lindblad => "lindblad",
            Self::Unitary => "unitary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Integrator {
    /// Adaptive Dormand-Prince 5(4).
    DormandPrince,
    /// Adaptive exponential Runge-Kutta (ETDRK4); much cheaper for the
    /// hierarchy, whose deep ADOs decay fast.
    Exponential,
}

impl Integrator {
    pub fn method(self) -> Method {
        match self {
            Self::DormandPrince => Method::DormandPrince,
            Self::Exponential => Method::Exponential,
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `n` points equally spaced in `log10` between `10^lo` and `10^hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..n)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Angles may be written as numbers or as `"0"`, `"pi/2"`, `"pi"`.
fn angles<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Angle {
        Number(f64),
        Name(String),
    }
    Vec::<Angle>::deserialize(d)?
        .into_iter()
        .map(|a| match a {
            Angle::Number(x) => Ok(x),
            Angle::Name(s) => match s.trim() {
                "0" => Ok(0.0),
                "pi/2" => Ok(FRAC_PI_2),
                "pi" => Ok(PI),
                other => Err(serde::de::Error::custom(format!("unknown angle `{other}`"))),
            },
        })
        .collect()
}

fn default_n() -> Vec<usize> {
    vec![10]
}
fn default_q() -> Vec<f64> {
    vec![0.1]
}
fn default_theta() -> Vec<f64> {
    vec![FRAC_PI_2]
}
fn default_r() -> Vec<u8> {
    vec![0]
}
fn default_t_points() -> usize {
    DEFAULT_T_POINTS
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_depth() -> usize {
    DEFAULT_DEPTH
}
fn default_integrator() -> Integrator {
    Integrator::Exponential
}
fn default_rel_tol() -> f64 {
    1e-8
}
fn default_abs_tol() -> f64 {
    1e-10
}
fn default_schedule_grid() -> usize {
    DEFAULT_GRID
}
fn default_ado_cap() -> usize {
    DEFAULT_ADO_CAP
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("sweep-out")
}

/// One sweep: the Cartesian product of every list-valued field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub path: PathKind,
    pub protocol: ProtocolKind,
    pub solver: SolverKind,
    /// Qubit numbers.
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    /// Temperatures; when absent, `t_grid_points` log-spaced values over
    /// `log10 T` in `[-0.8, 1.4]`.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default = "default_t_points")]
    pub t_grid_points: usize,
    /// Drive times; when absent, the per-path default.
    #[serde(default)]
    pub tf_grid: Option<Vec<f64>>,
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
    #[serde(default = "default_theta", deserialize_with = "angles")]
    pub theta: Vec<f64>,
    /// 1 adds the counterterm `(q/N) Q^2`.
    #[serde(default = "default_r")]
    pub r: Vec<u8>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Matsubara cutoff for every temperature; when absent, 18 below `T = 1`
    /// and 5 at or above.
    #[serde(default)]
    pub m_cutoff: Option<usize>,
    /// Hierarchy depth `L`.
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    /// Protocol-B table size.
    #[serde(default = "default_schedule_grid")]
    pub schedule_grid: usize,
    #[serde(default = "default_ado_cap")]
    pub ado_cap: usize,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Run `q = 0` points with the hierarchy instead of the unitary solver.
    #[serde(default)]
    pub force_heom: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Fully resolved coordinates of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub path: PathKind,
    pub protocol: ProtocolKind,
    /// Solver actually used (after `q = 0` routing).
    pub solver: SolverKind,
    pub n: usize,
    pub temperature: f64,
    pub t_final: f64,
    pub q: f64,
    pub theta: f64,
    pub r: u8,
    /// Matsubara cutoff used, 0 when the solver has no bath expansion.
    pub m_cut: usize,
    /// Hierarchy depth used, 0 when the solver has no hierarchy.
    pub depth: usize,
}

/// Numerical settings shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericSettings {
    pub gamma: f64,
    pub integrator: Integrator,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub schedule_grid: usize,
    pub ado_cap: usize,
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            integrator: default_integrator(),
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            schedule_grid: DEFAULT_GRID,
            ado_cap: DEFAULT_ADO_CAP,
        }
    }
}

fn config_err(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

fn check_list<T>(name: &str, v: &[T], ok: impl Fn(&T) -> bool, rule: &str) -> Result<()> {
    if v.is_empty() {
        return Err(config_err(format!("`{name}` must not be empty")));
    }
    if !v.iter().all(ok) {
        return Err(config_err(format!("every `{name}` entry must be {rule}")));
    }
    Ok(())
}

fn positive(x: &f64) -> bool {
    *x > 0.0 && x.is_finite()
}

impl SweepConfig {
    /// Minimal config with every optional field at its default.
    pub fn new(path: PathKind, protocol: ProtocolKind, solver: SolverKind) -> Self {
        Self {
            path,
            protocol,
            solver,
            n: default_n(),
            t_grid: None,
            t_grid_points: DEFAULT_T_POINTS,
            tf_grid: None,
            q: default_q(),
            theta: default_theta(),
            r: default_r(),
            gamma: DEFAULT_GAMMA,
            m_cutoff: None,
            depth: DEFAULT_DEPTH,
            integrator: default_integrator(),
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            schedule_grid: DEFAULT_GRID,
            ado_cap: DEFAULT_ADO_CAP,
            workers: None,
            force_heom: false,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let cfg = Self::from_toml_str(&text).map_err(|source| AppError::ConfigParse { path: path.into(), source: Box::new(source) })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn temperatures(&self) -> Vec<f64> {
        match &self.t_grid {
            Some(t) => t.clone(),
            None => log_grid(DEFAULT_LOG10_T_RANGE.0, DEFAULT_LOG10_T_RANGE.1, self.t_grid_points),
        }
    }

    pub fn drive_times(&self) -> Vec<f64> {
        self.tf_grid.clone().unwrap_or_else(|| self.path.default_tf_grid())
    }

    pub fn settings(&self) -> NumericSettings {
        NumericSettings {
            gamma: self.gamma,
            integrator: self.integrator,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            schedule_grid: self.schedule_grid,
            ado_cap: self.ado_cap,
        }
    }

    pub fn worker_count(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    /// Rejects empty grids, out-of-domain values and invalid combinations.
    pub fn validate(&self) -> Result<()> {
        check_list("n", &self.n, |&n| n >= 2, "at least 2")?;
        if self.t_grid.is_none() && self.t_grid_points == 0 {
            return Err(config_err("`t_grid_points` must be positive"));
        }
        check_list("t_grid", &self.temperatures(), positive, "positive and finite")?;
        check_list("tf_grid", &self.drive_times(), positive, "positive and finite")?;
        check_list("q", &self.q, |q| *q >= 0.0 && q.is_finite(), "nonnegative and finite")?;
        check_list("theta", &self.theta, |t| t.is_finite(), "finite")?;
        check_list("r", &self.r, |&r| r <= 1, "0 or 1")?;
        if self.r.contains(&1) {
            if self.q.contains(&0.0) {
                return Err(config_err("r = 1 requires q > 0, but `q` contains 0"));
            }
            if self.theta.contains(&0.0) {
                return Err(config_err("theta = 0 is only used with r = 0"));
            }
        }
        if self.solver == SolverKind::Unitary && self.q.iter().any(|&q| q != 0.0) {
            return Err(config_err("the unitary solver needs q = 0"));
        }
        if !positive(&self.gamma) {
            return Err(config_err("`gamma` must be positive and finite"));
        }
        if self.m_cutoff == Some(0) {
            return Err(config_err("`m_cutoff` must be at least 1"));
        }
        if self.depth == 0 || self.depth > u8::MAX as usize {
            return Err(config_err("`depth` must be in 1..=255"));
        }
        if !(positive(&self.rel_tol) && positive(&self.abs_tol)) {
            return Err(config_err("tolerances must be positive and finite"));
        }
        if self.schedule_grid < MIN_GRID {
            return Err(config_err(format!("`schedule_grid` must be at least {MIN_GRID}")));
        }
        if self.ado_cap == 0 {
            return Err(config_err("`ado_cap` must be positive"));
        }
        if self.workers == Some(0) {
            return Err(config_err("`workers` must be positive"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(config_err("`output_dir` must not be empty"));
        }
        Ok(())
    }

    /// Solver used at coupling `q`: `q = 0` goes to the unitary solver
    /// unless `force_heom` is set.
    pub fn route(&self, q: f64) -> SolverKind {
        if q == 0.0 && !self.force_heom {
            SolverKind::Unitary
        } else {
            self.solver
        }
    }

    /// All grid points in coordinate order: `N`, `t_F`, `q`, `theta`, `r`, `T`
    /// (temperature innermost).
    pub fn grid(&self) -> Vec<GridPoint> {
        let temps = self.temperatures();
        let mut out = Vec::new();
        for &n in &self.n {
            for &t_final in &self.drive_times() {
                for &q in &self.q {
                    for &theta in &self.theta {
                        for &r in &self.r {
                            let solver = self.route(q);
                            for &temperature in &temps {
                                let m_cut = match solver {
                                    SolverKind::Heom => {
                                        self.m_cutoff.unwrap_or_else(|| default_matsubara_cutoff(temperature))
                                    }
                                    _ => 0,
                                };
                                let depth = if solver == SolverKind::Heom { self.depth } else { 0 };
                                out.push(GridPoint {
                                    path: self.path,
                                    protocol: self.protocol,
                                    solver,
                                    n,
                                    temperature,
                                    t_final,
                                    q,
                                    theta,
                                    r,
                                    m_cut,
                                    depth,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> SweepConfig {
        SweepConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn defaults_fill_every_optional_key() {
        let cfg = parse("path = \"first_order\"\nprotocol = \"A\"\nsolver = \"heom\"\n");
        assert_eq!(cfg, SweepConfig::new(PathKind::FirstOrder, ProtocolKind::A, SolverKind::Heom));
        cfg.validate().unwrap();
        let t = cfg.temperatures();
        assert_eq!(t.len(), 12);
        assert!((t[0].log10() + 0.8).abs() < 1e-12 && (t[11].log10() - 1.4).abs() < 1e-12);
        let tf = cfg.drive_times();
        assert_eq!(tf.len(), 9);
        assert!((tf[8].log10() - 3.6).abs() < 1e-12);
        assert_eq!(PathKind::SecondOrder.default_tf_grid().len(), 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = SweepConfig::from_toml_str("path = \"first_order\"\nprotocol = \"A\"\nsolver = \"heom\"\ntemp = 3\n");
        assert!(err.is_err());
    }

    #[test]
    fn named_angles_parse() {
        let cfg = parse("path = \"second_order\"\nprotocol = \"B\"\nsolver = \"lindblad\"\ntheta = [\"0\", \"pi/2\", 0.3]\n");
        assert_eq!(cfg.theta, vec![0.0, FRAC_PI_2, 0.3]);
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        let mut cfg = SweepConfig::new(PathKind::FirstOrder, ProtocolKind::A, SolverKind::Heom);
        cfg.r = vec![0, 1];
        cfg.q = vec![0.0, 0.1];
        assert!(matches!(cfg.validate(), Err(AppError::Config(_))));
        cfg.q = vec![0.1];
        cfg.theta = vec![0.0];
        assert!(cfg.validate().is_err());
        cfg.theta = vec![FRAC_PI_2];
        cfg.validate().unwrap();
        cfg.n = vec![];
        assert!(cfg.validate().is_err());
        let mut u = SweepConfig::new(PathKind::FirstOrder, ProtocolKind::A, SolverKind::Unitary);
        assert!(u.validate().is_err());
        u.q = vec![0.0];
        u.validate().unwrap();
    }

    #[test]
    fn zero_coupling_is_routed_to_the_unitary_solver() {
        let mut cfg = SweepConfig::new(PathKind::FirstOrder, ProtocolKind::A, SolverKind::Heom);
        cfg.q = vec![0.0, 0.1];
        cfg.tf_grid = Some(vec![1.0]);
        cfg.t_grid = Some(vec![0.5, 2.0]);
        let grid = cfg.grid();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[0].solver, SolverKind::Unitary);
        assert_eq!((grid[0].m_cut, grid[0].depth), (0, 0));
        assert_eq!(grid[2].solver, SolverKind::Heom);
        assert_eq!((grid[2].m_cut, grid[3].m_cut), (18, 5));
        cfg.force_heom = true;
        assert!(cfg.grid().iter().all(|p| p.solver == SolverKind::Heom));
    }
}
