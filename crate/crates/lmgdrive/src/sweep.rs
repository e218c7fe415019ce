//! Idempotent, incrementally persisted parameter sweeps.
//!
//! An output directory holds `sweep.json` (config, versions, tolerances),
//! `records.csv` (one row per finished grid point) and, when some points
//! failed, `errors.csv`. Every file is replaced by atomic rename. Points are
//! keyed by a SHA-256 hash of their coordinates; a rerun only computes the
//! points that have no record yet.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use lmgdrive_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{GridPoint, NumericSettings, PathKind, ProtocolKind, SolverKind, SweepConfig};
use crate::error::{core_error_kind, AppError, Result};
use crate::run::{point_value, unitary_values, PointValue};

pub const METADATA_FILE: &str = "sweep.json";
pub const RECORDS_FILE: &str = "records.csv";
pub const ERRORS_FILE: &str = "errors.csv";

/// Fidelities must land in `[0, 1]` up to this slack.
pub const FIDELITY_SLACK: f64 = 1e-9;

/// One finished grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub path: PathKind,
    pub protocol: ProtocolKind,
    pub solver: SolverKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(rename = "tF")]
    pub t_final: f64,
    pub q: f64,
    pub theta: f64,
    pub r: u8,
    #[serde(rename = "M")]
    pub m_cut: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    pub fidelity: f64,
    pub trace_drift: f64,
    pub wall_seconds: f64,
}

/// One grid point whose solver failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub path: PathKind,
    pub protocol: ProtocolKind,
    pub solver: SolverKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(rename = "tF")]
    pub t_final: f64,
    pub q: f64,
    pub theta: f64,
    pub r: u8,
    #[serde(rename = "M")]
    pub m_cut: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    pub kind: String,
    pub message: String,
}

impl SweepRecord {
    pub fn point(&self) -> GridPoint {
        GridPoint {
            path: self.path,
            protocol: self.protocol,
            solver: self.solver,
            n: self.n,
            temperature: self.temperature,
            t_final: self.t_final,
            q: self.q,
            theta: self.theta,
            r: self.r,
            m_cut: self.m_cut,
            depth: self.depth,
        }
    }

    fn new(p: &GridPoint, value: PointValue, wall_seconds: f64) -> Self {
        Self {
            path: p.path,
            protocol: p.protocol,
            solver: p.solver,
            n: p.n,
            temperature: p.temperature,
            t_final: p.t_final,
            q: p.q,
            theta: p.theta,
            r: p.r,
            m_cut: p.m_cut,
            depth: p.depth,
            fidelity: value.fidelity,
            trace_drift: value.trace_drift,
            wall_seconds,
        }
    }
}

impl PointFailure {
    fn new(p: &GridPoint, err: &CoreError) -> Self {
        Self {
            path: p.path,
            protocol: p.protocol,
            solver: p.solver,
            n: p.n,
            temperature: p.temperature,
            t_final: p.t_final,
            q: p.q,
            theta: p.theta,
            r: p.r,
            m_cut: p.m_cut,
            depth: p.depth,
            kind: core_error_kind(err).to_string(),
            message: err.to_string(),
        }
    }

    pub fn point(&self) -> GridPoint {
        GridPoint {
            path: self.path,
            protocol: self.protocol,
            solver: self.solver,
            n: self.n,
            temperature: self.temperature,
            t_final: self.t_final,
            q: self.q,
            theta: self.theta,
            r: self.r,
            m_cut: self.m_cut,
            depth: self.depth,
        }
    }
}

fn canonical(p: &GridPoint) -> String {
    format!(
        "{}|{}|{}|{}|{:?}|{:?}|{:?}|{:?}|{}|{}|{}",
        p.path, p.protocol, p.solver, p.n, p.temperature, p.t_final, p.q, p.theta, p.r, p.m_cut, p.depth
    )
}

/// Hex SHA-256 of the canonical coordinate string.
pub fn coordinate_key(p: &GridPoint) -> String {
    let digest = Sha256::digest(canonical(p).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn same_coordinates(a: &GridPoint, b: &GridPoint) -> bool {
    canonical(a) == canonical(b)
}

/// Total order on coordinates: path, protocol, solver, `N`, `t_F`, `q`,
/// `theta`, `r`, `T`, `M`, `L`.
pub fn coordinate_order(a: &GridPoint, b: &GridPoint) -> Ordering {
    (a.path, a.protocol, a.solver, a.n)
        .cmp(&(b.path, b.protocol, b.solver, b.n))
        .then(a.t_final.total_cmp(&b.t_final))
        .then(a.q.total_cmp(&b.q))
        .then(a.theta.total_cmp(&b.theta))
        .then(a.r.cmp(&b.r))
        .then(a.temperature.total_cmp(&b.temperature))
        .then(a.m_cut.cmp(&b.m_cut))
        .then(a.depth.cmp(&b.depth))
}

/// Records of one output directory, keyed by coordinate hash.
#[derive(Debug, Default)]
pub struct RecordStore {
    dir: PathBuf,
    records: HashMap<String, SweepRecord>,
}

fn store_err(path: &Path, reason: impl Into<String>) -> AppError {
    AppError::Store { path: path.to_path_buf(), reason: reason.into() }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, unless
/// the file already has exactly this content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<bool> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(false);
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| AppError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))?;
    Ok(true)
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(AppError::from)).collect()
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| AppError::Store { path: PathBuf::new(), reason: e.to_string() })
}

impl RecordStore {
    /// Loads `records.csv` from `dir` if present, checking that coordinates
    /// key the records uniquely.
    pub fn open(dir: &Path) -> Result<Self> {
        let mut store = Self { dir: dir.to_path_buf(), records: HashMap::new() };
        let path = store.records_path();
        if path.exists() {
            for record in read_records(&path)? {
                let key = coordinate_key(&record.point());
                if let Some(existing) = store.records.get(&key) {
                    let reason = if same_coordinates(&existing.point(), &record.point()) {
                        format!("duplicate record for {}", canonical(&record.point()))
                    } else {
                        format!("hash collision between {} and {}", canonical(&existing.point()), canonical(&record.point()))
                    };
                    return Err(store_err(&path, reason));
                }
                store.records.insert(key, record);
            }
        }
        Ok(store)
    }

    pub fn records_path(&self) -> PathBuf {
        self.dir.join(RECORDS_FILE)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, p: &GridPoint) -> Option<&SweepRecord> {
        self.records.get(&coordinate_key(p)).filter(|r| same_coordinates(&r.point(), p))
    }

    /// Records sorted by [`coordinate_order`].
    pub fn sorted(&self) -> Vec<SweepRecord> {
        let mut v: Vec<SweepRecord> = self.records.values().cloned().collect();
        v.sort_by(|a, b| coordinate_order(&a.point(), &b.point()));
        v
    }

    /// Adds a record; existing records are never replaced.
    fn insert(&mut self, record: SweepRecord) -> Result<()> {
        let key = coordinate_key(&record.point());
        if self.records.contains_key(&key) {
            return Err(store_err(&self.records_path(), format!("record for {} already exists", canonical(&record.point()))));
        }
        self.records.insert(key, record);
        Ok(())
    }

    fn persist(&self) -> Result<()> {
        write_atomic(&self.records_path(), &to_csv(&self.sorted())?)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a SweepConfig,
    versions: Versions,
    tolerances: Tolerances,
    grid_points: usize,
}

#[derive(Serialize)]
struct Versions {
    lmgdrive: &'static str,
    lmgdrive_core: &'static str,
}

#[derive(Serialize)]
struct Tolerances {
    rel_tol: f64,
    abs_tol: f64,
    heom_trace_drift_limit: f64,
    unitary_max_step: f64,
    fidelity_slack: f64,
}

fn metadata_json(config: &SweepConfig, grid_points: usize) -> Result<Vec<u8>> {
    let meta = Metadata {
        config,
        versions: Versions { lmgdrive: env!("CARGO_PKG_VERSION"), lmgdrive_core: lmgdrive_core::VERSION },
        tolerances: Tolerances {
            rel_tol: config.rel_tol,
            abs_tol: config.abs_tol,
            heom_trace_drift_limit: lmgdrive_core::heom::TRACE_DRIFT_LIMIT,
            unitary_max_step: lmgdrive_core::unitary::UnitaryConfig::default().max_step,
            fidelity_slack: FIDELITY_SLACK,
        },
        grid_points,
    };
    let mut bytes = serde_json::to_vec_pretty(&meta)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Progress notifications delivered on the calling thread.
#[derive(Debug)]
pub enum SweepEvent<'a> {
    Started { pending: usize, total: usize },
    Finished { point: &'a GridPoint, value: &'a PointValue, wall_seconds: f64 },
    Failed { point: &'a GridPoint, error: &'a CoreError },
}

/// Result of [`run_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Records of every grid point of the config, in grid order; points that
    /// failed are absent.
    pub records: Vec<SweepRecord>,
    pub computed: usize,
    pub skipped: usize,
    pub failures: Vec<PointFailure>,
}

enum Task {
    Single(GridPoint),
    /// Closed-system points sharing one propagator.
    Unitary(Vec<GridPoint>),
}

fn plan(pending: Vec<GridPoint>) -> Vec<Task> {
    let mut tasks: Vec<Task> = Vec::new();
    for p in pending {
        if p.solver == SolverKind::Unitary {
            if let Some(Task::Unitary(batch)) = tasks.last_mut() {
                let b = batch[0];
                if (b.path, b.protocol, b.n, b.r) == (p.path, p.protocol, p.n, p.r) && b.t_final == p.t_final {
                    batch.push(p);
                    continue;
                }
            }
            tasks.push(Task::Unitary(vec![p]));
        } else {
            tasks.push(Task::Single(p));
        }
    }
    tasks
}

type TaskResult = Vec<(GridPoint, std::result::Result<PointValue, CoreError>, f64)>;

fn checked(value: PointValue) -> std::result::Result<PointValue, CoreError> {
    let f = value.fidelity;
    if !(-FIDELITY_SLACK..=1.0 + FIDELITY_SLACK).contains(&f) {
        return Err(CoreError::Accuracy { what: "fidelity outside [0, 1]", value: f, limit: 1.0 + FIDELITY_SLACK });
    }
    Ok(value)
}

fn execute(task: &Task, settings: &NumericSettings) -> TaskResult {
    let start = Instant::now();
    match task {
        Task::Single(p) => {
            let res = point_value(p, settings).and_then(checked);
            vec![(*p, res, start.elapsed().as_secs_f64())]
        }
        Task::Unitary(batch) => {
            let res = unitary_values(batch, settings);
            let wall = start.elapsed().as_secs_f64() / batch.len() as f64;
            match res {
                Ok(values) => batch.iter().zip(values).map(|(p, v)| (*p, checked(v), wall)).collect(),
                Err(e) => batch.iter().map(|p| (*p, Err(e.clone()), wall)).collect(),
            }
        }
    }
}

/// Runs every grid point of `config` that has no record yet.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    run_sweep_with(config, &mut |_| {})
}

/// [`run_sweep`] with progress notifications.
pub fn run_sweep_with(config: &SweepConfig, on_event: &mut dyn FnMut(SweepEvent<'_>)) -> Result<SweepOutcome> {
    config.validate()?;
    let dir = &config.output_dir;
    let grid = config.grid();
    let mut store = RecordStore::open(dir)?;
    let pending: Vec<GridPoint> = grid.iter().filter(|p| store.get(p).is_none()).copied().collect();
    let skipped = grid.len() - pending.len();
    on_event(SweepEvent::Started { pending: pending.len(), total: grid.len() });
    let mut failures = Vec::new();
    if !pending.is_empty() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        write_atomic(&dir.join(METADATA_FILE), &metadata_json(config, grid.len())?)?;
        let tasks = plan(pending.clone());
        let settings = config.settings();
        let workers = config.worker_count().min(tasks.len());
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<TaskResult>();
        thread::scope(|scope| -> Result<()> {
            for _ in 0..workers {
                let tx = tx.clone();
                let (next, tasks, settings) = (&next, &tasks, &settings);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                    let Some(task) = tasks.get(i) else { break };
                    if tx.send(execute(task, settings)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for results in rx {
                let mut added = false;
                for (p, res, wall) in results {
                    match res {
                        Ok(value) => {
                            on_event(SweepEvent::Finished { point: &p, value: &value, wall_seconds: wall });
                            store.insert(SweepRecord::new(&p, value, wall))?;
                            added = true;
                        }
                        Err(e) => {
                            on_event(SweepEvent::Failed { point: &p, error: &e });
                            failures.push(PointFailure::new(&p, &e));
                        }
                    }
                }
                if added {
                    store.persist()?;
                }
            }
            Ok(())
        })?;
        failures.sort_by(|a, b| coordinate_order(&a.point(), &b.point()));
        let errors_path = dir.join(ERRORS_FILE);
        if failures.is_empty() {
            if errors_path.exists() {
                fs::remove_file(&errors_path).map_err(|e| AppError::io(&errors_path, e))?;
            }
        } else {
            write_atomic(&errors_path, &to_csv(&failures)?)?;
        }
    }
    let records = grid.iter().filter_map(|p| store.get(p).cloned()).collect();
    Ok(SweepOutcome { records, computed: pending.len() - failures.len(), skipped, failures })
}
