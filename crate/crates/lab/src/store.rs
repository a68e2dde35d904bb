//! Result store: one JSON document per record under
//! `<output_dir>/records/<cell key>/`, committed by rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use qpnn::engine::MetricsReport;
use qpnn::tasks::TaskDescriptor;
use qpnn::trainer::{StopReason, TracePoint};
use serde::{Deserialize, Serialize};

use crate::config::Cell;
use crate::error::{io_err, LabError, Result};

/// A complex amplitude as `[re, im]`.
pub type Amplitude = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    /// Idealized reference solution shared by every cell with the same
    /// task, objective and layer count.
    Ideal,
    InSitu,
    Offline,
    LossLimit,
}

impl RecordKind {
    fn stem(&self) -> &'static str {
        match self {
            RecordKind::Ideal => "ideal",
            RecordKind::InSitu => "in_situ",
            RecordKind::Offline => "offline",
            RecordKind::LossLimit => "loss_limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub kind: RecordKind,
    pub cell: Cell,
    pub task: TaskDescriptor,
    /// Trial index within the cell; offline records share it with the
    /// in-situ trial whose chip realization they reuse.
    pub trial: Option<usize>,
    pub seed: u64,
    pub metrics: MetricsReport,
    pub params: Vec<f64>,
    /// Output state for each training input, in basis order.
    pub outputs: Vec<Vec<Amplitude>>,
    pub trace: Vec<TracePoint>,
    pub evals: usize,
    pub stop: Option<StopReason>,
}

impl TrialRecord {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.metrics.f_unc
    }
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        Store {
            root: output_dir.into(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records_dir(&self) -> PathBuf {
        self.root.join("records")
    }

    pub fn path_for(&self, kind: RecordKind, cell: &Cell, trial: Option<usize>) -> PathBuf {
        let dir = self.records_dir().join(cell.key());
        match trial {
            Some(t) => dir.join(format!("{}_{t:04}.json", kind.stem())),
            None => dir.join(format!("{}.json", kind.stem())),
        }
    }

    /// Reads a committed record, or `None` when absent.
    pub fn load(&self, kind: RecordKind, cell: &Cell, trial: Option<usize>) -> Result<Option<TrialRecord>> {
        let path = self.path_for(kind, cell, trial);
        if !path.exists() {
            return Ok(None);
        }
        read_record(&path).map(Some)
    }

    /// Commits a record unless one already exists at its path. Returns the
    /// record that is on disk afterwards.
    pub fn commit(&self, record: TrialRecord) -> Result<TrialRecord> {
        let path = self.path_for(record.kind, &record.cell, record.trial);
        if path.exists() {
            return read_record(&path);
        }
        let text = serde_json::to_vec_pretty(&record).expect("record serializes");
        write_atomic(&path, &text)?;
        Ok(record)
    }

    /// Every record under the store, sorted by path.
    pub fn load_all(&self) -> Result<Vec<TrialRecord>> {
        let dir = self.records_dir();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut paths = Vec::new();
        for cell_dir in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let cell_dir = cell_dir.map_err(io_err(&dir))?.path();
            if !cell_dir.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&cell_dir).map_err(io_err(&cell_dir))? {
                let p = entry.map_err(io_err(&cell_dir))?.path();
                if p.extension().is_some_and(|e| e == "json") {
                    paths.push(p);
                }
            }
        }
        paths.sort();
        paths.iter().map(|p| read_record(p)).collect()
    }
}

pub fn read_record(path: &Path) -> Result<TrialRecord> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| LabError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    file.write_all(bytes).map_err(io_err(&tmp))?;
    file.sync_all().map_err(io_err(&tmp))?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err(path))
}
