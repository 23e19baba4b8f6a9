//! Reading and writing tables, JSON documents and CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use bingham_core::bingham::TableError;
use bingham_core::{NormalizationTable, Quadrature, TableSpec};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Table file used when neither a flag, a config file nor `BINGHAM_TABLE`
/// names one.
pub const DEFAULT_TABLE_FILE: &str = "bingham_table.bngt";
pub const TABLE_ENV: &str = "BINGHAM_TABLE";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {cause}", path.display())]
    File {
        path: PathBuf,
        cause: std::io::Error,
    },
    #[error("{}: {cause}", path.display())]
    Table { path: PathBuf, cause: TableError },
    #[error("{}: {cause}", path.display())]
    Json {
        path: PathBuf,
        cause: serde_json::Error,
    },
    #[error("{}: {cause}", path.display())]
    Csv { path: PathBuf, cause: csv::Error },
    #[error("thread pool: {0}")]
    Threads(String),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |cause| IoError::File {
        path: path.to_path_buf(),
        cause,
    }
}

/// Runs `f` on a rayon pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, IoError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| IoError::Threads(e.to_string()))?;
    Ok(pool.install(f))
}

/// Evaluates the quadrature at every node in parallel. Values are collected
/// in node order, so the result does not depend on the thread count.
pub fn build_table(
    spec: TableSpec,
    quadrature: &Quadrature,
    threads: usize,
) -> Result<NormalizationTable, TableError> {
    spec.validate()?;
    let nodes = spec.nodes();
    let values = with_threads(threads, || {
        nodes
            .par_iter()
            .map(|l| quadrature.log_f(*l))
            .collect::<Vec<f64>>()
    })
    .expect("a pool of at least one thread can be built");
    NormalizationTable::from_values(spec, values)
}

pub fn read_table(path: &Path) -> Result<NormalizationTable, IoError> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    NormalizationTable::from_bytes(&bytes).map_err(|cause| IoError::Table {
        path: path.to_path_buf(),
        cause,
    })
}

pub fn write_table(path: &Path, table: &NormalizationTable) -> Result<(), IoError> {
    write_bytes(path, &table.to_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(file_err(dir))?;
    }
    fs::write(path, bytes).map_err(file_err(path))
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("data types serialize infallibly");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_bytes(path, to_json(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    serde_json::from_str(&text).map_err(|cause| IoError::Json {
        path: path.to_path_buf(),
        cause,
    })
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), IoError> {
    let csv_err = |cause| IoError::Csv {
        path: path.to_path_buf(),
        cause,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv_err(csv::Error::from(e.into_error())))?;
    write_bytes(path, &bytes)
}
