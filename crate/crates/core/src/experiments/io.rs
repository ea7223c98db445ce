//! CSV result tables with a JSON sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentConfig, ExperimentRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 17] = [
    "kind",
    "matrix",
    "sweep",
    "k",
    "n",
    "l",
    "snr_db",
    "trial",
    "seed",
    "rel_error",
    "abs_error",
    "eta",
    "success",
    "converged",
    "iterations",
    "angle_error",
    "wall_ms",
];

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'a str,
    records: usize,
    config: &'a ExperimentConfig,
}

/// Sidecar location: the CSV path with a `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `records` to `path` and the config echo next to it.
pub fn write_results(records: &[ExperimentRecord], path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;

    let side = sidecar_path(path);
    let io_err = |source| Error::Io {
        path: side.clone(),
        source,
    };
    let mut f = BufWriter::new(File::create(&side).map_err(io_err)?);
    let body = Sidecar {
        version: crate::VERSION,
        records: records.len(),
        config: cfg,
    };
    serde_json::to_writer_pretty(&mut f, &body).map_err(|source| Error::Json {
        path: side.clone(),
        source,
    })?;
    writeln!(f).and_then(|_| f.flush()).map_err(io_err)
}

pub fn read_results(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    rdr.deserialize()
        .collect::<std::result::Result<Vec<ExperimentRecord>, _>>()
        .map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })
}
