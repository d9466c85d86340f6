use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::NormStats;
use crate::rnnpb::{DemoMeta, Demonstration, PbEntry, RnnpbModel, Sample, StateLayout};
use crate::seqcore::{LayerSpec, Network};

pub const MODEL_VERSION: u32 = 1;
pub const DATASET_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    layout: StateLayout,
    layers: Vec<LayerSpec>,
    seed: u64,
    weights: Vec<f64>,
    pb_table: Vec<PbEntry>,
    norm: NormStats,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetLine {
    version: u32,
    id: usize,
    meta: DemoMeta,
    steps: Vec<Sample>,
}

#[derive(Deserialize)]
struct VersionTag {
    version: u32,
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn check_version(what: &'static str, found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::Version {
            what,
            found,
            expected,
        });
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Writes the model as JSON. Floats use shortest round-trip formatting, so
/// loading reproduces every value bit for bit.
pub fn save_model(path: &Path, model: &RnnpbModel) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION,
        layout: model.layout.clone(),
        layers: model.net.layers().to_vec(),
        seed: model.net.seed(),
        weights: model.net.weights().to_vec(),
        pb_table: model.pb_table.clone(),
        norm: model.norm.clone(),
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &file).map_err(|e| parse_err(path, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<RnnpbModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tag: VersionTag = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    check_version("model file", tag.version, MODEL_VERSION)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    let net = Network::from_parts(file.layers, file.weights, file.seed)?;
    RnnpbModel::new(file.layout, net, file.pb_table, file.norm)
}

/// One demonstration per line, each carrying the format version.
pub fn save_dataset(path: &Path, dataset: &[Demonstration]) -> Result<()> {
    let mut w = create(path)?;
    for d in dataset {
        let line = DatasetLine {
            version: DATASET_VERSION,
            id: d.id,
            meta: d.meta,
            steps: d.steps.clone(),
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| parse_err(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Vec<Demonstration>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: serde_json::Error| parse_err(path, format!("line {}: {e}", n + 1));
        let tag: VersionTag = serde_json::from_str(&line).map_err(at)?;
        check_version("dataset", tag.version, DATASET_VERSION)?;
        let d: DatasetLine = serde_json::from_str(&line).map_err(at)?;
        out.push(Demonstration {
            id: d.id,
            steps: d.steps,
            meta: d.meta,
        });
    }
    Ok(out)
}
