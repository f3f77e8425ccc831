//! Flat-file formats: graphs, observed triplets, schedule manifests, dense
//! matrices, ground truth and run outputs.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TamError};
use crate::graph::{BipartiteRegularGraph, ObservedValues, SampleSchedule};
use crate::synth::GroundTruth;
use crate::tam::{IterationRecord, TamResult};

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> TamError {
    TamError::Parse(format!("{}: {msg}", path.display()))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = fs::File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

/// Header `n d`, then one line of right-neighbor indices per left vertex.
pub fn write_graph(path: &Path, graph: &BipartiteRegularGraph) -> Result<()> {
    let mut out = format!("{} {}\n", graph.n(), graph.d());
    for i in 0..graph.n() {
        let line: Vec<String> = graph.right_neighbors_of_left(i).iter().map(|j| j.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_graph(path: &Path) -> Result<BipartiteRegularGraph> {
    let f = fs::File::open(path)?;
    let mut lines = BufReader::new(f).lines();
    let header = lines.next().ok_or_else(|| parse_err(path, "empty graph file"))??;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|e| parse_err(path, format!("bad header: {e}"))))
        .collect::<Result<_>>()?;
    let [n, d] = nums[..] else {
        return Err(parse_err(path, "header must be `n d`"));
    };
    let mut adj = Vec::with_capacity(n);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2))))
            .collect::<Result<_>>()?;
        adj.push(row);
    }
    if adj.len() != n {
        return Err(parse_err(path, format!("expected {n} adjacency lines, found {}", adj.len())));
    }
    BipartiteRegularGraph::from_left_adjacency(n, d, &adj)
}

#[derive(Debug, Serialize, Deserialize)]
struct Triplet {
    i: usize,
    j: usize,
    value: f64,
}

/// CSV with header `i,j,value`.
pub fn write_triplets(path: &Path, triplets: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for &(i, j, value) in triplets {
        w.serialize(Triplet { i, j, value })?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| TamError::Io(e.into_error()))?)
}

pub fn read_triplets(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<Triplet>()
        .map(|t| t.map(|t| (t.i, t.j, t.value)).map_err(TamError::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleManifest {
    pub n: usize,
    pub d: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Paths relative to the manifest's directory, graph `t` first.
    pub graphs: Vec<String>,
    pub values: Vec<String>,
}

pub const MANIFEST_FILE: &str = "schedule.json";

/// Writes `graph_<t>.txt`, `values_<t>.csv` and `schedule.json` into `dir`.
pub fn write_schedule(dir: &Path, schedule: &SampleSchedule, seed: u64) -> Result<ScheduleManifest> {
    fs::create_dir_all(dir)?;
    let mut manifest = ScheduleManifest {
        n: schedule.n,
        d: schedule.d,
        iterations: schedule.iterations,
        seed,
        graphs: Vec::new(),
        values: Vec::new(),
    };
    for (t, (g, v)) in schedule.graphs.iter().zip(&schedule.values).enumerate() {
        let gname = format!("graph_{t}.txt");
        let vname = format!("values_{t}.csv");
        write_graph(&dir.join(&gname), g)?;
        write_triplets(&dir.join(&vname), &v.triplets(g))?;
        manifest.graphs.push(gname);
        manifest.values.push(vname);
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Loads a schedule from its manifest file.
pub fn read_schedule(manifest_path: &Path) -> Result<(SampleSchedule, ScheduleManifest)> {
    let manifest: ScheduleManifest = read_json(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    if manifest.graphs.len() != manifest.values.len() {
        return Err(parse_err(manifest_path, "graph and value file lists differ in length"));
    }
    let mut graphs = Vec::with_capacity(manifest.graphs.len());
    let mut values = Vec::with_capacity(manifest.values.len());
    for (gname, vname) in manifest.graphs.iter().zip(&manifest.values) {
        let g = read_graph(&dir.join(gname))?;
        let v = ObservedValues::from_triplets(&g, &read_triplets(&dir.join(vname))?)?;
        graphs.push(g);
        values.push(v);
    }
    let schedule = SampleSchedule::new(manifest.n, manifest.d, manifest.iterations, graphs, values)?;
    Ok((schedule, manifest))
}

/// Headerless CSV, one matrix row per line.
pub fn write_dense_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|x| x.to_string()))?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| TamError::Io(e.into_error()))?)
}

pub fn read_dense_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| parse_err(path, e)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(path, "ragged rows"));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}

/// `rows: u64, cols: u64`, then row-major `f64`, all little-endian.
pub fn write_dense_binary(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + 8 * m.len());
    bytes.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for x in m.row(i).iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_atomic(path, &bytes)
}

pub fn read_dense_binary(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(parse_err(path, "truncated header"));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    let (rows, cols) = (word(0) as usize, word(1) as usize);
    let expect = rows
        .checked_mul(cols)
        .and_then(|x| x.checked_mul(8))
        .and_then(|x| x.checked_add(16))
        .ok_or_else(|| parse_err(path, "dimensions overflow"))?;
    if bytes.len() != expect {
        return Err(parse_err(path, format!("expected {expect} bytes, found {}", bytes.len())));
    }
    Ok(DMatrix::from_row_iterator(rows, cols, (0..rows * cols).map(|k| f64::from_le_bytes(bytes[16 + 8 * k..24 + 8 * k].try_into().unwrap()))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMetadata {
    pub n: usize,
    pub k: usize,
    pub sigma: Vec<f64>,
    pub mu0_actual: f64,
    pub kappa: f64,
    pub seed: Option<u64>,
    pub kind: String,
}

pub const TRUTH_FILE: &str = "truth.json";

/// Writes `u_star.csv`, `v_star.csv` and `truth.json`.
pub fn write_truth(dir: &Path, truth: &GroundTruth, seed: Option<u64>, kind: &str) -> Result<TruthMetadata> {
    write_dense_csv(&dir.join("u_star.csv"), truth.u_star())?;
    write_dense_csv(&dir.join("v_star.csv"), truth.v_star())?;
    let meta = TruthMetadata {
        n: truth.n(),
        k: truth.k(),
        sigma: truth.sigma().to_vec(),
        mu0_actual: truth.mu0_actual(),
        kappa: truth.kappa(),
        seed,
        kind: kind.to_string(),
    };
    write_json(&dir.join(TRUTH_FILE), &meta)?;
    Ok(meta)
}

/// Reads a ground truth from the directory written by [`write_truth`].
pub fn read_truth(dir: &Path) -> Result<(GroundTruth, TruthMetadata)> {
    let meta: TruthMetadata = read_json(&dir.join(TRUTH_FILE))?;
    let u = read_dense_csv(&dir.join("u_star.csv"))?;
    let v = read_dense_csv(&dir.join("v_star.csv"))?;
    Ok((GroundTruth::new(u, v, meta.sigma.clone())?, meta))
}

pub fn write_trace_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| TamError::Io(e.into_error()))?)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(TamError::from)).collect()
}

/// Writes `u_final.csv`, `v_tilde_final.csv` and `trace.csv`.
pub fn write_result(dir: &Path, result: &TamResult) -> Result<()> {
    write_dense_csv(&dir.join("u_final.csv"), result.u_final.as_matrix())?;
    write_dense_csv(&dir.join("v_tilde_final.csv"), &result.v_tilde_final)?;
    write_trace_csv(&dir.join("trace.csv"), &result.trace.records)
}

/// Loads the two output factors written by [`write_result`].
pub fn read_result_factors(dir: &Path) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Ok((read_dense_csv(&dir.join("u_final.csv"))?, read_dense_csv(&dir.join("v_tilde_final.csv"))?))
}

/// Newline-delimited indices.
pub fn write_index_list(path: &Path, indices: &[usize]) -> Result<()> {
    let mut out = String::new();
    for i in indices {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_index_list(path: &Path) -> Result<Vec<usize>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().map_err(|e| parse_err(path, e)))
        .collect()
}
