//! On-disk formats: TSR1 binary tensors, TSRM margin text, PGM heatmaps,
//! CSV tables, dataset and chain directories, and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, GroundTruth, LabelConvention, Split};
use crate::error::{Error, Result};
use crate::sampler::ChainOutput;
use crate::tensor::{DenseTensor, ParafacFactors};

pub const TSR1_MAGIC: &[u8; 4] = b"TSR1";
pub const TSRM_MAGIC: &str = "TSRM";

fn format_err(path: &Path, offset: u64, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        msg: msg.into(),
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&read_bytes(path)?))
}

// ---------------------------------------------------------------- TSR1

/// Magic, `u32` order, `u32` dims, then little-endian `f64` values.
pub fn encode_tsr1(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.ndim() + 8 * t.len());
    out.extend_from_slice(TSR1_MAGIC);
    out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parse TSR1 bytes; `path` only labels errors.
pub fn decode_tsr1(bytes: &[u8], path: &Path) -> Result<DenseTensor> {
    if bytes.len() < 4 || &bytes[..4] != TSR1_MAGIC {
        return Err(format_err(path, 0, "bad magic (expected TSR1)"));
    }
    let u32_at = |off: usize| -> Result<u32> {
        bytes
            .get(off..off + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4-byte slice")))
            .ok_or_else(|| {
                format_err(
                    path,
                    bytes.len() as u64,
                    format!("truncated header: need {} bytes, have {}", off + 4, bytes.len()),
                )
            })
    };
    let ndim = u32_at(4)? as usize;
    if ndim == 0 {
        return Err(format_err(path, 4, "tensor order must be at least 1"));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut cells: usize = 1;
    for k in 0..ndim {
        let off = 8 + 4 * k;
        let d = u32_at(off)? as usize;
        if d == 0 {
            return Err(format_err(path, off as u64, format!("dimension {k} is zero")));
        }
        cells = cells
            .checked_mul(d)
            .filter(|c| c.checked_mul(8).is_some())
            .ok_or_else(|| format_err(path, off as u64, "dimension product overflows"))?;
        dims.push(d);
    }
    let start = 8 + 4 * ndim;
    let expected = start + 8 * cells;
    if bytes.len() != expected {
        let off = bytes.len().min(expected) as u64;
        return Err(format_err(
            path,
            off,
            format!("expected {expected} bytes for dims {dims:?}, found {}", bytes.len()),
        ));
    }
    let values = bytes[start..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DenseTensor::new(dims, values)
}

pub fn write_tsr1(path: &Path, t: &DenseTensor) -> Result<()> {
    write_bytes(path, &encode_tsr1(t))
}

pub fn read_tsr1(path: &Path) -> Result<DenseTensor> {
    decode_tsr1(&read_bytes(path)?, path)
}

/// Stack equally shaped tensors along a new leading axis.
pub fn stack(tensors: &[DenseTensor]) -> Result<DenseTensor> {
    let first = tensors
        .first()
        .ok_or_else(|| Error::Structure("cannot stack zero tensors".into()))?;
    let mut dims = vec![tensors.len()];
    dims.extend_from_slice(first.dims());
    let mut values = Vec::with_capacity(tensors.len() * first.len());
    for t in tensors {
        if t.dims() != first.dims() {
            return Err(Error::Structure("cannot stack tensors of differing dims".into()));
        }
        values.extend_from_slice(t.values());
    }
    DenseTensor::new(dims, values)
}

/// Split along the leading axis.
pub fn unstack(t: &DenseTensor) -> Result<Vec<DenseTensor>> {
    if t.ndim() < 2 {
        return Err(Error::Structure("unstack needs a tensor of order at least 2".into()));
    }
    let inner = t.dims()[1..].to_vec();
    let step: usize = inner.iter().product();
    t.values()
        .chunks_exact(step)
        .map(|c| DenseTensor::new(inner.clone(), c.to_vec()))
        .collect()
}

// ---------------------------------------------------------------- TSRM

/// Header `TSRM <rank> <p_1> ... <p_D>`, then one line per margin in
/// component-major order (`r` outer, `j` inner).
pub fn encode_tsrm(f: &ParafacFactors) -> String {
    let mut s = format!("{TSRM_MAGIC} {}", f.rank());
    for d in f.dims() {
        let _ = write!(s, " {d}");
    }
    s.push('\n');
    for r in 0..f.rank() {
        for j in 0..f.ndim() {
            let line: Vec<String> = f.margin(j, r).iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
    }
    s
}

pub fn decode_tsrm(text: &str, path: &Path) -> Result<ParafacFactors> {
    let mut lines = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let body = line.trim();
        if !body.is_empty() && !body.starts_with('#') {
            lines.push((offset, body));
        }
        offset += line.len() as u64;
    }
    let (hoff, header) = *lines.first().ok_or_else(|| format_err(path, 0, "empty margin file"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(TSRM_MAGIC) {
        return Err(format_err(path, hoff, "bad header (expected 'TSRM <rank> <dims...>')"));
    }
    let nums: Vec<usize> = fields
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format_err(path, hoff, format!("bad header field: {e}")))?;
    if nums.len() < 2 || nums.contains(&0) {
        return Err(format_err(
            path,
            hoff,
            "header needs a positive rank and at least one positive dim",
        ));
    }
    let rank = nums[0];
    let dims = nums[1..].to_vec();
    let body = &lines[1..];
    if body.len() != rank * dims.len() {
        return Err(format_err(
            path,
            offset,
            format!("expected {} margin lines, found {}", rank * dims.len(), body.len()),
        ));
    }
    let mut margins = vec![Vec::with_capacity(dims.len()); rank];
    for (k, &(loff, line)) in body.iter().enumerate() {
        let (r, j) = (k / dims.len(), k % dims.len());
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format_err(path, loff, format!("margin ({j},{r}): {e}")))?;
        if vals.len() != dims[j] {
            return Err(format_err(
                path,
                loff,
                format!("margin ({j},{r}) has {} values, expected {}", vals.len(), dims[j]),
            ));
        }
        margins[r].push(vals);
    }
    ParafacFactors::new(dims, margins)
}

pub fn write_tsrm(path: &Path, f: &ParafacFactors) -> Result<()> {
    write_bytes(path, encode_tsrm(f).as_bytes())
}

pub fn read_tsrm(path: &Path) -> Result<ParafacFactors> {
    let bytes = read_bytes(path)?;
    let text =
        String::from_utf8(bytes).map_err(|e| format_err(path, e.utf8_error().valid_up_to() as u64, "not UTF-8"))?;
    decode_tsrm(&text, path)
}

// ---------------------------------------------------------------- PGM

/// 8-bit binary PGM of a 1-D or 2-D tensor, linearly mapping min to 0 and
/// max to 255. A constant tensor renders as 128.
pub fn encode_pgm(t: &DenseTensor) -> Result<Vec<u8>> {
    let (rows, cols) = match t.dims() {
        [c] => (1, *c),
        [r, c] => (*r, *c),
        d => {
            return Err(Error::Structure(format!(
                "heatmaps need a 1-D or 2-D tensor, got dims {d:?}"
            )))
        }
    };
    let (lo, hi) = t
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    let span = hi - lo;
    out.extend(t.values().iter().map(|&v| {
        if span > 0.0 && span.is_finite() {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            128
        }
    }));
    Ok(out)
}

pub fn write_pgm(path: &Path, t: &DenseTensor) -> Result<()> {
    write_bytes(path, &encode_pgm(t)?)
}

// ---------------------------------------------------------------- CSV

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn encode_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let line = |cells: Vec<String>| cells.join(",") + "\n";
    out.push_str(&line(header.iter().map(|h| csv_field(h)).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(|c| csv_field(c)).collect()));
    }
    out
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_bytes(path, encode_csv(header, rows).as_bytes())
}

/// Header plus rows of a CSV without quoted fields.
pub fn read_simple_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| format_err(path, 0, "not UTF-8"))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| format_err(path, 0, "missing CSV header"))?
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}

/// Shortest round-trip formatting; undefined values print as `NA`.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

// ---------------------------------------------------------------- dataset dir

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub dims: Vec<usize>,
    pub n_scalars: usize,
    pub convention: LabelConvention,
    pub has_truth: bool,
    /// Free-form provenance (scenario, loss, seed, ...).
    pub info: BTreeMap<String, String>,
}

pub const DATASET_FILES: [&str; 4] = ["dataset.json", "covariates.tsr", "scalars.tsr", "labels.csv"];

/// Writes the dataset files plus `truth_b.tsr`, `truth_gamma.tsr` and
/// `truth.pgm` when ground truth is present. Returns the written paths.
pub fn write_dataset_dir(
    dir: &Path,
    data: &Dataset,
    split: &Split,
    info: BTreeMap<String, String>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dims = data
        .dims()
        .ok_or_else(|| Error::Structure("cannot write an empty dataset".into()))?
        .to_vec();
    let meta = DatasetMeta {
        n: data.n(),
        dims,
        n_scalars: data.n_scalars(),
        convention: data.convention,
        has_truth: data.truth.is_some(),
        info,
    };
    let mut written = Vec::new();
    let p = dir.join("dataset.json");
    write_json(&p, &meta)?;
    written.push(p);
    let p = dir.join("covariates.tsr");
    write_tsr1(&p, &stack(&data.covariates)?)?;
    written.push(p);
    let p = dir.join("scalars.tsr");
    let z = DenseTensor::new(
        vec![data.n(), data.n_scalars().max(1)],
        if data.n_scalars() == 0 {
            vec![0.0; data.n()]
        } else {
            data.scalars.concat()
        },
    )?;
    write_tsr1(&p, &z)?;
    written.push(p);
    let mut in_test = vec![false; data.n()];
    for &i in &split.test {
        in_test[i] = true;
    }
    let rows: Vec<Vec<String>> = (0..data.n())
        .map(|i| {
            vec![
                i.to_string(),
                data.labels[i].to_string(),
                if in_test[i] { "test" } else { "train" }.to_string(),
            ]
        })
        .collect();
    let p = dir.join("labels.csv");
    write_csv(&p, &["index", "label", "split"], &rows)?;
    written.push(p);
    if let Some(t) = &data.truth {
        let p = dir.join("truth_b.tsr");
        write_tsr1(&p, &t.b)?;
        written.push(p);
        let p = dir.join("truth_gamma.tsr");
        write_tsr1(&p, &DenseTensor::new(vec![t.gamma.len().max(1)], pad(&t.gamma))?)?;
        written.push(p);
        if t.b.ndim() <= 2 {
            let p = dir.join("truth.pgm");
            write_pgm(&p, &t.b)?;
            written.push(p);
        }
    }
    Ok(written)
}

fn pad(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        vec![0.0]
    } else {
        v.to_vec()
    }
}

pub fn read_dataset_dir(dir: &Path) -> Result<(Dataset, Split)> {
    let meta: DatasetMeta = read_json(&dir.join("dataset.json"))?;
    let cov_path = dir.join("covariates.tsr");
    let cov = read_tsr1(&cov_path)?;
    if cov.dims()[0] != meta.n || cov.dims()[1..] != meta.dims[..] {
        return Err(format_err(
            &cov_path,
            4,
            format!("dims {:?} disagree with dataset.json", cov.dims()),
        ));
    }
    let covariates = unstack(&cov)?;
    let z_path = dir.join("scalars.tsr");
    let z = read_tsr1(&z_path)?;
    if z.ndim() != 2 || z.dims()[0] != meta.n {
        return Err(format_err(
            &z_path,
            4,
            format!("dims {:?} disagree with dataset.json", z.dims()),
        ));
    }
    let scalars: Vec<Vec<f64>> = if meta.n_scalars == 0 {
        vec![Vec::new(); meta.n]
    } else {
        z.values().chunks_exact(meta.n_scalars).map(<[f64]>::to_vec).collect()
    };
    let lab_path = dir.join("labels.csv");
    let (header, rows) = read_simple_csv(&lab_path)?;
    if header != ["index", "label", "split"] {
        return Err(format_err(&lab_path, 0, "expected header index,label,split"));
    }
    if rows.len() != meta.n {
        return Err(format_err(
            &lab_path,
            0,
            format!("{} label rows, expected {}", rows.len(), meta.n),
        ));
    }
    let mut labels = Vec::with_capacity(meta.n);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (i, row) in rows.iter().enumerate() {
        let bad = || format_err(&lab_path, 0, format!("malformed label row {}", i + 1));
        if row.len() != 3 {
            return Err(bad());
        }
        labels.push(row[1].parse::<f64>().map_err(|_| bad())?);
        match row[2].as_str() {
            "train" => split.train.push(i),
            "test" => split.test.push(i),
            _ => return Err(bad()),
        }
    }
    let mut data = Dataset::new(covariates, scalars, labels, meta.convention)?;
    if meta.has_truth {
        data = data.with_truth(read_truth_dir(dir)?);
    }
    Ok((data, split))
}

pub fn read_truth_dir(dir: &Path) -> Result<GroundTruth> {
    let b = read_tsr1(&dir.join("truth_b.tsr"))?;
    let gamma = read_tsr1(&dir.join("truth_gamma.tsr"))?.into_values();
    Ok(GroundTruth { b, gamma })
}

// ---------------------------------------------------------------- chain dir

/// Writes `chain.json`, `b_draws.tsr`, `gamma_draws.tsr`, `trace.csv` and,
/// when margins were kept, `margins.tsr`. Returns the written paths.
pub fn write_chain_dir(dir: &Path, chain: &ChainOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if chain.n_draws() == 0 {
        return Err(Error::Config("chain has no stored draws".into()));
    }
    let k = chain.n_draws();
    let mut written = Vec::new();
    let p = dir.join("chain.json");
    write_json(&p, chain)?;
    written.push(p);
    let mut dims = vec![k];
    dims.extend_from_slice(&chain.dims);
    let p = dir.join("b_draws.tsr");
    write_tsr1(&p, &DenseTensor::new(dims, chain.b_draws.clone())?)?;
    written.push(p);
    let p = dir.join("gamma_draws.tsr");
    let q = chain.n_scalars.max(1);
    let g = if chain.n_scalars == 0 {
        vec![0.0; k]
    } else {
        chain.gamma_draws.clone()
    };
    write_tsr1(&p, &DenseTensor::new(vec![k, q], g)?)?;
    written.push(p);
    let rank = chain.config.rank;
    let mut header = vec!["iteration".to_string(), "loglik".into(), "tau".into()];
    header.extend((1..=rank).map(|r| format!("phi_{r}")));
    let rows: Vec<Vec<String>> = (0..k)
        .map(|d| {
            let mut row = vec![
                chain.iterations[d].to_string(),
                chain.loglik[d].to_string(),
                chain.tau[d].to_string(),
            ];
            row.extend(chain.phi[d * rank..(d + 1) * rank].iter().map(|v| v.to_string()));
            row
        })
        .collect();
    let p = dir.join("trace.csv");
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&p, &hdr, &rows)?;
    written.push(p);
    if !chain.margins.is_empty() {
        let width: usize = rank * chain.dims.iter().sum::<usize>();
        let mut values = Vec::with_capacity(k * width);
        for f in &chain.margins {
            for r in 0..rank {
                for j in 0..chain.dims.len() {
                    values.extend_from_slice(f.margin(j, r));
                }
            }
        }
        let p = dir.join("margins.tsr");
        write_tsr1(&p, &DenseTensor::new(vec![k, width], values)?)?;
        written.push(p);
    }
    Ok(written)
}

pub fn read_chain_dir(dir: &Path) -> Result<ChainOutput> {
    let mut chain: ChainOutput = read_json(&dir.join("chain.json"))?;
    let k = chain.iterations.len();
    let b_path = dir.join("b_draws.tsr");
    let b = read_tsr1(&b_path)?;
    if b.dims()[0] != k || b.dims()[1..] != chain.dims[..] {
        return Err(format_err(
            &b_path,
            4,
            format!("dims {:?} disagree with chain.json", b.dims()),
        ));
    }
    chain.b_draws = b.into_values();
    let g = read_tsr1(&dir.join("gamma_draws.tsr"))?;
    chain.gamma_draws = if chain.n_scalars == 0 {
        Vec::new()
    } else {
        g.into_values()
    };
    let t_path = dir.join("trace.csv");
    let (_, rows) = read_simple_csv(&t_path)?;
    let rank = chain.config.rank;
    if rows.len() != k {
        return Err(format_err(
            &t_path,
            0,
            format!("{} trace rows, expected {k}", rows.len()),
        ));
    }
    for (d, row) in rows.iter().enumerate() {
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| format_err(&t_path, 0, format!("malformed trace row {}", d + 1)))
        };
        if row.len() != 3 + rank {
            return Err(format_err(
                &t_path,
                0,
                format!("trace row {} has {} fields", d + 1, row.len()),
            ));
        }
        chain.loglik.push(parse(&row[1])?);
        chain.tau.push(parse(&row[2])?);
        for v in &row[3..] {
            chain.phi.push(parse(v)?);
        }
    }
    let m_path = dir.join("margins.tsr");
    if m_path.exists() {
        let m = read_tsr1(&m_path)?;
        let width = m.dims()[1];
        for row in m.values().chunks_exact(width) {
            let mut it = row.iter().copied();
            let margins = (0..rank)
                .map(|_| chain.dims.iter().map(|&p| it.by_ref().take(p).collect()).collect())
                .collect();
            chain.margins.push(ParafacFactors::new(chain.dims.clone(), margins)?);
        }
    }
    Ok(chain)
}

// ---------------------------------------------------------------- JSON / manifest

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| format_err(path, 0, format!("serialization failed: {e}")))?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        let line_start: usize = bytes
            .split(|&b| b == b'\n')
            .take(e.line().saturating_sub(1))
            .map(|l| l.len() + 1)
            .sum();
        format_err(path, (line_start + e.column().saturating_sub(1)) as u64, e.to_string())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub build_id: String,
    pub seed: Option<u64>,
    /// Resolved configuration values.
    pub config: BTreeMap<String, String>,
    pub dataset_sha256: Option<String>,
    pub elapsed_seconds: f64,
    pub outputs: Vec<ArtifactEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            build_id: build_id(),
            seed,
            config,
            dataset_sha256: None,
            elapsed_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Record each file with its content hash, paths relative to `root`.
    pub fn add_outputs(&mut self, root: &Path, files: &[PathBuf]) -> Result<()> {
        for f in files {
            let rel = f.strip_prefix(root).unwrap_or(f);
            self.outputs.push(ArtifactEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_file(f)?,
            });
        }
        Ok(())
    }
}

/// `TENSORCLASS_BUILD_ID` at compile time (e.g. `git describe`), else the
/// crate version.
pub fn build_id() -> String {
    option_env!("TENSORCLASS_BUILD_ID")
        .map(str::to_string)
        .unwrap_or_else(|| format!("tensorclass-{}", env!("CARGO_PKG_VERSION")))
}

/// Hash over the dataset files in a fixed order.
pub fn dataset_hash(dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for name in DATASET_FILES {
        h.update(name.as_bytes());
        h.update(read_bytes(&dir.join(name))?);
    }
    Ok(hex::encode(h.finalize()))
}
