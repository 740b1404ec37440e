//! On-disk formats: dataset files, evaluation-label files and model
//! checkpoints.
//!
//! Dataset file:
//!
//! ```text
//! PRCL-DATASET v1\n
//! <DatasetSpec fields, one `key = value` line each>\n
//! END\n
//! labeled images:   features (f64 LE, pixel-major), labels (u16 LE)
//! unlabeled images: features (f64 LE)
//! ```
//!
//! The evaluation-label file lives next to it with an `.eval` suffix:
//!
//! ```text
//! PRCL-EVAL v1\n
//! n_labeled = .., n_unlabeled = .., pixels = ..\n
//! END\n
//! unlabeled images: true labels (u16 LE), boundary flags (u8)
//! labeled images:   flip flags (u8)
//! ```
//!
//! Checkpoint: magic `PRCLCKPT`, version (u32 LE), six model dimensions
//! (u32 LE each: input, hidden, feature, classes, head_hidden, embed),
//! flags (u8: bit 0 variance clamp, bit 1 unit-norm mean), init seed (u64 LE), parameter count (u64 LE),
//! then the parameters as f64 LE in declaration order.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::data::{DatasetSpec, EvalLabels, LabeledImage, PixelDataset, UnlabeledImage};
use crate::error::{Error, Result};
use crate::model::{ModelDims, ToyModel};
use crate::ClassId;

const DATASET_MAGIC: &str = "PRCL-DATASET v1";
const EVAL_MAGIC: &str = "PRCL-EVAL v1";
const CKPT_MAGIC: &[u8; 8] = b"PRCLCKPT";
const CKPT_VERSION: u32 = 1;

pub fn eval_path(dataset: &Path) -> PathBuf {
    let mut s = dataset.as_os_str().to_owned();
    s.push(".eval");
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn write_f64s(w: &mut impl Write, path: &Path, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, path: &Path, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn write_labels(w: &mut impl Write, path: &Path, labels: &[ClassId]) -> Result<()> {
    for &c in labels {
        let v = u16::try_from(c).map_err(|_| Error::format(path, format!("class {c} exceeds u16")))?;
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn read_labels(r: &mut impl Read, path: &Path, n: usize) -> Result<Vec<ClassId>> {
    let mut buf = vec![0u8; n * 2];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]) as ClassId)
        .collect())
}

fn write_flags(w: &mut impl Write, path: &Path, flags: &[bool]) -> Result<()> {
    let bytes: Vec<u8> = flags.iter().map(|&b| b as u8).collect();
    w.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn read_flags(r: &mut impl Read, path: &Path, n: usize) -> Result<Vec<bool>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    buf.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::format(path, format!("flag byte {other}"))),
        })
        .collect()
}

/// Reads `magic`, then `key = value` lines up to `END`, returned as TOML text.
fn read_header(r: &mut impl BufRead, path: &Path, magic: &str) -> Result<String> {
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if line.trim_end() != magic {
        return Err(Error::format(path, format!("expected header `{magic}`")));
    }
    let mut body = String::new();
    loop {
        line.clear();
        let n = r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::format(path, "header not terminated by END"));
        }
        if line.trim_end() == "END" {
            return Ok(body);
        }
        body.push_str(&line);
    }
}

fn spec_header(spec: &DatasetSpec) -> Result<String> {
    toml::to_string(spec).map_err(|e| Error::Config(e.to_string()))
}

/// Writes the dataset file and its `.eval` companion.
pub fn save_dataset(ds: &PixelDataset, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let header = format!("{DATASET_MAGIC}\n{}END\n", spec_header(&ds.spec)?);
    w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    for img in &ds.labeled {
        write_f64s(&mut w, path, &img.features)?;
        write_labels(&mut w, path, &img.labels)?;
    }
    for img in &ds.unlabeled {
        write_f64s(&mut w, path, &img.features)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let epath = eval_path(path);
    let eval = ds.eval_labels();
    let mut w = create(&epath)?;
    let header = format!(
        "{EVAL_MAGIC}\nn_labeled = {}\nn_unlabeled = {}\npixels = {}\nEND\n",
        ds.spec.n_labeled,
        ds.spec.n_unlabeled,
        ds.spec.pixels_per_image()
    );
    w.write_all(header.as_bytes()).map_err(|e| Error::io(&epath, e))?;
    for (labels, boundary) in eval.unlabeled.iter().zip(&eval.unlabeled_boundary) {
        write_labels(&mut w, &epath, labels)?;
        write_flags(&mut w, &epath, boundary)?;
    }
    for flips in &eval.labeled_flips {
        write_flags(&mut w, &epath, flips)?;
    }
    w.flush().map_err(|e| Error::io(&epath, e))
}

fn expect_eof(r: &mut impl Read, path: &Path) -> Result<()> {
    let mut rest = [0u8; 1];
    match r.read(&mut rest).map_err(|e| Error::io(path, e))? {
        0 => Ok(()),
        _ => Err(Error::format(path, "trailing bytes")),
    }
}

/// Reads a dataset written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<PixelDataset> {
    let mut r = open(path)?;
    let header = read_header(&mut r, path, DATASET_MAGIC)?;
    let spec: DatasetSpec = toml::from_str(&header).map_err(|e| Error::format(path, e.to_string()))?;
    spec.validate()?;
    let n = spec.pixels_per_image();
    let mut labeled = Vec::with_capacity(spec.n_labeled);
    for _ in 0..spec.n_labeled {
        let features = read_f64s(&mut r, path, n * spec.input_dim)?;
        let labels = read_labels(&mut r, path, n)?;
        labeled.push(LabeledImage { features, labels });
    }
    let mut unlabeled = Vec::with_capacity(spec.n_unlabeled);
    for _ in 0..spec.n_unlabeled {
        unlabeled.push(UnlabeledImage {
            features: read_f64s(&mut r, path, n * spec.input_dim)?,
        });
    }
    expect_eof(&mut r, path)?;

    let epath = eval_path(path);
    let mut r = open(&epath)?;
    let header = read_header(&mut r, &epath, EVAL_MAGIC)?;
    let counts: toml::Table = toml::from_str(&header).map_err(|e| Error::format(&epath, e.to_string()))?;
    let get = |key: &str| counts.get(key).and_then(|v| v.as_integer()).map(|v| v as usize);
    if get("n_labeled") != Some(spec.n_labeled) || get("n_unlabeled") != Some(spec.n_unlabeled) || get("pixels") != Some(n)
    {
        return Err(Error::format(&epath, "evaluation file does not match dataset"));
    }
    let mut truth = Vec::with_capacity(spec.n_unlabeled);
    let mut boundary = Vec::with_capacity(spec.n_unlabeled);
    for _ in 0..spec.n_unlabeled {
        truth.push(read_labels(&mut r, &epath, n)?);
        boundary.push(read_flags(&mut r, &epath, n)?);
    }
    let mut flips = Vec::with_capacity(spec.n_labeled);
    for _ in 0..spec.n_labeled {
        flips.push(read_flags(&mut r, &epath, n)?);
    }
    expect_eof(&mut r, &epath)?;

    PixelDataset::from_parts(
        spec,
        labeled,
        unlabeled,
        EvalLabels {
            unlabeled: truth,
            unlabeled_boundary: boundary,
            labeled_flips: flips,
        },
    )
}

/// Serialises a model checkpoint into bytes.
pub fn checkpoint_bytes(model: &ToyModel, seed: u64) -> Vec<u8> {
    let d = model.dims();
    let mut out = Vec::with_capacity(64 + model.num_params() * 8);
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    for v in [d.input, d.hidden, d.feature, d.classes, d.head_hidden, d.embed] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(model.clamp_variance() as u8 | (d.unit_mean as u8) << 1);
    out.extend_from_slice(&seed.to_le_bytes());
    out.extend_from_slice(&(model.num_params() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn save_checkpoint(model: &ToyModel, seed: u64, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&checkpoint_bytes(model, seed))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Returns the model and the seed stored with it.
pub fn load_checkpoint(path: &Path) -> Result<(ToyModel, u64)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes).map_err(|reason| Error::format(path, reason))
}

fn parse_checkpoint(bytes: &[u8]) -> std::result::Result<(ToyModel, u64), String> {
    let mut pos = 0;
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let s = bytes.get(pos..pos + n).ok_or("truncated checkpoint")?;
        pos += n;
        Ok(s)
    };
    if take(8)? != CKPT_MAGIC {
        return Err("bad checkpoint magic".into());
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    }
    let flags = take(1)?[0];
    if flags > 3 {
        return Err(format!("bad flag byte {flags}"));
    }
    let clamp = flags & 1 != 0;
    let seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let raw = take(count.checked_mul(8).ok_or("parameter count overflow")?)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if pos != bytes.len() {
        return Err("trailing bytes after parameters".into());
    }
    let dims = ModelDims {
        input: dims[0],
        hidden: dims[1],
        feature: dims[2],
        classes: dims[3],
        head_hidden: dims[4],
        embed: dims[5],
        unit_mean: flags & 2 != 0,
    };
    let model = ToyModel::from_params(dims, params, clamp).map_err(|e| e.to_string())?;
    Ok((model, seed))
}
