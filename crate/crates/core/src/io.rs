//! Text formats: datasets, sparse BRV export and model files.
//!
//! Dataset lines are `bag_id,label,f1,...,fd`. Lines of one bag need not be
//! adjacent; instance order within a bag follows the file. Blank lines and
//! lines starting with `#` are ignored. Labels `1`/`+1` are positive,
//! `-1`/`0` negative, and an empty label field marks an unlabeled bag.
//!
//! Floats are written in the shortest form that parses back to the same
//! double, so writing is byte-stable.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::brv::{BagReferenceVector, FeaturizerBinding, Fingerprint, Normalization};
use crate::data::{validate_dataset, Bag, BagLabel, Dataset, Instance};
use crate::dist::{DistParams, OperatorId};
use crate::error::{Error, Result};
use crate::svm::LinearModel;

pub const MODEL_MAGIC: &str = "mibrv-model";
pub const MODEL_VERSION: &str = "v1";

/// Shortest round-trip decimal form of `v`. Very large or very small
/// magnitudes use exponent notation.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn parse_label(token: &str, line: usize) -> Result<Option<BagLabel>> {
    match token {
        "1" | "+1" => Ok(Some(BagLabel::Positive)),
        "-1" | "0" => Ok(Some(BagLabel::Negative)),
        "" => Ok(None),
        other => Err(Error::parse(line, format!("bad label `{other}`"))),
    }
}

fn parse_float(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::parse(line, format!("bad number `{token}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value `{token}`")));
    }
    Ok(v)
}

struct PendingBag {
    id: String,
    label: Option<BagLabel>,
    instances: Vec<Instance>,
}

/// Reads a dataset and validates it.
pub fn parse_dataset<R: Read>(source: R) -> Result<Dataset> {
    let reader = BufReader::new(source);
    let mut order: Vec<PendingBag> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut dim: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let id = fields.next().unwrap_or_default();
        if id.is_empty() {
            return Err(Error::parse(lineno, "missing bag id"));
        }
        let label = parse_label(
            fields
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing label field"))?,
            lineno,
        )?;
        let features = fields
            .map(|t| parse_float(t, lineno))
            .collect::<Result<Vec<f64>>>()?;
        if features.is_empty() {
            return Err(Error::parse(lineno, "no feature fields"));
        }
        match dim {
            None => dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(Error::dim(format!("line {lineno}"), d, features.len()));
            }
            _ => {}
        }
        let slot = match by_id.get(id) {
            Some(&slot) => {
                if order[slot].label != label {
                    return Err(Error::InconsistentBagLabel {
                        line: lineno,
                        bag: id.to_string(),
                    });
                }
                slot
            }
            None => {
                by_id.insert(id.to_string(), order.len());
                order.push(PendingBag {
                    id: id.to_string(),
                    label,
                    instances: Vec::new(),
                });
                order.len() - 1
            }
        };
        order[slot].instances.push(Instance::new(features));
    }

    let bags = order
        .into_iter()
        .map(|p| Bag::new(p.id, p.instances, p.label))
        .collect();
    validate_dataset(Dataset::from_bags_unchecked(bags))
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_dataset(File::open(path)?)
}

fn check_writable_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.trim() == id
        && !id.starts_with('#')
        && !id.contains([',', '\n', '\r']);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidBagId(id.to_string()))
    }
}

/// Writes the canonical form: bags in dataset order, instances in bag order.
pub fn write_dataset<W: Write>(ds: &Dataset, sink: W) -> Result<()> {
    let mut out = BufWriter::new(sink);
    for bag in ds.bags() {
        check_writable_id(bag.id())?;
        let label = bag.label().map(|l| l.to_string()).unwrap_or_default();
        for inst in bag.instances() {
            write!(out, "{},{}", bag.id(), label)?;
            for &v in inst.features() {
                write!(out, ",{}", format_f64(v))?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One sparse `label index:value ...` line per row, 1-based indices, zero
/// coordinates omitted. Unlabeled rows get label `0`.
pub fn export_rows<W: Write, X: AsRef<[f64]>>(
    rows: &[X],
    labels: &[Option<BagLabel>],
    sink: W,
) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: labels.len(),
        });
    }
    let mut out = BufWriter::new(sink);
    for (row, label) in rows.iter().zip(labels) {
        match label {
            Some(l) => write!(out, "{l}")?,
            None => write!(out, "0")?,
        }
        for (j, &v) in row.as_ref().iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{}", j + 1, format_f64(v))?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_brv<W: Write>(
    vectors: &[BagReferenceVector],
    labels: &[BagLabel],
    sink: W,
) -> Result<()> {
    let rows: Vec<&[f64]> = vectors.iter().map(BagReferenceVector::values).collect();
    let labels: Vec<Option<BagLabel>> = labels.iter().copied().map(Some).collect();
    export_rows(&rows, &labels, sink)
}

/// Dense rows and their labels, as read from a sparse file.
pub type SparseRows = (Vec<Vec<f64>>, Vec<Option<BagLabel>>);

/// Reads the sparse format back into dense rows of length `dim`.
pub fn parse_sparse<R: Read>(source: R, dim: usize) -> Result<SparseRows> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        labels.push(match label {
            "1" | "+1" => Some(BagLabel::Positive),
            "-1" => Some(BagLabel::Negative),
            "0" => None,
            other => return Err(Error::parse(lineno, format!("bad label `{other}`"))),
        });
        let mut row = vec![0.0; dim];
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("bad pair `{tok}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad index `{i}`")))?;
            if i == 0 || i > dim {
                return Err(Error::parse(lineno, format!("index {i} out of range 1..={dim}")));
            }
            row[i - 1] = parse_float(v, lineno)?;
        }
        rows.push(row);
    }
    Ok((rows, labels))
}

pub fn save_model<W: Write>(model: &LinearModel, sink: W) -> Result<()> {
    let mut out = BufWriter::new(sink);
    writeln!(
        out,
        "{MODEL_MAGIC} {MODEL_VERSION} dim={} bias_scale={}",
        model.dim(),
        format_f64(model.bias_scale)
    )?;
    writeln!(out, "bias {}", format_f64(model.bias))?;
    for (i, &w) in model.weights.iter().enumerate() {
        writeln!(out, "w[{i}] {}", format_f64(w))?;
    }
    if let Some(b) = &model.featurizer {
        writeln!(out, "k {}", b.params.k())?;
        writeln!(out, "ops {}", b.params.operators_string())?;
        writeln!(out, "normalize {}", b.normalization)?;
        writeln!(out, "refs {}", b.ref_fingerprint)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_model_file(model: &LinearModel, path: impl AsRef<Path>) -> Result<()> {
    save_model(model, File::create(path)?)
}

fn parse_header(line: &str) -> Result<(usize, f64)> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(MODEL_MAGIC) || parts.next() != Some(MODEL_VERSION) {
        return Err(Error::VersionMismatch(line.to_string()));
    }
    let mut dim = None;
    let mut bias_scale = None;
    for part in parts {
        match part.split_once('=') {
            Some(("dim", v)) => dim = v.parse::<usize>().ok(),
            Some(("bias_scale", v)) => bias_scale = v.parse::<f64>().ok().filter(|s| s.is_finite()),
            _ => return Err(Error::parse(1, format!("unexpected header field `{part}`"))),
        }
    }
    match (dim, bias_scale) {
        (Some(d), Some(s)) => Ok((d, s)),
        _ => Err(Error::parse(1, "header needs dim= and bias_scale=")),
    }
}

pub fn load_model<R: Read>(source: R) -> Result<LinearModel> {
    let mut lines = BufReader::new(source).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::VersionMismatch("<empty file>".into()))?;
    let (dim, bias_scale) = parse_header(&header)?;

    let mut bias = None;
    let mut weights = Vec::with_capacity(dim);
    let mut k = None;
    let mut ops = None;
    let mut normalization = None;
    let mut refs = None;

    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| Error::parse(lineno, format!("expected `key value`, got `{line}`")))?;
        let value = value.trim();
        match key {
            "bias" => bias = Some(parse_float(value, lineno)?),
            "k" => {
                k = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| Error::parse(lineno, format!("bad k `{value}`")))?,
                )
            }
            "ops" => ops = Some(OperatorId::parse_list(value).map_err(|e| Error::parse(lineno, e.to_string()))?),
            "normalize" => {
                normalization = Some(
                    value
                        .parse::<Normalization>()
                        .map_err(|e| Error::parse(lineno, e.to_string()))?,
                )
            }
            "refs" => {
                refs = Some(
                    value
                        .parse::<Fingerprint>()
                        .map_err(|e| Error::parse(lineno, e.to_string()))?,
                )
            }
            _ if key.starts_with("w[") && key.ends_with(']') => {
                let i: usize = key[2..key.len() - 1]
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad weight key `{key}`")))?;
                if i != weights.len() {
                    return Err(Error::parse(lineno, format!("expected w[{}], got {key}", weights.len())));
                }
                weights.push(parse_float(value, lineno)?);
            }
            _ => return Err(Error::parse(lineno, format!("unknown key `{key}`"))),
        }
    }

    let bias = bias.ok_or_else(|| Error::parse(2, "missing bias line"))?;
    if weights.len() != dim {
        return Err(Error::dim("model weights", dim, weights.len()));
    }
    let featurizer = match (k, ops, normalization, refs) {
        (None, None, None, None) => None,
        (Some(k), Some(ops), Some(normalization), Some(ref_fingerprint)) => Some(FeaturizerBinding {
            params: DistParams::new(k, ops)?,
            normalization,
            ref_fingerprint,
        }),
        _ => {
            return Err(Error::parse(
                0,
                "featurizer metadata needs all of k, ops, normalize, refs",
            ))
        }
    };
    Ok(LinearModel {
        weights,
        bias,
        bias_scale,
        featurizer,
    })
}

pub fn read_model_file(path: impl AsRef<Path>) -> Result<LinearModel> {
    load_model(File::open(path)?)
}
