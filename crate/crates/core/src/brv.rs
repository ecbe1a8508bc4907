//! Bag reference vectors.
//!
//! A bag is described by its operator distances to every bag of a fixed,
//! ordered [`ReferenceSet`]. The vector holds one block of length `R` per
//! selected operator, blocks in operator order, coordinates in reference
//! order. Each block is scaled to unit L2 norm on its own; an all-zero block
//! stays zero. [`Normalization::Global`] scales the whole vector instead.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::data::{Bag, Dataset};
use crate::dist::{DistParams, OperatorId, PairProfile};
use crate::error::{Error, Result};

/// SHA-256 content hash of a reference set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint([u8; 32]);

impl Fingerprint {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for Fingerprint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s.trim(), &mut out)
            .map_err(|e| Error::InvalidParameter(format!("bad fingerprint `{s}`: {e}")))?;
        Ok(Fingerprint(out))
    }
}

/// The ordered bags that define the coordinate system of a BRV.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    bags: Arc<[Bag]>,
    dim: usize,
    fingerprint: Fingerprint,
}

impl ReferenceSet {
    /// Uses every bag of a validated dataset as a reference, in order.
    pub fn from_dataset(ds: &Dataset) -> Self {
        ReferenceSet::from_validated(ds.bags().to_vec(), ds.dim())
    }

    /// Validates the bags and builds the reference set.
    pub fn new(bags: Vec<Bag>) -> Result<Self> {
        let ds = Dataset::new(bags)?;
        let dim = ds.dim();
        Ok(ReferenceSet::from_validated(ds.into_bags(), dim))
    }

    fn from_validated(bags: Vec<Bag>, dim: usize) -> Self {
        let fingerprint = fingerprint_bags(&bags, dim);
        ReferenceSet {
            bags: bags.into(),
            dim,
            fingerprint,
        }
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.bags.iter().any(|b| b.id() == id)
    }
}

// Labels are not hashed: they do not influence the features.
fn fingerprint_bags(bags: &[Bag], dim: usize) -> Fingerprint {
    let mut h = Sha256::new();
    h.update(b"mibrv-refs v1");
    h.update((dim as u64).to_le_bytes());
    h.update((bags.len() as u64).to_le_bytes());
    for bag in bags {
        h.update((bag.id().len() as u64).to_le_bytes());
        h.update(bag.id().as_bytes());
        h.update((bag.len() as u64).to_le_bytes());
        for inst in bag.instances() {
            for v in inst.features() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    Fingerprint(h.finalize().into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Normalization {
    /// Each operator block has unit L2 norm.
    #[default]
    Block,
    /// The concatenated vector has unit L2 norm.
    Global,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Block => "block",
            Normalization::Global => "global",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "block" => Ok(Normalization::Block),
            "global" => Ok(Normalization::Global),
            other => Err(Error::InvalidParameter(format!(
                "normalization must be `block` or `global`, got `{other}`"
            ))),
        }
    }
}

/// What a trained model needs to reproduce its feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizerBinding {
    pub params: DistParams,
    pub normalization: Normalization,
    pub ref_fingerprint: Fingerprint,
}

impl FeaturizerBinding {
    pub fn new(refs: &ReferenceSet, params: &DistParams, normalization: Normalization) -> Self {
        FeaturizerBinding {
            params: params.clone(),
            normalization,
            ref_fingerprint: refs.fingerprint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BagReferenceVector {
    values: Vec<f64>,
    params: DistParams,
    normalization: Normalization,
    ref_fingerprint: Fingerprint,
}

impl BagReferenceVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn params(&self) -> &DistParams {
        &self.params
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn ref_fingerprint(&self) -> Fingerprint {
        self.ref_fingerprint
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The block of operator at position `t` in the parameter list.
    pub fn block(&self, t: usize) -> &[f64] {
        let r = self.values.len() / self.params.operators().len();
        &self.values[t * r..(t + 1) * r]
    }
}

fn scale_to_unit(values: &mut [f64]) {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in values {
            *v /= norm;
        }
    }
}

/// Normalizes raw operator blocks of length `block_len` in place.
pub fn normalize(values: &mut [f64], block_len: usize, mode: Normalization) {
    match mode {
        Normalization::Block => values.chunks_mut(block_len).for_each(scale_to_unit),
        Normalization::Global => scale_to_unit(values),
    }
}

/// Unnormalized operator distances, laid out as in the BRV.
pub fn raw_features(bag: &Bag, refs: &ReferenceSet, params: &DistParams) -> Result<Vec<f64>> {
    if bag.dim() != refs.dim() {
        return Err(Error::dim(
            format!("bag `{}` against reference set", bag.id()),
            refs.dim(),
            bag.dim(),
        ));
    }
    let r = refs.len();
    let ops = params.operators();
    let mut raw = vec![0.0; r * ops.len()];
    for (j, reference) in refs.bags().iter().enumerate() {
        let profile = PairProfile::compute(params.k(), bag, reference)?;
        for (t, &op) in ops.iter().enumerate() {
            raw[t * r + j] = profile.value(op);
        }
    }
    Ok(raw)
}

/// Maps `bag` to its block-normalized reference vector.
pub fn featurize(bag: &Bag, refs: &ReferenceSet, params: &DistParams) -> Result<BagReferenceVector> {
    featurize_with(bag, refs, params, Normalization::Block)
}

pub fn featurize_with(
    bag: &Bag,
    refs: &ReferenceSet,
    params: &DistParams,
    normalization: Normalization,
) -> Result<BagReferenceVector> {
    let mut values = raw_features(bag, refs, params)?;
    normalize(&mut values, refs.len(), normalization);
    Ok(BagReferenceVector {
        values,
        params: params.clone(),
        normalization,
        ref_fingerprint: refs.fingerprint(),
    })
}

/// [`featurize`] for every bag of `ds`, in order. Runs on the current rayon
/// pool; the result does not depend on the schedule.
pub fn featurize_all(
    ds: &Dataset,
    refs: &ReferenceSet,
    params: &DistParams,
) -> Result<Vec<BagReferenceVector>> {
    featurize_all_with(ds, refs, params, Normalization::Block)
}

pub fn featurize_all_with(
    ds: &Dataset,
    refs: &ReferenceSet,
    params: &DistParams,
    normalization: Normalization,
) -> Result<Vec<BagReferenceVector>> {
    ds.bags()
        .par_iter()
        .map(|bag| featurize_with(bag, refs, params, normalization))
        .collect()
}

/// All six operator values for every ordered pair of bags of one dataset at
/// a fixed `k`.
///
/// Cross-validation reuses this table: a fold's BRVs are the columns of its
/// training bags, which gives bit-for-bit the same vectors as calling
/// [`featurize`] against a reference set made of those bags.
#[derive(Debug, Clone)]
pub struct OperatorTable {
    n: usize,
    k: usize,
    values: Vec<[f64; 6]>,
}

impl OperatorTable {
    pub fn compute(ds: &Dataset, k: usize) -> Result<Self> {
        let n = ds.len();
        let rows: Vec<Vec<[f64; 6]>> = ds
            .bags()
            .par_iter()
            .map(|a| {
                ds.bags()
                    .iter()
                    .map(|b| PairProfile::compute(k, a, b).map(|p| p.all_values()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(OperatorTable {
            n,
            k,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Value of `op` from bag `i` to bag `j`.
    pub fn get(&self, i: usize, j: usize, op: OperatorId) -> f64 {
        self.values[i * self.n + j][usize::from(op.number() - 1)]
    }

    /// Reference vector of bag `i` against the bags at `ref_indices`, which
    /// must be the bags of `refs` in the same order.
    pub fn features(
        &self,
        i: usize,
        ref_indices: &[usize],
        refs: &ReferenceSet,
        params: &DistParams,
        normalization: Normalization,
    ) -> Result<BagReferenceVector> {
        if params.k() != self.k {
            return Err(Error::InvalidParameter(format!(
                "operator table was built for k={}, requested k={}",
                self.k,
                params.k()
            )));
        }
        if ref_indices.len() != refs.len() {
            return Err(Error::LengthMismatch {
                left: ref_indices.len(),
                right: refs.len(),
            });
        }
        let r = ref_indices.len();
        let ops = params.operators();
        let mut values = vec![0.0; r * ops.len()];
        for (t, &op) in ops.iter().enumerate() {
            for (slot, &j) in values[t * r..(t + 1) * r].iter_mut().zip(ref_indices) {
                *slot = self.get(i, j, op);
            }
        }
        normalize(&mut values, r, normalization);
        Ok(BagReferenceVector {
            values,
            params: params.clone(),
            normalization,
            ref_fingerprint: refs.fingerprint(),
        })
    }
}
