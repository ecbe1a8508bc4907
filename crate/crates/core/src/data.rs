//! Bags, instances, labels and datasets.
//!
//! All types are immutable once built. A [`Dataset`] obtained through
//! [`Dataset::new`] or [`validate_dataset`] is guaranteed to satisfy every
//! invariant the rest of the crate relies on: nonempty bags, one shared
//! dimensionality, finite features and unique bag ids.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// One point of a bag's point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance(Vec<f64>);

impl Instance {
    pub fn new(features: Vec<f64>) -> Self {
        Instance(features)
    }

    pub fn features(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Instance {
    fn from(v: Vec<f64>) -> Self {
        Instance(v)
    }
}

impl AsRef<[f64]> for Instance {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BagLabel {
    Negative,
    Positive,
}

impl BagLabel {
    /// `+1.0` or `-1.0`.
    pub fn sign(self) -> f64 {
        match self {
            BagLabel::Positive => 1.0,
            BagLabel::Negative => -1.0,
        }
    }

    pub fn from_sign(value: f64) -> Self {
        if value >= 0.0 {
            BagLabel::Positive
        } else {
            BagLabel::Negative
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            BagLabel::Positive => BagLabel::Negative,
            BagLabel::Negative => BagLabel::Positive,
        }
    }
}

impl fmt::Display for BagLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BagLabel::Positive => f.write_str("1"),
            BagLabel::Negative => f.write_str("-1"),
        }
    }
}

/// A labeled (or unlabeled) multiset of instances.
///
/// Construction does not validate; invariants are checked when the bag is
/// placed into a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    id: String,
    instances: Vec<Instance>,
    label: Option<BagLabel>,
}

impl Bag {
    pub fn new(id: impl Into<String>, instances: Vec<Instance>, label: Option<BagLabel>) -> Self {
        Bag {
            id: id.into(),
            instances,
            label,
        }
    }

    /// Convenience constructor from raw rows.
    pub fn from_rows(id: impl Into<String>, rows: Vec<Vec<f64>>, label: Option<BagLabel>) -> Self {
        Bag::new(id, rows.into_iter().map(Instance::new).collect(), label)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn label(&self) -> Option<BagLabel> {
        self.label
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Dimensionality of the first instance, 0 for an empty bag.
    pub fn dim(&self) -> usize {
        self.instances.first().map_or(0, Instance::dim)
    }

    pub fn with_label(mut self, label: Option<BagLabel>) -> Self {
        self.label = label;
        self
    }

    /// Applies `f` to every feature value, keeping id and label.
    pub fn map_features(&self, mut f: impl FnMut(usize, f64) -> f64) -> Bag {
        let instances = self
            .instances
            .iter()
            .map(|inst| {
                Instance::new(
                    inst.features()
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| f(j, v))
                        .collect(),
                )
            })
            .collect();
        Bag::new(self.id.clone(), instances, self.label)
    }

    /// Checks the per-bag invariants against an expected dimensionality.
    pub fn check(&self, dim: usize) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::EmptyBag(self.id.clone()));
        }
        for inst in &self.instances {
            if inst.dim() != dim {
                return Err(Error::dim(format!("bag `{}`", self.id), dim, inst.dim()));
            }
            if !inst.is_finite() {
                return Err(Error::NonFiniteFeature(self.id.clone()));
            }
        }
        Ok(())
    }
}

/// An ordered collection of bags sharing one dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    bags: Vec<Bag>,
    dim: usize,
}

impl Dataset {
    /// Builds and validates a dataset.
    pub fn new(bags: Vec<Bag>) -> Result<Self> {
        validate_dataset(Dataset::from_bags_unchecked(bags))
    }

    /// Builds a dataset without checking invariants. The dimensionality is
    /// taken from the first instance of the first bag.
    pub fn from_bags_unchecked(bags: Vec<Bag>) -> Self {
        let dim = bags.first().map_or(0, Bag::dim);
        Dataset { bags, dim }
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn into_bags(self) -> Vec<Bag> {
        self.bags
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn labels(&self) -> Vec<Option<BagLabel>> {
        self.bags.iter().map(Bag::label).collect()
    }

    /// All labels, failing on the first unlabeled bag.
    pub fn require_labels(&self) -> Result<Vec<BagLabel>> {
        self.bags
            .iter()
            .map(|b| b.label().ok_or_else(|| Error::MissingLabel(b.id().to_string())))
            .collect()
    }

    /// A new dataset made of the bags at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            bags: indices.iter().map(|&i| self.bags[i].clone()).collect(),
            dim: self.dim,
        }
    }
}

/// Returns the dataset unchanged if every invariant holds.
pub fn validate_dataset(ds: Dataset) -> Result<Dataset> {
    let first = ds.bags.first().ok_or(Error::EmptyDataset)?;
    if first.is_empty() {
        return Err(Error::EmptyBag(first.id().to_string()));
    }
    if ds.dim == 0 || first.dim() != ds.dim {
        if ds.dim == 0 {
            return Err(Error::ZeroDim(first.id().to_string()));
        }
        return Err(Error::dim(format!("bag `{}`", first.id()), ds.dim, first.dim()));
    }
    let mut seen = HashSet::with_capacity(ds.bags.len());
    for bag in &ds.bags {
        if !seen.insert(bag.id()) {
            return Err(Error::DuplicateBagId(bag.id().to_string()));
        }
        bag.check(ds.dim)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(id: &str, rows: Vec<Vec<f64>>) -> Bag {
        Bag::from_rows(id, rows, Some(BagLabel::Positive))
    }

    #[test]
    fn well_formed_dataset_is_returned_unchanged() {
        let bags = vec![
            bag("a", vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 1.0]]),
            bag("b", vec![vec![0.5, 0.5], vec![1.5, 0.0], vec![2.0, -1.0]]),
        ];
        let ds = Dataset::from_bags_unchecked(bags.clone());
        let out = validate_dataset(ds.clone()).unwrap();
        assert_eq!(out, ds);
        assert_eq!(out.dim(), 2);
        // idempotent
        assert_eq!(validate_dataset(out.clone()).unwrap(), out);
    }

    #[test]
    fn empty_bag_is_rejected() {
        let ds = Dataset::from_bags_unchecked(vec![
            bag("a", vec![vec![0.0, 0.0]]),
            Bag::new("empty", vec![], None),
        ]);
        match validate_dataset(ds) {
            Err(Error::EmptyBag(id)) => assert_eq!(id, "empty"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        let ds = Dataset::from_bags_unchecked(vec![
            bag("a", vec![vec![0.0, 0.0]]),
            bag("b", vec![vec![0.0, 0.0, 0.0]]),
        ]);
        match validate_dataset(ds) {
            Err(Error::DimMismatch { context, expected, found }) => {
                assert!(context.contains('b'));
                assert_eq!((expected, found), (2, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_non_finite_values_are_rejected() {
        let dup = Dataset::from_bags_unchecked(vec![
            bag("a", vec![vec![0.0]]),
            bag("a", vec![vec![1.0]]),
        ]);
        assert!(matches!(validate_dataset(dup), Err(Error::DuplicateBagId(id)) if id == "a"));

        let nan = Dataset::from_bags_unchecked(vec![bag("x", vec![vec![0.0], vec![f64::NAN]])]);
        assert!(matches!(validate_dataset(nan), Err(Error::NonFiniteFeature(id)) if id == "x"));

        let inf = Dataset::from_bags_unchecked(vec![bag("y", vec![vec![f64::INFINITY]])]);
        assert!(matches!(validate_dataset(inf), Err(Error::NonFiniteFeature(_))));
    }

    #[test]
    fn empty_dataset_and_zero_dim_are_rejected() {
        assert!(matches!(
            validate_dataset(Dataset::from_bags_unchecked(vec![])),
            Err(Error::EmptyDataset)
        ));
        let zero = Dataset::from_bags_unchecked(vec![bag("z", vec![vec![]])]);
        assert!(matches!(validate_dataset(zero), Err(Error::ZeroDim(_))));
    }

    #[test]
    fn label_signs() {
        assert_eq!(BagLabel::from_sign(0.0), BagLabel::Positive);
        assert_eq!(BagLabel::from_sign(-1e-300), BagLabel::Negative);
        assert_eq!(BagLabel::Positive.flipped(), BagLabel::Negative);
        assert_eq!(BagLabel::Negative.to_string(), "-1");
    }
}
