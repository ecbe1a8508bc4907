//! Set-to-set distances between bags.
//!
//! Every operator is built from the same two stages. For each instance `a`
//! of the query bag `A`, the row of Euclidean distances from `a` to every
//! instance of the reference bag `B` is reduced to a single number by the
//! *inner* statistic: the mean of the `k` smallest entries ([`Inner::Min`])
//! or of the `k` largest entries ([`Inner::Max`]). The resulting per-instance
//! values are then reduced by the *outer* aggregator (min, mean or max).
//!
//! The six combinations are numbered 1 to 6:
//!
//! | id | outer | inner |
//! |----|-------|-------|
//! | 1  | min   | min   |
//! | 2  | mean  | min   |
//! | 3  | max   | min   |
//! | 4  | min   | max   |
//! | 5  | mean  | max   |
//! | 6  | max   | max   |
//!
//! With `k = 1` operator 3 is the directed Hausdorff distance.
//!
//! When `k` exceeds `|B|` it is clamped to `|B|`, so the inner statistic
//! averages over the whole row. Mean-of-k over a multiset does not depend on
//! how ties are broken, so no tie rule is needed.
//!
//! All means are summed in ascending order of their terms. This makes every
//! operator exactly invariant to instance order, and it keeps the orderings
//! `h1 <= h2 <= h3`, `h4 <= h5 <= h6` and `h(t) <= h(t+3)` exact in floating
//! point.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::data::{Bag, Instance};
use crate::error::{Error, Result};

/// Aggregation over the query bag's instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outer {
    Min,
    Mean,
    Max,
}

/// Statistic over one row of instance-to-reference distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Inner {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OperatorId {
    pub outer: Outer,
    pub inner: Inner,
}

impl OperatorId {
    pub const MIN_MIN: OperatorId = OperatorId::new(Outer::Min, Inner::Min);
    pub const MEAN_MIN: OperatorId = OperatorId::new(Outer::Mean, Inner::Min);
    pub const MAX_MIN: OperatorId = OperatorId::new(Outer::Max, Inner::Min);
    pub const MIN_MAX: OperatorId = OperatorId::new(Outer::Min, Inner::Max);
    pub const MEAN_MAX: OperatorId = OperatorId::new(Outer::Mean, Inner::Max);
    pub const MAX_MAX: OperatorId = OperatorId::new(Outer::Max, Inner::Max);

    /// All six operators in canonical order.
    pub const ALL: [OperatorId; 6] = [
        OperatorId::MIN_MIN,
        OperatorId::MEAN_MIN,
        OperatorId::MAX_MIN,
        OperatorId::MIN_MAX,
        OperatorId::MEAN_MAX,
        OperatorId::MAX_MAX,
    ];

    pub const fn new(outer: Outer, inner: Inner) -> Self {
        OperatorId { outer, inner }
    }

    /// Canonical number in `1..=6`.
    pub fn number(self) -> u8 {
        let outer = match self.outer {
            Outer::Min => 1,
            Outer::Mean => 2,
            Outer::Max => 3,
        };
        match self.inner {
            Inner::Min => outer,
            Inner::Max => outer + 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1..=6 => Ok(OperatorId::ALL[usize::from(n - 1)]),
            _ => Err(Error::InvalidParameter(format!(
                "operator number must be in 1..=6, got {n}"
            ))),
        }
    }

    /// Parses a comma separated list such as `2,4,5`.
    pub fn parse_list(s: &str) -> Result<Vec<OperatorId>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u8>()
                    .map_err(|_| Error::InvalidParameter(format!("bad operator `{t}`")))
                    .and_then(OperatorId::from_number)
            })
            .collect()
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Neighbor count and the ordered list of operators to evaluate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DistParams {
    k: usize,
    operators: Vec<OperatorId>,
}

impl DistParams {
    pub fn new(k: usize, operators: Vec<OperatorId>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if operators.is_empty() {
            return Err(Error::InvalidParameter("operator list is empty".into()));
        }
        for (i, op) in operators.iter().enumerate() {
            if operators[..i].contains(op) {
                return Err(Error::InvalidParameter(format!("operator {op} listed twice")));
            }
        }
        Ok(DistParams { k, operators })
    }

    /// All six operators with the given `k`.
    pub fn all(k: usize) -> Result<Self> {
        DistParams::new(k, OperatorId::ALL.to_vec())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn operators(&self) -> &[OperatorId] {
        &self.operators
    }

    /// Operator list formatted as `1,2,3`.
    pub fn operators_string(&self) -> String {
        self.operators
            .iter()
            .map(|op| op.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl Default for DistParams {
    fn default() -> Self {
        DistParams {
            k: 2,
            operators: OperatorId::ALL.to_vec(),
        }
    }
}

impl fmt::Display for DistParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={} ops={}", self.k, self.operators_string())
    }
}

impl FromStr for OperatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .trim()
            .parse::<u8>()
            .map_err(|_| Error::InvalidParameter(format!("bad operator `{s}`")))?;
        OperatorId::from_number(n)
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 4;
    let mut acc = [0.0f64; LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let base = c * LANES;
        for l in 0..LANES {
            let d = a[base + l] - b[base + l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for i in chunks * LANES..a.len() {
        let d = a[i] - b[i];
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Euclidean distance between two instances.
pub fn euclidean(a: &Instance, b: &Instance) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dim("euclidean", a.dim(), b.dim()));
    }
    Ok(squared_distance(a.features(), b.features()).sqrt())
}

fn check_same_dim(a: &Bag, b: &Bag) -> Result<()> {
    let dim = a.dim();
    for bag in [a, b] {
        if bag.is_empty() {
            return Err(Error::EmptyBag(bag.id().to_string()));
        }
        if let Some(inst) = bag.instances().iter().find(|i| i.dim() != dim) {
            return Err(Error::dim(
                format!("bags `{}` and `{}`", a.id(), b.id()),
                dim,
                inst.dim(),
            ));
        }
    }
    Ok(())
}

/// Row-major `rows x cols` matrix of instance-to-instance distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }
}

// Columns of B processed per tile; the tile's instances stay in cache while
// every row of A streams over them.
const COL_TILE: usize = 32;

/// All pairwise distances from instances of `a` (rows) to instances of `b`
/// (columns).
pub fn cross_distance_matrix(a: &Bag, b: &Bag) -> Result<DistanceMatrix> {
    check_same_dim(a, b)?;
    Ok(cross_distances_unchecked(a.instances(), b.instances()))
}

fn cross_distances_unchecked(a: &[Instance], b: &[Instance]) -> DistanceMatrix {
    let (rows, cols) = (a.len(), b.len());
    let mut data = vec![0.0; rows * cols];
    for start in (0..cols).step_by(COL_TILE) {
        let end = (start + COL_TILE).min(cols);
        let tile = &b[start..end];
        for (i, ai) in a.iter().enumerate() {
            let out = &mut data[i * cols + start..i * cols + end];
            for (slot, bj) in out.iter_mut().zip(tile) {
                *slot = squared_distance(ai.features(), bj.features()).sqrt();
            }
        }
    }
    DistanceMatrix { rows, cols, data }
}

/// Directed (forward) Hausdorff distance: max over `a` of min over `b`.
pub fn directed_hausdorff(a: &Bag, b: &Bag) -> Result<f64> {
    let m = cross_distance_matrix(a, b)?;
    Ok(m.iter_rows().map(row_min).fold(f64::NEG_INFINITY, f64::max))
}

/// `max(h(A, B), h(B, A))`.
pub fn symmetric_hausdorff(a: &Bag, b: &Bag) -> Result<f64> {
    let m = cross_distance_matrix(a, b)?;
    let forward = m.iter_rows().map(row_min).fold(f64::NEG_INFINITY, f64::max);
    let backward = (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m.get(i, j)).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(forward.max(backward))
}

#[inline]
fn row_min(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::INFINITY, f64::min)
}

#[inline]
fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Sum of an ascending slice divided by its length, clamped into
/// `[first, last]` so the mean never leaves the range of its terms.
fn sorted_mean(sorted: &[f64]) -> f64 {
    let sum: f64 = sorted.iter().sum();
    let mean = sum / sorted.len() as f64;
    mean.clamp(sorted[0], sorted[sorted.len() - 1])
}

/// Mean of the `k` smallest (`Inner::Min`) or largest (`Inner::Max`) entries
/// of `row`, with `k` clamped to the row length. `scratch` is reused across
/// calls to avoid allocation.
fn inner_statistic(row: &[f64], inner: Inner, k: usize, scratch: &mut Vec<f64>) -> f64 {
    let n = row.len();
    let k = k.min(n);
    if k == 1 {
        return match inner {
            Inner::Min => row_min(row),
            Inner::Max => row_max(row),
        };
    }
    scratch.clear();
    scratch.extend_from_slice(row);
    if k == n {
        scratch.sort_unstable_by(f64::total_cmp);
        return sorted_mean(scratch);
    }
    let picked = match inner {
        Inner::Min => {
            scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
            &mut scratch[..k]
        }
        Inner::Max => {
            scratch.select_nth_unstable_by(n - k, f64::total_cmp);
            &mut scratch[n - k..]
        }
    };
    picked.sort_unstable_by(f64::total_cmp);
    sorted_mean(picked)
}

fn outer_aggregate(values: &mut [f64], outer: Outer) -> f64 {
    match outer {
        Outer::Min => row_min(values),
        Outer::Max => row_max(values),
        Outer::Mean => {
            values.sort_unstable_by(f64::total_cmp);
            sorted_mean(values)
        }
    }
}

/// Per-instance inner statistics of one `(A, B)` pair, from which all six
/// operators follow by outer aggregation.
#[derive(Debug, Clone)]
pub struct PairProfile {
    near: Vec<f64>,
    far: Vec<f64>,
}

impl PairProfile {
    /// Computes the distance matrix once and both inner statistics per row.
    pub fn compute(k: usize, a: &Bag, b: &Bag) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let m = cross_distance_matrix(a, b)?;
        let mut scratch = Vec::with_capacity(m.cols());
        let mut near = Vec::with_capacity(m.rows());
        let mut far = Vec::with_capacity(m.rows());
        for row in m.iter_rows() {
            near.push(inner_statistic(row, Inner::Min, k, &mut scratch));
            far.push(inner_statistic(row, Inner::Max, k, &mut scratch));
        }
        Ok(PairProfile { near, far })
    }

    pub fn value(&self, op: OperatorId) -> f64 {
        let mut values = match op.inner {
            Inner::Min => self.near.clone(),
            Inner::Max => self.far.clone(),
        };
        outer_aggregate(&mut values, op.outer)
    }

    pub fn all_values(&self) -> [f64; 6] {
        OperatorId::ALL.map(|op| self.value(op))
    }
}

/// The k-averaged operator `op` from `a` to `b`.
pub fn bar_operator(op: OperatorId, k: usize, a: &Bag, b: &Bag) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let m = cross_distance_matrix(a, b)?;
    let mut scratch = Vec::with_capacity(m.cols());
    let mut values: Vec<f64> = m
        .iter_rows()
        .map(|row| inner_statistic(row, op.inner, k, &mut scratch))
        .collect();
    Ok(outer_aggregate(&mut values, op.outer))
}

/// The plain (single-neighbor) operator `op` from `a` to `b`.
pub fn hausdorff_operator(op: OperatorId, a: &Bag, b: &Bag) -> Result<f64> {
    let m = cross_distance_matrix(a, b)?;
    let mut values: Vec<f64> = m
        .iter_rows()
        .map(|row| match op.inner {
            Inner::Min => row_min(row),
            Inner::Max => row_max(row),
        })
        .collect();
    Ok(outer_aggregate(&mut values, op.outer))
}

/// Values of `params.operators()` from `a` to `b`, in that order.
pub fn operator_values(params: &DistParams, a: &Bag, b: &Bag) -> Result<Vec<f64>> {
    let profile = PairProfile::compute(params.k(), a, b)?;
    Ok(params.operators().iter().map(|&op| profile.value(op)).collect())
}

/// Reference implementation of [`bar_operator`] for testing: materializes
/// every distance, fully sorts each row and averages naively.
pub fn oracle_bar_operator(op: OperatorId, k: usize, a: &Bag, b: &Bag) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    check_same_dim(a, b)?;
    let mut per_instance = Vec::new();
    for x in a.instances() {
        let mut row: Vec<f64> = b
            .instances()
            .iter()
            .map(|y| {
                x.features()
                    .iter()
                    .zip(y.features())
                    .map(|(p, q)| (p - q).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        row.sort_by(|p, q| p.partial_cmp(q).unwrap_or(Ordering::Equal));
        let kk = k.min(row.len());
        let chosen = match op.inner {
            Inner::Min => &row[..kk],
            Inner::Max => &row[row.len() - kk..],
        };
        per_instance.push(chosen.iter().sum::<f64>() / kk as f64);
    }
    let n = per_instance.len() as f64;
    Ok(match op.outer {
        Outer::Min => per_instance.iter().cloned().fold(f64::INFINITY, f64::min),
        Outer::Max => per_instance.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Outer::Mean => per_instance.iter().sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(rows: &[&[f64]]) -> Bag {
        Bag::from_rows("t", rows.iter().map(|r| r.to_vec()).collect(), None)
    }

    fn pair() -> (Bag, Bag) {
        (
            bag(&[&[0.0, 0.0], &[3.0, 0.0]]),
            bag(&[&[0.0, 0.0], &[0.0, 4.0]]),
        )
    }

    #[test]
    fn euclidean_examples() {
        let e = |a: &[f64], b: &[f64]| {
            euclidean(&Instance::new(a.to_vec()), &Instance::new(b.to_vec())).unwrap()
        };
        assert_eq!(e(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(e(&[1.5, -2.0], &[1.5, -2.0]), 0.0);
        assert_eq!(e(&[1.0, 1.0, 1.0], &[2.0, 3.0, 4.0]), 14f64.sqrt());
        assert!(euclidean(&Instance::new(vec![0.0]), &Instance::new(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn euclidean_long_vectors_use_all_lanes() {
        let a: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let b = vec![0.0; 11];
        let expect: f64 = (0..11).map(|i| (i * i) as f64).sum::<f64>().sqrt();
        let got = euclidean(&Instance::new(a), &Instance::new(b)).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn cross_matrix_example() {
        let (a, b) = pair();
        let m = cross_distance_matrix(&a, &b).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.row(0), &[0.0, 4.0]);
        assert_eq!(m.row(1), &[3.0, 5.0]);

        let x = bag(&[&[1.0, 2.0]]);
        assert_eq!(cross_distance_matrix(&x, &x).unwrap().row(0), &[0.0]);
    }

    #[test]
    fn cross_matrix_spans_several_tiles() {
        let a = Bag::from_rows("a", (0..3).map(|i| vec![i as f64]).collect(), None);
        let b = Bag::from_rows("b", (0..70).map(|j| vec![j as f64 * 0.5]).collect(), None);
        let m = cross_distance_matrix(&a, &b).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 70));
        for i in 0..3 {
            for j in 0..70 {
                assert_eq!(m.get(i, j), (i as f64 - j as f64 * 0.5).abs());
            }
        }
    }

    #[test]
    fn hausdorff_examples() {
        let (a, b) = pair();
        assert_eq!(directed_hausdorff(&a, &b).unwrap(), 3.0);
        assert_eq!(directed_hausdorff(&b, &a).unwrap(), 4.0);
        assert_eq!(symmetric_hausdorff(&a, &b).unwrap(), 4.0);
        assert_eq!(symmetric_hausdorff(&a, &a).unwrap(), 0.0);

        let sub = bag(&[&[0.0, 4.0]]);
        assert_eq!(directed_hausdorff(&sub, &b).unwrap(), 0.0);

        let p = bag(&[&[1.0, 1.0]]);
        let q = bag(&[&[4.0, 5.0]]);
        assert_eq!(directed_hausdorff(&p, &q).unwrap(), 5.0);
        assert_eq!(symmetric_hausdorff(&p, &q).unwrap(), 5.0);
    }

    #[test]
    fn bar_operator_examples() {
        let (a, b) = pair();
        let expect = [0.0, 1.5, 3.0, 4.0, 4.5, 5.0];
        for (op, want) in OperatorId::ALL.iter().zip(expect) {
            assert_eq!(bar_operator(*op, 1, &a, &b).unwrap(), want, "op {op}");
            assert_eq!(oracle_bar_operator(*op, 1, &a, &b).unwrap(), want, "oracle op {op}");
            assert_eq!(hausdorff_operator(*op, &a, &b).unwrap(), want, "plain op {op}");
        }
        assert_eq!(bar_operator(OperatorId::MAX_MIN, 2, &a, &b).unwrap(), 4.0);
        assert_eq!(oracle_bar_operator(OperatorId::MAX_MIN, 2, &a, &b).unwrap(), 4.0);
        for op in [OperatorId::MIN_MIN, OperatorId::MEAN_MIN, OperatorId::MAX_MIN] {
            assert_eq!(bar_operator(op, 1, &a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn k_larger_than_reference_is_clamped() {
        let (a, b) = pair();
        for op in OperatorId::ALL {
            let v2 = bar_operator(op, 2, &a, &b).unwrap();
            assert_eq!(bar_operator(op, 9, &a, &b).unwrap(), v2);
        }
        // both inner statistics average the whole row
        assert_eq!(
            bar_operator(OperatorId::MEAN_MIN, 5, &a, &b).unwrap(),
            bar_operator(OperatorId::MEAN_MAX, 5, &a, &b).unwrap()
        );
    }

    #[test]
    fn profile_matches_single_operator_evaluation() {
        let a = bag(&[&[0.1, 0.2], &[1.5, -0.3], &[2.0, 2.0]]);
        let b = bag(&[&[0.0, 1.0], &[-1.0, 0.5], &[0.3, 0.3], &[4.0, 1.0]]);
        for k in 1..=5 {
            let profile = PairProfile::compute(k, &a, &b).unwrap();
            for op in OperatorId::ALL {
                assert_eq!(
                    profile.value(op).to_bits(),
                    bar_operator(op, k, &a, &b).unwrap().to_bits()
                );
            }
        }
    }

    #[test]
    fn errors() {
        let (a, _) = pair();
        let c = bag(&[&[0.0, 0.0, 0.0]]);
        assert!(matches!(bar_operator(OperatorId::MIN_MIN, 1, &a, &c), Err(Error::DimMismatch { .. })));
        assert!(matches!(directed_hausdorff(&a, &c), Err(Error::DimMismatch { .. })));
        assert!(matches!(bar_operator(OperatorId::MIN_MIN, 0, &a, &a), Err(Error::InvalidParameter(_))));
        assert!(matches!(oracle_bar_operator(OperatorId::MIN_MIN, 1, &a, &c), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn operator_numbering_and_params() {
        for (i, op) in OperatorId::ALL.iter().enumerate() {
            assert_eq!(op.number() as usize, i + 1);
            assert_eq!(OperatorId::from_number(op.number()).unwrap(), *op);
        }
        assert!(OperatorId::from_number(0).is_err());
        assert!(OperatorId::from_number(7).is_err());
        assert_eq!(
            OperatorId::parse_list("2, 4,5").unwrap(),
            vec![OperatorId::MEAN_MIN, OperatorId::MIN_MAX, OperatorId::MEAN_MAX]
        );
        assert!(DistParams::new(0, vec![OperatorId::MIN_MIN]).is_err());
        assert!(DistParams::new(1, vec![]).is_err());
        assert!(DistParams::new(1, vec![OperatorId::MIN_MIN, OperatorId::MIN_MIN]).is_err());
        let p = DistParams::new(2, OperatorId::parse_list("2,4,5").unwrap()).unwrap();
        assert_eq!(p.to_string(), "k=2 ops=2,4,5");
        assert_eq!(DistParams::default().to_string(), "k=2 ops=1,2,3,4,5,6");
    }
}
