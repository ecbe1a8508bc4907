//! Repeated (stratified) k-fold cross-validation.
//!
//! Each fold builds its reference set from the fold's training bags only,
//! featurizes training and test bags against it, trains the SVM and scores
//! the test bags. The reported standard deviation is the population standard
//! deviation over all `repeats x folds` fold accuracies.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::brv::{Normalization, OperatorTable, ReferenceSet};
use crate::data::{BagLabel, Dataset};
use crate::dist::DistParams;
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::svm::{self, SvmConfig};

/// `2^-5 .. 2^5`.
pub fn default_c_grid() -> Vec<f64> {
    (-5..=5).map(|e| 2f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub stratified: bool,
    pub params: DistParams,
    pub normalization: Normalization,
    pub svm: SvmConfig,
    /// When set, C is picked per fold by inner cross-validation on the
    /// training bags.
    pub c_grid: Option<Vec<f64>>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            repeats: 10,
            seed: 0,
            stratified: true,
            params: DistParams::default(),
            normalization: Normalization::Block,
            svm: SvmConfig::default(),
            c_grid: None,
        }
    }
}

impl CvConfig {
    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be at least 1".into()));
        }
        if let Some(grid) = &self.c_grid {
            if grid.is_empty() || grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return Err(Error::InvalidParameter("C grid must hold positive values".into()));
            }
        }
        self.svm.validate()
    }
}

/// Training and test bag indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Training and test bag ids of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldIds {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

fn repeat_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Assigns each item a fold in `0..folds`. Items are shuffled within their
/// class and dealt round-robin, classes one after the other, so every
/// fold's class counts differ by at most one.
fn assign_folds(labels: &[BagLabel], folds: usize, stratified: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::with_capacity(labels.len());
    if stratified {
        for class in [BagLabel::Negative, BagLabel::Positive] {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            members.shuffle(rng);
            order.extend(members);
        }
    } else {
        order.extend(0..labels.len());
        order.shuffle(rng);
    }
    let mut assignment = vec![0; labels.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    assignment
}

fn folds_from_assignment(assignment: &[usize], folds: usize) -> Vec<Fold> {
    (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..assignment.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect()
}

fn check_split(labels: &[BagLabel], folds: usize, stratified: bool) -> Result<()> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("folds must be at least 2, got {folds}")));
    }
    if folds > labels.len() {
        return Err(Error::TooFewBags {
            bags: labels.len(),
            folds,
        });
    }
    if stratified {
        let pos = labels.iter().filter(|&&l| l == BagLabel::Positive).count();
        let count = pos.min(labels.len() - pos);
        if folds > count {
            return Err(Error::TooFewPerClass { count, folds });
        }
    }
    Ok(())
}

/// Fold partition of `ds` for one repeat, as bag indices. Deterministic in
/// `(cfg.seed, repeat_index)`.
pub fn split_fold_indices(ds: &Dataset, cfg: &CvConfig, repeat_index: usize) -> Result<Vec<Fold>> {
    let labels = ds.require_labels()?;
    check_split(&labels, cfg.folds, cfg.stratified)?;
    let mut rng = repeat_rng(cfg.seed, repeat_index as u64);
    let assignment = assign_folds(&labels, cfg.folds, cfg.stratified, &mut rng);
    Ok(folds_from_assignment(&assignment, cfg.folds))
}

/// Fold partition of `ds` for one repeat, as bag ids.
pub fn split_folds(ds: &Dataset, cfg: &CvConfig, repeat_index: usize) -> Result<Vec<FoldIds>> {
    let ids = |idx: &[usize]| idx.iter().map(|&i| ds.bags()[i].id().to_string()).collect();
    Ok(split_fold_indices(ds, cfg, repeat_index)?
        .into_iter()
        .map(|f| FoldIds {
            train: ids(&f.train),
            test: ids(&f.test),
        })
        .collect())
}

/// Fraction of exact matches.
pub fn accuracy(predictions: &[BagLabel], truth: &[BagLabel]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("predictions".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn score<X: AsRef<[f64]>>(model: &svm::LinearModel, xs: &[X], ys: &[BagLabel]) -> Result<f64> {
    let preds = xs
        .iter()
        .map(|x| svm::predict(model, x.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    accuracy(&preds, ys)
}

/// Picks the C with the best inner cross-validated accuracy; ties go to the
/// smaller C. Falls back to `base.c` when a class is too small to split.
pub fn select_c<X: AsRef<[f64]> + Sync>(
    xs: &[X],
    ys: &[BagLabel],
    grid: &[f64],
    base: &SvmConfig,
    seed: u64,
    stream: u64,
) -> Result<f64> {
    let pos = ys.iter().filter(|&&l| l == BagLabel::Positive).count();
    let inner_folds = 5.min(pos).min(ys.len() - pos);
    if inner_folds < 2 {
        return Ok(base.c);
    }
    let mut rng = repeat_rng(seed ^ 0x5eed_c0de_0000_0000, stream);
    let folds = folds_from_assignment(&assign_folds(ys, inner_folds, true, &mut rng), inner_folds);

    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, base.c);
    for &c in &grid {
        let cfg = base.with_c(c);
        let mut total = 0.0;
        for fold in &folds {
            let tx: Vec<&[f64]> = fold.train.iter().map(|&i| xs[i].as_ref()).collect();
            let ty: Vec<BagLabel> = fold.train.iter().map(|&i| ys[i]).collect();
            let vx: Vec<&[f64]> = fold.test.iter().map(|&i| xs[i].as_ref()).collect();
            let vy: Vec<BagLabel> = fold.test.iter().map(|&i| ys[i]).collect();
            let model = svm::train(&tx, &ty, &cfg)?;
            total += score(&model, &vx, &vy)?;
        }
        let mean = total / folds.len() as f64;
        if mean > best.0 {
            best = (mean, c);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub n_test: usize,
    /// C used for this fold's final model.
    pub c: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTimes {
    pub distances: f64,
    pub featurize: f64,
    pub train: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub config: CvConfig,
    pub n_bags: usize,
    pub dim: usize,
    /// Repeat-major: index `repeat * folds + fold`.
    pub records: Vec<FoldRecord>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub times: PhaseTimes,
}

impl CvReport {
    /// Fold accuracies as a `repeats x folds` matrix.
    pub fn per_fold_accuracy(&self) -> Vec<Vec<f64>> {
        self.records
            .chunks(self.config.folds)
            .map(|row| row.iter().map(|r| r.accuracy).collect())
            .collect()
    }

    pub fn summary(&self) -> String {
        format!("{:.3} ± {:.3}", self.mean_accuracy, self.std_accuracy)
    }

    /// Key-value header followed by the folds table. Timings are included
    /// only on request, so the default text is reproducible.
    pub fn to_text(&self, with_times: bool) -> String {
        let c = &self.config;
        let mut s = String::new();
        let grid = match &c.c_grid {
            Some(g) => g.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(","),
            None => "none".into(),
        };
        let _ = writeln!(s, "bags: {}", self.n_bags);
        let _ = writeln!(s, "dim: {}", self.dim);
        let _ = writeln!(s, "k: {}", c.params.k());
        let _ = writeln!(s, "ops: {}", c.params.operators_string());
        let _ = writeln!(s, "normalize: {}", c.normalization);
        let _ = writeln!(s, "folds: {}", c.folds);
        let _ = writeln!(s, "repeats: {}", c.repeats);
        let _ = writeln!(s, "stratified: {}", c.stratified);
        let _ = writeln!(s, "seed: {}", c.seed);
        let _ = writeln!(s, "c: {}", format_f64(c.svm.c));
        let _ = writeln!(s, "c_grid: {grid}");
        let _ = writeln!(s, "tolerance: {}", format_f64(c.svm.tolerance));
        let _ = writeln!(s, "max_passes: {}", c.svm.max_passes);
        let _ = writeln!(s, "bias_scale: {}", format_f64(c.svm.bias_scale));
        let _ = writeln!(s, "mean_accuracy: {}", format_f64(self.mean_accuracy));
        let _ = writeln!(s, "std_accuracy: {}", format_f64(self.std_accuracy));
        let _ = writeln!(s, "std_over: all fold accuracies (population)");
        let _ = writeln!(s, "summary: {}", self.summary());
        if with_times {
            let t = &self.times;
            let _ = writeln!(s, "time_distances: {:.3}", t.distances);
            let _ = writeln!(s, "time_featurize: {:.3}", t.featurize);
            let _ = writeln!(s, "time_train: {:.3}", t.train);
            let _ = writeln!(s, "time_total: {:.3}", t.total);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "repeat fold accuracy n_test c");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                r.repeat,
                r.fold,
                format_f64(r.accuracy),
                r.n_test,
                format_f64(r.c)
            );
        }
        s
    }

    /// One `repeat fold accuracy n_test seconds` line per fold.
    pub fn records_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = writeln!(
                s,
                "{} {} {} {} {:.6}",
                r.repeat,
                r.fold,
                format_f64(r.accuracy),
                r.n_test,
                r.seconds
            );
        }
        s
    }
}

struct FoldOutcome {
    record: FoldRecord,
    featurize: f64,
    train: f64,
}

fn run_fold(
    ds: &Dataset,
    labels: &[BagLabel],
    table: &OperatorTable,
    cfg: &CvConfig,
    repeat: usize,
    fold_index: usize,
    fold: &Fold,
) -> Result<FoldOutcome> {
    let start = Instant::now();
    let refs = ReferenceSet::from_dataset(&ds.subset(&fold.train));
    if let Some(i) = fold.test.iter().find(|&&i| refs.contains_id(ds.bags()[i].id())) {
        return Err(Error::InvalidParameter(format!(
            "test bag `{}` leaked into the reference set",
            ds.bags()[*i].id()
        )));
    }
    let featurize = |idx: &[usize]| -> Result<Vec<Vec<f64>>> {
        idx.iter()
            .map(|&i| {
                table
                    .features(i, &fold.train, &refs, &cfg.params, cfg.normalization)
                    .map(|v| v.into_values())
            })
            .collect()
    };
    let train_x = featurize(&fold.train)?;
    let test_x = featurize(&fold.test)?;
    let train_y: Vec<BagLabel> = fold.train.iter().map(|&i| labels[i]).collect();
    let test_y: Vec<BagLabel> = fold.test.iter().map(|&i| labels[i]).collect();
    let featurize_secs = start.elapsed().as_secs_f64();

    let pos = train_y.iter().filter(|&&l| l == BagLabel::Positive).count();
    if pos == 0 || pos == train_y.len() {
        return Err(Error::SingleClassFold {
            repeat,
            fold: fold_index,
        });
    }

    let train_start = Instant::now();
    let c = match &cfg.c_grid {
        Some(grid) => select_c(
            &train_x,
            &train_y,
            grid,
            &cfg.svm,
            cfg.seed,
            (repeat * cfg.folds + fold_index) as u64,
        )?,
        None => cfg.svm.c,
    };
    let model = svm::train(&train_x, &train_y, &cfg.svm.with_c(c))?;
    let train_secs = train_start.elapsed().as_secs_f64();
    let acc = score(&model, &test_x, &test_y)?;

    Ok(FoldOutcome {
        record: FoldRecord {
            repeat,
            fold: fold_index,
            accuracy: acc,
            n_test: fold.test.len(),
            c,
            seconds: start.elapsed().as_secs_f64(),
        },
        featurize: featurize_secs,
        train: train_secs,
    })
}

/// Runs the full protocol on a labeled dataset.
pub fn run_cv(ds: &Dataset, cfg: &CvConfig) -> Result<CvReport> {
    let start = Instant::now();
    let table = OperatorTable::compute(ds, cfg.params.k())?;
    let distances = start.elapsed().as_secs_f64();
    let mut report = run_cv_with_table(ds, &table, cfg)?;
    report.times.distances = distances;
    report.times.total += distances;
    Ok(report)
}

/// [`run_cv`] with a precomputed operator table, which must have been built
/// from `ds` with `cfg.params.k()`. Sweeps share one table across operator
/// subsets and C values.
pub fn run_cv_with_table(ds: &Dataset, table: &OperatorTable, cfg: &CvConfig) -> Result<CvReport> {
    let start = Instant::now();
    cfg.validate()?;
    let labels = ds.require_labels()?;
    if table.len() != ds.len() {
        return Err(Error::LengthMismatch {
            left: table.len(),
            right: ds.len(),
        });
    }
    let splits = (0..cfg.repeats)
        .map(|r| split_fold_indices(ds, cfg, r))
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize, &Fold)> = splits
        .iter()
        .enumerate()
        .flat_map(|(r, folds)| folds.iter().enumerate().map(move |(f, fold)| (r, f, fold)))
        .collect();
    let outcomes = tasks
        .par_iter()
        .map(|&(r, f, fold)| run_fold(ds, &labels, table, cfg, r, f, fold))
        .collect::<Result<Vec<_>>>()?;

    let accuracies: Vec<f64> = outcomes.iter().map(|o| o.record.accuracy).collect();
    let (mean, std) = mean_std(&accuracies);
    let times = PhaseTimes {
        distances: 0.0,
        featurize: outcomes.iter().map(|o| o.featurize).sum(),
        train: outcomes.iter().map(|o| o.train).sum(),
        total: start.elapsed().as_secs_f64(),
    };
    Ok(CvReport {
        config: cfg.clone(),
        n_bags: ds.len(),
        dim: ds.dim(),
        records: outcomes.into_iter().map(|o| o.record).collect(),
        mean_accuracy: mean,
        std_accuracy: std,
        times,
    })
}
