//! The `mibrv` command line.
//!
//! Exit codes: 0 on success, 1 on internal or numerical failure, 2 on usage
//! or input errors. Reports go to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::brv::{featurize_all_with, FeaturizerBinding, Normalization, OperatorTable, ReferenceSet};
use crate::data::Dataset;
use crate::dist::{DistParams, OperatorId};
use crate::error::{Error, Result};
use crate::eval::{default_c_grid, run_cv_with_table, select_c, CvConfig, CvReport};
use crate::io::{export_rows, format_f64, read_dataset_file, read_model_file, write_model_file};
use crate::svm::{self, SvmConfig};

#[derive(Debug, Parser)]
#[command(name = "mibrv", version, about = "Multi-instance learning with bag reference vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Map bags to reference vectors and write them in sparse `label index:value` form.
    Featurize {
        dataset: PathBuf,
        /// Reference dataset, or `self` to use the input dataset.
        #[arg(long, default_value = "self")]
        refs: String,
        #[command(flatten)]
        dist: DistArgs,
        /// Output file (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train a model using the dataset as its own reference set.
    Train {
        dataset: PathBuf,
        /// Model output file.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        dist: DistArgs,
        #[command(flatten)]
        svm: SvmArgs,
        /// Select C by inner cross-validation (`auto` = 2^-5..2^5, or a comma list).
        #[arg(long, value_parser = parse_c_grid)]
        c_grid: Option<CGrid>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Predict bag labels: prints `bag_id predicted_label decision_value`.
    Predict {
        model: PathBuf,
        /// The dataset the model was trained on (its reference set).
        refs: PathBuf,
        dataset: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Repeated stratified cross-validation.
    Cv {
        dataset: PathBuf,
        #[command(flatten)]
        dist: DistArgs,
        #[command(flatten)]
        svm: SvmArgs,
        #[command(flatten)]
        cv: CvArgs,
        /// Select C per fold by inner cross-validation (`auto` = 2^-5..2^5, or a comma list).
        #[arg(long, value_parser = parse_c_grid, conflicts_with = "c")]
        c_grid: Option<CGrid>,
        /// Write `repeat fold accuracy n_test seconds` records to this file.
        #[arg(long)]
        records: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Cross-validate every combination of k, operator subset and C.
    Sweep {
        dataset: PathBuf,
        /// Comma separated k values.
        #[arg(long, value_parser = parse_usize_list, default_value = "1,2,3,4")]
        k: KList,
        /// Operator subset; repeat the flag for several subsets.
        #[arg(long, value_parser = parse_ops)]
        ops: Vec<OpList>,
        /// Comma separated C values, one row each.
        #[arg(long, value_parser = parse_f64_list, default_value = "1")]
        c: CList,
        /// Select C per fold instead of sweeping it.
        #[arg(long, value_parser = parse_c_grid, conflicts_with = "c")]
        c_grid: Option<CGrid>,
        #[arg(long, default_value = "block", value_parser = parse_normalization)]
        normalize: Normalization,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        cv: CvArgs,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
struct DistArgs {
    /// Number of nearest/farthest neighbors averaged.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Comma separated operators in 1..=6.
    #[arg(long, default_value = "1,2,3,4,5,6", value_parser = parse_ops)]
    ops: OpList,
    #[arg(long, default_value = "block", value_parser = parse_normalization)]
    normalize: Normalization,
}

#[derive(Debug, Args)]
struct SvmArgs {
    /// SVM cost parameter.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Stopping tolerance on the projected gradient.
    #[arg(long, default_value_t = 0.1)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_passes: usize,
    /// Constant bias feature value (0 disables the bias).
    #[arg(long, default_value_t = 1.0)]
    bias_scale: f64,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Use plain instead of stratified folds.
    #[arg(long)]
    no_stratify: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Seed for fold splits and the solver's coordinate order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone)]
struct CGrid(Vec<f64>);

#[derive(Debug, Clone)]
struct CList(Vec<f64>);

#[derive(Debug, Clone)]
struct KList(Vec<usize>);

#[derive(Debug, Clone)]
struct OpList(Vec<OperatorId>);

fn parse_ops(s: &str) -> std::result::Result<OpList, String> {
    let ops = OperatorId::parse_list(s).map_err(|e| e.to_string())?;
    if ops.is_empty() {
        return Err("operator list is empty".into());
    }
    Ok(OpList(ops))
}

fn parse_normalization(s: &str) -> std::result::Result<Normalization, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_usize_list(s: &str) -> std::result::Result<KList, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad integer `{t}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if v.contains(&0) {
        return Err("k must be at least 1".into());
    }
    Ok(KList(v))
}

fn parse_f64_list(s: &str) -> std::result::Result<CList, String> {
    positive_list(s).map(CList)
}

fn positive_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| match t.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(format!("bad positive number `{t}`")),
        })
        .collect()
}

fn parse_c_grid(s: &str) -> std::result::Result<CGrid, String> {
    if s.trim() == "auto" {
        return Ok(CGrid(default_c_grid()));
    }
    positive_list(s).map(CGrid)
}

impl DistArgs {
    fn params(&self) -> Result<DistParams> {
        DistParams::new(self.k, self.ops.0.clone())
    }
}

impl SolverArgs {
    fn config(&self, c: f64, seed: u64) -> SvmConfig {
        SvmConfig {
            c,
            tolerance: self.tol,
            max_passes: self.max_passes,
            bias_scale: self.bias_scale,
            seed,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonFinite(_) | Error::LengthMismatch { .. } | Error::Empty(_) => 1,
        _ => 2,
    }
}

/// Runs the command line with explicit output streams and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    thread_pool(threads)?.install(f)
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Featurize {
            dataset,
            refs,
            dist,
            output,
            run,
        } => {
            let params = dist.params()?;
            let ds = read_dataset_file(&dataset)?;
            let refs = if refs == "self" {
                ReferenceSet::from_dataset(&ds)
            } else {
                ReferenceSet::from_dataset(&read_dataset_file(&refs)?)
            };
            let vectors =
                with_threads(run.threads, || featurize_all_with(&ds, &refs, &params, dist.normalize))?;
            let rows: Vec<&[f64]> = vectors.iter().map(|v| v.values()).collect();
            match output {
                Some(path) => export_rows(&rows, &ds.labels(), File::create(path)?)?,
                None => export_rows(&rows, &ds.labels(), &mut *out)?,
            }
            Ok(())
        }
        Command::Train {
            dataset,
            output,
            dist,
            svm: svm_args,
            c_grid,
            run,
        } => {
            let params = dist.params()?;
            let ds = read_dataset_file(&dataset)?;
            let labels = ds.require_labels()?;
            let refs = ReferenceSet::from_dataset(&ds);
            let mut cfg = svm_args.solver.config(svm_args.c, run.seed);
            let model = with_threads(run.threads, || {
                let xs: Vec<Vec<f64>> = featurize_all_with(&ds, &refs, &params, dist.normalize)?
                    .into_iter()
                    .map(|v| v.into_values())
                    .collect();
                if let Some(CGrid(grid)) = &c_grid {
                    cfg.c = select_c(&xs, &labels, grid, &cfg, run.seed, 0)?;
                }
                svm::train(&xs, &labels, &cfg)
            })?;
            let model = model.with_featurizer(FeaturizerBinding::new(&refs, &params, dist.normalize));
            write_model_file(&model, &output)?;
            writeln!(err, "trained on {} bags, C={}, wrote {}", ds.len(), format_f64(cfg.c), output.display())?;
            Ok(())
        }
        Command::Predict {
            model,
            refs,
            dataset,
            run,
        } => {
            let model = read_model_file(&model)?;
            let refs = ReferenceSet::from_dataset(&read_dataset_file(&refs)?);
            model.check_references(&refs)?;
            let binding = model.featurizer.clone().expect("checked by check_references");
            let ds = read_dataset_file(&dataset)?;
            let vectors = with_threads(run.threads, || {
                featurize_all_with(&ds, &refs, &binding.params, binding.normalization)
            })?;
            for (bag, v) in ds.bags().iter().zip(&vectors) {
                let value = svm::decision_value(&model, v.values())?;
                let label = crate::data::BagLabel::from_sign(value);
                writeln!(out, "{} {} {}", bag.id(), label, format_f64(value))?;
            }
            Ok(())
        }
        Command::Cv {
            dataset,
            dist,
            svm: svm_args,
            cv,
            c_grid,
            records,
            run,
        } => {
            let ds = read_dataset_file(&dataset)?;
            let cfg = CvConfig {
                folds: cv.folds,
                repeats: cv.repeats,
                seed: run.seed,
                stratified: !cv.no_stratify,
                params: dist.params()?,
                normalization: dist.normalize,
                svm: svm_args.solver.config(svm_args.c, run.seed),
                c_grid: c_grid.map(|g| g.0),
            };
            let report = with_threads(run.threads, || cross_validate(&ds, None, &cfg))?;
            write!(out, "{}", report.to_text(false))?;
            write_times(err, &report)?;
            if let Some(path) = records {
                File::create(path)?.write_all(report.records_text().as_bytes())?;
            }
            Ok(())
        }
        Command::Sweep {
            dataset,
            k,
            ops,
            c,
            c_grid,
            normalize,
            solver,
            cv,
            run,
        } => {
            let k = k.0;
            if k.is_empty() {
                return Err(Error::InvalidParameter("k list is empty".into()));
            }
            let subsets = if ops.is_empty() {
                vec![OperatorId::ALL.to_vec()]
            } else {
                ops.into_iter().map(|o| o.0).collect()
            };
            let ds = read_dataset_file(&dataset)?;
            let base = CvConfig {
                folds: cv.folds,
                repeats: cv.repeats,
                seed: run.seed,
                stratified: !cv.no_stratify,
                params: DistParams::default(),
                normalization: normalize,
                svm: solver.config(1.0, run.seed),
                c_grid: c_grid.as_ref().map(|g| g.0.clone()),
            };
            let c_values: Vec<Option<f64>> = if c_grid.is_some() {
                vec![None]
            } else {
                c.0.iter().copied().map(Some).collect()
            };
            writeln!(out, "{:<4} {:<14} {:<10} accuracy", "k", "ops", "C")?;
            let pool = thread_pool(run.threads)?;
            for &kv in &k {
                let table = pool.install(|| OperatorTable::compute(&ds, kv))?;
                for subset in &subsets {
                    for cv_c in &c_values {
                        let mut cfg = base.clone();
                        cfg.params = DistParams::new(kv, subset.clone())?;
                        if let Some(cv_c) = cv_c {
                            cfg.svm.c = *cv_c;
                        }
                        let report = pool.install(|| cross_validate(&ds, Some(&table), &cfg))?;
                        let c_label = cv_c.map_or_else(|| "grid".to_string(), format_f64);
                        writeln!(
                            out,
                            "{:<4} {:<14} {:<10} {}",
                            kv,
                            cfg.params.operators_string(),
                            c_label,
                            report.summary()
                        )?;
                        write_times(err, &report)?;
                    }
                }
            }
            Ok(())
        }
    }
}

fn cross_validate(ds: &Dataset, table: Option<&OperatorTable>, cfg: &CvConfig) -> Result<CvReport> {
    match table {
        Some(t) => run_cv_with_table(ds, t, cfg),
        None => crate::eval::run_cv(ds, cfg),
    }
}

fn write_times(err: &mut dyn Write, report: &CvReport) -> Result<()> {
    let t = &report.times;
    writeln!(
        err,
        "[{} {}] distances {:.3}s, featurize {:.3}s, train {:.3}s, total {:.3}s",
        report.config.params,
        report.config.normalization,
        t.distances,
        t.featurize,
        t.train,
        t.total
    )?;
    Ok(())
}
