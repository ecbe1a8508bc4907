//! Linear SVM trained by dual coordinate descent.
//!
//! Solves the L2-regularized hinge-loss problem
//!
//! ```text
//! min_w  1/2 |w|^2 + C * sum_i max(0, 1 - y_i w.x_i)
//! ```
//!
//! through its dual `max_a sum_i a_i - 1/2 |sum_i a_i y_i x_i|^2` with
//! `0 <= a_i <= C`, one coordinate at a time. The bias is an extra constant
//! feature of value `bias_scale`, so it is regularized like any other weight.
//! Coordinates are visited in a fresh random order every pass, and
//! coordinates stuck at a bound are temporarily shrunk out of the active set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::brv::{FeaturizerBinding, ReferenceSet};
use crate::data::BagLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// Cost of margin violations.
    pub c: f64,
    /// Stopping threshold on the spread of projected gradients.
    pub tolerance: f64,
    pub max_passes: usize,
    /// Value of the appended constant feature; 0 disables the bias.
    pub bias_scale: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            tolerance: 0.1,
            max_passes: 1000,
            bias_scale: 1.0,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidParameter("max_passes must be at least 1".into()));
        }
        if !(self.bias_scale >= 0.0 && self.bias_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bias_scale must be finite and non-negative, got {}",
                self.bias_scale
            )));
        }
        Ok(())
    }

    pub fn with_c(&self, c: f64) -> Self {
        SvmConfig { c, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub bias_scale: f64,
    /// Featurizer the weights were trained against, if any.
    pub featurizer: Option<FeaturizerBinding>,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn with_featurizer(mut self, binding: FeaturizerBinding) -> Self {
        self.featurizer = Some(binding);
        self
    }

    /// Fails unless the model was trained against exactly `refs`.
    pub fn check_references(&self, refs: &ReferenceSet) -> Result<()> {
        match &self.featurizer {
            Some(b) if b.ref_fingerprint == refs.fingerprint() => Ok(()),
            Some(b) => Err(Error::FingerprintMismatch {
                expected: b.ref_fingerprint.to_string(),
                found: refs.fingerprint().to_string(),
            }),
            None => Err(Error::FingerprintMismatch {
                expected: "<none>".into(),
                found: refs.fingerprint().to_string(),
            }),
        }
    }
}

/// Training result with solver diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearModel,
    /// Final dual variables, one per training example.
    pub alpha: Vec<f64>,
    pub passes: usize,
    pub converged: bool,
    /// Largest projected-gradient spread seen in the last pass.
    pub violation: f64,
    /// Dual objective after each pass.
    pub dual_objective: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_inputs<X: AsRef<[f64]>>(features: &[X], labels: &[BagLabel]) -> Result<usize> {
    let first = features
        .first()
        .ok_or_else(|| Error::Empty("training features".into()))?;
    let dim = first.as_ref().len();
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    for (i, x) in features.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != dim {
            return Err(Error::dim(format!("training example {i}"), dim, x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("training example {i}")));
        }
    }
    let positives = labels.iter().filter(|&&l| l == BagLabel::Positive).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(dim)
}

pub fn train<X: AsRef<[f64]>>(features: &[X], labels: &[BagLabel], cfg: &SvmConfig) -> Result<LinearModel> {
    train_detailed(features, labels, cfg).map(|o| o.model)
}

pub fn train_detailed<X: AsRef<[f64]>>(
    features: &[X],
    labels: &[BagLabel],
    cfg: &SvmConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dim = check_inputs(features, labels)?;
    let l = features.len();
    let c = cfg.c;
    let s = cfg.bias_scale;
    let x: Vec<&[f64]> = features.iter().map(AsRef::as_ref).collect();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();

    let mut w = vec![0.0; dim];
    let mut wb = 0.0;
    let mut alpha = vec![0.0; l];
    let diag: Vec<f64> = x.iter().map(|xi| dot(xi, xi) + s * s).collect();

    let mut index: Vec<usize> = (0..l).collect();
    let mut active = l;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut passes = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;
    let mut history: Vec<f64> = Vec::new();

    while passes < cfg.max_passes {
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        index[..active].shuffle(&mut rng);

        let mut pos = 0;
        while pos < active {
            let i = index[pos];
            let g = y[i] * (dot(&w, x[i]) + wb * s) - 1.0;

            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(pos, active);
                    continue;
                } else if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == c {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(pos, active);
                    continue;
                } else if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);

            if pg.abs() > 1e-12 {
                let old = alpha[i];
                // A zero row has a constant gradient of -1: its bound is C.
                alpha[i] = if diag[i] > 0.0 {
                    (old - g / diag[i]).clamp(0.0, c)
                } else {
                    c
                };
                let d = (alpha[i] - old) * y[i];
                axpy(d, x[i], &mut w);
                wb += d * s;
            }
            pos += 1;
        }
        passes += 1;

        let objective = alpha.iter().sum::<f64>() - 0.5 * (dot(&w, &w) + wb * wb);
        if let Some(&prev) = history.last() {
            debug_assert!(
                objective >= prev - 1e-9 * prev.abs().max(1.0),
                "dual objective decreased: {prev} -> {objective}"
            );
        }
        history.push(objective);

        violation = if pg_max.is_finite() && pg_min.is_finite() {
            pg_max - pg_min
        } else {
            0.0
        };
        if violation <= cfg.tolerance {
            if active == l {
                converged = true;
                break;
            }
            // Re-check every coordinate before declaring convergence.
            active = l;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        pg_min_old = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
    }

    let model = LinearModel {
        weights: w,
        bias: if s > 0.0 { wb } else { 0.0 },
        bias_scale: s,
        featurizer: None,
    };
    if model.weights.iter().any(|v| !v.is_finite()) || !model.bias.is_finite() {
        return Err(Error::NonFinite("trained weights".into()));
    }
    Ok(TrainOutcome {
        model,
        alpha,
        passes,
        converged,
        violation,
        dual_objective: history,
    })
}

/// `w.x + bias * bias_scale`.
pub fn decision_value(model: &LinearModel, feature: &[f64]) -> Result<f64> {
    if feature.len() != model.weights.len() {
        return Err(Error::dim("prediction", model.weights.len(), feature.len()));
    }
    Ok(dot(&model.weights, feature) + model.bias * model.bias_scale)
}

/// Sign of the decision value; zero maps to the positive class.
pub fn predict(model: &LinearModel, feature: &[f64]) -> Result<BagLabel> {
    decision_value(model, feature).map(BagLabel::from_sign)
}

/// `1/2 (|w|^2 + bias^2) + C * sum of hinge losses`, the quantity training
/// minimizes.
pub fn primal_objective<X: AsRef<[f64]>>(
    model: &LinearModel,
    features: &[X],
    labels: &[BagLabel],
    c: f64,
) -> Result<f64> {
    let mut loss = 0.0;
    for (x, l) in features.iter().zip(labels) {
        let margin = l.sign() * decision_value(model, x.as_ref())?;
        loss += (1.0 - margin).max(0.0);
    }
    let reg = dot(&model.weights, &model.weights) + model.bias * model.bias;
    Ok(0.5 * reg + c * loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BagLabel::{Negative as N, Positive as P};

    fn tight() -> SvmConfig {
        SvmConfig {
            tolerance: 1e-8,
            max_passes: 100_000,
            ..SvmConfig::default()
        }
    }

    #[test]
    fn symmetric_two_point_problem() {
        let xs = vec![vec![-1.0], vec![1.0]];
        let ys = [N, P];
        let cfg = SvmConfig {
            c: 10.0,
            bias_scale: 0.0,
            ..tight()
        };
        let out = train_detailed(&xs, &ys, &cfg).unwrap();
        assert!(out.converged);
        let w = out.model.weights[0];
        assert!(w > 0.0);
        assert!((w - 1.0).abs() < 1e-6, "w = {w}");
        // analytic optimum: 1/2 * 1^2 with no hinge loss
        let obj = primal_objective(&out.model, &xs, &ys, cfg.c).unwrap();
        assert!((obj - 0.5).abs() < 1e-6);
        assert_eq!(predict(&out.model, &[-1.0]).unwrap(), N);
        assert_eq!(predict(&out.model, &[1.0]).unwrap(), P);
    }

    #[test]
    fn predict_and_decision_examples() {
        let m = LinearModel {
            weights: vec![1.0, 0.0],
            bias: 0.0,
            bias_scale: 1.0,
            featurizer: None,
        };
        assert_eq!(predict(&m, &[2.0, 5.0]).unwrap(), P);
        assert_eq!(predict(&m, &[-1.0, 9.0]).unwrap(), N);
        assert_eq!(predict(&m, &[0.0, 3.0]).unwrap(), P);
        assert!(predict(&m, &[1.0]).is_err());

        let m = LinearModel {
            weights: vec![1.0, 1.0],
            bias: 5.0,
            bias_scale: 0.0,
            featurizer: None,
        };
        assert_eq!(decision_value(&m, &[1.0, 2.0]).unwrap(), 3.0);
        let m = LinearModel { bias: -0.25, bias_scale: 2.0, ..m };
        assert_eq!(decision_value(&m, &[0.0, 0.0]).unwrap(), -0.5);
    }

    #[test]
    fn input_errors() {
        let cfg = SvmConfig::default();
        let none: Vec<Vec<f64>> = vec![];
        assert!(matches!(train(&none, &[], &cfg), Err(Error::Empty(_))));
        assert!(matches!(
            train(&[vec![1.0], vec![2.0]], &[P, P], &cfg),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            train(&[vec![1.0], vec![2.0, 1.0]], &[P, N], &cfg),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            train(&[vec![1.0], vec![f64::NAN]], &[P, N], &cfg),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            train(&[vec![1.0]], &[P, N], &cfg),
            Err(Error::LengthMismatch { .. })
        ));
        let bad = SvmConfig { c: 0.0, ..cfg.clone() };
        assert!(matches!(train(&[vec![1.0], vec![2.0]], &[P, N], &bad), Err(Error::InvalidParameter(_))));
        let bad = SvmConfig { max_passes: 0, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_vectors_without_bias_go_to_the_bound() {
        let xs = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]];
        let ys = [P, P, N];
        let cfg = SvmConfig { bias_scale: 0.0, ..tight() };
        let out = train_detailed(&xs, &ys, &cfg).unwrap();
        assert_eq!(out.alpha[0], cfg.c);
        assert!(out.converged);
    }

    #[test]
    fn dual_objective_is_nondecreasing() {
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()])
            .collect();
        let ys: Vec<BagLabel> = (0..20).map(|i| if i % 3 == 0 { P } else { N }).collect();
        let out = train_detailed(&xs, &ys, &tight()).unwrap();
        for pair in out.dual_objective.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
    }

    #[test]
    fn model_without_binding_fails_reference_check() {
        let refs = ReferenceSet::new(vec![crate::data::Bag::from_rows("r", vec![vec![0.0]], None)]).unwrap();
        let m = LinearModel {
            weights: vec![1.0],
            bias: 0.0,
            bias_scale: 1.0,
            featurizer: None,
        };
        assert!(matches!(m.check_references(&refs), Err(Error::FingerprintMismatch { .. })));
    }
}
