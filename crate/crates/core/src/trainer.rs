//! Maximum-likelihood fitting of the coefficient matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    class_probabilities, nll_and_gradient, ClassProbabilities, CoefficientMatrix, Dataset, Design,
    RiskClass, NUM_CLASSES,
};

/// Sufficient-decrease constant of the Armijo condition.
const ARMIJO: f64 = 1e-4;
/// Step sizes below this cannot move any coordinate of a sane iterate.
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub ridge: f64,
    /// Stop once the gradient max-norm falls to this value.
    pub grad_tolerance: f64,
    pub max_iterations: usize,
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ridge: 1e-4,
            grad_tolerance: 1e-8,
            max_iterations: 10_000,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::Config(format!(
                "ridge must be nonnegative, got {}",
                self.ridge
            )));
        }
        if !(self.grad_tolerance.is_finite() && self.grad_tolerance > 0.0) {
            return Err(Error::Config(format!(
                "grad_tolerance must be positive, got {}",
                self.grad_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// A fitted classifier. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub beta: CoefficientMatrix,
    pub feature_names: Vec<String>,
    /// `(mean, standard deviation)` per feature, from the training data.
    pub standardization: Option<Vec<(f64, f64)>>,
    pub converged: bool,
    pub iterations: usize,
    pub final_nll: f64,
    /// Indices of training features with zero spread; their standard
    /// deviation was replaced by 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constant_features: Vec<usize>,
}

impl FittedModel {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Applies the stored standardization, if any.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features() {
            return Err(Error::Dimension {
                expected: self.num_features(),
                actual: x.len(),
            });
        }
        Ok(match &self.standardization {
            Some(stats) => x
                .iter()
                .zip(stats)
                .map(|(v, (mean, sd))| (v - mean) / sd)
                .collect(),
            None => x.to_vec(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<(ClassProbabilities, RiskClass)> {
        let z = self.transform(x)?;
        let probs = class_probabilities(&self.beta, &z)?;
        Ok((probs, probs.classify()))
    }

    /// Validates a model read from disk.
    pub fn check(&self) -> Result<()> {
        if self.beta.num_features() != self.num_features() {
            return Err(Error::Dimension {
                expected: self.num_features(),
                actual: self.beta.num_features(),
            });
        }
        if let Some(stats) = &self.standardization {
            if stats.len() != self.num_features() {
                return Err(Error::Dimension {
                    expected: self.num_features(),
                    actual: stats.len(),
                });
            }
            if stats
                .iter()
                .any(|(m, sd)| !m.is_finite() || !sd.is_finite() || *sd <= 0.0)
            {
                return Err(Error::Config(
                    "standardization needs finite means and positive deviations".into(),
                ));
            }
        }
        Ok(())
    }
}

pub fn predict(model: &FittedModel, x: &[f64]) -> Result<(ClassProbabilities, RiskClass)> {
    model.predict(x)
}

pub fn fit(data: &Dataset, config: &TrainConfig) -> Result<FittedModel> {
    fit_design(&data.design(), data.feature_names().to_vec(), config)
}

/// Fits on a design whose rows may repeat (bootstrap resamples).
pub fn fit_design(
    design: &Design,
    feature_names: Vec<String>,
    config: &TrainConfig,
) -> Result<FittedModel> {
    fit_impl(design, feature_names, config, None)
}

/// Like [`fit`], also returning the objective value after every accepted
/// iteration (starting with the value at zero).
pub fn fit_with_history(data: &Dataset, config: &TrainConfig) -> Result<(FittedModel, Vec<f64>)> {
    let mut history = Vec::new();
    let model = fit_impl(
        &data.design(),
        data.feature_names().to_vec(),
        config,
        Some(&mut history),
    )?;
    Ok((model, history))
}

fn fit_impl(
    design: &Design,
    feature_names: Vec<String>,
    config: &TrainConfig,
    history: Option<&mut Vec<f64>>,
) -> Result<FittedModel> {
    config.validate()?;
    if design.num_features() != feature_names.len() {
        return Err(Error::Dimension {
            expected: feature_names.len(),
            actual: design.num_features(),
        });
    }
    if design.is_empty() {
        return Err(Error::Dataset("cannot fit on zero observations".into()));
    }
    let mut counts = [0usize; NUM_CLASSES];
    for y in design.labels() {
        counts[y.index()] += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass(RiskClass::ALL[k]));
    }

    let mut constant_features = Vec::new();
    let (work, standardization) = if config.standardize {
        let stats = column_stats(design, &mut constant_features);
        let mut scaled = design.clone();
        let p = design.num_features();
        for (i, v) in scaled.values_mut().iter_mut().enumerate() {
            let (mean, sd) = stats[i % p];
            *v = (*v - mean) / sd;
        }
        (scaled, Some(stats))
    } else {
        (design.clone(), None)
    };

    let outcome = minimize(&work, config, history);
    if !outcome.beta.is_finite() || !outcome.nll.is_finite() {
        return Err(Error::Numeric("optimizer diverged".into()));
    }
    Ok(FittedModel {
        beta: outcome.beta,
        feature_names,
        standardization,
        converged: outcome.converged,
        iterations: outcome.iterations,
        final_nll: outcome.nll,
        constant_features,
    })
}

/// Sample mean and standard deviation per column. Constant columns get a
/// deviation of 1 and are recorded in `constant`.
fn column_stats(design: &Design, constant: &mut Vec<usize>) -> Vec<(f64, f64)> {
    let n = design.len();
    let p = design.num_features();
    (0..p)
        .map(|j| {
            let first = design.row(0)[j];
            let mean = design.rows().map(|(x, _)| x[j]).sum::<f64>() / n as f64;
            let all_equal = design.rows().all(|(x, _)| x[j] == first);
            let var = if n > 1 {
                design
                    .rows()
                    .map(|(x, _)| (x[j] - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1) as f64
            } else {
                0.0
            };
            let sd = var.sqrt();
            if all_equal || sd.is_nan() || sd <= 1e-12 * mean.abs().max(1.0) {
                constant.push(j);
                (mean, 1.0)
            } else {
                (mean, sd)
            }
        })
        .collect()
}

struct Outcome {
    beta: CoefficientMatrix,
    nll: f64,
    converged: bool,
    iterations: usize,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Relative slack in objective comparisons. Decreases smaller than this are
/// treated as rounding noise.
fn resolution(f: f64) -> f64 {
    1e-12 * f.abs()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Monotone accelerated gradient descent from zero with a halving
/// backtracking line search.
///
/// Each iteration takes a gradient step from an extrapolated point `y`. The
/// step starts at twice the previous one when that was accepted on its
/// first trial (1.0 initially) and is halved until the Armijo condition
/// holds. Where the objective cannot resolve the decrease, the quadratic
/// form of that condition is checked on the directional derivative instead
/// (approximate Wolfe).
///
/// The candidate replaces the iterate only if its objective does not exceed
/// the best value so far by more than [`resolution`]; a rejected candidate
/// still steers the next extrapolation. Momentum restarts when the step
/// opposes the last move, or when the step was accepted only through the
/// approximate condition.
fn minimize(design: &Design, config: &TrainConfig, mut history: Option<&mut Vec<f64>>) -> Outcome {
    let p = design.num_features();
    let ridge = config.ridge;
    let tol = config.grad_tolerance;

    let mut x = CoefficientMatrix::zeros(p);
    let mut gx = CoefficientMatrix::zeros(p);
    let mut fx = nll_and_gradient(&x, design, ridge, &mut gx);
    let mut best = fx;
    if let Some(h) = history.as_deref_mut() {
        h.push(fx);
    }
    let mut x_prev = x.clone();
    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut fy = fx;
    let mut z = x.clone();
    let mut gz = gx.clone();

    let mut momentum = 1.0_f64;
    let mut step = 1.0;
    let mut grow = false;
    let mut iterations = 0;
    let mut converged = max_norm(gx.as_slice()) <= tol;

    while !converged && iterations < config.max_iterations {
        let g2 = dot(gy.as_slice(), gy.as_slice());
        if grow {
            step *= 2.0;
        }
        let mut fz;
        let mut trials = 0;
        let exact = loop {
            trials += 1;
            for ((zi, yi), gi) in z
                .as_mut_slice()
                .iter_mut()
                .zip(y.as_slice())
                .zip(gy.as_slice())
            {
                *zi = yi - step * gi;
            }
            fz = nll_and_gradient(&z, design, ridge, &mut gz);
            let armijo = fz <= fy - ARMIJO * step * g2 && fy - fz > resolution(fy);
            if armijo {
                break Some(true);
            }
            let approximate = fz <= fy + resolution(fy)
                && dot(gy.as_slice(), gz.as_slice()) >= -(1.0 - 2.0 * ARMIJO) * g2;
            if approximate {
                break Some(false);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        grow = trials == 1;
        let Some(exact) = exact else {
            if momentum > 1.0 {
                momentum = 1.0;
                y.clone_from(&x);
                gy.clone_from(&gx);
                fy = fx;
                continue;
            }
            // A plain gradient step cannot decrease the objective further.
            break;
        };
        iterations += 1;

        let opposed = gy
            .as_slice()
            .iter()
            .zip(z.as_slice().iter().zip(x.as_slice()))
            .map(|(g, (a, b))| g * (a - b))
            .sum::<f64>()
            > 0.0;
        let (toward, along) = if opposed || !exact {
            momentum = 1.0;
            (0.0, 0.0)
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let coefficients = (momentum / next, (momentum - 1.0) / next);
            momentum = next;
            coefficients
        };

        let accepted = fz <= best + resolution(best);
        if accepted {
            std::mem::swap(&mut x_prev, &mut x);
            std::mem::swap(&mut x, &mut z);
            std::mem::swap(&mut gx, &mut gz);
            fx = fz;
            best = best.min(fz);
            converged = max_norm(gx.as_slice()) <= tol;
        }
        if let Some(h) = history.as_deref_mut() {
            h.push(fx);
        }
        if converged {
            break;
        }

        if toward == 0.0 && along == 0.0 {
            y.clone_from(&x);
            gy.clone_from(&gx);
            fy = fx;
        } else {
            // Accepted: y = x + along (x - x_prev). Rejected: y = x + toward (z - x).
            let (coef, from) = if accepted {
                (along, &x_prev)
            } else {
                (toward, &z)
            };
            for ((yi, xi), fi) in y
                .as_mut_slice()
                .iter_mut()
                .zip(x.as_slice())
                .zip(from.as_slice())
            {
                *yi = if accepted {
                    xi + coef * (xi - fi)
                } else {
                    xi + coef * (fi - xi)
                };
            }
            fy = nll_and_gradient(&y, design, ridge, &mut gy);
        }
    }

    Outcome {
        beta: x,
        nll: fx,
        converged,
        iterations,
    }
}
