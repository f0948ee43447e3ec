//! Domain types and the mathematical core of the three-class model: linear
//! scores, stabilized softmax probabilities, the decision rule, and the
//! penalized negative log-likelihood with its analytic gradient.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of risk classes.
pub const NUM_CLASSES: usize = 3;

/// TdP risk category. The discriminant is the canonical index used for
/// coefficient rows and for tie-breaking (L < M < H).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskClass {
    L = 0,
    M = 1,
    H = 2,
}

impl RiskClass {
    pub const ALL: [RiskClass; NUM_CLASSES] = [RiskClass::L, RiskClass::M, RiskClass::H];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn letter(self) -> char {
        match self {
            RiskClass::L => 'L',
            RiskClass::M => 'M',
            RiskClass::H => 'H',
        }
    }
}

impl fmt::Display for RiskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for RiskClass {
    type Err = Error;

    /// Accepts the single letters as well as `low`, `intermediate`, `medium`
    /// and `high`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l" | "low" => Ok(RiskClass::L),
            "m" | "medium" | "intermediate" => Ok(RiskClass::M),
            "h" | "high" => Ok(RiskClass::H),
            _ => Err(Error::Dataset(format!("unknown risk label `{s}`"))),
        }
    }
}

/// Predictor values of one observation. Every entry is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "feature {pos} is not finite ({})",
                values[pos]
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

impl std::ops::Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One replicate measurement of one drug.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub drug_id: String,
    pub replicate: u32,
    pub features: FeatureVector,
    pub label: RiskClass,
}

/// A validated collection of observations sharing one predictor list.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Dataset("dataset has no observations".into()));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Dataset(format!("duplicate feature name `{name}`")));
            }
        }
        let p = feature_names.len();
        let mut keys = HashSet::new();
        for obs in &observations {
            if obs.features.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    actual: obs.features.len(),
                });
            }
            if obs.replicate == 0 {
                return Err(Error::Dataset(format!(
                    "drug `{}` has replicate index 0; replicates start at 1",
                    obs.drug_id
                )));
            }
            if !keys.insert((obs.drug_id.as_str(), obs.replicate)) {
                return Err(Error::Dataset(format!(
                    "duplicate observation (drug `{}`, replicate {})",
                    obs.drug_id, obs.replicate
                )));
            }
        }
        Ok(Self {
            feature_names,
            observations,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Observation count (`n`).
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Predictor count (`p`).
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels(&self) -> Vec<RiskClass> {
        self.observations.iter().map(|o| o.label).collect()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for obs in &self.observations {
            counts[obs.label.index()] += 1;
        }
        counts
    }

    /// Distinct drug ids in first-appearance order.
    pub fn drugs(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.observations
            .iter()
            .map(|o| o.drug_id.as_str())
            .filter(|d| seen.insert(*d))
            .collect()
    }

    /// Observations at `indices`, in the given order. Indices must be distinct.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let observations = indices
            .iter()
            .map(|&i| {
                self.observations
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Dataset(format!("observation index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.feature_names.clone(), observations)
    }

    /// Keeps only the named predictors, in the order given.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|name| {
                self.feature_names
                    .iter()
                    .position(|f| f == name.as_ref())
                    .ok_or_else(|| Error::Dataset(format!("unknown feature `{}`", name.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        let observations = self
            .observations
            .iter()
            .map(|o| Observation {
                features: FeatureVector(columns.iter().map(|&c| o.features[c]).collect()),
                ..o.clone()
            })
            .collect();
        Self::new(
            names.iter().map(|n| n.as_ref().to_string()).collect(),
            observations,
        )
    }

    /// Appends one predictor column.
    pub fn with_feature(&self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                actual: values.len(),
            });
        }
        let mut names = self.feature_names.clone();
        names.push(name.to_string());
        let observations = self
            .observations
            .iter()
            .zip(values)
            .map(|(o, &v)| {
                let mut features = o.features.0.clone();
                features.push(v);
                Ok(Observation {
                    features: FeatureVector::new(features)?,
                    ..o.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(names, observations)
    }

    /// Returns a copy with labels replaced.
    pub fn with_labels(&self, labels: &[RiskClass]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                actual: labels.len(),
            });
        }
        let observations = self
            .observations
            .iter()
            .zip(labels)
            .map(|(o, &label)| Observation { label, ..o.clone() })
            .collect();
        Self::new(self.feature_names.clone(), observations)
    }

    pub fn design(&self) -> Design {
        let all: Vec<usize> = (0..self.len()).collect();
        self.design_of(&all)
    }

    /// Dense design for the given rows. Repeated indices are allowed, which
    /// is how bootstrap resamples are represented.
    pub fn design_of(&self, indices: &[usize]) -> Design {
        let p = self.num_features();
        let mut x = Vec::with_capacity(indices.len() * p);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            let obs = &self.observations[i];
            x.extend_from_slice(&obs.features);
            y.push(obs.label);
        }
        Design { p, x, y }
    }
}

/// Row-major numeric design matrix with labels. Unlike [`Dataset`], rows
/// may repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    p: usize,
    x: Vec<f64>,
    y: Vec<RiskClass>,
}

impl Design {
    pub fn new(p: usize, x: Vec<f64>, y: Vec<RiskClass>) -> Result<Self> {
        if x.len() != p * y.len() {
            return Err(Error::Dimension {
                expected: p * y.len(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("design contains a non-finite value".into()));
        }
        Ok(Self { p, x, y })
    }

    pub fn num_features(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> RiskClass {
        self.y[i]
    }

    pub fn labels(&self) -> &[RiskClass] {
        &self.y
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], RiskClass)> + '_ {
        (0..self.len()).map(move |i| (self.row(i), self.y[i]))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }
}

/// Per-class intercept and slopes: row `k` is `(b0k, b1k, ..., bpk)` for the
/// class with canonical index `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CoefficientMatrix {
    p: usize,
    values: Vec<f64>,
}

impl CoefficientMatrix {
    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            values: vec![0.0; NUM_CLASSES * (p + 1)],
        }
    }

    pub fn from_rows(rows: [Vec<f64>; NUM_CLASSES]) -> Result<Self> {
        let width = rows[0].len();
        if width == 0 {
            return Err(Error::Config("coefficient rows need an intercept".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension {
                expected: width - 1,
                actual: bad.len().saturating_sub(1),
            });
        }
        let values: Vec<f64> = rows.concat();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite coefficient".into()));
        }
        Ok(Self {
            p: width - 1,
            values,
        })
    }

    /// Number of predictors (the intercept column is not counted).
    pub fn num_features(&self) -> usize {
        self.p
    }

    pub fn width(&self) -> usize {
        self.p + 1
    }

    pub fn get(&self, class: usize, column: usize) -> f64 {
        self.values[class * self.width() + column]
    }

    pub fn set(&mut self, class: usize, column: usize, value: f64) {
        let w = self.width();
        self.values[class * w + column] = value;
    }

    pub fn row(&self, class: usize) -> &[f64] {
        let w = self.width();
        &self.values[class * w..(class + 1) * w]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks(self.width())
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Flat row-major view.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_features(&self, p: usize) -> Result<()> {
        if self.p == p {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.p,
                actual: p,
            })
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for CoefficientMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows: [Vec<f64>; NUM_CLASSES] = rows.try_into().map_err(|rows: Vec<Vec<f64>>| {
            Error::Config(format!("expected 3 coefficient rows, found {}", rows.len()))
        })?;
        Self::from_rows(rows)
    }
}

impl From<CoefficientMatrix> for Vec<Vec<f64>> {
    fn from(beta: CoefficientMatrix) -> Self {
        beta.rows()
    }
}

/// Probabilities of (L, M, H). Components lie in `[0, 1]` and sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassProbabilities([f64; NUM_CLASSES]);

impl ClassProbabilities {
    const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(values: [f64; NUM_CLASSES]) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Numeric("NaN class probability".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Numeric(format!(
                "class probability outside [0, 1]: {values:?}"
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Numeric(format!(
                "class probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self(values))
    }

    pub fn get(&self, class: RiskClass) -> f64 {
        self.0[class.index()]
    }

    pub fn as_array(&self) -> [f64; NUM_CLASSES] {
        self.0
    }

    /// The decision rule: the most probable class, earliest in canonical
    /// order on ties.
    pub fn classify(&self) -> RiskClass {
        let mut best = 0;
        for k in 1..NUM_CLASSES {
            if self.0[k] > self.0[best] {
                best = k;
            }
        }
        RiskClass::ALL[best]
    }
}

/// `eta_k = b0k + sum_j bjk * x_j` for each class.
pub fn linear_scores(beta: &CoefficientMatrix, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
    beta.check_features(x.len())?;
    let scores = scores_unchecked(beta, x);
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite linear score {scores:?}"
        )));
    }
    Ok(scores)
}

#[inline]
fn scores_unchecked(beta: &CoefficientMatrix, x: &[f64]) -> [f64; NUM_CLASSES] {
    let mut scores = [0.0; NUM_CLASSES];
    for (k, score) in scores.iter_mut().enumerate() {
        let row = beta.row(k);
        *score = row[0] + row[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
    }
    scores
}

/// Softmax of three scores, shifted by the maximum before exponentiation.
pub fn softmax(scores: [f64; NUM_CLASSES]) -> Result<ClassProbabilities> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite linear score {scores:?}"
        )));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = scores.map(|s| (s - max).exp());
    let total: f64 = exps.iter().sum();
    Ok(ClassProbabilities(exps.map(|e| e / total)))
}

pub fn class_probabilities(beta: &CoefficientMatrix, x: &[f64]) -> Result<ClassProbabilities> {
    softmax(linear_scores(beta, x)?)
}

pub fn classify(probs: &ClassProbabilities) -> RiskClass {
    probs.classify()
}

/// `-ln p_y` from the scores, their maximum and the shifted exponentials.
/// Keeps full relative precision when `p_y` is close to 1.
#[inline]
fn observed_loss(scores: &[f64; NUM_CLASSES], e: &[f64; NUM_CLASSES], max: f64, y: usize) -> f64 {
    if scores[y] == max {
        let rest: f64 = (0..NUM_CLASSES).filter(|&k| k != y).map(|k| e[k]).sum();
        rest.ln_1p()
    } else {
        max - scores[y] + e.iter().sum::<f64>().ln()
    }
}

fn check_ridge(ridge: f64) -> Result<()> {
    if ridge.is_finite() && ridge >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "ridge must be a nonnegative finite number, got {ridge}"
        )))
    }
}

fn ridge_penalty(beta: &CoefficientMatrix, ridge: f64) -> f64 {
    if ridge == 0.0 {
        return 0.0;
    }
    let squares: f64 = (0..NUM_CLASSES)
        .map(|k| beta.row(k)[1..].iter().map(|b| b * b).sum::<f64>())
        .sum();
    0.5 * ridge * squares
}

/// `-sum_i ln p_{y_i}(x_i) + (ridge / 2) * sum of squared slopes`.
/// Intercepts are not penalized.
pub fn negative_log_likelihood(beta: &CoefficientMatrix, data: &Design, ridge: f64) -> Result<f64> {
    beta.check_features(data.num_features())?;
    check_ridge(ridge)?;
    let value = nll_unchecked(beta, data, ridge);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(
            "negative log-likelihood is not finite".into(),
        ))
    }
}

pub(crate) fn nll_unchecked(beta: &CoefficientMatrix, data: &Design, ridge: f64) -> f64 {
    let loss: f64 = data
        .rows()
        .map(|(x, y)| {
            let scores = scores_unchecked(beta, x);
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e = scores.map(|s| (s - max).exp());
            observed_loss(&scores, &e, max, y.index())
        })
        .sum();
    loss + ridge_penalty(beta, ridge)
}

/// Gradient of [`negative_log_likelihood`] with respect to every entry of
/// `beta`, laid out like `beta` itself.
pub fn nll_gradient(
    beta: &CoefficientMatrix,
    data: &Design,
    ridge: f64,
) -> Result<CoefficientMatrix> {
    beta.check_features(data.num_features())?;
    check_ridge(ridge)?;
    let mut grad = CoefficientMatrix::zeros(beta.num_features());
    let value = nll_and_gradient(beta, data, ridge, &mut grad);
    if value.is_finite() && grad.is_finite() {
        Ok(grad)
    } else {
        Err(Error::Numeric("gradient is not finite".into()))
    }
}

/// Value and gradient in one pass over the data. `grad` is overwritten.
pub(crate) fn nll_and_gradient(
    beta: &CoefficientMatrix,
    data: &Design,
    ridge: f64,
    grad: &mut CoefficientMatrix,
) -> f64 {
    let width = beta.width();
    let (b_l, rest) = beta.as_slice().split_at(width);
    let (b_m, b_h) = rest.split_at(width);
    let g = grad.as_mut_slice();
    g.fill(0.0);
    let (g_l, rest) = g.split_at_mut(width);
    let (g_m, g_h) = rest.split_at_mut(width);
    let mut loss = 0.0;
    for (x, y) in data.rows() {
        let (mut s_l, mut s_m, mut s_h) = (b_l[0], b_m[0], b_h[0]);
        for j in 0..x.len() {
            let v = x[j];
            s_l += b_l[j + 1] * v;
            s_m += b_m[j + 1] * v;
            s_h += b_h[j + 1] * v;
        }
        let max = s_l.max(s_m).max(s_h);
        let (e_l, e_m, e_h) = ((s_l - max).exp(), (s_m - max).exp(), (s_h - max).exp());
        let total = e_l + e_m + e_h;
        loss += observed_loss(&[s_l, s_m, s_h], &[e_l, e_m, e_h], max, y.index());
        let inv = 1.0 / total;
        let mut r = [e_l * inv, e_m * inv, e_h * inv];
        r[y.index()] -= 1.0;
        g_l[0] += r[0];
        g_m[0] += r[1];
        g_h[0] += r[2];
        for j in 0..x.len() {
            let v = x[j];
            g_l[j + 1] += r[0] * v;
            g_m[j + 1] += r[1] * v;
            g_h[j + 1] += r[2] * v;
        }
    }
    if ridge != 0.0 {
        for (gk, bk) in [(g_l, b_l), (g_m, b_m), (g_h, b_h)] {
            for j in 1..width {
                gk[j] += ridge * bk[j];
            }
        }
    }
    loss + ridge_penalty(beta, ridge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn design(p: usize, rows: &[(&[f64], RiskClass)]) -> Design {
        Design::new(
            p,
            rows.iter().flat_map(|(x, _)| x.iter().copied()).collect(),
            rows.iter().map(|(_, y)| *y).collect(),
        )
        .unwrap()
    }

    #[test]
    fn risk_class_round_trips() {
        for class in RiskClass::ALL {
            assert_eq!(RiskClass::from_index(class.index()), Some(class));
            assert_eq!(
                class.letter().to_string().parse::<RiskClass>().unwrap(),
                class
            );
        }
        assert_eq!(RiskClass::from_index(3), None);
        assert_eq!("Intermediate".parse::<RiskClass>().unwrap(), RiskClass::M);
        assert_eq!("medium".parse::<RiskClass>().unwrap(), RiskClass::M);
        assert_eq!("HIGH".parse::<RiskClass>().unwrap(), RiskClass::H);
        assert_eq!("Low".parse::<RiskClass>().unwrap(), RiskClass::L);
        assert!("moderate".parse::<RiskClass>().is_err());
    }

    #[test]
    fn zero_beta_gives_zero_scores() {
        let beta = CoefficientMatrix::zeros(3);
        assert_eq!(linear_scores(&beta, &[1.0, -4.0, 9.0]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn intercept_only_scores() {
        let beta = CoefficientMatrix::from_rows([vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(linear_scores(&beta, &[]).unwrap(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_predictor_score() {
        let beta = CoefficientMatrix::from_rows([
            vec![0.5, 1.0, -1.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert_eq!(linear_scores(&beta, &[2.0, 3.0]).unwrap()[0], -0.5);
    }

    #[test]
    fn dimension_mismatch_names_both_sizes() {
        let beta = CoefficientMatrix::zeros(2);
        let err = linear_scores(&beta, &[1.0]).unwrap_err();
        assert_eq!(
            err,
            Error::Dimension {
                expected: 2,
                actual: 1
            }
        );
        assert!(err.to_string().contains("expected 2"));
    }

    #[test]
    fn uniform_and_intercept_probabilities() {
        let p = class_probabilities(&CoefficientMatrix::zeros(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        for v in p.as_array() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }

        let beta = CoefficientMatrix::from_rows([vec![2f64.ln()], vec![0.0], vec![0.0]]).unwrap();
        let p = class_probabilities(&beta, &[]).unwrap().as_array();
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(p[2], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn huge_scores_do_not_overflow() {
        let p = softmax([1000.0, 999.0, -1000.0]).unwrap().as_array();
        assert!(p.iter().all(|v| v.is_finite()));
        assert_relative_eq!(p[0], 1.0 / (1.0 + (-1f64).exp()), epsilon = 1e-15);
        assert!(softmax([f64::INFINITY, 0.0, 0.0]).is_err());
        assert!(softmax([f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn classify_unique_max_and_ties() {
        let p = ClassProbabilities::new([0.5, 0.3, 0.2]).unwrap();
        assert_eq!(classify(&p), RiskClass::L);
        let third = 1.0 / 3.0;
        let p = ClassProbabilities::new([third, third, third]).unwrap();
        assert_eq!(classify(&p), RiskClass::L);
        let p = ClassProbabilities::new([0.2, 0.4, 0.4]).unwrap();
        assert_eq!(classify(&p), RiskClass::M);
        let p = ClassProbabilities::new([0.1, 0.2, 0.7]).unwrap();
        assert_eq!(classify(&p), RiskClass::H);
    }

    #[test]
    fn nan_probabilities_are_rejected() {
        assert!(matches!(
            ClassProbabilities::new([f64::NAN, 0.5, 0.5]),
            Err(Error::Numeric(_))
        ));
        assert!(ClassProbabilities::new([0.5, 0.5, 0.5]).is_err());
        assert!(ClassProbabilities::new([1.5, -0.5, 0.0]).is_err());
    }

    #[test]
    fn nll_at_zero_is_n_ln3() {
        let d = design(
            1,
            &[
                (&[0.3], RiskClass::L),
                (&[-1.0], RiskClass::M),
                (&[2.0], RiskClass::M),
                (&[5.0], RiskClass::H),
            ],
        );
        let beta = CoefficientMatrix::zeros(1);
        let expected = 4.0 * 3f64.ln();
        assert_relative_eq!(
            negative_log_likelihood(&beta, &d, 0.0).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            negative_log_likelihood(&beta, &d, 0.7).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gradient_at_zero_intercepts() {
        let d = design(
            1,
            &[
                (&[0.3], RiskClass::L),
                (&[-1.0], RiskClass::M),
                (&[2.0], RiskClass::M),
                (&[5.0], RiskClass::H),
                (&[1.0], RiskClass::M),
            ],
        );
        let g = nll_gradient(&CoefficientMatrix::zeros(1), &d, 0.1).unwrap();
        let n = 5.0;
        assert_relative_eq!(g.get(0, 0), n / 3.0 - 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.get(1, 0), n / 3.0 - 3.0, epsilon = 1e-12);
        assert_relative_eq!(g.get(2, 0), n / 3.0 - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ridge_skips_intercepts() {
        let d = design(1, &[(&[0.0], RiskClass::L)]);
        let beta =
            CoefficientMatrix::from_rows([vec![5.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let with = negative_log_likelihood(&beta, &d, 2.0).unwrap();
        let without = negative_log_likelihood(&beta, &d, 0.0).unwrap();
        assert_relative_eq!(with - without, 1.0, epsilon = 1e-12);
        assert!(negative_log_likelihood(&beta, &d, -1.0).is_err());
    }

    #[test]
    fn dataset_rejects_duplicates_and_ragged_rows() {
        let obs = |drug: &str, rep, v: Vec<f64>| Observation {
            drug_id: drug.into(),
            replicate: rep,
            features: FeatureVector::new(v).unwrap(),
            label: RiskClass::L,
        };
        let names = vec!["a".to_string()];
        assert!(Dataset::new(
            names.clone(),
            vec![obs("d", 1, vec![1.0]), obs("d", 1, vec![2.0])]
        )
        .is_err());
        assert!(Dataset::new(names.clone(), vec![obs("d", 1, vec![1.0, 2.0])]).is_err());
        assert!(Dataset::new(names.clone(), vec![]).is_err());
        assert!(Dataset::new(
            vec!["a".into(), "a".into()],
            vec![obs("d", 1, vec![1.0, 2.0])]
        )
        .is_err());
        assert!(FeatureVector::new(vec![f64::NAN]).is_err());
        let ok = Dataset::new(names, vec![obs("d", 1, vec![1.0]), obs("d", 2, vec![2.0])]).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok.drugs(), vec!["d"]);
    }

    #[test]
    fn coefficient_matrix_serializes_row_major() {
        let beta =
            CoefficientMatrix::from_rows([vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.5]]).unwrap();
        let json = serde_json::to_string(&beta).unwrap();
        assert_eq!(json, "[[1.0,2.0],[3.0,4.0],[5.0,6.5]]");
        let back: CoefficientMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, beta);
        assert!(serde_json::from_str::<CoefficientMatrix>("[[1.0],[2.0]]").is_err());
    }
}
