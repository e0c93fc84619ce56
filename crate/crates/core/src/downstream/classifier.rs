use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierLoss {
    /// Multinomial logistic regression.
    Logistic,
    /// One-vs-rest linear SVM.
    Hinge,
}

impl std::str::FromStr for ClassifierLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ClassifierLoss::Logistic),
            "hinge" => Ok(ClassifierLoss::Hinge),
            _ => Err(Error::invalid(format!("unknown classifier loss `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub loss: ClassifierLoss,
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            loss: ClassifierLoss::Logistic,
            l2: 1e-4,
            learning_rate: 0.1,
            epochs: 1000,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::invalid("l2 must be finite and non-negative"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid("classifier learning_rate must be finite and non-negative"));
        }
        Ok(())
    }
}

/// `C×d` weights and `C` biases; the bias is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub loss: ClassifierLoss,
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub l2: f64,
}

impl LinearClassifier {
    pub fn zeros(loss: ClassifierLoss, n_classes: usize, dim: usize, l2: f64) -> Self {
        LinearClassifier {
            loss,
            weights: Matrix::zeros(n_classes, dim),
            bias: vec![0.0; n_classes],
            l2,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    /// Argmax of the decision values, ties to the lowest class.
    pub fn predict(&self, x: &[f64]) -> usize {
        let s = self.decision(x);
        (0..s.len()).fold(0, |best, k| if s[k] > s[best] { k } else { best })
    }

    pub fn predict_rows(&self, x: &Matrix) -> Vec<usize> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    /// Softmax probability of `class`.
    pub fn probability(&self, x: &[f64], class: usize) -> f64 {
        let s = self.decision(x);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = s.iter().map(|v| (v - max).exp()).sum();
        (s[class] - max).exp() / sum
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Mean data loss plus `l2/2·‖W‖²`, and its (sub)gradient with respect to
/// the weights and biases.
pub fn classifier_objective(model: &LinearClassifier, x: &Matrix, y: &[usize]) -> Result<(f64, Matrix, Vec<f64>)> {
    if x.rows() != y.len() {
        return Err(Error::shape(format!("{} rows vs {} labels", x.rows(), y.len())));
    }
    if x.cols() != model.weights.cols() {
        return Err(Error::shape(format!(
            "{}-dim features for a {}-dim classifier",
            x.cols(),
            model.weights.cols()
        )));
    }
    let n = y.len().max(1) as f64;
    let c = model.n_classes();
    let mut gw = Matrix::zeros(c, x.cols());
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    let mut coef = vec![0.0; c];
    for (row, &label) in x.iter_rows().zip(y) {
        if label >= c {
            return Err(Error::shape(format!("label {label} of {c} classes")));
        }
        let s = model.decision(row);
        match model.loss {
            ClassifierLoss::Logistic => {
                let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = s.iter().map(|v| (v - max).exp()).sum();
                loss += max + sum.ln() - s[label];
                for k in 0..c {
                    coef[k] = (s[k] - max).exp() / sum;
                }
                coef[label] -= 1.0;
            }
            ClassifierLoss::Hinge => {
                for k in 0..c {
                    let sign = if k == label { 1.0 } else { -1.0 };
                    let margin = 1.0 - sign * s[k];
                    coef[k] = if margin > 0.0 {
                        loss += margin;
                        -sign
                    } else {
                        0.0
                    };
                }
            }
        }
        for k in 0..c {
            if coef[k] != 0.0 {
                for (g, v) in gw.row_mut(k).iter_mut().zip(row) {
                    *g += coef[k] * v / n;
                }
                gb[k] += coef[k] / n;
            }
        }
    }
    let penalty = 0.5 * model.l2 * model.weights.squared_norm();
    for (g, w) in gw.data_mut().iter_mut().zip(model.weights.data()) {
        *g += model.l2 * w;
    }
    Ok((loss / n + penalty, gw, gb))
}

/// Full-batch gradient descent from zero weights. The L2 term is applied as
/// a proximal step `W ← W / (1 + η·λ)`, which stays stable for any λ.
pub fn train_classifier(x: &Matrix, y: &[usize], cfg: &ClassifierConfig) -> Result<LinearClassifier> {
    cfg.validate()?;
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let distinct = {
        let mut seen = vec![false; n_classes];
        y.iter().for_each(|&c| seen[c] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::invalid("classifier needs at least two classes in training labels"));
    }
    let mut model = LinearClassifier::zeros(cfg.loss, n_classes, x.cols(), 0.0);
    let lr = cfg.learning_rate;
    let shrink = 1.0 / (1.0 + lr * cfg.l2);
    for _ in 0..cfg.epochs {
        let (_, gw, gb) = classifier_objective(&model, x, y)?;
        for (w, g) in model.weights.data_mut().iter_mut().zip(gw.data()) {
            *w = (*w - lr * g) * shrink;
        }
        for (b, g) in model.bias.iter_mut().zip(&gb) {
            *b -= lr * g;
        }
        if !model.is_finite() {
            return Err(Error::NonFinite {
                epoch: 0,
                batch: 0,
                learning_rate: lr,
            });
        }
    }
    model.l2 = cfg.l2;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (Matrix, Vec<usize>) {
        (Matrix::from_vec(4, 1, vec![-1.0, -1.2, 1.0, 0.8]), vec![0, 0, 1, 1])
    }

    #[test]
    fn separable_line() {
        let (x, y) = line();
        for loss in [ClassifierLoss::Logistic, ClassifierLoss::Hinge] {
            let cfg = ClassifierConfig {
                loss,
                ..ClassifierConfig::default()
            };
            let m = train_classifier(&x, &y, &cfg).unwrap();
            assert_eq!(m.predict_rows(&x), y);
        }
    }

    #[test]
    fn huge_penalty_predicts_prior() {
        let x = Matrix::from_vec(5, 1, vec![-1.0, -2.0, 1.0, 2.0, 3.0]);
        let y = vec![0, 0, 1, 1, 1];
        let cfg = ClassifierConfig {
            l2: 1e6,
            ..ClassifierConfig::default()
        };
        let m = train_classifier(&x, &y, &cfg).unwrap();
        assert!(m.weights.data().iter().all(|w| w.abs() < 1e-5));
        assert_eq!(m.predict_rows(&x), vec![1; 5]);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_vec(2, 1, vec![1.0, 2.0]);
        assert!(train_classifier(&x, &[1, 1], &ClassifierConfig::default()).is_err());
    }

    #[test]
    fn logistic_gradient_matches_finite_difference() {
        let x = Matrix::from_vec(5, 2, vec![0.3, -1.0, 1.2, 0.4, -0.7, 0.9, 0.1, 0.1, 2.0, -0.5]);
        let y = vec![0, 2, 1, 0, 2];
        let mut m = LinearClassifier::zeros(ClassifierLoss::Logistic, 3, 2, 0.3);
        m.weights = Matrix::from_vec(3, 2, vec![0.1, -0.2, 0.4, 0.3, -0.5, 0.2]);
        m.bias = vec![0.05, -0.1, 0.2];
        let (_, gw, gb) = classifier_objective(&m, &x, &y).unwrap();
        let h = 1e-5;
        for i in 0..6 {
            let mut p = m.clone();
            p.weights.data_mut()[i] += h;
            let mut q = m.clone();
            q.weights.data_mut()[i] -= h;
            let fd = (classifier_objective(&p, &x, &y).unwrap().0 - classifier_objective(&q, &x, &y).unwrap().0) / (2.0 * h);
            assert!((fd - gw.data()[i]).abs() <= 1e-5 * fd.abs().max(gw.data()[i].abs()).max(1e-3));
        }
        let mut p = m.clone();
        p.bias[1] += h;
        let mut q = m.clone();
        q.bias[1] -= h;
        let fd = (classifier_objective(&p, &x, &y).unwrap().0 - classifier_objective(&q, &x, &y).unwrap().0) / (2.0 * h);
        assert!((fd - gb[1]).abs() < 1e-9);
    }
}
