//! Classification metrics: accuracy, per-class precision and recall, and
//! the confusion matrix, with a plain-text table for people and JSON for
//! machines.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::{self, LabeledDataset, SelfTaughtModel};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ClassMetrics {
    /// 1-based class index.
    pub class: usize,
    /// Correct predictions of this class over all predictions of it;
    /// 0 when the class was never predicted.
    pub precision: f64,
    /// Correct predictions of this class over its true examples;
    /// 0 when the class has no examples.
    pub recall: f64,
    /// True examples of this class.
    pub support: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EvalReport {
    pub examples: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// confusion[true][predicted], 0-based over classes 1..=C.
    pub confusion: Vec<Vec<usize>>,
}

/// Build a report from parallel label/prediction slices.
pub fn evaluate_predictions(
    y_true: &[usize],
    y_pred: &[usize],
    num_classes: usize,
) -> Result<EvalReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid("prediction and label counts differ"));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty set"));
    }
    if num_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&t, &p) in y_true.iter().zip(y_pred.iter()) {
        if t == 0 || t > num_classes || p == 0 || p > num_classes {
            return Err(Error::invalid(format!(
                "label pair ({t}, {p}) outside 1..={num_classes}"
            )));
        }
        confusion[t - 1][p - 1] += 1;
    }

    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    let accuracy = correct as f64 / y_true.len() as f64;

    let per_class = (0..num_classes)
        .map(|c| {
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..num_classes).map(|t| confusion[t][c]).sum();
            ClassMetrics {
                class: c + 1,
                precision: if predicted == 0 {
                    0.0
                } else {
                    confusion[c][c] as f64 / predicted as f64
                },
                recall: if support == 0 {
                    0.0
                } else {
                    confusion[c][c] as f64 / support as f64
                },
                support,
            }
        })
        .collect();

    Ok(EvalReport {
        examples: y_true.len(),
        accuracy,
        per_class,
        confusion,
    })
}

/// Predict every row of the labeled set and score against its labels. The
/// set's labels must fit the model's class count.
pub fn run_eval(model: &SelfTaughtModel, data: &LabeledDataset) -> Result<EvalReport> {
    let c = model.num_classes();
    if data.num_classes > c {
        return Err(Error::invalid(format!(
            "dataset has labels up to {} but the model knows {c} classes",
            data.num_classes
        )));
    }
    let mut predictions = Vec::with_capacity(data.x.nrows());
    for i in 0..data.x.nrows() {
        let (label, _) = pipeline::predict(model, &data.x.row(i).transpose())?;
        predictions.push(label);
    }
    evaluate_predictions(&data.y, &predictions, c)
}

impl EvalReport {
    /// Fixed-width table for terminal output.
    pub fn human_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "examples: {}\naccuracy: {:.4}\n\nclass  precision  recall  support\n",
            self.examples, self.accuracy
        ));
        for m in &self.per_class {
            out.push_str(&format!(
                "{:>5}  {:>9.4}  {:>6.4}  {:>7}\n",
                m.class, m.precision, m.recall, m.support
            ));
        }
        out.push_str("\nconfusion (rows = true, cols = predicted)\n");
        for row in &self.confusion {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{v:>6}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
