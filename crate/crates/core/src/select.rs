//! Greedy mRMR feature selection (difference form: relevance minus mean
//! redundancy against the already selected attributes).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{mutual_information, CodedColumn};
use crate::schema::Dataset;

/// Scores closer than this are treated as tied; ties go to the smallest name.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub rank: usize,
    pub attribute: String,
    pub relevance: f64,
    pub redundancy: f64,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrace {
    pub fn attributes(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.attribute.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Trace of the first `k` picks. Greedy selection makes this equal to
    /// running the selector with `k` directly.
    pub fn truncated(&self, k: usize) -> SelectionTrace {
        SelectionTrace {
            steps: self.steps.iter().take(k).cloned().collect(),
        }
    }
}

/// Index of the best score, treating near-equal scores as ties broken by name.
pub(crate) fn argmax_by_name<'a>(
    scored: impl IntoIterator<Item = (usize, &'a str, f64)>,
) -> Option<usize> {
    let scored: Vec<(usize, &str, f64)> = scored.into_iter().collect();
    let best = scored
        .iter()
        .map(|&(_, _, s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    scored
        .iter()
        .filter(|&&(_, _, s)| s >= best - TIE_TOLERANCE)
        .min_by(|a, b| a.1.cmp(b.1))
        .map(|&(i, _, _)| i)
}

pub fn mrmr_select(ds: &Dataset, k: usize) -> Result<SelectionTrace> {
    if k < 1 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let schema = ds.schema();
    let class_name = schema
        .class_attribute()
        .ok_or_else(|| Error::Schema("feature selection needs a class attribute".into()))?;
    let names = schema.feature_names();
    if names.is_empty() {
        return Err(Error::Schema("no candidate attributes besides the class".into()));
    }
    let class = CodedColumn::from_dataset(ds, class_name)?;
    let columns = names
        .iter()
        .map(|n| CodedColumn::from_dataset(ds, n))
        .collect::<Result<Vec<_>>>()?;
    mrmr_over_columns(&names, &columns, &class, k)
}

/// Selection over pre-encoded columns; `names[i]` labels `columns[i]`.
pub(crate) fn mrmr_over_columns(
    names: &[&str],
    columns: &[CodedColumn],
    class: &CodedColumn,
    k: usize,
) -> Result<SelectionTrace> {
    let relevance = columns
        .par_iter()
        .map(|c| mutual_information(c, class))
        .collect::<Result<Vec<f64>>>()?;

    let mut remaining: Vec<usize> = (0..columns.len()).collect();
    let mut redundancy_sum = vec![0.0f64; columns.len()];
    let mut steps: Vec<SelectionStep> = Vec::new();

    while steps.len() < k && !remaining.is_empty() {
        let selected = steps.len() as f64;
        let score = |i: usize| {
            let red = if steps.is_empty() {
                0.0
            } else {
                redundancy_sum[i] / selected
            };
            (relevance[i] - red, red)
        };
        let pos = argmax_by_name(
            remaining
                .iter()
                .enumerate()
                .map(|(pos, &i)| (pos, names[i], score(i).0)),
        )
        .expect("remaining is non-empty");
        let chosen = remaining.remove(pos);
        let (value, red) = score(chosen);
        steps.push(SelectionStep {
            rank: steps.len() + 1,
            attribute: names[chosen].to_string(),
            relevance: relevance[chosen],
            redundancy: red,
            score: value,
        });

        let added = remaining
            .par_iter()
            .map(|&i| mutual_information(&columns[i], &columns[chosen]))
            .collect::<Result<Vec<f64>>>()?;
        for (&i, mi) in remaining.iter().zip(added) {
            redundancy_sum[i] += mi;
        }
    }
    Ok(SelectionTrace { steps })
}
