//! ID3-style decision trees over categorical attributes: multiway splits on
//! maximum information gain, majority leaves, and a per-node fallback class
//! for missing or unseen values at prediction time.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{entropy_of_counts, CodedColumn};
use crate::schema::{validate_record, CellValue, Dataset, DatasetSchema};
use crate::select::argmax_by_name;

// Nodes smaller than this are grown on the calling thread.
const PARALLEL_THRESHOLD: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_records_per_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_records_per_split: 2,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::Parameter("max_depth must be positive".into()));
        }
        if self.min_records_per_split == 0 {
            return Err(Error::Parameter(
                "min_records_per_split must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Tree node in its JSON shape:
/// `{"split", "branches", "fallback"}` or `{"leaf", "counts"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Internal {
        split: String,
        branches: BTreeMap<String, Node>,
        fallback: String,
    },
    Leaf {
        leaf: String,
        counts: BTreeMap<String, u64>,
    },
}

impl Node {
    /// Class counts of the training records that reached this node.
    pub fn distribution(&self) -> BTreeMap<String, u64> {
        match self {
            Node::Leaf { counts, .. } => counts.clone(),
            Node::Internal { branches, .. } => {
                let mut total = BTreeMap::new();
                for child in branches.values() {
                    for (label, n) in child.distribution() {
                        *total.entry(label).or_insert(0) += n;
                    }
                }
                total
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionTree {
    pub root: Node,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prediction {
    pub label: String,
    pub distribution: BTreeMap<String, u64>,
    /// Split attribute whose value was missing or had no branch, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_at: Option<String>,
}

impl DecisionTree {
    pub fn predict(&self, record: &[CellValue], schema: &DatasetSchema) -> Result<Prediction> {
        let verdict = validate_record(record, schema);
        if !verdict.is_valid() {
            return Err(Error::Schema(verdict.to_string()));
        }
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { leaf, counts } => {
                    return Ok(Prediction {
                        label: leaf.clone(),
                        distribution: counts.clone(),
                        fallback_at: None,
                    })
                }
                Node::Internal {
                    split,
                    branches,
                    fallback,
                } => {
                    let idx = schema.index_of(split).ok_or_else(|| {
                        Error::Schema(format!("tree splits on `{split}`, absent from record schema"))
                    })?;
                    let next = match &record[idx] {
                        CellValue::Category(v) => branches.get(v),
                        _ => None,
                    };
                    match next {
                        Some(child) => node = child,
                        None => {
                            return Ok(Prediction {
                                label: fallback.clone(),
                                distribution: node.distribution(),
                                fallback_at: Some(split.clone()),
                            })
                        }
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Internal { branches, .. } => {
                    1 + branches.values().map(go).max().unwrap_or(0)
                }
            }
        }
        go(&self.root)
    }

    pub fn leaf_count(&self) -> usize {
        fn go(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 1,
                Node::Internal { branches, .. } => branches.values().map(go).sum(),
            }
        }
        go(&self.root)
    }

    /// Whether some root-to-leaf path splits twice on one attribute.
    pub fn repeats_attribute(&self) -> bool {
        fn go<'a>(n: &'a Node, path: &mut Vec<&'a str>) -> bool {
            match n {
                Node::Leaf { .. } => false,
                Node::Internal {
                    split, branches, ..
                } => {
                    if path.contains(&split.as_str()) {
                        return true;
                    }
                    path.push(split);
                    let found = branches.values().any(|c| go(c, path));
                    path.pop();
                    found
                }
            }
        }
        go(&self.root, &mut Vec::new())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

/// Entropy in bits of a label column.
pub fn entropy<T: Ord>(labels: &[T]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("entropy of an empty column".into()));
    }
    let mut counts: BTreeMap<&T, u64> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    Ok(entropy_of_counts(&counts.into_values().collect::<Vec<_>>()))
}

fn gain(feature: &CodedColumn, class: &CodedColumn, rows: &[usize]) -> f64 {
    let k = class.cardinality();
    let mut joint = vec![0u64; feature.cardinality() * k];
    let mut class_counts = vec![0u64; k];
    for &r in rows {
        let c = class.codes()[r] as usize;
        joint[feature.codes()[r] as usize * k + c] += 1;
        class_counts[c] += 1;
    }
    let n = rows.len() as f64;
    let conditional: f64 = joint
        .chunks(k)
        .map(|stratum| {
            let nv: u64 = stratum.iter().sum();
            if nv == 0 {
                0.0
            } else {
                nv as f64 / n * entropy_of_counts(stratum)
            }
        })
        .sum();
    entropy_of_counts(&class_counts) - conditional
}

/// Class entropy minus the expected class entropy after splitting on `attribute`.
pub fn information_gain(ds: &Dataset, attribute: &str) -> Result<f64> {
    let class_name = ds
        .schema()
        .class_attribute()
        .ok_or_else(|| Error::Schema("information gain needs a class attribute".into()))?;
    if attribute == class_name {
        return Err(Error::Parameter(format!(
            "`{attribute}` is the class attribute"
        )));
    }
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset has no records".into()));
    }
    let feature = CodedColumn::from_dataset(ds, attribute)?;
    let class = CodedColumn::from_dataset(ds, class_name)?;
    let rows: Vec<usize> = (0..ds.len()).collect();
    Ok(gain(&feature, &class, &rows))
}

struct Inducer<'a> {
    names: Vec<&'a str>,
    domains: Vec<&'a [String]>,
    features: Vec<CodedColumn>,
    class: CodedColumn,
    labels: &'a [String],
    params: TreeParams,
}

impl Inducer<'_> {
    fn class_counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.labels.len()];
        for &r in rows {
            counts[self.class.codes()[r] as usize] += 1;
        }
        counts
    }

    /// Majority label; ties go to the lexicographically smallest label.
    fn majority(&self, counts: &[u64]) -> String {
        let mut best: Option<(&str, u64)> = None;
        for (label, &n) in self.labels.iter().zip(counts) {
            let better = match best {
                None => true,
                Some((b, bn)) => n > bn || (n == bn && label.as_str() < b),
            };
            if better {
                best = Some((label, n));
            }
        }
        best.map(|(l, _)| l.to_string()).unwrap_or_default()
    }

    fn leaf(&self, label: String, counts: &[u64]) -> Node {
        Node::Leaf {
            leaf: label,
            counts: self
                .labels
                .iter()
                .cloned()
                .zip(counts.iter().copied())
                .collect(),
        }
    }

    fn grow(&self, rows: &[usize], available: &[usize], depth: usize) -> Node {
        let counts = self.class_counts(rows);
        let majority = self.majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure
            || available.is_empty()
            || self.params.max_depth == Some(depth)
            || rows.len() < self.params.min_records_per_split
        {
            return self.leaf(majority, &counts);
        }

        let gains: Vec<(usize, &str, f64)> = available
            .iter()
            .enumerate()
            .map(|(pos, &a)| (pos, self.names[a], gain(&self.features[a], &self.class, rows)))
            .collect();
        let pos = argmax_by_name(gains).expect("available is non-empty");
        let attr = available[pos];
        let rest: Vec<usize> = available.iter().copied().filter(|&a| a != attr).collect();

        let mut partitions: Vec<Vec<usize>> = vec![Vec::new(); self.domains[attr].len()];
        for &r in rows {
            partitions[self.features[attr].codes()[r] as usize].push(r);
        }
        let build = |part: &Vec<usize>| {
            if part.is_empty() {
                self.leaf(majority.clone(), &vec![0; self.labels.len()])
            } else {
                self.grow(part, &rest, depth + 1)
            }
        };
        let children: Vec<Node> = if rows.len() >= PARALLEL_THRESHOLD {
            partitions.par_iter().map(build).collect()
        } else {
            partitions.iter().map(build).collect()
        };
        Node::Internal {
            split: self.names[attr].to_string(),
            branches: self.domains[attr].iter().cloned().zip(children).collect(),
            fallback: majority,
        }
    }
}

pub fn induce_tree(ds: &Dataset, params: &TreeParams) -> Result<DecisionTree> {
    params.validate()?;
    let schema = ds.schema();
    let class_attr = schema
        .class_descriptor()
        .ok_or_else(|| Error::Schema("tree induction needs a class attribute".into()))?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset has no records".into()));
    }
    let names = schema.feature_names();
    let features = names
        .iter()
        .map(|n| CodedColumn::from_dataset(ds, n))
        .collect::<Result<Vec<_>>>()?;
    let domains = names
        .iter()
        .map(|n| schema.attribute(n).expect("feature exists").domain())
        .collect();
    let inducer = Inducer {
        class: CodedColumn::from_dataset(ds, class_attr.name())?,
        labels: class_attr.domain(),
        names,
        domains,
        features,
        params: *params,
    };
    let rows: Vec<usize> = (0..ds.len()).collect();
    let available: Vec<usize> = (0..inducer.names.len()).collect();
    Ok(DecisionTree {
        root: inducer.grow(&rows, &available, 0),
    })
}
