//! Levelwise Apriori over `(attribute, value)` transactions and
//! confidence-filtered rule generation.
//!
//! Supports are fractions of the transaction count and thresholds are
//! inclusive. Items are ordered lexicographically by attribute, then value.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::{Item, TransactionSet};

// Transactions per counting task.
const CHUNK: usize = 256;

fn check_fraction(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must lie in (0, 1], got {value}")))
    }
}

/// Fraction of transactions containing every item of `itemset`.
pub fn count_support<'a>(
    itemset: impl IntoIterator<Item = &'a Item>,
    ts: &TransactionSet,
) -> Result<f64> {
    if ts.is_empty() {
        return Err(Error::EmptyInput("transaction set is empty".into()));
    }
    let items: Vec<&Item> = itemset.into_iter().collect();
    let hits = ts
        .transactions()
        .iter()
        .filter(|t| items.iter().all(|i| t.contains(*i)))
        .count();
    Ok(hits as f64 / ts.len() as f64)
}

/// Apriori join and prune. Each input itemset must be sorted; inputs must
/// share one size. Output is sorted and duplicate-free.
pub fn generate_candidates<T: Ord + Clone>(frequent_prev: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let Some(size) = frequent_prev.first().map(Vec::len) else {
        return Ok(Vec::new());
    };
    if frequent_prev.iter().any(|s| s.len() != size) {
        return Err(Error::Parameter(
            "candidate generation needs itemsets of one size".into(),
        ));
    }
    if size == 0 {
        return Ok(Vec::new());
    }
    let mut prev: Vec<&Vec<T>> = frequent_prev.iter().collect();
    prev.sort();
    prev.dedup();
    let known: BTreeSet<&[T]> = prev.iter().map(|s| s.as_slice()).collect();

    let mut out = Vec::new();
    for (i, a) in prev.iter().enumerate() {
        for b in &prev[i + 1..] {
            if a[..size - 1] != b[..size - 1] {
                // Sorted input: later itemsets cannot share this prefix either.
                break;
            }
            let mut cand: Vec<T> = a.to_vec();
            cand.push(b[size - 1].clone());
            let all_subsets_frequent = (0..cand.len()).all(|skip| {
                let sub: Vec<T> = cand
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != skip)
                    .map(|(_, x)| x.clone())
                    .collect();
                known.contains(sub.as_slice())
            });
            if all_subsets_frequent {
                out.push(cand);
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemset {
    pub items: Vec<Item>,
    pub count: usize,
    pub support: f64,
}

/// Frequent itemsets grouped by size, each level in canonical order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemsetTable {
    pub transactions: usize,
    pub levels: BTreeMap<usize, Vec<FrequentItemset>>,
}

impl FrequentItemsetTable {
    pub fn iter(&self) -> impl Iterator<Item = &FrequentItemset> {
        self.levels.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.levels.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, items: &[Item]) -> Option<&FrequentItemset> {
        self.levels
            .get(&items.len())?
            .binary_search_by(|f| f.items.as_slice().cmp(items))
            .ok()
            .map(|i| &self.levels[&items.len()][i])
    }

    /// Every non-empty proper subset of a listed itemset is listed with at
    /// least its support.
    pub fn is_downward_closed(&self) -> bool {
        self.iter().all(|f| {
            let m = f.items.len();
            (1..(1u64 << m) - 1).all(|mask| {
                let sub: Vec<Item> = (0..m)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| f.items[b].clone())
                    .collect();
                self.get(&sub).is_some_and(|s| s.count >= f.count)
            })
        })
    }
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

pub fn frequent_itemsets(ts: &TransactionSet, min_support: f64) -> Result<FrequentItemsetTable> {
    check_fraction("min_support", min_support)?;
    if ts.is_empty() {
        return Err(Error::EmptyInput("transaction set is empty".into()));
    }
    let n = ts.len();
    let universe = ts.universe();
    let ids: HashMap<&Item, u32> = universe
        .iter()
        .enumerate()
        .map(|(i, item)| (item, i as u32))
        .collect();
    // Ids follow canonical item order, so sorted id lists are canonical itemsets.
    let encoded: Vec<Vec<u32>> = ts
        .transactions()
        .iter()
        .map(|t| t.iter().map(|i| ids[i]).collect())
        .collect();
    let frequent = |count: usize| count as f64 / n as f64 >= min_support;

    let mut singles = vec![0usize; universe.len()];
    for t in &encoded {
        for &i in t {
            singles[i as usize] += 1;
        }
    }
    let mut level: Vec<(Vec<u32>, usize)> = singles
        .iter()
        .enumerate()
        .filter(|&(_, &c)| frequent(c))
        .map(|(i, &c)| (vec![i as u32], c))
        .collect();

    let mut table = FrequentItemsetTable {
        transactions: n,
        levels: BTreeMap::new(),
    };
    while !level.is_empty() {
        let size = level[0].0.len();
        let prev: Vec<Vec<u32>> = level.iter().map(|(s, _)| s.clone()).collect();
        table.levels.insert(
            size,
            level
                .into_iter()
                .map(|(ids, count)| FrequentItemset {
                    items: ids.iter().map(|&i| universe[i as usize].clone()).collect(),
                    count,
                    support: count as f64 / n as f64,
                })
                .collect(),
        );

        let candidates = generate_candidates(&prev)?;
        if candidates.is_empty() {
            break;
        }
        let counts = encoded
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut local = vec![0usize; candidates.len()];
                for t in chunk {
                    if t.len() < size + 1 {
                        continue;
                    }
                    for (slot, cand) in local.iter_mut().zip(&candidates) {
                        if is_subset(cand, t) {
                            *slot += 1;
                        }
                    }
                }
                local
            })
            .reduce(
                || vec![0usize; candidates.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        level = candidates
            .into_iter()
            .zip(counts)
            .filter(|&(_, c)| frequent(c))
            .collect();
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Vec<Item>,
    pub consequent: Vec<Item>,
    pub support: f64,
    pub confidence: f64,
}

/// Emits every rule `A -> F \ A` with confidence at least `min_confidence`,
/// sorted by confidence, then support (both descending), then itemset order.
pub fn generate_rules(
    table: &FrequentItemsetTable,
    min_confidence: f64,
) -> Result<Vec<AssociationRule>> {
    check_fraction("min_confidence", min_confidence)?;
    let mut rules = Vec::new();
    for f in table.iter().filter(|f| f.items.len() >= 2) {
        let m = f.items.len();
        if m >= 64 {
            return Err(Error::Parameter(format!("itemset of size {m} is too large")));
        }
        for mask in 1..(1u64 << m) - 1 {
            let side = |in_antecedent: bool| -> Vec<Item> {
                f.items
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| (mask & (1 << b) != 0) == in_antecedent)
                    .map(|(_, i)| i.clone())
                    .collect()
            };
            let antecedent = side(true);
            let ante_count = table
                .get(&antecedent)
                .ok_or_else(|| {
                    Error::Parameter("frequent itemset table is not downward closed".into())
                })?
                .count;
            let confidence = f.count as f64 / ante_count as f64;
            if confidence >= min_confidence {
                rules.push(AssociationRule {
                    antecedent,
                    consequent: side(false),
                    support: f.support,
                    confidence,
                });
            }
        }
    }
    rules.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.support.total_cmp(&a.support))
            .then_with(|| a.antecedent.cmp(&b.antecedent))
            .then_with(|| a.consequent.cmp(&b.consequent))
    });
    Ok(rules)
}

fn join_items(items: &[Item]) -> String {
    items
        .iter()
        .map(Item::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Plain-text rule listing, one rule per line.
pub fn format_rules_table(rules: &[AssociationRule]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>4}  {:>8}  {:>10}  rule", "#", "support", "confidence");
    for (i, r) in rules.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>4}  {:>8.4}  {:>10.4}  {{{}}} => {{{}}}",
            i + 1,
            r.support,
            r.confidence,
            join_items(&r.antecedent),
            join_items(&r.consequent)
        );
    }
    out
}
