mod common;

use std::collections::BTreeMap;

use common::{table, Table, CLASSES};
use logodm_core::schema::CellValue;
use logodm_core::tree::{induce_tree, information_gain, DecisionTree, Node, TreeParams};
use proptest::prelude::*;

/// Relabels so identical attribute tuples share a class.
fn consistent(mut t: Table) -> Table {
    let mut first: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    for (row, c) in t.rows.iter().zip(t.class.iter_mut()) {
        *c = *first.entry(row.clone()).or_insert(*c);
    }
    t
}

fn training_accuracy(tree: &DecisionTree, t: &Table) -> usize {
    let ds = t.dataset();
    ds.records()
        .iter()
        .filter(|r| {
            let p = tree.predict(r, ds.schema()).unwrap();
            Some(p.label.as_str()) == r.last().unwrap().as_category()
        })
        .count()
}

fn paths_repeat(node: &Node, seen: &mut Vec<String>) -> bool {
    match node {
        Node::Leaf { .. } => false,
        Node::Internal { split, branches, .. } => {
            if seen.contains(split) {
                return true;
            }
            seen.push(split.clone());
            let hit = branches.values().any(|c| paths_repeat(c, seen));
            seen.pop();
            hit
        }
    }
}

fn leaf_sum(node: &Node) -> BTreeMap<String, u64> {
    match node {
        Node::Leaf { counts, .. } => counts.clone(),
        Node::Internal { branches, .. } => {
            let mut total = BTreeMap::new();
            for child in branches.values() {
                for (k, v) in leaf_sum(child) {
                    *total.entry(k).or_insert(0) += v;
                }
            }
            total
        }
    }
}

fn check_distributions(node: &Node) -> bool {
    match node {
        Node::Leaf { .. } => true,
        Node::Internal { branches, .. } => {
            node.distribution() == leaf_sum(node) && branches.values().all(check_distributions)
        }
    }
}

proptest! {
    #[test]
    fn consistent_data_fits_exactly(t in table(6, 80).prop_map(consistent)) {
        let tree = induce_tree(&t.dataset(), &TreeParams::default()).unwrap();
        prop_assert_eq!(training_accuracy(&tree, &t), t.rows.len());
    }

    #[test]
    fn contradictions_cost_exactly_the_minority(t in table(3, 60)) {
        let tree = induce_tree(&t.dataset(), &TreeParams::default()).unwrap();
        let mut by_tuple: BTreeMap<&Vec<u32>, [usize; 3]> = BTreeMap::new();
        for (row, &c) in t.rows.iter().zip(&t.class) {
            by_tuple.entry(row).or_default()[c as usize] += 1;
        }
        let best: usize = by_tuple.values().map(|c| *c.iter().max().unwrap()).sum();
        prop_assert_eq!(training_accuracy(&tree, &t), best);
    }

    #[test]
    fn structure_is_sound(t in table(6, 80), depth in prop::option::of(1usize..4), min_split in 1usize..6) {
        let params = TreeParams { max_depth: depth, min_records_per_split: min_split };
        let tree = induce_tree(&t.dataset(), &params).unwrap();
        prop_assert!(!paths_repeat(&tree.root, &mut Vec::new()));
        prop_assert!(!tree.repeats_attribute());
        if let Some(d) = depth {
            prop_assert!(tree.depth() <= d);
        }
        prop_assert!(check_distributions(&tree.root));
        let total: u64 = tree.root.distribution().values().sum();
        prop_assert_eq!(total as usize, t.rows.len());
    }

    #[test]
    fn induction_is_byte_deterministic(t in table(5, 60)) {
        let ds = t.dataset();
        let a = induce_tree(&ds, &TreeParams::default()).unwrap().to_json_pretty();
        let b = induce_tree(&ds, &TreeParams::default()).unwrap().to_json_pretty();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gain_is_nonnegative(t in table(5, 60)) {
        let ds = t.dataset();
        for a in 0..t.cards.len() {
            let gain = information_gain(&ds, &format!("a{}", a)).unwrap();
            prop_assert!(gain >= -1e-12);
        }
    }
}

#[test]
fn serialized_shape_and_round_trip() {
    let t = Table {
        cards: vec![2, 2],
        rows: vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        class: vec![0, 0, 2, 1],
    };
    let tree = induce_tree(&t.dataset(), &TreeParams::default()).unwrap();
    let value: serde_json::Value = serde_json::from_str(&tree.to_json_pretty()).unwrap();
    assert_eq!(value["split"], "a0");
    assert_eq!(value["branches"]["v0"]["leaf"], "C");
    assert_eq!(value["branches"]["v0"]["counts"]["C"], 2);
    assert_eq!(value["branches"]["v1"]["fallback"], "I");
    let back: DecisionTree = serde_json::from_value(value).unwrap();
    assert_eq!(back, tree);
}

#[test]
fn missing_split_value_falls_back() {
    let t = Table {
        cards: vec![2],
        rows: vec![vec![0], vec![0], vec![1]],
        class: vec![0, 0, 2],
    };
    let ds = t.dataset();
    let tree = induce_tree(&ds, &TreeParams::default()).unwrap();
    let record = vec![CellValue::Missing, CellValue::Missing];
    let p = tree.predict(&record, ds.schema()).unwrap();
    assert_eq!(p.label, CLASSES[0]);
    assert_eq!(p.fallback_at.as_deref(), Some("a0"));
    assert_eq!(p.distribution.values().sum::<u64>(), 3);
}

#[test]
fn record_outside_schema_is_rejected() {
    let t = Table {
        cards: vec![2],
        rows: vec![vec![0], vec![1]],
        class: vec![0, 1],
    };
    let ds = t.dataset();
    let tree = induce_tree(&ds, &TreeParams::default()).unwrap();
    let err = tree
        .predict(&[CellValue::category("v9"), CellValue::Missing], ds.schema())
        .unwrap_err();
    assert!(err.to_string().contains("a0"));
}
