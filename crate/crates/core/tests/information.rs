mod common;

use common::{counts, oracle_mi, table, Table};
use logodm_core::info::{mutual_information, CodedColumn, ContingencyTable};
use logodm_core::schema::{AttributeDescriptor, CellValue, Dataset, DatasetSchema};
use logodm_core::select::mrmr_select;
use proptest::prelude::*;

fn contingency() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0u64..12, c), r))
}

fn column(codes: &[u32], card: usize) -> CodedColumn {
    CodedColumn::from_codes(codes.to_vec(), card).unwrap()
}

proptest! {
    #[test]
    fn mi_matches_direct_summation(t in contingency()) {
        prop_assume!(t.iter().flatten().any(|&c| c > 0));
        let got = ContingencyTable::from_counts(&t).unwrap().mutual_information();
        prop_assert!((got - oracle_mi(&t).max(0.0)).abs() <= 1e-10);
    }

    #[test]
    fn mi_is_nonnegative_and_symmetric(t in table(2, 50)) {
        let x = column(&t.column(0), t.cards[0]);
        let y = column(&t.class, 3);
        let xy = mutual_information(&x, &y).unwrap();
        let yx = mutual_information(&y, &x).unwrap();
        prop_assert!(xy >= -1e-12);
        prop_assert!((xy - yx).abs() <= 1e-12);
    }

    #[test]
    fn merging_categories_never_adds_information(t in table(1, 50), a in 0u32..4, b in 0u32..4) {
        let card = t.cards[0] as u32;
        let (a, b) = (a % card, b % card);
        let x = t.column(0);
        let merged: Vec<u32> = x.iter().map(|&v| if v == b { a } else { v }).collect();
        let before = oracle_mi(&counts(&x, &t.class, card as usize, 3));
        let after = ContingencyTable::from_columns(&column(&merged, card as usize), &column(&t.class, 3))
            .unwrap()
            .mutual_information();
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn selection_is_stable_across_thread_counts(t in table(6, 40)) {
        let ds = t.dataset();
        let k = t.cards.len();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| mrmr_select(&ds, k)).unwrap();
        let b = many.install(|| mrmr_select(&ds, k)).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn relabeling_values_keeps_the_sequence(t in table(5, 40), shift in 1u32..4) {
        let original = mrmr_select(&t.dataset(), t.cards.len()).unwrap();
        let relabeled = Table {
            rows: t
                .rows
                .iter()
                .map(|r| r.iter().zip(&t.cards).map(|(&v, &c)| (v + shift) % c as u32).collect())
                .collect(),
            ..t.clone()
        };
        let again = mrmr_select(&relabeled.dataset(), t.cards.len()).unwrap();
        prop_assert_eq!(original.attributes(), again.attributes());
    }

    #[test]
    fn first_pick_is_the_relevance_argmax(t in table(6, 40)) {
        let trace = mrmr_select(&t.dataset(), 1).unwrap();
        let mut best = (f64::NEG_INFINITY, String::new());
        for a in 0..t.cards.len() {
            let mi = oracle_mi(&counts(&t.column(a), &t.class, t.cards[a], 3));
            if mi > best.0 + 1e-12 {
                best = (mi, format!("a{a}"));
            }
        }
        prop_assert_eq!(trace.attributes()[0], best.1.as_str());
        prop_assert!((trace.steps[0].score - trace.steps[0].relevance).abs() <= 1e-15);
    }
}

#[test]
fn closed_forms() {
    let x = CodedColumn::from_labels(&["0", "1", "0", "1"]);
    assert!((mutual_information(&x, &x).unwrap() - 1.0).abs() <= 1e-12);
    let table = ContingencyTable::from_counts(&[vec![3, 6], vec![1, 2]]).unwrap();
    assert!(table.mutual_information().abs() <= 1e-12);
}

#[test]
fn weak_independent_feature_beats_a_copy() {
    let names = ["f1", "f2", "f3"];
    let f1 = ["0", "0", "1", "1", "0", "0", "1", "1"];
    let f3 = ["0", "1", "0", "1", "0", "1", "0", "1"];
    let class = ["C", "C", "I", "S", "C", "C", "I", "S"];
    let mut attrs: Vec<AttributeDescriptor> = names
        .iter()
        .map(|n| AttributeDescriptor::categorical(*n, ["0", "1"]).unwrap())
        .collect();
    attrs.push(AttributeDescriptor::class_label("outcome", ["C", "I", "S"]).unwrap());
    let schema = DatasetSchema::new(attrs, Some("outcome".into())).unwrap();
    let records = (0..8)
        .map(|i| {
            [f1[i], f1[i], f3[i], class[i]]
                .iter()
                .map(|v| CellValue::category(*v))
                .collect()
        })
        .collect();
    let ds = Dataset::new(schema, records).unwrap();
    let trace = mrmr_select(&ds, 3).unwrap();
    assert_eq!(trace.attributes(), ["f1", "f3", "f2"]);
    assert!((trace.steps[0].relevance - 1.0).abs() < 1e-12);
    assert!((trace.steps[1].score - 0.5).abs() < 1e-12);
}

#[test]
fn empty_contingency_table_is_rejected() {
    assert!(ContingencyTable::from_counts(&[vec![0, 0], vec![0, 0]]).is_err());
}
