#![allow(dead_code)]

use logodm_core::schema::{AttributeDescriptor, CellValue, Dataset, DatasetSchema};
use proptest::prelude::*;

pub const CLASSES: [&str; 3] = ["C", "I", "S"];

/// Integer-coded columns plus class codes, before conversion to a dataset.
#[derive(Clone, Debug)]
pub struct Table {
    pub cards: Vec<usize>,
    pub rows: Vec<Vec<u32>>,
    pub class: Vec<u32>,
}

impl Table {
    pub fn column(&self, a: usize) -> Vec<u32> {
        self.rows.iter().map(|r| r[a]).collect()
    }

    pub fn dataset(&self) -> Dataset {
        let mut attrs: Vec<AttributeDescriptor> = self
            .cards
            .iter()
            .enumerate()
            .map(|(a, &c)| AttributeDescriptor::categorical(format!("a{a}"), (0..c).map(|v| format!("v{v}"))).unwrap())
            .collect();
        attrs.push(AttributeDescriptor::class_label("outcome", CLASSES).unwrap());
        let schema = DatasetSchema::new(attrs, Some("outcome".into())).unwrap();
        let records = self
            .rows
            .iter()
            .zip(&self.class)
            .map(|(row, &c)| {
                let mut r: Vec<CellValue> = row.iter().map(|v| CellValue::Category(format!("v{v}"))).collect();
                r.push(CellValue::category(CLASSES[c as usize]));
                r
            })
            .collect();
        Dataset::new(schema, records).unwrap()
    }
}

pub fn table(max_attrs: usize, max_rows: usize) -> impl Strategy<Value = Table> {
    (prop::collection::vec(2usize..=4, 1..=max_attrs), 1..=max_rows).prop_flat_map(|(cards, n)| {
        let row = cards.iter().map(|&c| 0..c as u32).collect::<Vec<_>>();
        (
            Just(cards),
            prop::collection::vec(row, n),
            prop::collection::vec(0u32..3, n),
        )
            .prop_map(|(cards, rows, class)| Table { cards, rows, class })
    })
}

pub fn counts(xs: &[u32], ys: &[u32], cx: usize, cy: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; cy]; cx];
    for (&x, &y) in xs.iter().zip(ys) {
        t[x as usize][y as usize] += 1;
    }
    t
}

/// Direct summation of p(x,y) log2 p(x,y) / (p(x) p(y)).
pub fn oracle_mi(table: &[Vec<u64>]) -> f64 {
    let n: u64 = table.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let mut mi = 0.0;
    for row in table {
        let px = row.iter().sum::<u64>() as f64 / n;
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let py = table.iter().map(|r| r[j]).sum::<u64>() as f64 / n;
            let pxy = c as f64 / n;
            mi += pxy * (pxy / (px * py)).log2();
        }
    }
    mi
}
