//! Plug-in information measures over categorical columns, in bits.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::schema::{AttributeKind, CellValue, Dataset};

/// A categorical column recoded to dense integer codes `0..cardinality`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedColumn {
    codes: Vec<u32>,
    cardinality: usize,
}

impl CodedColumn {
    /// Codes are positions in the attribute's declared domain.
    pub fn from_dataset(ds: &Dataset, name: &str) -> Result<Self> {
        let idx = ds.require(name)?;
        let attr = &ds.schema().attributes()[idx];
        if attr.kind() == AttributeKind::CodedFlag {
            return Err(Error::UnexpandedField(name.to_string()));
        }
        let mut codes = Vec::with_capacity(ds.len());
        for record in ds.records() {
            match &record[idx] {
                CellValue::Category(v) => {
                    let code = attr
                        .domain_index(v)
                        .expect("dataset cells validate against their domain");
                    codes.push(code as u32);
                }
                CellValue::Missing => return Err(Error::UnimputedData(name.to_string())),
                CellValue::FlagSet(_) => return Err(Error::UnexpandedField(name.to_string())),
            }
        }
        Ok(CodedColumn {
            codes,
            cardinality: attr.domain().len(),
        })
    }

    /// Codes follow the sorted order of the distinct labels.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut index: BTreeMap<&str, u32> = labels.iter().map(|l| (l.as_ref(), 0)).collect();
        for (i, code) in index.values_mut().enumerate() {
            *code = i as u32;
        }
        CodedColumn {
            codes: labels.iter().map(|l| index[l.as_ref()]).collect(),
            cardinality: index.len(),
        }
    }

    pub fn from_codes(codes: Vec<u32>, cardinality: usize) -> Result<Self> {
        if let Some(&bad) = codes.iter().find(|&&c| c as usize >= cardinality) {
            return Err(Error::Parameter(format!(
                "code {bad} outside cardinality {cardinality}"
            )));
        }
        Ok(CodedColumn { codes, cardinality })
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> CodedColumn {
        CodedColumn {
            codes: indices.iter().map(|&i| self.codes[i]).collect(),
            cardinality: self.cardinality,
        }
    }
}

/// Joint counts of two categorical variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn from_columns(x: &CodedColumn, y: &CodedColumn) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Shape(format!(
                "columns have {} and {} values",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::EmptyInput("columns are empty".into()));
        }
        let (rows, cols) = (x.cardinality, y.cardinality);
        let mut counts = vec![0u64; rows * cols];
        for (&a, &b) in x.codes.iter().zip(&y.codes) {
            counts[a as usize * cols + b as usize] += 1;
        }
        Ok(ContingencyTable {
            rows,
            cols,
            counts,
            total: x.len() as u64,
        })
    }

    pub fn from_counts(table: &[Vec<u64>]) -> Result<Self> {
        let rows = table.len();
        let cols = table.first().map_or(0, Vec::len);
        if table.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged contingency table".into()));
        }
        let counts: Vec<u64> = table.iter().flatten().copied().collect();
        let total = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput("contingency table has no observations".into()));
        }
        Ok(ContingencyTable {
            rows,
            cols,
            counts,
            total,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_marginals(&self) -> Vec<u64> {
        self.counts
            .chunks(self.cols.max(1))
            .map(|r| r.iter().sum())
            .take(self.rows)
            .collect()
    }

    pub fn col_marginals(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.cols];
        for row in self.counts.chunks(self.cols.max(1)) {
            for (acc, &c) in out.iter_mut().zip(row) {
                *acc += c;
            }
        }
        out
    }

    /// `sum n_ab/n * log2(n_ab * n / (n_a * n_b))`, clamped at zero.
    pub fn mutual_information(&self) -> f64 {
        let rm = self.row_marginals();
        let cm = self.col_marginals();
        let n = self.total as f64;
        let mut mi = 0.0;
        for (a, &na) in rm.iter().enumerate() {
            if na == 0 {
                continue;
            }
            for (b, &nb) in cm.iter().enumerate() {
                let nab = self.get(a, b);
                if nab == 0 {
                    continue;
                }
                let nab = nab as f64;
                mi += nab / n * (nab * n / (na as f64 * nb as f64)).log2();
            }
        }
        mi.max(0.0)
    }

    pub fn row_entropy(&self) -> f64 {
        entropy_of_counts(&self.row_marginals())
    }

    pub fn col_entropy(&self) -> f64 {
        entropy_of_counts(&self.col_marginals())
    }
}

/// Shannon entropy in bits of a count vector; zero counts contribute nothing.
pub fn entropy_of_counts(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

pub fn column_entropy(col: &CodedColumn) -> f64 {
    let mut counts = vec![0u64; col.cardinality];
    for &c in &col.codes {
        counts[c as usize] += 1;
    }
    entropy_of_counts(&counts)
}

pub fn mutual_information(x: &CodedColumn, y: &CodedColumn) -> Result<f64> {
    Ok(ContingencyTable::from_columns(x, y)?.mutual_information())
}

/// Mutual information between a candidate feature and the class.
pub fn relevance(candidate: &CodedColumn, class: &CodedColumn) -> Result<f64> {
    mutual_information(candidate, class)
}

/// Mean mutual information between `candidate` and each selected attribute;
/// zero when nothing is selected.
pub fn redundancy(candidate: &str, selected: &[&str], ds: &Dataset) -> Result<f64> {
    let cand = CodedColumn::from_dataset(ds, candidate)?;
    if selected.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for s in selected {
        sum += mutual_information(&cand, &CodedColumn::from_dataset(ds, s)?)?;
    }
    Ok(sum / selected.len() as f64)
}
