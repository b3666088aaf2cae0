//! Target-set construction: natural join of relations, bag projection,
//! coded-flag expansion, missing-value imputation and the transactional view
//! used by rule mining.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{
    AttributeDescriptor, AttributeKind, CellValue, Dataset, DatasetSchema, Record,
};

/// Category substituted for missing cells by [`ImputePolicy::UnknownCategory`].
pub const UNKNOWN_CATEGORY: &str = "?unknown";
pub const FLAG_PRESENT: &str = "present";
pub const FLAG_ABSENT: &str = "absent";

/// A named table of records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    name: String,
    data: Dataset,
}

impl Relation {
    pub fn new(name: impl Into<String>, schema: DatasetSchema, rows: Vec<Record>) -> Result<Self> {
        Ok(Relation {
            name: name.into(),
            data: Dataset::new(schema, rows)?,
        })
    }

    pub fn from_dataset(name: impl Into<String>, data: Dataset) -> Self {
        Relation {
            name: name.into(),
            data,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &DatasetSchema {
        self.data.schema()
    }

    pub fn rows(&self) -> &[Record] {
        self.data.records()
    }

    pub fn into_dataset(self) -> Dataset {
        self.data
    }

    pub fn as_dataset(&self) -> &Dataset {
        &self.data
    }
}

/// Ordered, duplicate-free, non-empty list of attribute names to keep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ProjectionList(Vec<String>);

impl TryFrom<Vec<String>> for ProjectionList {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        ProjectionList::new(names)
    }
}

impl From<ProjectionList> for Vec<String> {
    fn from(p: ProjectionList) -> Self {
        p.0
    }
}

impl ProjectionList {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Parameter("projection list is empty".into()));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Parameter(format!(
                    "projection list repeats `{n}`"
                )));
            }
        }
        Ok(ProjectionList(names))
    }

    /// Every attribute of `schema`, in schema order.
    pub fn all_of(schema: &DatasetSchema) -> Result<Self> {
        Self::new(schema.names())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }
}

fn merged_class(left: &DatasetSchema, right: &DatasetSchema) -> Result<Option<String>> {
    match (left.class_attribute(), right.class_attribute()) {
        (Some(l), Some(r)) if l != r => Err(Error::SchemaConflict(format!(
            "class attribute ({l} vs {r})"
        ))),
        (l, r) => Ok(l.or(r).map(str::to_string)),
    }
}

/// Natural join on every shared attribute name. Rows with a missing shared
/// value never match. Output order: left rows in order, and for each, the
/// matching right rows in order.
pub fn natural_join(left: &Relation, right: &Relation) -> Result<Relation> {
    let ls = left.schema();
    let rs = right.schema();
    let mut shared = Vec::new();
    for (li, attr) in ls.attributes().iter().enumerate() {
        if let Some(ri) = rs.index_of(attr.name()) {
            if &rs.attributes()[ri] != attr {
                return Err(Error::SchemaConflict(attr.name().to_string()));
            }
            shared.push((li, ri));
        }
    }
    if shared.is_empty() {
        return Err(Error::DisjointSchemas {
            left: left.name.clone(),
            right: right.name.clone(),
        });
    }
    let extra: Vec<usize> = (0..rs.len())
        .filter(|ri| !shared.iter().any(|&(_, s)| s == *ri))
        .collect();

    let mut attributes = ls.attributes().to_vec();
    attributes.extend(extra.iter().map(|&ri| rs.attributes()[ri].clone()));
    let schema = DatasetSchema::new(attributes, merged_class(ls, rs)?)?;

    let mut rows = Vec::new();
    for l in left.rows() {
        for r in right.rows() {
            let matches = shared
                .iter()
                .all(|&(li, ri)| !l[li].is_missing() && l[li] == r[ri]);
            if matches {
                let mut row = l.clone();
                row.extend(extra.iter().map(|&ri| r[ri].clone()));
                rows.push(row);
            }
        }
    }
    Ok(Relation {
        name: format!("{}+{}", left.name, right.name),
        data: Dataset::from_parts(schema, rows),
    })
}

/// Bag projection: columns restricted and reordered, duplicate rows kept.
pub fn project(rel: &Relation, attrs: &ProjectionList) -> Result<Relation> {
    let schema = rel.schema();
    let indices = attrs
        .names()
        .iter()
        .map(|n| {
            schema
                .index_of(n)
                .ok_or_else(|| Error::UnknownAttribute(n.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let attributes = indices
        .iter()
        .map(|&i| schema.attributes()[i].clone())
        .collect();
    let class = schema
        .class_attribute()
        .filter(|c| attrs.names().iter().any(|n| n == c))
        .map(str::to_string);
    let rows = rel
        .rows()
        .iter()
        .map(|r| indices.iter().map(|&i| r[i].clone()).collect())
        .collect();
    Ok(Relation {
        name: rel.name.clone(),
        data: Dataset::from_parts(DatasetSchema::new(attributes, class)?, rows),
    })
}

/// Name of the binary attribute produced for one flag of a coded field.
pub fn flag_attribute_name(field: &str, flag: &str) -> String {
    format!("{field}.{flag}")
}

/// Replaces each coded-flag attribute by one `present`/`absent` attribute per
/// flag, at the same position. A missing code yields missing binaries.
pub fn expand_coded_flags(ds: &Dataset) -> Result<Dataset> {
    let schema = ds.schema();
    if !schema
        .attributes()
        .iter()
        .any(|a| a.kind() == AttributeKind::CodedFlag)
    {
        return Ok(ds.clone());
    }
    let mut attributes = Vec::new();
    for attr in schema.attributes() {
        if attr.kind() == AttributeKind::CodedFlag {
            for flag in attr.flag_names() {
                attributes.push(AttributeDescriptor::categorical(
                    flag_attribute_name(attr.name(), flag),
                    [FLAG_PRESENT, FLAG_ABSENT],
                )?);
            }
        } else {
            attributes.push(attr.clone());
        }
    }
    let new_schema = DatasetSchema::new(attributes, schema.class_attribute().map(str::to_string))
        .map_err(|e| match e {
            Error::InvalidSchema(msg) => Error::SchemaConflict(msg),
            other => other,
        })?;
    let records = ds
        .records()
        .iter()
        .map(|record| {
            let mut out = Vec::with_capacity(new_schema.len());
            for (attr, cell) in schema.attributes().iter().zip(record) {
                if attr.kind() != AttributeKind::CodedFlag {
                    out.push(cell.clone());
                    continue;
                }
                for flag in attr.flag_names() {
                    out.push(match cell {
                        CellValue::FlagSet(set) if set.contains(flag) => {
                            CellValue::category(FLAG_PRESENT)
                        }
                        CellValue::FlagSet(_) => CellValue::category(FLAG_ABSENT),
                        _ => CellValue::Missing,
                    });
                }
            }
            out
        })
        .collect();
    Ok(Dataset::from_parts(new_schema, records))
}

/// Left-fold natural join over `tables`.
pub fn join_all(tables: &[Relation]) -> Result<Relation> {
    let (first, rest) = tables
        .split_first()
        .ok_or_else(|| Error::EmptyInput("no relations to build from".into()))?;
    let mut joined = first.clone();
    for table in rest {
        joined = natural_join(&joined, table)?;
    }
    Ok(joined)
}

/// Join of `tables`, projection onto `attrs`, then coded-flag expansion.
pub fn build_target_set(tables: &[Relation], attrs: &ProjectionList) -> Result<Dataset> {
    let projected = project(&join_all(tables)?, attrs)?;
    expand_coded_flags(projected.as_dataset())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImputePolicy {
    /// Replace missing cells by the reserved `?unknown` category.
    #[serde(rename = "unknown")]
    UnknownCategory,
    /// Replace by the most frequent value among records of the same class.
    #[serde(rename = "class-mode")]
    PerClassMode,
    /// Remove every record that contains a missing cell.
    #[serde(rename = "drop")]
    DropRecord,
}

impl ImputePolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImputePolicy::UnknownCategory => "unknown",
            ImputePolicy::PerClassMode => "class-mode",
            ImputePolicy::DropRecord => "drop",
        }
    }
}

impl fmt::Display for ImputePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImputePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unknown" => Ok(ImputePolicy::UnknownCategory),
            "class-mode" => Ok(ImputePolicy::PerClassMode),
            "drop" => Ok(ImputePolicy::DropRecord),
            other => Err(Error::Parameter(format!(
                "unknown imputation policy `{other}` (expected unknown, class-mode or drop)"
            ))),
        }
    }
}

/// Most frequent key; ties go to the lexicographically smallest.
fn mode(counts: &BTreeMap<&str, usize>) -> Option<String> {
    let mut best: Option<(&str, usize)> = None;
    for (&value, &n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((value, n));
        }
    }
    best.map(|(v, _)| v.to_string())
}

pub fn impute_missing(ds: &Dataset, policy: ImputePolicy) -> Result<Dataset> {
    let schema = ds.schema();
    let missing_cols: Vec<usize> = (0..schema.len())
        .filter(|&c| ds.records().iter().any(|r| r[c].is_missing()))
        .collect();
    if missing_cols.is_empty() {
        return Ok(ds.clone());
    }
    if policy == ImputePolicy::DropRecord {
        let records = ds
            .records()
            .iter()
            .filter(|r| !r.iter().any(CellValue::is_missing))
            .cloned()
            .collect();
        return Ok(Dataset::from_parts(schema.clone(), records));
    }
    for &c in &missing_cols {
        let attr = &schema.attributes()[c];
        if attr.kind() == AttributeKind::CodedFlag {
            return Err(Error::UnexpandedField(attr.name().to_string()));
        }
    }

    match policy {
        ImputePolicy::UnknownCategory => {
            let attributes = schema
                .attributes()
                .iter()
                .enumerate()
                .map(|(c, a)| {
                    if missing_cols.contains(&c) {
                        a.with_extra_category(UNKNOWN_CATEGORY)
                    } else {
                        a.clone()
                    }
                })
                .collect();
            let new_schema =
                DatasetSchema::new(attributes, schema.class_attribute().map(str::to_string))?;
            let records = ds
                .records()
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|cell| match cell {
                            CellValue::Missing => CellValue::category(UNKNOWN_CATEGORY),
                            other => other.clone(),
                        })
                        .collect()
                })
                .collect();
            Ok(Dataset::from_parts(new_schema, records))
        }
        ImputePolicy::PerClassMode => {
            let class = schema.class_index().ok_or_else(|| {
                Error::PolicyPrecondition("class-mode imputation needs a class attribute".into())
            })?;
            if missing_cols.contains(&class) {
                return Err(Error::PolicyPrecondition(format!(
                    "class attribute `{}` has missing labels",
                    schema.attributes()[class].name()
                )));
            }
            let mut records: Vec<Record> = ds.records().to_vec();
            for &c in &missing_cols {
                let mut per_class: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
                let mut global: BTreeMap<&str, usize> = BTreeMap::new();
                for r in ds.records() {
                    if let (Some(label), Some(value)) = (r[class].as_category(), r[c].as_category())
                    {
                        *per_class.entry(label).or_default().entry(value).or_default() += 1;
                        *global.entry(value).or_default() += 1;
                    }
                }
                let fallback = mode(&global).unwrap_or_else(|| {
                    let mut domain = schema.attributes()[c].domain().to_vec();
                    domain.sort();
                    domain[0].clone()
                });
                let fills: BTreeMap<&str, String> = per_class
                    .iter()
                    .filter_map(|(label, counts)| mode(counts).map(|m| (*label, m)))
                    .collect();
                for (r, orig) in records.iter_mut().zip(ds.records()) {
                    if r[c].is_missing() {
                        let label = orig[class].as_category().unwrap_or_default();
                        let value = fills.get(label).unwrap_or(&fallback).clone();
                        r[c] = CellValue::Category(value);
                    }
                }
            }
            Ok(Dataset::from_parts(schema.clone(), records))
        }
        ImputePolicy::DropRecord => unreachable!("handled above"),
    }
}

/// One `(attribute, value)` item. Ordering is lexicographic on the pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Item {
    pub attribute: String,
    pub value: String,
}

impl Item {
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Item {
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.attribute, self.value)
    }
}

pub type Transaction = BTreeSet<Item>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransactionSet {
    transactions: Vec<Transaction>,
}

impl TransactionSet {
    pub fn new(transactions: Vec<Transaction>) -> Self {
        TransactionSet { transactions }
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Every distinct item, in canonical order.
    pub fn universe(&self) -> Vec<Item> {
        let set: BTreeSet<&Item> = self.transactions.iter().flatten().collect();
        set.into_iter().cloned().collect()
    }
}

pub fn to_transactions(ds: &Dataset, include_class: bool) -> Result<TransactionSet> {
    let schema = ds.schema();
    let class = schema.class_index();
    let columns: Vec<usize> = (0..schema.len())
        .filter(|&c| include_class || Some(c) != class)
        .collect();
    let mut transactions = Vec::with_capacity(ds.len());
    for record in ds.records() {
        let mut t = Transaction::new();
        for &c in &columns {
            let attr = &schema.attributes()[c];
            match &record[c] {
                CellValue::Category(v) => {
                    t.insert(Item::new(attr.name(), v.clone()));
                }
                CellValue::FlagSet(_) => {
                    return Err(Error::UnexpandedField(attr.name().to_string()))
                }
                CellValue::Missing => return Err(Error::UnimputedData(attr.name().to_string())),
            }
        }
        transactions.push(t);
    }
    Ok(TransactionSet { transactions })
}
