//! Data model for categorical records: attribute descriptors, schemas, cells,
//! datasets, and the decimal-flag codec used by coded fields such as
//! `health_problems` (`10000` serious illness, `1000` psychological trauma,
//! `100` surgery, `10` accidents, `1` other problems).
//!
//! A coded field is positional binary-in-decimal: digit `i` (0 = least
//! significant) set to `1` means flag `flag_names[k - 1 - i]` is present, so
//! codes compose by addition (`10100` = serious illness + surgery).

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of flags a coded field may carry.
pub const MAX_FLAGS: usize = 9;

/// Set of flag labels decoded from a coded field.
pub type FlagSet = BTreeSet<String>;

/// One row of a dataset, aligned to its schema.
pub type Record = Vec<CellValue>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeKind {
    Categorical,
    CodedFlag,
    ClassLabel,
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeKind::Categorical => "categorical",
            AttributeKind::CodedFlag => "coded-flag",
            AttributeKind::ClassLabel => "class-label",
        })
    }
}

#[derive(Deserialize)]
struct RawDescriptor {
    name: String,
    kind: AttributeKind,
    #[serde(default)]
    domain: Vec<String>,
    #[serde(default)]
    flag_names: Vec<String>,
}

/// Name, kind and closed value domain of one attribute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDescriptor")]
pub struct AttributeDescriptor {
    name: String,
    kind: AttributeKind,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    domain: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    flag_names: Vec<String>,
}

impl TryFrom<RawDescriptor> for AttributeDescriptor {
    type Error = Error;

    fn try_from(raw: RawDescriptor) -> Result<Self> {
        match raw.kind {
            AttributeKind::CodedFlag => {
                if !raw.domain.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "coded-flag attribute `{}` must not declare a domain",
                        raw.name
                    )));
                }
                Self::coded_flag(raw.name, raw.flag_names)
            }
            kind => {
                if !raw.flag_names.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "{kind} attribute `{}` must not declare flag_names",
                        raw.name
                    )));
                }
                Self::with_domain(raw.name, kind, raw.domain)
            }
        }
    }
}

fn check_labels(owner: &str, what: &str, labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for label in labels {
        if label.is_empty() {
            return Err(Error::InvalidSchema(format!(
                "`{owner}` has an empty {what} entry"
            )));
        }
        if !seen.insert(label.as_str()) {
            return Err(Error::InvalidSchema(format!(
                "`{owner}` repeats {what} entry `{label}`"
            )));
        }
    }
    Ok(())
}

impl AttributeDescriptor {
    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        domain: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        Self::with_domain(
            name.into(),
            AttributeKind::Categorical,
            domain.into_iter().map(Into::into).collect(),
        )
    }

    pub fn class_label<S: Into<String>>(
        name: impl Into<String>,
        domain: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        Self::with_domain(
            name.into(),
            AttributeKind::ClassLabel,
            domain.into_iter().map(Into::into).collect(),
        )
    }

    /// Flags are listed most-significant digit first.
    pub fn coded_flag<S: Into<String>>(
        name: impl Into<String>,
        flag_names: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let name = name.into();
        let flag_names: Vec<String> = flag_names.into_iter().map(Into::into).collect();
        if name.is_empty() {
            return Err(Error::InvalidSchema("attribute name is empty".into()));
        }
        if flag_names.is_empty() || flag_names.len() > MAX_FLAGS {
            return Err(Error::InvalidSchema(format!(
                "coded-flag attribute `{name}` needs 1..={MAX_FLAGS} flags, got {}",
                flag_names.len()
            )));
        }
        check_labels(&name, "flag", &flag_names)?;
        Ok(AttributeDescriptor {
            name,
            kind: AttributeKind::CodedFlag,
            domain: Vec::new(),
            flag_names,
        })
    }

    fn with_domain(name: String, kind: AttributeKind, domain: Vec<String>) -> Result<Self> {
        if name.is_empty() {
            return Err(Error::InvalidSchema("attribute name is empty".into()));
        }
        if domain.is_empty() {
            return Err(Error::InvalidSchema(format!(
                "{kind} attribute `{name}` has an empty domain"
            )));
        }
        check_labels(&name, "domain", &domain)?;
        Ok(AttributeDescriptor {
            name,
            kind,
            domain,
            flag_names: Vec::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> AttributeKind {
        self.kind
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn flag_names(&self) -> &[String] {
        &self.flag_names
    }

    /// Position of `value` in the declared domain.
    pub fn domain_index(&self, value: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == value)
    }

    pub(crate) fn with_extra_category(&self, category: &str) -> Self {
        let mut out = self.clone();
        if out.domain_index(category).is_none() {
            out.domain.push(category.to_string());
        }
        out
    }

    /// Checks one cell against this attribute. Missing is always admissible.
    pub fn check_cell(&self, cell: &CellValue) -> Option<ViolationReason> {
        match (self.kind, cell) {
            (_, CellValue::Missing) => None,
            (AttributeKind::CodedFlag, CellValue::FlagSet(flags)) => flags
                .iter()
                .find(|f| !self.flag_names.contains(f))
                .map(|f| ViolationReason::UnknownFlag(f.clone())),
            (AttributeKind::CodedFlag, CellValue::Category(_)) => {
                Some(ViolationReason::KindMismatch {
                    expected: AttributeKind::CodedFlag,
                })
            }
            (kind, CellValue::FlagSet(_)) => Some(ViolationReason::KindMismatch { expected: kind }),
            (_, CellValue::Category(name)) => match self.domain_index(name) {
                Some(_) => None,
                None => Some(ViolationReason::NotInDomain(name.clone())),
            },
        }
    }
}

/// Decodes a raw decimal-flag integer into the set of flags it carries.
pub fn decode_coded_field(raw: u64, attr: &AttributeDescriptor) -> Result<FlagSet> {
    if attr.kind != AttributeKind::CodedFlag {
        return Err(Error::Schema(format!(
            "`{}` is {}, not coded-flag",
            attr.name, attr.kind
        )));
    }
    let k = attr.flag_names.len();
    if raw >= 10u64.pow(k as u32) {
        return Err(Error::CodeOverflow {
            attribute: attr.name.clone(),
            raw,
            max_digits: k,
        });
    }
    let mut flags = FlagSet::new();
    let mut rest = raw;
    for position in 0..k {
        let digit = (rest % 10) as u8;
        rest /= 10;
        match digit {
            0 => {}
            1 => {
                flags.insert(attr.flag_names[k - 1 - position].clone());
            }
            _ => {
                return Err(Error::MalformedCode {
                    attribute: attr.name.clone(),
                    raw,
                    position,
                    digit,
                })
            }
        }
    }
    Ok(flags)
}

/// Inverse of [`decode_coded_field`].
pub fn encode_coded_field(flags: &FlagSet, attr: &AttributeDescriptor) -> Result<u64> {
    if attr.kind != AttributeKind::CodedFlag {
        return Err(Error::Schema(format!(
            "`{}` is {}, not coded-flag",
            attr.name, attr.kind
        )));
    }
    let k = attr.flag_names.len();
    let mut raw = 0u64;
    for flag in flags {
        let idx = attr
            .flag_names
            .iter()
            .position(|f| f == flag)
            .ok_or_else(|| Error::UnknownFlag {
                attribute: attr.name.clone(),
                flag: flag.clone(),
            })?;
        raw += 10u64.pow((k - 1 - idx) as u32);
    }
    Ok(raw)
}

#[derive(Deserialize)]
struct RawSchema {
    attributes: Vec<AttributeDescriptor>,
    #[serde(default)]
    class_attribute: Option<String>,
}

/// Ordered attribute list plus the optional outcome attribute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct DatasetSchema {
    attributes: Vec<AttributeDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_attribute: Option<String>,
}

impl TryFrom<RawSchema> for DatasetSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        DatasetSchema::new(raw.attributes, raw.class_attribute)
    }
}

impl DatasetSchema {
    pub fn new(attributes: Vec<AttributeDescriptor>, class_attribute: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for attr in &attributes {
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate attribute `{}`",
                    attr.name
                )));
            }
        }
        if let Some(class) = &class_attribute {
            match attributes.iter().find(|a| &a.name == class) {
                None => {
                    return Err(Error::InvalidSchema(format!(
                        "class attribute `{class}` is not in the schema"
                    )))
                }
                Some(a) if a.kind != AttributeKind::ClassLabel => {
                    return Err(Error::InvalidSchema(format!(
                        "class attribute `{class}` has kind {}",
                        a.kind
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(DatasetSchema {
            attributes,
            class_attribute,
        })
    }

    pub fn attributes(&self) -> &[AttributeDescriptor] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDescriptor> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn class_attribute(&self) -> Option<&str> {
        self.class_attribute.as_deref()
    }

    pub fn class_index(&self) -> Option<usize> {
        self.class_attribute.as_deref().and_then(|c| self.index_of(c))
    }

    pub fn class_descriptor(&self) -> Option<&AttributeDescriptor> {
        self.class_index().map(|i| &self.attributes[i])
    }

    /// Names of every attribute other than the class, in schema order.
    pub fn feature_names(&self) -> Vec<&str> {
        let class = self.class_attribute();
        self.names().filter(|n| Some(*n) != class).collect()
    }

    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json_pretty();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A single cell. `Missing` is its own marker and never an empty flag set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellValue {
    Category(String),
    FlagSet(FlagSet),
    Missing,
}

impl CellValue {
    pub fn category(name: impl Into<String>) -> Self {
        CellValue::Category(name.into())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, CellValue::Missing)
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            CellValue::Category(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationReason {
    NotInDomain(String),
    UnknownFlag(String),
    KindMismatch { expected: AttributeKind },
    ArityMismatch { expected: usize, found: usize },
}

impl fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationReason::NotInDomain(v) => write!(f, "value `{v}` is outside the domain"),
            ViolationReason::UnknownFlag(v) => write!(f, "flag `{v}` is not declared"),
            ViolationReason::KindMismatch { expected } => {
                write!(f, "cell does not fit a {expected} attribute")
            }
            ViolationReason::ArityMismatch { expected, found } => {
                write!(f, "record has {found} cells, schema has {expected}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub attribute: String,
    pub reason: ViolationReason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.attribute, self.reason)
    }
}

/// Result of [`validate_record`]; an empty violation list means valid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_record(record: &[CellValue], schema: &DatasetSchema) -> Verdict {
    let mut violations = Vec::new();
    if record.len() != schema.len() {
        violations.push(Violation {
            attribute: "<record>".into(),
            reason: ViolationReason::ArityMismatch {
                expected: schema.len(),
                found: record.len(),
            },
        });
    }
    for (attr, cell) in schema.attributes.iter().zip(record) {
        if let Some(reason) = attr.check_cell(cell) {
            violations.push(Violation {
                attribute: attr.name.clone(),
                reason,
            });
        }
    }
    Verdict { violations }
}

/// Records over a schema. Every record is validated at construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    schema: DatasetSchema,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(schema: DatasetSchema, records: Vec<Record>) -> Result<Self> {
        for (row, record) in records.iter().enumerate() {
            let verdict = validate_record(record, &schema);
            if !verdict.is_valid() {
                return Err(Error::InvalidRecord {
                    row,
                    detail: verdict.to_string(),
                });
            }
        }
        Ok(Dataset { schema, records })
    }

    pub(crate) fn from_parts(schema: DatasetSchema, records: Vec<Record>) -> Self {
        debug_assert!(records.iter().all(|r| validate_record(r, &schema).is_valid()));
        Dataset { schema, records }
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_parts(self) -> (DatasetSchema, Vec<Record>) {
        (self.schema, self.records)
    }

    /// Attribute index for `name`, or an unknown-attribute error.
    pub fn require(&self, name: &str) -> Result<usize> {
        self.schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<&CellValue>> {
        let idx = self.require(name)?;
        Ok(self.records.iter().map(|r| &r[idx]).collect())
    }

    pub fn count_missing(&self) -> usize {
        self.records
            .iter()
            .flatten()
            .filter(|c| c.is_missing())
            .count()
    }

    /// Dataset restricted to the given record indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Keeps the named attributes (plus the class, if any), in schema order.
    pub fn with_features(&self, features: &[&str]) -> Result<Dataset> {
        for f in features {
            self.require(f)?;
        }
        let class = self.schema.class_attribute();
        let keep: Vec<usize> = (0..self.schema.len())
            .filter(|&i| {
                let name = self.schema.attributes[i].name.as_str();
                Some(name) == class || features.contains(&name)
            })
            .collect();
        let schema = DatasetSchema {
            attributes: keep
                .iter()
                .map(|&i| self.schema.attributes[i].clone())
                .collect(),
            class_attribute: self.schema.class_attribute.clone(),
        };
        let records = self
            .records
            .iter()
            .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
            .collect();
        Ok(Dataset { schema, records })
    }
}
