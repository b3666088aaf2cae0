//! Seeded generator of synthetic therapy-outcome datasets with a planted
//! class rule, redundant copies and independent noise attributes.
//!
//! The data are synthetic by construction: attribute names borrow anamnesis
//! themes, distributions do not.
//!
//! Draw order per record, on one [`Stream`]:
//! 1. each relevant attribute: `below(cardinality)`;
//! 2. label noise: `unit()` then `below(2)`; when the unit draw is under the
//!    label-noise rate the class moves to the `below(2)`-th other class;
//! 3. each redundant attribute: `unit()` then `below(cardinality)`; the
//!    second draw replaces the source value when the first is under the
//!    resample rate;
//! 4. each noise attribute: `below(cardinality)`;
//! 5. when health flags are enabled, one `unit()` per flag (set when under
//!    the flag rate);
//! 6. for every generated non-class attribute in column order: `unit()`,
//!    missing when under that attribute's missing rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::schema::{AttributeDescriptor, CellValue, Dataset, DatasetSchema, FlagSet, Record};

pub const CLASS_ATTRIBUTE: &str = "outcome";
pub const CLASS_LABELS: [&str; 3] = ["C", "I", "S"];
pub const HEALTH_ATTRIBUTE: &str = "health_problems";
pub const HEALTH_FLAGS: [&str; 5] = [
    "serious_illness",
    "psychological_trauma",
    "surgery",
    "accidents",
    "other",
];
pub const CASE_ID_ATTRIBUTE: &str = "case_id";

const THEMES: [&str; 20] = [
    "family_receptivity",
    "speech_onset",
    "sibling_order",
    "hearing_screen",
    "motor_development",
    "kindergarten",
    "parent_education",
    "home_language",
    "sleep_quality",
    "feeding_history",
    "screen_time",
    "birth_term",
    "pacifier_use",
    "sport_activity",
    "reading_at_home",
    "bilingual_home",
    "prior_therapy",
    "residence",
    "sibling_speech",
    "music_lessons",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAttribute<T> {
    Same(T),
    Each(Vec<T>),
}

impl<T: Copy> PerAttribute<T> {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<T>> {
        match self {
            PerAttribute::Same(v) => Ok(vec![*v; n]),
            PerAttribute::Each(vs) if vs.len() == n => Ok(vs.clone()),
            PerAttribute::Each(vs) => Err(Error::Parameter(format!(
                "{what} lists {} values, expected {n}",
                vs.len()
            ))),
        }
    }
}

/// Deterministic mapping from relevant-attribute value indices to a class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassRule {
    /// Sum of relevant value indices: below `cuts[0]` is S, below `cuts[1]`
    /// is I, otherwise C.
    SumThreshold { cuts: [u32; 2] },
    /// Explicit table keyed by comma-joined value indices, e.g. `"0,2,1"`.
    Lookup { table: BTreeMap<String, String> },
}

impl ClassRule {
    /// Class index into [`CLASS_LABELS`].
    pub fn apply(&self, values: &[u32]) -> usize {
        match self {
            ClassRule::SumThreshold { cuts } => {
                let score: u32 = values.iter().sum();
                if score < cuts[0] {
                    2
                } else if score < cuts[1] {
                    1
                } else {
                    0
                }
            }
            ClassRule::Lookup { table } => {
                let label = &table[&lookup_key(values)];
                CLASS_LABELS
                    .iter()
                    .position(|l| l == label)
                    .expect("validated label")
            }
        }
    }

    fn validate(&self, cards: &[u32]) -> Result<()> {
        match self {
            ClassRule::SumThreshold { cuts } => {
                if cuts[0] > cuts[1] {
                    return Err(Error::Parameter("rule cuts must be non-decreasing".into()));
                }
            }
            ClassRule::Lookup { table } => {
                let mut total = 1usize;
                for &c in cards {
                    total = total.saturating_mul(c as usize);
                }
                if table.len() != total {
                    return Err(Error::Parameter(format!(
                        "lookup rule has {} entries, the relevant value space has {total}",
                        table.len()
                    )));
                }
                for (key, label) in table {
                    let parts: Vec<Option<u32>> =
                        key.split(',').map(|p| p.trim().parse().ok()).collect();
                    let valid = parts.len() == cards.len()
                        && parts.iter().zip(cards).all(|(p, &c)| p.is_some_and(|v| v < c));
                    if !valid {
                        return Err(Error::Parameter(format!("bad lookup key `{key}`")));
                    }
                    if !CLASS_LABELS.contains(&label.as_str()) {
                        return Err(Error::Parameter(format!("bad lookup class `{label}`")));
                    }
                }
                // Keys must be written canonically to be found by `apply`.
                let mut values = vec![0u32; cards.len()];
                loop {
                    if !table.contains_key(&lookup_key(&values)) {
                        return Err(Error::Parameter(format!(
                            "lookup rule misses `{}`",
                            lookup_key(&values)
                        )));
                    }
                    let mut pos = 0;
                    loop {
                        if pos == values.len() {
                            return Ok(());
                        }
                        values[pos] += 1;
                        if values[pos] < cards[pos] {
                            break;
                        }
                        values[pos] = 0;
                        pos += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

fn lookup_key(values: &[u32]) -> String {
    values
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn default_rule() -> ClassRule {
    ClassRule::SumThreshold { cuts: [2, 4] }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_records: usize,
    pub n_relevant: usize,
    #[serde(default)]
    pub n_redundant: usize,
    /// Probability that a redundant cell is re-drawn instead of copied.
    #[serde(default)]
    pub redundancy_noise: f64,
    #[serde(default)]
    pub n_noise: usize,
    /// One value, or one per relevant then noise attribute. Redundant
    /// attributes inherit their source's cardinality.
    pub cardinality: PerAttribute<u32>,
    #[serde(default = "default_rule")]
    pub rule: ClassRule,
    #[serde(default)]
    pub label_noise: f64,
    /// One value, or one per generated non-class attribute in column order.
    #[serde(default = "no_missing")]
    pub missing_rate: PerAttribute<f64>,
    /// Adds a coded-flag `health_problems` noise field with this per-flag rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub health_flag_rate: Option<f64>,
    /// Adds a leading `case_id` key column.
    #[serde(default)]
    pub case_id: bool,
    pub seed: u64,
}

fn no_missing() -> PerAttribute<f64> {
    PerAttribute::Same(0.0)
}

fn check_rate(name: &str, r: f64) -> Result<()> {
    if (0.0..1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must lie in [0, 1), got {r}")))
    }
}

struct Layout {
    relevant_cards: Vec<u32>,
    noise_cards: Vec<u32>,
    missing: Vec<f64>,
}

impl GeneratorSpec {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    fn generated_columns(&self) -> usize {
        self.n_relevant + self.n_redundant + self.n_noise + usize::from(self.health_flag_rate.is_some())
    }

    fn layout(&self) -> Result<Layout> {
        if self.n_records == 0 {
            return Err(Error::Parameter("n_records must be positive".into()));
        }
        if self.n_relevant == 0 {
            return Err(Error::Parameter("n_relevant must be positive".into()));
        }
        check_rate("redundancy_noise", self.redundancy_noise)?;
        check_rate("label_noise", self.label_noise)?;
        if let Some(r) = self.health_flag_rate {
            check_rate("health_flag_rate", r)?;
        }
        let cards = self
            .cardinality
            .expand(self.n_relevant + self.n_noise, "cardinality")?;
        if let Some(c) = cards.iter().find(|&&c| c < 2) {
            return Err(Error::Parameter(format!("cardinality {c} is below 2")));
        }
        let missing = self
            .missing_rate
            .expand(self.generated_columns(), "missing_rate")?;
        for &m in &missing {
            check_rate("missing_rate", m)?;
        }
        let (relevant_cards, noise_cards) = cards.split_at(self.n_relevant);
        self.rule.validate(relevant_cards)?;
        Ok(Layout {
            relevant_cards: relevant_cards.to_vec(),
            noise_cards: noise_cards.to_vec(),
            missing,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.layout().map(|_| ())
    }
}

fn theme_name(i: usize) -> String {
    let base = THEMES[i % THEMES.len()];
    match i / THEMES.len() {
        0 => base.to_string(),
        round => format!("{base}_{}", round + 1),
    }
}

fn value_label(v: u32) -> String {
    format!("v{v}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedundantAttribute {
    pub name: String,
    pub source: String,
    pub resample_rate: f64,
}

/// Which attribute plays which role, and the rule that produced the labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub synthetic: bool,
    pub note: String,
    pub seed: u64,
    pub n_records: usize,
    pub class_attribute: String,
    pub relevant: Vec<String>,
    pub redundant: Vec<RedundantAttribute>,
    pub noise: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coded_noise: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub rule: ClassRule,
    pub label_noise: f64,
    pub bayes_error: f64,
}

impl GroundTruth {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Lowest achievable 0/1 error: a deterministic rule with labels moved to a
/// uniformly chosen wrong class at rate `rho` gives `1 - max(1 - rho, rho / 2)`,
/// which is `rho` whenever `rho <= 2/3`. Missing-value injection is not
/// accounted for.
pub fn bayes_error(spec: &GeneratorSpec) -> f64 {
    let rho = spec.label_noise;
    1.0 - (1.0 - rho).max(rho / 2.0)
}

pub fn generate_dataset(spec: &GeneratorSpec) -> Result<(Dataset, GroundTruth)> {
    let layout = spec.layout()?;
    let mut theme = 0usize;
    let mut next_name = || {
        let n = theme_name(theme);
        theme += 1;
        n
    };
    let relevant: Vec<String> = (0..spec.n_relevant).map(|_| next_name()).collect();
    let redundant: Vec<String> = (0..spec.n_redundant).map(|_| next_name()).collect();
    let noise: Vec<String> = (0..spec.n_noise).map(|_| next_name()).collect();
    let source_of = |j: usize| j % spec.n_relevant;

    let categorical = |name: &str, card: u32| {
        AttributeDescriptor::categorical(name, (0..card).map(value_label))
    };
    let mut attributes = Vec::new();
    if spec.case_id {
        attributes.push(AttributeDescriptor::categorical(
            CASE_ID_ATTRIBUTE,
            (1..=spec.n_records).map(|i| format!("case{i:05}")),
        )?);
    }
    for (name, &c) in relevant.iter().zip(&layout.relevant_cards) {
        attributes.push(categorical(name, c)?);
    }
    for (j, name) in redundant.iter().enumerate() {
        attributes.push(categorical(name, layout.relevant_cards[source_of(j)])?);
    }
    for (name, &c) in noise.iter().zip(&layout.noise_cards) {
        attributes.push(categorical(name, c)?);
    }
    if spec.health_flag_rate.is_some() {
        attributes.push(AttributeDescriptor::coded_flag(HEALTH_ATTRIBUTE, HEALTH_FLAGS)?);
    }
    attributes.push(AttributeDescriptor::class_label(CLASS_ATTRIBUTE, CLASS_LABELS)?);
    let schema = DatasetSchema::new(attributes, Some(CLASS_ATTRIBUTE.to_string()))?;

    let mut stream = Stream::new(spec.seed);
    let mut records: Vec<Record> = Vec::with_capacity(spec.n_records);
    for r in 0..spec.n_records {
        let rel: Vec<u32> = layout
            .relevant_cards
            .iter()
            .map(|&c| stream.below(c as u64) as u32)
            .collect();
        let mut class = spec.rule.apply(&rel);
        let (u, pick) = (stream.unit(), stream.below(2) as usize);
        if u < spec.label_noise {
            let others: Vec<usize> = (0..CLASS_LABELS.len()).filter(|&c| c != class).collect();
            class = others[pick];
        }
        let red: Vec<u32> = (0..spec.n_redundant)
            .map(|j| {
                let src = source_of(j);
                let (u, v) = (
                    stream.unit(),
                    stream.below(layout.relevant_cards[src] as u64) as u32,
                );
                if u < spec.redundancy_noise {
                    v
                } else {
                    rel[src]
                }
            })
            .collect();
        let noi: Vec<u32> = layout
            .noise_cards
            .iter()
            .map(|&c| stream.below(c as u64) as u32)
            .collect();
        let health: Option<FlagSet> = spec.health_flag_rate.map(|rate| {
            HEALTH_FLAGS
                .iter()
                .filter(|_| stream.unit() < rate)
                .map(|f| f.to_string())
                .collect()
        });

        let mut generated: Vec<CellValue> = rel
            .iter()
            .chain(&red)
            .chain(&noi)
            .map(|&v| CellValue::Category(value_label(v)))
            .collect();
        if let Some(flags) = health {
            generated.push(CellValue::FlagSet(flags));
        }
        for (cell, &rate) in generated.iter_mut().zip(&layout.missing) {
            if stream.unit() < rate {
                *cell = CellValue::Missing;
            }
        }

        let mut record = Vec::with_capacity(schema.len());
        if spec.case_id {
            record.push(CellValue::Category(format!("case{:05}", r + 1)));
        }
        record.extend(generated);
        record.push(CellValue::category(CLASS_LABELS[class]));
        records.push(record);
    }

    let truth = GroundTruth {
        synthetic: true,
        note: "synthetic data with a planted rule; distributions are not clinical".into(),
        seed: spec.seed,
        n_records: spec.n_records,
        class_attribute: CLASS_ATTRIBUTE.into(),
        redundant: redundant
            .iter()
            .enumerate()
            .map(|(j, name)| RedundantAttribute {
                name: name.clone(),
                source: relevant[source_of(j)].clone(),
                resample_rate: spec.redundancy_noise,
            })
            .collect(),
        relevant,
        noise,
        coded_noise: spec.health_flag_rate.map(|_| HEALTH_ATTRIBUTE.to_string()),
        key: spec.case_id.then(|| CASE_ID_ATTRIBUTE.to_string()),
        rule: spec.rule.clone(),
        label_noise: spec.label_noise,
        bayes_error: bayes_error(spec),
    };
    Ok((Dataset::new(schema, records)?, truth))
}

/// Class predicted by the planted rule from a record's relevant attributes;
/// `None` when one of them is missing.
pub fn rule_prediction(ds: &Dataset, truth: &GroundTruth, record: &[CellValue]) -> Option<&'static str> {
    let values = truth
        .relevant
        .iter()
        .map(|name| {
            let idx = ds.schema().index_of(name)?;
            let value = record[idx].as_category()?;
            ds.schema().attributes()[idx]
                .domain_index(value)
                .map(|v| v as u32)
        })
        .collect::<Option<Vec<u32>>>()?;
    Some(CLASS_LABELS[truth.rule.apply(&values)])
}
