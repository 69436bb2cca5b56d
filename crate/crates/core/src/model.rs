//! Domain types shared by every stage: schema, records, equivalence-class
//! tables, initial regions and the pipeline configuration.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// One categorical quasi-identifier and its ordered response categories.
#[derive(Debug, Clone)]
pub struct Attribute {
    name: String,
    domain: Vec<String>,
    index: HashMap<String, u32>,
}

impl Attribute {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn category_index(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }
}

/// Categorical quasi-identifiers that define equivalence classes. The
/// geographic identifier is named but never part of a class key: it is the
/// attribute that regionalization generalizes.
#[derive(Debug, Clone)]
pub struct QuasiIdentifierSchema {
    attributes: Vec<Attribute>,
    geographic_attribute: String,
}

impl QuasiIdentifierSchema {
    pub fn new(
        attributes: Vec<(String, Vec<String>)>,
        geographic_attribute: impl Into<String>,
    ) -> Result<Self> {
        let geographic_attribute = geographic_attribute.into();
        if attributes.is_empty() {
            return Err(Error::Schema(
                "at least one quasi-identifier is required".into(),
            ));
        }
        let mut names = HashSet::new();
        let mut out = Vec::with_capacity(attributes.len());
        for (name, domain) in attributes {
            if name.is_empty() {
                return Err(Error::Schema("attribute names must be non-empty".into()));
            }
            if !names.insert(name.clone()) {
                return Err(Error::Schema(format!("duplicate attribute {name:?}")));
            }
            if name == geographic_attribute {
                return Err(Error::Schema(format!(
                    "geographic attribute {name:?} cannot also be a categorical quasi-identifier"
                )));
            }
            if domain.is_empty() {
                return Err(Error::Schema(format!(
                    "attribute {name:?} has an empty domain"
                )));
            }
            let mut index = HashMap::with_capacity(domain.len());
            for (i, label) in domain.iter().enumerate() {
                if index.insert(label.clone(), i as u32).is_some() {
                    return Err(Error::Schema(format!(
                        "attribute {name:?} lists category {label:?} twice"
                    )));
                }
            }
            out.push(Attribute {
                name,
                domain,
                index,
            });
        }
        Ok(Self {
            attributes: out,
            geographic_attribute,
        })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn geographic_attribute(&self) -> &str {
        &self.geographic_attribute
    }

    /// Encode one record's labels as a class key.
    pub fn encode<S: AsRef<str>>(&self, record_id: &str, values: &[S]) -> Result<ClassKey> {
        if values.len() != self.arity() {
            return Err(Error::Invalid(format!(
                "record {record_id}: expected {} quasi-identifier values, found {}",
                self.arity(),
                values.len()
            )));
        }
        let key = self
            .attributes
            .iter()
            .zip(values)
            .map(|(attr, value)| {
                attr.category_index(value.as_ref())
                    .ok_or_else(|| Error::DomainViolation {
                        record_id: record_id.to_string(),
                        attribute: attr.name.clone(),
                        value: value.as_ref().to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ClassKey(key.into_boxed_slice()))
    }

    /// Labels of a key produced by [`encode`](Self::encode).
    pub fn decode(&self, key: &ClassKey) -> Vec<&str> {
        self.attributes
            .iter()
            .zip(key.0.iter())
            .map(|(attr, &i)| attr.domain[i as usize].as_str())
            .collect()
    }
}

/// One microdata row as read from input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub record_id: String,
    pub region_id: String,
    pub values: Vec<String>,
}

/// Equivalence class key: one category index per quasi-identifier, in schema
/// order. Ordering is lexicographic over the category indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassKey(Box<[u32]>);

impl ClassKey {
    pub fn new(indices: impl Into<Box<[u32]>>) -> Self {
        ClassKey(indices.into())
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for ClassKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Multiset of class keys. No entry ever holds a zero count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassTable {
    entries: BTreeMap<ClassKey, u64>,
    total: u64,
}

impl ClassTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: ClassKey, count: u64) {
        if count == 0 {
            return;
        }
        *self.entries.entry(key).or_insert(0) += count;
        self.total += count;
    }

    pub fn absorb(&mut self, other: &ClassTable) {
        for (key, &count) in &other.entries {
            match self.entries.get_mut(key) {
                Some(c) => *c += count,
                None => {
                    self.entries.insert(key.clone(), count);
                }
            }
        }
        self.total += other.total;
    }

    pub fn get(&self, key: &ClassKey) -> u64 {
        self.entries.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct classes.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClassKey, u64)> {
        self.entries.iter().map(|(k, &c)| (k, c))
    }

    /// Smallest class cardinality, i.e. the table's k-anonymity level.
    pub fn min_cardinality(&self) -> Option<u64> {
        self.entries.values().copied().min()
    }

    /// Keys whose cardinality equals `cardinality`, in key order.
    pub fn keys_with_cardinality(&self, cardinality: u64) -> Vec<&ClassKey> {
        self.entries
            .iter()
            .filter(|(_, &c)| c == cardinality)
            .map(|(k, _)| k)
            .collect()
    }
}

impl FromIterator<ClassKey> for ClassTable {
    fn from_iter<I: IntoIterator<Item = ClassKey>>(iter: I) -> Self {
        let mut table = ClassTable::new();
        for key in iter {
            table.add(key, 1);
        }
        table
    }
}

/// Count records per equivalence class.
pub fn build_class_table(records: &[Record], schema: &QuasiIdentifierSchema) -> Result<ClassTable> {
    let mut table = ClassTable::new();
    for record in records {
        table.add(schema.encode(&record.record_id, &record.values)?, 1);
    }
    Ok(table)
}

/// Sum tables key-wise.
pub fn merge_tables<'a, I>(tables: I) -> ClassTable
where
    I: IntoIterator<Item = &'a ClassTable>,
{
    let mut merged = ClassTable::new();
    for table in tables {
        merged.absorb(table);
    }
    merged
}

/// Fine-granularity input region represented by a single point.
#[derive(Debug, Clone)]
pub struct InitialRegion {
    pub region_id: String,
    pub location: Point,
    pub stratum: String,
    pub population: u64,
    pub class_table: ClassTable,
}

/// Region row as declared in a regions file, before records are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub region_id: String,
    pub location: Point,
    pub stratum: String,
    pub population: Option<u64>,
}

/// Validated input: schema, regions with their class tables, and records
/// with pre-encoded keys.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: QuasiIdentifierSchema,
    regions: Vec<InitialRegion>,
    records: Vec<Record>,
    record_region: Vec<usize>,
    record_keys: Vec<ClassKey>,
}

impl Dataset {
    /// Attach records to regions. A region's declared population, when
    /// present, must equal the number of records that reference it.
    pub fn assemble(
        schema: QuasiIdentifierSchema,
        region_specs: Vec<RegionSpec>,
        records: Vec<Record>,
    ) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(region_specs.len());
        for (i, spec) in region_specs.iter().enumerate() {
            if !spec.location.is_finite() {
                return Err(Error::Invalid(format!(
                    "region {}: coordinates must be finite",
                    spec.region_id
                )));
            }
            if by_id.insert(spec.region_id.as_str(), i).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate region id {:?}",
                    spec.region_id
                )));
            }
        }

        let mut tables = vec![ClassTable::new(); region_specs.len()];
        let mut record_region = Vec::with_capacity(records.len());
        let mut record_keys = Vec::with_capacity(records.len());
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if !seen.insert(record.record_id.as_str()) {
                return Err(Error::Invalid(format!(
                    "duplicate record id {:?}",
                    record.record_id
                )));
            }
            let region =
                *by_id
                    .get(record.region_id.as_str())
                    .ok_or_else(|| Error::UnknownRegion {
                        record_id: record.record_id.clone(),
                        region_id: record.region_id.clone(),
                    })?;
            let key = schema.encode(&record.record_id, &record.values)?;
            tables[region].add(key.clone(), 1);
            record_region.push(region);
            record_keys.push(key);
        }

        let regions = region_specs
            .into_iter()
            .zip(tables)
            .map(|(spec, class_table)| {
                if let Some(declared) = spec.population {
                    if declared != class_table.total() {
                        return Err(Error::Invalid(format!(
                            "region {}: declared population {declared} but {} records reference it",
                            spec.region_id,
                            class_table.total()
                        )));
                    }
                }
                Ok(InitialRegion {
                    population: class_table.total(),
                    region_id: spec.region_id,
                    location: spec.location,
                    stratum: spec.stratum,
                    class_table,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            schema,
            regions,
            records,
            record_region,
            record_keys,
        })
    }

    pub fn schema(&self) -> &QuasiIdentifierSchema {
        &self.schema
    }

    pub fn regions(&self) -> &[InitialRegion] {
        &self.regions
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Index into [`regions`](Self::regions) of each record's home region.
    pub fn record_regions(&self) -> &[usize] {
        &self.record_region
    }

    pub fn record_keys(&self) -> &[ClassKey] {
        &self.record_keys
    }

    pub fn total_population(&self) -> u64 {
        self.regions.iter().map(|r| r.population).sum()
    }

    pub fn region_points(&self) -> Vec<Point> {
        self.regions.iter().map(|r| r.location).collect()
    }

    /// Class table of the whole data set over the categorical attributes.
    pub fn overall_table(&self) -> ClassTable {
        merge_tables(self.regions.iter().map(|r| &r.class_table))
    }
}

/// Power-law GAPS cutoff model: `cutoff = multiplier * value^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapsModel {
    pub multiplier: f64,
    pub exponent: f64,
}

impl GapsModel {
    pub fn new(multiplier: f64, exponent: f64) -> Result<Self> {
        if !(multiplier.is_finite() && multiplier > 0.0) {
            return Err(Error::Config(format!(
                "GAPS multiplier must be positive, got {multiplier}"
            )));
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::Config(format!(
                "GAPS exponent must be positive, got {exponent}"
            )));
        }
        Ok(Self {
            multiplier,
            exponent,
        })
    }
}

/// Regional cutoff models. The entropy and max-combinations variants share
/// the same constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapsPreset {
    Western,
    Central,
    Eastern,
}

impl GapsPreset {
    pub fn model(self) -> GapsModel {
        match self {
            GapsPreset::Western => GapsModel {
                multiplier: 1588.0,
                exponent: 0.42,
            },
            GapsPreset::Central => GapsModel {
                multiplier: 1436.0,
                exponent: 0.43,
            },
            GapsPreset::Eastern => GapsModel {
                multiplier: 1978.0,
                exponent: 0.304,
            },
        }
    }
}

impl FromStr for GapsPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "western" => Ok(GapsPreset::Western),
            "central" => Ok(GapsPreset::Central),
            "eastern" => Ok(GapsPreset::Eastern),
            _ => Err(Error::Config(format!("unknown GAPS preset {s:?}"))),
        }
    }
}

impl fmt::Display for GapsPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapsPreset::Western => "western",
            GapsPreset::Central => "central",
            GapsPreset::Eastern => "eastern",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SiteCountApproach {
    Entropy,
    MaxCombs,
    Fixed(usize),
}

impl FromStr for SiteCountApproach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Self::Entropy),
            "maxcombs" => Ok(Self::MaxCombs),
            _ => {
                let n = s
                    .strip_prefix("fixed:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "site count must be entropy, maxcombs or fixed:<n>, got {s:?}"
                        ))
                    })?;
                Ok(Self::Fixed(n))
            }
        }
    }
}

impl fmt::Display for SiteCountApproach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Entropy => f.write_str("entropy"),
            Self::MaxCombs => f.write_str("maxcombs"),
            Self::Fixed(n) => write!(f, "fixed:{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementApproach {
    Balanced,
    Adc,
}

impl FromStr for PlacementApproach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "adc" => Ok(Self::Adc),
            _ => Err(Error::Config(format!(
                "placement must be balanced or adc, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdcSeed {
    Balanced,
    Random,
}

impl FromStr for AdcSeed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "random" => Ok(Self::Random),
            _ => Err(Error::Config(format!(
                "ADC seed must be balanced or random, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LogBase {
    E,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::E => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" => Ok(Self::E),
            "2" => Ok(Self::Two),
            "10" => Ok(Self::Ten),
            _ => Err(Error::Config(format!(
                "log base must be e, 2 or 10, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::E => "e",
            LogBase::Two => "2",
            LogBase::Ten => "10",
        })
    }
}

macro_rules! string_serde {
    ($($ty:ty),*) => {$(
        impl TryFrom<String> for $ty {
            type Error = Error;
            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }
        impl From<$ty> for String {
            fn from(v: $ty) -> String {
                v.to_string()
            }
        }
    )*};
}

string_serde!(SiteCountApproach, LogBase);

pub const DEFAULT_MAX_MOVES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: u64,
    pub site_count: SiteCountApproach,
    pub placement: PlacementApproach,
    pub adc_seed: AdcSeed,
    pub gaps_model: GapsModel,
    pub log_base: LogBase,
    pub rng_seed: u64,
    pub max_moves: usize,
    pub classical_discernibility: bool,
}

impl PipelineConfig {
    pub fn new(k: u64) -> Self {
        Self {
            k,
            site_count: SiteCountApproach::Entropy,
            placement: PlacementApproach::Balanced,
            adc_seed: AdcSeed::Balanced,
            gaps_model: GapsPreset::Western.model(),
            log_base: LogBase::E,
            rng_seed: 0,
            max_moves: DEFAULT_MAX_MOVES,
            classical_discernibility: false,
        }
    }

    pub fn validate(&self, region_count: usize) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        GapsModel::new(self.gaps_model.multiplier, self.gaps_model.exponent)?;
        if let SiteCountApproach::Fixed(n) = self.site_count {
            if n < 1 || n > region_count {
                return Err(Error::Config(format!(
                    "fixed site count {n} must lie in [1, {region_count}]"
                )));
            }
        }
        Ok(())
    }
}
