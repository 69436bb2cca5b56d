//! File formats.
//!
//! * regions: CSV `region_id,x,y,stratum[,population]`
//! * records: CSV `record_id,region_id,<attr>...` (attribute columns in any
//!   order; written back in schema order)
//! * schema, configuration and distributions: TOML
//! * published records, region mapping, sites: CSV
//! * report and run manifest: JSON

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::{AggregatedRegion, AggregationResult, PublishedRecord};
use crate::datagen::DistributionSpec;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::metrics::{MetricsReport, StageTimings};
use crate::model::{
    AdcSeed, Dataset, GapsModel, GapsPreset, LogBase, PipelineConfig, PlacementApproach,
    QuasiIdentifierSchema, Record, RegionSpec, SiteCountApproach,
};

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

// ---------------------------------------------------------------- schema

#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    geographic_attribute: String,
    attributes: Vec<AttributeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AttributeEntry {
    name: String,
    domain: Vec<String>,
}

pub fn parse_schema(text: &str, path: &Path) -> Result<QuasiIdentifierSchema> {
    let file: SchemaFile = toml::from_str(text).map_err(|e| toml_error(path, text, &e))?;
    QuasiIdentifierSchema::new(
        file.attributes
            .into_iter()
            .map(|a| (a.name, a.domain))
            .collect(),
        file.geographic_attribute,
    )
}

pub fn read_schema(path: &Path) -> Result<QuasiIdentifierSchema> {
    parse_schema(&read_to_string(path)?, path)
}

pub fn schema_to_string(schema: &QuasiIdentifierSchema) -> String {
    let file = SchemaFile {
        geographic_attribute: schema.geographic_attribute().to_string(),
        attributes: schema
            .attributes()
            .iter()
            .map(|a| AttributeEntry {
                name: a.name().to_string(),
                domain: a.domain().to_vec(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("schema serializes")
}

fn toml_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
        .unwrap_or(0);
    parse_err(path, line, e.message().to_string())
}

// ---------------------------------------------------------------- regions

const REGION_HEADER: [&str; 4] = ["region_id", "x", "y", "stratum"];

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(path, line, e.to_string())
}

fn parse_f64(path: &Path, line: u64, column: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| {
        parse_err(
            path,
            line,
            format!("column {column}: {value:?} is not a number"),
        )
    })?;
    if !v.is_finite() {
        return Err(parse_err(
            path,
            line,
            format!("column {column}: {value:?} is not finite"),
        ));
    }
    Ok(v)
}

pub fn parse_regions<R: Read>(reader: R, path: &Path) -> Result<Vec<RegionSpec>> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let with_population = match cols.as_slice() {
        [a, b, c, d] if [*a, *b, *c, *d] == REGION_HEADER => false,
        [a, b, c, d, "population"] if [*a, *b, *c, *d] == REGION_HEADER => true,
        _ => {
            return Err(parse_err(
                path,
                1,
                format!(
                    "expected header region_id,x,y,stratum[,population], found {}",
                    cols.join(",")
                ),
            ))
        }
    };
    let width = cols.len();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != width {
            return Err(parse_err(
                path,
                line,
                format!("expected {width} fields, found {}", row.len()),
            ));
        }
        let region_id = row[0].to_string();
        if region_id.is_empty() {
            return Err(parse_err(path, line, "empty region_id"));
        }
        if !seen.insert(region_id.clone()) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate region_id {region_id:?}"),
            ));
        }
        let x = parse_f64(path, line, "x", &row[1])?;
        let y = parse_f64(path, line, "y", &row[2])?;
        let population = if with_population && !row[4].is_empty() {
            Some(row[4].parse::<u64>().map_err(|_| {
                parse_err(
                    path,
                    line,
                    format!(
                        "column population: {:?} is not a non-negative integer",
                        &row[4]
                    ),
                )
            })?)
        } else {
            None
        };
        out.push(RegionSpec {
            region_id,
            location: Point::new(x, y),
            stratum: row[3].to_string(),
            population,
        });
    }
    Ok(out)
}

pub fn read_regions(path: &Path) -> Result<Vec<RegionSpec>> {
    parse_regions(File::open(path).map_err(|e| Error::io(path, e))?, path)
}

pub fn write_regions<W: Write>(writer: W, regions: &[RegionSpec]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_population = regions.iter().any(|r| r.population.is_some());
    let mut header = REGION_HEADER.to_vec();
    if with_population {
        header.push("population");
    }
    w.write_record(&header).map_err(ser)?;
    for r in regions {
        let mut row = vec![
            r.region_id.clone(),
            r.location.x.to_string(),
            r.location.y.to_string(),
            r.stratum.clone(),
        ];
        if with_population {
            row.push(r.population.map(|p| p.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

fn ser(e: csv::Error) -> Error {
    Error::Serialize(e.to_string())
}

// ---------------------------------------------------------------- records

pub fn parse_records<R: Read>(
    reader: R,
    path: &Path,
    schema: &QuasiIdentifierSchema,
) -> Result<Vec<Record>> {
    parse_records_in(reader, path, schema, None)
}

/// Records parser; with `regions` given, references to other regions are
/// rejected at their line.
fn parse_records_in<R: Read>(
    reader: R,
    path: &Path,
    schema: &QuasiIdentifierSchema,
    regions: Option<&HashSet<&str>>,
) -> Result<Vec<Record>> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("record_id") || header.get(1) != Some("region_id") {
        return Err(parse_err(
            path,
            1,
            "header must start with record_id,region_id",
        ));
    }
    // position of every schema attribute among the columns
    let mut columns = Vec::with_capacity(schema.arity());
    for attr in schema.attributes() {
        let pos = header
            .iter()
            .skip(2)
            .position(|h| h == attr.name())
            .ok_or_else(|| {
                parse_err(
                    path,
                    1,
                    format!("missing column for attribute {:?}", attr.name()),
                )
            })?;
        columns.push(pos + 2);
    }
    if header.len() != schema.arity() + 2 {
        let extra: Vec<&str> = header
            .iter()
            .skip(2)
            .filter(|h| !schema.attributes().iter().any(|a| a.name() == *h))
            .collect();
        return Err(parse_err(
            path,
            1,
            format!("unexpected columns: {}", extra.join(",")),
        ));
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), row.len()),
            ));
        }
        if row[0].is_empty() {
            return Err(parse_err(path, line, "empty record_id"));
        }
        if !seen.insert(row[0].to_string()) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate record_id {:?}", &row[0]),
            ));
        }
        if regions.is_some_and(|r| !r.contains(&row[1])) {
            return Err(parse_err(
                path,
                line,
                format!(
                    "record {:?} references unknown region {:?}",
                    &row[0], &row[1]
                ),
            ));
        }
        let record = Record {
            record_id: row[0].to_string(),
            region_id: row[1].to_string(),
            values: columns.iter().map(|&c| row[c].to_string()).collect(),
        };
        schema
            .encode(&record.record_id, &record.values)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_records(path: &Path, schema: &QuasiIdentifierSchema) -> Result<Vec<Record>> {
    parse_records(
        File::open(path).map_err(|e| Error::io(path, e))?,
        path,
        schema,
    )
}

pub fn write_records<W: Write>(
    writer: W,
    schema: &QuasiIdentifierSchema,
    records: &[Record],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = ["record_id", "region_id"]
        .into_iter()
        .chain(schema.attributes().iter().map(|a| a.name()))
        .collect();
    w.write_record(&header).map_err(ser)?;
    for r in records {
        w.write_record(
            [&r.record_id, &r.region_id]
                .into_iter()
                .chain(r.values.iter()),
        )
        .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

/// Read and validate a regions/records/schema triple.
pub fn load_inputs(regions: &Path, records: &Path, schema: &Path) -> Result<Dataset> {
    let schema = read_schema(schema)?;
    let region_specs = read_regions(regions)?;
    let known: HashSet<&str> = region_specs.iter().map(|r| r.region_id.as_str()).collect();
    let file = File::open(records).map_err(|e| Error::io(records, e))?;
    let records = parse_records_in(file, records, &schema, Some(&known))?;
    Dataset::assemble(schema, region_specs, records)
}

// ---------------------------------------------------------------- distributions

#[derive(Debug, Deserialize)]
struct DistributionFile {
    strata: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

pub fn parse_distributions(text: &str, path: &Path) -> Result<DistributionSpec> {
    let file: DistributionFile = toml::from_str(text).map_err(|e| toml_error(path, text, &e))?;
    DistributionSpec::new(file.strata)
}

pub fn read_distributions(path: &Path) -> Result<DistributionSpec> {
    parse_distributions(&read_to_string(path)?, path)
}

// ---------------------------------------------------------------- config

/// Configuration file: every field optional so that command-line flags can
/// fill or override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub k: Option<u64>,
    pub site_count: Option<SiteCountApproach>,
    pub placement: Option<PlacementApproach>,
    pub adc_seed: Option<AdcSeed>,
    pub gaps_preset: Option<String>,
    pub gaps_multiplier: Option<f64>,
    pub gaps_exponent: Option<f64>,
    pub log_base: Option<LogBase>,
    pub seed: Option<u64>,
    pub max_moves: Option<usize>,
    pub classical_discernibility: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(path, text, &e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, path)
    }

    /// Fields set in `other` replace ours.
    pub fn overlay(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            k: other.k.or(self.k),
            site_count: other.site_count.or(self.site_count),
            placement: other.placement.or(self.placement),
            adc_seed: other.adc_seed.or(self.adc_seed),
            gaps_preset: other.gaps_preset.or(self.gaps_preset),
            gaps_multiplier: other.gaps_multiplier.or(self.gaps_multiplier),
            gaps_exponent: other.gaps_exponent.or(self.gaps_exponent),
            log_base: other.log_base.or(self.log_base),
            seed: other.seed.or(self.seed),
            max_moves: other.max_moves.or(self.max_moves),
            classical_discernibility: other
                .classical_discernibility
                .or(self.classical_discernibility),
        }
    }

    pub fn resolve(&self) -> Result<PipelineConfig> {
        let k = self
            .k
            .ok_or_else(|| Error::Config("k is required".into()))?;
        let mut cfg = PipelineConfig::new(k);
        if let Some(v) = self.site_count {
            cfg.site_count = v;
        }
        if let Some(v) = self.placement {
            cfg.placement = v;
        }
        if let Some(v) = self.adc_seed {
            cfg.adc_seed = v;
        }
        if let Some(v) = self.log_base {
            cfg.log_base = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        if let Some(v) = self.max_moves {
            cfg.max_moves = v;
        }
        if let Some(v) = self.classical_discernibility {
            cfg.classical_discernibility = v;
        }
        cfg.gaps_model = match (&self.gaps_preset, self.gaps_multiplier, self.gaps_exponent) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(Error::Config(
                    "give either a GAPS preset or an explicit multiplier/exponent, not both".into(),
                ))
            }
            (Some(p), None, None) => p.parse::<GapsPreset>()?.model(),
            (None, Some(m), Some(e)) => GapsModel::new(m, e)?,
            (None, None, None) => GapsPreset::Western.model(),
            _ => {
                return Err(Error::Config(
                    "a custom GAPS model needs both a multiplier and an exponent".into(),
                ))
            }
        };
        Ok(cfg)
    }
}

// ---------------------------------------------------------------- run outputs

pub const PUBLISHED_FILE: &str = "published.csv";
pub const MAPPING_FILE: &str = "region_mapping.csv";
pub const SITES_FILE: &str = "sites.csv";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MAP_FILE: &str = "map.svg";

/// Published records: the original region is replaced by the aggregated id.
pub fn write_published<W: Write>(
    writer: W,
    schema: &QuasiIdentifierSchema,
    published: &[PublishedRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = ["record_id", "aggregated_id"]
        .into_iter()
        .chain(schema.attributes().iter().map(|a| a.name()))
        .collect();
    w.write_record(&header).map_err(ser)?;
    for r in published {
        let id = r.aggregated_id.to_string();
        let labels = schema.decode(&r.key);
        w.write_record(
            [r.record_id.as_str(), id.as_str()]
                .into_iter()
                .chain(labels),
        )
        .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

/// Published rows as `(record_id, aggregated_id, labels)`.
pub fn read_published(
    path: &Path,
    schema: &QuasiIdentifierSchema,
) -> Result<Vec<(String, usize, Vec<String>)>> {
    let mut rdr = csv_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected: Vec<&str> = ["record_id", "aggregated_id"]
        .into_iter()
        .chain(schema.attributes().iter().map(|a| a.name()))
        .collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header {}", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != expected.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", expected.len(), row.len()),
            ));
        }
        let agg = row[1].parse().map_err(|_| {
            parse_err(
                path,
                line,
                format!("aggregated_id {:?} is not an index", &row[1]),
            )
        })?;
        out.push((
            row[0].to_string(),
            agg,
            row.iter().skip(2).map(str::to_string).collect(),
        ));
    }
    Ok(out)
}

pub fn write_mapping<W: Write>(writer: W, dataset: &Dataset, mapping: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["region_id", "aggregated_id"])
        .map_err(ser)?;
    for (region, agg) in dataset.regions().iter().zip(mapping) {
        w.write_record([region.region_id.as_str(), agg.to_string().as_str()])
            .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

pub fn read_mapping(path: &Path) -> Result<Vec<(String, usize)>> {
    let mut rdr = csv_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["region_id", "aggregated_id"] {
        return Err(parse_err(
            path,
            1,
            "expected header region_id,aggregated_id",
        ));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected 2 fields, found {}", row.len()),
            ));
        }
        let agg = row[1].parse().map_err(|_| {
            parse_err(
                path,
                line,
                format!("aggregated_id {:?} is not an index", &row[1]),
            )
        })?;
        out.push((row[0].to_string(), agg));
    }
    Ok(out)
}

pub fn write_sites<W: Write>(writer: W, sites: &[Point]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["aggregated_id", "x", "y"]).map_err(ser)?;
    for (i, s) in sites.iter().enumerate() {
        w.write_record([i.to_string(), s.x.to_string(), s.y.to_string()])
            .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

pub fn read_sites(path: &Path) -> Result<Vec<Point>> {
    let mut rdr = csv_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["aggregated_id", "x", "y"] {
        return Err(parse_err(path, 1, "expected header aggregated_id,x,y"));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 3 {
            return Err(parse_err(
                path,
                line,
                format!("expected 3 fields, found {}", row.len()),
            ));
        }
        if row[0].parse::<usize>().ok() != Some(out.len()) {
            return Err(parse_err(
                path,
                line,
                format!("sites must be numbered 0.. in order, found {:?}", &row[0]),
            ));
        }
        out.push(Point::new(
            parse_f64(path, line, "x", &row[1])?,
            parse_f64(path, line, "y", &row[2])?,
        ));
    }
    Ok(out)
}

/// Rebuild an aggregation from the files of a finished run so it can be
/// re-evaluated. Suppressed classes are recomputed from the input records
/// that are missing from the published file.
pub fn reconstruct_result(dataset: &Dataset, run_dir: &Path, k: u64) -> Result<AggregationResult> {
    let sites = read_sites(&run_dir.join(SITES_FILE))?;
    let mapping_rows = read_mapping(&run_dir.join(MAPPING_FILE))?;
    let mapping_path = run_dir.join(MAPPING_FILE);
    let by_region: BTreeMap<&str, usize> =
        mapping_rows.iter().map(|(r, a)| (r.as_str(), *a)).collect();
    let mut region_mapping = Vec::with_capacity(dataset.regions().len());
    for r in dataset.regions() {
        let agg = *by_region.get(r.region_id.as_str()).ok_or_else(|| {
            parse_err(
                &mapping_path,
                0,
                format!("region {} is missing from the mapping", r.region_id),
            )
        })?;
        if agg >= sites.len() {
            return Err(parse_err(
                &mapping_path,
                0,
                format!("region {} maps to unknown site {agg}", r.region_id),
            ));
        }
        region_mapping.push(agg);
    }

    let published_path = run_dir.join(PUBLISHED_FILE);
    let rows = read_published(&published_path, dataset.schema())?;
    let index: BTreeMap<&str, usize> = dataset
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.record_id.as_str(), i))
        .collect();
    let mut published = Vec::with_capacity(rows.len());
    let mut released = vec![false; dataset.records().len()];
    for (record_id, agg, labels) in rows {
        let i = *index
            .get(record_id.as_str())
            .ok_or_else(|| parse_err(&published_path, 0, format!("unknown record {record_id}")))?;
        let key = dataset.schema().encode(&record_id, &labels)?;
        if key != dataset.record_keys()[i] {
            return Err(parse_err(
                &published_path,
                0,
                format!("record {record_id} differs from the input"),
            ));
        }
        released[i] = true;
        published.push(PublishedRecord {
            record_id,
            aggregated_id: agg,
            key,
            source_region: dataset.record_regions()[i],
        });
    }

    let mut members = vec![Vec::new(); sites.len()];
    for (region, &agg) in region_mapping.iter().enumerate() {
        members[agg].push(region);
    }
    let regions: Vec<AggregatedRegion> = members
        .into_iter()
        .enumerate()
        .map(|(id, members)| AggregatedRegion {
            aggregated_id: id,
            site: sites[id],
            merged_table: crate::model::merge_tables(
                members.iter().map(|&m| &dataset.regions()[m].class_table),
            ),
            members,
        })
        .collect();
    let mut withheld: BTreeMap<(usize, crate::model::ClassKey), u64> = BTreeMap::new();
    for (i, _) in released.iter().enumerate().filter(|(_, r)| !**r) {
        let agg = region_mapping[dataset.record_regions()[i]];
        *withheld
            .entry((agg, dataset.record_keys()[i].clone()))
            .or_insert(0) += 1;
    }
    let suppressed = withheld
        .into_iter()
        .map(
            |((aggregated_id, key), cardinality)| crate::aggregation::SuppressedClass {
                aggregated_id,
                key,
                cardinality,
            },
        )
        .collect();

    Ok(AggregationResult {
        k,
        duplicate_sites: Vec::new(),
        sites,
        regions,
        region_mapping,
        suppressed,
        published,
        input_record_count: dataset.records().len() as u64,
    })
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedRow {
    pub aggregated_id: usize,
    pub x: f64,
    pub y: f64,
    pub member_region_ids: Vec<String>,
    pub population: u64,
    pub published: u64,
    pub suppressed: u64,
    /// Smallest merged class before suppression; null for an empty region.
    pub anonymity_level: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuppressedRow {
    pub aggregated_id: usize,
    pub class: Vec<String>,
    pub cardinality: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub k: u64,
    pub k_anonymous: bool,
    pub metrics: MetricsReport,
    pub aggregated_regions: Vec<AggregatedRow>,
    pub suppressed_classes: Vec<SuppressedRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adc: Option<crate::pipeline::AdcSummary>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(dataset: &Dataset, result: &AggregationResult, metrics: MetricsReport) -> Self {
        let mut published = vec![0u64; result.regions.len()];
        for r in &result.published {
            published[r.aggregated_id] += 1;
        }
        let aggregated_regions = result
            .regions
            .iter()
            .map(|r| AggregatedRow {
                aggregated_id: r.aggregated_id,
                x: r.site.x,
                y: r.site.y,
                member_region_ids: r
                    .members
                    .iter()
                    .map(|&m| dataset.regions()[m].region_id.clone())
                    .collect(),
                population: r.merged_table.total(),
                published: published[r.aggregated_id],
                suppressed: r.merged_table.total() - published[r.aggregated_id],
                anonymity_level: r.anonymity_level(),
            })
            .collect();
        let suppressed_classes = result
            .suppressed
            .iter()
            .map(|s| SuppressedRow {
                aggregated_id: s.aggregated_id,
                class: dataset
                    .schema()
                    .decode(&s.key)
                    .into_iter()
                    .map(str::to_string)
                    .collect(),
                cardinality: s.cardinality,
            })
            .collect();
        Self {
            k: result.k,
            k_anonymous: crate::aggregation::verify_k_anonymity(&result.published, result.k),
            metrics,
            aggregated_regions,
            suppressed_classes,
            adc: None,
            warnings: Vec::new(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<File>) -> Result<()>,
{
    let mut w = std::io::BufWriter::new(create(path)?);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation, written whether it succeeds or not.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub config: Option<PipelineConfig>,
    pub inputs: Vec<InputDigest>,
    pub timings: Option<StageTimings>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            status: "running".into(),
            ..Self::default()
        }
    }

    pub fn add_input(&mut self, path: &Path) {
        // an unreadable input fails later with a proper diagnostic
        if let Ok(sha256) = file_digest(path) {
            self.inputs.push(InputDigest {
                path: path.to_path_buf(),
                sha256,
            });
        }
    }
}
