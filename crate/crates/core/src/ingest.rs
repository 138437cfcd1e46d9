//! Schema-driven loading of delimited text, feature encoding, and the
//! canonical dataset CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::train_size;
use crate::types::{Dataset, Group, GroupNames};

pub const SCHEMA_VERSION: u32 = 1;
pub const LABEL_COLUMN: &str = "label";
pub const GROUP_COLUMN: &str = "group";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn contains(&self, value: &str) -> bool {
        match self {
            OneOrMany::One(v) => v == value,
            OneOrMany::Many(vs) => vs.iter().any(|v| v == value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub column: String,
    /// Raw value(s) mapped to a positive label.
    pub positive: OneOrMany,
}

/// Group binding. Exactly one of `reference` (values forming group a) or
/// `protected` (values forming group b) is given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<OneOrMany>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected: Option<OneOrMany>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<GroupNames>,
}

impl GroupSpec {
    fn assign(&self, value: &str) -> Group {
        match (&self.reference, &self.protected) {
            (Some(r), _) if r.contains(value) => Group::A,
            (Some(_), _) => Group::B,
            (None, Some(p)) if p.contains(value) => Group::B,
            _ => Group::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Fixed category set; inferred from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    DropRow,
    /// Numeric: column mean; categorical: most frequent value.
    MeanImpute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingSpec {
    #[serde(default = "default_missing_tokens")]
    pub tokens: Vec<String>,
    #[serde(default)]
    pub policy: MissingPolicy,
}

fn default_missing_tokens() -> Vec<String> {
    vec![String::new(), "?".into(), "NA".into()]
}

impl Default for MissingSpec {
    fn default() -> Self {
        Self {
            tokens: default_missing_tokens(),
            policy: MissingPolicy::DropRow,
        }
    }
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_true() -> bool {
    true
}

/// Versioned description of a delimited dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Data file, relative to the schema file's directory unless absolute.
    pub path: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Column names; required when the file has no header row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    pub label: LabelSpec,
    pub group: GroupSpec,
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub missing: MissingSpec,
    #[serde(default = "default_true")]
    pub trim: bool,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

impl DatasetSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut schema = Self::from_json(&text)?;
        schema.base_dir = path.parent().map(Path::to_path_buf);
        Ok(schema)
    }

    pub fn data_path(&self) -> PathBuf {
        match &self.base_dir {
            Some(dir) if self.path.is_relative() => dir.join(&self.path),
            _ => self.path.clone(),
        }
    }

    fn delimiter_byte(&self) -> Result<u8> {
        match self.delimiter.as_bytes() {
            [b] => Ok(*b),
            _ => Err(Error::Schema(format!("delimiter `{}` must be one byte", self.delimiter))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        self.delimiter_byte()?;
        if !self.has_header && self.columns.is_none() {
            return Err(Error::Schema("`columns` is required when has_header is false".into()));
        }
        if self.group.reference.is_some() == self.group.protected.is_some() {
            return Err(Error::Schema("give exactly one of group.reference or group.protected".into()));
        }
        if self.label.column == self.group.column {
            return Err(Error::Schema("label and group columns must differ".into()));
        }
        if self.features.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if f.name == self.label.column || f.name == self.group.column {
                return Err(Error::Schema(format!("`{}` cannot be both a feature and the label/group", f.name)));
            }
            if !seen.insert(&f.name) {
                return Err(Error::Schema(format!("feature `{}` listed twice", f.name)));
            }
            match (&f.kind, &f.categories) {
                (FeatureKind::Numeric, Some(_)) => {
                    return Err(Error::Schema(format!("numeric feature `{}` has categories", f.name)))
                }
                (FeatureKind::Categorical, Some(c)) if c.is_empty() => {
                    return Err(Error::Schema(format!("feature `{}` has an empty category list", f.name)))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// How one source feature maps to encoded columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodedFeature {
    Numeric { name: String },
    /// `categories[0]` is the dropped reference level.
    Categorical { name: String, categories: Vec<String> },
}

impl EncodedFeature {
    fn width(&self) -> usize {
        match self {
            EncodedFeature::Numeric { .. } => 1,
            EncodedFeature::Categorical { categories, .. } => categories.len() - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub features: Vec<EncodedFeature>,
}

impl FeatureEncoding {
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.features {
            match f {
                EncodedFeature::Numeric { name } => out.push(name.clone()),
                EncodedFeature::Categorical { name, categories } => {
                    out.extend(categories[1..].iter().map(|c| format!("{name}={c}")))
                }
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.features.iter().map(EncodedFeature::width).sum()
    }

    /// Source values of one encoded row.
    pub fn decode(&self, row: ArrayView1<'_, f64>) -> Result<Vec<String>> {
        if row.len() != self.width() {
            return Err(Error::DimensionMismatch { expected: self.width(), got: row.len() });
        }
        let mut out = Vec::with_capacity(self.features.len());
        let mut col = 0;
        for f in &self.features {
            match f {
                EncodedFeature::Numeric { .. } => {
                    out.push(row[col].to_string());
                    col += 1;
                }
                EncodedFeature::Categorical { name, categories } => {
                    let w = categories.len() - 1;
                    let block = row.slice(ndarray::s![col..col + w]);
                    if block.iter().any(|&v| v != 0.0 && v != 1.0) {
                        return Err(Error::Format(format!("`{name}` indicators are not 0/1")));
                    }
                    let hot: Vec<usize> = (0..w).filter(|&j| block[j] == 1.0).collect();
                    match hot.as_slice() {
                        [] => out.push(categories[0].clone()),
                        [j] => out.push(categories[j + 1].clone()),
                        _ => return Err(Error::Format(format!("`{name}` has several active indicators"))),
                    }
                    col += w;
                }
            }
        }
        Ok(out)
    }
}

/// A loaded dataset with its encoding and row accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub encoding: FeatureEncoding,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

pub fn load_csv(schema: &DatasetSchema) -> Result<Dataset> {
    load(schema).map(|l| l.dataset)
}

pub fn load(schema: &DatasetSchema) -> Result<LoadedDataset> {
    let path = schema.data_path();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    load_from_reader(schema, file)
}

pub fn load_from_reader<R: Read>(schema: &DatasetSchema, reader: R) -> Result<LoadedDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .has_headers(schema.has_header)
        .trim(if schema.trim { csv::Trim::All } else { csv::Trim::None })
        .from_reader(reader);
    let header: Vec<String> = match &schema.columns {
        Some(cols) => cols.clone(),
        None => rdr.headers()?.iter().map(str::to_string).collect(),
    };
    let locate = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let label_col = locate(&schema.label.column)?;
    let group_col = locate(&schema.group.column)?;
    let feature_cols: Vec<usize> = schema.features.iter().map(|f| locate(&f.name)).collect::<Result<_>>()?;
    let is_missing = |v: &str| schema.missing.tokens.iter().any(|t| t == v);

    // raw cells per kept row; None marks a missing feature value to impute
    let mut rows: Vec<(usize, Vec<Option<String>>, bool, Group)> = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        rows_read += 1;
        let line = i + 1 + usize::from(schema.has_header);
        if record.len() != header.len() {
            return Err(Error::Format(format!(
                "line {line}: {} fields, expected {}",
                record.len(),
                header.len()
            )));
        }
        let label = &record[label_col];
        let group = &record[group_col];
        let cells: Vec<Option<String>> = feature_cols
            .iter()
            .map(|&c| (!is_missing(&record[c])).then(|| record[c].to_string()))
            .collect();
        let any_missing = cells.iter().any(Option::is_none);
        if is_missing(label) || is_missing(group) || (any_missing && schema.missing.policy == MissingPolicy::DropRow) {
            rows_dropped += 1;
            continue;
        }
        rows.push((line, cells, schema.label.positive.contains(label), schema.group.assign(group)));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut encoding = FeatureEncoding::default();
    let mut fills: Vec<Option<String>> = Vec::with_capacity(schema.features.len());
    for (j, spec) in schema.features.iter().enumerate() {
        let observed = rows.iter().filter_map(|r| r.1[j].as_deref());
        match spec.kind {
            FeatureKind::Numeric => {
                let mut sum = 0.0;
                let mut count = 0usize;
                for (line, cells, ..) in &rows {
                    if let Some(v) = &cells[j] {
                        sum += parse_number(&spec.name, v, *line)?;
                        count += 1;
                    }
                }
                fills.push((count > 0).then(|| (sum / count as f64).to_string()));
                encoding.features.push(EncodedFeature::Numeric { name: spec.name.clone() });
            }
            FeatureKind::Categorical => {
                let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
                for v in observed {
                    *freq.entry(v).or_default() += 1;
                }
                let categories: Vec<String> = match &spec.categories {
                    Some(c) => c.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
                    None => freq.keys().map(|s| s.to_string()).collect(),
                };
                if let Some(bad) = freq.keys().find(|v| !categories.iter().any(|c| c == *v)) {
                    let line = rows.iter().find(|r| r.1[j].as_deref() == Some(bad)).map_or(0, |r| r.0);
                    return Err(Error::Unparseable { column: spec.name.clone(), value: bad.to_string(), line });
                }
                let mode = freq
                    .iter()
                    .max_by(|x, y| x.1.cmp(y.1).then_with(|| y.0.cmp(x.0)))
                    .map(|(v, _)| v.to_string());
                fills.push(mode);
                encoding.features.push(EncodedFeature::Categorical {
                    name: spec.name.clone(),
                    categories: if categories.is_empty() { vec![String::new()] } else { categories },
                });
            }
        }
    }

    let n = rows.len();
    let mut features = Array2::zeros((n, encoding.width()));
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for (r, (line, cells, label, group)) in rows.iter().enumerate() {
        let mut col = 0;
        for (j, f) in encoding.features.iter().enumerate() {
            let value = match (&cells[j], &fills[j]) {
                (Some(v), _) | (None, Some(v)) => v.as_str(),
                (None, None) => {
                    return Err(Error::Unparseable { column: schema.features[j].name.clone(), value: String::new(), line: *line })
                }
            };
            match f {
                EncodedFeature::Numeric { name } => {
                    features[[r, col]] = parse_number(name, value, *line)?;
                    col += 1;
                }
                EncodedFeature::Categorical { categories, .. } => {
                    let k = categories.iter().position(|c| c == value).expect("category checked");
                    if k > 0 {
                        features[[r, col + k - 1]] = 1.0;
                    }
                    col += categories.len() - 1;
                }
            }
        }
        labels.push(*label);
        groups.push(*group);
    }
    let mut dataset = Dataset::new(features, labels, groups, encoding.column_names())?;
    if let Some(names) = &schema.group.names {
        dataset = dataset.with_group_names(names.clone());
    }
    Ok(LoadedDataset { dataset, encoding, rows_read, rows_dropped })
}

fn parse_number(column: &str, value: &str, line: usize) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Unparseable { column: column.to_string(), value: value.to_string(), line }),
    }
}

/// Shuffle with `seed` and put the first `⌈fraction·n⌉` rows in train.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("split fraction", format!("{fraction} outside (0, 1)")));
    }
    let n = dataset.len();
    let n_train = train_size(n, fraction);
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid("split fraction", format!("{fraction} of {n} rows leaves an empty side")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((dataset.select(&order[..n_train])?, dataset.select(&order[n_train..])?))
}

/// Index of a feature column that copies the group indicator or its
/// complement exactly.
pub fn group_leak(dataset: &Dataset) -> Option<usize> {
    dataset.features().columns().into_iter().position(|col| {
        let same = col.iter().zip(dataset.groups()).all(|(&v, g)| v == g.indicator());
        let flipped = col.iter().zip(dataset.groups()).all(|(&v, g)| v == 1.0 - g.indicator());
        same || flipped
    })
}

/// Write `features…, label, group` with a header row.
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.extend([LABEL_COLUMN, GROUP_COLUMN]);
    w.write_record(&header)?;
    for (i, row) in dataset.features().rows().into_iter().enumerate() {
        let mut record: Vec<String> = row.iter().map(f64::to_string).collect();
        record.push(u8::from(dataset.labels()[i]).to_string());
        record.push(dataset.groups()[i].to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<dataset csv>", e))?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let k = header.len();
    if k < 2 || header[k - 2] != LABEL_COLUMN || header[k - 1] != GROUP_COLUMN {
        return Err(Error::Format(format!(
            "dataset header must end with `{LABEL_COLUMN},{GROUP_COLUMN}`"
        )));
    }
    let d = k - 2;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != k {
            return Err(Error::Format(format!("line {line}: {} fields, expected {k}", record.len())));
        }
        for (j, v) in record.iter().take(d).enumerate() {
            values.push(parse_number(&header[j], v, line)?);
        }
        labels.push(match &record[d] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Unparseable { column: LABEL_COLUMN.into(), value: other.into(), line })
            }
        });
        groups.push(record[d + 1].parse::<Group>().map_err(|_| Error::Unparseable {
            column: GROUP_COLUMN.into(),
            value: record[d + 1].to_string(),
            line,
        })?);
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Format(e.to_string()))?;
    Dataset::new(features, labels, groups, header[..d].to_vec())
}

pub fn write_dataset_file(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_csv(dataset, std::io::BufWriter::new(file))
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_csv(std::io::BufReader::new(file))
}
