//! Dataset schema, CSV ingestion and export, and a synthetic generator with
//! the drug → replicate structure of the wedge-assay data.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::error::{CsvError, Error, Result};
use crate::model::{Dataset, FeatureVector, Observation, RiskClass};
use crate::rng::{stream_rng, Stream};

pub const DRUG_COLUMN: &str = "drug";
pub const REPLICATE_COLUMN: &str = "replicate";
pub const RISK_COLUMN: &str = "risk";

/// The fifteen assay-derived predictors, in canonical order.
pub const FEATURE_COLUMNS: [&str; 15] = [
    "tdp_score",
    "jt",
    "jtp",
    "jtp_ratio",
    "qs_2000",
    "qs_500",
    "qs_ratio_500",
    "qte",
    "qte_ratio",
    "qt_qs_ratio",
    "tpe_qt_ratio",
    "tpe_qt_ratio_alt",
    "tpe",
    "tpe_ratio",
    "ead_score",
];

/// Which predictor columns end up in the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FeatureSelection {
    #[default]
    All,
    Named(Vec<String>),
}

impl FeatureSelection {
    /// Parses `all` or a comma-separated list of schema column names.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("all") {
            return Ok(Self::All);
        }
        let names: Vec<String> = spec
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::Config("empty feature list".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !FEATURE_COLUMNS.contains(&name.as_str()) {
                return Err(CsvError::UnknownFeature(name.clone()).into());
            }
            if !seen.insert(name) {
                return Err(Error::Config(format!("feature `{name}` listed twice")));
            }
        }
        Ok(Self::Named(names))
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            Self::All => FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            Self::Named(names) => names.clone(),
        }
    }
}

/// A row read for prediction; the label is optional there.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub drug_id: String,
    pub replicate: u32,
    pub features: FeatureVector,
    pub label: Option<RiskClass>,
}

/// Reads a labelled dataset with the full schema header and keeps all
/// fifteen predictors.
pub fn load_csv<R: Read>(source: R) -> Result<Dataset> {
    load_csv_with(source, &FeatureSelection::All)
}

/// Reads a labelled dataset with the full schema header, keeping the
/// selected predictors.
pub fn load_csv_with<R: Read>(source: R, selection: &FeatureSelection) -> Result<Dataset> {
    let names = selection.names();
    let records = parse(source, &names, true, true)?;
    let observations = records
        .into_iter()
        .map(|r| Observation {
            drug_id: r.drug_id,
            replicate: r.replicate,
            features: r.features,
            label: r.label.expect("label required"),
        })
        .collect();
    Dataset::new(names, observations)
}

/// Reads rows for prediction: `drug`, `replicate` and the given feature
/// columns must be present, `risk` is optional, other columns are ignored.
pub fn load_records<R: Read>(source: R, features: &[String]) -> Result<Vec<Record>> {
    parse(source, features, false, false)
}

fn parse<R: Read>(
    source: R,
    features: &[String],
    strict_schema: bool,
    label_required: bool,
) -> Result<Vec<Record>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| CsvError::Malformed(e.to_string()))?
        .clone();
    if header.iter().all(str::is_empty) {
        return Err(CsvError::Malformed("missing header row".into()).into());
    }

    let mut columns: HashMap<&str, usize> = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        if columns.insert(name, i).is_some() {
            return Err(CsvError::DuplicateColumn(name.to_string()).into());
        }
    }
    let known: HashSet<&str> = [DRUG_COLUMN, REPLICATE_COLUMN, RISK_COLUMN]
        .into_iter()
        .chain(FEATURE_COLUMNS)
        .collect();
    if strict_schema {
        if let Some(extra) = header.iter().find(|h| !known.contains(h)) {
            return Err(CsvError::UnknownColumn(extra.to_string()).into());
        }
    }
    let mut required: Vec<&str> = vec![DRUG_COLUMN, REPLICATE_COLUMN];
    if label_required {
        required.push(RISK_COLUMN);
    }
    if strict_schema {
        required.extend(FEATURE_COLUMNS);
    } else {
        required.extend(features.iter().map(String::as_str));
    }
    if let Some(missing) = required.iter().find(|c| !columns.contains_key(*c)) {
        return Err(CsvError::MissingColumn(missing.to_string()).into());
    }
    for f in features {
        if !columns.contains_key(f.as_str()) {
            return Err(CsvError::MissingColumn(f.clone()).into());
        }
    }

    let drug_col = columns[DRUG_COLUMN];
    let rep_col = columns[REPLICATE_COLUMN];
    let risk_col = columns.get(RISK_COLUMN).copied();
    let feature_cols: Vec<usize> = features.iter().map(|f| columns[f.as_str()]).collect();

    let mut records = Vec::new();
    let mut keys = HashSet::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result.map_err(|e| CsvError::Malformed(format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(CsvError::FieldCount {
                row,
                expected: header.len(),
                found: record.len(),
            }
            .into());
        }
        let cell = |col: usize| -> std::result::Result<&str, CsvError> {
            let value = &record[col];
            if value.is_empty() {
                Err(CsvError::EmptyCell {
                    row,
                    column: header[col].to_string(),
                })
            } else {
                Ok(value)
            }
        };

        let drug_id = cell(drug_col)?.to_string();
        let rep_text = cell(rep_col)?;
        let replicate = match rep_text.parse::<u32>() {
            Ok(r) if r > 0 => r,
            _ => {
                return Err(CsvError::InvalidReplicate {
                    row,
                    value: rep_text.to_string(),
                }
                .into())
            }
        };
        let label = match risk_col {
            Some(col) if label_required || !record[col].is_empty() => {
                let text = cell(col)?;
                Some(
                    text.parse::<RiskClass>()
                        .map_err(|_| CsvError::UnknownLabel {
                            row,
                            value: text.to_string(),
                        })?,
                )
            }
            _ => None,
        };
        let mut values = Vec::with_capacity(feature_cols.len());
        for &col in &feature_cols {
            let text = cell(col)?;
            let value = text.parse::<f64>().map_err(|_| CsvError::InvalidNumber {
                row,
                column: header[col].to_string(),
                value: text.to_string(),
            })?;
            if !value.is_finite() {
                return Err(CsvError::NonFiniteNumber {
                    row,
                    column: header[col].to_string(),
                    value: text.to_string(),
                }
                .into());
            }
            values.push(value);
        }
        if !keys.insert((drug_id.clone(), replicate)) {
            return Err(CsvError::DuplicateObservation {
                row,
                drug: drug_id,
                replicate,
            }
            .into());
        }
        records.push(Record {
            drug_id,
            replicate,
            features: FeatureVector::new(values)?,
            label,
        });
    }
    if records.is_empty() {
        return Err(CsvError::EmptyDataset.into());
    }
    Ok(records)
}

/// Shortest decimal text that parses back to exactly `value`.
pub fn format_number(value: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(value).to_string()
}

/// Writes `drug,replicate,risk,<features...>` with LF line endings.
pub fn write_csv<W: Write>(data: &Dataset, sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let io = |e: csv::Error| CsvError::Malformed(e.to_string());
    let mut header = vec![DRUG_COLUMN, REPLICATE_COLUMN, RISK_COLUMN];
    header.extend(data.feature_names().iter().map(String::as_str));
    writer.write_record(&header).map_err(io)?;
    for obs in data.observations() {
        let mut row = vec![
            obs.drug_id.clone(),
            obs.replicate.to_string(),
            obs.label.to_string(),
        ];
        row.extend(obs.features.iter().map(|&v| format_number(v)));
        writer.write_record(&row).map_err(io)?;
    }
    writer
        .flush()
        .map_err(|e| CsvError::Malformed(e.to_string()))?;
    Ok(())
}

/// Parameters of the synthetic generator.
///
/// Each class has a latent mean at `class_separation * c * loading_j` with
/// `c = -1, 0, +1` for L, M, H. Drug means scatter around their class mean
/// with standard deviation `drug_spread`, replicates around their drug mean
/// with `replicate_noise`. Latent values are mapped to assay-like scales.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    /// Drug counts per class, ordered (high, medium, low).
    pub class_drug_counts: (usize, usize, usize),
    pub replicates_per_drug: usize,
    pub class_separation: f64,
    pub drug_spread: f64,
    pub replicate_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            class_drug_counts: (8, 11, 9),
            replicates_per_drug: 4,
            class_separation: 1.0,
            drug_spread: 1.0,
            replicate_noise: 0.3,
            seed: 0,
        }
    }
}

/// Per-feature (loading, offset, scale). Offsets and scales put intervals
/// in milliseconds and ratios near one.
const FEATURE_PROFILE: [(f64, f64, f64); 15] = [
    (1.00, 2.0, 1.5),    // tdp_score
    (0.80, 210.0, 20.0), // jt
    (0.90, 160.0, 15.0), // jtp
    (0.70, 1.05, 0.05),  // jtp_ratio
    (0.20, 62.0, 5.0),   // qs_2000
    (0.30, 48.0, 4.0),   // qs_500
    (0.40, 1.02, 0.03),  // qs_ratio_500
    (0.85, 300.0, 25.0), // qte
    (1.00, 1.08, 0.06),  // qte_ratio
    (0.60, 5.5, 0.4),    // qt_qs_ratio
    (0.75, 0.22, 0.03),  // tpe_qt_ratio
    (0.70, 0.23, 0.03),  // tpe_qt_ratio_alt
    (0.65, 65.0, 8.0),   // tpe
    (0.55, 1.10, 0.10),  // tpe_ratio
    (0.90, 0.5, 0.8),    // ead_score
];

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (h, m, l) = self.class_drug_counts;
        if h == 0 || m == 0 || l == 0 {
            return Err(Error::Config("every class needs at least one drug".into()));
        }
        if self.replicates_per_drug == 0 {
            return Err(Error::Config("replicates_per_drug must be positive".into()));
        }
        for (name, v) in [
            ("class_separation", self.class_separation),
            ("drug_spread", self.drug_spread),
            ("replicate_noise", self.replicate_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

pub fn synthesize_dataset(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let (high, medium, low) = config.class_drug_counts;
    let total = high + medium + low;
    let width = total.to_string().len().max(2);
    let mut rng = stream_rng(config.seed, Stream::Synthesis, &[]);
    let drug_noise =
        Normal::new(0.0, config.drug_spread).map_err(|e| Error::Config(e.to_string()))?;
    let rep_noise =
        Normal::new(0.0, config.replicate_noise).map_err(|e| Error::Config(e.to_string()))?;

    let classes = std::iter::repeat_n(RiskClass::H, high)
        .chain(std::iter::repeat_n(RiskClass::M, medium))
        .chain(std::iter::repeat_n(RiskClass::L, low));
    let mut observations = Vec::with_capacity(total * config.replicates_per_drug);
    for (d, class) in classes.enumerate() {
        let direction = class.index() as f64 - 1.0;
        let drug_mean: Vec<f64> = FEATURE_PROFILE
            .iter()
            .map(|(loading, _, _)| {
                config.class_separation * direction * loading + drug_noise.sample(&mut rng)
            })
            .collect();
        let drug_id = format!("drug_{:0width$}", d + 1);
        for r in 0..config.replicates_per_drug {
            let values = drug_mean
                .iter()
                .zip(FEATURE_PROFILE)
                .map(|(mean, (_, offset, scale))| {
                    offset + scale * (mean + rep_noise.sample(&mut rng))
                })
                .collect();
            observations.push(Observation {
                drug_id: drug_id.clone(),
                replicate: r as u32 + 1,
                features: FeatureVector::new(values)?,
                label: class,
            });
        }
    }
    Dataset::new(
        FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        observations,
    )
}

/// Randomly permutes the labels across observations, destroying any link
/// between features and class while keeping the class counts.
pub fn permute_labels(data: &Dataset, seed: u64) -> Result<Dataset> {
    let mut labels = data.labels();
    labels.shuffle(&mut stream_rng(seed, Stream::LabelShuffle, &[]));
    data.with_labels(&labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let mut h = vec!["drug", "replicate", "risk"];
        h.extend(FEATURE_COLUMNS);
        h.join(",")
    }

    fn row(drug: &str, rep: u32, risk: &str, base: f64) -> String {
        let mut cells = vec![drug.to_string(), rep.to_string(), risk.to_string()];
        cells.extend((0..15).map(|j| format!("{}", base + j as f64 * 0.5)));
        cells.join(",")
    }

    fn file(rows: &[String]) -> String {
        let mut s = header();
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    #[test]
    fn loads_well_formed_rows() {
        let text = file(&[
            row("a", 1, "high", 1.0),
            row("a", 2, "H", 1.1),
            row("b", 1, "Intermediate", 2.0),
            row("c", 1, "low", 3.0),
        ]);
        let data = load_csv(text.as_bytes()).unwrap();
        assert_eq!(data.len(), 4);
        assert_eq!(data.num_features(), 15);
        assert_eq!(data.class_counts(), [1, 1, 2]);
        assert_eq!(data.observations()[2].features[1], 2.5);
    }

    #[test]
    fn header_order_and_crlf_do_not_matter() {
        let mut cols: Vec<&str> = vec!["risk", "replicate", "drug"];
        cols.extend(FEATURE_COLUMNS.iter().rev());
        let mut values: Vec<String> = vec!["M".into(), "3".into(), "x".into()];
        values.extend((0..15).rev().map(|j| j.to_string()));
        let text = format!("{}\r\n{}\r\n", cols.join(","), values.join(","));
        let data = load_csv(text.as_bytes()).unwrap();
        let obs = &data.observations()[0];
        assert_eq!(obs.replicate, 3);
        assert_eq!(obs.features[0], 0.0);
        assert_eq!(obs.features[14], 14.0);
    }

    #[test]
    fn header_only_is_an_empty_dataset() {
        let err = load_csv(format!("{}\n", header()).as_bytes()).unwrap_err();
        assert_eq!(err, Error::Csv(CsvError::EmptyDataset));
    }

    #[test]
    fn bad_number_cites_row_and_column() {
        let mut rows: Vec<String> = (1..=8).map(|r| row("d", r, "L", 1.0)).collect();
        rows[6] = rows[6].replacen(&format!(",{},", 1.0 + 7.0 * 0.5), ",N/A,", 1);
        let err = load_csv(file(&rows).as_bytes()).unwrap_err();
        assert_eq!(
            err,
            Error::Csv(CsvError::InvalidNumber {
                row: 7,
                column: "qte".into(),
                value: "N/A".into()
            })
        );
        assert!(err.to_string().contains("row 7"));
        assert!(err.to_string().contains("qte"));
    }

    #[test]
    fn each_diagnostic_is_distinct() {
        let good = row("a", 1, "L", 1.0);
        let cases: Vec<(String, CsvError)> = vec![
            (
                file(std::slice::from_ref(&good)).replacen(",ead_score", "", 1),
                CsvError::MissingColumn("ead_score".into()),
            ),
            (
                file(std::slice::from_ref(&good)).replacen("tdp_score", "jt", 1),
                CsvError::DuplicateColumn("jt".into()),
            ),
            (
                file(std::slice::from_ref(&good)).replacen("tdp_score", "bogus", 1),
                CsvError::UnknownColumn("bogus".into()),
            ),
            (
                file(&[row("a", 1, "moderate", 1.0)]),
                CsvError::UnknownLabel {
                    row: 1,
                    value: "moderate".into(),
                },
            ),
            (
                file(&[good.clone(), good.clone()]),
                CsvError::DuplicateObservation {
                    row: 2,
                    drug: "a".into(),
                    replicate: 1,
                },
            ),
            (
                file(&[good.replacen("a,1,L,1,", "a,1,L,,", 1)]),
                CsvError::EmptyCell {
                    row: 1,
                    column: "tdp_score".into(),
                },
            ),
            (
                file(&[good.replacen("a,1,L,1,", "a,1,L,NaN,", 1)]),
                CsvError::NonFiniteNumber {
                    row: 1,
                    column: "tdp_score".into(),
                    value: "NaN".into(),
                },
            ),
            (
                file(&[good.replacen("a,1,", "a,0,", 1)]),
                CsvError::InvalidReplicate {
                    row: 1,
                    value: "0".into(),
                },
            ),
            (
                file(&[format!("{good},extra")]),
                CsvError::FieldCount {
                    row: 1,
                    expected: 18,
                    found: 19,
                },
            ),
        ];
        for (text, expected) in cases {
            assert_eq!(load_csv(text.as_bytes()).unwrap_err(), Error::Csv(expected));
        }
    }

    #[test]
    fn feature_selection() {
        let text = file(&[
            row("a", 1, "L", 1.0),
            row("b", 1, "M", 2.0),
            row("c", 1, "H", 3.0),
        ]);
        let sel = FeatureSelection::parse("qte_ratio, jtp").unwrap();
        let data = load_csv_with(text.as_bytes(), &sel).unwrap();
        assert_eq!(data.feature_names(), ["qte_ratio", "jtp"]);
        assert_eq!(data.observations()[0].features.as_slice(), [5.0, 2.0]);
        assert_eq!(
            FeatureSelection::parse("ALL").unwrap(),
            FeatureSelection::All
        );
        assert!(FeatureSelection::parse("qt").is_err());
        assert!(FeatureSelection::parse("jt,jt").is_err());
    }

    #[test]
    fn records_allow_missing_labels() {
        let mut text = String::from("drug,replicate,qte,notes\n");
        text.push_str("x,1,301.5,first\ny,2,290,\n");
        let recs = load_records(text.as_bytes(), &["qte".to_string()]).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].features.as_slice(), [290.0]);
        assert_eq!(recs[0].label, None);
    }

    #[test]
    fn synthetic_defaults_match_table_shape() {
        let data = synthesize_dataset(&SynthConfig::default()).unwrap();
        assert_eq!(data.len(), 112);
        assert_eq!(data.num_features(), 15);
        assert_eq!(data.class_counts(), [36, 44, 32]);
        assert_eq!(data.drugs().len(), 28);
        assert_eq!(data.observations()[0].drug_id, "drug_01");
        for drug in data.drugs() {
            let reps: Vec<_> = data
                .observations()
                .iter()
                .filter(|o| o.drug_id == drug)
                .collect();
            assert_eq!(reps.len(), 4);
            assert!(reps.iter().all(|o| o.label == reps[0].label));
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let config = SynthConfig {
            seed: 11,
            ..SynthConfig::default()
        };
        assert_eq!(
            synthesize_dataset(&config).unwrap(),
            synthesize_dataset(&config).unwrap()
        );
        let other = SynthConfig {
            seed: 12,
            ..SynthConfig::default()
        };
        assert_ne!(
            synthesize_dataset(&config).unwrap(),
            synthesize_dataset(&other).unwrap()
        );
    }

    #[test]
    fn synth_write_load_is_lossless() {
        let data = synthesize_dataset(&SynthConfig {
            seed: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        let back = load_csv(buf.as_slice()).unwrap();
        assert_eq!(back, data);
        let mut again = Vec::new();
        write_csv(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn permuted_labels_keep_counts() {
        let data = synthesize_dataset(&SynthConfig::default()).unwrap();
        let shuffled = permute_labels(&data, 5).unwrap();
        assert_eq!(shuffled.class_counts(), data.class_counts());
        assert_ne!(shuffled.labels(), data.labels());
    }
}
