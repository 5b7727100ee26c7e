//! CSV ingestion into typed flow records.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::schema::{FeatureKind, FeatureSchema, LabelScheme, LabelTarget};

#[derive(Clone, Debug, PartialEq)]
pub enum RawValue {
    /// Always finite.
    Number(f64),
    Text(String),
    Missing,
}

impl RawValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            RawValue::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            RawValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Number(x) => write!(f, "{x}"),
            RawValue::Text(s) => f.write_str(s),
            RawValue::Missing => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowRecord {
    /// Aligned with the schema's feature list.
    pub values: Vec<RawValue>,
    pub label: usize,
    /// Zero-based data row in the source file (header excluded).
    pub source_row: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub records: Vec<FlowRecord>,
    pub schema_id: String,
    pub split: Split,
    pub label_scheme: LabelScheme,
    /// Rows removed because the label scheme marks their label as dropped.
    pub dropped: usize,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record count per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_scheme.n_classes()];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    /// Per-class counts as a printable table.
    pub fn count_table(&self) -> String {
        let names = self.label_scheme.class_names();
        let width = names.iter().map(|n| n.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<10} {:<width$} {:>10}\n", "Dataset", "Class", self.split);
        for (name, n) in names.iter().zip(self.class_counts()) {
            out.push_str(&format!(
                "{:<10} {:<width$} {:>10}\n",
                self.schema_id, name, n
            ));
        }
        out.push_str(&format!(
            "{:<10} {:<width$} {:>10}\n",
            "",
            "total",
            self.len()
        ));
        if self.dropped > 0 {
            out.push_str(&format!(
                "{:<10} {:<width$} {:>10}\n",
                "", "dropped", self.dropped
            ));
        }
        out
    }
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    scheme: &LabelScheme,
    split: Split,
) -> Result<Dataset> {
    load_dataset_with(path, schema, scheme, split, Parallelism::default())
}

pub fn load_dataset_with(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    scheme: &LabelScheme,
    split: Split,
    par: Parallelism,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema, scheme, split, par)
}

/// Column index of every feature and of the label within a CSV row.
struct ColumnMap {
    features: Vec<usize>,
    label: usize,
    arity: usize,
}

impl ColumnMap {
    fn headerless(schema: &FeatureSchema) -> Self {
        let n = schema.features.len();
        ColumnMap {
            features: (0..n).collect(),
            label: n,
            arity: schema.headerless_arity(),
        }
    }

    fn from_header(schema: &FeatureSchema, header: &csv::StringRecord) -> Result<Self> {
        let names: Vec<String> = header
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        let find = |want: &str| {
            let want = want.to_ascii_lowercase();
            names
                .iter()
                .position(|h| *h == want)
                .ok_or_else(|| Error::Header(format!("missing column `{want}`")))
        };
        let features = schema
            .features
            .iter()
            .map(|f| find(&f.name))
            .collect::<Result<Vec<_>>>()?;
        let label = find(&schema.label_column)?;
        for h in &names {
            let known = schema
                .features
                .iter()
                .map(|f| f.name.as_str())
                .chain(std::iter::once(schema.label_column.as_str()))
                .chain(schema.excluded_columns.iter().map(String::as_str))
                .any(|k| k.eq_ignore_ascii_case(h));
            if !known {
                return Err(Error::Header(format!(
                    "column `{h}` is neither a feature, the label, nor excluded"
                )));
            }
        }
        Ok(ColumnMap {
            features,
            label,
            arity: names.len(),
        })
    }
}

/// Parses a CSV stream. Rows are converted in parallel when `par` allows;
/// record order always follows file order. On row errors the earliest one
/// is returned.
pub fn read_dataset<R: Read>(
    reader: R,
    schema: &FeatureSchema,
    scheme: &LabelScheme,
    split: Split,
    par: Parallelism,
) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?);
    }
    let mut warnings = Vec::new();

    let columns = if schema.has_header {
        if rows.is_empty() {
            None
        } else {
            let header = rows.remove(0);
            Some(ColumnMap::from_header(schema, &header)?)
        }
    } else {
        Some(ColumnMap::headerless(schema))
    };
    if rows.is_empty() {
        warnings.push("input contains no data rows".to_string());
    }

    let parsed = match &columns {
        Some(cols) => par.map_indexed(&rows, |i, row| parse_row(i, row, cols, schema, scheme)),
        None => Vec::new(),
    };

    let mut records = Vec::with_capacity(parsed.len());
    let mut dropped = 0;
    for r in parsed {
        match r? {
            Some(rec) => records.push(rec),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        warnings.push(format!("{dropped} rows dropped by the label scheme"));
    }
    Ok(Dataset {
        records,
        schema_id: schema.dataset_id.clone(),
        split,
        label_scheme: scheme.clone(),
        dropped,
        warnings,
    })
}

fn parse_row(
    row_idx: usize,
    row: &csv::StringRecord,
    cols: &ColumnMap,
    schema: &FeatureSchema,
    scheme: &LabelScheme,
) -> Result<Option<FlowRecord>> {
    if row.len() != cols.arity {
        return Err(Error::Arity {
            row: row_idx,
            expected: cols.arity,
            found: row.len(),
        });
    }
    let raw_label = &row[cols.label];
    let label = match scheme.resolve(raw_label) {
        Some(LabelTarget::Class(c)) => c,
        Some(LabelTarget::Dropped) => return Ok(None),
        None => {
            return Err(Error::UnknownLabel {
                row: row_idx,
                label: raw_label.to_string(),
            })
        }
    };
    let values = schema
        .features
        .iter()
        .zip(&cols.features)
        .map(|(f, &c)| {
            let cell = &row[c];
            match f.kind {
                FeatureKind::Categorical => Ok(RawValue::Text(cell.to_string())),
                FeatureKind::Continuous if cell.is_empty() => Ok(RawValue::Missing),
                FeatureKind::Continuous => match cell.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(RawValue::Number(x)),
                    _ => Err(Error::Value {
                        row: row_idx,
                        column: f.name.clone(),
                        value: cell.to_string(),
                    }),
                },
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(FlowRecord {
        values,
        label,
        source_row: row_idx,
    }))
}

/// Splits a training dataset into `(remainder, holdout)` where the holdout
/// takes `floor(fraction * n_k)` records of each class `k`.
///
/// Each class is shuffled independently with a ChaCha8 stream keyed by
/// `(seed, class index)`; both parts keep file order.
pub fn stratified_holdout(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if ds.split != Split::Train {
        return Err(Error::SplitHygiene(ds.split.to_string()));
    }
    let n_classes = ds.label_scheme.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, r) in ds.records.iter().enumerate() {
        by_class[r.label].push(i);
    }

    let mut in_holdout = vec![false; ds.records.len()];
    let mut warnings = ds.warnings.clone();
    for (class, members) in by_class.iter_mut().enumerate() {
        let take = holdout_size(members.len(), fraction);
        if take == 0 {
            warnings.push(format!(
                "class `{}` ({} records) contributes no holdout records",
                ds.label_scheme.class_names()[class],
                members.len()
            ));
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, class));
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            in_holdout[i] = true;
        }
    }

    let part = |want: bool| Dataset {
        records: ds
            .records
            .iter()
            .zip(&in_holdout)
            .filter(|(_, &h)| h == want)
            .map(|(r, _)| r.clone())
            .collect(),
        schema_id: ds.schema_id.clone(),
        split: Split::Train,
        label_scheme: ds.label_scheme.clone(),
        dropped: 0,
        warnings: warnings.clone(),
    };
    Ok((part(false), part(true)))
}

fn holdout_size(n: usize, fraction: f64) -> usize {
    // the small offset keeps products like 0.29 * 100 from flooring to 28
    ((n as f64) * fraction + 1e-9).floor() as usize
}

fn class_seed(seed: u64, class: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ (class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{builtin_schema, Feature, LabelMode, NSLKDD, UNSWNB15};

    fn tiny_schema(has_header: bool) -> FeatureSchema {
        FeatureSchema {
            dataset_id: "tiny".into(),
            has_header,
            label_column: "label".into(),
            excluded_columns: vec!["difficulty".into()],
            features: vec![
                Feature {
                    name: "a".into(),
                    kind: FeatureKind::Continuous,
                },
                Feature {
                    name: "proto".into(),
                    kind: FeatureKind::Categorical,
                },
            ],
        }
    }

    fn nsl_binary() -> LabelScheme {
        LabelScheme::builtin(NSLKDD, LabelMode::Binary).unwrap()
    }

    fn read(csv: &str, schema: &FeatureSchema, scheme: &LabelScheme) -> Result<Dataset> {
        read_dataset(
            csv.as_bytes(),
            schema,
            scheme,
            Split::Train,
            Parallelism::default(),
        )
    }

    #[test]
    fn headerless_rows() {
        let ds = read(
            "1.5,tcp,normal,20\n,udp,neptune,3\n2,,smurf,1\n",
            &tiny_schema(false),
            &nsl_binary(),
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[0].values[0], RawValue::Number(1.5));
        assert_eq!(ds.records[1].values[0], RawValue::Missing);
        assert_eq!(ds.records[2].values[1], RawValue::Text(String::new()));
        assert_eq!(ds.class_counts(), vec![1, 2]);
        assert_eq!(ds.records[2].source_row, 2);
    }

    #[test]
    fn header_rows_matched_by_name() {
        let ds = read(
            "difficulty,label,proto,a\n7,normal,tcp,4\n",
            &tiny_schema(true),
            &nsl_binary(),
        )
        .unwrap();
        assert_eq!(
            ds.records[0].values,
            [RawValue::Number(4.0), RawValue::Text("tcp".into())]
        );
        assert_eq!(ds.records[0].source_row, 0);
    }

    #[test]
    fn header_with_unknown_column() {
        let err = read("a,proto,label,mystery\n", &tiny_schema(true), &nsl_binary()).unwrap_err();
        assert!(matches!(err, Error::Header(_)), "{err}");
    }

    #[test]
    fn arity_error() {
        let err = read(
            "1,tcp,normal,20\n1,tcp,normal\n",
            &tiny_schema(false),
            &nsl_binary(),
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                Error::Arity {
                    row: 1,
                    expected: 4,
                    found: 3
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn value_error() {
        for bad in ["abc", "NaN", "inf"] {
            let csv = format!("{bad},tcp,normal,20\n");
            let err = read(&csv, &tiny_schema(false), &nsl_binary()).unwrap_err();
            assert!(matches!(err, Error::Value { row: 0, .. }), "{err}");
        }
    }

    #[test]
    fn unknown_label_in_multi_mode() {
        let scheme = LabelScheme::builtin(NSLKDD, LabelMode::MultiClass).unwrap();
        let err = read("1,tcp,no_such_attack,20\n", &tiny_schema(false), &scheme).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { row: 0, .. }));
    }

    #[test]
    fn empty_file_is_vacuous() {
        let ds = read("", &tiny_schema(false), &nsl_binary()).unwrap();
        assert!(ds.is_empty());
        assert!(!ds.warnings.is_empty());
        let unsw = builtin_schema(UNSWNB15).unwrap();
        let scheme = LabelScheme::builtin(UNSWNB15, LabelMode::MultiClass).unwrap();
        let ds = read("", &unsw, &scheme).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn unsw_multi_drops_unselected_categories() {
        let schema = FeatureSchema {
            dataset_id: UNSWNB15.into(),
            has_header: true,
            label_column: "attack_cat".into(),
            excluded_columns: vec!["id".into(), "label".into()],
            features: tiny_schema(true).features,
        };
        let scheme = LabelScheme::builtin(UNSWNB15, LabelMode::MultiClass).unwrap();
        let ds = read(
            "id,a,proto,attack_cat,label\n1,0.1,tcp,Normal,0\n2,0.2,-,Generic,1\n3,0.3,udp,Worms,1\n",
            &schema,
            &scheme,
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dropped, 1);
        assert_eq!(ds.class_counts(), vec![1, 0, 0, 0, 1]);
        assert_eq!(ds.records[1].source_row, 2);
    }

    fn synthetic(counts: &[usize]) -> Dataset {
        let names: Vec<String> = (0..counts.len()).map(|i| format!("c{i}")).collect();
        let scheme = LabelScheme::new(
            LabelMode::MultiClass,
            names.clone(),
            names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), LabelTarget::Class(i))),
            None,
        )
        .unwrap();
        let mut records = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                records.push(FlowRecord {
                    values: vec![RawValue::Number(records.len() as f64)],
                    label: c,
                    source_row: records.len(),
                });
            }
        }
        Dataset {
            records,
            schema_id: "synthetic".into(),
            split: Split::Train,
            label_scheme: scheme,
            dropped: 0,
            warnings: vec![],
        }
    }

    #[test]
    fn holdout_sizes_floor() {
        let ds = synthetic(&[67343, 995, 11656, 45927, 52]);
        let (rest, val) = stratified_holdout(&ds, 0.1, 42).unwrap();
        assert_eq!(val.class_counts(), vec![6734, 99, 1165, 4592, 5]);
        assert_eq!(rest.len() + val.len(), ds.len());
    }

    #[test]
    fn holdout_small_class_warns() {
        let ds = synthetic(&[9]);
        let (rest, val) = stratified_holdout(&ds, 0.1, 42).unwrap();
        assert_eq!(val.len(), 0);
        assert_eq!(rest.len(), 9);
        assert!(val.warnings.iter().any(|w| w.contains("no holdout")));
    }

    #[test]
    fn holdout_is_deterministic() {
        let ds = synthetic(&[500, 300]);
        let a = stratified_holdout(&ds, 0.2, 7).unwrap().1;
        let b = stratified_holdout(&ds, 0.2, 7).unwrap().1;
        let c = stratified_holdout(&ds, 0.2, 8).unwrap().1;
        let rows = |d: &Dataset| d.records.iter().map(|r| r.source_row).collect::<Vec<_>>();
        assert_eq!(rows(&a), rows(&b));
        assert_ne!(rows(&a), rows(&c));
    }

    #[test]
    fn holdout_rejects_bad_fraction_and_test_split() {
        let mut ds = synthetic(&[10]);
        for f in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                stratified_holdout(&ds, f, 1),
                Err(Error::Config(_))
            ));
        }
        ds.split = Split::Test;
        assert!(matches!(
            stratified_holdout(&ds, 0.1, 1),
            Err(Error::SplitHygiene(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn holdout_partitions_input(
                counts in prop::collection::vec(1usize..200, 1..5),
                fraction in 0.01f64..0.99,
                seed in any::<u64>(),
            ) {
                let ds = synthetic(&counts);
                let (rest, val) = stratified_holdout(&ds, fraction, seed).unwrap();
                let mut rows: Vec<usize> = rest.records.iter()
                    .chain(&val.records)
                    .map(|r| r.source_row)
                    .collect();
                rows.sort_unstable();
                prop_assert_eq!(rows, (0..ds.len()).collect::<Vec<_>>());
                for (k, (&n, &v)) in counts.iter().zip(&val.class_counts()).enumerate() {
                    let expected = n as f64 * fraction;
                    prop_assert!((v as f64 - expected).abs() < 1.0, "class {} n={} v={}", k, n, v);
                }
            }
        }
    }
}
