//! Training-split statistics: per-feature z-score parameters and
//! categorical vocabularies.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exec::{Parallelism, CHUNK};
use crate::ingest::{Dataset, FlowRecord, RawValue, Split};
use crate::schema::FeatureSchema;

/// Stability constant added to every standard deviation.
pub const EPSILON: f64 = 1e-8;
pub const UNK_INDEX: u16 = 0;
/// Category string returned when decoding the UNK index.
pub const UNK_TOKEN: &str = "<UNK>";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuousStat {
    pub mu: f64,
    /// Population standard deviation.
    pub sigma: f64,
    pub epsilon: f64,
}

impl ContinuousStat {
    pub fn new(mu: f64, sigma: f64) -> Self {
        Self {
            mu,
            sigma,
            epsilon: EPSILON,
        }
    }

    /// `(x - mu) / (sigma + epsilon)` in 64-bit arithmetic.
    pub fn z(&self, x: f64) -> f64 {
        (x - self.mu) / (self.sigma + self.epsilon)
    }

    /// [`Self::z`] with a single rounding to 32-bit.
    pub fn standardize(&self, x: f64) -> f32 {
        self.z(x) as f32
    }

    pub fn invert(&self, z: f32) -> f64 {
        f64::from(z) * (self.sigma + self.epsilon) + self.mu
    }
}

/// Category → index map. Index 0 is the UNK token; categories take
/// 1..=len in the order they were first seen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    categories: Vec<String>,
    index: HashMap<String, u16>,
}

impl Vocabulary {
    /// `categories[i]` receives index `i + 1`.
    pub fn from_categories(feature: &str, categories: Vec<String>) -> Result<Self> {
        if categories.len() > usize::from(u16::MAX) {
            return Err(Error::VocabularyOverflow {
                feature: feature.to_string(),
                size: categories.len(),
            });
        }
        let mut index = HashMap::with_capacity(categories.len());
        for (i, c) in categories.iter().enumerate() {
            if index.insert(c.clone(), (i + 1) as u16).is_some() {
                return Err(Error::SchemaValidation(format!(
                    "vocabulary of `{feature}` lists `{c}` twice"
                )));
            }
        }
        Ok(Self { categories, index })
    }

    pub fn index_of(&self, category: &str) -> u16 {
        self.index.get(category).copied().unwrap_or(UNK_INDEX)
    }

    /// `None` for UNK and for out-of-range indices.
    pub fn category(&self, index: u16) -> Option<&str> {
        match index {
            UNK_INDEX => None,
            i => self.categories.get(usize::from(i) - 1).map(String::as_str),
        }
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn max_index(&self) -> u16 {
        self.categories.len() as u16
    }

    /// 1, or 2 once an index no longer fits in a byte.
    pub fn byte_width(&self) -> usize {
        if self.max_index() > 255 {
            2
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedStats {
    pub continuous: Vec<ContinuousStat>,
    pub vocabs: Vec<Vocabulary>,
    dataset_id: String,
}

impl FittedStats {
    /// Reassembles previously fitted statistics (e.g. from a manifest).
    pub fn from_parts(
        dataset_id: impl Into<String>,
        split: Split,
        continuous: Vec<ContinuousStat>,
        vocabs: Vec<Vocabulary>,
    ) -> Result<Self> {
        if split != Split::Train {
            return Err(Error::SplitHygiene(split.to_string()));
        }
        Ok(Self {
            continuous,
            vocabs,
            dataset_id: dataset_id.into(),
        })
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    /// Always [`Split::Train`].
    pub fn fitted_split(&self) -> Split {
        Split::Train
    }

    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if self.continuous.len() != schema.n_continuous()
            || self.vocabs.len() != schema.n_categorical()
        {
            return Err(Error::SchemaMismatch(format!(
                "statistics cover {} continuous / {} categorical features, schema has {} / {}",
                self.continuous.len(),
                self.vocabs.len(),
                schema.n_continuous(),
                schema.n_categorical()
            )));
        }
        Ok(())
    }
}

pub fn fit(train: &Dataset, schema: &FeatureSchema) -> Result<FittedStats> {
    fit_with(train, schema, Parallelism::default())
}

/// Fits statistics over fixed chunks of records and merges the partial
/// results in chunk order, so sequential and parallel runs agree bit for bit.
pub fn fit_with(train: &Dataset, schema: &FeatureSchema, par: Parallelism) -> Result<FittedStats> {
    if train.split != Split::Train {
        return Err(Error::SplitHygiene(train.split.to_string()));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cont = schema.continuous_positions();
    let cat = schema.categorical_positions();
    if let Some(r) = train
        .records
        .iter()
        .find(|r| r.values.len() != schema.len())
    {
        return Err(Error::SchemaMismatch(format!(
            "row {} has {} values, schema has {} features",
            r.source_row,
            r.values.len(),
            schema.len()
        )));
    }

    // pass 1: count and sum
    let partial = par.map_chunks(&train.records, CHUNK, |chunk| {
        let mut acc = vec![(0usize, 0.0f64); cont.len()];
        for r in chunk {
            for (a, &p) in acc.iter_mut().zip(&cont) {
                if let RawValue::Number(x) = r.values[p] {
                    a.0 += 1;
                    a.1 += x;
                }
            }
        }
        acc
    });
    let mut totals = vec![(0usize, 0.0f64); cont.len()];
    for chunk in &partial {
        for (t, c) in totals.iter_mut().zip(chunk) {
            t.0 += c.0;
            t.1 += c.1;
        }
    }
    let mut means = Vec::with_capacity(cont.len());
    for (&(n, sum), &p) in totals.iter().zip(&cont) {
        if n == 0 {
            return Err(Error::DegenerateFeature(schema.features[p].name.clone()));
        }
        means.push(sum / n as f64);
    }

    // pass 2: deviations about the provisional mean; their sum refines the
    // mean so a constant column recovers its value exactly
    let partial = par.map_chunks(&train.records, CHUNK, |chunk| {
        let mut acc = vec![(0.0f64, 0.0f64); cont.len()];
        for r in chunk {
            for ((a, &p), mu) in acc.iter_mut().zip(&cont).zip(&means) {
                if let RawValue::Number(x) = r.values[p] {
                    let d = x - mu;
                    a.0 += d;
                    a.1 += d * d;
                }
            }
        }
        acc
    });
    let mut dev = vec![(0.0f64, 0.0f64); cont.len()];
    for chunk in &partial {
        for (t, c) in dev.iter_mut().zip(chunk) {
            t.0 += c.0;
            t.1 += c.1;
        }
    }
    let continuous = means
        .iter()
        .zip(&dev)
        .zip(&totals)
        .map(|((&mu, &(d, dd)), &(n, _))| {
            let n = n as f64;
            let var = ((dd - d * d / n) / n).max(0.0);
            ContinuousStat::new(mu + d / n, var.sqrt())
        })
        .collect();

    // vocabularies: ordered first appearances per chunk, merged in order
    let partial = par.map_chunks(&train.records, CHUNK, |chunk| {
        let mut seen: Vec<Vec<&str>> = vec![Vec::new(); cat.len()];
        let mut sets: Vec<std::collections::HashSet<&str>> = vec![Default::default(); cat.len()];
        for r in chunk {
            for (k, &p) in cat.iter().enumerate() {
                if let RawValue::Text(s) = &r.values[p] {
                    if sets[k].insert(s) {
                        seen[k].push(s);
                    }
                }
            }
        }
        seen
    });
    let mut vocabs = Vec::with_capacity(cat.len());
    for (k, &p) in cat.iter().enumerate() {
        let mut set = std::collections::HashSet::new();
        let mut order = Vec::new();
        for chunk in &partial {
            for &s in &chunk[k] {
                if set.insert(s) {
                    order.push(s.to_string());
                }
            }
        }
        vocabs.push(Vocabulary::from_categories(
            &schema.features[p].name,
            order,
        )?);
    }

    FittedStats::from_parts(train.schema_id.clone(), Split::Train, continuous, vocabs)
}

/// Standardized continuous values and categorical indices of one record.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardized {
    pub z: Vec<f32>,
    pub idx: Vec<u16>,
}

pub fn standardize(
    record: &FlowRecord,
    stats: &FittedStats,
    schema: &FeatureSchema,
) -> Result<Standardized> {
    stats.check_schema(schema)?;
    if record.values.len() != schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "record has {} values, schema has {} features",
            record.values.len(),
            schema.len()
        )));
    }
    let mut z = Vec::with_capacity(stats.continuous.len());
    let mut idx = Vec::with_capacity(stats.vocabs.len());
    let mut cont = stats.continuous.iter();
    let mut vocabs = stats.vocabs.iter();
    for (value, feature) in record.values.iter().zip(&schema.features) {
        use crate::schema::FeatureKind::*;
        match (feature.kind, value) {
            (Continuous, RawValue::Number(x)) => z.push(cont.next().unwrap().standardize(*x)),
            // mean imputation
            (Continuous, RawValue::Missing) => {
                cont.next();
                z.push(0.0);
            }
            (Categorical, RawValue::Text(s)) => idx.push(vocabs.next().unwrap().index_of(s)),
            (Categorical, RawValue::Missing) => {
                vocabs.next();
                idx.push(UNK_INDEX);
            }
            (kind, v) => {
                return Err(Error::SchemaMismatch(format!(
                    "feature `{}` is {kind:?} but holds {v:?}",
                    feature.name
                )))
            }
        }
    }
    Ok(Standardized { z, idx })
}

/// Inverse of [`standardize`]: values in schema order. Index 0 decodes to
/// [`UNK_TOKEN`].
pub fn destandardize(
    z: &[f32],
    idx: &[u16],
    stats: &FittedStats,
    schema: &FeatureSchema,
) -> Result<Vec<RawValue>> {
    stats.check_schema(schema)?;
    if z.len() != stats.continuous.len() || idx.len() != stats.vocabs.len() {
        return Err(Error::SchemaMismatch(format!(
            "got {} continuous / {} categorical values, statistics have {} / {}",
            z.len(),
            idx.len(),
            stats.continuous.len(),
            stats.vocabs.len()
        )));
    }
    let mut z = z.iter().zip(&stats.continuous);
    let mut idx = idx.iter().zip(&stats.vocabs).enumerate();
    schema
        .features
        .iter()
        .map(|f| match f.kind {
            crate::schema::FeatureKind::Continuous => {
                let (&z, stat) = z.next().unwrap();
                Ok(RawValue::Number(stat.invert(z)))
            }
            crate::schema::FeatureKind::Categorical => {
                let (k, (&i, vocab)) = idx.next().unwrap();
                if i == UNK_INDEX {
                    return Ok(RawValue::Text(UNK_TOKEN.to_string()));
                }
                vocab
                    .category(i)
                    .map(|c| RawValue::Text(c.to_string()))
                    .ok_or(Error::DecodeRange {
                        feature: k,
                        index: i,
                        max: vocab.max_index(),
                    })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Feature, FeatureKind, LabelMode, LabelScheme};

    pub(crate) fn schema(kinds: &[FeatureKind]) -> FeatureSchema {
        FeatureSchema {
            dataset_id: "fixture".into(),
            has_header: false,
            label_column: "label".into(),
            excluded_columns: vec![],
            features: kinds
                .iter()
                .enumerate()
                .map(|(i, &kind)| Feature {
                    name: format!("f{i}"),
                    kind,
                })
                .collect(),
        }
    }

    pub(crate) fn dataset(rows: Vec<Vec<RawValue>>, split: Split) -> Dataset {
        Dataset {
            records: rows
                .into_iter()
                .enumerate()
                .map(|(i, values)| FlowRecord {
                    values,
                    label: 0,
                    source_row: i,
                })
                .collect(),
            schema_id: "fixture".into(),
            split,
            label_scheme: LabelScheme::builtin("nslkdd", LabelMode::Binary).unwrap(),
            dropped: 0,
            warnings: vec![],
        }
    }

    use RawValue::{Missing, Number as N};

    fn t(s: &str) -> RawValue {
        RawValue::Text(s.into())
    }

    #[test]
    fn constant_feature() {
        let s = schema(&[FeatureKind::Continuous]);
        let ds = dataset(vec![vec![N(2.0)], vec![N(2.0)], vec![N(2.0)]], Split::Train);
        let st = fit(&ds, &s).unwrap();
        assert_eq!(st.continuous[0].mu, 2.0);
        assert_eq!(st.continuous[0].sigma, 0.0);
        assert_eq!(st.continuous[0].standardize(2.0), 0.0);
        let z = st.continuous[0].standardize(3.0);
        assert!(z.is_finite());
    }

    #[test]
    fn first_appearance_vocabulary() {
        let s = schema(&[FeatureKind::Categorical]);
        let ds = dataset(
            vec![
                vec![t("tcp")],
                vec![t("udp")],
                vec![t("tcp")],
                vec![t("icmp")],
            ],
            Split::Train,
        );
        let st = fit(&ds, &s).unwrap();
        let v = &st.vocabs[0];
        assert_eq!(v.index_of("tcp"), 1);
        assert_eq!(v.index_of("udp"), 2);
        assert_eq!(v.index_of("icmp"), 3);
        assert_eq!(v.index_of("newproto"), UNK_INDEX);
        assert_eq!(v.byte_width(), 1);
    }

    #[test]
    fn population_std() {
        let s = schema(&[FeatureKind::Continuous]);
        let ds = dataset(
            vec![vec![N(1.0)], vec![N(2.0)], vec![N(3.0)], vec![N(4.0)]],
            Split::Train,
        );
        let st = fit(&ds, &s).unwrap();
        assert_eq!(st.continuous[0].mu, 2.5);
        assert!((st.continuous[0].sigma - 1.25f64.sqrt()).abs() < 1e-15);
        // (5 - 2.5) / (sqrt(1.25) + 1e-8) = 2.23606795..., rounded once to f32
        let z = st.continuous[0].standardize(5.0);
        assert_eq!(z, (2.5 / (1.25f64.sqrt() + 1e-8)) as f32);
        assert_eq!(z, 2.236_068_f32);
    }

    #[test]
    fn missing_values_skipped_and_imputed() {
        let s = schema(&[FeatureKind::Continuous, FeatureKind::Categorical]);
        let ds = dataset(
            vec![
                vec![N(1.0), t("a")],
                vec![Missing, Missing],
                vec![N(3.0), t("b")],
            ],
            Split::Train,
        );
        let st = fit(&ds, &s).unwrap();
        assert_eq!(st.continuous[0].mu, 2.0);
        assert_eq!(st.vocabs[0].len(), 2);
        let out = standardize(&ds.records[1], &st, &s).unwrap();
        assert_eq!(out.z, [0.0]);
        assert_eq!(out.idx, [UNK_INDEX]);
    }

    #[test]
    fn split_hygiene() {
        let s = schema(&[FeatureKind::Continuous]);
        let ds = dataset(vec![vec![N(1.0)]], Split::Test);
        assert!(matches!(fit(&ds, &s), Err(Error::SplitHygiene(_))));
        assert!(FittedStats::from_parts("x", Split::Test, vec![], vec![]).is_err());
    }

    #[test]
    fn degenerate_and_empty() {
        let s = schema(&[FeatureKind::Continuous]);
        let ds = dataset(vec![vec![Missing], vec![Missing]], Split::Train);
        assert!(matches!(fit(&ds, &s), Err(Error::DegenerateFeature(_))));
        let ds = dataset(vec![], Split::Train);
        assert!(matches!(fit(&ds, &s), Err(Error::EmptyDataset)));
    }

    #[test]
    fn two_byte_promotion() {
        let cats: Vec<String> = (0..255).map(|i| format!("c{i}")).collect();
        assert_eq!(
            Vocabulary::from_categories("f", cats.clone())
                .unwrap()
                .byte_width(),
            1
        );
        let mut more = cats;
        more.push("c255".into());
        assert_eq!(
            Vocabulary::from_categories("f", more).unwrap().byte_width(),
            2
        );
        let huge: Vec<String> = (0..70_000).map(|i| i.to_string()).collect();
        assert!(matches!(
            Vocabulary::from_categories("f", huge),
            Err(Error::VocabularyOverflow { .. })
        ));
    }

    #[test]
    fn destandardize_basics() {
        let s = schema(&[FeatureKind::Continuous, FeatureKind::Categorical]);
        let ds = dataset(
            vec![vec![N(1.0), t("x")], vec![N(5.0), t("y")]],
            Split::Train,
        );
        let st = fit(&ds, &s).unwrap();
        let back = destandardize(&[0.0], &[0], &st, &s).unwrap();
        assert_eq!(back, [N(3.0), t(UNK_TOKEN)]);
        let back = destandardize(&[0.0], &[2], &st, &s).unwrap();
        assert_eq!(back[1], t("y"));
        assert!(matches!(
            destandardize(&[0.0], &[3], &st, &s),
            Err(Error::DecodeRange {
                index: 3,
                max: 2,
                ..
            })
        ));
        assert!(matches!(
            destandardize(&[0.0, 1.0], &[1], &st, &s),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn standardize_length_mismatch() {
        let s = schema(&[FeatureKind::Continuous]);
        let ds = dataset(vec![vec![N(1.0)]], Split::Train);
        let st = fit(&ds, &s).unwrap();
        let bad = FlowRecord {
            values: vec![N(1.0), N(2.0)],
            label: 0,
            source_row: 0,
        };
        assert!(matches!(
            standardize(&bad, &st, &s),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn sequential_and_parallel_fit_agree() {
        let s = schema(&[FeatureKind::Continuous, FeatureKind::Categorical]);
        let rows = (0..20_000)
            .map(|i| {
                vec![
                    N((i as f64 * 0.37).sin() * 1e4),
                    t(&format!("c{}", (i * 19) % 301)),
                ]
            })
            .collect();
        let ds = dataset(rows, Split::Train);
        let fits: Vec<_> = Parallelism::available()
            .iter()
            .map(|&p| fit_with(&ds, &s, p).unwrap())
            .collect();
        for f in &fits[1..] {
            assert_eq!(f, &fits[0]);
            assert_eq!(
                f.continuous[0].mu.to_bits(),
                fits[0].continuous[0].mu.to_bits()
            );
        }
        assert_eq!(fits[0].vocabs[0].byte_width(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn vocabulary_is_injective_and_reserves_unk(
                col in prop::collection::vec("[a-z]{0,3}", 1..200),
            ) {
                let s = schema(&[FeatureKind::Categorical]);
                let ds = dataset(col.iter().map(|c| vec![t(c)]).collect(), Split::Train);
                let st = fit(&ds, &s).unwrap();
                let v = &st.vocabs[0];
                let mut seen = std::collections::HashSet::new();
                for c in &col {
                    let i = v.index_of(c);
                    prop_assert!(i >= 1);
                    prop_assert_eq!(v.category(i), Some(c.as_str()));
                    seen.insert(c.clone());
                }
                prop_assert_eq!(v.len(), seen.len());
                prop_assert_eq!(v.category(UNK_INDEX), None);
            }

            #[test]
            fn constant_features_stay_finite(c in -1e6f64..1e6, x in -1e9f64..1e9) {
                let s = schema(&[FeatureKind::Continuous]);
                let ds = dataset(vec![vec![N(c)]; 3], Split::Train);
                let st = fit(&ds, &s).unwrap();
                prop_assert_eq!(st.continuous[0].standardize(c), 0.0);
                prop_assert!(st.continuous[0].standardize(x).is_finite());
            }
        }
    }
}
