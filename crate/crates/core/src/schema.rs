//! Feature schemas and label schemes.
//!
//! A [`FeatureSchema`] fixes the ordered feature list and the kind of each
//! feature. Its order is the byte-stream order of the image layout, so the
//! same schema must be used to fit, encode and decode.
//!
//! CSV column layout:
//! * with a header (`has_header = true`) columns are matched by name; every
//!   header column must be a feature, the label column, or listed in
//!   `excluded_columns`;
//! * without a header the file holds the features in schema order, then the
//!   label column, then `excluded_columns` in the order listed.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NSLKDD: &str = "nslkdd";
pub const UNSWNB15: &str = "unswnb15";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub dataset_id: String,
    #[serde(default)]
    pub has_header: bool,
    pub label_column: String,
    #[serde(default)]
    pub excluded_columns: Vec<String>,
    pub features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::SchemaValidation("feature list is empty".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if f.name.trim().is_empty() {
                return Err(Error::SchemaValidation("feature with empty name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::SchemaValidation(format!(
                    "duplicate feature name `{}`",
                    f.name
                )));
            }
        }
        if self.label_column.trim().is_empty() {
            return Err(Error::SchemaValidation("label_column is empty".into()));
        }
        if !seen.insert(self.label_column.as_str()) {
            return Err(Error::SchemaValidation(format!(
                "label column `{}` is also a feature",
                self.label_column
            )));
        }
        for c in &self.excluded_columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::SchemaValidation(format!(
                    "excluded column `{c}` duplicates a feature, the label or another excluded column"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Schema positions of the continuous features, in order.
    pub fn continuous_positions(&self) -> Vec<usize> {
        self.positions(FeatureKind::Continuous)
    }

    /// Schema positions of the categorical features, in order.
    pub fn categorical_positions(&self) -> Vec<usize> {
        self.positions(FeatureKind::Categorical)
    }

    fn positions(&self, kind: FeatureKind) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n_continuous(&self) -> usize {
        self.features
            .iter()
            .filter(|f| f.kind == FeatureKind::Continuous)
            .count()
    }

    pub fn n_categorical(&self) -> usize {
        self.len() - self.n_continuous()
    }

    /// Column count of a headerless file under this schema.
    pub fn headerless_arity(&self) -> usize {
        self.features.len() + 1 + self.excluded_columns.len()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes to TOML")
    }

    pub fn from_toml_str(doc: &str) -> Result<Self> {
        let schema: FeatureSchema =
            toml::from_str(doc).map_err(|e| Error::SchemaParse(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }
}

/// Loads and validates a schema document.
pub fn load_schema(path: impl AsRef<Path>) -> Result<FeatureSchema> {
    let path = path.as_ref();
    let doc = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FeatureSchema::from_toml_str(&doc)
}

/// Resolves a `--schema` style argument: a shipped dataset id or a path.
pub fn resolve_schema(source: &str) -> Result<FeatureSchema> {
    match source {
        NSLKDD | UNSWNB15 => builtin_schema(source),
        path => load_schema(path),
    }
}

fn features(cat: &[&str], names: &[&str]) -> Vec<Feature> {
    names
        .iter()
        .map(|&n| Feature {
            name: n.to_string(),
            kind: if cat.contains(&n) {
                FeatureKind::Categorical
            } else {
                FeatureKind::Continuous
            },
        })
        .collect()
}

const NSLKDD_FEATURES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

const NSLKDD_CATEGORICAL: [&str; 3] = ["protocol_type", "service", "flag"];

/// Column order of the UNSW-NB15 training/testing partition files, minus
/// `id`, `attack_cat` and `label`.
const UNSWNB15_FEATURES: [&str; 42] = [
    "dur",
    "proto",
    "service",
    "state",
    "spkts",
    "dpkts",
    "sbytes",
    "dbytes",
    "rate",
    "sttl",
    "dttl",
    "sload",
    "dload",
    "sloss",
    "dloss",
    "sinpkt",
    "dinpkt",
    "sjit",
    "djit",
    "swin",
    "stcpb",
    "dtcpb",
    "dwin",
    "tcprtt",
    "synack",
    "ackdat",
    "smean",
    "dmean",
    "trans_depth",
    "response_body_len",
    "ct_srv_src",
    "ct_state_ttl",
    "ct_dst_ltm",
    "ct_src_dport_ltm",
    "ct_dst_sport_ltm",
    "ct_dst_src_ltm",
    "is_ftp_login",
    "ct_ftp_cmd",
    "ct_flw_http_mthd",
    "ct_src_ltm",
    "ct_srv_dst",
    "is_sm_ips_ports",
];

const UNSWNB15_CATEGORICAL: [&str; 5] = [
    "proto",
    "service",
    "state",
    "is_ftp_login",
    "is_sm_ips_ports",
];

/// Non-traffic fields (identifiers, endpoints, timestamps) plus the binary
/// label, which duplicates `attack_cat == Normal`.
const UNSWNB15_EXCLUDED: [&str; 8] = [
    "id", "srcip", "sport", "dstip", "dsport", "stime", "ltime", "label",
];

/// The shipped default schema for `nslkdd` or `unswnb15`.
pub fn builtin_schema(dataset_id: &str) -> Result<FeatureSchema> {
    match dataset_id {
        NSLKDD => Ok(FeatureSchema {
            dataset_id: NSLKDD.into(),
            has_header: false,
            label_column: "label".into(),
            excluded_columns: vec!["difficulty".into()],
            features: features(&NSLKDD_CATEGORICAL, &NSLKDD_FEATURES),
        }),
        UNSWNB15 => Ok(FeatureSchema {
            dataset_id: UNSWNB15.into(),
            has_header: true,
            label_column: "attack_cat".into(),
            excluded_columns: UNSWNB15_EXCLUDED.iter().map(|s| s.to_string()).collect(),
            features: features(&UNSWNB15_CATEGORICAL, &UNSWNB15_FEATURES),
        }),
        other => Err(Error::UnknownDataset(other.into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelMode {
    Binary,
    MultiClass,
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::Binary => "binary",
            LabelMode::MultiClass => "multi",
        })
    }
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(LabelMode::Binary),
            "multi" | "multiclass" => Ok(LabelMode::MultiClass),
            other => Err(Error::Config(format!("unknown label mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelTarget {
    Class(usize),
    /// The row is removed from the dataset and counted.
    Dropped,
}

/// Maps raw label strings to class indices. Lookups trim whitespace and
/// ignore ASCII case.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelScheme {
    mode: LabelMode,
    class_names: Vec<String>,
    mapping: BTreeMap<String, LabelTarget>,
    fallback: Option<LabelTarget>,
}

impl LabelScheme {
    pub fn new(
        mode: LabelMode,
        class_names: Vec<String>,
        mapping: impl IntoIterator<Item = (String, LabelTarget)>,
        fallback: Option<LabelTarget>,
    ) -> Result<Self> {
        if mode == LabelMode::Binary && class_names.len() != 2 {
            return Err(Error::Config(format!(
                "binary label scheme needs exactly 2 classes, got {}",
                class_names.len()
            )));
        }
        if class_names.is_empty() {
            return Err(Error::Config("label scheme has no classes".into()));
        }
        let mapping: BTreeMap<_, _> = mapping
            .into_iter()
            .map(|(k, v)| (normalize_label(&k), v))
            .collect();
        for t in mapping.values().chain(fallback.iter()) {
            if let LabelTarget::Class(c) = t {
                if *c >= class_names.len() {
                    return Err(Error::Config(format!("class index {c} out of range")));
                }
            }
        }
        Ok(Self {
            mode,
            class_names,
            mapping,
            fallback,
        })
    }

    pub fn builtin(dataset_id: &str, mode: LabelMode) -> Result<Self> {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let normal = match dataset_id {
            NSLKDD | UNSWNB15 => "normal",
            other => return Err(Error::UnknownDataset(other.into())),
        };
        if mode == LabelMode::Binary {
            // Every attack category merges into Attack.
            return Self::new(
                mode,
                names(&["Normal", "Attack"]),
                [(normal.to_string(), LabelTarget::Class(0))],
                Some(LabelTarget::Class(1)),
            );
        }
        let (classes, table): (&[&str], &[(&str, LabelTarget)]) = match dataset_id {
            NSLKDD => (&NSLKDD_CLASSES, &NSLKDD_ATTACKS),
            _ => (&UNSWNB15_CLASSES, &UNSWNB15_ATTACKS),
        };
        Self::new(
            mode,
            names(classes),
            table.iter().map(|(k, v)| (k.to_string(), *v)),
            None,
        )
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn resolve(&self, raw: &str) -> Option<LabelTarget> {
        self.mapping
            .get(&normalize_label(raw))
            .copied()
            .or(self.fallback)
    }
}

fn normalize_label(raw: &str) -> String {
    raw.trim().to_ascii_lowercase()
}

const NSLKDD_CLASSES: [&str; 5] = ["Normal", "R2L", "Probe", "DoS", "U2R"];

use LabelTarget::Class;

/// Attack-name taxonomy for NSL-KDD, covering every label in KDDTrain+ and
/// KDDTest+. `httptunnel` is grouped with R2L and `worm` with DoS.
const NSLKDD_ATTACKS: [(&str, LabelTarget); 40] = [
    ("normal", Class(0)),
    // R2L
    ("ftp_write", Class(1)),
    ("guess_passwd", Class(1)),
    ("imap", Class(1)),
    ("multihop", Class(1)),
    ("phf", Class(1)),
    ("spy", Class(1)),
    ("warezclient", Class(1)),
    ("warezmaster", Class(1)),
    ("httptunnel", Class(1)),
    ("named", Class(1)),
    ("sendmail", Class(1)),
    ("snmpgetattack", Class(1)),
    ("snmpguess", Class(1)),
    ("xlock", Class(1)),
    ("xsnoop", Class(1)),
    // Probe
    ("ipsweep", Class(2)),
    ("nmap", Class(2)),
    ("portsweep", Class(2)),
    ("satan", Class(2)),
    ("mscan", Class(2)),
    ("saint", Class(2)),
    // DoS
    ("back", Class(3)),
    ("land", Class(3)),
    ("neptune", Class(3)),
    ("pod", Class(3)),
    ("smurf", Class(3)),
    ("teardrop", Class(3)),
    ("apache2", Class(3)),
    ("mailbomb", Class(3)),
    ("processtable", Class(3)),
    ("udpstorm", Class(3)),
    ("worm", Class(3)),
    // U2R
    ("buffer_overflow", Class(4)),
    ("loadmodule", Class(4)),
    ("perl", Class(4)),
    ("rootkit", Class(4)),
    ("ps", Class(4)),
    ("sqlattack", Class(4)),
    ("xterm", Class(4)),
];

const UNSWNB15_CLASSES: [&str; 5] = ["Normal", "DoS", "Reconnaissance", "Shellcode", "Worms"];

const UNSWNB15_ATTACKS: [(&str, LabelTarget); 11] = [
    ("normal", Class(0)),
    ("dos", Class(1)),
    ("reconnaissance", Class(2)),
    ("shellcode", Class(3)),
    ("worms", Class(4)),
    ("exploits", LabelTarget::Dropped),
    ("fuzzers", LabelTarget::Dropped),
    ("generic", LabelTarget::Dropped),
    ("analysis", LabelTarget::Dropped),
    ("backdoor", LabelTarget::Dropped),
    ("backdoors", LabelTarget::Dropped),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_counts() {
        let nsl = builtin_schema(NSLKDD).unwrap();
        assert_eq!(nsl.len(), 41);
        assert_eq!(nsl.n_continuous(), 38);
        assert_eq!(nsl.n_categorical(), 3);
        assert_eq!(nsl.n_continuous() * 4, 152);

        let unsw = builtin_schema(UNSWNB15).unwrap();
        assert_eq!(unsw.len(), 42);
        assert_eq!(unsw.n_continuous(), 37);
        assert_eq!(unsw.n_categorical(), 5);
        assert_eq!(unsw.n_continuous() * 4, 148);
        assert!(!unsw
            .features
            .iter()
            .any(|f| f.name == "srcip" || f.name == "id"));
        assert_eq!(
            unsw.excluded_columns
                .iter()
                .filter(|c| *c != "label")
                .count(),
            7
        );
    }

    #[test]
    fn nslkdd_categoricals() {
        let nsl = builtin_schema(NSLKDD).unwrap();
        let cats: Vec<_> = nsl
            .categorical_positions()
            .into_iter()
            .map(|i| nsl.features[i].name.as_str())
            .collect();
        assert_eq!(cats, ["protocol_type", "service", "flag"]);
        assert_eq!(nsl.excluded_columns, ["difficulty"]);
    }

    #[test]
    fn unknown_dataset() {
        assert!(matches!(
            builtin_schema("cicids"),
            Err(Error::UnknownDataset(_))
        ));
        assert!(LabelScheme::builtin("cicids", LabelMode::Binary).is_err());
    }

    #[test]
    fn toml_round_trip() {
        for id in [NSLKDD, UNSWNB15] {
            let s = builtin_schema(id).unwrap();
            let back = FeatureSchema::from_toml_str(&s.to_toml_string()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn shipped_documents_match_builtins() {
        let nsl = include_str!("../schemas/nslkdd.toml");
        let unsw = include_str!("../schemas/unswnb15.toml");
        assert_eq!(
            FeatureSchema::from_toml_str(nsl).unwrap(),
            builtin_schema(NSLKDD).unwrap()
        );
        assert_eq!(
            FeatureSchema::from_toml_str(unsw).unwrap(),
            builtin_schema(UNSWNB15).unwrap()
        );
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let mut s = builtin_schema(UNSWNB15).unwrap();
        s.features[3].name = "dur".into();
        let err = FeatureSchema::from_toml_str(&s.to_toml_string()).unwrap_err();
        assert!(matches!(err, Error::SchemaValidation(_)), "{err}");

        s.features.clear();
        let err = FeatureSchema::from_toml_str(&s.to_toml_string()).unwrap_err();
        assert!(matches!(err, Error::SchemaValidation(_)), "{err}");
    }

    #[test]
    fn malformed_document() {
        let err = FeatureSchema::from_toml_str("dataset_id = [").unwrap_err();
        assert!(matches!(err, Error::SchemaParse(_)));
        let err = FeatureSchema::from_toml_str(
            "dataset_id='x'\nlabel_column='y'\n[[features]]\nname='a'\nkind='ordinal'\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::SchemaParse(_)));
    }

    #[test]
    fn label_schemes() {
        let bin = LabelScheme::builtin(NSLKDD, LabelMode::Binary).unwrap();
        assert_eq!(bin.n_classes(), 2);
        assert_eq!(bin.resolve("normal"), Some(Class(0)));
        assert_eq!(bin.resolve("neptune"), Some(Class(1)));

        let multi = LabelScheme::builtin(NSLKDD, LabelMode::MultiClass).unwrap();
        assert_eq!(multi.resolve("httptunnel"), Some(Class(1)));
        assert_eq!(multi.resolve("worm"), Some(Class(3)));
        assert_eq!(multi.resolve("mscan"), Some(Class(2)));
        assert_eq!(multi.resolve("no_such_attack"), None);

        let unsw = LabelScheme::builtin(UNSWNB15, LabelMode::MultiClass).unwrap();
        assert_eq!(
            unsw.class_names(),
            ["Normal", "DoS", "Reconnaissance", "Shellcode", "Worms"]
        );
        assert_eq!(unsw.resolve(" Reconnaissance "), Some(Class(2)));
        assert_eq!(unsw.resolve("Generic"), Some(LabelTarget::Dropped));
        let unsw_bin = LabelScheme::builtin(UNSWNB15, LabelMode::Binary).unwrap();
        assert_eq!(unsw_bin.resolve("Generic"), Some(Class(1)));
        assert_eq!(unsw_bin.resolve("Normal"), Some(Class(0)));
    }

    #[test]
    fn binary_scheme_needs_two_classes() {
        let err = LabelScheme::new(LabelMode::Binary, vec!["a".into()], [], None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
