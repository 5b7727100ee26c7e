//! Versioned manifest: schema, layout parameters and fitted statistics.
//! Everything needed to decode an image set.
//!
//! Floating-point statistics are stored as decimal strings that parse back
//! to the identical 64-bit value.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{Codec, LayoutSpec};
use crate::error::{Error, Result};
use crate::ingest::Split;
use crate::schema::FeatureSchema;
use crate::stats::{ContinuousStat, FittedStats, Vocabulary, EPSILON};

pub const FORMAT_VERSION: u32 = 1;

const COORDINATES: &str = "row-col, origin top-left";
const TRAJECTORY: &str = "inverted-l: col S-1 bottom to top, then row 0 right to left";
const CHANNEL_ORDER: &str = "rgb";
const BYTE_ORDER: &str = "little-endian";

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub format_version: u32,
    /// RFC 3339 creation time; excluded from [`Manifest::content_digest`].
    pub created: String,
    /// `sha256:` digest of the training CSV.
    pub source_hash: String,
    pub schema: FeatureSchema,
    pub layout: LayoutSpec,
    pub stats: FittedStats,
}

#[derive(Serialize, Deserialize)]
struct Doc {
    format_version: u32,
    #[serde(default)]
    created: String,
    #[serde(default)]
    source_hash: String,
    layout: LayoutDoc,
    schema: FeatureSchema,
    stats: StatsDoc,
}

#[derive(Serialize, Deserialize)]
struct LayoutDoc {
    side: usize,
    coordinates: String,
    trajectory: String,
    channel_order: String,
    byte_order: String,
}

#[derive(Serialize, Deserialize)]
struct StatsDoc {
    dataset_id: String,
    split: String,
    epsilon: String,
    continuous: Vec<ContinuousDoc>,
    categorical: Vec<VocabDoc>,
}

#[derive(Serialize, Deserialize)]
struct ContinuousDoc {
    feature: String,
    mu: String,
    sigma: String,
}

#[derive(Serialize, Deserialize)]
struct VocabDoc {
    feature: String,
    /// Index `i + 1` for entry `i`; 0 is UNK.
    categories: Vec<String>,
}

fn exact(x: f64) -> String {
    // Debug prints the shortest string that parses back to the same bits
    format!("{x:?}")
}

fn parse_exact(field: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Manifest(format!("`{field}`: `{s}` is not a number")))
}

impl Manifest {
    pub fn new(
        schema: FeatureSchema,
        layout: LayoutSpec,
        stats: FittedStats,
        source_hash: String,
    ) -> Result<Self> {
        stats.check_schema(&schema)?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            source_hash,
            schema,
            layout,
            stats,
        })
    }

    pub fn codec(&self) -> Result<Codec> {
        Codec::new(self.schema.clone(), self.stats.clone(), self.layout)
    }

    fn to_doc(&self) -> Doc {
        let names = |pos: Vec<usize>| -> Vec<String> {
            pos.into_iter()
                .map(|p| self.schema.features[p].name.clone())
                .collect()
        };
        Doc {
            format_version: self.format_version,
            created: self.created.clone(),
            source_hash: self.source_hash.clone(),
            layout: LayoutDoc {
                side: self.layout.side(),
                coordinates: COORDINATES.into(),
                trajectory: TRAJECTORY.into(),
                channel_order: CHANNEL_ORDER.into(),
                byte_order: BYTE_ORDER.into(),
            },
            schema: self.schema.clone(),
            stats: StatsDoc {
                dataset_id: self.stats.dataset_id().to_string(),
                split: self.stats.fitted_split().to_string(),
                epsilon: exact(EPSILON),
                continuous: names(self.schema.continuous_positions())
                    .into_iter()
                    .zip(&self.stats.continuous)
                    .map(|(feature, c)| ContinuousDoc {
                        feature,
                        mu: exact(c.mu),
                        sigma: exact(c.sigma),
                    })
                    .collect(),
                categorical: names(self.schema.categorical_positions())
                    .into_iter()
                    .zip(&self.stats.vocabs)
                    .map(|(feature, v)| VocabDoc {
                        feature,
                        categories: v.categories().to_vec(),
                    })
                    .collect(),
            },
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_doc()).expect("manifest serializes to TOML")
    }

    pub fn from_toml_str(doc: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = toml::from_str(doc).map_err(|e| Error::Manifest(e.to_string()))?;
        if v.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(v.format_version));
        }
        let doc: Doc = toml::from_str(doc).map_err(|e| Error::Manifest(e.to_string()))?;
        let Doc {
            format_version,
            created,
            source_hash,
            layout,
            schema,
            stats,
        } = doc;
        schema.validate()?;
        let expect = |what: &str, got: &str, want: &str| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Manifest(format!(
                    "layout {what} `{got}` is not supported (expected `{want}`)"
                )))
            }
        };
        expect("coordinates", &layout.coordinates, COORDINATES)?;
        expect("trajectory", &layout.trajectory, TRAJECTORY)?;
        expect("channel_order", &layout.channel_order, CHANNEL_ORDER)?;
        expect("byte_order", &layout.byte_order, BYTE_ORDER)?;
        let layout = LayoutSpec::new(layout.side)?;

        let split: Split = stats.split.parse()?;
        if parse_exact("epsilon", &stats.epsilon)? != EPSILON {
            return Err(Error::Manifest(format!(
                "epsilon {} differs from {EPSILON:e}",
                stats.epsilon
            )));
        }
        let check_names = |docs: Vec<&str>, pos: Vec<usize>| -> Result<()> {
            let want: Vec<&str> = pos
                .iter()
                .map(|&p| schema.features[p].name.as_str())
                .collect();
            if docs != want {
                return Err(Error::Manifest(
                    "statistics are not listed in schema feature order".into(),
                ));
            }
            Ok(())
        };
        check_names(
            stats
                .continuous
                .iter()
                .map(|c| c.feature.as_str())
                .collect(),
            schema.continuous_positions(),
        )?;
        check_names(
            stats
                .categorical
                .iter()
                .map(|c| c.feature.as_str())
                .collect(),
            schema.categorical_positions(),
        )?;
        let continuous = stats
            .continuous
            .iter()
            .map(|c| {
                let mu = parse_exact("mu", &c.mu)?;
                let sigma = parse_exact("sigma", &c.sigma)?;
                if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
                    return Err(Error::Manifest(format!(
                        "feature `{}`: invalid mu/sigma {mu}/{sigma}",
                        c.feature
                    )));
                }
                Ok(ContinuousStat::new(mu, sigma))
            })
            .collect::<Result<Vec<_>>>()?;
        let vocabs = stats
            .categorical
            .into_iter()
            .map(|v| Vocabulary::from_categories(&v.feature, v.categories))
            .collect::<Result<Vec<_>>>()?;
        let stats = FittedStats::from_parts(stats.dataset_id, split, continuous, vocabs)?;
        stats.check_schema(&schema)?;
        Ok(Self {
            format_version,
            created,
            source_hash,
            schema,
            layout,
            stats,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let doc = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&doc)
    }

    /// Digest of the serialized manifest with the timestamp blanked.
    pub fn content_digest(&self) -> String {
        let mut m = self.clone();
        m.created.clear();
        sha256_hex(m.to_toml_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `sha256:<hex>` digest of a file's contents.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("sha256:{}", hex::encode(h.finalize())))
}
