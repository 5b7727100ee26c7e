//! In-memory round-trip verification of a dataset through the codec.
//!
//! Each record is standardized, encoded, decoded and compared against the
//! original at three levels:
//!
//! * the stored `f32` values and categorical indices must come back bit for
//!   bit;
//! * decoded categoricals must equal the original category (or `<UNK>` when
//!   the category was never seen in training);
//! * decoded continuous values must lie within the quantization envelope of
//!   a single `f32` rounding of the standardized value, scaled back by
//!   `sigma + epsilon`, plus a few 64-bit roundings.
//!
//! Separately, every continuous value is checked against the fixed tolerance
//! `|x' - x| <= 1e-5 |x| + 1e-6`. Values close to zero on features with a
//! large mean can exceed it even though the codec is exact on its stored
//! bytes, so the report keeps that count apart from the codec invariants.

use crate::codec::{Codec, EncodedImage, StrayBytes};
use crate::error::Error;
use crate::exec::Parallelism;
use crate::ingest::{FlowRecord, RawValue};
use crate::schema::FeatureKind;
use crate::stats::{destandardize, standardize, UNK_TOKEN};

pub const REL_TOLERANCE: f64 = 1e-5;
pub const ABS_TOLERANCE: f64 = 1e-6;
/// Below this magnitude the absolute tolerance dominates.
pub const NEAR_ZERO: f64 = ABS_TOLERANCE / REL_TOLERANCE;

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub source_row: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstValue {
    pub source_row: usize,
    pub feature: String,
    pub original: f64,
    pub decoded: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub records: usize,
    pub continuous_values: usize,
    /// Records whose stored bytes did not decode to the encoded values.
    pub byte_mismatches: usize,
    pub categorical_mismatches: usize,
    /// Continuous values outside the quantization envelope.
    pub envelope_violations: usize,
    /// Records the codec rejected outright.
    pub codec_errors: usize,
    /// Continuous values exceeding the fixed relative/absolute tolerance.
    pub tolerance_exceedances: usize,
    pub max_abs_error: f64,
    /// Over values with `|x| >= NEAR_ZERO`.
    pub max_rel_error: f64,
    /// Over values with `|x| < NEAR_ZERO`.
    pub max_abs_error_near_zero: f64,
    /// Largest error relative to the fixed tolerance budget.
    pub worst: Option<WorstValue>,
    /// First failures, in row order (capped).
    pub failures: Vec<Failure>,
}

const MAX_LISTED_FAILURES: usize = 20;

impl VerifyReport {
    /// Codec invariants: lossless bytes, exact categoricals, values within
    /// the quantization envelope.
    pub fn codec_ok(&self) -> bool {
        self.byte_mismatches == 0
            && self.categorical_mismatches == 0
            && self.envelope_violations == 0
            && self.codec_errors == 0
    }

    /// [`Self::codec_ok`] and no value beyond the fixed tolerance.
    pub fn within_fixed_tolerance(&self) -> bool {
        self.codec_ok() && self.tolerance_exceedances == 0
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "records: {}\ncontinuous values: {}\nbyte mismatches: {}\ncategorical mismatches: {}\n\
             envelope violations: {}\ncodec errors: {}\nmax abs error: {:e}\n\
             max rel error (|x| >= {NEAR_ZERO}): {:e}\nmax abs error (|x| < {NEAR_ZERO}): {:e}\n\
             values beyond {REL_TOLERANCE:e}*|x| + {ABS_TOLERANCE:e}: {}\n",
            self.records,
            self.continuous_values,
            self.byte_mismatches,
            self.categorical_mismatches,
            self.envelope_violations,
            self.codec_errors,
            self.max_abs_error,
            self.max_rel_error,
            self.max_abs_error_near_zero,
            self.tolerance_exceedances,
        );
        if let Some(w) = &self.worst {
            s.push_str(&format!(
                "worst value: row {} feature `{}`: {} -> {}\n",
                w.source_row, w.feature, w.original, w.decoded
            ));
        }
        for f in &self.failures {
            s.push_str(&format!("FAIL row {}: {}\n", f.source_row, f.reason));
        }
        s
    }
}

#[derive(Default)]
struct RecordOutcome {
    byte_mismatch: bool,
    categorical_mismatches: usize,
    envelope_violations: usize,
    codec_error: bool,
    tolerance_exceedances: usize,
    continuous_values: usize,
    max_abs: f64,
    max_rel: f64,
    max_abs_near_zero: f64,
    /// (budget ratio, feature position, original, decoded)
    worst: Option<(f64, usize, f64, f64)>,
    reason: Option<String>,
}

pub fn verify(codec: &Codec, records: &[FlowRecord], par: Parallelism) -> VerifyReport {
    verify_with(codec, records, par, |_, _| {})
}

/// Like [`verify`], with a hook that may alter each encoded image before it
/// is decoded (fault injection).
pub fn verify_with<F>(
    codec: &Codec,
    records: &[FlowRecord],
    par: Parallelism,
    tamper: F,
) -> VerifyReport
where
    F: Fn(&FlowRecord, &mut EncodedImage) + Sync + Send,
{
    let outcomes = par.map(records, |r| check_record(codec, r, &tamper));
    let mut rep = VerifyReport {
        records: records.len(),
        ..Default::default()
    };
    let mut worst_ratio = -1.0;
    for (r, o) in records.iter().zip(outcomes) {
        rep.continuous_values += o.continuous_values;
        rep.byte_mismatches += usize::from(o.byte_mismatch);
        rep.categorical_mismatches += o.categorical_mismatches;
        rep.envelope_violations += o.envelope_violations;
        rep.codec_errors += usize::from(o.codec_error);
        rep.tolerance_exceedances += o.tolerance_exceedances;
        rep.max_abs_error = rep.max_abs_error.max(o.max_abs);
        rep.max_rel_error = rep.max_rel_error.max(o.max_rel);
        rep.max_abs_error_near_zero = rep.max_abs_error_near_zero.max(o.max_abs_near_zero);
        if let Some((ratio, pos, original, decoded)) = o.worst {
            if ratio > worst_ratio {
                worst_ratio = ratio;
                rep.worst = Some(WorstValue {
                    source_row: r.source_row,
                    feature: codec.schema().features[pos].name.clone(),
                    original,
                    decoded,
                });
            }
        }
        if let Some(reason) = o.reason {
            if rep.failures.len() < MAX_LISTED_FAILURES {
                rep.failures.push(Failure {
                    source_row: r.source_row,
                    reason,
                });
            }
        }
    }
    rep
}

/// Upper bound on `|x' - x|` after one `f32` rounding of `z`.
fn envelope(z64: f64, zf: f32, scale: f64, x: f64, mu: f64) -> f64 {
    let a = zf.abs();
    let ulp = if a == 0.0 || z64.abs() < f64::from(f32::MIN_POSITIVE) {
        f64::from(f32::from_bits(1))
    } else {
        f64::from(f32::from_bits(a.to_bits() + 1)) - f64::from(a)
    };
    0.5 * ulp * scale + 8.0 * f64::EPSILON * (x.abs() + mu.abs() + f64::from(a) * scale)
}

fn check_record<F>(codec: &Codec, record: &FlowRecord, tamper: &F) -> RecordOutcome
where
    F: Fn(&FlowRecord, &mut EncodedImage),
{
    let mut out = RecordOutcome::default();
    let fail = |out: &mut RecordOutcome, e: Error| {
        out.codec_error = true;
        out.reason = Some(e.to_string());
    };
    let stats = codec.stats();
    let schema = codec.schema();

    let s = match standardize(record, stats, schema) {
        Ok(s) => s,
        Err(e) => {
            fail(&mut out, e);
            return out;
        }
    };
    let mut img = codec.encode_standardized(&s);
    tamper(record, &mut img);
    let back = match codec.decode_standardized(&img, StrayBytes::Reject) {
        Ok(b) => b,
        Err(e) => {
            fail(&mut out, e);
            return out;
        }
    };
    let z_exact = s.z.len() == back.z.len()
        && s.z
            .iter()
            .zip(&back.z)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    if !z_exact || s.idx != back.idx {
        out.byte_mismatch = true;
        out.reason = Some("stored bytes do not decode to the encoded values".into());
    }
    let values = match destandardize(&back.z, &back.idx, stats, schema) {
        Ok(v) => v,
        Err(e) => {
            fail(&mut out, e);
            return out;
        }
    };

    let mut cont = stats.continuous.iter();
    let mut vocabs = stats.vocabs.iter();
    let mut zs = s.z.iter();
    for (pos, ((orig, dec), feature)) in record
        .values
        .iter()
        .zip(&values)
        .zip(&schema.features)
        .enumerate()
    {
        match feature.kind {
            FeatureKind::Categorical => {
                let vocab = vocabs.next().unwrap();
                let expected = match orig {
                    RawValue::Text(t) if vocab.index_of(t) != 0 => t.as_str(),
                    _ => UNK_TOKEN,
                };
                if dec.as_text() != Some(expected) {
                    out.categorical_mismatches += 1;
                    out.reason.get_or_insert_with(|| {
                        format!("feature `{}`: {orig:?} decoded as {dec:?}", feature.name)
                    });
                }
            }
            FeatureKind::Continuous => {
                let stat = cont.next().unwrap();
                let zf = *zs.next().unwrap();
                let decoded = dec.as_number().unwrap_or(f64::NAN);
                let x = match orig {
                    RawValue::Number(x) => *x,
                    // imputed: must come back as the mean
                    _ => {
                        if decoded != stat.mu {
                            out.envelope_violations += 1;
                            out.reason.get_or_insert_with(|| {
                                format!(
                                    "feature `{}`: missing value decoded as {decoded}",
                                    feature.name
                                )
                            });
                        }
                        continue;
                    }
                };
                out.continuous_values += 1;
                let err = (decoded - x).abs();
                let bound = envelope(stat.z(x), zf, stat.sigma + stat.epsilon, x, stat.mu);
                if err.is_nan() || err > bound {
                    out.envelope_violations += 1;
                    out.reason.get_or_insert_with(|| {
                        format!(
                            "feature `{}`: {x} decoded as {decoded} (error {err:e} > envelope {bound:e})",
                            feature.name
                        )
                    });
                }
                let err = if err.is_nan() { f64::INFINITY } else { err };
                out.max_abs = out.max_abs.max(err);
                if x.abs() >= NEAR_ZERO {
                    out.max_rel = out.max_rel.max(err / x.abs());
                } else {
                    out.max_abs_near_zero = out.max_abs_near_zero.max(err);
                }
                let budget = REL_TOLERANCE * x.abs() + ABS_TOLERANCE;
                if err > budget {
                    out.tolerance_exceedances += 1;
                }
                let ratio = err / budget;
                if out.worst.is_none_or(|w| ratio > w.0) {
                    out.worst = Some((ratio, pos, x, decoded));
                }
            }
        }
    }
    out
}
