//! Record ↔ image codec.
//!
//! Continuous features are standardized, cast to `f32` and written as
//! little-endian IEEE-754 bytes along the trajectory, four bytes per feature
//! over three-byte pixels, so feature `k` starts at pixel `⌊4k/3⌋`, channel
//! `4k mod 3`. Categorical indices (1 or 2 bytes each, little-endian) are
//! written contiguously, centred in the middle row. Every other byte is 0.

mod layout;
mod png;

pub use self::layout::{
    build_plan, build_plan_for, BytePlan, LayoutSpec, Slot, CHANNELS, DEFAULT_SIDE,
};
pub use self::png::{from_png_bytes, read_png, render_png, to_png_bytes};

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::ingest::FlowRecord;
use crate::schema::FeatureSchema;
use crate::stats::{destandardize, standardize, FittedStats, Standardized};

/// Little-endian IEEE-754 bytes of each value, concatenated.
pub fn serialize_continuous(z: &[f32]) -> Vec<u8> {
    z.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Inverse of [`serialize_continuous`]. Trailing bytes short of a full
/// value are ignored.
pub fn deserialize_continuous(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EncodedImage {
    side: usize,
    /// Row-major, top-left origin, R, G, B per pixel.
    pixels: Vec<u8>,
    pub label: usize,
    pub source_row: usize,
}

impl EncodedImage {
    /// An all-black image.
    pub fn blank(side: usize) -> Self {
        Self {
            side,
            pixels: vec![0; side * side * CHANNELS],
            label: 0,
            source_row: 0,
        }
    }

    pub fn from_pixels(side: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != side * side * CHANNELS {
            return Err(Error::Format(format!(
                "{} bytes do not form a {side}x{side} RGB image",
                pixels.len()
            )));
        }
        Ok(Self {
            side,
            pixels,
            label: 0,
            source_row: 0,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let o = (row * self.side + col) * CHANNELS;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn byte(&self, slot: Slot) -> u8 {
        self.pixels[slot.offset(self.side)]
    }
}

/// How `decode` treats nonzero bytes outside the planned regions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StrayBytes {
    #[default]
    Reject,
    Ignore,
}

/// A schema, its fitted statistics and the derived byte plan, ready to
/// encode or decode any number of records.
#[derive(Clone, Debug)]
pub struct Codec {
    schema: FeatureSchema,
    stats: FittedStats,
    layout: LayoutSpec,
    plan: BytePlan,
}

impl Codec {
    pub fn new(schema: FeatureSchema, stats: FittedStats, layout: LayoutSpec) -> Result<Self> {
        let plan = build_plan(&layout, &schema, &stats)?;
        Ok(Self {
            schema,
            stats,
            layout,
            plan,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn stats(&self) -> &FittedStats {
        &self.stats
    }

    pub fn layout(&self) -> &LayoutSpec {
        &self.layout
    }

    pub fn plan(&self) -> &BytePlan {
        &self.plan
    }

    pub fn encode(&self, record: &FlowRecord) -> Result<EncodedImage> {
        let s = standardize(record, &self.stats, &self.schema)?;
        let mut img = self.encode_standardized(&s);
        img.label = record.label;
        img.source_row = record.source_row;
        Ok(img)
    }

    /// Writes already standardized values into a fresh image.
    pub fn encode_standardized(&self, s: &Standardized) -> EncodedImage {
        let mut img = EncodedImage::blank(self.layout.side());
        let bytes = serialize_continuous(&s.z);
        for (&o, b) in self.plan.continuous_offsets().iter().zip(bytes) {
            img.pixels[o] = b;
        }
        let mut slots = self.plan.categorical_offsets().iter();
        for (&i, &w) in s.idx.iter().zip(&self.plan.categorical_widths) {
            for &b in &i.to_le_bytes()[..w] {
                img.pixels[*slots.next().expect("plan covers every index byte")] = b;
            }
        }
        img
    }

    /// Reads the standardized values back out of an image.
    pub fn decode_standardized(
        &self,
        img: &EncodedImage,
        stray: StrayBytes,
    ) -> Result<Standardized> {
        if img.side != self.layout.side() {
            return Err(Error::Format(format!(
                "image side {} does not match layout side {}",
                img.side,
                self.layout.side()
            )));
        }
        if stray == StrayBytes::Reject {
            if let Some((o, &v)) = img
                .pixels
                .iter()
                .enumerate()
                .find(|&(o, &v)| v != 0 && !self.plan.is_planned(o))
            {
                let px = o / CHANNELS;
                return Err(Error::StrayByte {
                    row: px / img.side,
                    col: px % img.side,
                    channel: o % CHANNELS,
                    value: v,
                });
            }
        }
        let bytes: Vec<u8> = self
            .plan
            .continuous_offsets()
            .iter()
            .map(|&o| img.pixels[o])
            .collect();
        let z = deserialize_continuous(&bytes);
        let mut slots = self.plan.categorical_offsets().iter();
        let idx = self
            .plan
            .categorical_widths
            .iter()
            .map(|&w| {
                let mut le = [0u8; 2];
                for b in le.iter_mut().take(w) {
                    *b = img.pixels[*slots.next().expect("plan covers every index byte")];
                }
                u16::from_le_bytes(le)
            })
            .collect();
        Ok(Standardized { z, idx })
    }

    /// Decodes an image into a record carrying the image's label and row.
    /// Non-finite stored values decode to non-finite numbers.
    pub fn decode(&self, img: &EncodedImage, stray: StrayBytes) -> Result<FlowRecord> {
        let s = self.decode_standardized(img, stray)?;
        let values = destandardize(&s.z, &s.idx, &self.stats, &self.schema)?;
        Ok(FlowRecord {
            values,
            label: img.label,
            source_row: img.source_row,
        })
    }

    /// Encodes every record; results stay in input order.
    pub fn encode_batch(
        &self,
        records: &[FlowRecord],
        par: Parallelism,
    ) -> Vec<Result<EncodedImage>> {
        par.map(records, |r| self.encode(r))
    }

    pub fn decode_batch(
        &self,
        images: &[EncodedImage],
        stray: StrayBytes,
        par: Parallelism,
    ) -> Vec<Result<FlowRecord>> {
        par.map(images, |img| self.decode(img, stray))
    }
}

pub fn encode(
    record: &FlowRecord,
    stats: &FittedStats,
    schema: &FeatureSchema,
    layout: &LayoutSpec,
) -> Result<EncodedImage> {
    Codec::new(schema.clone(), stats.clone(), *layout)?.encode(record)
}

pub fn decode(
    image: &EncodedImage,
    stats: &FittedStats,
    schema: &FeatureSchema,
    layout: &LayoutSpec,
) -> Result<FlowRecord> {
    Codec::new(schema.clone(), stats.clone(), *layout)?.decode(image, StrayBytes::Reject)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Dataset, RawValue, Split};
    use crate::schema::{Feature, FeatureKind, LabelMode, LabelScheme};
    use crate::stats::{fit, UNK_TOKEN};

    #[test]
    fn ieee754_patterns() {
        assert_eq!(serialize_continuous(&[1.0]), [0x00, 0x00, 0x80, 0x3F]);
        assert_eq!(serialize_continuous(&[0.0]), [0, 0, 0, 0]);
        assert_eq!(serialize_continuous(&[-2.5]), [0x00, 0x00, 0x20, 0xC0]);
        let odd = [f32::NAN, f32::INFINITY, -0.0, f32::MIN_POSITIVE / 4.0];
        let back = deserialize_continuous(&serialize_continuous(&odd));
        for (a, b) in odd.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    fn fixture() -> (FeatureSchema, Dataset) {
        let kinds = [
            FeatureKind::Continuous,
            FeatureKind::Categorical,
            FeatureKind::Continuous,
        ];
        let schema = FeatureSchema {
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
        };
        let rows = [(0.0, "tcp", 10.0), (2.0, "udp", 30.0), (1.0, "tcp", 20.0)];
        let ds = Dataset {
            records: rows
                .iter()
                .enumerate()
                .map(|(i, &(a, c, b))| FlowRecord {
                    values: vec![
                        RawValue::Number(a),
                        RawValue::Text(c.into()),
                        RawValue::Number(b),
                    ],
                    label: i % 2,
                    source_row: i,
                })
                .collect(),
            schema_id: "fixture".into(),
            split: Split::Train,
            label_scheme: LabelScheme::builtin("nslkdd", LabelMode::Binary).unwrap(),
            dropped: 0,
            warnings: vec![],
        };
        (schema, ds)
    }

    fn codec() -> (Codec, Dataset) {
        let (schema, ds) = fixture();
        let stats = fit(&ds, &schema).unwrap();
        (
            Codec::new(schema, stats, LayoutSpec::default()).unwrap(),
            ds,
        )
    }

    #[test]
    fn first_feature_bytes_land_on_corner() {
        let (c, _) = codec();
        let s = Standardized {
            z: vec![1.0, 0.0],
            idx: vec![0],
        };
        let img = c.encode_standardized(&s);
        assert_eq!(img.pixel(31, 31), [0x00, 0x00, 0x80]);
        assert_eq!(img.pixel(30, 31)[0], 0x3F);
    }

    #[test]
    fn all_missing_record_is_black() {
        let (c, _) = codec();
        let r = FlowRecord {
            values: vec![RawValue::Missing; 3],
            label: 0,
            source_row: 0,
        };
        let img = c.encode(&r).unwrap();
        assert!(img.pixels().iter().all(|&b| b == 0));
        let back = c.decode(&img, StrayBytes::Reject).unwrap();
        assert_eq!(back.values[0], RawValue::Number(c.stats().continuous[0].mu));
        assert_eq!(back.values[1], RawValue::Text(UNK_TOKEN.into()));
    }

    #[test]
    fn round_trip_fixture() {
        let (c, ds) = codec();
        for r in &ds.records {
            let img = c.encode(r).unwrap();
            assert_eq!(img.source_row, r.source_row);
            let back = c.decode(&img, StrayBytes::Reject).unwrap();
            assert_eq!(back.label, r.label);
            assert_eq!(back.values[1], r.values[1]);
            for k in [0, 2] {
                let (a, b) = (
                    r.values[k].as_number().unwrap(),
                    back.values[k].as_number().unwrap(),
                );
                assert!((a - b).abs() <= 1e-5 * a.abs() + 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn stray_byte_rejected_unless_lenient() {
        let (c, ds) = codec();
        let mut img = c.encode(&ds.records[1]).unwrap();
        img.pixels_mut()[(5 * 32 + 5) * 3] = 7;
        assert!(matches!(
            c.decode(&img, StrayBytes::Reject),
            Err(Error::StrayByte {
                row: 5,
                col: 5,
                channel: 0,
                value: 7
            })
        ));
        assert!(c.decode(&img, StrayBytes::Ignore).is_ok());
    }

    #[test]
    fn out_of_vocabulary_index() {
        let (c, _) = codec();
        let img = c.encode_standardized(&Standardized {
            z: vec![0.0, 0.0],
            idx: vec![9],
        });
        assert!(matches!(
            c.decode(&img, StrayBytes::Reject),
            Err(Error::DecodeRange {
                index: 9,
                max: 2,
                ..
            })
        ));
    }

    #[test]
    fn wrong_side() {
        let (c, _) = codec();
        let img = EncodedImage::blank(16);
        assert!(matches!(
            c.decode(&img, StrayBytes::Reject),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn free_functions_match_codec() {
        let (c, ds) = codec();
        let img = encode(&ds.records[2], c.stats(), c.schema(), c.layout()).unwrap();
        assert_eq!(img, c.encode(&ds.records[2]).unwrap());
        let back = decode(&img, c.stats(), c.schema(), c.layout()).unwrap();
        assert_eq!(back, c.decode(&img, StrayBytes::Reject).unwrap());
    }

    #[test]
    fn two_byte_indices_are_little_endian() {
        let schema = FeatureSchema {
            dataset_id: "wide".into(),
            has_header: false,
            label_column: "label".into(),
            excluded_columns: vec![],
            features: vec![Feature {
                name: "svc".into(),
                kind: FeatureKind::Categorical,
            }],
        };
        let records = (0..300)
            .map(|i| FlowRecord {
                values: vec![RawValue::Text(format!("s{i}"))],
                label: 0,
                source_row: i,
            })
            .collect();
        let ds = Dataset {
            records,
            schema_id: "wide".into(),
            split: Split::Train,
            label_scheme: LabelScheme::builtin("nslkdd", LabelMode::Binary).unwrap(),
            dropped: 0,
            warnings: vec![],
        };
        let stats = fit(&ds, &schema).unwrap();
        let c = Codec::new(schema, stats, LayoutSpec::default()).unwrap();
        assert_eq!(c.plan().categorical_widths, [2]);
        // index 300 = 0x012C
        let img = c.encode(&ds.records[299]).unwrap();
        let slots = &c.plan().categorical_slots;
        assert_eq!(c.plan().categorical_start(), Some(47));
        assert_eq!(img.byte(slots[0]), 0x2C);
        assert_eq!(img.byte(slots[1]), 0x01);
        let back = c.decode(&img, StrayBytes::Reject).unwrap();
        assert_eq!(back.values[0], RawValue::Text("s299".into()));
    }
}
