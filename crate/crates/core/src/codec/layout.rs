//! Spatial layout: the inverted-L trajectory, the categorical row and the
//! per-byte plan derived from them.
//!
//! Coordinates are `(row, col)` with `(0, 0)` at the top-left. The trajectory
//! runs up the rightmost column from `(S-1, S-1)` to `(0, S-1)`, then left
//! along the top row from `(0, S-2)` to `(0, 0)`: `2S - 1` pixels in all.
//! Bytes fill each pixel in R, G, B order.

use crate::error::{Error, Result};
use crate::schema::FeatureSchema;
use crate::stats::FittedStats;

pub const CHANNELS: usize = 3;
pub const DEFAULT_SIDE: usize = 32;
const MAX_SIDE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayoutSpec {
    side: usize,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self { side: DEFAULT_SIDE }
    }
}

impl LayoutSpec {
    pub fn new(side: usize) -> Result<Self> {
        if !(2..=MAX_SIDE).contains(&side) {
            return Err(Error::Config(format!(
                "image side must lie in 2..={MAX_SIDE}, got {side}"
            )));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cat_row(&self) -> usize {
        self.side / 2
    }

    pub fn trajectory_len(&self) -> usize {
        2 * self.side - 1
    }

    /// Byte capacity of the trajectory.
    pub fn capacity(&self) -> usize {
        CHANNELS * self.trajectory_len()
    }

    pub fn buffer_len(&self) -> usize {
        self.side * self.side * CHANNELS
    }

    /// The `i`-th trajectory pixel as `(row, col)`.
    pub fn trajectory_pixel(&self, i: usize) -> (usize, usize) {
        let s = self.side;
        assert!(
            i < self.trajectory_len(),
            "trajectory index {i} out of range"
        );
        if i < s {
            (s - 1 - i, s - 1)
        } else {
            (0, s - 1 - (i - s + 1))
        }
    }

    pub fn trajectory(&self) -> Vec<(usize, usize)> {
        (0..self.trajectory_len())
            .map(|i| self.trajectory_pixel(i))
            .collect()
    }
}

/// One byte position in the pixel buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub row: usize,
    pub col: usize,
    pub channel: usize,
}

impl Slot {
    pub fn offset(&self, side: usize) -> usize {
        (self.row * side + self.col) * CHANNELS + self.channel
    }
}

/// Byte positions for one schema + statistics pair. Depends only on the
/// layout and the feature partition, never on record values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BytePlan {
    side: usize,
    pub continuous_slots: Vec<Slot>,
    pub categorical_slots: Vec<Slot>,
    /// Byte width of each categorical feature, in schema order.
    pub categorical_widths: Vec<usize>,
    continuous_offsets: Vec<usize>,
    categorical_offsets: Vec<usize>,
    planned: Vec<bool>,
}

impl BytePlan {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn continuous_bytes(&self) -> usize {
        self.continuous_slots.len()
    }

    pub fn categorical_bytes(&self) -> usize {
        self.categorical_slots.len()
    }

    /// Byte offset of the first categorical byte within the centre row.
    pub fn categorical_start(&self) -> Option<usize> {
        self.categorical_slots
            .first()
            .map(|s| s.col * CHANNELS + s.channel)
    }

    pub(crate) fn continuous_offsets(&self) -> &[usize] {
        &self.continuous_offsets
    }

    pub(crate) fn categorical_offsets(&self) -> &[usize] {
        &self.categorical_offsets
    }

    /// Whether the flat buffer offset belongs to either region.
    pub fn is_planned(&self, offset: usize) -> bool {
        self.planned[offset]
    }
}

pub fn build_plan(
    layout: &LayoutSpec,
    schema: &FeatureSchema,
    stats: &FittedStats,
) -> Result<BytePlan> {
    stats.check_schema(schema)?;
    let widths: Vec<usize> = stats.vocabs.iter().map(|v| v.byte_width()).collect();
    build_plan_for(layout, schema.n_continuous(), &widths)
}

/// Plan for `n_continuous` 4-byte values and categorical fields of the given
/// byte widths.
pub fn build_plan_for(
    layout: &LayoutSpec,
    n_continuous: usize,
    categorical_widths: &[usize],
) -> Result<BytePlan> {
    let side = layout.side();
    let needed = 4 * n_continuous;
    if needed > layout.capacity() {
        return Err(Error::Capacity {
            needed,
            capacity: layout.capacity(),
        });
    }
    let continuous_slots: Vec<Slot> = (0..needed)
        .map(|b| {
            let (row, col) = layout.trajectory_pixel(b / CHANNELS);
            Slot {
                row,
                col,
                channel: b % CHANNELS,
            }
        })
        .collect();

    let cat_bytes: usize = categorical_widths.iter().sum();
    let row = layout.cat_row();
    // every column but the last; (row, S-1) is a trajectory pixel
    let available = CHANNELS * (side - 1);
    let row_bytes = CHANNELS * side;
    let start = row_bytes.saturating_sub(cat_bytes) / 2;
    if cat_bytes > row_bytes || start + cat_bytes > available {
        return Err(Error::Overlap {
            row,
            bytes: cat_bytes,
            available,
        });
    }
    let categorical_slots: Vec<Slot> = (start..start + cat_bytes)
        .map(|b| Slot {
            row,
            col: b / CHANNELS,
            channel: b % CHANNELS,
        })
        .collect();

    let continuous_offsets: Vec<usize> = continuous_slots.iter().map(|s| s.offset(side)).collect();
    let categorical_offsets: Vec<usize> =
        categorical_slots.iter().map(|s| s.offset(side)).collect();
    let mut planned = vec![false; layout.buffer_len()];
    for &o in continuous_offsets.iter().chain(&categorical_offsets) {
        debug_assert!(!planned[o], "plan slots overlap at offset {o}");
        planned[o] = true;
    }
    Ok(BytePlan {
        side,
        continuous_slots,
        categorical_slots,
        categorical_widths: categorical_widths.to_vec(),
        continuous_offsets,
        categorical_offsets,
        planned,
    })
}
