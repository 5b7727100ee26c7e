//! Per-class sample grids: one column per class, `per_class` rows, a caption
//! under each column. Tiles are upscaled by pixel replication so every
//! encoded byte keeps its exact colour.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use flow2img::codec::read_png;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::font::{draw_text, text_height, text_width};
use crate::labels::{read_index, LabelEntry};
use crate::{config, index_classes};

const BACKGROUND: [u8; 3] = [0x40, 0x40, 0x40];
const INK: [u8; 3] = [0xff, 0xff, 0xff];

#[derive(Clone, Debug)]
pub struct MontageOptions {
    pub per_class: usize,
    /// Upscaling factor for each tile.
    pub scale: usize,
    pub side: usize,
    pub seed: u64,
    /// Column order by class name; default is every class index from 0 to
    /// the largest one in the index.
    pub classes: Option<Vec<String>>,
}

impl Default for MontageOptions {
    fn default() -> Self {
        Self {
            per_class: 1,
            scale: 4,
            side: 32,
            seed: 42,
            classes: None,
        }
    }
}

#[derive(Debug)]
pub struct MontageOutcome {
    pub width: usize,
    pub height: usize,
    pub columns: Vec<String>,
    /// Tiles left black because a class ran short.
    pub padded: usize,
    /// Filenames per column, top to bottom.
    pub picked: Vec<Vec<String>>,
}

/// Picks up to `n` entries, seeded, kept in index order.
fn pick<'a>(pool: &[&'a LabelEntry], n: usize, rng: &mut ChaCha8Rng) -> Vec<&'a LabelEntry> {
    if pool.len() <= n {
        return pool.to_vec();
    }
    let mut idx = sample(rng, pool.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

pub fn cmd_montage(
    images_dir: &Path,
    labels_index: &Path,
    out_png: &Path,
    opts: &MontageOptions,
    log: &mut dyn Write,
) -> Result<MontageOutcome> {
    if opts.per_class == 0 {
        return Err(config("--per-class must be at least 1"));
    }
    if opts.scale == 0 {
        return Err(config("--scale must be at least 1"));
    }
    let entries = read_index(labels_index)?;
    let known = index_classes(&entries);

    // (caption, members)
    let columns: Vec<(String, Vec<&LabelEntry>)> = match &opts.classes {
        Some(names) => names
            .iter()
            .map(|n| {
                (
                    n.clone(),
                    entries.iter().filter(|e| &e.class_name == n).collect(),
                )
            })
            .collect(),
        None => {
            let last = known.keys().next_back().copied();
            (0..last.map_or(0, |l| l + 1))
                .map(|i| {
                    let name = known
                        .get(&i)
                        .cloned()
                        .unwrap_or_else(|| format!("class {i}"));
                    (
                        name,
                        entries.iter().filter(|e| e.class_index == i).collect(),
                    )
                })
                .collect()
        }
    };
    if columns.is_empty() {
        return Err(config(format!(
            "{} lists no classes",
            labels_index.display()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let picked: Vec<Vec<&LabelEntry>> = columns
        .iter()
        .map(|(_, pool)| pick(pool, opts.per_class, &mut rng))
        .collect();
    let mut padded = 0;
    for ((name, pool), got) in columns.iter().zip(&picked) {
        if got.len() < opts.per_class {
            padded += opts.per_class - got.len();
            writeln!(
                log,
                "warning: class `{name}` has {} of {} requested samples; padding with black tiles",
                pool.len(),
                opts.per_class
            )?;
        }
    }

    let tile = opts.side * opts.scale;
    let gap = opts.scale.max(2);
    let text_scale = (opts.scale / 2).max(1);
    let caption = text_height(text_scale) + 2 * gap;
    let width = columns.len() * (tile + gap) + gap;
    let height = opts.per_class * (tile + gap) + gap + caption;
    let mut buf = BACKGROUND.repeat(width * height);

    for (c, col) in picked.iter().enumerate() {
        let x0 = gap + c * (tile + gap);
        for r in 0..opts.per_class {
            let y0 = gap + r * (tile + gap);
            let img = match col.get(r) {
                Some(e) => Some(
                    read_png(images_dir.join(&e.filename), opts.side)
                        .with_context(|| format!("reading tile {}", e.filename))?,
                ),
                None => None,
            };
            for ty in 0..tile {
                let row = (y0 + ty) * width;
                for tx in 0..tile {
                    let px = img
                        .as_ref()
                        .map_or([0; 3], |img| img.pixel(ty / opts.scale, tx / opts.scale));
                    let o = (row + x0 + tx) * 3;
                    buf[o..o + 3].copy_from_slice(&px);
                }
            }
        }
        // Caption, truncated to the tile width and centred under it.
        let name = &columns[c].0;
        let fit = name
            .char_indices()
            .map(|(i, ch)| i + ch.len_utf8())
            .take_while(|&end| text_width(&name[..end], text_scale) <= tile)
            .last()
            .unwrap_or(0);
        let text = &name[..fit];
        let tx = x0 + (tile - text_width(text, text_scale)) / 2;
        let ty = height - caption + gap;
        draw_text(&mut buf, width, tx, ty, text, text_scale, INK);
    }

    let file = File::create(out_png).with_context(|| format!("creating {}", out_png.display()))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header()?;
    w.write_image_data(&buf)?;
    w.finish()?;

    writeln!(
        log,
        "montage {}x{} ({} classes x {} per class) -> {}",
        width,
        height,
        columns.len(),
        opts.per_class,
        out_png.display()
    )?;
    Ok(MontageOutcome {
        width,
        height,
        columns: columns.into_iter().map(|(n, _)| n).collect(),
        padded,
        picked: picked
            .iter()
            .map(|col| col.iter().map(|e| e.filename.clone()).collect())
            .collect(),
    })
}
