//! Batch commands behind the `flow2img` binary.
//!
//! Every command takes a log writer for its human-readable report and
//! returns a typed outcome; `main` only maps outcomes to exit codes.
//! Warnings are written to the log prefixed with `warning:` and never
//! change an outcome.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use flow2img::codec::build_plan;
use flow2img::codec::{read_png, to_png_bytes};
use flow2img::ingest::{load_dataset_with, Dataset, RawValue, Split};
use flow2img::manifest::{file_digest, Manifest};
use flow2img::reference::{table1, table1_deltas};
use flow2img::schema::{
    resolve_schema, FeatureKind, FeatureSchema, LabelMode, LabelScheme, LabelTarget,
};
use flow2img::stats::fit_with;
use flow2img::verify::{verify, VerifyReport};
use flow2img::{LayoutSpec, Parallelism, StrayBytes};

pub mod font;
pub mod labels;
pub mod montage;

use labels::{image_name, write_index, LabelEntry};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("refusing to overwrite `{0}`: it exists and is not empty (pass --force)")]
    RefuseOverwrite(PathBuf),
    #[error("configuration error: {0}")]
    Config(String),
}

/// The label scheme for a schema: the shipped one for known datasets, and
/// for custom schemas a binary scheme treating `normal`/`benign` as class 0.
pub fn label_scheme(schema: &FeatureSchema, mode: LabelMode) -> Result<LabelScheme> {
    if let Ok(s) = LabelScheme::builtin(&schema.dataset_id, mode) {
        return Ok(s);
    }
    if mode == LabelMode::MultiClass {
        return Err(CliError::Config(format!(
            "no multi-class label scheme for dataset `{}`",
            schema.dataset_id
        ))
        .into());
    }
    Ok(LabelScheme::new(
        mode,
        vec!["Normal".into(), "Attack".into()],
        [
            ("normal".to_string(), LabelTarget::Class(0)),
            ("benign".to_string(), LabelTarget::Class(0)),
        ],
        Some(LabelTarget::Class(1)),
    )?)
}

fn load(
    path: &Path,
    schema: &FeatureSchema,
    mode: LabelMode,
    split: Split,
    par: Parallelism,
) -> Result<Dataset> {
    let scheme = label_scheme(schema, mode)?;
    load_dataset_with(path, schema, &scheme, split, par)
        .with_context(|| format!("loading {}", path.display()))
}

fn warn_all(log: &mut dyn Write, warnings: &[String]) -> Result<()> {
    for w in warnings {
        writeln!(log, "warning: {w}")?;
    }
    Ok(())
}

fn refuse_file(path: &Path, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(CliError::RefuseOverwrite(path.to_path_buf()).into());
    }
    Ok(())
}

/// Guesses the split from a file name (`test` anywhere means test).
pub fn infer_split(path: &Path) -> Split {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    if name.contains("test") {
        Split::Test
    } else {
        Split::Train
    }
}

/// Fits statistics on a training CSV and writes the manifest. Every row
/// contributes, whatever label mode is used later.
pub fn cmd_fit(
    input: &Path,
    schema_source: &str,
    manifest_out: &Path,
    side: usize,
    force: bool,
    par: Parallelism,
    log: &mut dyn Write,
) -> Result<Manifest> {
    refuse_file(manifest_out, force)?;
    let schema = resolve_schema(schema_source)?;
    let layout = LayoutSpec::new(side)?;
    let train = load(input, &schema, LabelMode::Binary, Split::Train, par)?;
    warn_all(log, &train.warnings)?;
    let stats = fit_with(&train, &schema, par)?;
    let plan = build_plan(&layout, &schema, &stats)?;
    let manifest = Manifest::new(schema, layout, stats, file_digest(input)?)?;

    writeln!(log, "fitted {} records of {}", train.len(), input.display())?;
    let stats = &manifest.stats;
    for (&p, s) in manifest
        .schema
        .continuous_positions()
        .iter()
        .zip(&stats.continuous)
    {
        writeln!(
            log,
            "  {:<28} mu={:<24} sigma={}",
            manifest.schema.features[p].name, s.mu, s.sigma
        )?;
    }
    for (&p, v) in manifest
        .schema
        .categorical_positions()
        .iter()
        .zip(&stats.vocabs)
    {
        writeln!(
            log,
            "  {:<28} vocabulary={} (+UNK) width={}B",
            manifest.schema.features[p].name,
            v.len(),
            v.byte_width()
        )?;
    }
    writeln!(
        log,
        "capacity: {}/{} bytes on the trajectory, {} categorical bytes on row {}",
        plan.continuous_bytes(),
        layout.capacity(),
        plan.categorical_bytes(),
        layout.cat_row()
    )?;
    manifest.save(manifest_out)?;
    writeln!(
        log,
        "manifest: {} ({})",
        manifest_out.display(),
        manifest.content_digest()
    )?;
    Ok(manifest)
}

#[derive(Debug)]
pub struct EncodeOutcome {
    pub written: usize,
    pub class_counts: Vec<(String, usize)>,
    pub entries: Vec<LabelEntry>,
}

/// Encodes every retained record of `input` to `out_dir/{row:08}_{class}.png`
/// and writes the labels index.
#[allow(clippy::too_many_arguments)]
pub fn cmd_encode(
    manifest: &Path,
    input: &Path,
    out_dir: &Path,
    labels_out: &Path,
    mode: LabelMode,
    force: bool,
    par: Parallelism,
    log: &mut dyn Write,
) -> Result<EncodeOutcome> {
    if !force && out_dir.is_dir() && fs::read_dir(out_dir)?.next().is_some() {
        return Err(CliError::RefuseOverwrite(out_dir.to_path_buf()).into());
    }
    let manifest = Manifest::load(manifest)?;
    let codec = manifest.codec()?;
    let ds = load(input, &manifest.schema, mode, infer_split(input), par)?;
    warn_all(log, &ds.warnings)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let names = ds.label_scheme.class_names();
    let results = par.map(&ds.records, |rec| -> Result<LabelEntry, String> {
        let class_name = &names[rec.label];
        let filename = image_name(rec.source_row, class_name);
        let img = codec.encode(rec).map_err(|e| e.to_string())?;
        let bytes = to_png_bytes(&img).map_err(|e| e.to_string())?;
        fs::write(out_dir.join(&filename), bytes).map_err(|e| format!("{filename}: {e}"))?;
        Ok(LabelEntry {
            filename,
            class_index: rec.label,
            class_name: class_name.clone(),
            source_row: rec.source_row,
        })
    });

    let mut entries = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (rec, r) in ds.records.iter().zip(results) {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => errors.push(format!("row {}: {e}", rec.source_row)),
        }
    }
    if !errors.is_empty() {
        for e in errors.iter().take(20) {
            writeln!(log, "error: {e}")?;
        }
        bail!("{} of {} records failed to encode", errors.len(), ds.len());
    }
    write_index(labels_out, &entries)?;

    let class_counts: Vec<(String, usize)> = names.iter().cloned().zip(ds.class_counts()).collect();
    writeln!(
        log,
        "encoded {} images into {}",
        entries.len(),
        out_dir.display()
    )?;
    for (name, n) in &class_counts {
        writeln!(log, "  {name:<16} {n}")?;
    }
    if ds.dropped > 0 {
        writeln!(log, "  {:<16} {}", "(dropped)", ds.dropped)?;
    }
    writeln!(log, "labels: {}", labels_out.display())?;
    Ok(EncodeOutcome {
        written: entries.len(),
        class_counts,
        entries,
    })
}

/// Decodes every image listed in the labels index back to a CSV with the
/// schema's feature columns, the class name and the source row.
pub fn cmd_decode(
    manifest: &Path,
    images_dir: &Path,
    labels_index: &Path,
    out_csv: &Path,
    stray: StrayBytes,
    par: Parallelism,
    log: &mut dyn Write,
) -> Result<usize> {
    let manifest = Manifest::load(manifest)?;
    let codec = manifest.codec()?;
    let side = manifest.layout.side();
    let entries = labels::read_index(labels_index)?;
    let decoded = par.map(&entries, |e| {
        let img = read_png(images_dir.join(&e.filename), side)?;
        codec.decode(&img, stray)
    });

    let mut w = csv::Writer::from_path(out_csv)
        .with_context(|| format!("writing {}", out_csv.display()))?;
    let mut header: Vec<&str> = manifest
        .schema
        .features
        .iter()
        .map(|f| f.name.as_str())
        .collect();
    header.extend(["class_name", "source_row"]);
    w.write_record(&header)?;
    for (e, rec) in entries.iter().zip(decoded) {
        let rec = rec.with_context(|| format!("decoding {}", e.filename))?;
        let mut row: Vec<String> = rec.values.iter().map(RawValue::to_string).collect();
        row.push(e.class_name.clone());
        row.push(e.source_row.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    writeln!(
        log,
        "decoded {} images into {}",
        entries.len(),
        out_csv.display()
    )?;
    Ok(entries.len())
}

/// Round-trips every record in memory and reports the worst errors.
pub fn cmd_verify(
    manifest: &Path,
    input: &Path,
    mode: LabelMode,
    par: Parallelism,
    log: &mut dyn Write,
) -> Result<VerifyReport> {
    let manifest = Manifest::load(manifest)?;
    let codec = manifest.codec()?;
    let ds = load(input, &manifest.schema, mode, infer_split(input), par)?;
    warn_all(log, &ds.warnings)?;
    let report = verify(&codec, &ds.records, par);
    write!(log, "{}", report.summary())?;
    Ok(report)
}

#[derive(Debug)]
pub struct StatsOutcome {
    pub dataset_id: String,
    pub split: Split,
    pub counts: Vec<(String, usize)>,
    pub dropped: usize,
    /// `(class, expected, found)` rows; `None` unless a comparison was asked for.
    pub deltas: Option<Vec<(String, usize, usize)>>,
}

impl StatsOutcome {
    pub fn matches(&self) -> bool {
        self.deltas.as_ref().is_none_or(|d| d.is_empty())
    }
}

/// Per-class counts of one split file, optionally checked against the
/// published table.
pub fn cmd_stats(
    input: &Path,
    schema_source: &str,
    mode: LabelMode,
    split: Option<Split>,
    expect_table1: bool,
    par: Parallelism,
    log: &mut dyn Write,
) -> Result<StatsOutcome> {
    let schema = resolve_schema(schema_source)?;
    let split = split.unwrap_or_else(|| infer_split(input));
    if expect_table1 {
        if mode != LabelMode::MultiClass {
            return Err(CliError::Config("--expect table1 needs --label-mode multi".into()).into());
        }
        if table1(&schema.dataset_id, split).is_none() {
            return Err(CliError::Config(format!(
                "no reference counts for dataset `{}`",
                schema.dataset_id
            ))
            .into());
        }
    }
    let ds = load(input, &schema, mode, split, par)?;
    warn_all(log, &ds.warnings)?;
    let names = ds.label_scheme.class_names().to_vec();
    let counts = ds.class_counts();

    writeln!(
        log,
        "{} {} ({} mode): {}",
        schema.dataset_id,
        split,
        mode,
        input.display()
    )?;
    writeln!(log, "{:<16} {:>9}", "class", "records")?;
    for (name, n) in names.iter().zip(&counts) {
        writeln!(log, "{name:<16} {n:>9}")?;
    }
    writeln!(log, "{:<16} {:>9}", "total", ds.len())?;
    if ds.dropped > 0 {
        writeln!(log, "{:<16} {:>9}", "dropped", ds.dropped)?;
    }

    let deltas = if expect_table1 {
        let d = table1_deltas(&schema.dataset_id, split, &names, &counts).expect("checked above");
        if d.is_empty() {
            writeln!(log, "table1: all {} counts match", names.len())?;
        }
        for (class, expected, found) in &d {
            let diff = *found as i64 - *expected as i64;
            writeln!(
                log,
                "table1 mismatch: {class}: expected {expected}, found {found} ({diff:+})"
            )?;
        }
        Some(d)
    } else {
        None
    };
    Ok(StatsOutcome {
        dataset_id: schema.dataset_id,
        split,
        counts: names.into_iter().zip(counts).collect(),
        dropped: ds.dropped,
        deltas,
    })
}

/// Per-feature `[min, max]` of the continuous features over a dataset.
/// Missing values are skipped; an all-missing feature gets `(0, 0)`.
pub fn fit_min_max(ds: &Dataset, schema: &FeatureSchema, par: Parallelism) -> Vec<(f64, f64)> {
    let pos = schema.continuous_positions();
    let partial = par.map_chunks(&ds.records, flow2img::exec::CHUNK, |chunk| {
        let mut acc = vec![(f64::INFINITY, f64::NEG_INFINITY); pos.len()];
        for rec in chunk {
            for (a, &p) in acc.iter_mut().zip(&pos) {
                if let Some(x) = rec.values[p].as_number() {
                    a.0 = a.0.min(x);
                    a.1 = a.1.max(x);
                }
            }
        }
        acc
    });
    let mut acc = vec![(f64::INFINITY, f64::NEG_INFINITY); pos.len()];
    for part in partial {
        for (a, b) in acc.iter_mut().zip(part) {
            a.0 = a.0.min(b.0);
            a.1 = a.1.max(b.1);
        }
    }
    acc.into_iter()
        .map(|(lo, hi)| if lo > hi { (0.0, 0.0) } else { (lo, hi) })
        .collect()
}

/// `2 (x - lo) / (hi - lo) - 1`; a constant feature maps to 0. Values outside
/// the training range are not clipped.
pub fn min_max_scale(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        2.0 * (x - lo) / (hi - lo) - 1.0
    } else {
        0.0
    }
}

/// Writes the flow-modality CSV: continuous features min-max scaled to
/// [-1, 1] with bounds fitted on `train`, categoricals as vocabulary indices
/// from the manifest, then `class_index`, `class_name`, `source_row`.
#[allow(clippy::too_many_arguments)]
pub fn cmd_export_flow(
    manifest: &Path,
    train: &Path,
    input: &Path,
    out_csv: &Path,
    mode: LabelMode,
    force: bool,
    par: Parallelism,
    log: &mut dyn Write,
) -> Result<usize> {
    refuse_file(out_csv, force)?;
    let manifest = Manifest::load(manifest)?;
    let digest = file_digest(train)?;
    if digest != manifest.source_hash {
        bail!(
            "{} is not the file the manifest was fitted on ({} vs {})",
            train.display(),
            digest,
            manifest.source_hash
        );
    }
    let schema = &manifest.schema;
    let train_ds = load(train, schema, LabelMode::Binary, Split::Train, par)?;
    let bounds = fit_min_max(&train_ds, schema, par);
    drop(train_ds);
    let ds = load(input, schema, mode, infer_split(input), par)?;
    warn_all(log, &ds.warnings)?;

    let names = ds.label_scheme.class_names();
    let rows = par.map(&ds.records, |rec| {
        let (mut c, mut k) = (0, 0);
        let mut row: Vec<String> = schema
            .features
            .iter()
            .zip(&rec.values)
            .map(|(f, v)| match f.kind {
                FeatureKind::Continuous => {
                    let (lo, hi) = bounds[c];
                    c += 1;
                    match v.as_number() {
                        Some(x) => min_max_scale(x, lo, hi).to_string(),
                        None => "0".to_string(),
                    }
                }
                FeatureKind::Categorical => {
                    let idx = manifest.stats.vocabs[k].index_of(v.as_text().unwrap_or(""));
                    k += 1;
                    idx.to_string()
                }
            })
            .collect();
        row.push(rec.label.to_string());
        row.push(names[rec.label].clone());
        row.push(rec.source_row.to_string());
        row
    });

    let mut w = csv::Writer::from_path(out_csv)
        .with_context(|| format!("writing {}", out_csv.display()))?;
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.extend(["class_index", "class_name", "source_row"]);
    w.write_record(&header)?;
    for row in &rows {
        w.write_record(row)?;
    }
    w.flush()?;
    writeln!(
        log,
        "exported {} records into {}",
        rows.len(),
        out_csv.display()
    )?;
    Ok(rows.len())
}

/// Parses `FLOW2IMG_THREADS`: unset or empty means no cap.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "FLOW2IMG_THREADS must be a positive integer, got `{v}`"
            ))
            .into()),
        },
    }
}

/// Class names of a labels index by class index, for reports.
pub fn index_classes(entries: &[LabelEntry]) -> BTreeMap<usize, String> {
    entries
        .iter()
        .map(|e| (e.class_index, e.class_name.clone()))
        .collect()
}

pub(crate) fn config(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(CliError::Config(msg.into()))
}
