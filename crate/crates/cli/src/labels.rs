//! The labels index: one CSV row per emitted image.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub const HEADER: [&str; 4] = ["filename", "class_index", "class_name", "source_row"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelEntry {
    pub filename: String,
    pub class_index: usize,
    pub class_name: String,
    pub source_row: usize,
}

/// `{row:08}_{class}.png`, with anything outside `[A-Za-z0-9-]` in the class
/// name replaced by `-`.
pub fn image_name(source_row: usize, class_name: &str) -> String {
    let class: String = class_name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect();
    format!("{source_row:08}_{class}.png")
}

pub fn write_index(path: &Path, entries: &[LabelEntry]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(HEADER)?;
    for e in entries {
        w.write_record([
            e.filename.as_str(),
            &e.class_index.to_string(),
            &e.class_name,
            &e.source_row.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index(path: &Path) -> Result<Vec<LabelEntry>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER) {
        bail!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<usize> {
            rec[j].parse().with_context(|| {
                format!(
                    "{}: row {i}: bad `{}` value `{}`",
                    path.display(),
                    HEADER[j],
                    &rec[j]
                )
            })
        };
        let entry = LabelEntry {
            filename: rec[0].to_string(),
            class_index: num(1)?,
            class_name: rec[2].to_string(),
            source_row: num(3)?,
        };
        if !seen.insert(entry.filename.clone()) {
            bail!(
                "{}: duplicate filename `{}`",
                path.display(),
                entry.filename
            );
        }
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_padded_and_sanitized() {
        assert_eq!(image_name(7, "DoS"), "00000007_DoS.png");
        assert_eq!(image_name(123456789, "a b/c"), "123456789_a-b-c.png");
    }

    #[test]
    fn index_round_trip_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        let entries = vec![
            LabelEntry {
                filename: "a.png".into(),
                class_index: 0,
                class_name: "Normal".into(),
                source_row: 0,
            },
            LabelEntry {
                filename: "b.png".into(),
                class_index: 1,
                class_name: "Attack".into(),
                source_row: 4,
            },
        ];
        write_index(&p, &entries).unwrap();
        assert_eq!(read_index(&p).unwrap(), entries);

        std::fs::write(
            &p,
            "filename,class_index,class_name,source_row\na.png,0,N,0\na.png,0,N,1\n",
        )
        .unwrap();
        assert!(read_index(&p)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
    }
}
