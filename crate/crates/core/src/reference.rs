//! Published per-class counts of the original NSL-KDD and UNSW-NB15 splits
//! under the five-class label schemes.

use crate::ingest::Split;
use crate::schema::{NSLKDD, UNSWNB15};

const NSLKDD_TRAIN: [(&str, usize); 5] = [
    ("Normal", 67343),
    ("R2L", 995),
    ("Probe", 11656),
    ("DoS", 45927),
    ("U2R", 52),
];
const NSLKDD_TEST: [(&str, usize); 5] = [
    ("Normal", 9711),
    ("R2L", 2885),
    ("Probe", 2421),
    ("DoS", 7460),
    ("U2R", 67),
];
const UNSWNB15_TRAIN: [(&str, usize); 5] = [
    ("Normal", 56000),
    ("DoS", 12264),
    ("Reconnaissance", 10491),
    ("Shellcode", 1133),
    ("Worms", 130),
];
const UNSWNB15_TEST: [(&str, usize); 5] = [
    ("Normal", 37000),
    ("DoS", 4089),
    ("Reconnaissance", 3496),
    ("Shellcode", 378),
    ("Worms", 44),
];

/// Expected `(class, count)` rows for a dataset split, multi-class scheme.
pub fn table1(dataset_id: &str, split: Split) -> Option<&'static [(&'static str, usize)]> {
    match (dataset_id, split) {
        (NSLKDD, Split::Train) => Some(&NSLKDD_TRAIN),
        (NSLKDD, Split::Test) => Some(&NSLKDD_TEST),
        (UNSWNB15, Split::Train) => Some(&UNSWNB15_TRAIN),
        (UNSWNB15, Split::Test) => Some(&UNSWNB15_TEST),
        _ => None,
    }
}

/// Per-class differences `(class, expected, found)` against the table;
/// empty when everything matches.
pub fn table1_deltas(
    dataset_id: &str,
    split: Split,
    class_names: &[String],
    counts: &[usize],
) -> Option<Vec<(String, usize, usize)>> {
    let table = table1(dataset_id, split)?;
    let found = |name: &str| {
        class_names
            .iter()
            .position(|c| c == name)
            .map(|i| counts[i])
            .unwrap_or(0)
    };
    Some(
        table
            .iter()
            .filter(|(name, n)| found(name) != *n)
            .map(|(name, n)| (name.to_string(), *n, found(name)))
            .collect(),
    )
}
