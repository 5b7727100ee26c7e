#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flow2img::replica::Replica;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flow2img"))
}

/// Runs the binary; returns (success, stdout, stderr).
pub fn run(args: &[&str]) -> (bool, String, String) {
    run_with(bin().args(args))
}

pub fn run_with(cmd: &mut Command) -> (bool, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("spawn flow2img");
    (
        status.success(),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a replica split scaled down by `divisor` into `dir`.
pub fn small_replica(dir: &Path, which: Replica, divisor: usize, seed: u64) -> PathBuf {
    let path = dir.join(which.file_name());
    let counts = which.scaled_counts(divisor);
    which
        .write_counts(BufWriter::new(File::create(&path).unwrap()), &counts, seed)
        .unwrap();
    path
}

/// Writes a full-size replica split into `dir`.
pub fn full_replica(dir: &Path, which: Replica, seed: u64) -> PathBuf {
    let path = dir.join(which.file_name());
    which
        .write(BufWriter::new(File::create(&path).unwrap()), seed)
        .unwrap();
    path
}
