//! Execution strategy for batch work.
//!
//! Every batch entry point takes a [`Parallelism`] so callers (and the
//! benchmarks) can pick the sequential or the rayon path at runtime. Results
//! are always returned in input order, so the choice never changes output.
//! Building without the `parallel` feature removes the rayon path entirely.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed work-unit size for chunked reductions. Chunk boundaries never
/// depend on the thread count, which keeps floating-point sums bit-stable.
pub const CHUNK: usize = 4096;

/// Defaults to the fastest strategy compiled in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Rayon,
}

impl Parallelism {
    /// Every strategy compiled into this build.
    pub fn available() -> &'static [Parallelism] {
        #[cfg(feature = "parallel")]
        {
            &[Parallelism::Sequential, Parallelism::Rayon]
        }
        #[cfg(not(feature = "parallel"))]
        {
            &[Parallelism::Sequential]
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Parallelism::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => "rayon",
        }
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            Parallelism::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => items.par_iter().map(f).collect(),
        }
    }

    /// Maps `f` over `items` with the item index, preserving order.
    pub fn map_indexed<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        match self {
            Parallelism::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }

    /// Maps `f` over fixed-size chunks of `items`, preserving chunk order.
    pub fn map_chunks<'a, T, U, F>(self, items: &'a [T], chunk: usize, f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&'a [T]) -> U + Sync + Send,
    {
        match self {
            Parallelism::Sequential => items.chunks(chunk).map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => items.par_chunks(chunk).map(f).collect(),
        }
    }
}
