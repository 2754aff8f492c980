//! Per-cell work distribution.
//!
//! `STOKES_HYBRID_THREADS` selects the mode: unset or `1` runs cells
//! sequentially, `n > 1` uses a pool of `n` workers. Results are always
//! collected in cell order and reduced sequentially, so both modes produce
//! bitwise identical matrices.

use std::sync::OnceLock;

use rayon::prelude::*;

pub const THREADS_ENV: &str = "STOKES_HYBRID_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Deterministic,
    Parallel(usize),
}

fn parse_mode(value: Option<&str>) -> Mode {
    match value.and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 1 => Mode::Parallel(n),
        _ => Mode::Deterministic,
    }
}

static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();

fn pool() -> Option<&'static rayon::ThreadPool> {
    POOL.get_or_init(|| match mode() {
        Mode::Deterministic => None,
        Mode::Parallel(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().ok(),
    })
    .as_ref()
}

pub fn mode() -> Mode {
    parse_mode(std::env::var(THREADS_ENV).ok().as_deref())
}

/// `(0..n).map(f)` collected in order, possibly computed in parallel.
pub fn map_cells<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match pool() {
        Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_parsing() {
        assert_eq!(parse_mode(None), Mode::Deterministic);
        assert_eq!(parse_mode(Some("1")), Mode::Deterministic);
        assert_eq!(parse_mode(Some("junk")), Mode::Deterministic);
        assert_eq!(parse_mode(Some("4")), Mode::Parallel(4));
    }

    #[test]
    fn order_is_preserved() {
        let v = map_cells(100, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }
}
