//! Raw path dump: a header of four little-endian u64 values
//! `(dim, noise_dim, n_steps, count)`, then for each path its
//! `(n_steps + 1) * dim` states followed by its `n_steps * noise_dim`
//! increments, all little-endian f64.

use std::io::Write;

use crate::error::{Error, Result};
use crate::estimate::Scenario;
use crate::paths::{simulate_path, SamplePath};

pub fn write_paths(out: &mut impl Write, scenario: &Scenario, x0: &[f64], count: usize) -> Result<usize> {
    let d = scenario.dim() as u64;
    let m = scenario.diffusion.noise_dim() as u64;
    let n = scenario.grid.n_steps() as u64;
    let paths: Vec<SamplePath> = (0..count as u64)
        .map(|i| {
            simulate_path(
                &scenario.drift,
                &scenario.diffusion,
                x0,
                &scenario.grid,
                i,
                scenario.seed,
            )
        })
        .filter(|r| !matches!(r, Err(Error::DivergedPath { .. })))
        .collect::<Result<_>>()?;
    for v in [d, m, n, paths.len() as u64] {
        out.write_all(&v.to_le_bytes())?;
    }
    for p in &paths {
        for v in p.states.iter().chain(&p.increments) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(paths.len())
}

/// `(states, increments)` of one dumped path.
pub type DumpedPath = (Vec<f64>, Vec<f64>);

/// Inverse of [`write_paths`]: `(dim, noise_dim, n_steps, paths)`.
pub fn read_paths(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<DumpedPath>)> {
    let bad = || Error::InvalidArgument("truncated path dump".into());
    let mut words = bytes.chunks_exact(8);
    let mut next = || -> Result<[u8; 8]> { Ok(words.next().ok_or_else(bad)?.try_into().expect("chunk of 8")) };
    let d = u64::from_le_bytes(next()?) as usize;
    let m = u64::from_le_bytes(next()?) as usize;
    let n = u64::from_le_bytes(next()?) as usize;
    let count = u64::from_le_bytes(next()?) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut states = Vec::with_capacity((n + 1) * d);
        for _ in 0..(n + 1) * d {
            states.push(f64::from_le_bytes(next()?));
        }
        let mut inc = Vec::with_capacity(n * m);
        for _ in 0..n * m {
            inc.push(f64::from_le_bytes(next()?));
        }
        out.push((states, inc));
    }
    Ok((d, m, n, out))
}
