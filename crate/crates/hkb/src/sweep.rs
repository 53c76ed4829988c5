//! Scale sweeps spread over a thread pool.

use anyhow::{bail, Result};
use hkb_core::measures::{Measure, Weights};
use hkb_core::tree::{assemble, tree_entry, ScaleSweep, TreeOptions, TreeResult};
use rayon::prelude::*;

/// Worker count from `HKB_THREADS`, or `None` to let the pool decide.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("HKB_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => bail!("HKB_THREADS: expected a nonnegative integer, got {v:?}"),
        },
    }
}

/// Same result as `hkb_core::tree::sweep`, with scales solved concurrently.
pub fn parallel_sweep(marginals: &[Measure], weights: &Weights, scales: &ScaleSweep, opts: &TreeOptions) -> Result<TreeResult> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let ts = scales.scales();
    let entries = pool.install(|| {
        ts.par_iter()
            .map(|&t| tree_entry(marginals, weights, t, opts))
            .collect::<hkb_core::Result<Vec<_>>>()
    })?;
    Ok(assemble(entries, marginals.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hkb_core::measures::{DiscreteMeasure, Domain};
    use hkb_core::tree::{sweep, Spacing};

    #[test]
    fn matches_serial_sweep() {
        let d = Domain::new(vec![-1.0], vec![4.0]).unwrap();
        let ms: Vec<Measure> = [0.0, 1.0, 3.0]
            .iter()
            .map(|&x| Measure::Discrete(DiscreteMeasure::dirac(d.clone(), &[x], 1.0).unwrap()))
            .collect();
        let w = Weights::uniform(3).unwrap();
        let s = ScaleSweep::new(0.1, 5.0, 7, Spacing::Log).unwrap();
        let o = TreeOptions::default();
        assert_eq!(parallel_sweep(&ms, &w, &s, &o).unwrap(), sweep(&ms, &w, &s, &o).unwrap());
    }
}
