use serde::Serialize;

use super::config::{ExperimentConfig, Mode};
use super::study::synthetic_pair;
use super::{run_units, Moments, STREAM_SWEEP};
use crate::error::{Error, Result};
use crate::rng::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub c_a: f64,
    /// Pair-averaged loss correlation; NaN when no pair had loss variance.
    pub corr: f64,
    pub stderr: f64,
    pub n_pairs_used: usize,
}

/// Loss correlation against asset correlation for one portfolio size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossCorrCurve {
    #[serde(rename = "K")]
    pub k: usize,
    pub points: Vec<CurvePoint>,
}

/// One curve per `K`, each point averaging `n_pairs` pair correlations.
pub fn run_loss_corr_sweep(cfg: &ExperimentConfig) -> Result<Vec<LossCorrCurve>> {
    cfg.validate()?;
    if cfg.mode == Mode::Empirical {
        return Err(Error::config("mode", "sweeps run on synthetic markets"));
    }
    let ks = cfg.k.values();
    let cas = cfg.c_a.values();
    let per_k = cas.len() * cfg.n_pairs;
    let mut acc = vec![Moments::default(); ks.len() * cas.len()];
    run_units(
        ks.len() * per_k,
        |i| {
            let (ki, rest) = (i / per_k, i % per_k);
            let (ci, pair) = (rest / cfg.n_pairs, rest % cfg.n_pairs);
            let key = StreamKey::for_path(cfg.master_seed, &[STREAM_SWEEP, ks[ki] as u64, ci as u64, pair as u64]);
            synthetic_pair(cfg, ks[ki], cas[ci], key, false).map(|o| o.corr)
        },
        |i, corr| {
            if let Some(c) = corr {
                acc[i / cfg.n_pairs].push(c);
            }
            Ok(())
        },
    )?;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(ki, &k)| LossCorrCurve {
            k,
            points: cas
                .iter()
                .enumerate()
                .map(|(ci, &c_a)| {
                    let m = &acc[ki * cas.len() + ci];
                    CurvePoint { c_a, corr: m.mean(), stderr: m.stderr(), n_pairs_used: m.n }
                })
                .collect(),
        })
        .collect())
}
