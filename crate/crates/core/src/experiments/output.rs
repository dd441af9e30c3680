//! Serialised study artifacts: copula JSON, loss-pdf and curve CSVs, summaries.

use std::fmt::Write;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::empirical::EmpiricalResult;
use super::loss_pdf::LossPdf;
use super::study::StudyResult;
use super::sweep::LossCorrCurve;
use crate::error::Result;

/// One named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: impl Into<String>, text: String) -> Self {
        Self { name: name.into(), bytes: text.into_bytes() }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| crate::error::Error::invalid("json", e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn loss_pdf_csv(pdf: &LossPdf) -> String {
    let mut out = format!("# point_mass_at_zero={}\nbin_left,bin_right,density\n", pdf.point_mass_at_zero);
    for (l, r, d) in pdf.bins() {
        let _ = writeln!(out, "{l},{r},{d}");
    }
    out
}

pub fn curves_csv(curves: &[LossCorrCurve]) -> String {
    let mut out = String::from("K,c_a,corr,stderr,n_pairs_used\n");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(out, "{},{},{},{},{}", c.k, p.c_a, p.corr, p.stderr, p.n_pairs_used);
        }
    }
    out
}

/// Scalars of one study, without the grids.
#[derive(Debug, Serialize)]
struct StudyScalars<'a> {
    #[serde(rename = "K")]
    k: usize,
    avg_c_a: f64,
    c_a_stderr: f64,
    avg_cross_c_a: f64,
    avg_loss_corr: f64,
    loss_corr_stderr: f64,
    nondefault_prob: &'a [f64; 2],
    nondefault_stderr: &'a [f64; 2],
    near_zero_mass: &'a [f64; 2],
    near_zero_threshold: f64,
    max_abs_deviation: f64,
    n_pairs: usize,
    pairs_used: usize,
    skipped_pairs: usize,
    n_sims: usize,
}

impl<'a> From<&'a StudyResult> for StudyScalars<'a> {
    fn from(r: &'a StudyResult) -> Self {
        Self {
            k: r.k,
            avg_c_a: r.avg_asset_corr,
            c_a_stderr: r.asset_corr_stderr,
            avg_cross_c_a: r.avg_cross_asset_corr,
            avg_loss_corr: r.avg_loss_corr,
            loss_corr_stderr: r.loss_corr_stderr,
            nondefault_prob: &r.nondefault_prob,
            nondefault_stderr: &r.nondefault_stderr,
            near_zero_mass: &r.near_zero_mass,
            near_zero_threshold: super::NEAR_ZERO_LOSS,
            max_abs_deviation: r.deviation.max_abs(),
            n_pairs: r.n_pairs,
            pairs_used: r.pairs_used,
            skipped_pairs: r.skipped_pairs,
            n_sims: r.n_sims,
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a, T: Serialize> {
    seed: u64,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: T,
}

fn study_files(r: &StudyResult, suffix: &str, out: &mut Vec<Artifact>) -> Result<()> {
    out.push(Artifact::new(format!("copula{suffix}.json"), json(&r.averaged_copula)?));
    out.push(Artifact::new(format!("gaussian_copula{suffix}.json"), json(&r.gaussian_ref)?));
    out.push(Artifact::new(format!("deviation{suffix}.json"), json(&r.deviation)?));
    out.push(Artifact::new(format!("loss_pdf{suffix}.csv"), loss_pdf_csv(&r.loss_pdf[0])));
    out.push(Artifact::new(format!("loss_pdf_2{suffix}.csv"), loss_pdf_csv(&r.loss_pdf[1])));
    Ok(())
}

/// Files for a homogeneous or heterogeneous-volatility study.
pub fn study_artifacts(cfg: &ExperimentConfig, r: &StudyResult) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    study_files(r, "", &mut out)?;
    let summary = Summary { seed: cfg.master_seed, config: cfg, body: StudyScalars::from(r) };
    out.push(Artifact::new("summary.json", json(&summary)?));
    Ok(out)
}

/// `losscorr_curve.csv`, one `losscorr_curve_K<k>.csv` per size, and a summary.
pub fn sweep_artifacts(cfg: &ExperimentConfig, curves: &[LossCorrCurve]) -> Result<Vec<Artifact>> {
    let mut out = vec![Artifact::new("losscorr_curve.csv", curves_csv(curves))];
    for c in curves {
        out.push(Artifact::new(format!("losscorr_curve_K{}.csv", c.k), curves_csv(std::slice::from_ref(c))));
    }
    #[derive(Serialize)]
    struct Body<'a> {
        curves: &'a [LossCorrCurve],
    }
    let summary = Summary { seed: cfg.master_seed, config: cfg, body: Body { curves } };
    out.push(Artifact::new("summary.json", json(&summary)?));
    Ok(out)
}

/// Per-size study files (suffixed `_K<k>` when several sizes ran), the curve and a summary.
pub fn empirical_artifacts(cfg: &ExperimentConfig, r: &EmpiricalResult) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    let many = r.studies.len() > 1;
    for s in &r.studies {
        let suffix = if many { format!("_K{}", s.k) } else { String::new() };
        study_files(s, &suffix, &mut out)?;
    }
    out.push(Artifact::new("losscorr_curve.csv", curves_csv(&r.curves)));
    #[derive(Serialize)]
    struct Body<'a> {
        pairing: super::Pairing,
        studies: Vec<StudyScalars<'a>>,
    }
    let body = Body { pairing: r.pairing, studies: r.studies.iter().map(StudyScalars::from).collect() };
    let summary = Summary { seed: cfg.master_seed, config: cfg, body };
    out.push(Artifact::new("summary.json", json(&summary)?));
    Ok(out)
}
