//! Resolution of an [`ExperimentConfig`] from built-in defaults, a named
//! preset, a flat TOML file and command-line flags, in that order.

use std::path::{Path, PathBuf};

use credlab::experiments::{Grid, ParamSpec};
use credlab::{ExperimentConfig, Mode, Pairing, TailParam};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// One layer of settings. Every field is optional; set fields override the layer below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub c_a: Option<Grid<f64>>,
    pub mu: Option<Grid<f64>>,
    pub sigma: Option<Grid<f64>>,
    pub sigma_bounds: Option<[f64; 2]>,
    pub leverage: Option<f64>,
    pub leverage_bounds: Option<[f64; 2]>,
    #[serde(rename = "K")]
    pub k: Option<Grid<usize>>,
    pub tail_n: Option<TailParam>,
    pub n_pairs: Option<usize>,
    pub n_sims: Option<usize>,
    pub n_iterations: Option<usize>,
    pub b: Option<usize>,
    pub pdf_bins: Option<usize>,
    pub horizon: Option<f64>,
    pub master_seed: Option<u64>,
    pub pairing: Option<Pairing>,
    pub market_a: Option<PathBuf>,
    pub market_b: Option<PathBuf>,
}

fn to_spec(g: Grid<f64>) -> ParamSpec {
    match g {
        Grid::One(x) => ParamSpec::Scalar(x),
        Grid::Many(v) if v.len() == 1 => ParamSpec::Scalar(v[0]),
        Grid::Many(v) => ParamSpec::PerContract(v),
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig, markets: &mut Markets) {
        if let Some(v) = &self.c_a {
            cfg.c_a = v.clone();
        }
        if let Some(v) = &self.mu {
            cfg.mu = to_spec(v.clone());
        }
        if let Some(v) = &self.sigma {
            cfg.sigma = to_spec(v.clone());
        }
        if let Some([low, high]) = self.sigma_bounds {
            cfg.sigma = ParamSpec::Uniform { low, high };
        }
        if let Some(v) = self.leverage {
            cfg.leverage = ParamSpec::Scalar(v);
        }
        if let Some([low, high]) = self.leverage_bounds {
            cfg.leverage = ParamSpec::Uniform { low, high };
        }
        if let Some(v) = &self.k {
            cfg.k = v.clone();
        }
        macro_rules! copy {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { cfg.$f = v; })*};
        }
        copy!(tail_n, n_pairs, n_sims, n_iterations, b, pdf_bins, horizon, master_seed, pairing);
        if let Some(p) = &self.market_a {
            markets.a = Some(p.clone());
        }
        if let Some(p) = &self.market_b {
            markets.b = Some(p.clone());
        }
    }
}

/// Data files for the empirical mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Markets {
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
}

pub const PRESETS: &[&str] = &[
    "fig2-top",
    "fig2-bottom",
    "fig3-top",
    "fig3-middle",
    "fig3-bottom",
    "fig5-top-left",
    "fig5-top-right",
    "fig5-bottom-left",
    "fig5-bottom-right",
    "fig6",
    "table1-cross",
    "table1-sp-sp",
    "table1-nk-nk",
    "fig9-cross",
    "fig9-sp-sp",
    "fig9-nk-nk",
];

const SWEEP_K: [usize; 11] = [1, 2, 3, 4, 7, 10, 15, 25, 50, 100, 150];
const EMPIRICAL_K: [usize; 13] = [1, 2, 4, 7, 10, 14, 20, 30, 40, 50, 60, 70, 80];

fn ca_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Built-in parameter set and the mode it belongs to.
pub fn preset(name: &str) -> Result<(Mode, Overrides), UsageError> {
    let homogeneous = |c_a: f64, mu: f64, sigma: f64, tail: TailParam| Overrides {
        c_a: Some(Grid::One(c_a)),
        mu: Some(Grid::One(mu)),
        sigma: Some(Grid::One(sigma)),
        leverage: Some(0.75),
        k: Some(Grid::One(50)),
        tail_n: Some(tail),
        ..Default::default()
    };
    let sweep = |mu: f64, tail: TailParam| Overrides {
        c_a: Some(Grid::Many(ca_grid())),
        k: Some(Grid::Many(SWEEP_K.to_vec())),
        ..homogeneous(0.0, mu, 0.02, tail)
    };
    let empirical = |pairing: Pairing, k: Grid<usize>| Overrides {
        leverage_bounds: Some([0.6, 0.9]),
        k: Some(k),
        tail_n: Some(TailParam::Infinite),
        pairing: Some(pairing),
        ..Default::default()
    };
    let inf = TailParam::Infinite;
    let five = TailParam::Finite(5);
    Ok(match name {
        "fig2-top" => (Mode::Homogeneous, homogeneous(0.0, 1e-3, 0.03, inf)),
        "fig2-bottom" => (Mode::Homogeneous, homogeneous(0.0, 1e-3, 0.03, five)),
        "fig3-top" => (Mode::Homogeneous, homogeneous(0.3, 1e-3, 0.02, inf)),
        "fig3-middle" => (Mode::Homogeneous, homogeneous(0.3, 3e-4, 0.02, inf)),
        "fig3-bottom" => (Mode::Homogeneous, homogeneous(0.3, -3e-3, 0.02, inf)),
        "fig5-top-left" => (Mode::Homogeneous, sweep(2e-3, inf)),
        "fig5-top-right" => (Mode::Homogeneous, sweep(2e-3, five)),
        "fig5-bottom-left" => (Mode::Homogeneous, sweep(-3e-3, inf)),
        "fig5-bottom-right" => (Mode::Homogeneous, sweep(-3e-3, five)),
        "fig6" => (
            Mode::HeterogeneousSigma,
            Overrides { sigma: None, sigma_bounds: Some([0.0, 0.25]), ..homogeneous(0.3, -3e-3, 0.02, inf) },
        ),
        "table1-cross" => (Mode::Empirical, empirical(Pairing::Cross, Grid::One(50))),
        "table1-sp-sp" => (Mode::Empirical, empirical(Pairing::WithinA, Grid::One(50))),
        "table1-nk-nk" => (Mode::Empirical, empirical(Pairing::WithinB, Grid::One(50))),
        "fig9-cross" => (Mode::Empirical, empirical(Pairing::Cross, Grid::Many(EMPIRICAL_K.to_vec()))),
        "fig9-sp-sp" => (Mode::Empirical, empirical(Pairing::WithinA, Grid::Many(EMPIRICAL_K.to_vec()))),
        "fig9-nk-nk" => (Mode::Empirical, empirical(Pairing::WithinB, Grid::Many(EMPIRICAL_K.to_vec()))),
        other => {
            return Err(UsageError::new("preset", format!("unknown preset `{other}`; known: {}", PRESETS.join(", "))))
        }
    })
}

/// Defaults for a mode before any preset.
pub fn defaults(mode: Mode) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { mode, ..Default::default() };
    match mode {
        Mode::Homogeneous => {}
        Mode::HeterogeneousSigma => {
            cfg.mu = ParamSpec::Scalar(-3e-3);
            cfg.c_a = Grid::One(0.3);
            cfg.sigma = ParamSpec::Uniform { low: 0.0, high: 0.25 };
        }
        Mode::Empirical => {
            cfg.leverage = ParamSpec::Uniform { low: 0.6, high: 0.9 };
        }
    }
    cfg
}

pub fn read_file(path: &Path) -> Result<Overrides, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError::new("config", format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| UsageError::new("config", format!("{}: {e}", path.display())))
}

/// Layers presets, file and flags over the mode defaults.
pub fn resolve(
    mode: Mode,
    preset_name: Option<&str>,
    file: Option<&Path>,
    flags: &Overrides,
) -> Result<(ExperimentConfig, Markets), UsageError> {
    let mut cfg = defaults(mode);
    let mut markets = Markets::default();
    if let Some(name) = preset_name {
        let (preset_mode, layer) = preset(name)?;
        if preset_mode != mode {
            return Err(UsageError::new("preset", format!("`{name}` is a {preset_mode:?} preset")));
        }
        layer.apply(&mut cfg, &mut markets);
    }
    if let Some(path) = file {
        read_file(path)?.apply(&mut cfg, &mut markets);
    }
    flags.apply(&mut cfg, &mut markets);
    cfg.validate().map_err(UsageError::from_core)?;
    Ok((cfg, markets))
}
