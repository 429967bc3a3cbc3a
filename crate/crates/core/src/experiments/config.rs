use serde::{Deserialize, Serialize};

use crate::bounds::WzEpsMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    SzCompare,
    LgzCompare,
    Tradeoff,
    WzCompare,
    RegBenefit,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::SzCompare,
        ExperimentName::LgzCompare,
        ExperimentName::Tradeoff,
        ExperimentName::WzCompare,
        ExperimentName::RegBenefit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::SzCompare => "sz_compare",
            ExperimentName::LgzCompare => "lgz_compare",
            ExperimentName::Tradeoff => "tradeoff",
            ExperimentName::WzCompare => "wz_compare",
            ExperimentName::RegBenefit => "reg_benefit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

/// Inclusive frequency range the regression function draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pool {
    pub lo: u32,
    pub hi: u32,
}

impl Pool {
    pub fn size(&self) -> usize {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }
}

/// Dimension of the hypothesis space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DimSpec {
    /// Fixed number of features `E`.
    Fixed(usize),
    /// `E/2` drawn uniformly from the inclusive range.
    UniformHalf(usize, usize),
}

impl DimSpec {
    pub fn max_half(&self) -> usize {
        match *self {
            DimSpec::Fixed(e) => e / 2,
            DimSpec::UniformHalf(_, hi) => hi,
        }
    }

    pub fn min_half(&self) -> usize {
        match *self {
            DimSpec::Fixed(e) => e / 2,
            DimSpec::UniformHalf(lo, _) => lo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSpec {
    Fixed(f64),
    /// Open interval `(lo, hi)`.
    Uniform(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NSpec {
    Fixed(usize),
    /// `{lo, lo+step, …, hi}`.
    Range {
        lo: usize,
        hi: usize,
        step: usize,
    },
    /// `{min, …, E/2}` for the drawn space.
    UpToHalfDim {
        min: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default = "default_true")]
    pub log: bool,
}

fn default_true() -> bool {
    true
}

impl GammaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let t = k as f64 / last;
                if k == 0 {
                    self.lo
                } else if k + 1 == self.points {
                    self.hi
                } else if self.log {
                    self.lo * (self.hi / self.lo).powf(t)
                } else {
                    self.lo + (self.hi - self.lo) * t
                }
            })
            .collect()
    }
}

/// Gibbs settings for `reg_benefit`; the seed comes from the run stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSettings {
    pub total_samples: usize,
    pub keep_last: usize,
    pub init_gamma: f64,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        GibbsSettings {
            total_samples: 1500,
            keep_last: 1000,
            init_gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub runs: usize,
    pub seed: u64,
    #[serde(rename = "X")]
    pub domain_width: f64,
    pub pool: Pool,
    pub n_pairs: usize,
    #[serde(rename = "E")]
    pub dim: DimSpec,
    pub lambda: LambdaSpec,
    pub snr: f64,
    pub noise: NoiseKind,
    #[serde(rename = "N")]
    pub n_spec: NSpec,
    pub delta: f64,
    pub gamma_grid: GammaGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gibbs: Option<GibbsSettings>,
    #[serde(default)]
    pub wz_eps_mode: WzEpsMode,
    #[serde(default = "default_sup_points")]
    pub sup_grid_points: usize,
}

fn default_sup_points() -> usize {
    10_000
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Settings that mirror each study's published setup.
    pub fn preset(name: ExperimentName) -> Self {
        let base = ExperimentConfig {
            name,
            runs: 500,
            seed: 1,
            domain_width: 2500.0,
            pool: Pool { lo: 1, hi: 30 },
            n_pairs: 20,
            dim: DimSpec::Fixed(20),
            lambda: LambdaSpec::Uniform(0.0, 5.0),
            snr: 150.0,
            noise: NoiseKind::Uniform,
            n_spec: NSpec::Range {
                lo: 100,
                hi: 1000,
                step: 1,
            },
            delta: 0.1,
            gamma_grid: GammaGrid {
                lo: 0.1,
                hi: 100.0,
                points: 50,
                log: true,
            },
            eps_grid: None,
            gibbs: None,
            wz_eps_mode: WzEpsMode::Direct,
            sup_grid_points: default_sup_points(),
        };
        match name {
            ExperimentName::SzCompare | ExperimentName::LgzCompare => base,
            ExperimentName::Tradeoff => ExperimentConfig {
                runs: 50,
                domain_width: 1e6,
                pool: Pool { lo: 1, hi: 100 },
                n_pairs: 30,
                lambda: LambdaSpec::Fixed(1.0),
                snr: 50.0,
                n_spec: NSpec::Fixed(2500),
                delta: 0.5,
                ..base
            },
            ExperimentName::WzCompare => ExperimentConfig {
                lambda: LambdaSpec::Fixed(10.0),
                noise: NoiseKind::Gaussian,
                n_spec: NSpec::Range {
                    lo: 300,
                    hi: 6990,
                    step: 15,
                },
                eps_grid: Some((1..=19).map(|k| k as f64 / 20.0).collect()),
                ..base
            },
            ExperimentName::RegBenefit => ExperimentConfig {
                domain_width: 50.0,
                pool: Pool { lo: 1, hi: 80 },
                n_pairs: 50,
                dim: DimSpec::UniformHalf(5, 50),
                lambda: LambdaSpec::Fixed(10.0),
                snr: 100.0,
                noise: NoiseKind::Gaussian,
                n_spec: NSpec::UpToHalfDim { min: 5 },
                gamma_grid: GammaGrid {
                    lo: 1e-4,
                    hi: 1e3,
                    points: 71,
                    log: true,
                },
                gibbs: Some(GibbsSettings::default()),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        if !(self.domain_width > 0.0 && self.domain_width.is_finite()) {
            return Err(invalid(
                "X",
                format!("must be positive, got {}", self.domain_width),
            ));
        }
        if self.pool.lo == 0 || self.pool.size() == 0 {
            return Err(invalid("pool", "needs 1 <= lo <= hi"));
        }
        if self.n_pairs == 0 || self.n_pairs > self.pool.size() {
            return Err(invalid(
                "n_pairs",
                format!(
                    "must lie in [1, {}] (pool size), got {}",
                    self.pool.size(),
                    self.n_pairs
                ),
            ));
        }
        match self.dim {
            DimSpec::Fixed(e) if e < 2 || e % 2 != 0 => {
                return Err(invalid("E", format!("must be even and >= 2, got {e}")));
            }
            DimSpec::UniformHalf(lo, hi) if lo == 0 || lo > hi => {
                return Err(invalid(
                    "E",
                    format!("uniform_half needs 1 <= lo <= hi, got [{lo}, {hi}]"),
                ));
            }
            _ => {}
        }
        if self.dim.max_half() > self.n_pairs {
            return Err(invalid(
                "E",
                format!(
                    "E/2 can reach {} but n_pairs is {}",
                    self.dim.max_half(),
                    self.n_pairs
                ),
            ));
        }
        match self.lambda {
            LambdaSpec::Fixed(l) if !(l > 0.0 && l.is_finite()) => {
                return Err(invalid("lambda", format!("must be positive, got {l}")));
            }
            LambdaSpec::Uniform(lo, hi) if !(lo >= 0.0 && hi > lo && hi.is_finite()) => {
                return Err(invalid(
                    "lambda",
                    format!("uniform needs 0 <= lo < hi, got ({lo}, {hi})"),
                ));
            }
            _ => {}
        }
        if !(self.snr > 0.0) {
            return Err(invalid(
                "snr",
                format!("must be positive, got {}", self.snr),
            ));
        }
        match self.n_spec {
            NSpec::Fixed(0) => return Err(invalid("N", "must be at least 1")),
            NSpec::Range { lo, hi, step } if lo == 0 || hi < lo || step == 0 => {
                return Err(invalid(
                    "N",
                    format!("range needs 1 <= lo <= hi and step >= 1, got {lo}..{hi} by {step}"),
                ));
            }
            NSpec::UpToHalfDim { min } if min == 0 || min > self.dim.min_half() => {
                return Err(invalid(
                    "N",
                    format!(
                        "up_to_half_dim min {min} must lie in [1, {}]",
                        self.dim.min_half()
                    ),
                ));
            }
            _ => {}
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(
                "delta",
                format!("must lie in (0,1), got {}", self.delta),
            ));
        }
        let g = &self.gamma_grid;
        if g.points == 0 || !(g.lo > 0.0) || g.hi < g.lo || !g.hi.is_finite() {
            return Err(invalid("gamma_grid", "needs points >= 1 and 0 < lo <= hi"));
        }
        if let Some(eps) = &self.eps_grid {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return Err(invalid("eps_grid", "values must lie in (0,1)"));
            }
        }
        if self.name == ExperimentName::WzCompare && self.eps_grid.is_none() {
            return Err(invalid("eps_grid", "required for wz_compare"));
        }
        if let Some(gs) = &self.gibbs {
            if gs.total_samples == 0 || gs.keep_last == 0 || gs.keep_last > gs.total_samples {
                return Err(invalid("gibbs", "needs 1 <= keep_last <= total_samples"));
            }
            if !(gs.init_gamma > 0.0) {
                return Err(invalid("gibbs", "init_gamma must be positive"));
            }
        }
        if self.sup_grid_points < 1000 {
            return Err(invalid("sup_grid_points", "must be at least 1000"));
        }
        Ok(())
    }

    /// Parse and validate a JSON config.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = crate::error::parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
