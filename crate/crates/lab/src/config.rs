//! Experiment configuration: JSON files, then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hgdlab::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HGDLAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    SeparableTails,
    HardMarginScaling,
    GaussianSqrtScaling,
    SoftMarginCurves,
    SgdFastRate,
    UnboundedSgd,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::SeparableTails,
        ExperimentId::HardMarginScaling,
        ExperimentId::GaussianSqrtScaling,
        ExperimentId::SoftMarginCurves,
        ExperimentId::SgdFastRate,
        ExperimentId::UnboundedSgd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::SeparableTails => "separable_tails",
            ExperimentId::HardMarginScaling => "hard_margin_scaling",
            ExperimentId::GaussianSqrtScaling => "gaussian_sqrt_scaling",
            ExperimentId::SoftMarginCurves => "soft_margin_curves",
            ExperimentId::SgdFastRate => "sgd_fast_rate",
            ExperimentId::UnboundedSgd => "unbounded_sgd",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            let all: Vec<_> = ExperimentId::ALL.iter().map(|e| e.as_str()).collect();
            LabError::Usage(format!("unknown experiment `{s}`; expected one of {}", all.join(", ")))
        })
    }
}

/// Named grids. Empty grids are filled from the experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub opt: Vec<f64>,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub iterations: Vec<u64>,
    pub dims: Vec<usize>,
    pub gammas: Vec<f64>,
    pub losses: Vec<String>,
}

/// Single-valued settings; `None` means the experiment's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub loss: Option<String>,
    pub d: Option<usize>,
    pub gamma_star: Option<f64>,
    /// Margin scale for theorems that take one as input.
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub n: Option<usize>,
    pub n_test: Option<usize>,
    pub n_val: Option<usize>,
    pub eta: Option<f64>,
    /// Hard cap on iterations; runs that hit it are marked `capped`.
    pub max_iterations: Option<u64>,
    pub n_directions: Option<usize>,
    pub multiplier: Option<f64>,
    pub checkpoints_per_doubling: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub overrides: Overrides,
}

fn default_repeats() -> usize {
    1
}

/// Test-set size used for error measurement unless overridden.
pub const DEFAULT_N_TEST: usize = 100_000;

impl ExperimentConfig {
    /// The configuration the acceptance suite runs.
    pub fn defaults(experiment: ExperimentId) -> Self {
        let mut c = Self {
            experiment,
            sweep: Sweep::default(),
            repeats: match experiment {
                ExperimentId::SeparableTails => 3,
                ExperimentId::HardMarginScaling | ExperimentId::GaussianSqrtScaling => 5,
                ExperimentId::SoftMarginCurves => 1,
                ExperimentId::SgdFastRate => 10,
                ExperimentId::UnboundedSgd => 3,
            },
            base_seed: 0,
            out_dir: None,
            overrides: Overrides::default(),
        };
        c.fill_defaults();
        c
    }

    /// Fills empty grids with the experiment's defaults.
    pub fn fill_defaults(&mut self) {
        let s = &mut self.sweep;
        fn fill<T: Clone>(v: &mut Vec<T>, d: &[T]) {
            if v.is_empty() {
                *v = d.to_vec();
            }
        }
        match self.experiment {
            ExperimentId::SeparableTails => {
                fill(&mut s.eps, &[0.2, 0.1, 0.05, 0.025]);
                fill(&mut s.losses, &["poly:p=2,c0=1".to_string(), "logistic".to_string()]);
            }
            ExperimentId::HardMarginScaling => fill(&mut s.opt, &[0.001, 0.004, 0.016]),
            ExperimentId::GaussianSqrtScaling => fill(&mut s.opt, &[0.001, 0.004, 0.016, 0.064]),
            ExperimentId::SoftMarginCurves => {
                fill(&mut s.dims, &[2, 10]);
                fill(&mut s.gammas, &[0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5]);
            }
            ExperimentId::SgdFastRate => {
                fill(&mut s.iterations, &[1 << 10, 1 << 11, 1 << 12, 1 << 13, 1 << 14, 1 << 15, 1 << 16])
            }
            ExperimentId::UnboundedSgd => fill(&mut s.opt, &[0.01, 0.03, 0.1]),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut c: Self = serde_json::from_str(text)?;
        c.fill_defaults();
        Ok(c)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Output directory: the configured one, else `$HGDLAB_OUT`, else `hgdlab-out`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("hgdlab-out"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(LabError::Usage("repeats must be at least 1".into()));
        }
        let s = &self.sweep;
        let empty = |name: &str, len: usize| -> Result<()> {
            if len == 0 {
                Err(LabError::Usage(format!("grid `{name}` is empty")))
            } else {
                Ok(())
            }
        };
        match self.experiment {
            ExperimentId::SeparableTails => {
                empty("eps", s.eps.len())?;
                empty("losses", s.losses.len())?;
            }
            ExperimentId::HardMarginScaling | ExperimentId::GaussianSqrtScaling | ExperimentId::UnboundedSgd => {
                empty("opt", s.opt.len())?;
                if let Some(bad) = s.opt.iter().find(|o| !(**o > 0.0 && **o < 0.5)) {
                    return Err(LabError::Usage(format!("OPT grid values must lie in (0, 0.5), got {bad}")));
                }
            }
            ExperimentId::SoftMarginCurves => {
                empty("dims", s.dims.len())?;
                empty("gammas", s.gammas.len())?;
            }
            ExperimentId::SgdFastRate => empty("iterations", s.iterations.len())?,
        }
        if let Some(bad) = s.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(LabError::Usage(format!("eps grid values must lie in (0, 1), got {bad}")));
        }
        Ok(())
    }

    /// Creates the output directory and checks it accepts files.
    pub fn prepare_out_dir(&self) -> Result<PathBuf> {
        let dir = self.resolved_out_dir();
        std::fs::create_dir_all(&dir)?;
        let probe = dir.join(".hgdlab-write-probe");
        std::fs::write(&probe, b"")?;
        std::fs::remove_file(&probe)?;
        Ok(dir)
    }
}
