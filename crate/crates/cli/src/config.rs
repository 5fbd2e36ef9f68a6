use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vortex_core::{DomainSpec, Nonlinearity};

/// Everything a run needs. Unknown fields anywhere are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Option<DomainSpec>,
    pub nonlinearity: Option<Nonlinearity>,
    pub output_dir: Option<PathBuf>,
    pub landscape: LandscapeBlock,
    pub solve: SolveBlock,
    pub branch: BranchBlock,
    pub verify: VerifyBlock,
    pub layer: LayerBlock,
    pub cf: CfBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeBlock {
    pub grid_n: usize,
    pub delta_diag: Option<f64>,
    pub tol: f64,
}

impl Default for LandscapeBlock {
    fn default() -> Self {
        LandscapeBlock {
            grid_n: 96,
            delta_diag: None,
            tol: 1e-8,
        }
    }
}

/// Seed of a boundary solve: two layers glued at circle-model angles, or a constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Seed {
    Layers { theta_p: f64, theta_q: f64, window: f64 },
    Constant { value: f64 },
}

impl Default for Seed {
    fn default() -> Self {
        Seed::Layers {
            theta_p: std::f64::consts::FRAC_PI_4,
            theta_q: 5.0 * std::f64::consts::FRAC_PI_4,
            window: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveBlock {
    pub n_modes: usize,
    pub eps: f64,
    pub seed: Seed,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveBlock {
    fn default() -> Self {
        SolveBlock {
            n_modes: 512,
            eps: 0.1,
            seed: Seed::default(),
            tol: 1e-9,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchBlock {
    pub n_modes: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub steps: usize,
    pub seed: Seed,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BranchBlock {
    fn default() -> Self {
        BranchBlock {
            n_modes: 512,
            eps_start: 0.2,
            eps_end: 0.05,
            steps: 4,
            seed: Seed::default(),
            tol: 1e-9,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    DiskW,
    RectangleMin,
    T0Root,
    CfSine,
    LayerSine,
    SquareStable,
    GammaFit,
    PolygonCount,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::DiskW,
        Suite::RectangleMin,
        Suite::T0Root,
        Suite::CfSine,
        Suite::LayerSine,
        Suite::SquareStable,
        Suite::GammaFit,
        Suite::PolygonCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::DiskW => "disk_w",
            Suite::RectangleMin => "rectangle_min",
            Suite::T0Root => "t0_root",
            Suite::CfSine => "cf_sine",
            Suite::LayerSine => "layer_sine",
            Suite::SquareStable => "square_stable",
            Suite::GammaFit => "gamma_fit",
            Suite::PolygonCount => "polygon_count",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    /// Empty means every suite.
    pub suites: Vec<Suite>,
    /// Grid size for the square-model solves.
    pub n_modes: usize,
    pub slope_tol: f64,
    pub intercept_tol: f64,
    /// Fit the energy expansion with an extra `d·ε` term.
    pub eps_correction: bool,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        VerifyBlock {
            suites: Vec::new(),
            n_modes: 1024,
            slope_tol: 0.03,
            intercept_tol: 0.1,
            eps_correction: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayerBlock {
    pub n: usize,
    pub x_max: f64,
    /// Spacing of the written profile samples.
    pub sample_step: f64,
}

impl Default for LayerBlock {
    fn default() -> Self {
        LayerBlock {
            n: 1024,
            x_max: 100.0,
            sample_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfBlock {
    pub radii: Vec<f64>,
    pub n: usize,
}

impl Default for CfBlock {
    fn default() -> Self {
        CfBlock {
            radii: vortex_core::layer::DEFAULT_CF_RADII.to_vec(),
            n: 1024,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(d) = &self.domain {
            for w in d.validate()? {
                log::warn!("{w}");
            }
        }
        if let Some(f) = &self.nonlinearity {
            if let Nonlinearity::Sine { a } = f {
                Nonlinearity::sine(*a)?;
            }
            if !f.check_invariants().ok() {
                bail!("nonlinearity {} violates the balanced bistable conditions", f.label());
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> anyhow::Result<&DomainSpec> {
        self.domain.as_ref().context("this command needs a `domain` entry in the config")
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity.unwrap_or(Nonlinearity::Cubic)
    }

    /// SHA-256 of the canonical JSON form (output location excluded), in hex.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
