//! Experiment configuration read from a TOML file. The schema is described in
//! `crates/cli/CONFIG.md`; every table and key is optional and falls back to
//! the defaults below.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ssep_core::kernel_pde::basis::MODES;
use ssep_core::kernel_pde::{BiasSpec, FixedPointOptions, PdeContext};
use ssep_core::Params;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub bias: BiasConfig,
    /// Rescales the bias to `max(‖h‖∞, ‖∂₁h‖∞) = bias_size` when given.
    pub bias_size: Option<f64>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub rate: RateConfig,
    #[serde(default)]
    pub dv: DvConfig,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
}

/// `"zero"`, `"k0-shaped"` or a list of basis coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BiasConfig {
    Named(String),
    Coefficients(Vec<f64>),
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self::Named("zero".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub n: usize,
    pub rho_minus: f64,
    pub rho_plus: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { n: 64, rho_minus: 0.2, rho_plus: 0.8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub m: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { m: 64 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub fixed_point: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = FixedPointOptions::default();
        Self { fixed_point: d.tol, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub time: f64,
    pub burn_in: f64,
    pub batches: usize,
    pub replicas: usize,
    pub max_pairs: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { time: 200.0, burn_in: 20.0, batches: 20, replicas: 1, max_pairs: 1000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    pub modes: usize,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self { modes: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DvConfig {
    pub samples: usize,
    pub restarts: usize,
}

impl Default for DvConfig {
    fn default() -> Self {
        Self { samples: 20, restarts: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    pub sizes: Vec<usize>,
    /// `"zero"` or `"k0"`.
    pub reference: String,
    pub t_max: f64,
    pub points: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self { sizes: vec![3, 4, 5], reference: "k0".into(), t_max: 200.0, points: 101 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureConfig {
    pub sizes: Vec<usize>,
    /// Scale of the test kernel `-a cos(πx/2) cos(πy/2)`.
    pub amplitude: f64,
    pub samples: usize,
    pub concentration_n: usize,
    pub target: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self { sizes: vec![2, 3, 4, 5], amplitude: 1.0, samples: 20_000, concentration_n: 64, target: 1.5 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn params(&self) -> Result<Params> {
        let p = &self.params;
        Params::new(p.n, p.rho_minus, p.rho_plus).context("params")
    }

    pub fn fixed_point(&self) -> FixedPointOptions {
        FixedPointOptions { tol: self.tolerances.fixed_point, max_iter: self.tolerances.max_iter, ..Default::default() }
    }

    /// `None` for the zero bias.
    pub fn bias(&self, ctx: &PdeContext) -> Result<Option<BiasSpec>> {
        let spec = match &self.bias {
            BiasConfig::Named(s) if s == "zero" => return Ok(None),
            BiasConfig::Named(s) if s == "k0-shaped" => BiasSpec::k0_shaped(ctx, self.bias_size.unwrap_or(0.05)),
            BiasConfig::Named(s) => bail!("bias: unknown form {s:?}, expected \"zero\", \"k0-shaped\" or a list"),
            BiasConfig::Coefficients(c) => {
                let raw = BiasSpec::from_modes(ctx, c);
                match self.bias_size {
                    Some(s) => raw.rescaled(ctx, s),
                    None => raw,
                }
            }
        };
        Ok(Some(spec))
    }

    /// Checks ranges, reporting the offending key.
    pub fn validate(&self, kind: &str) -> Result<()> {
        if self.seed.is_none() && matches!(kind, "simulate" | "dv" | "measure") {
            bail!("seed: required for {kind} (set `seed` in the config or pass --seed)");
        }
        self.params()?;
        if let BiasConfig::Coefficients(c) = &self.bias {
            if c.is_empty() || c.len() > MODES.len() || c.iter().any(|v| !v.is_finite()) {
                bail!("bias: coefficient list must hold 1 to {} finite values", MODES.len());
            }
        }
        if let Some(s) = self.bias_size {
            if !(s >= 0.0 && s.is_finite()) {
                bail!("bias_size: {s} must be a non-negative number");
            }
        }
        if self.grid.m < 4 || self.grid.m % 2 != 0 {
            bail!("grid.m: {} must be even and at least 4", self.grid.m);
        }
        if !(self.tolerances.fixed_point > 0.0) || self.tolerances.max_iter == 0 {
            bail!("tolerances: fixed_point must be positive and max_iter non-zero");
        }
        match kind {
            "simulate" => {
                let s = &self.simulate;
                if !(s.time > 0.0) || s.burn_in < 0.0 {
                    bail!("simulate.time: must be positive (burn_in non-negative)");
                }
                if s.batches < 2 || s.replicas == 0 || s.max_pairs == 0 {
                    bail!("simulate: batches ≥ 2, replicas ≥ 1 and max_pairs ≥ 1 required");
                }
            }
            "rate" if self.rate.modes == 0 || self.rate.modes > MODES.len() => {
                bail!("rate.modes: must lie in 1..={}", MODES.len())
            }
            "dv" if self.dv.samples == 0 => bail!("dv.samples: must be at least 1"),
            "entropy" => {
                let e = &self.entropy;
                if e.sizes.is_empty() || e.points < 2 || !(e.t_max > 1e-3) {
                    bail!("entropy: sizes non-empty, points ≥ 2 and t_max > 1e-3 required");
                }
                if e.reference != "zero" && e.reference != "k0" {
                    bail!("entropy.reference: {:?} must be \"zero\" or \"k0\"", e.reference);
                }
            }
            "measure" => {
                let m = &self.measure;
                if m.sizes.len() < 2 || m.samples < 64 || m.concentration_n < 2 || !(m.target > 1.0) {
                    bail!("measure: at least two sizes, samples ≥ 64, concentration_n ≥ 2 and target > 1 required");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_and_listed_bias() {
        let a: ExperimentConfig = toml::from_str("bias = \"k0-shaped\"\n[params]\nn = 8").unwrap();
        assert_eq!(a.bias, BiasConfig::Named("k0-shaped".into()));
        assert_eq!(a.params.n, 8);
        assert_eq!(a.params.rho_plus, 0.8);
        let b: ExperimentConfig = toml::from_str("bias = [0.1, -0.2]\nbias_size = 0.05").unwrap();
        assert_eq!(b.bias, BiasConfig::Coefficients(vec![0.1, -0.2]));
    }

    #[test]
    fn unknown_keys_name_their_table() {
        let err = toml::from_str::<ExperimentConfig>("[grid]\nmm = 3").unwrap_err().to_string();
        assert!(err.contains("mm"), "{err}");
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ExperimentConfig::default();
        c.grid.m = 7;
        assert!(c.validate("pde").unwrap_err().to_string().starts_with("grid.m"));
        c.grid.m = 16;
        c.entropy.reference = "g".into();
        assert!(format!("{:#}", c.validate("entropy").unwrap_err()).contains("entropy.reference"));
    }
}
