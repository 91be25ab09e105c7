use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anharmonic::ThirdOrderTerms;
use crate::constants::CA40_ION_MASS;
use crate::dynamics::DEFAULT_MEMORY_BUDGET;
use crate::error::{Error, Result};
use crate::phasenoise::reference_diffusion;
use crate::spectrum::Window;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Kerr,
    Resonance,
    Tables,
    NoiseTable,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Kerr => "kerr",
            Scenario::Resonance => "resonance",
            Scenario::Tables => "tables",
            Scenario::NoiseTable => "noise-table",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSettings {
    pub n_ions: usize,
    /// kg
    pub mass: f64,
    pub freq_x_hz: f64,
    pub freq_y_hz: f64,
    pub freq_z_hz: f64,
}

impl TrapSettings {
    /// The Kerr-scenario trap.
    pub fn table() -> Self {
        Self { n_ions: 3, mass: CA40_ION_MASS, freq_x_hz: 3.1012e6, freq_y_hz: 5e6, freq_z_hz: 2e6 }
    }

    /// `α_x = 20/63` at `ω_z = 2π·2 MHz`.
    pub fn resonant() -> Self {
        Self { freq_x_hz: 2e6 * (63.0f64 / 20.0).sqrt(), ..Self::table() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSettings {
    pub t1: f64,
    pub t3: f64,
    /// rad²/s
    pub diffusion: f64,
    pub paths: usize,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self { t1: 2.5e-3, t3: 2.5e-3, diffusion: reference_diffusion(), paths: 100_000 }
    }
}

/// Run configuration. Missing optional fields take scenario defaults; the
/// resolved form stored in the manifest has every field set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub trap: Option<TrapSettings>,
    /// Register truncation: `[zz, y, z]` (kerr) or `[zz, str]` (resonance).
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    /// Initial mean occupations, same order as `dims`.
    #[serde(default)]
    pub nbar: Option<Vec<f64>>,
    /// Heating rates in quanta per ms, same order as `dims`.
    #[serde(default)]
    pub heating_per_ms: Option<Vec<f64>>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub n_phi: Option<usize>,
    #[serde(default)]
    pub signature: Option<[i32; 3]>,
    /// s
    #[serde(default)]
    pub t_max: Option<f64>,
    /// s
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub grid_scale: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub window: Option<Window>,
    /// Zero-padding of the written spectrum; peak lists use raw bins.
    #[serde(default)]
    pub zero_pad: Option<usize>,
    #[serde(default)]
    pub notch: Option<bool>,
    #[serde(default)]
    pub fast_path: Option<bool>,
    #[serde(default)]
    pub peak_threshold: Option<f64>,
    /// Attenuate the grid by the analytic phase-noise loss with this diffusion, rad²/s.
    #[serde(default)]
    pub phase_noise: Option<f64>,
    #[serde(default)]
    pub third_order_terms: Option<ThirdOrderTerms>,
    /// Half-width of the resonant α_x window.
    #[serde(default)]
    pub resonance_window: Option<f64>,
    #[serde(default)]
    pub memory_budget_bytes: Option<usize>,
    #[serde(default)]
    pub noise: Option<NoiseSettings>,
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            trap: None,
            dims: None,
            nbar: None,
            heating_per_ms: None,
            amplitude: None,
            n_phi: None,
            signature: None,
            t_max: None,
            dt: None,
            grid_scale: None,
            seed: None,
            out_dir: None,
            window: None,
            zero_pad: None,
            notch: None,
            fast_path: None,
            peak_threshold: None,
            phase_noise: None,
            third_order_terms: None,
            resonance_window: None,
            memory_budget_bytes: None,
            noise: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    /// Fill unset fields with the scenario defaults and validate.
    pub fn resolve(&self) -> Result<Self> {
        let mut c = self.clone();
        let kerr = c.scenario == Scenario::Kerr;
        let dynamic = matches!(c.scenario, Scenario::Kerr | Scenario::Resonance);
        c.trap.get_or_insert_with(|| if c.scenario == Scenario::Resonance { TrapSettings::resonant() } else { TrapSettings::table() });
        c.seed.get_or_insert(0);
        c.out_dir.get_or_insert_with(|| PathBuf::from("out"));
        c.third_order_terms.get_or_insert_with(ThirdOrderTerms::default);
        c.memory_budget_bytes.get_or_insert(DEFAULT_MEMORY_BUDGET);
        c.resonance_window.get_or_insert(1e-3);
        if dynamic {
            c.dims.get_or_insert_with(|| if kerr { vec![9, 15, 15] } else { vec![9, 6] });
            c.nbar.get_or_insert_with(|| if kerr { vec![1.0, 4.0, 4.0] } else { vec![0.7, 0.2] });
            c.heating_per_ms.get_or_insert_with(|| if kerr { vec![0.0; 3] } else { vec![0.2, 0.1] });
            c.amplitude.get_or_insert(0.25);
            c.n_phi.get_or_insert(4);
            c.signature.get_or_insert([1, -1, -1]);
            c.t_max.get_or_insert(2e-3);
            c.dt.get_or_insert(if kerr { 25.3e-6 } else { 10.6e-6 });
            c.grid_scale.get_or_insert(1.0);
            c.window.get_or_insert(Window::None);
            c.zero_pad.get_or_insert(4);
            c.notch.get_or_insert(false);
            c.fast_path.get_or_insert(kerr);
            c.peak_threshold.get_or_insert(0.05);
        }
        if c.scenario == Scenario::NoiseTable {
            c.noise.get_or_insert_with(NoiseSettings::default);
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let t = self.trap.as_ref().expect("resolved");
        if t.n_ions < 2 {
            return bad(format!("trap.n_ions must be >= 2, got {}", t.n_ions));
        }
        let modes = match self.scenario {
            Scenario::Kerr => 3,
            Scenario::Resonance => 2,
            _ => 0,
        };
        if modes > 0 {
            for (name, len) in [
                ("dims", self.dims.as_ref().map(Vec::len)),
                ("nbar", self.nbar.as_ref().map(Vec::len)),
                ("heating_per_ms", self.heating_per_ms.as_ref().map(Vec::len)),
            ] {
                if len != Some(modes) {
                    return bad(format!("{name} must have {modes} entries for the {} scenario", self.scenario.name()));
                }
            }
            if self.dims.as_ref().unwrap().iter().any(|&d| d < 2) {
                return bad("every truncation dimension must be >= 2".into());
            }
            if self.nbar.as_ref().unwrap().iter().chain(self.heating_per_ms.as_ref().unwrap()).any(|&x| !(x >= 0.0 && x.is_finite())) {
                return bad("occupations and heating rates must be finite and >= 0".into());
            }
            let (dt, t_max, scale) = (self.dt.unwrap(), self.t_max.unwrap(), self.grid_scale.unwrap());
            if !(dt > 0.0 && t_max > 0.0 && scale > 0.0 && dt.is_finite() && t_max.is_finite() && scale.is_finite()) {
                return bad(format!("dt, t_max and grid_scale must be positive (got {dt}, {t_max}, {scale})"));
            }
            if self.n_phi.unwrap() == 0 || self.zero_pad.unwrap() == 0 {
                return bad("n_phi and zero_pad must be >= 1".into());
            }
            let thr = self.peak_threshold.unwrap();
            if !(thr > 0.0 && thr < 1.0) {
                return bad(format!("peak_threshold must lie in (0, 1), got {thr}"));
            }
            if let Some(c) = self.phase_noise {
                if !(c >= 0.0 && c.is_finite()) {
                    return bad(format!("phase_noise must be >= 0, got {c}"));
                }
            }
            if self.scenario == Scenario::Kerr && self.fast_path.unwrap() && self.heating_per_ms.as_ref().unwrap().iter().any(|&h| h > 0.0) {
                return bad("the kerr fast path is unitary; set heating_per_ms to zero or fast_path to false".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"scenario": "kerr", "bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"scenario": "kerr", "trap": {"n_ions": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"scenario": "spin"}"#).is_err());
    }

    #[test]
    fn resonance_defaults() {
        let c = RunConfig::from_json(r#"{"scenario": "resonance"}"#).unwrap().resolve().unwrap();
        assert_eq!(c.dt, Some(10.6e-6));
        assert_eq!(c.t_max, Some(2e-3));
        assert_eq!(c.n_phi, Some(4));
        assert_eq!(c.amplitude, Some(0.25));
        assert_eq!(c.dims, Some(vec![9, 6]));
        assert_eq!(c.fast_path, Some(false));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = RunConfig::new(Scenario::Kerr).resolve().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.resolve().unwrap(), c);
    }

    #[test]
    fn fast_path_needs_unitary_model() {
        let mut c = RunConfig::new(Scenario::Kerr);
        c.heating_per_ms = Some(vec![0.1, 0.0, 0.0]);
        assert!(c.resolve().is_err());
        c.fast_path = Some(false);
        assert!(c.resolve().is_ok());
    }
}
