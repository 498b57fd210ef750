//! TOML experiment configuration.
//!
//! Every key is optional; omitted keys take the reference-deployment values.
//! Power may be given as `power_dbm` or `total_power_watts` (not both). Gain
//! phases are drawn from the seed unless listed explicitly.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::ArraySpec;
use crate::optimize::ApaWeighting;
use crate::scenario::{dbm_to_watts, GeometryConfig, RcsGain, SystemConfig, Target, DEFAULT_SEED};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub num_subcarriers: usize,
    pub num_symbols: usize,
    pub num_slots: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_power_watts: Option<f64>,
    pub noise_figure_db: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub tx_array: ArraySpec,
    pub rx_array: ArraySpec,
    pub ue_array: ArraySpec,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            carrier_frequency_hz: 28e9,
            bandwidth_hz: 120e6,
            num_subcarriers: 1024,
            num_symbols: 100,
            num_slots: 16,
            power_dbm: None,
            total_power_watts: None,
            noise_figure_db: 10.0,
            noise_psd_dbm_per_hz: -173.855,
            tx_array: ArraySpec::ula(16),
            rx_array: ArraySpec::ula(16),
            ue_array: ArraySpec::ula(16),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub bs_position: [f64; 2],
    pub ue_position: [f64; 2],
    pub ue_orientation_deg: f64,
    pub bs_orientation_deg: f64,
    pub clock_bias_s: f64,
    pub ue_rcs_ms: f64,
    pub rcs_gain: RcsGain,
    pub targets: Vec<Target>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_bp: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_ms: Option<Vec<f64>>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let target = |x: f64, y: f64| Target {
            position: [x, y],
            rcs_bp: 100.0,
            rcs_ms: 100.0,
        };
        GeometrySection {
            bs_position: [0.0, 0.0],
            ue_position: [-5.0, 20.0],
            ue_orientation_deg: 110.0,
            bs_orientation_deg: 90.0,
            clock_bias_s: 1e-6,
            ue_rcs_ms: 10.0,
            rcs_gain: RcsGain::Linear,
            targets: vec![target(-10.0, 15.0), target(5.0, 15.0), target(0.0, 17.0)],
            phase_bp: None,
            phase_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub apa_weighting: ApaWeighting,
    /// Gaussian candidates drawn when a covariance has rank above `num_slots`.
    pub randomization_trials: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        DesignSection {
            apa_weighting: ApaWeighting::default(),
            randomization_trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub system: SystemSection,
    pub geometry: GeometrySection,
    pub design: DesignSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    fn check(&self) -> Result<()> {
        if self.system.power_dbm.is_some() && self.system.total_power_watts.is_some() {
            return Err(Error::Config(
                "give either system.power_dbm or system.total_power_watts, not both".into(),
            ));
        }
        for a in [&self.system.tx_array, &self.system.rx_array, &self.system.ue_array] {
            if a.num_elements == 0 || !(a.element_spacing_wavelengths > 0.0) {
                return Err(Error::Config(format!("invalid array {a:?}")));
            }
        }
        Ok(())
    }

    /// Seed from the file, else the default.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn system(&self, seed: u64) -> Result<SystemConfig> {
        let s = &self.system;
        let power = match (s.power_dbm, s.total_power_watts) {
            (Some(dbm), None) => dbm_to_watts(dbm),
            (None, Some(w)) => w,
            (None, None) => dbm_to_watts(-20.0),
            (Some(_), Some(_)) => unreachable!("rejected by check"),
        };
        Ok(SystemConfig::new(
            s.carrier_frequency_hz,
            s.bandwidth_hz,
            s.num_subcarriers,
            s.num_symbols,
            s.num_slots,
            power,
            s.noise_figure_db,
            s.noise_psd_dbm_per_hz,
            seed,
        )?
        .with_arrays(s.tx_array, s.rx_array, s.ue_array))
    }

    /// Geometry with phases from the file, or drawn from `seed` when absent.
    pub fn geometry(&self, seed: u64) -> Result<GeometryConfig> {
        let g = &self.geometry;
        let mut out = GeometryConfig {
            bs_position: g.bs_position,
            ue_position: g.ue_position,
            ue_orientation_rad: g.ue_orientation_deg * PI / 180.0,
            bs_orientation_rad: g.bs_orientation_deg * PI / 180.0,
            clock_bias_s: g.clock_bias_s,
            targets: g.targets.clone(),
            ue_rcs_ms: g.ue_rcs_ms,
            rcs_gain: g.rcs_gain,
            phase_bp: Vec::new(),
            phase_ms: Vec::new(),
        }
        .with_phases(seed);
        if let Some(p) = &g.phase_bp {
            out.phase_bp = p.clone();
        }
        if let Some(p) = &g.phase_ms {
            out.phase_ms = p.clone();
        }
        out.validate()?;
        Ok(out)
    }

    pub fn scenario(&self, seed: u64) -> Result<(SystemConfig, GeometryConfig)> {
        Ok((self.system(seed)?, self.geometry(seed)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    #[test]
    fn empty_file_is_reference_deployment() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        let (s, g) = cfg.scenario(DEFAULT_SEED).unwrap();
        let (s0, g0) = default_scenario();
        assert_eq!(s, s0);
        assert_eq!(g.targets, g0.targets);
        assert_eq!(g.phase_bp, g0.phase_bp);
        assert!((g.ue_orientation_rad - g0.ue_orientation_rad).abs() < 1e-15);
        assert!((g.bs_orientation_rad - g0.bs_orientation_rad).abs() < 1e-15);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            seed = 7
            [system]
            total_power_watts = 0.5
            num_slots = 4
            [geometry]
            ue_position = [3.0, 9.0]
            rcs_gain = "sqrt"
            phase_bp = [0.1, 0.2]
            phase_ms = [0.3, -0.4]
            [[geometry.targets]]
            position = [1.0, 5.0]
            rcs_bp = 10.0
            rcs_ms = 20.0
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
        let (s, g) = cfg.scenario(cfg.seed()).unwrap();
        assert_eq!(s.total_power_watts, 0.5);
        assert_eq!(g.phase_ms, vec![0.3, -0.4]);
        assert_eq!(g.rcs_gain, RcsGain::Sqrt);
    }

    #[test]
    fn conflicting_power_keys_rejected() {
        let err = ExperimentConfig::from_toml_str("[system]\npower_dbm = 0\ntotal_power_watts = 1\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("[system]\nbogus = 1\n").is_err());
    }

    #[test]
    fn wrong_phase_count_rejected() {
        let err = ExperimentConfig::from_toml_str("[geometry]\nphase_bp = [0.0]\n")
            .unwrap()
            .geometry(1);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
