//! Scenario configuration and the geometry → channel-parameter maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::array::ArraySpec;
use crate::{Error, Result, C64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Minimum separation between any two nodes, in metres.
const MIN_SEPARATION_M: f64 = 1e-9;

/// Waveform, power and noise constants.
///
/// Construct with [`SystemConfig::new`] so the derived fields (`subcarrier_spacing_hz`,
/// `noise_power_watts`, `wavelength_m`) stay consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub num_symbols: usize,
    pub num_slots: usize,
    pub total_power_watts: f64,
    pub noise_figure_db: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub noise_power_watts: f64,
    pub wavelength_m: f64,
    pub rng_seed: u64,
    /// BS transmit array (M_T elements).
    pub tx_array: ArraySpec,
    /// BS receive array (M_R elements).
    pub rx_array: ArraySpec,
    /// UE array (M_U elements).
    pub ue_array: ArraySpec,
}

impl SystemConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        carrier_frequency_hz: f64,
        bandwidth_hz: f64,
        num_subcarriers: usize,
        num_symbols: usize,
        num_slots: usize,
        total_power_watts: f64,
        noise_figure_db: f64,
        noise_psd_dbm_per_hz: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        if !(carrier_frequency_hz > 0.0 && bandwidth_hz > 0.0 && total_power_watts > 0.0) {
            return Err(Error::Config(
                "carrier frequency, bandwidth and power must be positive".into(),
            ));
        }
        if num_subcarriers == 0 || num_symbols == 0 || num_slots == 0 {
            return Err(Error::Config(
                "subcarrier, symbol and slot counts must be positive".into(),
            ));
        }
        let subcarrier_spacing_hz = bandwidth_hz / num_subcarriers as f64;
        Ok(SystemConfig {
            carrier_frequency_hz,
            bandwidth_hz,
            num_subcarriers,
            subcarrier_spacing_hz,
            num_symbols,
            num_slots,
            total_power_watts,
            noise_figure_db,
            noise_psd_dbm_per_hz,
            noise_power_watts: noise_power(
                noise_figure_db,
                noise_psd_dbm_per_hz,
                subcarrier_spacing_hz,
            ),
            wavelength_m: SPEED_OF_LIGHT / carrier_frequency_hz,
            rng_seed,
            tx_array: ArraySpec::ula(16),
            rx_array: ArraySpec::ula(16),
            ue_array: ArraySpec::ula(16),
        })
    }

    pub fn with_arrays(mut self, tx: ArraySpec, rx: ArraySpec, ue: ArraySpec) -> Self {
        self.tx_array = tx;
        self.rx_array = rx;
        self.ue_array = ue;
        self
    }

    /// Per-subcarrier power budget `P / M`.
    pub fn power_budget(&self) -> f64 {
        self.total_power_watts / self.num_subcarriers as f64
    }

    /// Number of transmit antennas `M_T`.
    pub fn num_tx(&self) -> usize {
        self.tx_array.num_elements
    }
}

/// Linear watts of `F + N₀ + 10·log₁₀(Δf)` dBm.
pub fn noise_power(noise_figure_db: f64, noise_psd_dbm_per_hz: f64, spacing_hz: f64) -> f64 {
    assert!(spacing_hz > 0.0, "subcarrier spacing must be positive");
    let dbm = noise_figure_db + noise_psd_dbm_per_hz + 10.0 * spacing_hz.log10();
    dbm_to_watts(dbm)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// How a radar cross-section enters a path amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RcsGain {
    /// Amplitude scales with `σ` itself.
    #[default]
    Linear,
    /// Amplitude scales with `√σ` (radar-equation convention).
    Sqrt,
}

impl RcsGain {
    pub fn factor(self, rcs: f64) -> f64 {
        match self {
            RcsGain::Sqrt => rcs.sqrt(),
            RcsGain::Linear => rcs,
        }
    }
}

/// A passive scatterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub position: [f64; 2],
    /// RCS seen by the bistatic (UE) link, m².
    pub rcs_bp: f64,
    /// RCS seen by the monostatic (BS) radar, m².
    pub rcs_ms: f64,
}

/// Node positions, UE orientation, clock bias, scatterers and gain phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub bs_position: [f64; 2],
    pub ue_position: [f64; 2],
    /// UE array rotation φ; UE-local angles are global bearings minus φ.
    pub ue_orientation_rad: f64,
    /// BS array rotation; BS-local angles are global bearings minus this value.
    #[serde(default)]
    pub bs_orientation_rad: f64,
    pub clock_bias_s: f64,
    pub targets: Vec<Target>,
    /// RCS of the UE as a monostatic target, m².
    pub ue_rcs_ms: f64,
    #[serde(default)]
    pub rcs_gain: RcsGain,
    /// Bistatic gain phases ζ̄ₖ, k = 0..=K.
    pub phase_bp: Vec<f64>,
    /// Monostatic gain phases ζ̲ₖ, k = 0..=K.
    pub phase_ms: Vec<f64>,
}

impl GeometryConfig {
    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    /// Redraw every gain phase uniformly on `[-π, π]` from `seed`.
    pub fn draw_phases(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.targets.len() + 1;
        self.phase_bp = (0..n).map(|_| rng.random_range(-PI..=PI)).collect();
        self.phase_ms = (0..n).map(|_| rng.random_range(-PI..=PI)).collect();
    }

    pub fn with_phases(mut self, seed: u64) -> Self {
        self.draw_phases(seed);
        self
    }

    /// Keep only the first `k` targets (and their phases).
    pub fn truncate_targets(mut self, k: usize) -> Self {
        self.targets.truncate(k);
        self.phase_bp.truncate(k + 1);
        self.phase_ms.truncate(k + 1);
        self
    }

    /// Positions of the monostatic targets, UE first.
    pub fn ms_points(&self) -> Vec<[f64; 2]> {
        std::iter::once(self.ue_position)
            .chain(self.targets.iter().map(|t| t.position))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.targets.len();
        if self.phase_bp.len() != k + 1 || self.phase_ms.len() != k + 1 {
            return Err(Error::Config(format!(
                "expected {} phases per link, got {} (BP) and {} (MS)",
                k + 1,
                self.phase_bp.len(),
                self.phase_ms.len()
            )));
        }
        if let Some(p) = self
            .phase_bp
            .iter()
            .chain(&self.phase_ms)
            .find(|p| !(-PI..=PI).contains(*p))
        {
            return Err(Error::Config(format!("phase {p} outside [-π, π]")));
        }
        let mut nodes = vec![("BS", self.bs_position), ("UE", self.ue_position)];
        nodes.extend(self.targets.iter().map(|t| ("target", t.position)));
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                if distance(nodes[i].1, nodes[j].1) <= MIN_SEPARATION_M {
                    return Err(Error::DegenerateGeometry(format!(
                        "{} #{i} and {} #{j} coincide at {:?}",
                        nodes[i].0, nodes[j].0, nodes[i].1
                    )));
                }
            }
        }
        if self.targets.iter().any(|t| t.rcs_bp < 0.0 || t.rcs_ms < 0.0) || self.ue_rcs_ms < 0.0
        {
            return Err(Error::Config("RCS values must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Channel-domain parameters of one bistatic path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParamsBp {
    pub gain: C64,
    pub delay_s: f64,
    /// Angle of departure in the BS frame.
    pub aod_rad: f64,
    /// Angle of arrival in the UE frame.
    pub aoa_rad: f64,
}

/// Channel-domain parameters of one monostatic echo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParamsMs {
    pub gain: C64,
    /// Round-trip delay.
    pub delay_s: f64,
    pub aod_rad: f64,
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Global bearing of `to` seen from `from`, `atan2(Δy, Δx)`.
pub(crate) fn bearing(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

fn sphere_loss() -> f64 {
    (4.0 * PI).powf(1.5)
}

/// Bistatic paths: index 0 is the LOS, index `k ≥ 1` the bounce off target `k`.
pub fn derive_bp_params(geometry: &GeometryConfig, system: &SystemConfig) -> Result<Vec<PathParamsBp>> {
    geometry.validate()?;
    let (pb, pu) = (geometry.bs_position, geometry.ue_position);
    let lambda = system.wavelength_m;
    let d0 = distance(pb, pu);
    let mut out = Vec::with_capacity(geometry.targets.len() + 1);
    out.push(PathParamsBp {
        gain: C64::from_polar(lambda / (4.0 * PI * d0), geometry.phase_bp[0]),
        delay_s: d0 / SPEED_OF_LIGHT + geometry.clock_bias_s,
        aod_rad: bearing(pb, pu) - geometry.bs_orientation_rad,
        aoa_rad: bearing(pu, pb) - geometry.ue_orientation_rad,
    });
    for (k, t) in geometry.targets.iter().enumerate() {
        let d_bt = distance(pb, t.position);
        let d_tu = distance(t.position, pu);
        let amp = geometry.rcs_gain.factor(t.rcs_bp) * lambda / (sphere_loss() * d_tu * d_bt);
        out.push(PathParamsBp {
            gain: C64::from_polar(amp, geometry.phase_bp[k + 1]),
            delay_s: (d_bt + d_tu) / SPEED_OF_LIGHT + geometry.clock_bias_s,
            aod_rad: bearing(pb, t.position) - geometry.bs_orientation_rad,
            aoa_rad: bearing(pu, t.position) - geometry.ue_orientation_rad,
        });
    }
    Ok(out)
}

/// Monostatic echoes: index 0 is the UE, index `k ≥ 1` target `k`.
pub fn derive_ms_params(geometry: &GeometryConfig, system: &SystemConfig) -> Result<Vec<PathParamsMs>> {
    geometry.validate()?;
    let pb = geometry.bs_position;
    let lambda = system.wavelength_m;
    let rcs = std::iter::once(geometry.ue_rcs_ms).chain(geometry.targets.iter().map(|t| t.rcs_ms));
    Ok(geometry
        .ms_points()
        .into_iter()
        .zip(rcs)
        .zip(&geometry.phase_ms)
        .map(|((p, rcs), &phase)| {
            let d = distance(pb, p);
            let amp = geometry.rcs_gain.factor(rcs) * lambda / (sphere_loss() * d * d);
            PathParamsMs {
                gain: C64::from_polar(amp, phase),
                delay_s: 2.0 * d / SPEED_OF_LIGHT,
                aod_rad: bearing(pb, p) - geometry.bs_orientation_rad,
            }
        })
        .collect())
}

/// Seed used for the gain phases of [`default_scenario`].
pub const DEFAULT_SEED: u64 = 1;

/// The reference deployment: 16-element arrays, BS at the origin facing +y, UE at
/// (−5, 20) m, three targets, 28 GHz carrier with 120 MHz over 1024 subcarriers.
pub fn default_scenario() -> (SystemConfig, GeometryConfig) {
    let system = SystemConfig::new(
        28e9,
        120e6,
        1024,
        100,
        16,
        dbm_to_watts(-20.0),
        10.0,
        -173.855,
        DEFAULT_SEED,
    )
    .expect("default system constants are valid");
    let target = |x: f64, y: f64| Target {
        position: [x, y],
        rcs_bp: 100.0,
        rcs_ms: 100.0,
    };
    let geometry = GeometryConfig {
        bs_position: [0.0, 0.0],
        ue_position: [-5.0, 20.0],
        ue_orientation_rad: 110.0 / 180.0 * PI,
        bs_orientation_rad: PI / 2.0,
        clock_bias_s: 1e-6,
        targets: vec![target(-10.0, 15.0), target(5.0, 15.0), target(0.0, 17.0)],
        ue_rcs_ms: 10.0,
        rcs_gain: RcsGain::Linear,
        phase_bp: Vec::new(),
        phase_ms: Vec::new(),
    }
    .with_phases(DEFAULT_SEED);
    (system, geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bare_geometry(ue: [f64; 2]) -> GeometryConfig {
        GeometryConfig {
            bs_position: [0.0, 0.0],
            ue_position: ue,
            ue_orientation_rad: 0.0,
            bs_orientation_rad: 0.0,
            clock_bias_s: 0.0,
            targets: vec![],
            ue_rcs_ms: 10.0,
            rcs_gain: RcsGain::Linear,
            phase_bp: vec![0.0],
            phase_ms: vec![0.0],
        }
    }

    #[test]
    fn default_constants() {
        let (sys, geo) = default_scenario();
        assert_eq!(sys.subcarrier_spacing_hz, 117_187.5);
        assert_eq!(sys.num_tx(), 16);
        assert_eq!(geo.num_targets(), 3);
        assert_relative_eq!(sys.total_power_watts, 1e-5, max_relative = 1e-12);
        assert_relative_eq!(sys.wavelength_m, 0.010_706_873_5, max_relative = 1e-8);
        geo.validate().unwrap();
        let k2 = geo.clone().truncate_targets(2);
        assert_eq!(k2.targets, geo.targets[..2].to_vec());
        assert_eq!(k2.phase_bp, geo.phase_bp[..3].to_vec());
    }

    #[test]
    fn noise_power_examples() {
        let s = noise_power(10.0, -173.855, 117_187.5);
        assert_relative_eq!(s, 4.826e-15, max_relative = 1e-3);
        assert_relative_eq!(10.0 * (s / 1e-3).log10(), -113.166, epsilon = 1e-3);
        assert_relative_eq!(noise_power(0.0, 0.0, 1.0), 1e-3, max_relative = 1e-14);
        let ratio = noise_power(3.0, -170.0, 2e5) / noise_power(3.0, -170.0, 1e5);
        assert_relative_eq!(10.0 * ratio.log10(), 10.0 * 2f64.log10(), epsilon = 1e-12);
    }

    #[test]
    fn default_los_parameters() {
        let (sys, mut geo) = default_scenario();
        geo.phase_bp[0] = 0.0;
        let bp = derive_bp_params(&geo, &sys).unwrap();
        let d = 425f64.sqrt();
        assert_relative_eq!(d, 20.6155, epsilon = 1e-4);
        assert_relative_eq!(bp[0].delay_s, 1.068_77e-6, max_relative = 1e-5);
        assert_relative_eq!(bp[0].gain.norm(), 4.133e-5, max_relative = 1e-3);
        assert_relative_eq!(bp[0].gain.im, 0.0);
        let ms = derive_ms_params(&geo, &sys).unwrap();
        assert_relative_eq!(ms[0].delay_s, 1.375_33e-7, max_relative = 1e-5);
    }

    #[test]
    fn axis_aligned_los() {
        let (sys, _) = default_scenario();
        let geo = bare_geometry([7.0, 0.0]);
        let bp = derive_bp_params(&geo, &sys).unwrap();
        assert_eq!(bp.len(), 1);
        assert_relative_eq!(bp[0].delay_s, 7.0 / SPEED_OF_LIGHT);
        assert_eq!(bp[0].aod_rad, 0.0);
        assert_relative_eq!(bp[0].aoa_rad, PI);
    }

    #[test]
    fn zero_phases_give_real_positive_ms_gains() {
        let (sys, mut geo) = default_scenario();
        geo.phase_ms.iter_mut().for_each(|p| *p = 0.0);
        for p in derive_ms_params(&geo, &sys).unwrap() {
            assert!(p.gain.re > 0.0 && p.gain.im == 0.0);
        }
    }

    #[test]
    fn unit_ms_gain_by_formula_inversion() {
        let (sys, _) = default_scenario();
        let mut geo = bare_geometry([0.0, 20.0]);
        let rcs = sphere_loss() / sys.wavelength_m;
        geo.targets.push(Target {
            position: [1.0, 0.0],
            rcs_bp: 1.0,
            rcs_ms: rcs,
        });
        geo.phase_bp.push(0.0);
        geo.phase_ms.push(0.0);
        let ms = derive_ms_params(&geo, &sys).unwrap();
        assert_relative_eq!(ms[1].gain.norm(), 1.0, max_relative = 1e-12);
        geo.rcs_gain = RcsGain::Sqrt;
        geo.targets[0].rcs_ms = rcs * rcs;
        let ms = derive_ms_params(&geo, &sys).unwrap();
        assert_relative_eq!(ms[1].gain.norm(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn coincident_points_rejected() {
        let (sys, mut geo) = default_scenario();
        geo.targets[1].position = geo.ue_position;
        assert!(matches!(
            derive_bp_params(&geo, &sys),
            Err(Error::DegenerateGeometry(_))
        ));
        let mut geo = bare_geometry([0.0, 0.0]);
        geo.phase_bp = vec![0.0];
        assert!(derive_ms_params(&geo, &sys).is_err());
    }

    #[test]
    fn phase_range_enforced() {
        let (_, mut geo) = default_scenario();
        geo.phase_ms[0] = 4.0;
        assert!(geo.validate().is_err());
    }

    #[test]
    fn rotating_ue_only_moves_aoas() {
        let (sys, geo) = default_scenario();
        let base = derive_bp_params(&geo, &sys).unwrap();
        let mut rot = geo.clone();
        rot.ue_orientation_rad += 0.3;
        for (a, b) in base.iter().zip(derive_bp_params(&rot, &sys).unwrap()) {
            assert_relative_eq!(a.aoa_rad - 0.3, b.aoa_rad, epsilon = 1e-12);
            assert_eq!((a.gain, a.delay_s, a.aod_rad), (b.gain, b.delay_s, b.aod_rad));
        }
    }

    #[test]
    fn translation_invariance_and_triangle_inequality() {
        let (sys, geo) = default_scenario();
        let base = derive_bp_params(&geo, &sys).unwrap();
        let shift = |p: [f64; 2]| [p[0] + 3.5, p[1] - 12.0];
        let mut moved = geo.clone();
        moved.bs_position = shift(moved.bs_position);
        moved.ue_position = shift(moved.ue_position);
        moved.targets.iter_mut().for_each(|t| t.position = shift(t.position));
        let tr = derive_bp_params(&moved, &sys).unwrap();
        for (a, b) in base.iter().zip(&tr) {
            assert_relative_eq!(a.delay_s, b.delay_s, max_relative = 1e-12);
            assert_relative_eq!(a.gain.norm(), b.gain.norm(), max_relative = 1e-12);
        }
        for p in &base[1..] {
            assert!(p.delay_s > base[0].delay_s);
        }
    }

    #[test]
    fn phases_are_reproducible() {
        let (_, geo) = default_scenario();
        let again = geo.clone().with_phases(DEFAULT_SEED);
        assert_eq!(geo.phase_bp, again.phase_bp);
        let other = geo.clone().with_phases(DEFAULT_SEED + 1);
        assert_ne!(geo.phase_ms, other.phase_ms);
    }
}
