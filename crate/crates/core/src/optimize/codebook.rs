use serde::{Deserialize, Serialize};

use crate::fim::VarianceMatrix;
use crate::scenario::{derive_ms_params, GeometryConfig, SystemConfig};
use crate::{CMatrix, Result, C64};

/// Steering and steering-derivative directions towards the UE and each target.
///
/// Columns are `[a(θ_0) … a(θ_K), ȧ(θ_0) … ȧ(θ_K)]`, each scaled to unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub columns: CMatrix,
    /// Norms of the columns before normalisation.
    pub raw_norms: Vec<f64>,
    /// AoDs in the BS frame, UE first.
    pub aods: Vec<f64>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    /// `U diag(p) Uᴴ` over the unit-norm columns.
    pub fn covariance(&self, power: &[f64]) -> CMatrix {
        let scaled = CMatrix::from_fn(self.columns.nrows(), self.len(), |r, k| {
            self.columns[(r, k)] * power[k].max(0.0).sqrt()
        });
        &scaled * scaled.adjoint()
    }
}

pub fn build_cpa_codebook(geometry: &GeometryConfig, system: &SystemConfig) -> Result<Codebook> {
    let aods: Vec<f64> = derive_ms_params(geometry, system)?
        .iter()
        .map(|p| p.aod_rad)
        .collect();
    let arr = &system.tx_array;
    let raw: Vec<_> = aods
        .iter()
        .map(|&t| arr.steering(t))
        .chain(aods.iter().map(|&t| arr.steering_derivative(t)))
        .collect();
    let raw_norms: Vec<f64> = raw.iter().map(|c| c.norm()).collect();
    let columns = CMatrix::from_fn(arr.num_elements, raw.len(), |r, k| raw[k][r] / raw_norms[k]);
    Ok(Codebook {
        columns,
        raw_norms,
        aods,
    })
}

/// How the aperture-agnostic scheme spreads power over the codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApaWeighting {
    /// Equal power per unit-norm column.
    UnitColumns,
    /// Equal weight per unnormalised column, `V ∝ U_raw U_rawᴴ`.
    #[default]
    RawColumns,
}

/// Equal allocation over the codebook, scaled to `tr(V) = budget`.
pub fn apa(codebook: &Codebook, budget: f64, weighting: ApaWeighting) -> VarianceMatrix {
    let weights: Vec<f64> = match weighting {
        ApaWeighting::UnitColumns => vec![1.0; codebook.len()],
        ApaWeighting::RawColumns => codebook.raw_norms.iter().map(|n| n * n).collect(),
    };
    let v = codebook.covariance(&weights);
    let tr = v.trace().re;
    VarianceMatrix::new_unchecked(v * C64::from(budget / tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;
    use approx::assert_relative_eq;

    #[test]
    fn codebook_shape_and_norms() {
        let (s, g) = default_scenario();
        let cb = build_cpa_codebook(&g, &s).unwrap();
        assert_eq!(cb.len(), 8);
        for k in 0..8 {
            assert_relative_eq!(cb.columns.column(k).norm(), 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(cb.raw_norms[0], 4.0, epsilon = 1e-12);
        for k in 0..4 {
            let a = s.tx_array.steering(cb.aods[k]);
            let da = s.tx_array.steering_derivative(cb.aods[k]);
            assert!(a.dotc(&da).re.abs() < 1e-9 * da.norm());
        }
    }

    #[test]
    fn broadside_column_is_normalised_ones() {
        let (s, mut g) = default_scenario();
        g.targets.clear();
        g.phase_bp.truncate(1);
        g.phase_ms.truncate(1);
        g.bs_orientation_rad = (g.ue_position[1] - g.bs_position[1]).atan2(g.ue_position[0] - g.bs_position[0]);
        let cb = build_cpa_codebook(&g, &s).unwrap();
        for r in 0..16 {
            assert_relative_eq!(cb.columns[(r, 0)].re, 0.25, epsilon = 1e-12);
            assert!(cb.columns[(r, 0)].im.abs() < 1e-12);
        }
    }

    #[test]
    fn apa_uses_full_budget() {
        let (s, g) = default_scenario();
        let cb = build_cpa_codebook(&g, &s).unwrap();
        for w in [ApaWeighting::UnitColumns, ApaWeighting::RawColumns] {
            let v = apa(&cb, s.power_budget(), w);
            assert_relative_eq!(v.trace(), s.power_budget(), max_relative = 1e-12);
        }
    }
}
