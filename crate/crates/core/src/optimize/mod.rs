//! Beamforming design: weighted-CRB SDPs, mismatch schemes, codebook schemes
//! and beamformer recovery.

mod codebook;
mod mismatch;
mod recovery;
mod wcrb;

pub use codebook::{apa, build_cpa_codebook, ApaWeighting, Codebook};
pub use mismatch::{
    solve_wbf, solve_wbf_lifted, solve_wvm, wbf_objective, wvm_closed_form, LiftedWbf,
};
pub use recovery::{beampattern, recover_beamformers, Recovery};
pub use wcrb::{solve_wcrb_cpa, solve_wcrb_fdb, CovarianceSpace, FimMaps, WcrbSolution};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conic::SolveStatus;
use crate::fim::VarianceMatrix;
use crate::CMatrix;

/// Slot beamformers as the columns of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub w: CMatrix,
}

impl BeamformerSet {
    pub fn new(w: CMatrix) -> Self {
        BeamformerSet { w }
    }

    pub fn num_slots(&self) -> usize {
        self.w.ncols()
    }

    pub fn power(&self) -> f64 {
        self.w.norm_squared()
    }

    pub fn covariance(&self) -> VarianceMatrix {
        VarianceMatrix::from_beamformers(&self.w)
    }

    pub fn scaled(&self, gamma: f64) -> Self {
        BeamformerSet {
            w: &self.w * Complex64::from(gamma),
        }
    }
}

/// One point of a tradeoff curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub scheme: String,
    pub rho: Option<f64>,
    pub crb_bp_sqrt_m: f64,
    pub crb_ms_sqrt_m: f64,
    pub solve_time_s: f64,
    pub status: SolveStatus,
}

/// `ρ·a + (1−ρ)·b`.
pub(crate) fn blend(rho: f64, a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * Complex64::from(rho) + b * Complex64::from(1.0 - rho)
}

pub(crate) fn check_rho(rho: f64) -> crate::Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(crate::Error::Precondition(format!("rho must lie in [0, 1], got {rho}")))
    }
}
