//! Per-subcarrier channel matrices and their analytic partial derivatives.
//!
//! Every partial `∂H_m/∂ξ_i` is a sum of at most two rank-one matrices
//! `s(m) · r tᴴ`, so the derivative set is stored in that factorised form and
//! dense matrices are only materialised on request.

use std::f64::consts::PI;

use crate::scenario::{PathParamsBp, PathParamsMs, SystemConfig};
use crate::{CMatrix, CVector, C64};

/// Which link a parameter vector describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Link {
    /// UE-side bistatic positioning, ξ̄ = [θ_B; θ_U; τ; α_R; α_I].
    Bistatic,
    /// BS-side monostatic sensing, ξ̲ = [θ_B; κ; β_R; β_I].
    Monostatic,
}

impl Link {
    /// Number of channel-domain parameters for `num_paths = K + 1` paths.
    pub fn num_channel_params(self, num_paths: usize) -> usize {
        match self {
            Link::Bistatic => 5 * num_paths,
            Link::Monostatic => 4 * num_paths,
        }
    }
}

/// Borrowed path list of either link.
#[derive(Debug, Clone, Copy)]
pub enum PathSet<'a> {
    Bistatic(&'a [PathParamsBp]),
    Monostatic(&'a [PathParamsMs]),
}

impl PathSet<'_> {
    pub fn link(&self) -> Link {
        match self {
            PathSet::Bistatic(_) => Link::Bistatic,
            PathSet::Monostatic(_) => Link::Monostatic,
        }
    }

    pub fn num_paths(&self) -> usize {
        match self {
            PathSet::Bistatic(p) => p.len(),
            PathSet::Monostatic(p) => p.len(),
        }
    }
}

/// `e^{-j 2π m Δf τ}`.
fn delay_phase(m: usize, spacing_hz: f64, delay_s: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * m as f64 * spacing_hz * delay_s)
}

fn outer(rx: &CVector, tx: &CVector) -> CMatrix {
    rx * tx.adjoint()
}

/// `H̄_m = Σ_k α_k e^{-j2πmΔfτ_k} a_U(θ_U,k) a_T(θ_B,k)ᴴ`, with `m` 1-based.
pub fn bp_channel(params: &[PathParamsBp], system: &SystemConfig, m: usize) -> CMatrix {
    let mut h = CMatrix::zeros(system.ue_array.num_elements, system.num_tx());
    for p in params {
        let coef = p.gain * delay_phase(m, system.subcarrier_spacing_hz, p.delay_s);
        h += outer(
            &system.ue_array.steering(p.aoa_rad),
            &system.tx_array.steering(p.aod_rad),
        ) * coef;
    }
    h
}

/// `H̲_m = Σ_k β_k e^{-j2πmΔfκ_k} a_R(θ_B,k) a_T(θ_B,k)ᴴ`, with `m` 1-based.
pub fn ms_channel(params: &[PathParamsMs], system: &SystemConfig, m: usize) -> CMatrix {
    let mut h = CMatrix::zeros(system.rx_array.num_elements, system.num_tx());
    for p in params {
        let coef = p.gain * delay_phase(m, system.subcarrier_spacing_hz, p.delay_s);
        h += outer(
            &system.rx_array.steering(p.aod_rad),
            &system.tx_array.steering(p.aod_rad),
        ) * coef;
    }
    h
}

/// One rank-one piece `scale[m-1] · rx · txᴴ` of `∂H_m/∂ξ_param`.
#[derive(Debug, Clone)]
pub struct RankOneTerm {
    pub param: usize,
    pub scale: Vec<C64>,
    pub rx: CVector,
    pub tx: CVector,
}

/// Analytic partials of the channel with respect to every channel-domain parameter.
#[derive(Debug, Clone)]
pub struct ChannelDerivativeSet {
    pub link: Link,
    pub num_params: usize,
    pub num_subcarriers: usize,
    pub rx_dim: usize,
    pub tx_dim: usize,
    pub terms: Vec<RankOneTerm>,
}

impl ChannelDerivativeSet {
    /// Dense `∂H_m/∂ξ_param` for 1-based subcarrier `m`.
    pub fn matrix(&self, param: usize, m: usize) -> CMatrix {
        let mut d = CMatrix::zeros(self.rx_dim, self.tx_dim);
        for t in self.terms.iter().filter(|t| t.param == param) {
            d += outer(&t.rx, &t.tx) * t.scale[m - 1];
        }
        d
    }

    /// All partials at subcarrier `m`, indexed by parameter.
    pub fn matrices_at(&self, m: usize) -> Vec<CMatrix> {
        let mut out = vec![CMatrix::zeros(self.rx_dim, self.tx_dim); self.num_params];
        for t in &self.terms {
            out[t.param] += outer(&t.rx, &t.tx) * t.scale[m - 1];
        }
        out
    }
}

/// Per-subcarrier sequence `f(m) · e^{-j2πmΔfτ}` for m = 1..=M.
fn sequence(system: &SystemConfig, delay_s: f64, f: impl Fn(usize) -> C64) -> Vec<C64> {
    (1..=system.num_subcarriers)
        .map(|m| f(m) * delay_phase(m, system.subcarrier_spacing_hz, delay_s))
        .collect()
}

/// Build the derivative set for the BP (ξ̄) or MS (ξ̲) parameter vector.
pub fn channel_derivatives(paths: PathSet<'_>, system: &SystemConfig) -> ChannelDerivativeSet {
    let n = paths.num_paths();
    let link = paths.link();
    let tx = &system.tx_array;
    let omega = 2.0 * PI * system.subcarrier_spacing_hz;
    let mut terms = Vec::new();
    let mut push = |param: usize, scale: Vec<C64>, rx: CVector, txv: CVector| {
        terms.push(RankOneTerm {
            param,
            scale,
            rx,
            tx: txv,
        })
    };
    let rx_dim = match paths {
        PathSet::Bistatic(params) => {
            let ue = &system.ue_array;
            for (k, p) in params.iter().enumerate() {
                let a_u = ue.steering(p.aoa_rad);
                let a_t = tx.steering(p.aod_rad);
                let gain = p.gain;
                let base = sequence(system, p.delay_s, |_| gain);
                push(k, base.clone(), a_u.clone(), tx.steering_derivative(p.aod_rad));
                push(n + k, base, ue.steering_derivative(p.aoa_rad), a_t.clone());
                push(
                    2 * n + k,
                    sequence(system, p.delay_s, |m| C64::new(0.0, -omega * m as f64) * gain),
                    a_u.clone(),
                    a_t.clone(),
                );
                push(3 * n + k, sequence(system, p.delay_s, |_| C64::new(1.0, 0.0)), a_u.clone(), a_t.clone());
                push(4 * n + k, sequence(system, p.delay_s, |_| C64::new(0.0, 1.0)), a_u, a_t);
            }
            ue.num_elements
        }
        PathSet::Monostatic(params) => {
            let rx = &system.rx_array;
            for (k, p) in params.iter().enumerate() {
                let a_r = rx.steering(p.aod_rad);
                let a_t = tx.steering(p.aod_rad);
                let gain = p.gain;
                let base = sequence(system, p.delay_s, |_| gain);
                // θ_B moves both the receive and the transmit steering vector.
                push(k, base.clone(), rx.steering_derivative(p.aod_rad), a_t.clone());
                push(k, base, a_r.clone(), tx.steering_derivative(p.aod_rad));
                push(
                    n + k,
                    sequence(system, p.delay_s, |m| C64::new(0.0, -omega * m as f64) * gain),
                    a_r.clone(),
                    a_t.clone(),
                );
                push(2 * n + k, sequence(system, p.delay_s, |_| C64::new(1.0, 0.0)), a_r.clone(), a_t.clone());
                push(3 * n + k, sequence(system, p.delay_s, |_| C64::new(0.0, 1.0)), a_r, a_t);
            }
            rx.num_elements
        }
    };
    ChannelDerivativeSet {
        link,
        num_params: link.num_channel_params(n),
        num_subcarriers: system.num_subcarriers,
        rx_dim,
        tx_dim: tx.num_elements,
        terms,
    }
}
