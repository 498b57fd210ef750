use rand::Rng;
use rand_distr::StandardNormal;

use super::BeamformerSet;
use crate::array::ArraySpec;
use crate::fim::VarianceMatrix;
use crate::{CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum Recovery {
    /// `W = Q_r diag(√λ_r)`, exact.
    Decomposition { rank: usize },
    /// Best of `trials` Gaussian candidates under the supplied objective.
    Randomization { trials: usize, best_objective: f64 },
}

/// Eigenpairs of `V`, eigenvalues descending, each eigenvector rotated so its
/// first sizeable entry is real and positive.
fn sorted_eigen(v: &VarianceMatrix) -> (Vec<f64>, CMatrix) {
    let eig = v.eigen();
    let n = v.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut q = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let anchor = col
            .iter()
            .find(|z| z.norm() > 1e-6 * peak)
            .copied()
            .unwrap_or(C64::from(1.0));
        let rot = anchor.conj() / anchor.norm();
        q.set_column(dst, &(col * rot));
    }
    (order.iter().map(|&i| eig.eigenvalues[i]).collect(), q)
}

/// Slot beamformers `W` (`M_T × slots`) whose covariance reproduces `V`, or the
/// best Gaussian-randomised candidate when `rank(V) > slots`.
pub fn recover_beamformers<R: Rng + ?Sized>(
    v: &VarianceMatrix,
    slots: usize,
    objective: &dyn Fn(&VarianceMatrix) -> f64,
    trials: usize,
    rng: &mut R,
) -> (BeamformerSet, Recovery) {
    let n = v.dim();
    let (vals, q) = sorted_eigen(v);
    let tol = 1e-9 * v.trace();
    let rank = vals.iter().filter(|&&l| l > tol).count();
    if rank <= slots {
        let mut w = CMatrix::zeros(n, slots);
        for k in 0..rank {
            w.set_column(k, &(q.column(k) * C64::from(vals[k].sqrt())));
        }
        return (BeamformerSet::new(w), Recovery::Decomposition { rank });
    }
    let root = &q * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        vals.iter().map(|&l| C64::from(l.max(0.0).sqrt())),
    ));
    let target = v.trace();
    let mut best: Option<(f64, CMatrix)> = None;
    for _ in 0..trials.max(1) {
        let g = CMatrix::from_fn(n, slots, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        let mut w = &root * g;
        let p = w.norm_squared();
        if p > 0.0 {
            w *= C64::from((target / p).sqrt());
        }
        let f = objective(&VarianceMatrix::from_beamformers(&w));
        if best.as_ref().is_none_or(|(b, _)| f < *b) {
            best = Some((f, w));
        }
    }
    let (f, w) = best.expect("at least one trial");
    (
        BeamformerSet::new(w),
        Recovery::Randomization {
            trials: trials.max(1),
            best_objective: f,
        },
    )
}

/// Transmit power `a(θ)ᴴ V a(θ)` towards each angle (radians).
pub fn beampattern(v: &VarianceMatrix, array: &ArraySpec, angles: &[f64]) -> Vec<f64> {
    angles
        .iter()
        .map(|&t| {
            let a = array.steering(t);
            a.dotc(&(v.matrix() * &a)).re
        })
        .collect()
}
