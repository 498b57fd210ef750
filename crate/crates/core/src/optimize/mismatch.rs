use nalgebra::SymmetricEigen;

use super::{blend, check_rho, BeamformerSet};
use crate::conic::{Affine, ConicProblem, Lmi, SolveStatus, SolverSettings};
use crate::fim::VarianceMatrix;
use crate::hermitian::{hermitian_part, HermitianBasis};
use crate::{CMatrix, Error, Result, C64};

/// `ρ‖W − W_bp‖² + (1−ρ)‖W − W_ms‖²`.
pub fn wbf_objective(w: &CMatrix, w_bp: &CMatrix, w_ms: &CMatrix, rho: f64) -> f64 {
    rho * (w - w_bp).norm_squared() + (1.0 - rho) * (w - w_ms).norm_squared()
}

fn check_shapes(w_bp: &BeamformerSet, w_ms: &BeamformerSet) -> Result<()> {
    if w_bp.w.shape() != w_ms.w.shape() {
        return Err(Error::DimensionMismatch(format!(
            "beamformer sets are {:?} and {:?}",
            w_bp.w.shape(),
            w_ms.w.shape()
        )));
    }
    Ok(())
}

/// Weighted beamformer mismatch on the full-power sphere `‖W‖_F² = budget`.
///
/// The minimiser is `√budget · Ξ/‖Ξ‖_F` with `Ξ = ρW_bp + (1−ρ)W_ms`.
pub fn solve_wbf(w_bp: &BeamformerSet, w_ms: &BeamformerSet, rho: f64, budget: f64) -> Result<BeamformerSet> {
    check_rho(rho)?;
    check_shapes(w_bp, w_ms)?;
    let xi = blend(rho, &w_bp.w, &w_ms.w);
    let norm = xi.norm();
    let reference = w_bp.w.norm().max(w_ms.w.norm());
    if !(norm > 1e-12 * reference) {
        return Err(Error::DegenerateMismatch);
    }
    Ok(BeamformerSet::new(xi * C64::from(budget.sqrt() / norm)))
}

/// Result of the per-slot lifted mismatch SDP, in units where the budget is 1.
#[derive(Debug, Clone)]
pub struct LiftedWbf {
    /// Optimal value of `Σ_l tr(C_l W̃_l)`.
    pub objective: f64,
    /// Sphere optimum `1 − 2‖Ξ‖_F/√budget` for comparison.
    pub closed_form_objective: f64,
    /// Beamformers read off the first column of each lifted block, in √watts.
    pub beamformers: BeamformerSet,
    pub status: SolveStatus,
    pub solve_time_s: f64,
}

/// Lifted form of the mismatch problem: one `(M_T+1)×(M_T+1)` block
/// `W̃_l = [[1, w_lᴴ], [w_l, w_l w_lᴴ]]` per slot with a shared trace budget.
pub fn solve_wbf_lifted(
    w_bp: &BeamformerSet,
    w_ms: &BeamformerSet,
    rho: f64,
    budget: f64,
    settings: &SolverSettings,
) -> Result<LiftedWbf> {
    check_rho(rho)?;
    check_shapes(w_bp, w_ms)?;
    let xi = blend(rho, &w_bp.w, &w_ms.w) * C64::from(1.0 / budget.sqrt());
    let (mt, slots) = xi.shape();
    let basis = HermitianBasis::new(mt + 1);
    let d = basis.dim();
    let mut prob = ConicProblem::new(d * slots);
    let mut total = Affine::constant(-(1.0 + slots as f64));
    for l in 0..slots {
        let off = l * d;
        let mut c = CMatrix::identity(mt + 1, mt + 1);
        c[(0, 0)] = C64::from(0.0);
        for r in 0..mt {
            c[(r + 1, 0)] = -xi[(r, l)];
            c[(0, r + 1)] = -xi[(r, l)].conj();
        }
        let mut emb = Lmi::new(2 * (mt + 1));
        for k in 0..d {
            prob.objective[off + k] = basis.inner(k, &c);
            for (r, col, v) in basis.embedding_upper(k) {
                emb.add(r, col, off + k, v);
            }
            total.add_term(off + k, basis.trace(k));
        }
        prob.add_lmi(emb);
        // Diag(0) is coordinate 0.
        prob.add_equality(Affine {
            terms: vec![(off, 1.0)],
            constant: -1.0,
        });
    }
    prob.add_equality(total);
    let sol = prob.solve(settings)?;
    let w = CMatrix::from_fn(mt, slots, |r, l| {
        let block = basis.assemble(&sol.x[l * d..(l + 1) * d]);
        block[(r + 1, 0)] / block[(0, 0)].re * budget.sqrt()
    });
    Ok(LiftedWbf {
        objective: sol.objective,
        closed_form_objective: 1.0 - 2.0 * xi.norm(),
        beamformers: BeamformerSet::new(w),
        status: sol.status,
        solve_time_s: sol.solve_time_s,
    })
}

/// `ρV_bp + (1−ρ)V_ms`.
pub fn wvm_closed_form(v_bp: &VarianceMatrix, v_ms: &VarianceMatrix, rho: f64) -> VarianceMatrix {
    VarianceMatrix::new_unchecked(blend(rho, v_bp.matrix(), v_ms.matrix()))
}

/// Weighted covariance mismatch `ρ‖V − V_bp‖² + (1−ρ)‖V − V_ms‖²` over PSD `V`
/// with the endpoints' trace, solved as a conic program over the range of the
/// blended endpoints.
pub fn solve_wvm(
    v_bp: &VarianceMatrix,
    v_ms: &VarianceMatrix,
    rho: f64,
    settings: &SolverSettings,
) -> Result<(VarianceMatrix, SolveStatus, f64)> {
    check_rho(rho)?;
    if v_bp.dim() != v_ms.dim() {
        return Err(Error::DimensionMismatch("endpoint covariances differ in size".into()));
    }
    let t = v_bp.trace();
    if !(t > 0.0) || (v_ms.trace() - t).abs() > 1e-6 * t {
        return Err(Error::Precondition(format!(
            "endpoint traces differ: {t:.6e} vs {:.6e}",
            v_ms.trace()
        )));
    }
    let target = blend(rho, v_bp.matrix(), v_ms.matrix()) * C64::from(1.0 / t);
    let q = support(&target);
    let reduced = q.adjoint() * &target * &q;
    let n = q.ncols();
    let basis = HermitianBasis::new(n);
    let d = basis.dim();
    let mut prob = ConicProblem::new(d);
    let mut quad = vec![0.0; d];
    let mut emb = Lmi::new(2 * n);
    let mut tr = Affine::constant(-1.0);
    for k in 0..d {
        quad[k] = 2.0 * basis.frobenius_weight(k);
        prob.objective[k] = -2.0 * basis.inner(k, &reduced);
        for (r, c, v) in basis.embedding_upper(k) {
            emb.add(r, c, k, v);
        }
        tr.add_term(k, basis.trace(k));
    }
    prob.quadratic_diag = Some(quad);
    prob.add_lmi(emb);
    prob.add_equality(tr);
    let sol = prob.solve(settings)?;
    let raw = hermitian_part(&basis.assemble(&sol.x));
    let eig = SymmetricEigen::new(raw);
    let clipped = eig.eigenvalues.map(|l| C64::from(l.max(0.0)));
    let x = &eig.eigenvectors * CMatrix::from_diagonal(&clipped) * eig.eigenvectors.adjoint();
    let v = hermitian_part(&(&q * x * q.adjoint())) * C64::from(t);
    Ok((VarianceMatrix::new_unchecked(v), sol.status, sol.solve_time_s))
}

/// Eigenvalues below this fraction of the largest are solver residue.
const RANGE_FLOOR: f64 = 1e-6;

/// Orthonormal basis of the range of the PSD target. The minimiser is the target
/// itself, and inside its range the target is positive definite, which keeps
/// the conic solve away from the boundary of the cone.
fn support(target: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(hermitian_part(target));
    let top = eig.eigenvalues.max();
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > RANGE_FLOOR * top)
        .collect();
    CMatrix::from_fn(target.nrows(), keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
}

#[cfg(test)]
mod tests {
    use super::*;
    fn unit_set(seed: f64, budget: f64) -> BeamformerSet {
        let w = CMatrix::from_fn(4, 2, |r, c| C64::new((seed + r as f64).sin(), (seed * 2.0 + c as f64).cos()));
        let n = w.norm();
        BeamformerSet::new(w * C64::from(budget.sqrt() / n))
    }

    #[test]
    fn wbf_endpoints() {
        let (a, b) = (unit_set(0.3, 2.0), unit_set(1.7, 2.0));
        assert!((solve_wbf(&a, &b, 1.0, 2.0).unwrap().w - &a.w).norm() < 1e-12);
        assert!((solve_wbf(&a, &b, 0.0, 2.0).unwrap().w - &b.w).norm() < 1e-12);
    }

    #[test]
    fn wbf_antipodal_is_degenerate() {
        let a = unit_set(0.3, 1.0);
        let b = a.scaled(-1.0);
        assert!(matches!(solve_wbf(&a, &b, 0.5, 1.0), Err(Error::DegenerateMismatch)));
    }

    #[test]
    fn wbf_beats_sphere_samples() {
        let (a, b) = (unit_set(0.3, 1.5), unit_set(2.1, 1.5));
        let w = solve_wbf(&a, &b, 0.4, 1.5).unwrap();
        let best = wbf_objective(&w.w, &a.w, &b.w, 0.4);
        for s in 0..50 {
            let cand = unit_set(s as f64 * 0.37, 1.5);
            assert!(wbf_objective(&cand.w, &a.w, &b.w, 0.4) >= best - 1e-12);
        }
    }

    #[test]
    fn wvm_endpoint_and_scale() {
        let a = BeamformerSet::new(unit_set(0.1, 1.0).w).covariance();
        let b = BeamformerSet::new(unit_set(0.9, 1.0).w).covariance();
        let v = wvm_closed_form(&a, &b, 1.0);
        assert!((v.matrix() - a.matrix()).norm() < 1e-15);
        let (s1, st, _) = solve_wvm(&a, &b, 0.5, &SolverSettings::default()).unwrap();
        assert!(st.is_usable());
        let (s3, _, _) = solve_wvm(&a.scaled(3.0), &b.scaled(3.0), 0.5, &SolverSettings::default()).unwrap();
        assert!((s3.matrix() - s1.matrix() * C64::from(3.0)).norm() < 1e-6 * s3.matrix().norm());
    }

    #[test]
    fn wvm_matches_closed_form_for_low_rank_endpoints() {
        let c = |re: f64, im: f64| C64::new(re, im);
        let wa = CMatrix::from_column_slice(4, 1, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.5, 0.0)]);
        let wb = CMatrix::from_column_slice(
            4,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, -1.0), c(0.3, 0.0)],
        );
        let a = VarianceMatrix::from_beamformers(&wa);
        let b = VarianceMatrix::from_beamformers(&wb);
        let b = b.scaled(a.trace() / b.trace());
        for rho in [0.0, 0.3, 1.0] {
            let (v, st, _) = solve_wvm(&a, &b, rho, &SolverSettings::default()).unwrap();
            assert!(st.is_usable());
            let exact = wvm_closed_form(&a, &b, rho);
            let err = (v.matrix() - exact.matrix()).norm() / exact.matrix().norm();
            assert!(err < 1e-6, "rho={rho}: {err}");
        }
    }
}
