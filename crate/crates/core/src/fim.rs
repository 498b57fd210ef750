//! Fisher information for both links, the position-domain transformation, the
//! equivalent-FIM partition and the resulting CRBs.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::channel::{channel_derivatives, ChannelDerivativeSet, Link, PathSet};
use crate::par::Exec;
use crate::scenario::{
    derive_bp_params, derive_ms_params, distance, GeometryConfig, PathParamsBp,
    PathParamsMs, SystemConfig, SPEED_OF_LIGHT,
};
use crate::{CMatrix, Error, RMatrix, Result, C64};

/// Condition number above which an information block counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Transmit covariance `V = W Wᴴ` (Hermitian, PSD).
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceMatrix(CMatrix);

impl VarianceMatrix {
    /// Wrap `v`, checking it is square, Hermitian and PSD up to `1e-9·tr(V)`.
    pub fn new(v: CMatrix) -> Result<Self> {
        if !v.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        let scale = v.norm().max(f64::MIN_POSITIVE);
        if (&v - v.adjoint()).norm() > 1e-10 * scale {
            return Err(Error::Precondition("covariance is not Hermitian".into()));
        }
        let out = VarianceMatrix(crate::hermitian::hermitian_part(&v));
        let min = out.min_eigenvalue();
        if min < -1e-9 * out.trace().max(0.0) - f64::MIN_POSITIVE {
            return Err(Error::Precondition(format!(
                "covariance is not PSD (min eigenvalue {min:.3e})"
            )));
        }
        Ok(out)
    }

    /// Wrap without checks; callers guarantee the invariants.
    pub(crate) fn new_unchecked(v: CMatrix) -> Self {
        VarianceMatrix(v)
    }

    /// `W Wᴴ`.
    pub fn from_beamformers(w: &CMatrix) -> Self {
        VarianceMatrix(crate::hermitian::hermitian_part(&(w * w.adjoint())))
    }

    /// `(budget / M_T) · I`.
    pub fn isotropic(n: usize, budget: f64) -> Self {
        VarianceMatrix(CMatrix::identity(n, n) * C64::from(budget / n as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scaled(&self, gamma: f64) -> Self {
        VarianceMatrix(&self.0 * C64::from(gamma))
    }

    pub fn eigen(&self) -> SymmetricEigen<C64, nalgebra::Dyn> {
        SymmetricEigen::new(self.0.clone())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().eigenvalues.min()
    }

    /// Rank with eigenvalues below `1e-9·tr(V)` treated as zero.
    pub fn numerical_rank(&self) -> usize {
        let tol = 1e-9 * self.trace();
        self.eigen().eigenvalues.iter().filter(|&&l| l > tol).count()
    }
}

/// Channel-domain FIM by direct summation over subcarriers:
/// `[I_c]_ij = (2N/σ²) Σ_m Re tr(∂H_m/∂ξ_j · V · (∂H_m/∂ξ_i)ᴴ)`.
pub fn channel_fim(
    derivs: &ChannelDerivativeSet,
    v: &VarianceMatrix,
    system: &SystemConfig,
    exec: Exec,
) -> Result<RMatrix> {
    if v.dim() != derivs.tx_dim {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, channel has {} transmit antennas",
            v.dim(),
            v.dim(),
            derivs.tx_dim
        )));
    }
    let n = derivs.num_params;
    let vm = v.matrix();
    let per_subcarrier = |idx: usize| {
        let d = derivs.matrices_at(idx + 1);
        let dv: Vec<CMatrix> = d.iter().map(|di| di * vm).collect();
        let mut out = RMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                // Re tr(D_j V D_iᴴ) = Re Σ_ab (D_j V)_ab · conj(D_i)_ab
                let s: f64 = dv[j]
                    .iter()
                    .zip(d[i].iter())
                    .map(|(x, y)| (x * y.conj()).re)
                    .sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    };
    let total = exec.map_reduce(
        derivs.num_subcarriers,
        per_subcarrier,
        || RMatrix::zeros(n, n),
        |a, b| a + b,
    );
    Ok(total * fim_prefactor(system))
}

/// `2N / σ²`.
pub fn fim_prefactor(system: &SystemConfig) -> f64 {
    2.0 * system.num_symbols as f64 / system.noise_power_watts
}

/// Precomputed linear map `V ↦ I_c(V)` built from the rank-one derivative factors.
///
/// With `∂H_m/∂ξ_i = Σ_{a∈i} s_a(m) r_a t_aᴴ`,
/// `[I_c]_ij = Σ_{a∈i, b∈j} Re(G_ab · t_bᴴ V t_a)` where
/// `G_ab = (2N/σ²) · Σ_m conj(s_a(m)) s_b(m) · r_aᴴ r_b`.
#[derive(Debug, Clone)]
pub struct FimCoefficients {
    pub num_params: usize,
    owner: Vec<usize>,
    /// Transmit factors as columns, one per rank-one term.
    tx: CMatrix,
    gram: CMatrix,
}

impl FimCoefficients {
    pub fn new(derivs: &ChannelDerivativeSet, system: &SystemConfig) -> Self {
        let terms = &derivs.terms;
        let nt = terms.len();
        let pref = fim_prefactor(system);
        let gram = CMatrix::from_fn(nt, nt, |a, b| {
            let (ta, tb) = (&terms[a], &terms[b]);
            let seq: C64 = ta
                .scale
                .iter()
                .zip(&tb.scale)
                .map(|(x, y)| x.conj() * y)
                .sum();
            seq * ta.rx.dotc(&tb.rx) * pref
        });
        let tx = CMatrix::from_fn(derivs.tx_dim, nt, |r, c| terms[c].tx[r]);
        FimCoefficients {
            num_params: derivs.num_params,
            owner: terms.iter().map(|t| t.param).collect(),
            tx,
            gram,
        }
    }

    pub fn tx_dim(&self) -> usize {
        self.tx.nrows()
    }

    /// Transmit-side factors `t_a` as columns. `I_c(V)` depends on `V` only
    /// through `t_bᴴ V t_a`.
    pub fn tx_factors(&self) -> &CMatrix {
        &self.tx
    }

    /// Evaluate `I_c` at any Hermitian `V` (linear in `V`).
    pub fn evaluate(&self, v: &CMatrix) -> RMatrix {
        // x[(b, a)] = t_bᴴ V t_a
        let x = self.tx.adjoint() * (v * &self.tx);
        let mut out = RMatrix::zeros(self.num_params, self.num_params);
        let nt = self.owner.len();
        for a in 0..nt {
            for b in 0..nt {
                out[(self.owner[a], self.owner[b])] += (self.gram[(a, b)] * x[(b, a)]).re;
            }
        }
        // Exact symmetry for Hermitian V holds analytically; remove rounding skew.
        (&out + out.transpose()) * 0.5
    }
}

/// Column layout of the position-domain parameter vector.
///
/// BP: `[p_U; φ; p_1..p_K; Δt; α_R; α_I]`; MS: `[p_U; p_1..p_K; β_R; β_I]`.
pub fn num_position_params(link: Link, num_targets: usize) -> usize {
    match link {
        Link::Bistatic => 4 * num_targets + 6,
        Link::Monostatic => 4 * num_targets + 4,
    }
}

/// Size of the block of interest (`F`): 2 for BP, `2K+2` for MS.
pub fn num_interest_params(link: Link, num_targets: usize) -> usize {
    match link {
        Link::Bistatic => 2,
        Link::Monostatic => 2 * num_targets + 2,
    }
}

/// `∂ bearing(from → to) / ∂ to`.
fn bearing_gradient(from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
    let (dx, dy) = (to[0] - from[0], to[1] - from[1]);
    let d2 = dx * dx + dy * dy;
    [-dy / d2, dx / d2]
}

/// Unit vector from `from` to `to`.
fn unit(from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
    let d = distance(from, to);
    [(to[0] - from[0]) / d, (to[1] - from[1]) / d]
}

fn put2(j: &mut RMatrix, row: usize, col: usize, g: [f64; 2], sign: f64) {
    j[(row, col)] += sign * g[0];
    j[(row, col + 1)] += sign * g[1];
}

/// `∂ξ̄/∂η̄`, shape `(5K+5) × (4K+6)`.
pub fn jacobian_bp(geometry: &GeometryConfig, _system: &SystemConfig) -> Result<RMatrix> {
    geometry.validate()?;
    let k = geometry.num_targets();
    let n = k + 1;
    let (pb, pu) = (geometry.bs_position, geometry.ue_position);
    let mut j = RMatrix::zeros(5 * n, 4 * k + 6);
    let dt_col = 3 + 2 * k;
    // LOS
    put2(&mut j, 0, 0, bearing_gradient(pb, pu), 1.0);
    put2(&mut j, n, 0, bearing_gradient(pu, pb), -1.0);
    j[(n, 2)] = -1.0;
    put2(&mut j, 2 * n, 0, unit(pb, pu), 1.0 / SPEED_OF_LIGHT);
    j[(2 * n, dt_col)] = 1.0;
    for (i, t) in geometry.targets.iter().enumerate() {
        let path = i + 1;
        let col = 3 + 2 * i;
        let pk = t.position;
        put2(&mut j, path, col, bearing_gradient(pb, pk), 1.0);
        put2(&mut j, n + path, col, bearing_gradient(pu, pk), 1.0);
        put2(&mut j, n + path, 0, bearing_gradient(pu, pk), -1.0);
        j[(n + path, 2)] = -1.0;
        put2(&mut j, 2 * n + path, col, unit(pb, pk), 1.0 / SPEED_OF_LIGHT);
        put2(&mut j, 2 * n + path, col, unit(pu, pk), 1.0 / SPEED_OF_LIGHT);
        put2(&mut j, 2 * n + path, 0, unit(pk, pu), 1.0 / SPEED_OF_LIGHT);
        j[(2 * n + path, dt_col)] = 1.0;
    }
    for g in 0..2 * n {
        j[(3 * n + g, 4 + 2 * k + g)] = 1.0;
    }
    Ok(j)
}

/// `∂ξ̲/∂η̲`, shape `(4K+4) × (4K+4)`.
pub fn jacobian_ms(geometry: &GeometryConfig, _system: &SystemConfig) -> Result<RMatrix> {
    geometry.validate()?;
    let n = geometry.num_targets() + 1;
    let pb = geometry.bs_position;
    let mut j = RMatrix::zeros(4 * n, 4 * n);
    for (k, p) in geometry.ms_points().into_iter().enumerate() {
        put2(&mut j, k, 2 * k, bearing_gradient(pb, p), 1.0);
        put2(&mut j, n + k, 2 * k, unit(pb, p), 2.0 / SPEED_OF_LIGHT);
    }
    for g in 0..2 * n {
        j[(2 * n + g, 2 * n + g)] = 1.0;
    }
    Ok(j)
}

/// Position-domain FIM with its `[[F, G], [Gᵀ, Z]]` partition.
#[derive(Debug, Clone)]
pub struct PositionFim {
    pub link: Link,
    pub matrix: RMatrix,
    /// Size of `F`.
    pub num_interest: usize,
}

impl PositionFim {
    pub fn f(&self) -> RMatrix {
        let p = self.num_interest;
        self.matrix.view((0, 0), (p, p)).into_owned()
    }

    pub fn g(&self) -> RMatrix {
        let (p, n) = (self.num_interest, self.matrix.nrows());
        self.matrix.view((0, p), (p, n - p)).into_owned()
    }

    pub fn z(&self) -> RMatrix {
        let (p, n) = (self.num_interest, self.matrix.nrows());
        self.matrix.view((p, p), (n - p, n - p)).into_owned()
    }

    /// Equivalent FIM `F − G Z⁻¹ Gᵀ` of the parameters of interest.
    pub fn efim(&self) -> Result<RMatrix> {
        let f = self.f();
        if self.num_interest == self.matrix.nrows() {
            return Ok(f);
        }
        let g = self.g();
        let zinv = stable_inverse(&self.z())?;
        let s = &f - &g * zinv * g.transpose();
        Ok((&s + s.transpose()) * 0.5)
    }
}

/// `I_p = Jᵀ I_c J`.
pub fn position_fim(channel_fim: &RMatrix, jacobian: &RMatrix, link: Link, num_targets: usize) -> Result<PositionFim> {
    if channel_fim.nrows() != jacobian.nrows() || !channel_fim.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "channel FIM {}x{} vs Jacobian {}x{}",
            channel_fim.nrows(),
            channel_fim.ncols(),
            jacobian.nrows(),
            jacobian.ncols()
        )));
    }
    let m = jacobian.transpose() * channel_fim * jacobian;
    Ok(PositionFim {
        link,
        matrix: (&m + m.transpose()) * 0.5,
        num_interest: num_interest_params(link, num_targets),
    })
}

/// Inverse of a symmetric positive-definite matrix after Jacobi equilibration.
///
/// Fails with [`Error::Unidentifiable`] when the equilibrated condition number
/// reaches [`SINGULAR_CONDITION`].
pub fn stable_inverse(a: &RMatrix) -> Result<RMatrix> {
    let n = a.nrows();
    if n == 0 {
        return Ok(RMatrix::zeros(0, 0));
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        let null_dim = diag.iter().filter(|&&d| !(d > 0.0)).count();
        return Err(Error::Unidentifiable {
            null_dim,
            condition: f64::INFINITY,
        });
    }
    let d = diag.map(|x| 1.0 / x.sqrt());
    let scaled = RMatrix::from_fn(n, n, |i, j| a[(i, j)] * d[i] * d[j]);
    let eig = SymmetricEigen::new(scaled.clone());
    let (lmax, lmin) = (eig.eigenvalues.max(), eig.eigenvalues.min());
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition >= SINGULAR_CONDITION {
        let null_dim = eig
            .eigenvalues
            .iter()
            .filter(|&&l| l < lmax / SINGULAR_CONDITION)
            .count();
        return Err(Error::Unidentifiable {
            null_dim,
            condition,
        });
    }
    let inv = match Cholesky::new(scaled) {
        Some(ch) => ch.inverse(),
        None => {
            let inv_vals = eig.eigenvalues.map(|l| 1.0 / l);
            &eig.eigenvectors * RMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
        }
    };
    Ok(RMatrix::from_fn(n, n, |i, j| inv[(i, j)] * d[i] * d[j]))
}

/// CRB on the parameters of interest, `tr((F − G Z⁻¹ Gᵀ)⁻¹)`, in m².
pub fn crb(pfim: &PositionFim) -> Result<f64> {
    Ok(stable_inverse(&pfim.efim()?)?.trace())
}

/// CRB via the full inverse, `tr([I_p⁻¹]_{F block})`.
pub fn crb_direct(pfim: &PositionFim) -> Result<f64> {
    let inv = stable_inverse(&pfim.matrix)?;
    Ok((0..pfim.num_interest).map(|i| inv[(i, i)]).sum())
}

/// Everything needed to evaluate one link's CRB for arbitrary covariances.
#[derive(Debug, Clone)]
pub struct LinkFim {
    pub link: Link,
    pub num_targets: usize,
    pub coefficients: FimCoefficients,
    pub jacobian: RMatrix,
}

impl LinkFim {
    pub fn channel_fim(&self, v: &CMatrix) -> RMatrix {
        self.coefficients.evaluate(v)
    }

    pub fn position_fim(&self, v: &CMatrix) -> PositionFim {
        position_fim(&self.coefficients.evaluate(v), &self.jacobian, self.link, self.num_targets)
            .expect("coefficient and Jacobian shapes are consistent by construction")
    }

    pub fn crb(&self, v: &VarianceMatrix) -> Result<f64> {
        crb(&self.position_fim(v.matrix()))
    }

    pub fn num_interest(&self) -> usize {
        num_interest_params(self.link, self.num_targets)
    }

    pub fn num_position(&self) -> usize {
        self.jacobian.ncols()
    }
}

/// Both links of one scenario realisation.
#[derive(Debug, Clone)]
pub struct FimModel {
    pub system: SystemConfig,
    pub geometry: GeometryConfig,
    pub bp_paths: Vec<PathParamsBp>,
    pub ms_paths: Vec<PathParamsMs>,
    pub bp: LinkFim,
    pub ms: LinkFim,
}

impl FimModel {
    pub fn new(system: &SystemConfig, geometry: &GeometryConfig) -> Result<Self> {
        let bp_paths = derive_bp_params(geometry, system)?;
        let ms_paths = derive_ms_params(geometry, system)?;
        let k = geometry.num_targets();
        let bp_d = channel_derivatives(PathSet::Bistatic(&bp_paths), system);
        let ms_d = channel_derivatives(PathSet::Monostatic(&ms_paths), system);
        Ok(FimModel {
            bp: LinkFim {
                link: Link::Bistatic,
                num_targets: k,
                coefficients: FimCoefficients::new(&bp_d, system),
                jacobian: jacobian_bp(geometry, system)?,
            },
            ms: LinkFim {
                link: Link::Monostatic,
                num_targets: k,
                coefficients: FimCoefficients::new(&ms_d, system),
                jacobian: jacobian_ms(geometry, system)?,
            },
            system: system.clone(),
            geometry: geometry.clone(),
            bp_paths,
            ms_paths,
        })
    }

    pub fn link(&self, link: Link) -> &LinkFim {
        match link {
            Link::Bistatic => &self.bp,
            Link::Monostatic => &self.ms,
        }
    }

    /// `(CRB_BP, CRB_MS)` in m².
    pub fn crbs(&self, v: &VarianceMatrix) -> Result<(f64, f64)> {
        Ok((self.bp.crb(v)?, self.ms.crb(v)?))
    }

    /// `(√CRB_BP, √CRB_MS)` in metres.
    pub fn sqrt_crbs(&self, v: &VarianceMatrix) -> Result<(f64, f64)> {
        let (b, m) = self.crbs(v)?;
        Ok((b.sqrt(), m.sqrt()))
    }

    /// AoDs of the UE and every target in the BS frame.
    pub fn aods(&self) -> Vec<f64> {
        self.ms_paths.iter().map(|p| p.aod_rad).collect()
    }

    pub fn num_tx(&self) -> usize {
        self.system.num_tx()
    }

    pub fn num_targets(&self) -> usize {
        self.geometry.num_targets()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;
    use approx::assert_relative_eq;

    fn model() -> FimModel {
        let (s, g) = default_scenario();
        FimModel::new(&s, &g).unwrap()
    }

    #[test]
    fn zero_covariance_gives_zero_fim() {
        let m = model();
        let z = CMatrix::zeros(16, 16);
        assert_eq!(m.bp.channel_fim(&z).norm(), 0.0);
        assert_eq!(m.ms.channel_fim(&z).norm(), 0.0);
    }

    #[test]
    fn jacobian_shapes_and_trivial_entries() {
        let (s, g) = default_scenario();
        let jb = jacobian_bp(&g, &s).unwrap();
        assert_eq!(jb.shape(), (20, 18));
        assert_eq!(jb[(8, 3 + 2 * 3)], 1.0); // ∂τ₀/∂Δt
        for k in 0..4 {
            assert_eq!(jb[(4 + k, 2)], -1.0); // ∂θ_U,k/∂φ
        }
        let jm = jacobian_ms(&g, &s).unwrap();
        assert_eq!(jm.shape(), (16, 16));
        assert_eq!(jm.view((8, 8), (8, 8)).into_owned(), RMatrix::identity(8, 8));
        for k in 0..4 {
            let norm = jm[(4 + k, 2 * k)].hypot(jm[(4 + k, 2 * k + 1)]);
            assert_relative_eq!(norm, 2.0 / SPEED_OF_LIGHT, max_relative = 1e-12);
        }
    }

    #[test]
    fn identity_jacobian_keeps_channel_fim() {
        let m = model();
        let v = VarianceMatrix::isotropic(16, m.system.power_budget());
        let ic = m.ms.channel_fim(v.matrix());
        let p = position_fim(&ic, &RMatrix::identity(16, 16), Link::Monostatic, 3).unwrap();
        assert_eq!(p.matrix, ic);
        assert_eq!(p.f().shape(), (8, 8));
        assert_eq!(p.z().shape(), (8, 8));
    }

    #[test]
    fn decoupled_crb_is_trace_of_inverse() {
        let mut a = RMatrix::identity(5, 5);
        a[(0, 0)] = 4.0;
        a[(1, 1)] = 2.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(3, 3)] = 7.0;
        let p = PositionFim {
            link: Link::Bistatic,
            matrix: a.clone(),
            num_interest: 2,
        };
        let finv = a.view((0, 0), (2, 2)).into_owned().try_inverse().unwrap();
        assert_relative_eq!(crb(&p).unwrap(), finv.trace(), max_relative = 1e-14);
        assert_relative_eq!(crb_direct(&p).unwrap(), finv.trace(), max_relative = 1e-14);
    }

    #[test]
    fn singular_fim_reports_null_space() {
        let mut a = RMatrix::identity(4, 4);
        a[(2, 2)] = 1.0;
        a[(3, 3)] = 1.0;
        a[(2, 3)] = 1.0;
        a[(3, 2)] = 1.0;
        let p = PositionFim {
            link: Link::Bistatic,
            matrix: a,
            num_interest: 2,
        };
        match crb(&p) {
            Err(Error::Unidentifiable { null_dim, .. }) => assert_eq!(null_dim, 1),
            other => panic!("expected unidentifiable, got {other:?}"),
        }
    }

    #[test]
    fn los_only_bistatic_is_unidentifiable() {
        let (s, g) = default_scenario();
        let m = FimModel::new(&s, &g.truncate_targets(0)).unwrap();
        let v = VarianceMatrix::isotropic(16, s.power_budget());
        assert!(matches!(m.bp.crb(&v), Err(Error::Unidentifiable { .. })));
        assert!(m.ms.crb(&v).is_ok());
    }

    #[test]
    fn variance_matrix_validation() {
        let mut bad = CMatrix::identity(3, 3);
        bad[(0, 0)] = C64::new(-1.0, 0.0);
        assert!(VarianceMatrix::new(bad).is_err());
        let mut skew = CMatrix::identity(3, 3);
        skew[(0, 1)] = C64::new(0.0, 1.0);
        assert!(VarianceMatrix::new(skew).is_err());
        let v = VarianceMatrix::isotropic(4, 2.0);
        assert_relative_eq!(v.trace(), 2.0);
        assert_eq!(v.numerical_rank(), 4);
    }
}
