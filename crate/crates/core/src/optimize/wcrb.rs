use nalgebra::SymmetricEigen;

use super::codebook::Codebook;
use super::check_rho;
use crate::channel::Link;
use crate::conic::{Affine, ConicProblem, Lmi, SolveStatus, SolverSettings};
use crate::fim::{stable_inverse, FimModel, LinkFim, PositionFim, VarianceMatrix};
use crate::hermitian::HermitianBasis;
use crate::par::Exec;
use crate::{CMatrix, Error, RMatrix, Result, C64};

/// Parameterisation of the transmit covariance.
#[derive(Debug, Clone)]
pub enum CovarianceSpace {
    /// `V = R X Rᴴ` for any PSD `X`, with `R` having orthonormal columns.
    Full { range: CMatrix, basis: HermitianBasis },
    /// `V = Σ_i p_i u_i u_iᴴ` over the unit-norm codebook columns.
    Codebook(Codebook),
}

impl CovarianceSpace {
    pub fn num_vars(&self) -> usize {
        match self {
            CovarianceSpace::Full { basis, .. } => basis.dim(),
            CovarianceSpace::Codebook(c) => c.len(),
        }
    }

    /// Unrestricted covariances of size `n`.
    pub fn unrestricted(n: usize) -> Self {
        CovarianceSpace::Full {
            range: CMatrix::identity(n, n),
            basis: HermitianBasis::new(n),
        }
    }

    /// Covariances supported on the span of `factors`. Restricting to this
    /// span loses nothing when the information depends on `V` only through
    /// `fᴴ V g` for columns `f, g` of `factors`: projecting onto the span keeps
    /// the information and cannot increase the trace.
    pub fn spanned_by(factors: &CMatrix) -> Self {
        let svd = factors.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let top = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-10 * top)
            .collect();
        let range = CMatrix::from_fn(factors.nrows(), keep.len(), |r, c| u[(r, keep[c])]);
        CovarianceSpace::Full {
            basis: HermitianBasis::new(keep.len()),
            range,
        }
    }

    fn element(&self, k: usize) -> CMatrix {
        match self {
            CovarianceSpace::Full { range, basis } => range * basis.element(k) * range.adjoint(),
            CovarianceSpace::Codebook(c) => {
                let u = c.columns.column(k);
                &u * u.adjoint()
            }
        }
    }

    /// Coordinates of the normalised reference covariance.
    fn reference(&self) -> Vec<f64> {
        match self {
            CovarianceSpace::Full { basis: b, .. } => {
                let n = b.size();
                let mut x = vec![0.0; b.dim()];
                x[..n].fill(1.0 / n as f64);
                x
            }
            CovarianceSpace::Codebook(c) => vec![1.0 / c.len() as f64; c.len()],
        }
    }
}

/// Position-domain FIMs of every basis covariance, scaled by the power budget
/// so that normalised coordinates with unit trace use the full budget.
#[derive(Debug, Clone)]
pub struct FimMaps {
    pub space: CovarianceSpace,
    pub budget: f64,
    pub num_targets: usize,
    pub bp: Vec<RMatrix>,
    pub ms: Vec<RMatrix>,
}

impl FimMaps {
    pub fn new(model: &FimModel, space: CovarianceSpace, exec: Exec) -> Self {
        let budget = model.system.power_budget();
        let per_link = |link: &LinkFim| {
            exec.map_range(space.num_vars(), |k| {
                let e = space.element(k) * C64::from(budget);
                link.position_fim(&e).matrix
            })
        };
        FimMaps {
            bp: per_link(&model.bp),
            ms: per_link(&model.ms),
            budget,
            num_targets: model.num_targets(),
            space,
        }
    }

    /// Maps over every PSD covariance, reduced to the span of the transmit
    /// factors of both links.
    pub fn full(model: &FimModel, exec: Exec) -> Self {
        let (a, b) = (model.bp.coefficients.tx_factors(), model.ms.coefficients.tx_factors());
        let mut factors = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
        factors.columns_mut(0, a.ncols()).copy_from(a);
        factors.columns_mut(a.ncols(), b.ncols()).copy_from(b);
        Self::new(model, CovarianceSpace::spanned_by(&factors), exec)
    }

    /// Maps over every PSD covariance in all `M_T²` coordinates.
    pub fn unreduced(model: &FimModel, exec: Exec) -> Self {
        Self::new(model, CovarianceSpace::unrestricted(model.num_tx()), exec)
    }

    pub fn codebook(model: &FimModel, codebook: Codebook, exec: Exec) -> Self {
        Self::new(model, CovarianceSpace::Codebook(codebook), exec)
    }

    fn maps(&self, link: Link) -> &[RMatrix] {
        match link {
            Link::Bistatic => &self.bp,
            Link::Monostatic => &self.ms,
        }
    }

    pub fn position_fim(&self, link: Link, x: &[f64]) -> PositionFim {
        let maps = self.maps(link);
        let mut m = RMatrix::zeros(maps[0].nrows(), maps[0].ncols());
        for (a, &xk) in maps.iter().zip(x) {
            if xk != 0.0 {
                m += a * xk;
            }
        }
        PositionFim {
            link,
            matrix: m,
            num_interest: crate::fim::num_interest_params(link, self.num_targets),
        }
    }

    /// Covariance in watts for normalised coordinates `x`.
    pub fn covariance(&self, x: &[f64]) -> CMatrix {
        let v = match &self.space {
            CovarianceSpace::Full { range, basis } => range * basis.assemble(x) * range.adjoint(),
            CovarianceSpace::Codebook(c) => {
                let scaled = CMatrix::from_fn(c.columns.nrows(), c.len(), |r, k| {
                    c.columns[(r, k)] * x[k].max(0.0).sqrt()
                });
                &scaled * scaled.adjoint()
            }
        };
        v * C64::from(self.budget)
    }
}

#[derive(Debug, Clone)]
pub struct WcrbSolution {
    pub v: VarianceMatrix,
    /// Codebook power per column in watts (codebook space only).
    pub allocation: Option<Vec<f64>>,
    pub status: SolveStatus,
    pub detail: String,
    pub solve_time_s: f64,
    pub crb_bp: f64,
    pub crb_ms: f64,
    /// `ρ·CRB_BP + (1−ρ)·CRB_MS` in m².
    pub objective: f64,
    /// Frobenius distance removed by the final PSD projection, in watts.
    pub projection_distance: f64,
}

/// Whitening of one link's information around the reference covariance.
struct LinkBlock {
    link: Link,
    p: usize,
    /// Congruence applied to the Schur LMI.
    s: RMatrix,
    /// Inverse reference EFIM; weights the epigraph objective.
    e0_inv: RMatrix,
}

impl LinkBlock {
    fn new(reference: &PositionFim) -> Result<Self> {
        let p = reference.num_interest;
        let n = reference.matrix.nrows();
        let e0 = reference.efim()?;
        let e0_inv = stable_inverse(&e0)?;
        let eig = SymmetricEigen::new(e0.clone());
        let dp = &eig.eigenvectors
            * RMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
            * eig.eigenvectors.transpose();
        let mut t = RMatrix::identity(n, n);
        if n > p {
            let z0 = reference.z();
            let k = reference.g() * stable_inverse(&z0)?;
            t.view_mut((0, p), (p, n - p)).copy_from(&(-k));
        }
        let mut d = RMatrix::zeros(n, n);
        d.view_mut((0, 0), (p, p)).copy_from(&dp);
        for i in p..n {
            d[(i, i)] = 1.0 / reference.matrix[(i, i)].sqrt();
        }
        Ok(LinkBlock {
            link: reference.link,
            p,
            s: d * t,
            e0_inv,
        })
    }
}

fn sym_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect()
}

/// Weighted-CRB SDP over the covariance space of `maps`.
fn solve_wcrb(model: &FimModel, maps: &FimMaps, rho: f64, settings: &SolverSettings) -> Result<WcrbSolution> {
    check_rho(rho)?;
    let nv = maps.space.num_vars();
    let x0 = maps.space.reference();
    let mut active = Vec::new();
    if rho > 0.0 {
        active.push((Link::Bistatic, rho));
    }
    if rho < 1.0 {
        active.push((Link::Monostatic, 1.0 - rho));
    }
    let blocks: Vec<(LinkBlock, f64)> = active
        .iter()
        .map(|&(link, w)| Ok((LinkBlock::new(&maps.position_fim(link, &x0))?, w)))
        .collect::<Result<_>>()?;
    let scale: f64 = blocks.iter().map(|(b, w)| w * b.e0_inv.trace()).sum();

    let mut offset = nv;
    let mut layout = Vec::new();
    for (b, _) in &blocks {
        let m = b.p * (b.p + 1) / 2;
        layout.push((offset, offset + m));
        offset += 2 * m;
    }
    let mut prob = ConicProblem::new(offset);

    for ((b, w), &(u_off, t_off)) in blocks.iter().zip(&layout) {
        let pairs = sym_pairs(b.p);
        let idx = |i: usize, j: usize| pairs.iter().position(|&q| q == (i.min(j), i.max(j))).unwrap();
        for (q, &(i, j)) in pairs.iter().enumerate() {
            let mult = if i == j { 1.0 } else { 2.0 };
            prob.objective[t_off + q] = w / scale * mult * b.e0_inv[(i, j)];
        }
        // Schur LMI: S·I_p(V)·Sᵀ − blockdiag(U', 0) ⪰ 0
        let maps_l = maps.maps(b.link);
        let n = b.s.nrows();
        let transformed: Vec<RMatrix> = maps_l.iter().map(|a| &b.s * a * b.s.transpose()).collect();
        let mut schur = Lmi::new(n);
        for i in 0..n {
            for j in i..n {
                for (k, bk) in transformed.iter().enumerate() {
                    let v = bk[(i, j)];
                    if v.abs() > 1e-14 * (bk[(i, i)].abs() * bk[(j, j)].abs()).sqrt() {
                        schur.add(i, j, k, v);
                    }
                }
                if j < b.p {
                    schur.add(i, j, u_off + idx(i, j), -1.0);
                }
            }
        }
        prob.add_lmi(schur);
        // Epigraph: [[T', I], [I, U']] ⪰ 0
        let mut epi = Lmi::new(2 * b.p);
        for (q, &(i, j)) in pairs.iter().enumerate() {
            epi.add(i, j, t_off + q, 1.0);
            epi.add(b.p + i, b.p + j, u_off + q, 1.0);
        }
        for i in 0..b.p {
            epi.add_constant(i, b.p + i, 1.0);
        }
        prob.add_lmi(epi);
    }

    match &maps.space {
        CovarianceSpace::Full { basis, .. } => {
            let n = basis.size();
            let mut emb = Lmi::new(2 * n);
            let mut tr = Affine::constant(1.0);
            for k in 0..nv {
                for (r, c, v) in basis.embedding_upper(k) {
                    emb.add(r, c, k, v);
                }
                tr.add_term(k, -basis.trace(k));
            }
            prob.add_lmi(emb);
            prob.add_nonnegative(tr);
        }
        CovarianceSpace::Codebook(_) => {
            let mut tr = Affine::constant(1.0);
            for k in 0..nv {
                prob.add_nonnegative(Affine::var(k));
                tr.add_term(k, -1.0);
            }
            prob.add_nonnegative(tr);
        }
    }

    let sol = prob.solve(settings)?;
    let mut status = sol.status;
    let mut detail = sol.detail.clone();
    let x = &sol.x[..nv];

    let (v, allocation, projection_distance) = match &maps.space {
        CovarianceSpace::Full { .. } => {
            let raw = crate::hermitian::hermitian_part(&maps.covariance(x));
            let eig = SymmetricEigen::new(raw.clone());
            let clipped = eig.eigenvalues.map(|l| C64::from(l.max(0.0)));
            let proj = &eig.eigenvectors * CMatrix::from_diagonal(&clipped) * eig.eigenvectors.adjoint();
            let dist = (&proj - &raw).norm();
            (crate::hermitian::hermitian_part(&proj), None, dist)
        }
        CovarianceSpace::Codebook(_) => {
            let p: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
            let dist = x.iter().map(|&v| v.min(0.0).powi(2)).sum::<f64>().sqrt() * maps.budget;
            (maps.covariance(&p), Some(p), dist)
        }
    };
    let tr = v.trace().re;
    if !(tr > 0.0) {
        return Err(Error::Solver(format!("solver returned an empty covariance ({detail})")));
    }
    if projection_distance > 1e-6 * tr && status == SolveStatus::Optimal {
        status = SolveStatus::Inaccurate;
        detail = format!("{detail}; PSD projection moved {projection_distance:.3e}");
    }
    // The bounds strictly decrease with power, so restore the active budget.
    let gamma = maps.budget / tr;
    let v = VarianceMatrix::new_unchecked(v * C64::from(gamma));
    let allocation = allocation.map(|p| {
        let s: f64 = p.iter().sum();
        p.iter().map(|pi| pi / s * maps.budget).collect()
    });
    let (crb_bp, crb_ms) = match model.crbs(&v) {
        Ok(c) => c,
        Err(e) => {
            status = SolveStatus::Failed;
            detail = format!("{detail}; {e}");
            (f64::NAN, f64::NAN)
        }
    };
    Ok(WcrbSolution {
        v,
        allocation,
        status,
        detail,
        solve_time_s: sol.solve_time_s,
        crb_bp,
        crb_ms,
        objective: rho * crb_bp + (1.0 - rho) * crb_ms,
        projection_distance,
    })
}

/// Fully digital design: minimise `ρ·CRB_BP + (1−ρ)·CRB_MS` over all PSD `V`
/// with `tr(V) ≤ P/M`.
pub fn solve_wcrb_fdb(model: &FimModel, maps: &FimMaps, rho: f64, settings: &SolverSettings) -> Result<WcrbSolution> {
    if !matches!(maps.space, CovarianceSpace::Full { .. }) {
        return Err(Error::Precondition("FDB design needs full covariance maps".into()));
    }
    solve_wcrb(model, maps, rho, settings)
}

/// Codebook power allocation: the same problem restricted to
/// `V = U diag(p) Uᴴ`, `p ≥ 0`.
pub fn solve_wcrb_cpa(model: &FimModel, maps: &FimMaps, rho: f64, settings: &SolverSettings) -> Result<WcrbSolution> {
    if !matches!(maps.space, CovarianceSpace::Codebook(_)) {
        return Err(Error::Precondition("CPA design needs codebook maps".into()));
    }
    solve_wcrb(model, maps, rho, settings)
}
