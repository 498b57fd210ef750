//! Small conic-program builder with a Clarabel backend.
//!
//! Problems have the form
//! `min ½ xᵀ diag(d) x + cᵀx` subject to affine equalities, affine
//! inequalities `a·x ≤ b`, and linear matrix inequalities `M₀ + Σ x_k M_k ⪰ 0`.

use std::collections::BTreeMap;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use crate::{Error, RMatrix, Result};

/// Relative duality gap accepted when the solver stops short of its own tolerances.
pub const ACCEPTED_GAP: f64 = 1e-7;

/// Environment variable overriding the solver tolerance.
pub const TOL_ENV: &str = "BPMS_SOLVER_TOL";

/// Environment variable overriding the solver iteration cap.
pub const MAX_ITER_ENV: &str = "BPMS_SOLVER_MAX_ITER";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iter: u32,
    pub verbose: bool,
    /// Let the solver split sparse PSD blocks into cliques.
    pub chordal: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-8,
            max_iter: 400,
            verbose: false,
            chordal: false,
        }
    }
}

impl SolverSettings {
    /// Defaults overridden by `BPMS_SOLVER_TOL` and `BPMS_SOLVER_MAX_ITER` when set.
    pub fn from_env() -> Result<Self> {
        let mut s = SolverSettings::default();
        if let Ok(raw) = std::env::var(TOL_ENV) {
            let tol: f64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{TOL_ENV}={raw:?} is not a number")))?;
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::Config(format!("{TOL_ENV} must lie in (0, 1), got {tol}")));
            }
            s.tolerance = tol;
        }
        if let Ok(raw) = std::env::var(MAX_ITER_ENV) {
            s.max_iter = raw
                .trim()
                .parse()
                .ok()
                .filter(|&n: &u32| n > 0)
                .ok_or_else(|| Error::Config(format!("{MAX_ITER_ENV}={raw:?} is not a positive integer")))?;
        }
        Ok(s)
    }
}

/// Sparse affine expression `Σ coef·x_var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(k: usize) -> Self {
        Affine {
            terms: vec![(k, 1.0)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(k, c)| c * x[k]).sum::<f64>()
    }
}

/// Symmetric affine matrix `M(x)` constrained to be PSD. Only the upper
/// triangle is stored.
#[derive(Debug, Clone)]
pub struct Lmi {
    dim: usize,
    entries: BTreeMap<(usize, usize), Affine>,
}

impl Lmi {
    pub fn new(dim: usize) -> Self {
        Lmi {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn key(i: usize, j: usize) -> (usize, usize) {
        if i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    /// Add `coef·x_var` at `(i, j)` and, implicitly, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, var: usize, coef: f64) {
        assert!(i < self.dim && j < self.dim);
        if coef != 0.0 {
            self.entries.entry(Self::key(i, j)).or_default().add_term(var, coef);
        }
    }

    pub fn add_constant(&mut self, i: usize, j: usize, c: f64) {
        assert!(i < self.dim && j < self.dim);
        self.entries.entry(Self::key(i, j)).or_default().constant += c;
    }

    pub fn eval(&self, x: &[f64]) -> RMatrix {
        let mut m = RMatrix::zeros(self.dim, self.dim);
        for (&(i, j), e) in &self.entries {
            let v = e.eval(x);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub quadratic_diag: Option<Vec<f64>>,
    pub equalities: Vec<Affine>,
    pub inequalities: Vec<Affine>,
    pub lmis: Vec<Lmi>,
}

impl ConicProblem {
    pub fn new(num_vars: usize) -> Self {
        ConicProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            quadratic_diag: None,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lmis: Vec::new(),
        }
    }

    /// `expr == 0`.
    pub fn add_equality(&mut self, expr: Affine) {
        self.equalities.push(expr);
    }

    /// `expr ≥ 0`.
    pub fn add_nonnegative(&mut self, expr: Affine) {
        self.inequalities.push(expr);
    }

    pub fn add_lmi(&mut self, lmi: Lmi) {
        self.lmis.push(lmi);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.objective.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad = self
            .quadratic_diag
            .as_ref()
            .map(|d| 0.5 * d.iter().zip(x).map(|(d, v)| d * v * v).sum::<f64>())
            .unwrap_or(0.0);
        lin + quad
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<ConicSolution> {
        solve_clarabel(self, settings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Converged to the reduced tolerances only.
    Inaccurate,
    Failed,
}

impl SolveStatus {
    pub fn is_usable(self) -> bool {
        !matches!(self, SolveStatus::Failed)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub detail: String,
    pub x: Vec<f64>,
    pub objective: f64,
    /// `|p − d| / max(1, min(|p|, |d|))` from the solver's primal and dual objectives.
    pub gap: f64,
    pub iterations: u32,
    pub solve_time_s: f64,
}

/// Index of `(i, j)`, `i ≤ j`, in the solver's packed triangle.
pub(crate) fn triangle_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

fn solve_clarabel(prob: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    let n = prob.num_vars;
    let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut row = 0usize;

    // s = b − A x with s in the cone; for an affine expr e(x) = c + a·x we
    // need s = e(x), so A = −a and b = c.
    let mut push_affine = |e: &Affine, row: usize, scale: f64, b: &mut Vec<f64>| {
        for &(k, c) in &e.terms {
            if k >= n {
                return Err(Error::DimensionMismatch(format!(
                    "variable {k} out of range ({n} variables)"
                )));
            }
            rows.push(row);
            cols.push(k);
            vals.push(-c * scale);
        }
        b.push(e.constant * scale);
        Ok(())
    };

    for e in &prob.equalities {
        push_affine(e, row, 1.0, &mut b)?;
        row += 1;
    }
    if !prob.equalities.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(prob.equalities.len()));
    }
    for e in &prob.inequalities {
        push_affine(e, row, 1.0, &mut b)?;
        row += 1;
    }
    if !prob.inequalities.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(prob.inequalities.len()));
    }
    for lmi in &prob.lmis {
        let d = lmi.dim;
        let len = d * (d + 1) / 2;
        let base = row;
        let mut block_b = vec![0.0; len];
        for (&(i, j), e) in &lmi.entries {
            let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
            let idx = triangle_index(i, j);
            let mut tmp = Vec::with_capacity(1);
            push_affine(e, base + idx, scale, &mut tmp)?;
            block_b[idx] = tmp[0];
        }
        b.extend(block_b);
        row += len;
        cones.push(SupportedConeT::PSDTriangleConeT(d));
    }

    let a = CscMatrix::new_from_triplets(row, n, rows, cols, vals);
    let pmat = match &prob.quadratic_diag {
        Some(d) => {
            let idx: Vec<usize> = (0..n).filter(|&k| d[k] != 0.0).collect();
            CscMatrix::new_from_triplets(n, n, idx.clone(), idx.clone(), idx.iter().map(|&k| d[k]).collect())
        }
        None => CscMatrix::zeros((n, n)),
    };
    let tol = settings.tolerance;
    let s = DefaultSettingsBuilder::default()
        .verbose(settings.verbose)
        .max_iter(settings.max_iter)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .tol_ktratio(tol.sqrt().min(1e-6))
        .max_threads(1)
        .chordal_decomposition_enable(settings.chordal)
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;

    let start = Instant::now();
    let mut solver = DefaultSolver::new(&pmat, &prob.objective, &a, &b, &cones, s)
        .map_err(|e| Error::Solver(format!("setup: {e:?}")))?;
    solver.solve();
    let elapsed = start.elapsed().as_secs_f64();
    let sol = &solver.solution;
    let (p, d) = (sol.obj_val, sol.obj_val_dual);
    let gap = (p - d).abs() / p.abs().min(d.abs()).max(1.0);
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved
            if gap <= ACCEPTED_GAP && sol.r_prim <= ACCEPTED_GAP && sol.r_dual <= 1e-6 =>
        {
            SolveStatus::Optimal
        }
        SolverStatus::AlmostSolved => SolveStatus::Inaccurate,
        _ => SolveStatus::Failed,
    };
    let x = sol.x.clone();
    Ok(ConicSolution {
        status,
        detail: format!("{:?}", sol.status),
        objective: prob.objective_value(&x),
        gap,
        x,
        iterations: sol.iterations,
        solve_time_s: elapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn packed_triangle_order() {
        // min x s.t. [[x, 1, 0], [1, 4, 0], [0, 0, 1]] ⪰ 0 has x* = 1/4; any
        // other packing places the 4 or the 1 elsewhere and changes x*.
        let mut p = ConicProblem::new(1);
        p.objective[0] = 1.0;
        let mut l = Lmi::new(3);
        l.add(0, 0, 0, 1.0);
        l.add_constant(0, 1, 1.0);
        l.add_constant(1, 1, 4.0);
        l.add_constant(2, 2, 1.0);
        l.add_constant(1, 2, 0.0);
        p.add_lmi(l);
        let s = p.solve(&SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_relative_eq!(s.x[0], 0.25, epsilon = 1e-7);

        let mut p = ConicProblem::new(1);
        p.objective[0] = 1.0;
        let mut l = Lmi::new(3);
        l.add(2, 2, 0, 1.0);
        l.add_constant(1, 2, 2.0);
        l.add_constant(0, 0, 9.0);
        l.add_constant(1, 1, 8.0);
        p.add_lmi(l);
        let s = p.solve(&SolverSettings::default()).unwrap();
        assert_relative_eq!(s.x[0], 0.5, epsilon = 1e-7);
    }

    #[test]
    fn equality_inequality_and_quadratic() {
        // min ½(x² + y²) − x s.t. x + y = 1, y ≥ 0.4
        let mut p = ConicProblem::new(2);
        p.objective = vec![-1.0, 0.0];
        p.quadratic_diag = Some(vec![1.0, 1.0]);
        p.add_equality(Affine {
            terms: vec![(0, 1.0), (1, 1.0)],
            constant: -1.0,
        });
        p.add_nonnegative(Affine {
            terms: vec![(1, 1.0)],
            constant: -0.4,
        });
        let s = p.solve(&SolverSettings::default()).unwrap();
        assert!(s.status.is_usable());
        assert_relative_eq!(s.x[0], 0.6, epsilon = 1e-6);
        assert_relative_eq!(s.x[1], 0.4, epsilon = 1e-6);
    }

    #[test]
    fn trace_of_inverse_epigraph() {
        // min tr(T) s.t. [[T, I], [I, A]] ⪰ 0 gives tr(A⁻¹) for A = diag(2, 5).
        let mut p = ConicProblem::new(3);
        p.objective = vec![1.0, 0.0, 1.0];
        let mut l = Lmi::new(4);
        l.add(0, 0, 0, 1.0);
        l.add(0, 1, 1, 1.0);
        l.add(1, 1, 2, 1.0);
        l.add_constant(0, 2, 1.0);
        l.add_constant(1, 3, 1.0);
        l.add_constant(2, 2, 2.0);
        l.add_constant(3, 3, 5.0);
        p.add_lmi(l);
        let s = p.solve(&SolverSettings::default()).unwrap();
        assert_relative_eq!(s.objective, 0.5 + 0.2, epsilon = 1e-7);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        let mut p = ConicProblem::new(1);
        p.add_nonnegative(Affine {
            terms: vec![(0, 1.0)],
            constant: -2.0,
        });
        p.add_nonnegative(Affine {
            terms: vec![(0, -1.0)],
            constant: 1.0,
        });
        let s = p.solve(&SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Failed);
    }
}
