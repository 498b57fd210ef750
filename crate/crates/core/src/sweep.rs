//! Scheme × ρ sweeps, beampattern sampling and the run manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{SolveStatus, SolverSettings};
use crate::config::ExperimentConfig;
use crate::fim::{FimModel, VarianceMatrix};
use crate::optimize::{
    apa, build_cpa_codebook, recover_beamformers, solve_wbf, solve_wcrb_cpa, solve_wcrb_fdb,
    solve_wvm, BeamformerSet, FimMaps, TradeoffPoint, WcrbSolution,
};
use crate::par::Exec;
use crate::{Error, Result};

pub const SWEEP_CSV: &str = "tradeoff.csv";
pub const BEAMPATTERN_CSV: &str = "beampattern.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const SWEEP_HEADER: [&str; 6] = [
    "scheme",
    "rho",
    "crb_bp_sqrt_m",
    "crb_ms_sqrt_m",
    "solve_time_s",
    "status",
];
pub const BEAMPATTERN_HEADER: [&str; 2] = ["angle_deg", "power_db"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "FDB-WCRB")]
    FdbWcrb,
    #[serde(rename = "FDB-WBF")]
    FdbWbf,
    #[serde(rename = "FDB-WVM")]
    FdbWvm,
    #[serde(rename = "CPA-WCRB")]
    CpaWcrb,
    #[serde(rename = "CPA-WBF")]
    CpaWbf,
    #[serde(rename = "CPA-WVM")]
    CpaWvm,
    #[serde(rename = "APA")]
    Apa,
    /// Equal power in every direction; a reference for beampatterns.
    #[serde(rename = "ISOTROPIC")]
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Fdb,
    Cpa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Design {
    Wcrb,
    Wbf,
    Wvm,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::FdbWcrb,
        Scheme::FdbWbf,
        Scheme::FdbWvm,
        Scheme::CpaWcrb,
        Scheme::CpaWbf,
        Scheme::CpaWvm,
        Scheme::Apa,
        Scheme::Isotropic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::FdbWcrb => "FDB-WCRB",
            Scheme::FdbWbf => "FDB-WBF",
            Scheme::FdbWvm => "FDB-WVM",
            Scheme::CpaWcrb => "CPA-WCRB",
            Scheme::CpaWbf => "CPA-WBF",
            Scheme::CpaWvm => "CPA-WVM",
            Scheme::Apa => "APA",
            Scheme::Isotropic => "ISOTROPIC",
        }
    }

    /// Whether the scheme's output depends on ρ.
    pub fn uses_rho(self) -> bool {
        !matches!(self, Scheme::Apa | Scheme::Isotropic)
    }

    fn parts(self) -> Option<(Family, Design)> {
        match self {
            Scheme::FdbWcrb => Some((Family::Fdb, Design::Wcrb)),
            Scheme::FdbWbf => Some((Family::Fdb, Design::Wbf)),
            Scheme::FdbWvm => Some((Family::Fdb, Design::Wvm)),
            Scheme::CpaWcrb => Some((Family::Cpa, Design::Wcrb)),
            Scheme::CpaWbf => Some((Family::Cpa, Design::Wbf)),
            Scheme::CpaWvm => Some((Family::Cpa, Design::Wvm)),
            Scheme::Apa | Scheme::Isotropic => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(key))
            .ok_or_else(|| {
                let names: Vec<_> = Scheme::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown scheme {key:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Parse a comma-separated scheme list, keeping first occurrences only.
pub fn parse_schemes(list: &str) -> Result<Vec<Scheme>> {
    let mut out = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let s: Scheme = part.parse()?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no schemes given".into()));
    }
    Ok(out)
}

/// `n` weights in `[0, 1]` packed towards both endpoints:
/// `ρ = ½(2t)³` for `t ≤ ½`, mirrored above, with `t = i/(n−1)`.
pub fn rho_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    return 0.0;
                }
                if i == n - 1 {
                    return 1.0;
                }
                let t = i as f64 / (n - 1) as f64;
                if t <= 0.5 {
                    0.5 * (2.0 * t).powi(3)
                } else {
                    1.0 - 0.5 * (2.0 * (1.0 - t)).powi(3)
                }
            })
            .collect(),
    }
}

/// Either a point count (`"21"`) or an explicit comma-separated list.
pub fn parse_rho_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if !spec.contains(',') && !spec.contains('.') {
        if let Ok(n) = spec.parse::<usize>() {
            if n == 0 {
                return Err(Error::Config("rho grid needs at least one point".into()));
            }
            return Ok(rho_grid(n));
        }
    }
    let mut out = Vec::new();
    for p in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let r: f64 = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rho value {p:?}")))?;
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("rho {r} outside [0, 1]")));
        }
        out.push(r);
    }
    if out.is_empty() {
        return Err(Error::Config("rho grid is empty".into()));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub schemes: Vec<Scheme>,
    pub rhos: Vec<f64>,
    pub seed: u64,
    pub phase_averages: usize,
    pub settings: SolverSettings,
    pub exec: Exec,
}

impl SweepRequest {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.phase_averages.max(1) as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

/// Outcome of one scheme at one ρ for one phase realisation.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub crb_bp: f64,
    pub crb_ms: f64,
    pub solve_time_s: f64,
    pub status: SolveStatus,
    pub detail: String,
    pub covariance: Option<VarianceMatrix>,
}

impl PointResult {
    fn failed(detail: String) -> Self {
        PointResult {
            crb_bp: f64::NAN,
            crb_ms: f64::NAN,
            solve_time_s: 0.0,
            status: SolveStatus::Failed,
            detail,
            covariance: None,
        }
    }

    fn evaluate(model: &FimModel, v: VarianceMatrix, time: f64, status: SolveStatus, detail: String) -> Self {
        match model.crbs(&v) {
            Ok((b, m)) => PointResult {
                crb_bp: b,
                crb_ms: m,
                solve_time_s: time,
                status,
                detail,
                covariance: Some(v),
            },
            Err(e) => PointResult {
                solve_time_s: time,
                covariance: Some(v),
                ..PointResult::failed(format!("{detail}; {e}"))
            },
        }
    }

    fn from_wcrb(sol: &WcrbSolution) -> Self {
        PointResult {
            crb_bp: sol.crb_bp,
            crb_ms: sol.crb_ms,
            solve_time_s: sol.solve_time_s,
            status: sol.status,
            detail: sol.detail.clone(),
            covariance: Some(sol.v.clone()),
        }
    }
}

/// Per-seed state shared by every scheme.
pub struct Realisation {
    pub seed: u64,
    pub model: FimModel,
    pub fdb: Option<FimMaps>,
    pub cpa: Option<FimMaps>,
    pub design: crate::config::DesignSection,
}

impl Realisation {
    pub fn new(cfg: &ExperimentConfig, seed: u64, fdb: bool, cpa: bool, exec: Exec) -> Result<Self> {
        let (system, geometry) = cfg.scenario(seed)?;
        let model = FimModel::new(&system, &geometry)?;
        let fdb = fdb.then(|| FimMaps::full(&model, exec));
        let cpa = if cpa {
            Some(FimMaps::codebook(&model, build_cpa_codebook(&geometry, &system)?, exec))
        } else {
            None
        };
        Ok(Realisation {
            seed,
            model,
            fdb,
            cpa,
            design: cfg.design.clone(),
        })
    }

    fn maps(&self, family: Family) -> &FimMaps {
        match family {
            Family::Fdb => self.fdb.as_ref().expect("FDB maps requested"),
            Family::Cpa => self.cpa.as_ref().expect("CPA maps requested"),
        }
    }

    fn wcrb(&self, family: Family, rho: f64, settings: &SolverSettings) -> PointResult {
        let maps = self.maps(family);
        let res = match family {
            Family::Fdb => solve_wcrb_fdb(&self.model, maps, rho, settings),
            Family::Cpa => solve_wcrb_cpa(&self.model, maps, rho, settings),
        };
        match res {
            Ok(sol) => PointResult::from_wcrb(&sol),
            Err(e) => PointResult::failed(e.to_string()),
        }
    }

    fn rng(&self, tag: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(tag);
        rng
    }

    /// Slot beamformers for an endpoint covariance, scored by that endpoint's CRB.
    fn endpoint_beamformers(&self, v: &VarianceMatrix, rho: f64, tag: u64) -> BeamformerSet {
        let model = &self.model;
        let objective = move |c: &VarianceMatrix| weighted(model, c, rho);
        let mut rng = self.rng(tag);
        recover_beamformers(
            v,
            model.system.num_slots,
            &objective,
            self.design.randomization_trials,
            &mut rng,
        )
        .0
    }

    fn mismatch(
        &self,
        design: Design,
        rho: f64,
        bp_end: &PointResult,
        ms_end: &PointResult,
        settings: &SolverSettings,
    ) -> PointResult {
        let (Some(v_bp), Some(v_ms)) = (&bp_end.covariance, &ms_end.covariance) else {
            return PointResult::failed("endpoint design failed".into());
        };
        let end_status = worst(bp_end.status, ms_end.status);
        let start = Instant::now();
        let budget = self.model.system.power_budget();
        match design {
            Design::Wbf => {
                let w_bp = self.endpoint_beamformers(v_bp, 1.0, 1);
                let w_ms = self.endpoint_beamformers(v_ms, 0.0, 2);
                match solve_wbf(&w_bp, &w_ms, rho, budget) {
                    Ok(w) => PointResult::evaluate(
                        &self.model,
                        w.covariance(),
                        start.elapsed().as_secs_f64(),
                        end_status,
                        String::new(),
                    ),
                    Err(e) => PointResult::failed(e.to_string()),
                }
            }
            Design::Wvm => match solve_wvm(v_bp, v_ms, rho, settings) {
                Ok((v, status, time)) => {
                    let model = &self.model;
                    let objective = move |c: &VarianceMatrix| weighted(model, c, rho);
                    let mut rng = self.rng(3);
                    let (w, _) = recover_beamformers(
                        &v,
                        model.system.num_slots,
                        &objective,
                        self.design.randomization_trials,
                        &mut rng,
                    );
                    PointResult::evaluate(&self.model, w.covariance(), time, worst(status, end_status), String::new())
                }
                Err(e) => PointResult::failed(e.to_string()),
            },
            Design::Wcrb => unreachable!("handled by wcrb"),
        }
    }

    fn fixed(&self, scheme: Scheme) -> PointResult {
        let start = Instant::now();
        let budget = self.model.system.power_budget();
        let v = match scheme {
            Scheme::Apa => {
                match build_cpa_codebook(&self.model.geometry, &self.model.system) {
                    Ok(cb) => apa(&cb, budget, self.design.apa_weighting),
                    Err(e) => return PointResult::failed(e.to_string()),
                }
            }
            _ => VarianceMatrix::isotropic(self.model.num_tx(), budget),
        };
        PointResult::evaluate(&self.model, v, start.elapsed().as_secs_f64(), SolveStatus::Optimal, String::new())
    }
}

fn weighted(model: &FimModel, v: &VarianceMatrix, rho: f64) -> f64 {
    let bp = if rho > 0.0 { model.bp.crb(v).unwrap_or(f64::INFINITY) } else { 0.0 };
    let ms = if rho < 1.0 { model.ms.crb(v).unwrap_or(f64::INFINITY) } else { 0.0 };
    rho * bp + (1.0 - rho) * ms
}

fn worst(a: SolveStatus, b: SolveStatus) -> SolveStatus {
    use SolveStatus::*;
    match (a, b) {
        (Failed, _) | (_, Failed) => Failed,
        (Inaccurate, _) | (_, Inaccurate) => Inaccurate,
        _ => Optimal,
    }
}

/// All per-seed results of one (scheme, ρ) cell, plus their aggregate.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub scheme: Scheme,
    pub rho: Option<f64>,
    pub per_seed: Vec<PointResult>,
}

impl SweepCell {
    /// Square roots of the seed-averaged CRBs.
    pub fn point(&self) -> TradeoffPoint {
        let ok: Vec<&PointResult> = self
            .per_seed
            .iter()
            .filter(|p| p.status.is_usable() && p.crb_bp.is_finite() && p.crb_ms.is_finite())
            .collect();
        let status = self.per_seed.iter().fold(SolveStatus::Optimal, |s, p| worst(s, p.status));
        let mean = |f: fn(&PointResult) -> f64| {
            if ok.is_empty() || status == SolveStatus::Failed {
                f64::NAN
            } else {
                ok.iter().map(|p| f(p)).sum::<f64>() / ok.len() as f64
            }
        };
        TradeoffPoint {
            scheme: self.scheme.name().to_string(),
            rho: self.rho,
            crb_bp_sqrt_m: mean(|p| p.crb_bp).sqrt(),
            crb_ms_sqrt_m: mean(|p| p.crb_ms).sqrt(),
            solve_time_s: self.per_seed.iter().map(|p| p.solve_time_s).sum(),
            status,
        }
    }

    pub fn details(&self) -> Vec<String> {
        self.per_seed.iter().map(|p| p.detail.clone()).collect()
    }
}

/// Run every requested scheme at every ρ for every seed.
pub fn run_sweep(cfg: &ExperimentConfig, req: &SweepRequest) -> Result<Vec<SweepCell>> {
    if req.schemes.is_empty() {
        return Err(Error::Config("no schemes given".into()));
    }
    if req.rhos.is_empty() || req.rhos.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Config("rho grid must be non-empty and inside [0, 1]".into()));
    }
    let need = |f: Family| req.schemes.iter().any(|s| s.parts().is_some_and(|(g, _)| g == f));
    let (need_fdb, need_cpa) = (need(Family::Fdb), need(Family::Cpa));
    let seeds = req.seeds();
    let exec = req.exec;
    let reals: Vec<Realisation> = exec
        .map(&seeds, |&s| Realisation::new(cfg, s, need_fdb, need_cpa, Exec::Sequential))
        .into_iter()
        .collect::<Result<_>>()?;

    // Weighted-CRB solves: requested grid points plus endpoints for mismatch schemes.
    let mut wcrb_tasks: Vec<(usize, Family, f64)> = Vec::new();
    for family in [Family::Fdb, Family::Cpa] {
        let schemes: Vec<Design> = req
            .schemes
            .iter()
            .filter_map(|s| s.parts())
            .filter(|(f, _)| *f == family)
            .map(|(_, d)| d)
            .collect();
        if schemes.is_empty() {
            continue;
        }
        let mut rhos = Vec::new();
        if schemes.contains(&Design::Wcrb) {
            rhos.extend(req.rhos.iter().copied());
        }
        if schemes.iter().any(|d| *d != Design::Wcrb) {
            rhos.extend([0.0, 1.0]);
        }
        rhos.sort_by(f64::total_cmp);
        rhos.dedup();
        for i in 0..reals.len() {
            for &r in &rhos {
                wcrb_tasks.push((i, family, r));
            }
        }
    }
    let settings = &req.settings;
    let wcrb_results = exec.map(&wcrb_tasks, |&(i, f, r)| reals[i].wcrb(f, r, settings));
    let lookup = |i: usize, f: Family, r: f64| -> &PointResult {
        let idx = wcrb_tasks
            .iter()
            .position(|&(j, g, q)| j == i && g == f && q == r)
            .expect("endpoint solved");
        &wcrb_results[idx]
    };

    let mut cells = Vec::new();
    for &scheme in &req.schemes {
        let rhos: Vec<Option<f64>> = if scheme.uses_rho() {
            req.rhos.iter().map(|&r| Some(r)).collect()
        } else {
            vec![None]
        };
        for rho in rhos {
            let tasks: Vec<usize> = (0..reals.len()).collect();
            let per_seed = exec.map(&tasks, |&i| match (scheme.parts(), rho) {
                (Some((f, Design::Wcrb)), Some(r)) => lookup(i, f, r).clone(),
                (Some((f, d)), Some(r)) => {
                    reals[i].mismatch(d, r, lookup(i, f, 1.0), lookup(i, f, 0.0), settings)
                }
                _ => reals[i].fixed(scheme),
            });
            cells.push(SweepCell {
                scheme,
                rho,
                per_seed,
            });
        }
    }
    Ok(cells)
}

/// Full-precision scientific notation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

pub fn status_label(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "ok",
        SolveStatus::Inaccurate => "inaccurate",
        SolveStatus::Failed => "failed",
    }
}

pub fn write_sweep_csv(path: &Path, points: &[TradeoffPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        w.write_record([
            p.scheme.clone(),
            p.rho.map(fmt_num).unwrap_or_default(),
            fmt_num(p.crb_bp_sqrt_m),
            fmt_num(p.crb_ms_sqrt_m),
            fmt_num(p.solve_time_s),
            status_label(p.status).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Angles from −90° to 90° inclusive in steps of `step_deg`.
pub fn angle_grid_deg(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg <= 5.0) {
        return Err(Error::Config(format!("step must lie in (0, 5] degrees, got {step_deg}")));
    }
    let steps = (180.0 / step_deg).round();
    if (steps * step_deg - 180.0).abs() > 1e-9 {
        return Err(Error::Config(format!("step must divide 180 degrees, got {step_deg}")));
    }
    let n = steps as usize + 1;
    Ok((0..n).map(|i| -90.0 + i as f64 * step_deg).collect())
}

/// `10·log₁₀(p / max p)`, floored at −300 dB.
pub fn normalise_db(power: &[f64]) -> Vec<f64> {
    let peak = power.iter().copied().fold(0.0, f64::max);
    power
        .iter()
        .map(|&p| {
            if peak > 0.0 {
                10.0 * (p.max(peak * 1e-30) / peak).log10()
            } else {
                0.0
            }
        })
        .collect()
}

pub fn write_beampattern_csv(path: &Path, angles_deg: &[f64], power_db: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BEAMPATTERN_HEADER)?;
    for (a, p) in angles_deg.iter().zip(power_db) {
        w.write_record([fmt_num(*a), fmt_num(*p)])?;
    }
    w.flush()?;
    Ok(())
}

/// Covariance of one scheme at one ρ for one realisation.
pub fn design_covariance(real: &Realisation, scheme: Scheme, rho: f64, settings: &SolverSettings) -> PointResult {
    match scheme.parts() {
        Some((f, Design::Wcrb)) => real.wcrb(f, rho, settings),
        Some((f, d)) => {
            let bp = real.wcrb(f, 1.0, settings);
            let ms = real.wcrb(f, 0.0, settings);
            real.mismatch(d, rho, &bp, &ms, settings)
        }
        None => real.fixed(scheme),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub scheme: String,
    pub rho: Option<f64>,
    /// Zero-based data row in the CSV.
    pub row: usize,
    pub status: SolveStatus,
    pub solve_time_s: f64,
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub schemes: Vec<String>,
    pub rho_grid: Vec<f64>,
    pub solver: SolverSettings,
    pub points: Vec<ManifestPoint>,
    pub outputs: Vec<PathBuf>,
    /// AoDs in degrees in the BS frame, UE first, for the first seed.
    pub aods_deg: Vec<f64>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn aods_deg(model: &FimModel) -> Vec<f64> {
    model.aods().iter().map(|a| a.to_degrees()).collect()
}

/// Run a sweep and write the CSV and manifest into `out_dir`.
///
/// Returns the manifest; rows whose status is `failed` are kept in the output.
pub fn sweep_to_dir(cfg: &ExperimentConfig, req: &SweepRequest, out_dir: &Path) -> Result<RunManifest> {
    let cells = run_sweep(cfg, req)?;
    std::fs::create_dir_all(out_dir)?;
    let points: Vec<TradeoffPoint> = cells.iter().map(SweepCell::point).collect();
    let csv_path = out_dir.join(SWEEP_CSV);
    write_sweep_csv(&csv_path, &points)?;
    let first = cfg.scenario(req.seed)?;
    let model = FimModel::new(&first.0, &first.1)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "sweep".into(),
        config: cfg.clone(),
        seed: req.seed,
        seeds: req.seeds(),
        schemes: req.schemes.iter().map(|s| s.name().to_string()).collect(),
        rho_grid: req.rhos.clone(),
        solver: req.settings,
        points: cells
            .iter()
            .zip(&points)
            .enumerate()
            .map(|(row, (c, p))| ManifestPoint {
                scheme: p.scheme.clone(),
                rho: p.rho,
                row,
                status: p.status,
                solve_time_s: p.solve_time_s,
                details: c.details(),
            })
            .collect(),
        outputs: vec![csv_path],
        aods_deg: aods_deg(&model),
    };
    manifest.write(&out_dir.join(MANIFEST_JSON))?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct BeampatternRequest {
    pub scheme: Scheme,
    pub rho: f64,
    pub step_deg: f64,
    pub seed: u64,
    pub settings: SolverSettings,
}

/// Sample one scheme's beampattern and write the CSV and manifest into `out_dir`.
pub fn beampattern_to_dir(cfg: &ExperimentConfig, req: &BeampatternRequest, out_dir: &Path) -> Result<RunManifest> {
    let angles = angle_grid_deg(req.step_deg)?;
    if !(0.0..=1.0).contains(&req.rho) {
        return Err(Error::Config(format!("rho {} outside [0, 1]", req.rho)));
    }
    let family = req.scheme.parts().map(|(f, _)| f);
    let real = Realisation::new(
        cfg,
        req.seed,
        family == Some(Family::Fdb),
        family == Some(Family::Cpa),
        Exec::default(),
    )?;
    let point = design_covariance(&real, req.scheme, req.rho, &req.settings);
    let Some(v) = &point.covariance else {
        return Err(Error::Solver(format!("{} design failed: {}", req.scheme, point.detail)));
    };
    let radians: Vec<f64> = angles.iter().map(|a| a.to_radians()).collect();
    let power = crate::optimize::beampattern(v, &real.model.system.tx_array, &radians);
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(BEAMPATTERN_CSV);
    write_beampattern_csv(&csv_path, &angles, &normalise_db(&power))?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "beampattern".into(),
        config: cfg.clone(),
        seed: req.seed,
        seeds: vec![req.seed],
        schemes: vec![req.scheme.name().to_string()],
        rho_grid: vec![req.rho],
        solver: req.settings,
        points: vec![ManifestPoint {
            scheme: req.scheme.name().to_string(),
            rho: req.scheme.uses_rho().then_some(req.rho),
            row: 0,
            status: point.status,
            solve_time_s: point.solve_time_s,
            details: vec![point.detail.clone()],
        }],
        outputs: vec![csv_path],
        aods_deg: aods_deg(&real.model),
    };
    manifest.write(&out_dir.join(MANIFEST_JSON))?;
    Ok(manifest)
}
