//! Subcommand implementations. Each returns the files it wrote and whether
//! any part failed.

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use quasirigid::bounds::{dimension_window, invert_bound, nu_of_eps, FsigmaCurve, Inversion};
use quasirigid::kleinian::{CircleSpec, GroupIsomorphism, SchottkyGroup};
use quasirigid::limitset::{exponent_of_convergence, limit_set_dimension, DimensionEstimate, ExponentEstimate};
use quasirigid::moebius::MapClass;
use quasirigid::qc::{DiffeoField, DistortionReport, SampleGrid};
use quasirigid::scattering::{
    assemble_operator, kernel_value, operator_norm, probe_pairing, relative_norm, srel_sweep, KernelValue, NodeGrid,
    NormEstimate, RelativeConfig, RelativeReport, SpectralParam,
};
use quasirigid::Complex64;

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, OutDir};

/// Errors that make the run invalid (exit 2) as opposed to computational
/// failures (exit 1).
#[derive(Debug)]
pub struct ConfigError(pub anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(e.into()))
}

pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub partial_failure: bool,
}

impl Outcome {
    fn ok(files: Vec<PathBuf>) -> Self {
        Self { files, partial_failure: false }
    }
}

fn build_group(cfg: &ExperimentConfig) -> Result<SchottkyGroup> {
    let spec = cfg.group_spec().map_err(invalid)?;
    spec.build().map_err(invalid)
}

fn diffeo(cfg: &ExperimentConfig) -> Result<DiffeoField> {
    let psi = cfg.diffeo.clone().ok_or_else(|| invalid(anyhow!("config has no diffeo")))?;
    psi.validate().map_err(invalid)?;
    Ok(psi)
}

fn convergent_s(cfg: &ExperimentConfig) -> Result<SpectralParam> {
    let s = SpectralParam::new(Complex64::new(cfg.s[0], cfg.s[1]));
    s.require_convergent().map_err(invalid)?;
    Ok(s)
}

fn relative_config(cfg: &ExperimentConfig, s: SpectralParam) -> RelativeConfig {
    RelativeConfig { s, grid_n: cfg.grid_n, truncation: cfg.truncation(), rect: None }
}

#[derive(Serialize)]
struct GeneratorSummary {
    index: usize,
    /// `[a, b, c, d]` as eight reals, row-major.
    matrix: [f64; 8],
    class: MapClass,
    trace: [f64; 2],
}

#[derive(Serialize)]
struct GroupSummary {
    rank: usize,
    circles: Vec<CircleSpec>,
    generators: Vec<GeneratorSummary>,
    all_loxodromic: bool,
    rect: Option<[f64; 4]>,
}

fn summarize(group: &SchottkyGroup) -> GroupSummary {
    let generators: Vec<GeneratorSummary> = group
        .generators()
        .iter()
        .enumerate()
        .map(|(index, g)| GeneratorSummary {
            index,
            matrix: g.to_reals(),
            class: g.classify(),
            trace: [g.trace().re, g.trace().im],
        })
        .collect();
    GroupSummary {
        rank: group.rank(),
        circles: group.circles().into_iter().map(CircleSpec::from).collect(),
        all_loxodromic: generators.iter().all(|g| g.class == MapClass::Loxodromic),
        generators,
        rect: group.rect().map(Into::into),
    }
}

pub fn group_build(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome> {
    let group = build_group(cfg)?;
    Ok(Outcome::ok(vec![out.write_json("group.json", "group-build", &summarize(&group))?]))
}

#[derive(Serialize)]
struct LimitReport {
    word_len: usize,
    points: usize,
    dimension: DimensionEstimate,
    exponent: Option<ExponentEstimate>,
    exponent_error: Option<String>,
}

pub fn limit(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome> {
    let group = build_group(cfg)?;
    let l = &cfg.limit;
    let (sample, dimension) = limit_set_dimension(&group, l.word_len).context("limit-set dimension")?;
    let (exponent, exponent_error) = match exponent_of_convergence(&group, l.r_max, l.orbit_max_len) {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rows: Vec<Vec<String>> = sample.points.iter().map(|z| vec![fmt_f64(z.re), fmt_f64(z.im)]).collect();
    let csv = out.write_csv("limit_points.csv", "re,im", &rows)?;
    let partial_failure = exponent_error.is_some();
    let report = LimitReport { word_len: l.word_len, points: sample.points.len(), dimension, exponent, exponent_error };
    let json = out.write_json("dimension.json", "limit", &report)?;
    Ok(Outcome { files: vec![csv, json], partial_failure })
}

#[derive(Serialize)]
struct KernelPoint {
    x: [f64; 2],
    y: [f64; 2],
    value: Option<KernelValue>,
    error: Option<String>,
}

#[derive(Serialize)]
struct KernelReport {
    s: [f64; 2],
    max_len: usize,
    prune_tol: f64,
    pairs: Vec<KernelPoint>,
    operator: Option<OperatorSummary>,
}

#[derive(Serialize)]
struct OperatorSummary {
    nodes: usize,
    total_weight: f64,
    norm: NormEstimate,
    matrix_file: String,
    sidecar_file: String,
}

pub fn kernel(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome> {
    let group = build_group(cfg)?;
    let s = convergent_s(cfg)?;
    let trunc = cfg.truncation();
    let mut failed = false;
    let pairs = cfg
        .kernel
        .pairs
        .iter()
        .map(|[x, y]| {
            let (zx, zy) = (Complex64::new(x[0], x[1]), Complex64::new(y[0], y[1]));
            match kernel_value(&group, &s, zx, zy, trunc) {
                Ok(v) => KernelPoint { x: *x, y: *y, value: Some(v), error: None },
                Err(e) => {
                    failed = true;
                    KernelPoint { x: *x, y: *y, value: None, error: Some(e.to_string()) }
                }
            }
        })
        .collect();
    let mut files = Vec::new();
    let operator = if cfg.kernel.matrix {
        let rect = group.rect().ok_or_else(|| invalid(anyhow!("operator export needs a group rect")))?;
        let grid = NodeGrid::tensor(&group, rect, cfg.grid_n)?;
        let m = assemble_operator(&group, &s, &grid, trunc)?;
        let norm = operator_norm(&m)?;
        let bin = out.path("operator.bin");
        m.write_binary(&bin)?;
        let mut sidecar = m.sidecar();
        sidecar["config_hash"] = out.config_hash.clone().into();
        let side = out.write_json("operator.json", "kernel", &sidecar)?;
        files.push(bin);
        files.push(side);
        Some(OperatorSummary {
            nodes: grid.len(),
            total_weight: grid.total_weight(),
            norm,
            matrix_file: "operator.bin".into(),
            sidecar_file: "operator.json".into(),
        })
    } else {
        None
    };
    let report = KernelReport { s: cfg.s, max_len: trunc.max_len, prune_tol: trunc.prune_tol, pairs, operator };
    files.insert(0, out.write_json("kernel.json", "kernel", &report)?);
    Ok(Outcome { files, partial_failure: failed })
}

pub fn srel_sweep_cmd(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome> {
    let group = build_group(cfg)?;
    let s = convergent_s(cfg)?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| invalid(anyhow!("config has no sweep section")))?;
    let rows = srel_sweep(&group, sweep.family, &sweep.values, &relative_config(cfg, s)).map_err(invalid)?;
    let partial_failure = rows.iter().any(|r| r.error.is_some());
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.parameter),
                opt(r.k),
                opt(r.report.map(|x| x.norm)),
                opt(r.report.map(|x| x.estimate.upper)),
                r.report.map(|x| x.converged.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default().replace(',', ";"),
            ]
        })
        .collect();
    let csv = out.write_csv("srel_sweep.csv", "parameter,k,norm,upper,converged,error", &csv_rows)?;
    let json = out.write_json("srel_sweep.json", "srel-sweep", &rows)?;
    Ok(Outcome { files: vec![csv, json], partial_failure })
}

pub fn fsigma(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome> {
    let f = &cfg.fsigma;
    let curve = FsigmaCurve::uniform(f.sigma, f.lambda_min, f.lambda_max, f.samples).map_err(invalid)?;
    let rows: Vec<Vec<String>> = curve.samples.iter().map(|(l, v)| vec![fmt_f64(*l), fmt_f64(*v)]).collect();
    Ok(Outcome::ok(vec![out.write_csv("fsigma.csv", "lambda,f_sigma", &rows)?]))
}

#[derive(Serialize)]
struct EpsilonRow {
    epsilon: f64,
    inversion: Option<Inversion>,
    nu: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct BoundsReport {
    k: f64,
    d: f64,
    lower: f64,
    upper: f64,
    sigma: f64,
    epsilons: Vec<EpsilonRow>,
}

pub fn bounds(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome> {
    let b = &cfg.bounds;
    let w = dimension_window(b.k, b.d).map_err(invalid)?;
    let mut failed = false;
    let epsilons = b
        .epsilons
        .iter()
        .map(|&epsilon| {
            match invert_bound(b.sigma, epsilon).and_then(|inv| Ok((inv, nu_of_eps(b.sigma, epsilon, b.d)?))) {
                Ok((inv, nu)) => EpsilonRow { epsilon, inversion: Some(inv), nu: Some(nu), error: None },
                Err(e) => {
                    failed = true;
                    EpsilonRow { epsilon, inversion: None, nu: None, error: Some(e.to_string()) }
                }
            }
        })
        .collect();
    let report = BoundsReport { k: w.k, d: w.d_in, lower: w.lower, upper: w.upper, sigma: b.sigma, epsilons };
    Ok(Outcome { files: vec![out.write_json("bounds.json", "bounds", &report)?], partial_failure: failed })
}

#[derive(Serialize)]
struct ProbeReport {
    sigma: f64,
    a: f64,
    pairing: f64,
    /// `λ` of the distortion at the probe centre.
    lambda_at_center: f64,
    /// `f_σ(λ)/(8π)`: the pairing's lower bound for constant distortion.
    constant_coefficient_bound: f64,
}

pub fn probe(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome> {
    let group = build_group(cfg)?;
    let psi = diffeo(cfg)?;
    let p = &cfg.probe;
    let pairing = probe_pairing(&group, &psi, p.sigma, p.a, &p.quadrature).map_err(|e| match e {
        quasirigid::scattering::ScatteringError::ProbeDomain { .. }
        | quasirigid::scattering::ScatteringError::InvalidArgument(_) => invalid(e),
        e => e.into(),
    })?;
    let lambda = psi.lambda_max(Complex64::new(0.0, 0.0))?;
    let fs = quasirigid::bounds::f_sigma(p.sigma, lambda).map_err(invalid)?;
    let report = ProbeReport {
        sigma: p.sigma,
        a: p.a,
        pairing,
        lambda_at_center: lambda,
        constant_coefficient_bound: fs / (8.0 * std::f64::consts::PI),
    };
    Ok(Outcome::ok(vec![out.write_json("probe.json", "probe", &report)?]))
}

#[derive(Serialize)]
struct FullReport {
    group: GroupSummary,
    dimension: DimensionEstimate,
    exponent: Option<ExponentEstimate>,
    distortion: DistortionReport,
    /// Dimension window for the image limit set at the measured `K`.
    window: [f64; 2],
    image_dimension: Option<DimensionEstimate>,
    relative: Option<RelativeReport>,
    errors: Vec<String>,
}

pub fn report(cfg: &ExperimentConfig, out: &OutDir) -> Result<Outcome> {
    let group = build_group(cfg)?;
    let psi = diffeo(cfg)?;
    let s = convergent_s(cfg)?;
    let rect = group.rect().ok_or_else(|| invalid(anyhow!("report needs a group rect")))?;
    let mut errors = Vec::new();
    let (_, dimension) = limit_set_dimension(&group, cfg.limit.word_len).context("limit-set dimension")?;
    let exponent = exponent_of_convergence(&group, cfg.limit.r_max, cfg.limit.orbit_max_len)
        .map_err(|e| errors.push(format!("exponent: {e}")))
        .ok();
    let distortion = psi.dilatation(&SampleGrid::new(rect, cfg.dilatation_grid))?;
    let w = dimension_window(distortion.k_from_lambda, dimension.dimension.clamp(0.0, 2.0))?;
    let iso = match psi.as_moebius() {
        Some(h) => GroupIsomorphism::conjugation(&group, &h),
        None => GroupIsomorphism::circle_images(&group, |z| psi.apply(z).ok()),
    };
    let image_dimension = iso
        .map_err(anyhow::Error::from)
        .and_then(|iso| Ok(limit_set_dimension(&iso.image, cfg.limit.word_len)?.1))
        .map_err(|e| errors.push(format!("image dimension: {e}")))
        .ok();
    let relative = relative_norm(&group, &psi, &relative_config(cfg, s))
        .map_err(|e| errors.push(format!("relative norm: {e}")))
        .ok();
    let report = FullReport {
        group: summarize(&group),
        dimension,
        exponent,
        distortion,
        window: [w.lower, w.upper],
        image_dimension,
        relative,
        errors,
    };
    let partial_failure = !report.errors.is_empty();
    Ok(Outcome { files: vec![out.write_json("report.json", "report", &report)?], partial_failure })
}
