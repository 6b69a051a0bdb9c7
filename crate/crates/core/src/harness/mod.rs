//! Replicated experiments: sampling systems, measuring zero sets,
//! standardizing and testing the results, and writing reports.
//!
//! Every replicate draws from its own generator seeded by
//! [`derive_replicate_seed`], and results are collected in replicate order,
//! so reports do not depend on the number of worker threads.

mod stats;

pub use stats::{
    kolmogorov_tail, ks_p_value, ks_statistic, ks_two_sample, normality_tests, variance_standard_error,
    NormalityReport, MIN_NORMALITY_SAMPLE,
};

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{chaos_variance_limit, chaos_variance_term, ChaosCoefficientTable, FBetaMethod, VarianceQuadrature};
use crate::covariance::{profile, profile_csv_row, CovarianceProfile, PROFILE_CSV_HEADER};
use crate::kac_rice::{
    expected_volume, limit_variance_box_with, limit_variance_with, limit_volume_density, normalized_variance,
    second_moment_with, ConditionalSampler, MomentOptions, MomentResult, VarianceEstimate,
};
use crate::kss::{KssSystem, MonomialBasis};
use crate::limit_field::{ef_integrability_check, nodal_length_box, sample_field, PlanarBox};
use crate::numeric::mean_and_variance;
use crate::sphere::{icosphere, SphericalMesh};
use crate::volume::{
    count_roots_circle, max_edge_length, required_mesh_level, zero_length_marching, zero_volume_crofton,
    VolumeEstimate, VolumeMethod, MESH_RULE_CONSTANT,
};
use crate::{Error, Result};

/// Injective map from `(master, index)` to a generator seed: a counter step
/// by an odd constant followed by the SplitMix64 finalizer, both bijections
/// of `u64`.
pub fn derive_replicate_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The generator for replicate `index`.
pub fn replicate_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_replicate_seed(master, index))
}

/// `d^{r/2 - m/4}`, the scale of the volume fluctuations.
pub fn standardization_scale(m: usize, r: usize, d: u32) -> f64 {
    (d as f64).powf(0.5 * r as f64 - 0.25 * m as f64)
}

/// `(value - E V) / d^{r/2 - m/4}` with the exact mean `E V`.
pub fn standardize(value: f64, m: usize, r: usize, d: u32) -> Result<f64> {
    Ok((value - expected_volume(m, r, d)?) / standardization_scale(m, r, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Mean,
    #[serde(alias = "varscale")]
    VarianceScaling,
    Clt,
    Chaos,
    Local,
    #[serde(alias = "covdump")]
    CovarianceDump,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mean" => Experiment::Mean,
            "varscale" | "variance-scaling" => Experiment::VarianceScaling,
            "clt" => Experiment::Clt,
            "chaos" => Experiment::Chaos,
            "local" => Experiment::Local,
            "covdump" | "covariance-dump" => Experiment::CovarianceDump,
            _ => return Err(Error::InvalidInput(format!("unknown experiment {s:?}"))),
        })
    }
}

/// Zero-set length estimator on `S^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Marching,
    Crofton,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marching" => Ok(Method::Marching),
            "crofton" => Ok(Method::Crofton),
            _ => Err(Error::InvalidInput(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidInput(format!("unknown format {s:?}"))),
        }
    }
}

/// Everything that determines an experiment's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub m: usize,
    pub r: usize,
    pub d: Option<u32>,
    pub d_grid: Option<Vec<u32>>,
    pub replicates: usize,
    pub seed: u64,
    pub mesh_level: Option<u32>,
    pub method: Method,
    /// Inner Monte Carlo draws for Kac-Rice integrals.
    pub n_mc: usize,
    /// Random great circles per Crofton estimate.
    pub n_circles: usize,
    pub q_max: u32,
    /// Marching-squares cells per side for the limit field.
    pub grid: usize,
    pub n_waves: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Mean,
            m: 2,
            r: 1,
            d: None,
            d_grid: None,
            replicates: 400,
            seed: 20_240_601,
            mesh_level: None,
            method: Method::Marching,
            n_mc: MomentOptions::default().n_mc,
            n_circles: 1000,
            q_max: 8,
            grid: crate::limit_field::DEFAULT_GRID,
            n_waves: crate::limit_field::DEFAULT_WAVES,
            output: None,
            format: Format::Json,
            workers: None,
        }
    }
}

/// Degrees used when none are configured.
pub const DEFAULT_D_GRID: [u32; 4] = [16, 36, 64, 100];

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// The degrees an experiment runs at: `d_grid`, else `d`, else a default.
    pub fn degrees(&self) -> Vec<u32> {
        if let Some(g) = &self.d_grid {
            return g.clone();
        }
        if let Some(d) = self.d {
            return vec![d];
        }
        match self.experiment {
            Experiment::Clt | Experiment::CovarianceDump => vec![100],
            Experiment::VarianceScaling => vec![36, 64, 100],
            _ => DEFAULT_D_GRID.to_vec(),
        }
    }

    fn is_volume_experiment(&self) -> bool {
        matches!(self.experiment, Experiment::Mean | Experiment::VarianceScaling | Experiment::Clt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.m {
            return Err(Error::InvalidInput(format!("need 1 <= r <= m, got r = {}, m = {}", self.r, self.m)));
        }
        if self.degrees().iter().any(|&d| d < 2) || self.degrees().is_empty() {
            return Err(Error::InvalidInput("degrees must exceed 1".into()));
        }
        if self.is_volume_experiment() {
            let counts = self.m == 1 && self.r == 1;
            if counts && self.experiment != Experiment::Mean {
                return Err(Error::InvalidInput("r = m is supported only for mean root counts".into()));
            }
            if !counts && (self.m, self.r) != (2, 1) {
                return Err(Error::InvalidInput(format!(
                    "no zero-set estimator for m = {}, r = {}; supported: (2, 1) and root counts (1, 1)",
                    self.m, self.r
                )));
            }
            let min = if self.experiment == Experiment::Clt { MIN_NORMALITY_SAMPLE } else { 2 };
            if self.replicates < min {
                return Err(Error::InvalidInput(format!("need at least {min} replicates")));
            }
            if self.m == 2 && self.method == Method::Marching {
                for d in self.degrees() {
                    self.mesh_level_for(d)?;
                }
            }
        }
        if self.experiment == Experiment::Local {
            if (self.m, self.r) != (2, 1) {
                return Err(Error::InvalidInput("the local experiment needs m = 2, r = 1".into()));
            }
            if self.replicates < 2 {
                return Err(Error::InvalidInput("need at least 2 replicates".into()));
            }
        }
        if self.experiment == Experiment::Chaos && self.r >= self.m {
            return Err(Error::InvalidInput("the chaos experiment needs r < m".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidInput("workers must be positive".into()));
        }
        Ok(())
    }

    /// The configured mesh level, refused if it violates the mesh rule.
    pub fn mesh_level_for(&self, d: u32) -> Result<u32> {
        let required = required_mesh_level(d)?;
        match self.mesh_level {
            None => crate::volume::default_mesh_level(d),
            Some(level) if level >= required => Ok(level),
            Some(level) => Err(Error::MeshTooCoarse {
                degree: d,
                max_edge: max_edge_length(level)?,
                limit: MESH_RULE_CONSTANT / (d as f64).sqrt(),
                required_level: required,
            }),
        }
    }

    fn moment_options(&self) -> MomentOptions {
        MomentOptions { n_mc: self.n_mc, ..Default::default() }
    }
}

/// One measured replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub d: Option<u32>,
    pub index: usize,
    pub seed: u64,
    pub value: f64,
    pub standardized: f64,
    pub error_estimate: f64,
}

/// Sample statistics of the replicates at one degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeSummary {
    pub d: u32,
    pub n: usize,
    pub theoretical_mean: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub mean_se: f64,
    /// `(sample_mean - theoretical_mean) / mean_se`.
    pub mean_z: f64,
    pub standardized_variance: f64,
    pub standardized_variance_se: f64,
}

/// Partial sum of the chaos variance terms through order `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosPartialSum {
    pub q: u32,
    pub term: f64,
    pub partial_sum: f64,
    pub quadrature_error: f64,
    pub tail_bound: f64,
}

/// Limit-field statistics on the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalSummary {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub theoretical_mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub kac_rice_variance: VarianceEstimate,
    pub ef_integral: f64,
}

/// A named pass/fail outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub replicates: Vec<ReplicateRecord>,
    pub degrees: Vec<DegreeSummary>,
    pub normality: Option<NormalityReport>,
    pub moments: Vec<MomentResult>,
    pub chaos: Vec<ChaosPartialSum>,
    pub kac_rice_variance: Option<VarianceEstimate>,
    pub local: Option<LocalSummary>,
    pub covariance: Vec<CovarianceProfile>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    fn empty(config: &ExperimentConfig) -> Self {
        ExperimentReport {
            config: config.clone(),
            replicates: Vec::new(),
            degrees: Vec::new(),
            normality: None,
            moments: Vec::new(),
            chaos: Vec::new(),
            kac_rice_variance: None,
            local: None,
            covariance: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plot-ready rows: one per replicate for volume and local experiments,
    /// one per order for chaos, one per angle for the covariance dump.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match self.config.experiment {
            Experiment::Chaos => {
                s.push_str("q,term,partial_sum,quadrature_error,tail_bound\n");
                for c in &self.chaos {
                    let _ = writeln!(s, "{},{},{},{},{}", c.q, c.term, c.partial_sum, c.quadrature_error, c.tail_bound);
                }
            }
            Experiment::CovarianceDump => {
                s.push_str(PROFILE_CSV_HEADER);
                s.push('\n');
                for p in &self.covariance {
                    s.push_str(&profile_csv_row(p));
                    s.push('\n');
                }
            }
            _ => {
                s.push_str("d,replicate,seed,value,standardized,error_estimate\n");
                for r in &self.replicates {
                    let d = r.d.map(|d| d.to_string()).unwrap_or_default();
                    let _ = writeln!(
                        s,
                        "{d},{},{},{},{},{}",
                        r.index, r.seed, r.value, r.standardized, r.error_estimate
                    );
                }
            }
        }
        s
    }

    /// Write in `format` to `path`, or to standard output.
    pub fn write(&self, format: Format, path: Option<&std::path::Path>) -> Result<()> {
        let text = match format {
            Format::Json => self.to_json()? + "\n",
            Format::Csv => self.to_csv(),
        };
        match path {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

/// Run one experiment on a pool of `config.workers` threads (all available
/// when unset).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .install(|| dispatch(config)),
        None => dispatch(config),
    }
}

fn dispatch(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.experiment {
        Experiment::Mean => run_mean(config),
        Experiment::VarianceScaling => run_varscale(config),
        Experiment::Clt => run_clt(config),
        Experiment::Chaos => run_chaos(config),
        Experiment::Local => run_local(config),
        Experiment::CovarianceDump => run_covdump(config),
    }
}

/// Seed of replicate `index` at degree `d`.
pub fn replicate_seed(master: u64, d: u32, index: usize) -> u64 {
    derive_replicate_seed(derive_replicate_seed(master, d as u64), index as u64)
}

const CIRCLE_STREAM: u64 = 0x63_69_72_63_6c_65;

/// Measure the zero set of the system sampled from `seed`.
pub fn measure_replicate(
    config: &ExperimentConfig,
    basis: &Arc<MonomialBasis>,
    mesh: Option<&SphericalMesh>,
    seed: u64,
) -> Result<VolumeEstimate> {
    let sys = KssSystem::sample_with_basis(basis, config.r, seed)?;
    if config.m == 1 {
        return Ok(VolumeEstimate {
            value: count_roots_circle(&sys)? as f64,
            method: VolumeMethod::Count,
            error_estimate: 0.0,
            mesh_level: None,
            n_circles: None,
        });
    }
    match config.method {
        Method::Marching => {
            let mesh = mesh.ok_or_else(|| Error::InvalidInput("marching needs a mesh".into()))?;
            Ok(zero_length_marching(&sys, mesh)?.0)
        }
        Method::Crofton => {
            let mut rng = replicate_rng(seed, CIRCLE_STREAM);
            zero_volume_crofton(&sys, sys.degree(), config.n_circles, &mut rng)
        }
    }
}

/// All replicates at degree `d`, in index order.
pub fn replicates_at(config: &ExperimentConfig, d: u32) -> Result<Vec<ReplicateRecord>> {
    let basis = MonomialBasis::new(config.m, d)?;
    let mesh = if config.m == 2 && config.method == Method::Marching {
        Some(icosphere(config.mesh_level_for(d)?)?)
    } else {
        None
    };
    let expected = expected_volume(config.m, config.r, d)?;
    let scale = standardization_scale(config.m, config.r, d);
    (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let seed = replicate_seed(config.seed, d, i);
            let v = measure_replicate(config, &basis, mesh.as_ref(), seed)?;
            Ok(ReplicateRecord {
                d: Some(d),
                index: i,
                seed,
                value: v.value,
                standardized: (v.value - expected) / scale,
                error_estimate: v.error_estimate,
            })
        })
        .collect()
}

fn summarize(config: &ExperimentConfig, d: u32, recs: &[ReplicateRecord]) -> Result<DegreeSummary> {
    let values: Vec<f64> = recs.iter().map(|r| r.value).collect();
    let std: Vec<f64> = recs.iter().map(|r| r.standardized).collect();
    let (mean, var) = mean_and_variance(&values);
    let (_, svar) = mean_and_variance(&std);
    let n = values.len();
    let se = (var / n as f64).sqrt();
    let theoretical_mean = expected_volume(config.m, config.r, d)?;
    Ok(DegreeSummary {
        d,
        n,
        theoretical_mean,
        sample_mean: mean,
        sample_variance: var,
        mean_se: se,
        mean_z: if se > 0.0 { (mean - theoretical_mean) / se } else { f64::INFINITY },
        standardized_variance: svar,
        standardized_variance_se: variance_standard_error(&std),
    })
}

fn run_mean(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::empty(config);
    for d in config.degrees() {
        let recs = replicates_at(config, d)?;
        let s = summarize(config, d, &recs)?;
        report.checks.push(Check::new(
            format!("mean d={d}"),
            s.mean_z.abs() < 3.0,
            format!("sample {:.5} +- {:.5}, expected {:.5}, z = {:.2}", s.sample_mean, s.mean_se, s.theoretical_mean, s.mean_z),
        ));
        report.degrees.push(s);
        report.replicates.extend(recs);
    }
    Ok(report)
}

/// Relative difference `|a - b| / max(|a|, |b|)`.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn run_varscale(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::empty(config);
    let opts = config.moment_options();
    let sampler = ConditionalSampler::new(config.m, config.r, opts.n_mc, &mut replicate_rng(config.seed, u64::MAX))?;
    for d in config.degrees() {
        let recs = replicates_at(config, d)?;
        let s = summarize(config, d, &recs)?;
        let mom = second_moment_with(&sampler, d, &opts)?;
        // Kac-Rice errors in the units of the standardized variance.
        let unit = standardization_scale(config.m, config.r, d).powi(2);
        let (kr_se, kr_quad) = (mom.inner_mc_se / unit, mom.quadrature_error / unit);
        let tol = 3.0 * (s.standardized_variance_se.powi(2) + kr_se.powi(2) + kr_quad.powi(2)).sqrt();
        let diff = (s.standardized_variance - mom.normalized_variance).abs();
        report.checks.push(Check::new(
            format!("variance d={d}"),
            diff <= tol,
            format!(
                "sample {:.4} +- {:.4}, Kac-Rice {:.4} +- {:.4}",
                s.standardized_variance, s.standardized_variance_se, mom.normalized_variance, kr_se
            ),
        ));
        report.degrees.push(s);
        report.moments.push(mom);
        report.replicates.extend(recs);
    }
    let ds = &report.degrees;
    for i in 0..ds.len() {
        for j in i + 1..ds.len() {
            let rel = relative_difference(ds[i].standardized_variance, ds[j].standardized_variance);
            report.checks.push(Check::new(
                format!("variance d={} vs d={}", ds[i].d, ds[j].d),
                rel <= 0.2,
                format!("relative difference {rel:.4}"),
            ));
        }
    }
    Ok(report)
}

fn run_clt(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::empty(config);
    for d in config.degrees() {
        let recs = replicates_at(config, d)?;
        let s = summarize(config, d, &recs)?;
        let std: Vec<f64> = recs.iter().map(|r| r.standardized).collect();
        let nt = normality_tests(&std)?;
        report.checks.push(Check::new(format!("KS d={d}"), nt.ks_p_value > 0.01, format!("p = {:.4}", nt.ks_p_value)));
        report.checks.push(Check::new(
            format!("skewness d={d}"),
            nt.skewness_z.abs() < 3.0,
            format!("z = {:.3}", nt.skewness_z),
        ));
        report.checks.push(Check::new(
            format!("kurtosis d={d}"),
            nt.kurtosis_z.abs() < 3.0,
            format!("z = {:.3}", nt.kurtosis_z),
        ));
        report.normality = Some(nt);
        report.degrees.push(s);
        report.replicates.extend(recs);
    }
    Ok(report)
}

fn run_chaos(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::empty(config);
    let table = ChaosCoefficientTable::build(config.r, config.m, config.q_max, FBetaMethod::Auto)?;
    let quad = VarianceQuadrature::default();
    let opts = config.moment_options();
    let sampler = ConditionalSampler::new(config.m, config.r, opts.n_mc, &mut replicate_rng(config.seed, u64::MAX))?;
    let kr = match config.d {
        Some(d) => normalized_variance(&sampler, d, &opts)?,
        None => limit_variance_with(&sampler, &opts)?,
    };
    let mut sum = 0.0;
    let mut err = 0.0;
    for q in 0..=config.q_max {
        let t = match config.d {
            Some(d) => chaos_variance_term(q, d, &table, &quad)?,
            None => chaos_variance_limit(q, &table, &quad)?,
        };
        sum += t.value;
        err += t.quadrature_error + t.tail_bound;
        report.chaos.push(ChaosPartialSum {
            q,
            term: t.value,
            partial_sum: sum,
            quadrature_error: t.quadrature_error,
            tail_bound: t.tail_bound,
        });
    }
    let monotone = report.chaos.windows(2).all(|w| w[1].partial_sum >= w[0].partial_sum - 1e-12);
    report.checks.push(Check::new("partial sums nondecreasing", monotone, ""));
    let tol = 3.0 * kr.inner_mc_se + kr.quadrature_error + err;
    let worst = report.chaos.iter().map(|c| c.partial_sum).fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(Check::new(
        "partial sums below Kac-Rice variance",
        worst <= kr.value + tol,
        format!("max partial sum {worst:.5}, Kac-Rice {:.5} +- {:.5}, gap at Q={} {:.5}", kr.value, kr.inner_mc_se, config.q_max, kr.value - sum),
    ));
    report.kac_rice_variance = Some(kr);
    Ok(report)
}

fn run_local(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::empty(config);
    let window = PlanarBox::default();
    let recs = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let seed = derive_replicate_seed(config.seed, i as u64);
            let f = sample_field(config.m, config.n_waves, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let v = nodal_length_box(&f, config.grid, &window)?;
            Ok(ReplicateRecord {
                d: None,
                index: i,
                seed,
                value: v.value,
                standardized: v.value - 0.5,
                error_estimate: v.error_estimate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = recs.iter().map(|r| r.value).collect();
    let (mean, var) = mean_and_variance(&values);
    let n = values.len();
    let opts = config.moment_options();
    let sampler = ConditionalSampler::new(config.m, config.r, opts.n_mc, &mut replicate_rng(config.seed, u64::MAX))?;
    let kr = limit_variance_box_with(&sampler, &opts)?;
    let summary = LocalSummary {
        n,
        mean,
        mean_se: (var / n as f64).sqrt(),
        theoretical_mean: limit_volume_density(config.m, config.r)?,
        variance: var,
        variance_se: variance_standard_error(&values),
        kac_rice_variance: kr,
        ef_integral: ef_integrability_check(0.5, config.m)?,
    };
    report.checks.push(Check::new(
        "local mean",
        (summary.mean - summary.theoretical_mean).abs() < 3.0 * summary.mean_se,
        format!("{:.5} +- {:.5} vs {:.5}", summary.mean, summary.mean_se, summary.theoretical_mean),
    ));
    let tol = 3.0 * (summary.variance_se.powi(2) + kr.inner_mc_se.powi(2) + kr.quadrature_error.powi(2)).sqrt();
    report.checks.push(Check::new(
        "local variance",
        (summary.variance - kr.value).abs() <= tol,
        format!("{:.5} +- {:.5} vs Kac-Rice {:.5} +- {:.5}", summary.variance, summary.variance_se, kr.value, kr.inner_mc_se),
    ));
    report.checks.push(Check::new(
        "integrability integral finite",
        summary.ef_integral.is_finite(),
        format!("{:.6}", summary.ef_integral),
    ));
    report.local = Some(summary);
    report.replicates = recs;
    Ok(report)
}

/// Angles in the covariance dump.
pub const COVDUMP_POINTS: usize = 200;

fn run_covdump(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::empty(config);
    for d in config.degrees() {
        for k in 0..=COVDUMP_POINTS {
            let theta = std::f64::consts::PI * k as f64 / COVDUMP_POINTS as f64;
            report.covariance.push(profile(theta, d)?);
        }
    }
    Ok(report)
}
