//! Serializable run configurations, the reports they produce, and the demo corpus.
//!
//! A [`Report`] embeds the fully defaulted [`RunConfig`] that produced it, so
//! `run(&report.config)` reproduces the report byte for byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{
    affine_trace, certify_smooth, conic_at_infinity_verdict, gradient_bound_constant, icis_local_verdict,
    link_smoothness, transversality_at_infinity, affine_trace_verdict, Certificate, CertifyError, CertifyOptions,
    Status,
};
use crate::cloud::PointCloud;
use crate::collar::{CollarError, CollarFlow, CollarOptions, DistortionReport};
use crate::geomaps::{inversion, phi_n, stereographic, stereographic_inverse, GeoError};
use crate::metrics::{lne_scan, MetricError, ScanOptions, ScanRegion, ScanReport, Trend};
use crate::polyring::{Field, PolyError, PolySystem, SystemJson, FORMAT_VERSION};
use crate::sampler::{sample_region, Region, SampleError, SampleOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unsupported format_version {0}")]
    Version(u32),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Smooth,
    LinkSmooth,
    GradientBound,
    TransversalityAtInfinity,
    ConicAtInfinity,
    AffineTrace,
    IcisLocal,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Smooth,
        Check::LinkSmooth,
        Check::GradientBound,
        Check::TransversalityAtInfinity,
        Check::ConicAtInfinity,
        Check::AffineTrace,
        Check::IcisLocal,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Inversion,
    Stereographic,
    StereographicInverse,
    PhiN,
}

impl MapKind {
    pub fn apply(self, x: &[f64]) -> Result<Vec<f64>, GeoError> {
        match self {
            MapKind::Inversion => inversion(x),
            MapKind::Stereographic => Ok(stereographic(x)),
            MapKind::StereographicInverse => stereographic_inverse(x),
            MapKind::PhiN => phi_n(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Job {
    Certify {
        system: SystemJson,
        check: Check,
        /// Region for `smooth`; defaults to the ball of radius `affine_radius`.
        #[serde(default)]
        region: Option<Region>,
        /// Punctured-ball radii for `icis-local`.
        #[serde(default)]
        radii: Vec<f64>,
        /// Hyperplane normal for `affine-trace`; drawn from the seed when absent.
        #[serde(default)]
        normal: Option<Vec<f64>>,
        #[serde(default)]
        options: CertifyOptions,
    },
    Sample {
        system: SystemJson,
        region: Region,
        count: usize,
        #[serde(default)]
        options: SampleOptions,
    },
    Lne {
        system: SystemJson,
        radii: Vec<f64>,
        #[serde(default)]
        scan: ScanOptions,
    },
    Collar {
        system: SystemJson,
        center: Vec<f64>,
        r0: f64,
        radii: Vec<f64>,
        #[serde(default)]
        options: CollarOptions,
    },
    Maps {
        map: MapKind,
        cloud: PointCloud,
    },
    Demo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub format_version: u32,
    pub seed: u64,
    pub job: Job,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Where the front end writes artifacts. Ignored by [`run`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub report: Option<String>,
    /// Sampled or mapped cloud; CSV when the name ends in `.csv`, JSON otherwise.
    pub cloud: Option<String>,
    /// `radius,ratio` table of an `lne` scan.
    pub table: Option<String>,
    /// Directory receiving one report per demo case.
    pub dir: Option<String>,
}

impl RunConfig {
    pub fn new(seed: u64, job: Job) -> Self {
        RunConfig { format_version: FORMAT_VERSION, seed, job, outputs: Outputs::default() }
    }

    pub fn subcommand(&self) -> &'static str {
        match self.job {
            Job::Certify { .. } => "certify",
            Job::Sample { .. } => "sample",
            Job::Lne { .. } => "lne",
            Job::Collar { .. } => "collar",
            Job::Maps { .. } => "maps",
            Job::Demo => "demo",
        }
    }

    /// Decodes a config, or the `config` member of a report.
    pub fn from_json(s: &str) -> Result<RunConfig, ConfigError> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let v = match v.get("config") {
            Some(inner) if v.get("status").is_some() => inner.clone(),
            _ => v,
        };
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if cfg.format_version != FORMAT_VERSION {
            return Err(ConfigError::Version(cfg.format_version));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub cloud: PointCloud,
    pub warnings: Vec<String>,
    pub attempts: usize,
    pub successes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub map: MapKind,
    pub cloud: PointCloud,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoCase {
    pub name: String,
    pub expected: String,
    pub ok: bool,
    pub report: Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Certificate(Certificate),
    Sample(SampleResult),
    Lne(ScanReport),
    Collar(DistortionReport),
    Map(MapResult),
    Demo { cases: Vec<DemoCase> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub config: RunConfig,
    pub status: Status,
    /// Set when a numerical step failed; `result` then holds what was completed.
    pub error: Option<String>,
    pub result: Option<Outcome>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports are serializable")
    }

    fn failed(config: &RunConfig, msg: String) -> Report {
        Report { format_version: FORMAT_VERSION, config: config.clone(), status: Status::Inconclusive, error: Some(msg), result: None }
    }
}

fn decode(system: &SystemJson) -> Result<PolySystem, ConfigError> {
    Ok(system.to_system()?)
}

fn real_dim(sys: &PolySystem) -> usize {
    match sys.field() {
        Field::Real => sys.n(),
        Field::Complex => 2 * sys.n(),
    }
}

fn region_dims(region: &Region, out: &mut Vec<usize>) {
    match region {
        Region::Ball { center, .. } | Region::Annulus { center, .. } => out.push(center.len()),
        Region::Box { lo, hi } => {
            out.push(lo.len());
            out.push(hi.len());
        }
        Region::Cylinder { .. } => {}
        Region::HalfSpace { normal, .. } => out.push(normal.len()),
        Region::Intersection { parts } => parts.iter().for_each(|p| region_dims(p, out)),
    }
}

fn check_region(region: &Region, n: usize) -> Result<(), ConfigError> {
    let mut dims = Vec::new();
    region_dims(region, &mut dims);
    if let Some(d) = dims.iter().find(|d| **d != n) {
        return Err(ConfigError::Invalid(format!("region has dimension {d}, system has {n} real variables")));
    }
    Ok(())
}

fn check_radii(radii: &[f64], sorted: bool) -> Result<(), ConfigError> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(ConfigError::Invalid("radii must be a non-empty list of positive numbers".into()));
    }
    if sorted && radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::Invalid("radii must be strictly increasing".into()));
    }
    Ok(())
}

/// Shape and applicability errors are the caller's fault; everything else is numerical.
fn certify_error(e: CertifyError) -> Result<String, ConfigError> {
    match e {
        CertifyError::Poly(p) => Err(ConfigError::Poly(p)),
        CertifyError::NotHomogeneous
        | CertifyError::NotGerm(_)
        | CertifyError::Shape { .. }
        | CertifyError::BadNormal(_) => Err(ConfigError::Invalid(e.to_string())),
        CertifyError::Sample(s) => Ok(s.to_string()),
    }
}

/// Executes a configuration. Configuration problems are returned as errors;
/// numerical failures produce a report with status inconclusive.
pub fn run(config: &RunConfig) -> Result<Report, ConfigError> {
    if config.format_version != FORMAT_VERSION {
        return Err(ConfigError::Version(config.format_version));
    }
    let seed = config.seed;
    let done = |status: Status, result: Outcome| Report {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        status,
        error: None,
        result: Some(result),
    };
    match &config.job {
        Job::Certify { system, check, region, radii, normal, options } => {
            let sys = decode(system)?;
            let n = real_dim(&sys);
            if let Some(r) = region {
                check_region(r, n)?;
            }
            let cert = match check {
                Check::Smooth => {
                    let r = region.clone().unwrap_or_else(|| Region::ball(n, options.affine_radius));
                    certify_smooth(&sys, &r, options, seed)
                }
                Check::LinkSmooth => link_smoothness(&sys.to_real()?.initial_forms()?, options, seed),
                Check::GradientBound => {
                    if sys.p() != 1 {
                        return Err(ConfigError::Invalid("gradient-bound takes a single polynomial".into()));
                    }
                    gradient_bound_constant(&sys.polys()[0], options, seed)
                }
                Check::TransversalityAtInfinity => transversality_at_infinity(&sys, options, seed),
                Check::ConicAtInfinity => conic_at_infinity_verdict(&sys, options, seed),
                Check::AffineTrace => match normal {
                    Some(nv) => affine_trace(&sys, nv).and_then(|t| {
                        let mut c = conic_at_infinity_verdict(&t, options, seed)?;
                        c.check = "affine_trace".into();
                        for (i, v) in nv.iter().enumerate() {
                            c.constants.insert(format!("normal_{i}"), *v);
                        }
                        Ok(c)
                    }),
                    None => affine_trace_verdict(&sys, options, seed).map(|(_, _, c)| c),
                },
                Check::IcisLocal => {
                    check_radii(radii, false)?;
                    icis_local_verdict(&sys, radii, options, seed)
                }
            };
            match cert {
                Ok(c) => Ok(done(c.status, Outcome::Certificate(c))),
                Err(e) => certify_error(e).map(|msg| Report::failed(config, msg)),
            }
        }
        Job::Sample { system, region, count, options } => {
            let sys = decode(system)?;
            check_region(region, real_dim(&sys))?;
            match sample_region(&sys, region, *count, seed, options) {
                Ok(out) => Ok(done(
                    Status::Pass,
                    Outcome::Sample(SampleResult {
                        cloud: out.cloud,
                        warnings: out.warnings,
                        attempts: out.attempts,
                        successes: out.successes,
                    }),
                )),
                Err(SampleError::Poly(p)) => Err(p.into()),
                Err(e @ (SampleError::BadRadius(_) | SampleError::BadRegion(_))) => Err(ConfigError::Invalid(e.to_string())),
            }
        }
        Job::Lne { system, radii, scan } => {
            let sys = decode(system)?;
            let n = real_dim(&sys);
            check_radii(radii, true)?;
            if let ScanRegion::Cylinder { axes } = &scan.region {
                if axes.is_empty() || axes.iter().any(|a| *a >= n) {
                    return Err(ConfigError::Invalid(format!("cylinder axes {axes:?} out of range for {n} variables")));
                }
            }
            if scan.half_space.as_ref().is_some_and(|h| h.len() != n) || scan.extra_points.iter().any(|p| p.len() != n) {
                return Err(ConfigError::Invalid("half-space normal and extra points need one entry per real variable".into()));
            }
            match lne_scan(&sys, radii, seed, scan) {
                Ok(rep) => {
                    let status = if rep.fit.trend == Trend::Inconclusive { Status::Inconclusive } else { Status::Pass };
                    Ok(done(status, Outcome::Lne(rep)))
                }
                Err(MetricError::Sample(SampleError::Poly(p))) => Err(p.into()),
                Err(e) => Ok(Report::failed(config, e.to_string())),
            }
        }
        Job::Collar { system, center, r0, radii, options } => {
            let sys = decode(system)?;
            if center.len() != real_dim(&sys) {
                return Err(ConfigError::Invalid("center needs one entry per real variable".into()));
            }
            check_radii(radii, false)?;
            if !(*r0 > 0.0) || radii.iter().any(|r| r > r0) {
                return Err(ConfigError::Invalid(format!("radii must lie in (0, r0 = {r0}]")));
            }
            let flow = match CollarFlow::new(&sys, center.clone(), *r0, options.clone(), seed) {
                Ok(f) => f,
                Err(CollarError::Poly(p)) => return Err(p.into()),
                Err(e) => return Ok(Report::failed(config, e.to_string())),
            };
            // radii beyond a halved r0 cannot be reached
            let reachable: Vec<f64> = radii.iter().copied().filter(|r| *r <= flow.r0()).collect();
            match flow.phi0_probe(&reachable) {
                Ok(rep) => {
                    let holds = rep.cross.as_ref().is_none_or(|c| c.holds);
                    let status = if !holds {
                        Status::Fail
                    } else if reachable.len() < radii.len() {
                        Status::Inconclusive
                    } else {
                        Status::Pass
                    };
                    let mut report = done(status, Outcome::Collar(rep));
                    if reachable.len() < radii.len() {
                        report.error = Some(format!("collar radius shrank to {}; larger radii skipped", flow.r0()));
                    }
                    Ok(report)
                }
                Err(e) => Ok(Report::failed(config, e.to_string())),
            }
        }
        Job::Maps { map, cloud } => {
            if cloud.header.format_version != FORMAT_VERSION {
                return Err(ConfigError::Version(cloud.header.format_version));
            }
            if cloud.points.iter().any(|p| p.len() != cloud.dim()) {
                return Err(ConfigError::Invalid("cloud points disagree with the header dimension".into()));
            }
            let mut out = Vec::with_capacity(cloud.len());
            for (i, p) in cloud.points.iter().enumerate() {
                match map.apply(p) {
                    Ok(q) => out.push(q),
                    Err(e) => {
                        let mut rep = Report::failed(config, format!("point {i}: {e}"));
                        rep.result = Some(Outcome::Map(MapResult { map: *map, cloud: PointCloud::from_points(out) }));
                        return Ok(rep);
                    }
                }
            }
            Ok(done(Status::Pass, Outcome::Map(MapResult { map: *map, cloud: PointCloud::from_points(out) })))
        }
        Job::Demo => {
            let mut cases = Vec::new();
            for case in demo_corpus(seed) {
                let report = run(&case.config)?;
                let ok = case.expect.holds(&report);
                cases.push(DemoCase { name: case.name.into(), expected: case.expect.describe(), ok, report });
            }
            let status = if cases.iter().all(|c| c.ok) { Status::Pass } else { Status::Fail };
            Ok(done(status, Outcome::Demo { cases }))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expectation {
    Status(Status),
    Trend(Trend),
}

impl Expectation {
    pub fn holds(&self, report: &Report) -> bool {
        match (self, &report.result) {
            (Expectation::Status(s), _) => report.status == *s,
            (Expectation::Trend(t), Some(Outcome::Lne(rep))) => rep.fit.trend == *t,
            _ => false,
        }
    }

    pub fn describe(&self) -> String {
        let v = match self {
            Expectation::Status(s) => serde_json::to_value(s),
            Expectation::Trend(t) => serde_json::to_value(t),
        };
        v.ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
    }
}

pub struct DemoEntry {
    pub name: &'static str,
    pub config: RunConfig,
    pub expect: Expectation,
}

fn system(exprs: &[&str], n: usize, field: Field) -> SystemJson {
    PolySystem::parse(exprs, n, field).expect("demo systems parse").to_json()
}

/// Built-in corpus: parabola, circle, cone, quadric at infinity, ICIS quadric.
pub fn demo_corpus(seed: u64) -> Vec<DemoEntry> {
    let parabola = RunConfig::new(
        seed,
        Job::Lne {
            system: system(&["y - x^2"], 2, Field::Real),
            radii: vec![4.0, 8.0, 16.0],
            scan: ScanOptions { count: 1000, region: ScanRegion::Cylinder { axes: vec![0] }, ..ScanOptions::default() },
        },
    );
    let circle = RunConfig::new(
        seed,
        Job::Sample {
            system: system(&["x^2 + y^2 - 1"], 2, Field::Real),
            region: Region::ball(2, 2.0),
            count: 200,
            options: SampleOptions::default(),
        },
    );
    let cone = RunConfig::new(
        seed,
        Job::Collar {
            system: system(&["x^2 + y^2 - z^2"], 3, Field::Real),
            center: vec![0.0; 3],
            r0: 1.0,
            radii: vec![0.5, 0.25, 0.1],
            options: CollarOptions { link_count: 32, ..CollarOptions::default() },
        },
    );
    let quadric = RunConfig::new(
        seed,
        Job::Certify {
            system: system(&["x^2 + y^2 - z^2 - 1"], 3, Field::Real),
            check: Check::ConicAtInfinity,
            region: None,
            radii: Vec::new(),
            normal: None,
            options: CertifyOptions::default(),
        },
    );
    let icis = RunConfig::new(
        seed,
        Job::Certify {
            system: system(&["x^2 + y^2 + z^2"], 3, Field::Complex),
            check: Check::IcisLocal,
            region: None,
            radii: vec![0.5, 0.25, 0.125],
            normal: None,
            options: CertifyOptions::default(),
        },
    );
    vec![
        DemoEntry { name: "parabola", config: parabola, expect: Expectation::Trend(Trend::Divergent) },
        DemoEntry { name: "circle", config: circle, expect: Expectation::Status(Status::Pass) },
        DemoEntry { name: "cone", config: cone, expect: Expectation::Status(Status::Pass) },
        DemoEntry { name: "quadric-at-infinity", config: quadric, expect: Expectation::Status(Status::Pass) },
        DemoEntry { name: "icis-quadric", config: icis, expect: Expectation::Status(Status::Pass) },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_sample(count: usize) -> RunConfig {
        RunConfig::new(
            4,
            Job::Sample {
                system: system(&["x^2 + y^2 - 1"], 2, Field::Real),
                region: Region::ball(2, 2.0),
                count,
                options: SampleOptions::default(),
            },
        )
    }

    #[test]
    fn config_roundtrip_and_rerun() {
        let cfg = circle_sample(40);
        let rep = run(&cfg).unwrap();
        assert_eq!(rep.status, Status::Pass);
        let text = rep.to_json();
        let again = RunConfig::from_json(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(run(&again).unwrap().to_json(), text);
    }

    #[test]
    fn partial_config_gets_defaults() {
        let src = r#"{"format_version":1,"seed":3,"job":{"subcommand":"lne","radii":[1,2],
            "system":{"polys":[{"n":2,"field":"real","terms":[{"exp":[1,0],"re":"1"}]}],"degrees":[1]}}}"#;
        let cfg = RunConfig::from_json(src).unwrap();
        match cfg.job {
            Job::Lne { scan, .. } => assert_eq!(scan, ScanOptions::default()),
            _ => panic!(),
        }
    }

    #[test]
    fn config_errors() {
        let mut cfg = circle_sample(10);
        cfg.format_version = 99;
        assert!(matches!(run(&cfg), Err(ConfigError::Version(99))));
        let cfg = RunConfig::new(
            0,
            Job::Sample {
                system: system(&["x^2 + y^2 - 1"], 2, Field::Real),
                region: Region::ball(3, 1.0),
                count: 5,
                options: SampleOptions::default(),
            },
        );
        assert!(matches!(run(&cfg), Err(ConfigError::Invalid(_))));
        let cfg = RunConfig::new(
            0,
            Job::Certify {
                system: system(&["x^2 + y - 1"], 2, Field::Real),
                check: Check::AffineTrace,
                region: None,
                radii: vec![],
                normal: None,
                options: CertifyOptions::default(),
            },
        );
        assert!(matches!(run(&cfg), Err(ConfigError::Invalid(_))));
        assert!(RunConfig::from_json("{\"seed\": 1}").is_err());
    }

    #[test]
    fn map_failure_is_partial() {
        let cloud = PointCloud::from_points(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        let rep = run(&RunConfig::new(0, Job::Maps { map: MapKind::Inversion, cloud })).unwrap();
        assert_eq!(rep.exit_code(), 2);
        match rep.result {
            Some(Outcome::Map(m)) => assert_eq!(m.cloud.points, vec![vec![1.0, 0.0]]),
            _ => panic!(),
        }
    }
}
