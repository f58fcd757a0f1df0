use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lnecert::certify::CertifyOptions;
use lnecert::cloud::PointCloud;
use lnecert::collar::CollarOptions;
use lnecert::metrics::{ScanOptions, ScanRegion};
use lnecert::pipeline::{Check, Job, MapKind, Outputs, RunConfig};
use lnecert::polyring::{Field, PolySystem, SystemJson};
use lnecert::sampler::{Region, SampleOptions};

pub const WORKERS_ENV: &str = "LNECERT_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "lnecert", version, about = "Conic-point certificates and inner/outer distance estimates for algebraic sets")]
pub struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,

    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Re-run a config file, or the config embedded in a report.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Numeric certificate for one check; exit 0 pass, 1 fail, 2 inconclusive.
    Certify(CertifyArgs),
    /// Sample points of the variety inside a region.
    Sample(SampleArgs),
    /// Estimate inner/outer distance ratios over growing radii.
    Lne(LneArgs),
    /// Integrate the radial collar flow and report the cone-model distortion.
    Collar(CollarArgs),
    /// Apply a named map to every point of a cloud.
    Maps(MapsArgs),
    /// Run the built-in corpus end to end.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// System file in the JSON polynomial format.
    #[arg(long, conflicts_with = "expr")]
    pub system: Option<PathBuf>,

    /// Equation in infix form, e.g. "x^2 + y^2 - 1" (repeatable).
    #[arg(long)]
    pub expr: Vec<String>,

    /// Number of variables for --expr (x, y, z, w; x1..xn beyond four).
    #[arg(long)]
    pub vars: Option<usize>,

    /// Read --expr coefficients over the complex numbers (`i` is the imaginary unit).
    #[arg(long)]
    pub complex: bool,
}

impl SystemArgs {
    pub fn load(&self) -> Result<SystemJson, String> {
        if let Some(path) = &self.system {
            let text = read(path)?;
            let sys = SystemJson::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            return Ok(sys.to_json());
        }
        if self.expr.is_empty() {
            return Err("give --system FILE or at least one --expr".into());
        }
        let n = self.vars.ok_or("--expr needs --vars")?;
        let field = if self.complex { Field::Complex } else { Field::Real };
        let exprs: Vec<&str> = self.expr.iter().map(String::as_str).collect();
        PolySystem::parse(&exprs, n, field).map(|s| s.to_json()).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// smooth, link-smooth, gradient-bound, transversality-at-infinity, conic-at-infinity, affine-trace, icis-local
    #[arg(long, value_parser = parse_check)]
    pub check: Check,

    /// Ball radius for `smooth` (centered at the origin).
    #[arg(long, conflicts_with = "region")]
    pub radius: Option<f64>,

    /// Region JSON file for `smooth`.
    #[arg(long)]
    pub region: Option<PathBuf>,

    /// Punctured-ball radii for `icis-local`.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
    pub radii: Vec<f64>,

    /// Hyperplane normal for `affine-trace` (random from the seed when absent).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub normal: Option<Vec<f64>>,

    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub margin_tol: Option<f64>,
    #[arg(long)]
    pub fail_tol: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Radius of the ball searched by the affine smoothness part of conic-at-infinity.
    #[arg(long)]
    pub affine_radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub shell_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub oversample: Option<usize>,
    #[arg(long)]
    pub refine_rounds: Option<usize>,
}

impl SamplerArgs {
    fn options(&self) -> SampleOptions {
        let d = SampleOptions::default();
        SampleOptions {
            tol: self.tol.unwrap_or(d.tol),
            shell_tol: self.shell_tol.unwrap_or(d.shell_tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            oversample: self.oversample.unwrap_or(d.oversample),
            max_attempts: d.max_attempts,
            refine_rounds: self.refine_rounds.unwrap_or(d.refine_rounds),
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[arg(long, default_value_t = 500)]
    pub count: usize,

    /// Ball radius.
    #[arg(long, default_value_t = 1.0, conflicts_with = "region")]
    pub radius: f64,

    /// Ball center (default: origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,

    /// Region JSON file.
    #[arg(long)]
    pub region: Option<PathBuf>,

    /// Also write the cloud here (CSV when the name ends in .csv, JSON otherwise).
    #[arg(long)]
    pub cloud_out: Option<PathBuf>,

    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct LneArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// Increasing scan radii, e.g. 4,8,16.
    #[arg(long, value_delimiter = ',', required = true)]
    pub radii: Vec<f64>,

    /// Points per radius.
    #[arg(long, default_value_t = 2000)]
    pub count: usize,

    #[arg(long, default_value_t = 3.0)]
    pub eps_factor: f64,

    /// Pair budget for landmark estimation on large graphs.
    #[arg(long, default_value_t = 20_000)]
    pub pair_budget: usize,

    /// Cut by |x_axes| ≤ R instead of |x| ≤ R.
    #[arg(long, value_delimiter = ',')]
    pub cylinder: Option<Vec<usize>>,

    /// Keep only ⟨normal, x⟩ ≥ 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub half_space: Option<Vec<f64>>,

    /// Add the origin to every cloud (cone apex).
    #[arg(long)]
    pub apex: bool,

    /// Write a radius,ratio CSV table here.
    #[arg(long)]
    pub csv: Option<PathBuf>,

    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct CollarArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// Chart center (default: origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,

    /// Initial collar radius; halved until the collar condition holds.
    #[arg(long, default_value_t = 1.0)]
    pub r0: f64,

    /// Radii at which the cone model is compared with the flow.
    #[arg(long, value_delimiter = ',', required = true)]
    pub radii: Vec<f64>,

    #[arg(long)]
    pub link_count: Option<usize>,

    /// Lower bound required of |ξ|_h.
    #[arg(long)]
    pub floor: Option<f64>,

    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MapsArgs {
    /// inversion, stereographic, stereographic-inverse, phi-n
    #[arg(long, value_parser = parse_map)]
    pub apply: MapKind,

    /// Input cloud (CSV or JSON).
    #[arg(long = "in")]
    pub input: PathBuf,

    /// Also write the mapped cloud here (CSV when the name ends in .csv, JSON otherwise).
    #[arg(long)]
    pub cloud_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Write one report per case into this directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_check(s: &str) -> Result<Check, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown check `{s}`"))
}

fn parse_map(s: &str) -> Result<MapKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown map `{s}`"))
}

pub fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_region(path: &Path) -> Result<Region, String> {
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_cloud(path: &Path) -> Result<PointCloud, String> {
    let text = read(path)?;
    let parsed = if is_csv(path) { PointCloud::from_csv(&text) } else { PointCloud::from_json(&text) };
    parsed.map_err(|e| format!("{}: {e}", path.display()))
}

pub fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn display(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn real_dim(sys: &SystemJson) -> usize {
    let n = sys.polys.first().map(|p| p.n).unwrap_or(0);
    if sys.polys.iter().any(|p| p.field == Field::Complex) {
        2 * n
    } else {
        n
    }
}

/// Turns the command line into a fully defaulted configuration.
pub fn build_config(cli: &Cli) -> Result<RunConfig, String> {
    if let Some(path) = &cli.config {
        if cli.command.is_some() {
            return Err("--config replaces the subcommand; give one or the other".into());
        }
        let mut cfg = RunConfig::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if cli.out.is_some() {
            cfg.outputs.report = display(&cli.out);
        }
        return Ok(cfg);
    }
    let command = cli.command.as_ref().ok_or("missing subcommand (or --config FILE)")?;
    let mut outputs = Outputs { report: display(&cli.out), ..Outputs::default() };
    let job = match command {
        Command::Certify(a) => {
            let system = a.system.load()?;
            let d = CertifyOptions::default();
            let options = CertifyOptions {
                starts: a.starts.unwrap_or(d.starts),
                margin_tol: a.margin_tol.unwrap_or(d.margin_tol),
                fail_tol: a.fail_tol.unwrap_or(d.fail_tol),
                tol: a.tol.unwrap_or(d.tol),
                max_iters: a.max_iters.unwrap_or(d.max_iters),
                affine_radius: a.affine_radius.unwrap_or(d.affine_radius),
            };
            let region = match (&a.region, a.radius) {
                (Some(path), _) => Some(read_region(path)?),
                (None, Some(r)) => Some(Region::ball(real_dim(&system), r)),
                (None, None) => None,
            };
            let radii = if a.check == Check::IcisLocal { a.radii.clone() } else { Vec::new() };
            Job::Certify { system, check: a.check, region, radii, normal: a.normal.clone(), options }
        }
        Command::Sample(a) => {
            let system = a.system.load()?;
            let n = real_dim(&system);
            let region = match &a.region {
                Some(path) => read_region(path)?,
                None => Region::Ball { center: a.center.clone().unwrap_or_else(|| vec![0.0; n]), radius: a.radius },
            };
            outputs.cloud = display(&a.cloud_out);
            Job::Sample { system, region, count: a.count, options: a.sampler.options() }
        }
        Command::Lne(a) => {
            let system = a.system.load()?;
            let n = real_dim(&system);
            let scan = ScanOptions {
                count: a.count,
                eps_factor: a.eps_factor,
                pair_budget: a.pair_budget,
                region: match &a.cylinder {
                    Some(axes) => ScanRegion::Cylinder { axes: axes.clone() },
                    None => ScanRegion::Ball,
                },
                half_space: a.half_space.clone(),
                extra_points: if a.apex { vec![vec![0.0; n]] } else { Vec::new() },
                sample: a.sampler.options(),
            };
            outputs.table = display(&a.csv);
            Job::Lne { system, radii: a.radii.clone(), scan }
        }
        Command::Collar(a) => {
            let system = a.system.load()?;
            let n = real_dim(&system);
            let d = CollarOptions::default();
            let options = CollarOptions {
                floor: a.floor.unwrap_or(d.floor),
                tol: a.tol.unwrap_or(d.tol),
                link_count: a.link_count.unwrap_or(d.link_count),
                ..d
            };
            Job::Collar {
                system,
                center: a.center.clone().unwrap_or_else(|| vec![0.0; n]),
                r0: a.r0,
                radii: a.radii.clone(),
                options,
            }
        }
        Command::Maps(a) => {
            outputs.cloud = display(&a.cloud_out);
            Job::Maps { map: a.apply, cloud: read_cloud(&a.input)? }
        }
        Command::Demo(a) => {
            outputs.dir = display(&a.out_dir);
            Job::Demo
        }
    };
    let mut cfg = RunConfig::new(cli.seed.unwrap_or(0), job);
    cfg.outputs = outputs;
    Ok(cfg)
}
