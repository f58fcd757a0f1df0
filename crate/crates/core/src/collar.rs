//! Radial collar flow near a point of a variety and the cone-model distortion probe.
//!
//! Tangent vectors are measured in the product metric `h = dr² + |du|²` of the
//! blow-up coordinates `(r, u)`, not the induced Euclidean metric `dr² + r²|du|²`;
//! distortion constants depend on this choice.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomaps::{single_linkage, BlowupChart, GeoError};
use crate::linalg::{dist, dot, norm, null_space};
use crate::metrics::median_nn_distance;
use crate::polyring::{NumericSystem, PolyError, PolySystem};
use crate::sampler::{sample_sphere, SampleError, SampleOptions};

#[derive(Debug, Error)]
pub enum CollarError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("on singular stratum: Jacobian rank deficient at {0:?}")]
    Singular(Vec<f64>),
    #[error("collar condition violated: |ξ|_h = {norm:e} below floor {floor}")]
    Violated { norm: f64, floor: f64 },
    #[error("target radius {target} outside (0, {r0}]")]
    OutOfCollar { target: f64, r0: f64 },
    #[error("flow failed near radius {radius}: {msg}")]
    Flow { radius: f64, last: Vec<f64>, msg: String },
    #[error("no collar radius found down to {0:e}")]
    NoCollar(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarOptions {
    /// Lower bound on `|ξ|_h` required of the collar.
    pub floor: f64,
    pub tol: f64,
    pub r_tol: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub link_count: usize,
    pub max_halvings: usize,
    /// Single-linkage threshold for link components, as a multiple of the
    /// median nearest-neighbour distance of the link directions.
    pub cluster_factor: f64,
}

impl Default for CollarOptions {
    fn default() -> Self {
        CollarOptions {
            floor: 0.1,
            tol: 1e-10,
            r_tol: 1e-8,
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 20_000,
            link_count: 64,
            max_halvings: 20,
            cluster_factor: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollarVector {
    /// `υ = ξ / |ξ|²_h`
    pub v: Vec<f64>,
    pub xi_norm: f64,
    /// `dr(υ)`, equal to 1 up to solve accuracy.
    pub dr: f64,
}

/// `υ(x)` for the variety `sys = 0` in the chart around `chart.center`.
pub fn collar_field(sys: &NumericSystem, chart: &BlowupChart, x: &[f64], floor: f64) -> Result<CollarVector, CollarError> {
    let (r, u) = chart.blowup_coords(x)?;
    let n = x.len();
    let j = sys.jacobian(x);
    let sv = j.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if sv.len() < j.nrows() || smin <= 1e-10 * smax.max(1.0) {
        return Err(CollarError::Singular(x.to_vec()));
    }
    let b = null_space(&j);
    let k = b.ncols();
    let uu = DVector::from_column_slice(&u);
    // h = u uᵀ + (I − u uᵀ) / r²
    let m = &uu * uu.transpose() + (DMatrix::identity(n, n) - &uu * uu.transpose()) / (r * r);
    let gh = b.transpose() * &m * &b;
    let a = b.transpose() * &uu;
    let c = gh.clone().cholesky().map(|ch| ch.solve(&a)).or_else(|| gh.lu().solve(&a));
    let c = c.ok_or_else(|| CollarError::Singular(x.to_vec()))?;
    let xi2 = dot(a.as_slice(), c.as_slice());
    let xi_norm = xi2.max(0.0).sqrt();
    if !(xi_norm >= floor) || k == 0 {
        return Err(CollarError::Violated { norm: xi_norm, floor });
    }
    let v: Vec<f64> = (&b * c / xi2).iter().cloned().collect();
    let dr = dot(&v, &u);
    Ok(CollarVector { v, xi_norm, dr })
}

/// Newton projection onto `{f = 0, |x − a| = r}`.
fn project_level(sys: &NumericSystem, center: &[f64], r: f64, x0: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = x0.len();
    let p = sys.p();
    let mut x = x0.to_vec();
    let eval = |x: &[f64]| {
        let mut f = sys.values(x);
        let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        f.push(d2 - r * r);
        f
    };
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let f = eval(&x);
        let res = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if res <= 1e-3 * tol || res >= best {
            break;
        }
        best = res;
        let jf = sys.jacobian(&x);
        let j = DMatrix::from_fn(p + 1, n, |i, k| if i < p { jf[(i, k)] } else { 2.0 * (x[k] - center[k]) });
        let svd = j.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let step = svd.solve(&DVector::from_column_slice(&f), 1e-14 * smax).ok()?;
        for k in 0..n {
            x[k] -= step[k];
        }
    }
    let f = eval(&x);
    let ok = sys.max_residual(&x) <= tol && f[p].abs() <= 2.0 * r * 1e-9;
    ok.then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flowline {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub r_start: f64,
    pub r_end: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Largest `|r(x) − t|` over accepted steps.
    pub max_level_error: f64,
    pub max_residual: f64,
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `dx/dr = υ(x)` from `x0` to radius `r_target` with adaptive
/// Dormand–Prince steps, re-projecting onto `X ∩ S(a, r)` after every step.
pub fn flow_to_radius(
    sys: &NumericSystem,
    chart: &BlowupChart,
    x0: &[f64],
    r_target: f64,
    opts: &CollarOptions,
) -> Result<Flowline, CollarError> {
    if !(r_target > 0.0) || r_target > chart.collar_radius * (1.0 + 1e-12) {
        return Err(CollarError::OutOfCollar { target: r_target, r0: chart.collar_radius });
    }
    let (r_start, _) = chart.blowup_coords(x0)?;
    let mut x = x0.to_vec();
    let mut t = r_start;
    let mut line = Flowline {
        start: x0.to_vec(),
        end: x0.to_vec(),
        r_start,
        r_end: r_start,
        steps: 0,
        rejected: 0,
        max_level_error: 0.0,
        max_residual: sys.max_residual(x0),
    };
    let span = r_target - r_start;
    if span == 0.0 {
        return Ok(line);
    }
    let dir = span.signum();
    let mut h = dir * (0.05 * span.abs()).max(1e-6 * r_start.abs().max(r_target)).min(0.1 * t.min(r_target).max(1e-12));
    let field = |y: &[f64]| collar_field(sys, chart, y, 0.0).map(|c| c.v);
    let fail = |t: f64, x: &[f64], msg: String| CollarError::Flow { radius: t, last: x.to_vec(), msg };
    let mut k0 = field(&x).map_err(|e| fail(t, &x, e.to_string()))?;
    while (r_target - t) * dir > 0.0 {
        if line.steps + line.rejected >= opts.max_steps {
            return Err(fail(t, &x, "step budget exhausted".into()));
        }
        if (r_target - t).abs() <= 1e-14 * t.abs() {
            // remaining span is rounding noise
            let Some(xp) = project_level(sys, &chart.center, r_target, &x, opts.tol) else {
                return Err(fail(t, &x, "final projection failed".into()));
            };
            line.max_level_error = line.max_level_error.max((dist(&xp, &chart.center) - r_target).abs());
            line.max_residual = line.max_residual.max(sys.max_residual(&xp));
            x = xp;
            t = r_target;
            break;
        }
        if (t + h - r_target) * dir > 0.0 {
            h = r_target - t;
        }
        if h.abs() < 1e-14 * t.abs().max(1e-300) {
            return Err(fail(t, &x, "step size collapsed".into()));
        }
        let mut ks: Vec<Vec<f64>> = vec![k0.clone()];
        let mut stage_err = None;
        for s in 1..7 {
            let y: Vec<f64> = (0..x.len()).map(|i| x[i] + h * (0..s).map(|m| A[s][m] * ks[m][i]).sum::<f64>()).collect();
            let _ = C[s];
            match field(&y) {
                Ok(k) => ks.push(k),
                Err(e) => {
                    stage_err = Some(e.to_string());
                    break;
                }
            }
        }
        if stage_err.is_some() {
            line.rejected += 1;
            h *= 0.25;
            continue;
        }
        let y5: Vec<f64> = (0..x.len()).map(|i| x[i] + h * (0..7).map(|m| B5[m] * ks[m][i]).sum::<f64>()).collect();
        let y4: Vec<f64> = (0..x.len()).map(|i| x[i] + h * (0..7).map(|m| B4[m] * ks[m][i]).sum::<f64>()).collect();
        let scale = opts.atol + opts.rtol * norm(&x).max(norm(&y5));
        let err = dist(&y5, &y4) / scale;
        if !(err <= 1.0) {
            line.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            continue;
        }
        let t_new = t + h;
        let Some(xp) = project_level(sys, &chart.center, t_new, &y5, opts.tol) else {
            line.rejected += 1;
            h *= 0.5;
            continue;
        };
        let level = (dist(&xp, &chart.center) - t_new).abs();
        let residual = sys.max_residual(&xp);
        if residual > opts.tol || level > opts.r_tol {
            line.rejected += 1;
            h *= 0.5;
            continue;
        }
        x = xp;
        t = t_new;
        line.steps += 1;
        line.max_level_error = line.max_level_error.max(level);
        line.max_residual = line.max_residual.max(residual);
        if (r_target - t) * dir > 0.0 {
            k0 = field(&x).map_err(|e| fail(t, &x, e.to_string()))?;
        }
        let grow = if err > 0.0 { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
        h *= grow;
    }
    line.end = x;
    line.r_end = t;
    Ok(line)
}

/// Collar around `chart.center` on the variety of a real system, with link samples.
#[derive(Clone, Debug)]
pub struct CollarFlow {
    pub chart: BlowupChart,
    pub system: PolySystem,
    num: NumericSystem,
    pub link_samples: Vec<Vec<f64>>,
    pub link_components: Vec<usize>,
    pub opts: CollarOptions,
    pub halvings: usize,
}

impl CollarFlow {
    /// Starts at `r0` and halves until every link sample admits the collar field
    /// with `|ξ|_h ≥ floor`.
    pub fn new(system: &PolySystem, center: Vec<f64>, r0: f64, opts: CollarOptions, seed: u64) -> Result<Self, CollarError> {
        let real = system.to_real()?;
        let num = real.numeric()?;
        let mut r = r0;
        let sample_opts = SampleOptions { tol: opts.tol, ..SampleOptions::default() };
        for halvings in 0..=opts.max_halvings {
            let chart = BlowupChart::new(center.clone(), r)?;
            let out = sample_sphere(&real, &center, r, opts.link_count, seed, &sample_opts)?;
            let ok = !out.cloud.is_empty()
                && out.cloud.points.par_iter().all(|x| collar_field(&num, &chart, x, opts.floor).is_ok());
            if ok {
                let dirs: Vec<Vec<f64>> = out
                    .cloud
                    .points
                    .iter()
                    .map(|x| chart.blowup_coords(x).map(|(_, u)| u))
                    .collect::<Result<_, _>>()?;
                let threshold = opts.cluster_factor * median_nn_distance(&dirs);
                let link_components = single_linkage(&dirs, threshold);
                return Ok(CollarFlow {
                    chart,
                    system: real,
                    num,
                    link_samples: out.cloud.points,
                    link_components,
                    opts,
                    halvings,
                });
            }
            r *= 0.5;
        }
        Err(CollarError::NoCollar(r))
    }

    pub fn r0(&self) -> f64 {
        self.chart.collar_radius
    }

    pub fn numeric(&self) -> &NumericSystem {
        &self.num
    }

    pub fn field(&self, x: &[f64]) -> Result<CollarVector, CollarError> {
        collar_field(&self.num, &self.chart, x, self.opts.floor)
    }

    pub fn flow(&self, x0: &[f64], r_target: f64) -> Result<Flowline, CollarError> {
        flow_to_radius(&self.num, &self.chart, x0, r_target, &self.opts)
    }

    /// Link directions `u_k` of the samples at radius `r0`.
    pub fn link_directions(&self) -> Vec<Vec<f64>> {
        self.link_samples
            .iter()
            .map(|x| self.chart.blowup_coords(x).map(|(_, u)| u).expect("samples avoid the center"))
            .collect()
    }

    pub fn num_components(&self) -> usize {
        self.link_components.iter().copied().max().map(|m| m + 1).unwrap_or(0)
    }

    /// Compares the cone model `a + r u_k` with its image `φ₀(r, u_k)`, the flow of
    /// the `k`-th link sample down to radius `r`, over all pairs of probe points.
    pub fn phi0_probe(&self, radii: &[f64]) -> Result<DistortionReport, CollarError> {
        let dirs = self.link_directions();
        let jobs: Vec<(usize, f64)> = (0..dirs.len()).flat_map(|k| radii.iter().map(move |&r| (k, r))).collect();
        let flows: Vec<Result<Flowline, CollarError>> =
            jobs.par_iter().map(|&(k, r)| self.flow(&self.link_samples[k], r)).collect();
        let mut lines = Vec::with_capacity(flows.len());
        for (f, &(k, r)) in flows.into_iter().zip(&jobs) {
            lines.push(f.map_err(|e| CollarError::Flow {
                radius: r,
                last: self.link_samples[k].clone(),
                msg: format!("link sample {k}: {e}"),
            })?);
        }
        let model: Vec<Vec<f64>> = jobs.iter().map(|&(k, r)| self.chart.blowdown(r, &dirs[k])).collect();
        let image: Vec<&Vec<f64>> = lines.iter().map(|l| &l.end).collect();
        let comp: Vec<usize> = jobs.iter().map(|&(k, _)| self.link_components[k]).collect();
        let m = jobs.len();
        let per: Vec<(f64, f64, f64, f64, usize)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let (mut sup, mut inf) = (0.0f64, f64::INFINITY);
                let (mut csup, mut cinf, mut cn) = (0.0f64, f64::INFINITY, 0usize);
                for j in i + 1..m {
                    let d = dist(&model[i], &model[j]);
                    if d == 0.0 {
                        continue;
                    }
                    let q = dist(image[i], image[j]) / d;
                    sup = sup.max(q);
                    inf = inf.min(q);
                    if comp[i] != comp[j] {
                        csup = csup.max(q);
                        cinf = cinf.min(q);
                        cn += 1;
                    }
                }
                (sup, inf, csup, cinf, cn)
            })
            .collect();
        let sup = per.iter().map(|p| p.0).fold(0.0, f64::max);
        let inf = per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let radius_error = lines
            .iter()
            .zip(&jobs)
            .map(|(l, &(_, r))| (dist(&l.end, &self.chart.center) - r).abs())
            .fold(0.0, f64::max);
        let cross_pairs: usize = per.iter().map(|p| p.4).sum();
        let cross = (cross_pairs > 0).then(|| {
            let delta_link = separation(&dirs, &self.link_components);
            let image_dirs: Vec<Vec<f64>> = lines
                .iter()
                .map(|l| self.chart.blowup_coords(&l.end).map(|(_, u)| u).expect("flow stays off the center"))
                .collect();
            let delta_image = separation(&image_dirs, &comp);
            let min_ratio = per.iter().map(|p| p.3).fold(f64::INFINITY, f64::min);
            let max_ratio = per.iter().map(|p| p.2).fold(0.0, f64::max);
            let lower = 0.5 * delta_image;
            let upper = 2.0 / delta_link;
            CrossComponent {
                pairs: cross_pairs,
                min_ratio,
                max_ratio,
                delta_link,
                delta_image,
                lower_bound: lower,
                upper_bound: upper,
                holds: min_ratio >= lower * (1.0 - 1e-9) && max_ratio <= upper * (1.0 + 1e-9),
            }
        });
        Ok(DistortionReport {
            r0: self.r0(),
            radii: radii.to_vec(),
            link_samples: dirs.len(),
            components: self.num_components(),
            sup,
            inf,
            distortion: sup / inf,
            pairs: m * (m - 1) / 2,
            radius_error,
            max_level_error: lines.iter().map(|l| l.max_level_error).fold(0.0, f64::max),
            max_residual: lines.iter().map(|l| l.max_residual).fold(0.0, f64::max),
            cross,
            flowlines: lines
                .iter()
                .zip(&jobs)
                .map(|(l, &(k, r))| FlowDiagnostics {
                    link_index: k,
                    radius: r,
                    steps: l.steps,
                    rejected: l.rejected,
                    max_level_error: l.max_level_error,
                    max_residual: l.max_residual,
                })
                .collect(),
        })
    }
}

/// Smallest distance between points carrying different labels.
fn separation(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if labels[i] != labels[j] {
                best = best.min(dist(&points[i], &points[j]));
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub link_index: usize,
    pub radius: f64,
    pub steps: usize,
    pub rejected: usize,
    pub max_level_error: f64,
    pub max_residual: f64,
}

/// Ratios `|φ₀(p) − φ₀(q)| / |p − q|` between pairs in different link components,
/// with the bounds `δ_image / 2 ≤ ratio ≤ 2 / δ_link`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossComponent {
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub delta_link: f64,
    pub delta_image: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub r0: f64,
    pub radii: Vec<f64>,
    pub link_samples: usize,
    pub components: usize,
    pub sup: f64,
    pub inf: f64,
    pub distortion: f64,
    pub pairs: usize,
    /// Largest `| |φ₀(r u) − a| − r |`.
    pub radius_error: f64,
    pub max_level_error: f64,
    pub max_residual: f64,
    pub cross: Option<CrossComponent>,
    pub flowlines: Vec<FlowDiagnostics>,
}
