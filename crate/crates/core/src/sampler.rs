//! Newton-type projection onto real zero sets and seeded samplers built on it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::linalg::{dist2, norm, scale};
use crate::polyring::{NumericSystem, Poly, PolyError, PolySystem};
use crate::rng::{stream_rng, unit_vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectError {
    #[error("projection diverged (residual {residual:e})")]
    Diverged { last: Vec<f64>, residual: f64 },
    #[error("near-critical: singular Jacobian (residual {residual:e})")]
    NearCritical { last: Vec<f64>, residual: f64 },
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("region cannot generate start points: {0}")]
    BadRegion(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Move the result to a first-order closest point of the start.
    pub refine_foot: bool,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions { tol: 1e-10, max_iters: 100, refine_foot: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Norm of the tangential part of `x − x0`; zero at an exact foot point.
    pub stationarity: f64,
}

/// Projects `x0` onto `{sys = 0}` by damped minimum-norm Gauss–Newton, then
/// optionally solves the Lagrange system for the nearest point.
pub fn project_to_variety(x0: &[f64], sys: &NumericSystem, opts: &ProjectOptions) -> Result<Projection, ProjectError> {
    let mut proj = damped_newton(x0, sys, None, opts)?;
    if opts.refine_foot {
        if let Some(better) = refine_foot(x0, &proj.point, sys, opts.tol) {
            proj.point = better;
            proj.residual = sys.max_residual(&proj.point);
        }
    }
    proj.stationarity = stationarity(x0, &proj.point, sys);
    Ok(proj)
}

/// Same as [`project_to_variety`] without foot refinement, moving only the
/// coordinates where `free[k]` is true.
pub fn project_free(x0: &[f64], sys: &NumericSystem, free: &[bool], opts: &ProjectOptions) -> Result<Projection, ProjectError> {
    damped_newton(x0, sys, Some(free), opts)
}

fn merit(f: &[f64]) -> f64 {
    f.iter().map(|v| v * v).sum()
}

fn max_abs(f: &[f64]) -> f64 {
    f.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn masked_jacobian(sys: &NumericSystem, x: &[f64], free: Option<&[bool]>) -> DMatrix<f64> {
    let mut j = sys.jacobian(x);
    if let Some(mask) = free {
        for (k, &f) in mask.iter().enumerate() {
            if !f {
                j.column_mut(k).fill(0.0);
            }
        }
    }
    j
}

/// Step `−Jᵀ (J Jᵀ + μ I)⁻¹ f`, or `None` if the damped Gram matrix is singular.
fn lm_step(j: &DMatrix<f64>, f: &[f64], mu: f64) -> Option<Vec<f64>> {
    let p = j.nrows();
    let mut g = j * j.transpose();
    for i in 0..p {
        g[(i, i)] += mu;
    }
    let rhs = DVector::from_column_slice(f);
    let w = match g.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => g.lu().solve(&rhs)?,
    };
    let step = -(j.transpose() * w);
    if step.iter().all(|v| v.is_finite()) {
        Some(step.iter().cloned().collect())
    } else {
        None
    }
}

/// Undamped minimum-norm step `−J⁺ f`.
fn pinv_step(j: &DMatrix<f64>, f: &[f64]) -> Option<Vec<f64>> {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let step = svd.solve(&DVector::from_column_slice(f), 1e-15 * smax).ok()?;
    step.iter().all(|v| v.is_finite()).then(|| step.iter().map(|v| -v).collect())
}

fn nudge(x: &[f64], k: usize) -> Vec<f64> {
    let s = 1e-3 * norm(x).max(1.0);
    x.iter()
        .enumerate()
        .map(|(i, v)| v + s * (((i + 1) * (k + 1)) as f64 * 0.618_033_988_749_895).fract() - 0.5 * s)
        .collect()
}

fn damped_newton(
    x0: &[f64],
    sys: &NumericSystem,
    free: Option<&[bool]>,
    opts: &ProjectOptions,
) -> Result<Projection, ProjectError> {
    let mut x = x0.to_vec();
    let mut f = sys.values(&x);
    let mut m = merit(&f);
    let mut mu = 0.0;
    let mut nudges = 0;
    let mut iters = 0;
    while iters < opts.max_iters {
        if max_abs(&f) <= opts.tol {
            break;
        }
        iters += 1;
        let j = masked_jacobian(sys, &x, free);
        let scale_j = j.iter().map(|v| v * v).sum::<f64>().max(1e-300);
        let grad = j.transpose() * DVector::from_column_slice(&f);
        if grad.norm() <= 1e-14 * (1.0 + m.sqrt()) * scale_j.sqrt().max(1.0) || scale_j < 1e-280 {
            // stationary point of the merit function off the variety
            if nudges < 3 {
                x = nudge(&x, nudges);
                nudges += 1;
                f = sys.values(&x);
                m = merit(&f);
                continue;
            }
            return Err(ProjectError::NearCritical { residual: max_abs(&f), last: x });
        }
        let mut accepted = false;
        for _ in 0..30 {
            if let Some(step) = lm_step(&j, &f, mu * scale_j) {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
                let ft = sys.values(&trial);
                let mt = merit(&ft);
                if mt.is_finite() && mt < m {
                    x = trial;
                    f = ft;
                    m = mt;
                    mu = if mu < 1e-12 { 0.0 } else { mu / 10.0 };
                    accepted = true;
                    break;
                }
            }
            mu = if mu == 0.0 { 1e-10 } else { mu * 10.0 };
        }
        if !accepted {
            let j = masked_jacobian(sys, &x, free);
            let smin = j.clone().svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
            let residual = max_abs(&f);
            if smin <= 1e-10 * scale_j.sqrt().max(1.0) {
                return Err(ProjectError::NearCritical { last: x, residual });
            }
            return Err(ProjectError::Diverged { last: x, residual });
        }
    }
    let residual = max_abs(&f);
    if residual > opts.tol {
        return Err(ProjectError::Diverged { last: x, residual });
    }
    // polish: plain Gauss–Newton while the residual or the step keeps shrinking.
    // On non-reduced equations convergence is only linear and the residual can
    // sit at rounding level while the point still moves geometrically.
    let mut last_step = f64::INFINITY;
    for _ in 0..60 {
        let j = masked_jacobian(sys, &x, free);
        let Some(step) = pinv_step(&j, &f) else { break };
        let sn = norm(&step);
        let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        let ft = sys.values(&trial);
        let mt = merit(&ft);
        let shrinking = sn <= 0.75 * last_step && sn > 0.0 && mt <= 2.0 * m;
        if mt < 0.9 * m || shrinking {
            x = trial;
            f = ft;
            m = mt;
            last_step = sn;
        } else {
            break;
        }
    }
    Ok(Projection { residual: max_abs(&f), point: x, iterations: iters, stationarity: f64::NAN })
}

fn stationarity(x0: &[f64], x: &[f64], sys: &NumericSystem) -> f64 {
    let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    norm(&crate::linalg::project_tangent(&sys.jacobian(x), &d))
}

/// Newton on `x − x0 = Jᵀλ, f(x) = 0`, started from `x`. Returns the improved
/// point when it converges to a closer point on the variety.
fn refine_foot(x0: &[f64], x: &[f64], sys: &NumericSystem, tol: f64) -> Option<Vec<f64>> {
    let n = sys.n();
    let p = sys.p();
    let mut xk = x.to_vec();
    let j = sys.jacobian(&xk);
    let d = DVector::from_iterator(n, xk.iter().zip(x0).map(|(a, b)| a - b));
    let mut lam = j.transpose().svd(true, true).solve(&d, 1e-14).ok()?;
    for _ in 0..30 {
        let j = sys.jacobian(&xk);
        let f = sys.values(&xk);
        let d = DVector::from_iterator(n, xk.iter().zip(x0).map(|(a, b)| a - b));
        let r1 = &d - j.transpose() * &lam;
        let stat = norm(r1.as_slice());
        if stat <= tol && max_abs(&f) <= tol {
            break;
        }
        let mut k = DMatrix::zeros(n + p, n + p);
        let mut top = DMatrix::identity(n, n);
        for i in 0..p {
            top -= sys.hessian(i, &xk) * lam[i];
        }
        k.view_mut((0, 0), (n, n)).copy_from(&top);
        k.view_mut((0, n), (n, p)).copy_from(&(-j.transpose()));
        k.view_mut((n, 0), (p, n)).copy_from(&j);
        let mut rhs = DVector::zeros(n + p);
        rhs.rows_mut(0, n).copy_from(&(-r1));
        for i in 0..p {
            rhs[n + i] = -f[i];
        }
        let delta = k.lu().solve(&rhs)?;
        for i in 0..n {
            xk[i] += delta[i];
        }
        for i in 0..p {
            lam[i] += delta[n + i];
        }
        if !xk.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    let ok = sys.max_residual(&xk) <= tol && dist2(&xk, x0) <= dist2(x, x0) * (1.0 + 1e-12) + tol * tol;
    ok.then_some(xk)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    pub tol: f64,
    pub shell_tol: f64,
    pub max_iters: usize,
    /// Candidates projected per requested point before thinning.
    pub oversample: usize,
    /// Attempt budget per requested point.
    pub max_attempts: usize,
    /// Rounds of tangent jitter around the selection that fill sparse areas.
    pub refine_rounds: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { tol: 1e-10, shell_tol: 1e-8, max_iters: 100, oversample: 4, max_attempts: 20, refine_rounds: 6 }
    }
}

impl SampleOptions {
    fn project_options(&self) -> ProjectOptions {
        ProjectOptions { tol: self.tol, max_iters: self.max_iters, refine_foot: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutcome {
    pub cloud: PointCloud,
    pub warnings: Vec<String>,
    pub attempts: usize,
    pub successes: usize,
}

/// Sampling domain in ℝᴺ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `|x_axes| ≤ radius`, other coordinates free. Start points fix the axis
    /// coordinates and solve for the rest, drawn in `[−height, height]`.
    Cylinder { axes: Vec<usize>, radius: f64, height: f64 },
    /// `⟨normal, x⟩ ≥ offset`
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Intersection { parts: Vec<Region> },
}

impl Region {
    pub fn ball(n: usize, radius: f64) -> Region {
        Region::Ball { center: vec![0.0; n], radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => dist2(x, center) <= radius * radius,
            Region::Annulus { center, inner, outer } => {
                let d = dist2(x, center).sqrt();
                d >= *inner && d <= *outer
            }
            Region::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v <= b),
            Region::Cylinder { axes, radius, .. } => axes.iter().map(|&a| x[a] * x[a]).sum::<f64>() <= radius * radius,
            Region::HalfSpace { normal, offset } => crate::linalg::dot(normal, x) >= *offset,
            Region::Intersection { parts } => parts.iter().all(|r| r.contains(x)),
        }
    }

    fn pinned_axes(&self) -> Option<&[usize]> {
        match self {
            Region::Cylinder { axes, .. } => Some(axes),
            Region::Intersection { parts } => parts.first().and_then(Region::pinned_axes),
            _ => None,
        }
    }

    fn random_start<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>, SampleError> {
        match self {
            Region::Ball { center, radius } => {
                let u = unit_vector(rng, n);
                let t = radius * rng.random::<f64>().powf(1.0 / n as f64);
                Ok(center.iter().zip(&u).map(|(c, v)| c + t * v).collect())
            }
            Region::Annulus { center, inner, outer } => {
                let u = unit_vector(rng, n);
                let t = inner + (outer - inner) * rng.random::<f64>();
                Ok(center.iter().zip(&u).map(|(c, v)| c + t * v).collect())
            }
            Region::Box { lo, hi } => Ok(lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()),
            Region::Cylinder { axes, radius, height } => {
                let mut x: Vec<f64> = (0..n).map(|_| height * (2.0 * rng.random::<f64>() - 1.0)).collect();
                let u = unit_vector(rng, axes.len());
                let t = radius * rng.random::<f64>().powf(1.0 / axes.len() as f64);
                for (k, &a) in axes.iter().enumerate() {
                    x[a] = t * u[k];
                }
                Ok(x)
            }
            Region::HalfSpace { .. } => Err(SampleError::BadRegion("half-space is unbounded".into())),
            Region::Intersection { parts } => match parts.first() {
                Some(first) => first.random_start(rng, n),
                None => Err(SampleError::BadRegion("empty intersection".into())),
            },
        }
    }
}

/// Greedy farthest-point order over `points`, starting at index `start`.
/// Stops after `k` picks or when the next pick is within `min_gap` of a chosen point.
pub fn farthest_point_subset(points: &[Vec<f64>], k: usize, start: usize, min_gap: f64) -> Vec<usize> {
    if points.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut chosen = vec![start];
    let mut d: Vec<f64> = points.iter().map(|p| dist2(p, &points[start])).collect();
    while chosen.len() < k {
        let (best, &bd) = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .expect("non-empty");
        if bd.sqrt() <= min_gap {
            break;
        }
        chosen.push(best);
        let pb = &points[best];
        d.par_iter_mut().zip(points.par_iter()).for_each(|(di, p)| {
            let v = dist2(p, pb);
            if v < *di {
                *di = v;
            }
        });
    }
    chosen
}

struct Candidate {
    point: Vec<f64>,
    residual: f64,
}

/// Stream index for refinement attempt `k` of round `round`.
fn refine_stream(round: usize, k: usize) -> u64 {
    (1u64 << 40) + ((round as u64) << 32) + k as u64
}

/// Runs attempts in batches until enough candidates are found or the budget is
/// spent, densifies the pool around the current selection, then thins it by
/// farthest-point selection.
fn run_sampler<F, G>(
    count: usize,
    opts: &SampleOptions,
    scale_len: f64,
    attempt: F,
    refine: G,
) -> (Vec<Candidate>, usize, usize, Vec<String>)
where
    F: Fn(u64) -> Option<Candidate> + Sync,
    G: Fn(u64, &[f64], f64) -> Option<Candidate> + Sync,
{
    let want = count * opts.oversample.max(1);
    let budget = count * opts.max_attempts.max(opts.oversample.max(1));
    let min_gap = 1e-7 * scale_len.max(1.0);
    let mut found: Vec<Candidate> = Vec::new();
    let mut attempts = 0usize;
    while found.len() < want && attempts < budget {
        let batch = (want - found.len()).max(16).min(budget - attempts);
        let got: Vec<Option<Candidate>> =
            (attempts..attempts + batch).into_par_iter().map(|i| attempt(i as u64)).collect();
        attempts += batch;
        found.extend(got.into_iter().flatten());
    }
    let points = |found: &[Candidate]| -> Vec<Vec<f64>> { found.iter().map(|c| c.point.clone()).collect() };
    for round in 0..opts.refine_rounds {
        let pts = points(&found);
        let keep = farthest_point_subset(&pts, count, 0, min_gap);
        if keep.len() < 2 {
            break;
        }
        let sel: Vec<Vec<f64>> = keep.iter().map(|&i| pts[i].clone()).collect();
        let step = 2.0 * crate::metrics::median_nn_distance(&sel);
        if !(step > min_gap) {
            break;
        }
        let got: Vec<Option<Candidate>> =
            sel.par_iter().enumerate().map(|(k, p)| refine(refine_stream(round, k), p, step)).collect();
        attempts += sel.len();
        found.extend(got.into_iter().flatten());
    }
    let successes = found.len();
    let mut warnings = Vec::new();
    let keep = farthest_point_subset(&points(&found), count, 0, min_gap);
    let mut keep_sorted = keep.clone();
    keep_sorted.sort_unstable();
    let mut out: Vec<Option<Candidate>> = found.into_iter().map(Some).collect();
    let chosen: Vec<Candidate> = keep_sorted.iter().map(|&i| out[i].take().expect("unique index")).collect();
    if chosen.len() < count {
        warnings.push(if successes == 0 {
            format!("no points found in {attempts} attempts (possibly empty real locus)")
        } else {
            format!("only {} distinct points of {count} requested ({successes} successes in {attempts} attempts)", chosen.len())
        });
    }
    (chosen, attempts, successes, warnings)
}

/// `x` moved by `step` along a random direction tangent to `{sys = 0}`.
fn tangent_jitter(sys: &NumericSystem, x: &[f64], step: f64, stream: u64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    let g = crate::rng::gaussian_vec(&mut rng, x.len());
    let t = crate::linalg::project_tangent(&sys.jacobian(x), &g);
    let nt = norm(&t);
    let d = if nt > 1e-12 { scale(&t, 1.0 / nt) } else { unit_vector(&mut rng, x.len()) };
    let len = step * (0.25 + rng.random::<f64>());
    x.iter().zip(&d).map(|(a, b)| a + len * b).collect()
}

/// Points of `X ∩ S(center, r)` from random sphere points projected onto the
/// augmented system `{f, |x − center|² − r²}`.
pub fn sample_sphere(
    system: &PolySystem,
    center: &[f64],
    r: f64,
    count: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<SampleOutcome, SampleError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(SampleError::BadRadius(r));
    }
    let real = system.to_real()?;
    let n = real.n();
    let base = real.numeric()?;
    let aug = real.with_extra(vec![Poly::sphere(center, r)?])?.numeric()?;
    let popts = opts.project_options();
    let at_origin = center.iter().all(|v| *v == 0.0);
    let accept = |x0: &[f64]| {
        let p = damped_newton(x0, &aug, None, &popts).ok()?;
        let residual = base.max_residual(&p.point);
        let off = (dist2(&p.point, center).sqrt() - r).abs();
        (residual <= opts.tol && off <= opts.shell_tol).then_some(Candidate { point: p.point, residual })
    };
    let (chosen, attempts, successes, warnings) = run_sampler(
        count,
        opts,
        r,
        |i| {
            let mut rng = stream_rng(seed, i);
            let u = unit_vector(&mut rng, n);
            let x0: Vec<f64> = center.iter().zip(&u).map(|(c, v)| c + r * v).collect();
            accept(&x0)
        },
        |i, x, step| accept(&tangent_jitter(&aug, x, step, i, seed)),
    );
    let mut cloud = PointCloud::empty(n, opts.tol, opts.shell_tol);
    cloud.header.system_hash = Some(system.hash());
    cloud.header.seed = Some(seed);
    for c in chosen {
        cloud.push(c.point, c.residual, at_origin.then_some(r));
    }
    Ok(SampleOutcome { cloud, warnings, attempts, successes })
}

/// Points of the shell `X_r = X ∩ S(0, r)`.
pub fn sample_shell(
    system: &PolySystem,
    r: f64,
    count: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<SampleOutcome, SampleError> {
    let n = system.to_real()?.n();
    sample_sphere(system, &vec![0.0; n], r, count, seed, opts)
}

/// Points of `X ∩ region`.
pub fn sample_region(
    system: &PolySystem,
    region: &Region,
    count: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<SampleOutcome, SampleError> {
    let real = system.to_real()?;
    let n = real.n();
    let sys = real.numeric()?;
    let popts = opts.project_options();
    let free: Option<Vec<bool>> = region.pinned_axes().map(|axes| (0..n).map(|k| !axes.contains(&k)).collect());
    // fail fast on regions without a start distribution
    region.random_start(&mut stream_rng(seed, 0), n)?;
    let scale_len = region_scale(region);
    let accept = |x0: &[f64], pin: bool| {
        let p = match (&free, pin) {
            (Some(mask), true) => project_free(x0, &sys, mask, &popts).or_else(|_| damped_newton(x0, &sys, None, &popts)),
            _ => damped_newton(x0, &sys, None, &popts),
        }
        .ok()?;
        (p.residual <= opts.tol && region.contains(&p.point)).then_some(Candidate { point: p.point, residual: p.residual })
    };
    let (chosen, attempts, successes, warnings) = run_sampler(
        count,
        opts,
        scale_len,
        |i| {
            let mut rng = stream_rng(seed, i);
            accept(&region.random_start(&mut rng, n).ok()?, true)
        },
        |i, x, step| accept(&tangent_jitter(&sys, x, step, i, seed), false),
    );
    let mut cloud = PointCloud::empty(n, opts.tol, opts.shell_tol);
    cloud.header.system_hash = Some(system.hash());
    cloud.header.seed = Some(seed);
    for c in chosen {
        cloud.push(c.point, c.residual, None);
    }
    Ok(SampleOutcome { cloud, warnings, attempts, successes })
}

fn region_scale(region: &Region) -> f64 {
    match region {
        Region::Ball { radius, .. } => *radius,
        Region::Annulus { outer, .. } => *outer,
        Region::Box { lo, hi } => norm(&lo.iter().zip(hi).map(|(a, b)| b - a).collect::<Vec<_>>()),
        Region::Cylinder { radius, height, .. } => radius.max(*height),
        Region::HalfSpace { .. } => 1.0,
        Region::Intersection { parts } => parts.iter().map(region_scale).fold(1.0, f64::max),
    }
}

/// Rescales `x` radially about `center` onto radius `r` (for exact cones).
pub fn radial_snap(x: &[f64], center: &[f64], r: f64) -> Vec<f64> {
    let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    let s = scale(&d, r / norm(&d));
    center.iter().zip(&s).map(|(c, v)| c + v).collect()
}
