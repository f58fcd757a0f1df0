//! Numeric certificates for smoothness, link smoothness, gradient bounds,
//! transversality at infinity, affine traces and isolated singularities.
//!
//! A pass is a margin over a finite multistart search, not a proof.

pub mod minimize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::dist;
use crate::polyring::{rational_from_f64, Poly, PolyError, PolySystem, SystemJson, FORMAT_VERSION};
use crate::rng::{stream_rng, unit_vector};
use crate::sampler::{sample_region, sample_sphere, Region, SampleError, SampleOptions};

pub use minimize::{minimize, multistart, LocalMin, Manifold, MinimizeOptions, Objective};

const IRREDUCIBILITY_NOTE: &str = "irreducibility is not checked; the verdict covers the smoothness and transversality conditions only";
const MAX_WITNESSES: usize = 32;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("input must be homogeneous")]
    NotHomogeneous,
    #[error("not a germ at the origin: equation {0} does not vanish at 0")]
    NotGerm(usize),
    #[error("need p ≤ n, got p = {p}, n = {n}")]
    Shape { p: usize, n: usize },
    #[error("hyperplane normal must be non-zero with {0} entries")]
    BadNormal(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub starts: usize,
    pub margin_tol: f64,
    pub fail_tol: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Radius of the ball on which affine smoothness is checked.
    pub affine_radius: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { starts: 256, margin_tol: 1e-6, fail_tol: 1e-9, tol: 1e-10, max_iters: 200, affine_radius: 8.0 }
    }
}

impl CertifyOptions {
    fn sample_options(&self) -> SampleOptions {
        SampleOptions { tol: self.tol, refine_rounds: 0, ..SampleOptions::default() }
    }

    fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions { max_iters: self.max_iters, floor: 1e-3 * self.fail_tol, ..MinimizeOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Wedge norm of the objective rows (plus constant rows).
    Wedge,
    /// Euclidean norm of the objective values.
    ResidualNorm,
}

/// Everything needed to re-evaluate a witness from the serialized certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub kind: ProbeKind,
    pub objective: SystemJson,
    pub pad: usize,
    pub extra_rows: Vec<Vec<f64>>,
    pub constraints: Option<SystemJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertWitness {
    pub point: Vec<f64>,
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub margin_tol: f64,
    pub fail_tol: f64,
    pub residual_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub starts: usize,
    pub max_iters: usize,
    pub probes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub format_version: u32,
    pub check: String,
    pub status: Status,
    /// The searched set has no real points (a pass of the vacuous kind).
    pub empty_real_locus: bool,
    /// Smallest probed value: the certified margin on pass.
    pub margin: Option<f64>,
    pub witness: Option<CertWitness>,
    /// Further distinct failure witnesses.
    pub witnesses: Vec<CertWitness>,
    pub constants: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    pub budget: Budget,
    pub seed: u64,
    pub probe: Option<Probe>,
    pub notes: Vec<String>,
    pub sub: Vec<Certificate>,
}

impl Certificate {
    fn blank(check: &str, status: Status, opts: &CertifyOptions, seed: u64) -> Self {
        Certificate {
            format_version: FORMAT_VERSION,
            check: check.to_string(),
            status,
            empty_real_locus: false,
            margin: None,
            witness: None,
            witnesses: Vec::new(),
            constants: BTreeMap::new(),
            tolerances: Tolerances { margin_tol: opts.margin_tol, fail_tol: opts.fail_tol, residual_tol: opts.tol },
            budget: Budget { starts: opts.starts, max_iters: opts.max_iters, probes: 0 },
            seed,
            probe: None,
            notes: Vec::new(),
            sub: Vec::new(),
        }
    }

    pub fn find(&self, check: &str) -> Option<&Certificate> {
        if self.check == check {
            return Some(self);
        }
        self.sub.iter().find_map(|c| c.find(check))
    }
}

/// `√det(J Jᵀ)` of the real Jacobian of `system` at `x`.
pub fn wedge_norm(system: &PolySystem, x: &[f64]) -> Result<f64, CertifyError> {
    let sys = system.numeric()?;
    Ok(crate::linalg::wedge_norm_rows(&sys.jacobian(x)))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

struct ProbeSpec<'a> {
    check: &'a str,
    objective: &'a PolySystem,
    pad: usize,
    extra_rows: Vec<Vec<f64>>,
    constraints: Option<&'a PolySystem>,
    region: Option<Region>,
    kind: ProbeKind,
}

/// Multistart minimization of the probe value and the pass / fail / inconclusive rule.
fn run_probe(spec: ProbeSpec, starts: &[Vec<f64>], opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    let obj_num = spec.objective.numeric()?;
    let objective = match spec.kind {
        ProbeKind::Wedge => Objective::Wedge { sys: obj_num, pad: spec.pad, extra_rows: spec.extra_rows.clone() },
        ProbeKind::ResidualNorm => Objective::SumSquares { sys: obj_num },
    };
    let constraints = match spec.constraints {
        Some(c) => Some(c.numeric()?),
        None => None,
    };
    let manifold = Manifold { constraints, region: spec.region.clone(), tol: opts.tol };
    let mins = multistart(&objective, &manifold, starts, &opts.minimize_options());
    let mut cert = Certificate::blank(spec.check, Status::Inconclusive, opts, seed);
    cert.budget.probes = mins.len();
    cert.probe = Some(Probe {
        kind: spec.kind,
        objective: spec.objective.to_json(),
        pad: spec.pad,
        extra_rows: spec.extra_rows,
        constraints: spec.constraints.map(PolySystem::to_json),
    });
    let mut valid: Vec<&LocalMin> = mins.iter().filter(|m| m.residual <= opts.tol && m.magnitude.is_finite()).collect();
    if valid.is_empty() {
        cert.notes.push("no probe ended on the variety within tolerance".into());
        return Ok(cert);
    }
    valid.sort_by(|a, b| a.magnitude.partial_cmp(&b.magnitude).unwrap().then_with(|| lex_cmp(&a.point, &b.point)));
    let best = valid[0];
    cert.margin = Some(best.magnitude);
    cert.witness = Some(CertWitness { point: best.point.clone(), value: best.magnitude, residual: best.residual });
    if best.magnitude <= opts.fail_tol {
        cert.status = Status::Fail;
        let mut seen: Vec<&LocalMin> = Vec::new();
        for m in valid.iter().filter(|m| m.magnitude <= opts.fail_tol) {
            if seen.iter().all(|s| dist(&s.point, &m.point) > 1e-6) {
                seen.push(m);
            }
        }
        seen.sort_by(|a, b| lex_cmp(&a.point, &b.point));
        cert.witnesses = seen
            .iter()
            .take(MAX_WITNESSES)
            .map(|m| CertWitness { point: m.point.clone(), value: m.magnitude, residual: m.residual })
            .collect();
    } else if best.magnitude >= opts.margin_tol {
        cert.status = Status::Pass;
    }
    Ok(cert)
}

fn require_shape(real: &PolySystem) -> Result<(), CertifyError> {
    if real.p() > real.n() {
        return Err(CertifyError::Shape { p: real.p(), n: real.n() });
    }
    Ok(())
}

/// Minimizes the wedge norm of the real Jacobian over sampled `Z(f) ∩ region`.
pub fn certify_smooth(system: &PolySystem, region: &Region, opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    let real = system.to_real()?;
    require_shape(&real)?;
    let out = sample_region(&real, region, opts.starts, seed, &opts.sample_options())?;
    if out.cloud.is_empty() {
        let mut cert = Certificate::blank("smooth", Status::Inconclusive, opts, seed);
        cert.notes.push("no real points sampled in the region (possibly an empty real variety)".into());
        return Ok(cert);
    }
    run_probe(
        ProbeSpec {
            check: "smooth",
            objective: &real,
            pad: 0,
            extra_rows: Vec::new(),
            constraints: Some(&real),
            region: Some(region.clone()),
            kind: ProbeKind::Wedge,
        },
        &out.cloud.points,
        opts,
        seed,
    )
}

fn random_sphere_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count).map(|k| unit_vector(&mut stream_rng(seed, k as u64), n)).collect()
}

/// Certifies `Z(system) ∩ S^{n−1} = ∅` by a positive lower bound on `|f|` over the sphere.
fn empty_link(real: &PolySystem, check: &str, opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    let n = real.n();
    let sphere = PolySystem::single(Poly::sphere(&vec![0.0; n], 1.0)?)?;
    let starts = random_sphere_points(n, opts.starts, seed);
    let mut cert = run_probe(
        ProbeSpec {
            check,
            objective: real,
            pad: 0,
            extra_rows: Vec::new(),
            constraints: Some(&sphere),
            region: None,
            kind: ProbeKind::ResidualNorm,
        },
        &starts,
        opts,
        seed,
    )?;
    // here a large minimum means "no real points": pass-empty
    cert.witnesses.clear();
    match cert.margin {
        Some(m) if m >= opts.margin_tol => {
            cert.status = Status::Pass;
            cert.empty_real_locus = true;
            cert.notes.push(format!("no real points on the unit sphere: min |f| = {m:e}"));
        }
        _ => {
            cert.status = Status::Inconclusive;
            cert.notes.push("sampler found no link points but |f| nearly vanishes on the sphere".into());
        }
    }
    Ok(cert)
}

fn check_homogeneous(real: &PolySystem) -> Result<(), CertifyError> {
    if real.is_homogeneous() {
        Ok(())
    } else {
        Err(CertifyError::NotHomogeneous)
    }
}

/// Wedge of the forms' gradients over `Z(g) ∩ S^{n−1}`.
pub fn link_smoothness(forms: &PolySystem, opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    link_check("link_smooth", forms, opts, seed)
}

fn link_check(check: &str, forms: &PolySystem, opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    let real = forms.to_real()?;
    check_homogeneous(&real)?;
    require_shape(&real)?;
    let n = real.n();
    let out = sample_sphere(&real, &vec![0.0; n], 1.0, opts.starts, seed, &opts.sample_options())?;
    let mut cert = if out.cloud.is_empty() {
        empty_link(&real, check, opts, seed)?
    } else {
        let aug = real.with_extra(vec![Poly::sphere(&vec![0.0; n], 1.0)?])?;
        run_probe(
            ProbeSpec {
                check,
                objective: &real,
                pad: 0,
                extra_rows: Vec::new(),
                constraints: Some(&aug),
                region: None,
                kind: ProbeKind::Wedge,
            },
            &out.cloud.points,
            opts,
            seed,
        )?
    };
    cert.notes.push(IRREDUCIBILITY_NOTE.into());
    Ok(cert)
}

/// `C = min |∇g|` over the unit sphere, so `|∇g(x)| ≥ C |x|^{d−1}` everywhere.
pub fn gradient_bound_constant(g: &Poly, opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    let g = g.as_real()?;
    if !g.is_homogeneous() {
        return Err(CertifyError::NotHomogeneous);
    }
    let sys = PolySystem::single(g.clone())?;
    let n = sys.n();
    let sphere = PolySystem::single(Poly::sphere(&vec![0.0; n], 1.0)?)?;
    let starts = random_sphere_points(n, opts.starts, seed);
    let mut cert = run_probe(
        ProbeSpec {
            check: "gradient_bound",
            objective: &sys,
            pad: 0,
            extra_rows: Vec::new(),
            constraints: Some(&sphere),
            region: None,
            kind: ProbeKind::Wedge,
        },
        &starts,
        opts,
        seed,
    )?;
    if let Some(c) = cert.margin {
        cert.constants.insert("C".into(), c);
    }
    cert.constants.insert("degree".into(), sys.degrees()[0] as f64);
    Ok(cert)
}

/// Wedge of `{D F_i(x, 0), Dz}` for the homogenized equations at the points of
/// `Z(ini f) ∩ S^{n−1}`.
pub fn transversality_at_infinity(system: &PolySystem, opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    let real = system.to_real()?;
    require_shape(&real)?;
    let ini = real.initial_forms()?;
    let hom = real.homogenize()?;
    let n = real.n();
    let out = sample_sphere(&ini, &vec![0.0; n], 1.0, opts.starts, seed, &opts.sample_options())?;
    if out.cloud.is_empty() {
        let mut cert = empty_link(&ini, "transversality_at_infinity", opts, seed)?;
        if cert.empty_real_locus {
            cert.notes.push("real variety is bounded: no points at infinity".into());
        }
        return Ok(cert);
    }
    let aug = ini.with_extra(vec![Poly::sphere(&vec![0.0; n], 1.0)?])?;
    let mut dz = vec![0.0; n + 1];
    dz[n] = 1.0;
    run_probe(
        ProbeSpec {
            check: "transversality_at_infinity",
            objective: &hom,
            pad: 1,
            extra_rows: vec![dz],
            constraints: Some(&aug),
            region: None,
            kind: ProbeKind::Wedge,
        },
        &out.cloud.points,
        opts,
        seed,
    )
}

fn combine(check: &str, subs: Vec<Certificate>, opts: &CertifyOptions, seed: u64) -> Certificate {
    let status = if subs.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else if subs.iter().any(|c| c.status == Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    let mut cert = Certificate::blank(check, status, opts, seed);
    cert.margin = subs.iter().filter(|c| !c.empty_real_locus).filter_map(|c| c.margin).reduce(f64::min);
    cert.budget.probes = subs.iter().map(|c| c.budget.probes).sum();
    for c in &subs {
        if c.status != Status::Pass {
            cert.notes.push(format!("{}: {:?}", c.check, c.status).to_lowercase());
        }
    }
    if let Some(bad) = subs.iter().find(|c| c.status == status && status != Status::Pass) {
        cert.witness = bad.witness.clone();
    }
    cert.notes.push(IRREDUCIBILITY_NOTE.into());
    cert.sub = subs;
    cert
}

/// Affine smoothness on a ball, link smoothness of the initial forms and
/// transversality at infinity, all required.
pub fn conic_at_infinity_verdict(system: &PolySystem, opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    let real = system.to_real()?;
    let region = Region::ball(real.n(), opts.affine_radius);
    let smooth = certify_smooth(&real, &region, opts, seed)?;
    let link = link_smoothness(&real.initial_forms()?, opts, seed.wrapping_add(1))?;
    let trans = transversality_at_infinity(&real, opts, seed.wrapping_add(2))?;
    let empty_at_infinity = link.empty_real_locus && trans.empty_real_locus;
    let mut cert = combine("conic_at_infinity", vec![smooth, link, trans], opts, seed);
    cert.empty_real_locus = empty_at_infinity;
    if empty_at_infinity {
        cert.notes.push("no real points at infinity (bounded real variety)".into());
    }
    Ok(cert)
}

/// Orthogonal matrix (rows) sending `{⟨normal, x⟩ = 0}` to `{x_last = 0}`:
/// the Householder reflection exchanging `normal` and `e_last`.
pub fn hyperplane_rotation(normal: &[f64]) -> Result<Vec<Vec<f64>>, CertifyError> {
    let m = normal.len();
    let nn = crate::linalg::norm(normal);
    if m == 0 || !(nn > 0.0) || !nn.is_finite() {
        return Err(CertifyError::BadNormal(m));
    }
    let nu: Vec<f64> = normal.iter().map(|v| v / nn).collect();
    let mut v = nu.iter().map(|x| -x).collect::<Vec<_>>();
    v[m - 1] += 1.0;
    let vv = crate::linalg::dot(&v, &v);
    let mut q = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let id = if i == j { 1.0 } else { 0.0 };
            q[i][j] = if vv == 0.0 { id } else { id - 2.0 * v[i] * v[j] / vv };
        }
    }
    Ok(q)
}

/// Dehomogenization of `system` after the coordinate change taking the
/// hyperplane with the given normal to `{z = 0}`.
pub fn affine_trace(system: &PolySystem, normal: &[f64]) -> Result<PolySystem, CertifyError> {
    if !system.is_homogeneous() {
        return Err(CertifyError::NotHomogeneous);
    }
    let m = system.n();
    if normal.len() != m {
        return Err(CertifyError::BadNormal(m));
    }
    let is_last_axis = normal[..m - 1].iter().all(|v| *v == 0.0) && normal[m - 1] > 0.0;
    let polys: Vec<Poly> = if is_last_axis {
        system.polys().iter().map(Poly::dehomogenize).collect()
    } else {
        let q = hyperplane_rotation(normal)?;
        let qr: Result<Vec<Vec<_>>, _> = q.iter().map(|row| row.iter().map(|v| rational_from_f64(*v)).collect()).collect();
        let qr = qr?;
        system.polys().iter().map(|f| f.substitute_linear(&qr).dehomogenize()).collect()
    };
    Ok(PolySystem::new(polys)?)
}

pub fn random_normal(m: usize, seed: u64) -> Vec<f64> {
    unit_vector(&mut stream_rng(seed, 0), m)
}

/// Affine trace for a random hyperplane drawn from `seed`, certified with
/// [`conic_at_infinity_verdict`].
pub fn affine_trace_verdict(system: &PolySystem, opts: &CertifyOptions, seed: u64) -> Result<(PolySystem, Vec<f64>, Certificate), CertifyError> {
    let normal = random_normal(system.n(), seed);
    let trace = affine_trace(system, &normal)?;
    let mut cert = conic_at_infinity_verdict(&trace, opts, seed)?;
    cert.check = "affine_trace".into();
    for (i, v) in normal.iter().enumerate() {
        cert.constants.insert(format!("normal_{i}"), *v);
    }
    let near = cert.sub.iter().filter_map(|c| if c.check == "smooth" { None } else { c.margin }).reduce(f64::min);
    if let Some(t) = near {
        cert.constants.insert("tangency_margin".into(), t);
    }
    Ok((trace, normal, cert))
}

/// Local verdict at the origin: smooth link of the tangent cone plus smoothness
/// on punctured balls `r/4 ≤ |x| ≤ r`.
pub fn icis_local_verdict(system: &PolySystem, radii: &[f64], opts: &CertifyOptions, seed: u64) -> Result<Certificate, CertifyError> {
    let real = system.to_real()?;
    for (i, f) in real.polys().iter().enumerate() {
        if !f.coeff(&vec![0; real.n()]).is_zero() {
            return Err(CertifyError::NotGerm(i));
        }
    }
    let cone = real.initial_forms_at_origin()?;
    let mut subs = vec![link_check("tangent_cone_link", &cone, opts, seed)?];
    for (k, &r) in radii.iter().enumerate() {
        let region = Region::Annulus { center: vec![0.0; real.n()], inner: r / 4.0, outer: r };
        let mut c = certify_smooth(&real, &region, opts, seed.wrapping_add(1 + k as u64))?;
        c.check = format!("punctured_ball_{r}");
        c.constants.insert("radius".into(), r);
        subs.push(c);
    }
    let mut cert = combine("icis_local", subs, opts, seed);
    for (i, f) in real.polys().iter().enumerate() {
        if let Some(m) = f.min_degree() {
            cert.constants.insert(format!("multiplicity_{i}"), m as f64);
        }
    }
    Ok(cert)
}

/// Re-evaluates every witness of `cert` (and its sub-certificates) from the
/// serialized data alone. Returns the checks whose witness no longer holds.
pub fn revalidate(cert: &Certificate) -> Result<Vec<String>, CertifyError> {
    let mut bad = Vec::new();
    revalidate_into(cert, &mut bad)?;
    Ok(bad)
}

fn revalidate_into(cert: &Certificate, bad: &mut Vec<String>) -> Result<(), CertifyError> {
    for s in &cert.sub {
        revalidate_into(s, bad)?;
    }
    let (Some(probe), Some(w)) = (&cert.probe, &cert.witness) else { return Ok(()) };
    let objective = probe.objective.to_system()?.numeric()?;
    let obj = match probe.kind {
        ProbeKind::Wedge => Objective::Wedge { sys: objective, pad: probe.pad, extra_rows: probe.extra_rows.clone() },
        ProbeKind::ResidualNorm => Objective::SumSquares { sys: objective },
    };
    let residual = match &probe.constraints {
        Some(c) => c.to_system()?.numeric()?.max_residual(&w.point),
        None => 0.0,
    };
    let value = obj.magnitude(&w.point);
    let t = &cert.tolerances;
    let holds = residual <= t.residual_tol
        && match cert.status {
            Status::Fail => value <= t.fail_tol && cert.witnesses.iter().all(|x| obj.magnitude(&x.point) <= t.fail_tol),
            Status::Pass => value >= t.margin_tol,
            Status::Inconclusive => true,
        };
    if !holds {
        bad.push(cert.check.clone());
    }
    Ok(())
}
