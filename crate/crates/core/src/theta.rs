//! The spectral functional
//! `theta = (sigma0 cos^2 r + sigma1 sin^2 r) |bd| + 2 |area|`:
//! evaluation, the topological bound, the conformal eigenvalue derivative,
//! projected-gradient maximization over conformal factors, and the
//! extremality identities.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::assembly::{self, MetricField};
use crate::dtn::{self, SpectrumResult, DEFAULT_CLUSTER_TOL};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Evaluation record of the functional on one metric.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaReport {
    pub r: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub boundary_length: f64,
    pub area: f64,
    pub theta: f64,
    pub bound: f64,
    pub slack: f64,
    pub extremality: Extremality,
}

/// Residuals of the extremality identities: `res_bc` for
/// `sigma1 = -cot^2(r) sigma0`, `res_v0` for the constancy of the rescaled
/// ground-mode boundary trace.
#[derive(Debug, Clone, Serialize)]
pub struct Extremality {
    pub res_bc: f64,
    pub res_v0: f64,
}

/// `4 pi (1 - cos r)(genus + boundary_count)`.
pub fn theta_bound(genus: usize, boundary_count: usize, r: f64) -> f64 {
    4.0 * PI * (1.0 - r.cos()) * (genus + boundary_count) as f64
}

/// Evaluate the functional at frequency 2 on `(mesh, metric)`.
pub fn theta_eval(mesh: &Mesh, metric: &MetricField, r: f64) -> Result<ThetaReport> {
    if r <= 0.0 || r >= FRAC_PI_2 || r.is_nan() {
        return Err(Error::Parameter(format!("r = {r} outside (0, pi/2)")));
    }
    let spectrum = dtn::steklov_spectrum(mesh, metric, 2.0, 4)?;
    let ms = assembly::measure(mesh, metric)?;
    Ok(report_from_parts(mesh, metric, r, &spectrum, &ms))
}

fn report_from_parts(
    mesh: &Mesh,
    _metric: &MetricField,
    r: f64,
    spectrum: &SpectrumResult,
    ms: &assembly::Measure,
) -> ThetaReport {
    let (sigma0, sigma1) = (spectrum.eigenvalues[0], spectrum.eigenvalues[1]);
    let boundary_term = sigma0 * r.cos().powi(2) + sigma1 * r.sin().powi(2);
    let theta = boundary_term * ms.boundary_length + 2.0 * ms.area;
    let bound = theta_bound(mesh.genus, mesh.boundary_count, r);
    let mut report = ThetaReport {
        r,
        sigma0,
        sigma1,
        boundary_length: ms.boundary_length,
        area: ms.area,
        theta,
        bound,
        slack: bound - theta,
        extremality: Extremality { res_bc: 0.0, res_v0: 0.0 },
    };
    let (res_bc, res_v0) = extremality_check(&report, spectrum);
    report.extremality = Extremality { res_bc, res_v0 };
    report
}

/// Extremality residuals of a computed spectrum: the eigenvalue identity
/// `|sigma1 + cot^2(r) sigma0| / |sigma1|` and the relative boundary-trace
/// deviation of the ground mode (rescaled to boundary mean `cos r`) from
/// the constant `cos r`.
pub fn extremality_check(report: &ThetaReport, spectrum: &SpectrumResult) -> (f64, f64) {
    let cot2 = 1.0 / report.r.tan().powi(2);
    let res_bc = (report.sigma1 + cot2 * report.sigma0).abs() / report.sigma1.abs().max(1e-300);

    let u0 = &spectrum.boundary_modes[0];
    let weights = &spectrum.boundary_weights;
    let total_len: f64 = weights.iter().sum();
    let boundary_integral: f64 = weights.iter().zip(u0).map(|(w, u)| w * u).sum();
    let mean = boundary_integral / total_len;
    let cr = report.r.cos();
    let res_v0 = if mean.abs() < 1e-300 {
        f64::INFINITY
    } else {
        let c = cr / mean;
        // || c u - cr ||^2 with u B-normalized: c^2 - 2 c cr <1, B u> + cr^2 L
        let dev2 = c * c - 2.0 * c * cr * boundary_integral + cr * cr * total_len;
        dev2.max(0.0).sqrt() / (cr * total_len.sqrt())
    };
    (res_bc, res_v0)
}

fn conformal_factors(metric: &MetricField) -> Result<Vec<f64>> {
    metric.conformal_factors().ok_or_else(|| {
        Error::Parameter("operation requires a conformal metric".into())
    })
}

/// Derivative of `u1^T M u2` with respect to the per-vertex log-factor
/// direction, one entry per vertex.
fn mass_gradient(mesh: &Mesh, factors: &[f64], u1: &[f64], u2: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        let a1 = [u1[tri[0]], u1[tri[1]], u1[tri[2]]];
        let a2 = [u2[tri[0]], u2[tri[1]], u2[tri[2]]];
        for k in 0..3 {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let same = (i == j) as u8 + (j == k) as u8 + (i == k) as u8;
                    let w = match same {
                        3 => 1.0 / 10.0,
                        1 => 1.0 / 30.0,
                        _ => 1.0 / 60.0,
                    };
                    acc += a1[i] * a2[j] * w;
                }
            }
            grad[tri[k]] += factors[tri[k]] * area * acc;
        }
    }
    grad
}

/// Derivative of `u1^T B u2` with respect to the log-factor direction
/// (includes the 1/2 from the square-root boundary weight).
fn boundary_gradient(mesh: &Mesh, sqrt_factors: &[f64], u1: &[f64], u2: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; mesh.vertices.len()];
    for (&(a, b), &owner) in mesh.boundary_edges().iter() {
        let tri = mesh.triangles[owner];
        let coords = mesh.triangle_coords(owner);
        let pos = |v: usize| tri.iter().position(|&x| x == v).expect("vertex on owner");
        let (pa, pb) = (coords[pos(a)], coords[pos(b)]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let cross = u1[a] * u2[b] + u1[b] * u2[a];
        let da = len / 12.0 * (3.0 * u1[a] * u2[a] + cross + u1[b] * u2[b]);
        let db = len / 12.0 * (u1[a] * u2[a] + cross + 3.0 * u1[b] * u2[b]);
        grad[a] += 0.5 * sqrt_factors[a] * da;
        grad[b] += 0.5 * sqrt_factors[b] * db;
    }
    grad
}

fn sigma_gradient(
    mesh: &Mesh,
    factors: &[f64],
    sqrt_factors: &[f64],
    alpha: f64,
    sigma: f64,
    extension: &[f64],
) -> Vec<f64> {
    let gm = mass_gradient(mesh, factors, extension, extension);
    let gb = boundary_gradient(mesh, sqrt_factors, extension, extension);
    gm.iter().zip(&gb).map(|(&m, &b)| -alpha * m - sigma * b).collect()
}

fn cluster_containing(eigenvalues: &[f64], index: usize, rel_tol: f64) -> (usize, usize) {
    let sizes = dtn::cluster_multiplicities(eigenvalues, rel_tol);
    let mut start = 0;
    for size in sizes {
        if index < start + size {
            return (start, size);
        }
        start += size;
    }
    (index, 1)
}

/// Analytic derivative of `sigma_{eigen_index}` in the conformal direction
/// `w`: `-alpha \int u^2 w dA - (sigma/2) \int_bd u^2 w dL` with the mode
/// B-normalized. For a multiple `sigma_1` cluster the direction must act as
/// a scalar on the cluster, otherwise the derivative is ambiguous.
pub fn sigma_conformal_derivative(
    mesh: &Mesh,
    metric: &MetricField,
    alpha: f64,
    eigen_index: usize,
    w: &[f64],
) -> Result<f64> {
    if eigen_index > 1 {
        return Err(Error::Parameter("eigen_index must be 0 or 1".into()));
    }
    let factors = conformal_factors(metric)?;
    if w.len() != factors.len() {
        return Err(Error::Parameter("direction length does not match vertex count".into()));
    }
    let spectrum = dtn::steklov_spectrum(mesh, metric, alpha, 8)?;
    let sqrt_factors: Vec<f64> = factors.iter().map(|f| f.sqrt()).collect();

    let derivative_pair = |p: usize, q: usize, sigma: f64| -> f64 {
        let gm = mass_gradient(mesh, &factors, &spectrum.extensions[p], &spectrum.extensions[q]);
        let gb = boundary_gradient(
            mesh,
            &sqrt_factors,
            &spectrum.extensions[p],
            &spectrum.extensions[q],
        );
        w.iter()
            .zip(gm.iter().zip(&gb))
            .map(|(&wv, (&m, &b))| wv * (-alpha * m - sigma * b))
            .sum()
    };

    if eigen_index == 0 {
        return Ok(derivative_pair(0, 0, spectrum.eigenvalues[0]));
    }
    let (start, size) = cluster_containing(&spectrum.eigenvalues, 1, DEFAULT_CLUSTER_TOL);
    if size == 1 {
        return Ok(derivative_pair(1, 1, spectrum.eigenvalues[1]));
    }
    // the direction must not break the cluster: the derivative matrix has to
    // be (numerically) a multiple of the identity
    let sigma = spectrum.eigenvalues[1];
    let mut d = vec![vec![0.0; size]; size];
    let mut scale: f64 = 0.0;
    for p in 0..size {
        for q in p..size {
            let v = derivative_pair(start + p, start + q, sigma);
            d[p][q] = v;
            d[q][p] = v;
            scale = scale.max(v.abs());
        }
    }
    let mean_diag = (0..size).map(|p| d[p][p]).sum::<f64>() / size as f64;
    let tol = 1e-6 * scale.max(1e-9);
    for p in 0..size {
        for q in 0..size {
            let target = if p == q { mean_diag } else { 0.0 };
            if (d[p][q] - target).abs() > tol {
                return Err(Error::AmbiguousDerivative { cluster: size });
            }
        }
    }
    Ok(mean_diag)
}

/// Optimizer knobs; defaults match the acceptance setup.
#[derive(Debug, Clone)]
pub struct OptimizeParams {
    pub max_steps: usize,
    pub step0: f64,
    pub gap_margin: f64,
    pub smoothing: f64,
    pub cluster_tol: f64,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        OptimizeParams {
            max_steps: 200,
            step0: 0.5,
            gap_margin: 0.1,
            smoothing: 0.5,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }
}

/// One accepted optimizer state.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizeIteration {
    pub step: usize,
    pub theta: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub gap: f64,
    pub step_size: f64,
}

/// Ascent trajectory: theta is nondecreasing along `iterations` and the
/// Dirichlet gap stays above the safeguard margin at every accepted step.
#[derive(Debug, Clone)]
pub struct OptimizeTrace {
    pub iterations: Vec<OptimizeIteration>,
    pub final_metric: MetricField,
}

struct EvalState {
    theta: f64,
    sigma0: f64,
    sigma1: f64,
    gap: f64,
    spectrum: SpectrumResult,
}

fn eval_state(mesh: &Mesh, metric: &MetricField, r: f64) -> Result<EvalState> {
    let spectrum = dtn::steklov_spectrum(mesh, metric, 2.0, 8)?;
    let ms = assembly::measure(mesh, metric)?;
    let (sigma0, sigma1) = (spectrum.eigenvalues[0], spectrum.eigenvalues[1]);
    let theta = (sigma0 * r.cos().powi(2) + sigma1 * r.sin().powi(2)) * ms.boundary_length
        + 2.0 * ms.area;
    Ok(EvalState { theta, sigma0, sigma1, gap: spectrum.admissibility.gap, spectrum })
}

fn smooth_field(mesh: &Mesh, field: &[f64], strength: f64, adjacency: &[Vec<usize>]) -> Vec<f64> {
    if strength <= 0.0 {
        return field.to_vec();
    }
    let mut out = Vec::with_capacity(field.len());
    for v in 0..mesh.vertices.len() {
        let nbrs = &adjacency[v];
        if nbrs.is_empty() {
            out.push(field[v]);
            continue;
        }
        let avg: f64 = nbrs.iter().map(|&u| field[u]).sum::<f64>() / nbrs.len() as f64;
        out.push((1.0 - strength) * field[v] + strength * avg);
    }
    out
}

/// Projected-gradient ascent of theta over the conformal factor, with one
/// graph-Laplacian smoothing pass per step and a backtracking line search
/// that only accepts steps increasing theta while keeping the Dirichlet gap
/// above `gap_margin`.
pub fn optimize_conformal(
    mesh: &Mesh,
    metric0: &MetricField,
    r: f64,
    params: &OptimizeParams,
) -> Result<OptimizeTrace> {
    if r <= 0.0 || r >= FRAC_PI_2 || r.is_nan() {
        return Err(Error::Parameter(format!("r = {r} outside (0, pi/2)")));
    }
    conformal_factors(metric0)?;
    let mut metric = metric0.clone();
    let mut state = eval_state(mesh, &metric, r)?;
    if state.gap <= params.gap_margin {
        return Err(Error::NotAdmissible { alpha: 2.0, gap: state.gap });
    }
    let adjacency = mesh.vertex_adjacency();
    let mut history: std::collections::VecDeque<Vec<f64>> = Default::default();
    if let MetricField::Conformal { log_factor } = &metric {
        history.push_back(log_factor.clone());
    }
    let mut trace = vec![OptimizeIteration {
        step: 0,
        theta: state.theta,
        sigma0: state.sigma0,
        sigma1: state.sigma1,
        gap: state.gap,
        step_size: 0.0,
    }];

    let (cr2, sr2) = (r.cos().powi(2), r.sin().powi(2));
    // adaptive starting scales: gradient-type and pattern-type directions
    let mut class_steps = [params.step0, params.step0];
    for iter in 1..=params.max_steps {
        let factors = conformal_factors(&metric)?;
        let sqrt_factors: Vec<f64> = factors.iter().map(|f| f.sqrt()).collect();
        let ones = vec![1.0; factors.len()];

        let g0 = sigma_gradient(
            mesh,
            &factors,
            &sqrt_factors,
            2.0,
            state.sigma0,
            &state.spectrum.extensions[0],
        );
        let d_area = mass_gradient(mesh, &factors, &ones, &ones);
        let d_len = boundary_gradient(mesh, &sqrt_factors, &ones, &ones);
        let ms = assembly::measure(mesh, &metric)?;
        let bterm = state.sigma0 * cr2 + state.sigma1 * sr2;
        let common: Vec<f64> = (0..factors.len())
            .map(|v| ms.boundary_length * cr2 * g0[v] + bterm * d_len[v] + 2.0 * d_area[v])
            .collect();

        // theta uses the lowest value of the sigma_1 group, so near a tie the
        // ascent direction is the minimum-norm point of the convex hull of
        // the per-member gradients (the steepest supergradient of a min)
        let tie_window = 10.0 * params.cluster_tol * state.sigma1.abs().max(1.0);
        let eigenvalues = &state.spectrum.eigenvalues;
        let bundle: Vec<usize> = (1..eigenvalues.len())
            .filter(|&j| eigenvalues[j] - eigenvalues[1] <= tie_window)
            .take(4)
            .collect();
        let members: Vec<Vec<f64>> = bundle
            .iter()
            .map(|&j| {
                let gj = sigma_gradient(
                    mesh,
                    &factors,
                    &sqrt_factors,
                    2.0,
                    eigenvalues[j],
                    &state.spectrum.extensions[j],
                );
                common
                    .iter()
                    .zip(gj)
                    .map(|(&c, g)| c + ms.boundary_length * sr2 * g)
                    .collect()
            })
            .collect();
        let weights = min_norm_simplex_weights(&members);
        let mut direction = vec![0.0; factors.len()];
        for (member, &weight) in members.iter().zip(&weights) {
            for (acc, &g) in direction.iter_mut().zip(member) {
                *acc += weight * g;
            }
        }
        direction = smooth_field(mesh, &direction, params.smoothing, &adjacency);
        let sup = direction.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if sup <= 1e-14 {
            break;
        }
        direction.iter_mut().for_each(|v| *v /= sup);

        // pattern move: displacement over the recent accepted steps follows
        // the valley floor where single gradient steps zigzag
        let pattern = pattern_direction(&metric, &history);

        // fallback: the lowest member's own gradient direction
        let mut fallback = members[0].clone();
        fallback = smooth_field(mesh, &fallback, params.smoothing, &adjacency);
        let fsup = fallback.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if fsup > 1e-14 {
            fallback.iter_mut().for_each(|v| *v /= fsup);
        }

        let mut candidates: Vec<(usize, Vec<f64>)> = Vec::new();
        if let Some(p) = pattern {
            candidates.push((1, p));
        }
        candidates.push((0, direction));
        candidates.push((0, fallback));

        let mut best: Option<(usize, MetricField, EvalState, f64)> = None;
        for (class, candidate_dir) in &candidates {
            let start = class_steps[*class];
            if let Some((cm, cs, eps)) =
                line_search(mesh, &metric, r, candidate_dir, start, &state, params)?
            {
                let good_enough = eps >= 1e-8;
                if best.as_ref().is_none_or(|(_, _, bs, _)| cs.theta > bs.theta) {
                    best = Some((*class, cm, cs, eps));
                }
                if good_enough {
                    break;
                }
            }
        }
        let Some((class, next_metric, next_state, eps)) = best else {
            break;
        };
        metric = next_metric;
        state = next_state;
        class_steps[class] = (eps * 2.0).clamp(1e-10, params.step0 * 16.0);
        if let MetricField::Conformal { log_factor } = &metric {
            history.push_back(log_factor.clone());
            if history.len() > 6 {
                history.pop_front();
            }
        }
        trace.push(OptimizeIteration {
            step: iter,
            theta: state.theta,
            sigma0: state.sigma0,
            sigma1: state.sigma1,
            gap: state.gap,
            step_size: eps,
        });
    }
    Ok(OptimizeTrace { iterations: trace, final_metric: metric })
}

fn pattern_direction(
    metric: &MetricField,
    history: &std::collections::VecDeque<Vec<f64>>,
) -> Option<Vec<f64>> {
    let MetricField::Conformal { log_factor } = metric else {
        return None;
    };
    let oldest = history.front()?;
    if history.len() < 4 {
        return None;
    }
    let mut dir: Vec<f64> = log_factor.iter().zip(oldest).map(|(&a, &b)| a - b).collect();
    let sup = dir.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if sup <= 1e-13 {
        return None;
    }
    dir.iter_mut().for_each(|v| *v /= sup);
    Some(dir)
}

/// Backtracking line search along one direction, followed by greedy step
/// doubling while theta keeps increasing. Returns the accepted state without
/// mutating the caller's.
fn line_search(
    mesh: &Mesh,
    metric: &MetricField,
    r: f64,
    direction: &[f64],
    step: f64,
    state: &EvalState,
    params: &OptimizeParams,
) -> Result<Option<(MetricField, EvalState, f64)>> {
    let admissible = |cs: &EvalState| cs.gap > params.gap_margin;
    let mut eps = step;
    let mut found: Option<(MetricField, EvalState, f64)> = None;
    for _ in 0..40 {
        let candidate = metric.perturbed(direction, eps)?;
        if let Ok(cs) = eval_state(mesh, &candidate, r) {
            if admissible(&cs) && cs.theta > state.theta {
                found = Some((candidate, cs, eps));
                break;
            }
        }
        eps /= 2.0;
        if eps < 1e-12 {
            return Ok(None);
        }
    }
    let Some(mut best) = found else {
        return Ok(None);
    };
    // expansion: ride the direction while it keeps paying off
    for _ in 0..24 {
        let eps_next = best.2 * 2.0;
        let candidate = metric.perturbed(direction, eps_next)?;
        match eval_state(mesh, &candidate, r) {
            Ok(cs) if admissible(&cs) && cs.theta > best.1.theta => {
                best = (candidate, cs, eps_next);
            }
            _ => break,
        }
    }
    Ok(Some(best))
}

/// Weights of the minimum-norm convex combination of the given vectors,
/// by grid search on the simplex through the Gram matrix. The member count
/// is the sigma_1 tie multiplicity (at most a few).
fn min_norm_simplex_weights(members: &[Vec<f64>]) -> Vec<f64> {
    let m = members.len();
    if m == 1 {
        return vec![1.0];
    }
    let mut gram = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let dot: f64 = members[i].iter().zip(&members[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = dot;
            gram[j][i] = dot;
        }
    }
    // enumerate lattice points of the simplex with resolution 1/steps via an
    // odometer over the first m-1 coordinates
    let steps = 20usize;
    let mut best = vec![0.0; m];
    best[0] = 1.0;
    let mut best_norm = f64::INFINITY;
    let mut counts = vec![0usize; m - 1];
    loop {
        let used: usize = counts.iter().sum();
        if used <= steps {
            let mut w: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
            w.push((steps - used) as f64 / steps as f64);
            let mut norm = 0.0;
            for (i, wi) in w.iter().enumerate() {
                for (j, wj) in w.iter().enumerate() {
                    norm += wi * gram[i][j] * wj;
                }
            }
            if norm < best_norm {
                best_norm = norm;
                best = w;
            }
        }
        let mut slot = 0;
        loop {
            counts[slot] += 1;
            if counts[slot] <= steps {
                break;
            }
            counts[slot] = 0;
            slot += 1;
            if slot == m - 1 {
                return best;
            }
        }
    }
}

/// Ground eigenvalue of the cap metric over a list of radii approaching
/// `pi/2`: the table exhibits `sigma_0 = -tan r` decreasing without bound.
pub fn admissibility_blowdown(
    r_values: &[f64],
    n_rings: usize,
    n_angular: usize,
) -> Result<Vec<(f64, f64)>> {
    let mesh = Mesh::disk(n_rings, n_angular)?;
    let mut rows = Vec::with_capacity(r_values.len());
    for &r in r_values {
        if r >= FRAC_PI_2 {
            // the metric space boundary: the cap gap closes at pi/2
            return Err(Error::NotAdmissible { alpha: 2.0, gap: 0.0 });
        }
        if r <= 0.0 {
            return Err(Error::Parameter(format!("r = {r} must be positive")));
        }
        let metric = MetricField::cap(&mesh, r)?;
        let spectrum = dtn::steklov_spectrum(&mesh, &metric, 2.0, 1)?;
        rows.push((r, spectrum.eigenvalues[0]));
    }
    Ok(rows)
}

/// Pseudorandom admissible conformal disk metric: the log-factor is a
/// truncated trigonometric polynomial with amplitude at most `amplitude`,
/// resampled until the Dirichlet gap is positive.
pub fn random_conformal_metric(
    mesh: &Mesh,
    rng: &mut impl Rng,
    amplitude: f64,
) -> Result<MetricField> {
    for _ in 0..100 {
        let n_waves = 6;
        let mut waves = Vec::with_capacity(n_waves);
        for _ in 0..n_waves {
            let m = rng.random_range(-2..=2i32);
            let n = rng.random_range(-2..=2i32);
            let coeff: f64 = rng.random_range(-1.0..1.0);
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            waves.push((m, n, coeff, phase));
        }
        let target = amplitude * rng.random_range(0.2..=1.0);
        let mut field: Vec<f64> = mesh
            .vertices
            .iter()
            .map(|&[x, y]| {
                waves
                    .iter()
                    .map(|&(m, n, c, p)| c * (PI * (m as f64 * x + n as f64 * y) + p).cos())
                    .sum()
            })
            .collect();
        let sup = field.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if sup < 1e-12 {
            continue;
        }
        field.iter_mut().for_each(|v| *v *= target / sup);
        let metric = MetricField::Conformal { log_factor: field };
        if dtn::dirichlet_gap(mesh, &metric, 2.0)?.admissible {
            return Ok(metric);
        }
    }
    Err(Error::Nonconvergence("no admissible random metric in 100 draws".into()))
}

/// Theta reports for `n` seeded random admissible conformal metrics on the
/// mesh. Entry `i` is produced from the stream `seed + i`, so the sweep is
/// deterministic and order-stable under any thread count.
pub fn random_metric_sweep(
    mesh: &Mesh,
    r: f64,
    n: usize,
    seed: u64,
    amplitude: f64,
) -> Result<Vec<ThetaReport>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9)));
            let metric = random_conformal_metric(mesh, &mut rng, amplitude)?;
            theta_eval(mesh, &metric, r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn bound_values() {
        assert!((theta_bound(0, 1, FRAC_PI_4) - 3.6806049).abs() < 1e-6);
        assert!((theta_bound(0, 2, FRAC_PI_2) - 8.0 * PI).abs() < 1e-12);
        assert!(theta_bound(0, 1, 1e-9) < 1e-8);
    }

    #[test]
    fn cap_metric_attains_the_bound() {
        let mesh = Mesh::disk(24, 48).unwrap();
        let metric = MetricField::cap(&mesh, FRAC_PI_4).unwrap();
        let report = theta_eval(&mesh, &metric, FRAC_PI_4).unwrap();
        assert!(
            report.slack.abs() / report.bound < 1e-2,
            "theta {} vs bound {}",
            report.theta,
            report.bound
        );
        assert!(report.extremality.res_bc < 2e-2, "res_bc {}", report.extremality.res_bc);
        assert!(report.extremality.res_v0 < 2e-2, "res_v0 {}", report.extremality.res_v0);
        // recomputing theta from the report fields is pure arithmetic
        let recomputed = (report.sigma0 * FRAC_PI_4.cos().powi(2)
            + report.sigma1 * FRAC_PI_4.sin().powi(2))
            * report.boundary_length
            + 2.0 * report.area;
        assert_eq!(recomputed, report.theta);
    }

    #[test]
    fn flat_disk_stays_below_bound_and_flags_non_extremality() {
        let mesh = Mesh::disk(24, 48).unwrap();
        let metric = MetricField::flat(&mesh);
        let report = theta_eval(&mesh, &metric, FRAC_PI_4).unwrap();
        assert!(report.theta < report.bound);
        assert!((report.theta - 3.3777).abs() < 0.05, "theta {}", report.theta);
        assert!(report.extremality.res_bc > 0.1, "res_bc {}", report.extremality.res_bc);
    }

    #[test]
    fn zero_direction_has_zero_derivative() {
        let mesh = Mesh::disk(12, 24).unwrap();
        let metric = MetricField::cap(&mesh, FRAC_PI_3).unwrap();
        let w = vec![0.0; mesh.vertices.len()];
        for index in [0, 1] {
            let d = sigma_conformal_derivative(&mesh, &metric, 2.0, index, &w).unwrap();
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mesh = Mesh::disk(16, 32).unwrap();
        let metric = MetricField::cap(&mesh, FRAC_PI_4).unwrap();
        // keep an even component: odd fields have zero derivative on a
        // rotationally symmetric metric
        let w: Vec<f64> = mesh
            .vertices
            .iter()
            .map(|&[x, y]| (1.3 * x - 0.7 * y).sin() + 0.2 * x + 0.4)
            .collect();
        let analytic = sigma_conformal_derivative(&mesh, &metric, 2.0, 0, &w).unwrap();
        let eps = 1e-4;
        let plus = dtn::steklov_spectrum(&mesh, &metric.perturbed(&w, eps).unwrap(), 2.0, 1)
            .unwrap()
            .eigenvalues[0];
        let minus = dtn::steklov_spectrum(&mesh, &metric.perturbed(&w, -eps).unwrap(), 2.0, 1)
            .unwrap()
            .eigenvalues[0];
        let fd = (plus - minus) / (2.0 * eps);
        assert!(
            (analytic - fd).abs() / fd.abs() < 1e-3,
            "analytic {analytic} vs finite difference {fd}"
        );
    }

    #[test]
    fn uniform_direction_respects_the_sigma1_cluster() {
        let mesh = Mesh::disk(16, 32).unwrap();
        let metric = MetricField::cap(&mesh, FRAC_PI_4).unwrap();
        let w = vec![1.0; mesh.vertices.len()];
        // rotationally symmetric direction shifts the double cluster as a scalar
        let d = sigma_conformal_derivative(&mesh, &metric, 2.0, 1, &w).unwrap();
        assert!(d.is_finite());
    }

    #[test]
    fn blowdown_tracks_minus_tan() {
        let rows = admissibility_blowdown(&[1.2, 1.3], 40, 80).unwrap();
        assert!((rows[0].1 + 1.2f64.tan()).abs() / 1.2f64.tan() < 5e-2, "{:?}", rows);
        assert!(rows[1].1 < rows[0].1);
    }

    #[test]
    fn optimizer_improves_the_flat_disk() {
        let mesh = Mesh::disk(12, 24).unwrap();
        let metric = MetricField::flat(&mesh);
        let params = OptimizeParams { max_steps: 8, ..Default::default() };
        let trace = optimize_conformal(&mesh, &metric, FRAC_PI_4, &params).unwrap();
        assert!(trace.iterations.len() > 1, "no accepted steps");
        for pair in trace.iterations.windows(2) {
            assert!(pair[1].theta > pair[0].theta);
            assert!(pair[1].gap > params.gap_margin);
        }
    }

    #[test]
    fn optimizer_rejects_inadmissible_start() {
        let mesh = Mesh::disk(12, 24).unwrap();
        let metric = MetricField::cap(&mesh, FRAC_PI_2).unwrap(); // hemisphere: gap ~ 0
        let err = optimize_conformal(&mesh, &metric, FRAC_PI_4, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::NotAdmissible { .. }), "{err:?}");
    }

    #[test]
    fn random_metrics_respect_the_bound() {
        let mesh = Mesh::disk(12, 24).unwrap();
        let reports = random_metric_sweep(&mesh, FRAC_PI_4, 8, 7, 0.5).unwrap();
        assert_eq!(reports.len(), 8);
        for report in &reports {
            assert!(report.theta <= report.bound * 1.01, "theta {}", report.theta);
        }
        // determinism across runs
        let again = random_metric_sweep(&mesh, FRAC_PI_4, 8, 7, 0.5).unwrap();
        for (a, b) in reports.iter().zip(&again) {
            assert_eq!(a.theta, b.theta);
        }
    }
}
