//! High-precision 1D Steklov-with-frequency solver for rotationally
//! symmetric metrics by separation of variables: cap mode ODEs on `[0, r]`
//! and annulus mode ODEs on `[-s0, s0]`, used as the oracle for the FEM
//! pipeline.

use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

use crate::ode;
use crate::{Error, Result};

/// Rotationally symmetric reference domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RadialDomain {
    Cap { r: f64 },
    Annulus { a: f64, s0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// One separated mode problem: angular mode `k` at frequency `alpha`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProblem {
    pub domain: RadialDomain,
    pub k: usize,
    pub alpha: f64,
}

/// Eigenvalues of one mode problem with tabulated radial profiles.
/// Profiles are sampled as `(t, a, a')` on a uniform grid, normalized to
/// `a = 1` at the outer endpoint, so the stored `a'` ends at `sigma`.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSpectrum {
    #[serde(flatten)]
    pub problem: RadialProblem,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub radial_profiles: Vec<Vec<[f64; 3]>>,
    pub parity: Vec<Option<Parity>>,
}

/// Entry of a merged spectrum: eigenvalue with its `(k, parity)` label.
#[derive(Debug, Clone, Serialize)]
pub struct MergedEntry {
    pub sigma: f64,
    pub k: usize,
    pub parity: Option<Parity>,
}

const PROFILE_SAMPLES: usize = 201;
const SHOOT_RTOL: f64 = 1e-11;

/// Frobenius coefficient of the regular cap solution `a = t^k (1 + c1 t^2)`.
fn frobenius_c1(k: usize, alpha: f64) -> f64 {
    k as f64 / 12.0 - alpha / (4.0 * (k as f64 + 1.0))
}

fn cap_rhs(alpha: f64, k: usize) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let k2 = (k * k) as f64;
    move |t: f64, y: &[f64; 2]| {
        let s = t.sin();
        let cot = t.cos() / s;
        [y[1], -cot * y[1] - (alpha - k2 / (s * s)) * y[0]]
    }
}

fn annulus_rhs(shape: f64, alpha: f64, k: usize) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let k2 = (k * k) as f64;
    move |s: f64, y: &[f64; 2]| {
        let rho_bar2 = 0.5 + shape * (2.0 * s).cos(); // 1 - rho^2
        let rho_rho_prime = shape * (2.0 * s).sin();
        [y[1], (rho_rho_prime / rho_bar2) * y[1] - (alpha - k2 / rho_bar2) * y[0]]
    }
}

/// Locate the root of the Robin mismatch `F(sigma) = a'(end) - sigma a(end)`
/// by bisection on a bracket around the direct ratio, then a secant polish.
/// Returns `None` when the mode has no Robin eigenvalue (Dirichlet-type
/// endpoint value) or the root falls outside any reasonable window.
fn robin_eigenvalue(a_end: f64, ap_end: f64) -> Option<f64> {
    if a_end == 0.0 {
        return None;
    }
    let sigma_direct = ap_end / a_end;
    if !sigma_direct.is_finite() || sigma_direct.abs() > 1e12 {
        return None;
    }
    let mismatch = |sigma: f64| ap_end - sigma * a_end;
    let pad = sigma_direct.abs().max(1.0);
    let (mut lo, mut hi) = (sigma_direct - pad, sigma_direct + pad);
    let (mut flo, fhi) = (mismatch(lo), mismatch(hi));
    if flo * fhi > 0.0 {
        return Some(sigma_direct);
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let fmid = mismatch(mid);
        if fmid == 0.0 {
            return Some(mid);
        }
        if flo * fmid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    // secant polish
    let (mut s0, mut s1) = (lo, hi);
    let (mut f0, mut f1) = (mismatch(s0), mismatch(s1));
    for _ in 0..8 {
        if f1 == f0 {
            break;
        }
        let s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
        s0 = s1;
        f0 = f1;
        s1 = s2;
        f1 = mismatch(s1);
    }
    Some(s1)
}

fn sample_profile<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t_start: f64,
    t_end: f64,
    y_start: [f64; N],
    samples: usize,
) -> Result<Vec<(f64, [f64; N])>> {
    let mut out = Vec::with_capacity(samples);
    let mut y = y_start;
    let mut t = t_start;
    out.push((t, y));
    for i in 1..samples {
        let target = t_start + (t_end - t_start) * i as f64 / (samples - 1) as f64;
        y = ode::integrate(f, t, target, y, SHOOT_RTOL, &mut |_, _| {})?;
        t = target;
        out.push((t, y));
    }
    Ok(out)
}

/// Cap mode eigenvalues: solve `a'' + cot(t) a' + (alpha - k^2/sin^2 t) a = 0`
/// with the regular Frobenius start `a ~ t^k` at the coordinate singularity,
/// eigencondition `a'(r) = sigma a(r)`.
///
/// At fixed `alpha` the regular solution is unique up to scale, so each mode
/// carries at most one Robin eigenvalue; the returned list has at most one
/// entry regardless of `count`.
pub fn cap_mode_eigs(r: f64, k: usize, count: usize, alpha: f64) -> Result<ModeSpectrum> {
    if r <= 0.0 || r > FRAC_PI_2 || r.is_nan() {
        return Err(Error::Parameter(format!("cap radius {r} outside (0, pi/2]")));
    }
    if count == 0 {
        return Err(Error::Parameter("count must be positive".into()));
    }
    let problem = RadialProblem { domain: RadialDomain::Cap { r }, k, alpha };
    let rhs = cap_rhs(alpha, k);
    let t0: f64 = 1e-6;
    let c1 = frobenius_c1(k, alpha);
    let y0 = [
        t0.powi(k as i32) * (1.0 + c1 * t0 * t0),
        t0.powi(k as i32 - 1) * (k as f64 + (k as f64 + 2.0) * c1 * t0 * t0),
    ];
    let end = ode::integrate(&rhs, t0, r, y0, SHOOT_RTOL, &mut |_, _| {})?;

    let mut eigenvalues = Vec::new();
    let mut radial_profiles = Vec::new();
    if let Some(sigma) = robin_eigenvalue(end[0], end[1]) {
        if count >= 1 {
            eigenvalues.push(sigma);
            let scale = end[0];
            let profile = sample_profile(&rhs, t0, r, y0, PROFILE_SAMPLES)?
                .into_iter()
                .map(|(t, y)| [t, y[0] / scale, y[1] / scale])
                .collect();
            radial_profiles.push(profile);
        }
    }
    let parity = vec![None; eigenvalues.len()];
    Ok(ModeSpectrum { problem, eigenvalues, radial_profiles, parity })
}

/// Closed-form solution pairs of the cap mode equations at frequency 2:
/// the regular solutions `cos t`, `sin t` and their singular partners
/// `y(t)`, `z(t)` which do not extend continuously to `t = 0`.
pub fn cap_closed_forms(t: f64) -> Result<(f64, f64, f64, f64)> {
    if !(t > 0.0 && t < FRAC_PI_2) {
        return Err(Error::Parameter(format!("t = {t} outside (0, pi/2)")));
    }
    let (c, s) = (t.cos(), t.sin());
    let y = 1.0 + 0.5 * c * ((1.0 - c) / (1.0 + c)).ln();
    let half = t / 2.0;
    let sec2 = 1.0 / half.cos().powi(2);
    let csc2 = 1.0 / half.sin().powi(2);
    let z = s / 8.0 * (sec2 + 4.0 * half.tan().ln() - csc2);
    Ok((c, s, y, z))
}

/// Annulus mode eigenvalues on `[-s0, s0]` with the symmetric Robin
/// eigencondition `+-a'(+-s0) = sigma a(+-s0)`, split into even and odd
/// half-line problems on `[0, s0]` (`a'(0) = 0` and `a(0) = 0`).
pub fn annulus_mode_eigs(
    shape: f64,
    s0: f64,
    k: usize,
    count: usize,
    alpha: f64,
) -> Result<ModeSpectrum> {
    if shape <= -0.5 || shape > 0.0 || shape.is_nan() {
        return Err(Error::Parameter(format!("annulus parameter {shape} outside (-1/2, 0]")));
    }
    if s0 <= 0.0 || !s0.is_finite() {
        return Err(Error::Parameter("s0 must be positive".into()));
    }
    if count == 0 {
        return Err(Error::Parameter("count must be positive".into()));
    }
    let problem = RadialProblem { domain: RadialDomain::Annulus { a: shape, s0 }, k, alpha };
    let rhs = annulus_rhs(shape, alpha, k);

    let mut found: Vec<(f64, Parity, Vec<[f64; 3]>)> = Vec::new();
    for (parity, y0) in [(Parity::Even, [1.0, 0.0]), (Parity::Odd, [0.0, 1.0])] {
        let end = ode::integrate(&rhs, 0.0, s0, y0, SHOOT_RTOL, &mut |_, _| {})?;
        if let Some(sigma) = robin_eigenvalue(end[0], end[1]) {
            let scale = end[0];
            let profile = sample_profile(&rhs, 0.0, s0, y0, PROFILE_SAMPLES)?
                .into_iter()
                .map(|(t, y)| [t, y[0] / scale, y[1] / scale])
                .collect();
            found.push((sigma, parity, profile));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.truncate(count);

    let mut eigenvalues = Vec::new();
    let mut radial_profiles = Vec::new();
    let mut parity = Vec::new();
    for (sigma, p, profile) in found {
        eigenvalues.push(sigma);
        parity.push(Some(p));
        radial_profiles.push(profile);
    }
    Ok(ModeSpectrum { problem, eigenvalues, radial_profiles, parity })
}

/// Merge mode spectra into one sorted labeled spectrum, applying angular
/// multiplicity 2 for every `k >= 1`. All inputs must share domain and
/// frequency.
pub fn merge_modes(spectra: &[ModeSpectrum], count: usize) -> Result<Vec<MergedEntry>> {
    if spectra.is_empty() {
        return Ok(Vec::new());
    }
    let domain = spectra[0].problem.domain;
    let alpha = spectra[0].problem.alpha;
    for sp in spectra {
        if sp.problem.domain != domain || sp.problem.alpha != alpha {
            return Err(Error::Parameter("merge requires a shared domain and frequency".into()));
        }
    }
    let mut merged = Vec::new();
    for sp in spectra {
        let copies = if sp.problem.k == 0 { 1 } else { 2 };
        for (i, &sigma) in sp.eigenvalues.iter().enumerate() {
            for _ in 0..copies {
                merged.push(MergedEntry { sigma, k: sp.problem.k, parity: sp.parity[i] });
            }
        }
    }
    merged.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
    merged.truncate(count);
    Ok(merged)
}
