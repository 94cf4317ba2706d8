//! The rotational free-boundary minimal annuli in spherical caps:
//! quadrature evaluation of the profile functions, `(a, s0)` root-finding
//! per cap radius, the spectral gap coefficient `mu`, and the immersed
//! mesh + metric + coordinate fields.

use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

use crate::assembly::MetricField;
use crate::mesh::Mesh;
use crate::quad;
use crate::theta::theta_bound;
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-12;
const SHAPE_FLOOR: f64 = -0.5 + 1e-9;

/// One rotational annulus: cap radius `r`, profile parameter `a`, half-length
/// `s0`, spectral gap `mu`, free-boundary residuals for the four coordinates,
/// and the embeddedness certificate.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyPoint {
    pub r: f64,
    pub a: f64,
    pub s0: f64,
    pub mu: f64,
    pub residuals: [f64; 4],
    pub embedded: bool,
}

/// The annulus realized as a cylinder mesh with the induced metric
/// `diag(1, 1 - rho^2)` and the four coordinate fields of the immersion.
pub struct ImmersedAnnulus {
    pub mesh: Mesh,
    pub metric: MetricField,
    pub coordinates: [Vec<f64>; 4],
}

/// Profile functions at `(a, s)`: `rho = sqrt(1/2 - a cos 2s)`,
/// `rho_bar = sqrt(1/2 + a cos 2s)`, the rotation angle `phi`, and the
/// second-solution integral `h`, both by adaptive quadrature.
pub fn rho_phi_h(a: f64, s: f64) -> Result<(f64, f64, f64, f64)> {
    check_shape(a)?;
    let rho = (0.5 - a * (2.0 * s).cos()).sqrt();
    let rho_bar = (0.5 + a * (2.0 * s).cos()).sqrt();
    let c = (0.25 - a * a).sqrt();
    let phi = c * quad::integrate(
        |t| {
            let r2 = 0.5 - a * (2.0 * t).cos();
            let rb = (0.5 + a * (2.0 * t).cos()).sqrt();
            1.0 / (r2 * rb)
        },
        0.0,
        s,
        QUAD_TOL,
    );
    let h = quad::integrate(
        |t| (0.5 + a * (2.0 * t).cos()).powf(-1.5),
        0.0,
        s,
        QUAD_TOL,
    );
    Ok((rho, rho_bar, phi, h))
}

fn check_shape(a: f64) -> Result<()> {
    if a <= -0.5 || a > 0.0 || a.is_nan() {
        return Err(Error::Parameter(format!("profile parameter {a} outside (-1/2, 0]")));
    }
    Ok(())
}

/// `d/ds [rho cos phi]` and companions at `(a, s)`.
fn profile_state(a: f64, s: f64) -> Result<ProfileState> {
    let (rho, rho_bar, phi, _) = rho_phi_h(a, s)?;
    let rho_prime = a * (2.0 * s).sin() / rho;
    let rho_bar_prime = -a * (2.0 * s).sin() / rho_bar;
    let phi_prime = (0.25 - a * a).sqrt() / (rho * rho * rho_bar);
    Ok(ProfileState { rho, rho_bar, phi, rho_prime, rho_bar_prime, phi_prime })
}

struct ProfileState {
    rho: f64,
    rho_bar: f64,
    phi: f64,
    rho_prime: f64,
    rho_bar_prime: f64,
    phi_prime: f64,
}

impl ProfileState {
    fn x0(&self) -> f64 {
        self.rho * self.phi.cos()
    }
    fn x0_prime(&self) -> f64 {
        self.rho_prime * self.phi.cos() - self.rho * self.phi.sin() * self.phi_prime
    }
    fn x1(&self) -> f64 {
        self.rho * self.phi.sin()
    }
    fn x1_prime(&self) -> f64 {
        self.rho_prime * self.phi.sin() + self.rho * self.phi.cos() * self.phi_prime
    }
}

/// Root system for `(a, s0)`: boundary containment `rho cos phi = cos r`
/// paired with the coordinate-2 Robin condition
/// `sin(r) rho_bar' = cos(r) rho_bar`. The containment condition plus the
/// 0-th derivative condition alone make a degenerate pair (the ball normal
/// is anti-parallel to the in-plane projection of `e0`, so that mismatch is
/// quadratic in the contact angle); the coordinate-2 condition is linear in
/// the angle and keeps Newton well conditioned.
fn boundary_conditions(a: f64, s0: f64, r: f64) -> Result<[f64; 2]> {
    let st = profile_state(a, s0)?;
    Ok([st.x0() - r.cos(), r.sin() * st.rho_bar_prime - r.cos() * st.rho_bar])
}

/// Solve `(F1, F2)(a, s0) = 0` at cap radius `r` by damped Newton with a
/// finite-difference Jacobian, seeded by continuation from the closed-form
/// point `(a, s0) = (0, pi / (2 sqrt 2))` at `r = pi/2` and marched downward.
pub fn solve_family(r: f64) -> Result<FamilyPoint> {
    Ok(solve_family_grid(&[r])?.remove(0))
}

/// Solve a set of cap radii in one continuation march from `pi/2` downward.
/// Returns points in the order of the input radii.
pub fn solve_family_grid(rs: &[f64]) -> Result<Vec<FamilyPoint>> {
    // decimal-truncated pi/2 inputs land a hair above the endpoint
    let rs: Vec<f64> = rs
        .iter()
        .map(|&r| if (r - FRAC_PI_2).abs() <= 1e-9 { FRAC_PI_2 } else { r })
        .collect();
    for &r in &rs {
        if r <= 0.0 || r > FRAC_PI_2 || r.is_nan() {
            return Err(Error::Parameter(format!("cap radius {r} outside (0, pi/2]")));
        }
    }
    let mut order: Vec<usize> = (0..rs.len()).collect();
    order.sort_by(|&i, &j| rs[j].total_cmp(&rs[i])); // descending r

    let mut results: Vec<Option<FamilyPoint>> = vec![None; rs.len()];
    let mut state = (0.0f64, FRAC_PI_2 / std::f64::consts::SQRT_2); // (a, s0) at r = pi/2
    let mut r_current = FRAC_PI_2;
    for &idx in &order {
        let target = rs[idx];
        state = continue_to(state, r_current, target)?;
        r_current = target;
        results[idx] = Some(finish_point(target, state.0, state.1)?);
    }
    Ok(results.into_iter().map(|p| p.expect("all targets solved")).collect())
}

fn continue_to(mut state: (f64, f64), from_r: f64, target: f64) -> Result<(f64, f64)> {
    let mut r = from_r;
    let mut step = 0.02f64;
    let mut last_good = from_r;
    while r > target + 1e-14 {
        let next = (r - step).max(target);
        match newton(state, next) {
            Ok(sol) => {
                state = sol;
                r = next;
                last_good = r;
                step = (step * 1.5).min(0.02);
            }
            Err(_) if step > 1e-4 => step /= 2.0,
            Err(e) => {
                return Err(Error::Continuation {
                    last_good,
                    detail: format!("newton failed marching to {next}: {e}"),
                })
            }
        }
    }
    if (from_r - target).abs() < 1e-14 {
        // re-polish at the seed radius
        state = newton(state, target)?;
    }
    Ok(state)
}

fn newton(seed: (f64, f64), r: f64) -> Result<(f64, f64)> {
    let (mut a, mut s0) = seed;
    let mut f = boundary_conditions(a, s0, r)?;
    for _ in 0..60 {
        let norm = f[0].abs().max(f[1].abs());
        if norm <= 1e-13 {
            return Ok((a, s0));
        }
        let ha = 1e-7 * a.abs().max(1e-2);
        let hs = 1e-7 * s0.abs().max(1e-2);
        let a_hi = (a + ha).min(0.0);
        let a_lo = (a - ha).max(SHAPE_FLOOR);
        let fa_hi = boundary_conditions(a_hi, s0, r)?;
        let fa_lo = boundary_conditions(a_lo, s0, r)?;
        let fs_hi = boundary_conditions(a, s0 + hs, r)?;
        let fs_lo = boundary_conditions(a, s0 - hs, r)?;
        let j = [
            [(fa_hi[0] - fa_lo[0]) / (a_hi - a_lo), (fs_hi[0] - fs_lo[0]) / (2.0 * hs)],
            [(fa_hi[1] - fa_lo[1]) / (a_hi - a_lo), (fs_hi[1] - fs_lo[1]) / (2.0 * hs)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::Nonconvergence("singular jacobian in family solve".into()));
        }
        let da = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let ds = (j[0][0] * f[1] - j[1][0] * f[0]) / det;

        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let a_try = (a - lambda * da).clamp(SHAPE_FLOOR, 0.0);
            let s_try = s0 - lambda * ds;
            if s_try > 1e-6 {
                if let Ok(f_try) = boundary_conditions(a_try, s_try, r) {
                    if f_try[0].abs().max(f_try[1].abs()) < norm {
                        a = a_try;
                        s0 = s_try;
                        f = f_try;
                        improved = true;
                        break;
                    }
                }
            }
            lambda /= 2.0;
        }
        if !improved {
            return Err(Error::Nonconvergence("newton line search stalled".into()));
        }
    }
    let norm = f[0].abs().max(f[1].abs());
    if norm <= 1e-10 {
        Ok((a, s0))
    } else {
        Err(Error::Nonconvergence(format!("family newton residual {norm:e}")))
    }
}

fn finish_point(r: f64, a: f64, s0: f64) -> Result<FamilyPoint> {
    let mu = mu_coefficient(a, s0)?;
    let mut point = FamilyPoint { r, a, s0, mu, residuals: [0.0; 4], embedded: false };
    point.residuals = free_boundary_residuals(&point)?;
    point.embedded = embedded_certificate(&point)?;
    Ok(point)
}

/// `mu = 1 / [ (1 - rho(s0)^2)^{3/2} \int_0^{s0} (1 - rho^2)^{-3/2} ]`,
/// the gap between the two `k = 1` Steklov eigenvalues of the annulus.
pub fn mu_coefficient(a: f64, s0: f64) -> Result<f64> {
    check_shape(a)?;
    if s0 <= 0.0 || s0.is_nan() {
        return Err(Error::Parameter("s0 must be positive".into()));
    }
    let (_, rho_bar, _, h) = rho_phi_h(a, s0)?;
    Ok(1.0 / (rho_bar.powi(3) * h))
}

/// Residuals of the free-boundary conditions at `s = s0` for the four
/// coordinates, in the projective form that stays finite at `r = pi/2`:
/// `cos(r) dphi_0/ds + sin(r) phi_0` and `sin(r) dphi_i/ds - cos(r) phi_i`.
/// Only two of these were solved for; the rest certify the point.
pub fn free_boundary_residuals(point: &FamilyPoint) -> Result<[f64; 4]> {
    let st = profile_state(point.a, point.s0)?;
    let (cr, sr) = (point.r.cos(), point.r.sin());
    let r0 = cr * st.x0_prime() + sr * st.x0();
    let r1 = sr * st.x1_prime() - cr * st.x1();
    let r23 = sr * st.rho_bar_prime - cr * st.rho_bar;
    Ok([r0, r1, r23, r23])
}

fn embedded_certificate(point: &FamilyPoint) -> Result<bool> {
    let samples = 512;
    for i in 1..=samples {
        let s = point.s0 * i as f64 / samples as f64;
        if profile_state(point.a, s)?.x0_prime() >= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Build the cylinder mesh, sample the four immersion coordinates at the
/// vertices, and store the induced metric `diag(1, 1 - rho^2)` per triangle
/// (midpoint evaluation in `s`).
pub fn immerse(point: &FamilyPoint, n_s: usize, n_angular: usize) -> Result<ImmersedAnnulus> {
    let mesh = Mesh::cylinder(point.s0, n_s, n_angular)?;
    let mut coords = [
        Vec::with_capacity(mesh.vertices.len()),
        Vec::with_capacity(mesh.vertices.len()),
        Vec::with_capacity(mesh.vertices.len()),
        Vec::with_capacity(mesh.vertices.len()),
    ];
    for &[s, th] in &mesh.vertices {
        let (rho, rho_bar, phi, _) = rho_phi_h(point.a, s)?;
        coords[0].push(rho * phi.cos());
        coords[1].push(rho * phi.sin());
        coords[2].push(rho_bar * th.cos());
        coords[3].push(rho_bar * th.sin());
    }
    let mut g = Vec::with_capacity(mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let p = mesh.triangle_coords(t);
        let s_mid = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
        let rho_bar2 = 0.5 + point.a * (2.0 * s_mid).cos();
        g.push([1.0, 0.0, rho_bar2]);
    }
    Ok(ImmersedAnnulus { mesh, metric: MetricField::General { g }, coordinates: coords })
}

/// Area, theta value, topological bound, and slack of a family point. The
/// boundary term of theta vanishes identically on the family
/// (`sigma_0 cos^2 r + sigma_1 sin^2 r = -sin r cos r + cos r sin r = 0`),
/// so `theta = 2 area` with `area = 2 pi \int rho_bar ds`.
pub fn family_theta(point: &FamilyPoint) -> Result<FamilyTheta> {
    let a = point.a;
    check_shape(a)?;
    let half = quad::integrate(
        |s| (0.5 + a * (2.0 * s).cos()).sqrt(),
        0.0,
        point.s0,
        QUAD_TOL,
    );
    let area = 4.0 * std::f64::consts::PI * half;
    let theta = 2.0 * area;
    let bound = theta_bound(0, 2, point.r);
    Ok(FamilyTheta { area, theta, bound, slack: bound - theta })
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyTheta {
    pub area: f64,
    pub theta: f64,
    pub bound: f64,
    pub slack: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    const S0_HALF_PI: f64 = FRAC_PI_2 / SQRT_2;

    #[test]
    fn profiles_at_zero_parameter() {
        for &s in &[0.3, 0.7, 1.1] {
            let (rho, rho_bar, phi, h) = rho_phi_h(0.0, s).unwrap();
            assert!((rho - 1.0 / SQRT_2).abs() < 1e-14);
            assert!((rho_bar - 1.0 / SQRT_2).abs() < 1e-14);
            assert!((phi - SQRT_2 * s).abs() < 1e-11, "phi {phi}");
            assert!((h - 2.0 * SQRT_2 * s).abs() < 1e-10, "h {h}");
        }
    }

    #[test]
    fn profiles_at_origin_and_evenness() {
        let (_, _, phi, h) = rho_phi_h(-0.3, 0.0).unwrap();
        assert_eq!(phi, 0.0);
        assert_eq!(h, 0.0);
        let (rp, ..) = rho_phi_h(-0.3, 0.5).unwrap();
        let (rm, ..) = rho_phi_h(-0.3, -0.5).unwrap();
        assert_eq!(rp, rm);
        // phi odd, h even
        let (_, _, phi_p, h_p) = rho_phi_h(-0.3, 0.8).unwrap();
        let (_, _, phi_m, h_m) = rho_phi_h(-0.3, -0.8).unwrap();
        assert!((phi_p + phi_m).abs() < 1e-12);
        assert!((h_p - h_m.abs()).abs() < 1e-12 || (h_p + h_m).abs() < 1e-12);
        assert!(rho_phi_h(0.2, 0.1).is_err());
    }

    #[test]
    fn closed_form_point_at_half_pi() {
        let point = solve_family(FRAC_PI_2).unwrap();
        assert!(point.a.abs() < 1e-8, "a = {}", point.a);
        assert!((point.s0 - S0_HALF_PI).abs() < 1e-8, "s0 = {}", point.s0);
        for (i, res) in point.residuals.iter().enumerate() {
            assert!(res.abs() <= 1e-8, "residual {i} = {res:e}");
        }
        assert!(point.embedded);
        let mu_exact = 2.0 * SQRT_2 / PI;
        assert!((point.mu - mu_exact).abs() < 1e-8, "mu = {}", point.mu);
    }

    #[test]
    fn mu_closed_form_and_positivity() {
        let mu = mu_coefficient(0.0, S0_HALF_PI).unwrap();
        assert!((mu - 2.0 * SQRT_2 / PI).abs() < 1e-10);
        for &(a, s0) in &[(-0.1, 0.8), (-0.3, 1.2), (-0.45, 1.0)] {
            assert!(mu_coefficient(a, s0).unwrap() > 0.0);
        }
    }

    #[test]
    fn continued_point_below_half_pi() {
        let point = solve_family(1.2).unwrap();
        assert!(point.a > -0.5 && point.a < 0.0, "a = {}", point.a);
        for res in point.residuals {
            assert!(res.abs() <= 1e-10, "residual {res:e}");
        }
        assert!(point.embedded);
        assert!(point.mu > 0.0);

        // breaking the parameter re-exposes the boundary conditions
        let broken = FamilyPoint { a: (point.a - 0.05).max(-0.49), ..point.clone() };
        let res = free_boundary_residuals(&broken).unwrap();
        assert!(res.iter().any(|r| r.abs() > 1e-3), "{res:?}");
    }

    #[test]
    fn grid_solves_in_one_march() {
        let rs = [1.4, 0.9, FRAC_PI_2, 1.2];
        let points = solve_family_grid(&rs).unwrap();
        for (r, p) in rs.iter().zip(&points) {
            assert_eq!(*r, p.r);
            for res in p.residuals {
                assert!(res.abs() <= 1e-9, "r = {r}: {res:e}");
            }
            assert!(p.embedded);
        }
    }

    #[test]
    fn immersion_identities() {
        let point = solve_family(FRAC_PI_2).unwrap();
        let annulus = immerse(&point, 30, 60).unwrap();
        assert!(annulus.mesh.validate().is_empty());
        let n = annulus.mesh.vertices.len();
        for v in 0..n {
            let norm2: f64 = (0..4).map(|c| annulus.coordinates[c][v].powi(2)).sum();
            assert!((norm2 - 1.0).abs() <= 1e-14, "vertex {v}: {norm2}");
        }
        // phi_0 = cos r on the boundary, >= cos r inside
        let cr = point.r.cos();
        let boundary = annulus.mesh.boundary_vertices();
        for &v in &boundary {
            assert!((annulus.coordinates[0][v] - cr).abs() <= 1e-10);
        }
        for v in 0..n {
            assert!(annulus.coordinates[0][v] >= cr - 1e-10);
        }
    }

    #[test]
    fn induced_metric_matches_coordinates() {
        // the discrete first fundamental form of the coordinate map should
        // match the stored metric to second order in the mesh size
        let point = solve_family(1.2).unwrap();
        let annulus = immerse(&point, 24, 48).unwrap();
        let mesh = &annulus.mesh;
        let g = match &annulus.metric {
            MetricField::General { g } => g,
            _ => unreachable!(),
        };
        let mut worst: f64 = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = mesh.triangle_coords(t);
            // affine map coefficients for each immersion coordinate
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let mut gi = [0.0f64; 3]; // g11, g12, g22 of the induced form
            for c in 0..4 {
                let f: Vec<f64> = tri.iter().map(|&v| annulus.coordinates[c][v]).collect();
                let ds = ((f[1] - f[0]) * (p[2][1] - p[0][1])
                    - (f[2] - f[0]) * (p[1][1] - p[0][1]))
                    / det;
                let dt = ((f[2] - f[0]) * (p[1][0] - p[0][0])
                    - (f[1] - f[0]) * (p[2][0] - p[0][0]))
                    / det;
                gi[0] += ds * ds;
                gi[1] += ds * dt;
                gi[2] += dt * dt;
            }
            worst = worst
                .max((gi[0] - g[t][0]).abs())
                .max((gi[1] - g[t][1]).abs())
                .max((gi[2] - g[t][2]).abs());
        }
        // O(h^2) with h ~ 2 pi / 48
        assert!(worst < 4.0 * (2.0 * PI / 48.0f64).powi(2), "worst deviation {worst}");
    }

    #[test]
    fn theta_at_half_pi() {
        let point = solve_family(FRAC_PI_2).unwrap();
        let ft = family_theta(&point).unwrap();
        assert!((ft.area - PI * PI).abs() < 1e-8, "area {}", ft.area);
        assert!((ft.theta - 2.0 * PI * PI).abs() < 2e-8);
        assert!((ft.bound - 8.0 * PI).abs() < 1e-12);
        assert!(ft.slack > 0.0);
    }
}
