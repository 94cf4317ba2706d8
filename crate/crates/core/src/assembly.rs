//! Metric fields on a mesh and the piecewise-linear finite-element matrices
//! realizing the quadratic form of the Steklov-with-frequency problem:
//! stiffness `K`, interior mass `M`, boundary mass `B`, and `A = K - alpha M`.

use serde::{Deserialize, Serialize};

use crate::mesh::Mesh;
use crate::sparse::{Builder, SymCsr};
use crate::{Error, Result};

/// Riemannian metric on a mesh: either a per-vertex conformal log-factor
/// over the flat reference metric, or per-triangle symmetric 2x2 matrices
/// `[g11, g12, g22]` in reference coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MetricField {
    Conformal { log_factor: Vec<f64> },
    General { g: Vec<[f64; 3]> },
}

impl MetricField {
    /// Flat reference metric (zero log-factor).
    pub fn flat(mesh: &Mesh) -> MetricField {
        MetricField::Conformal { log_factor: vec![0.0; mesh.vertices.len()] }
    }

    /// Round spherical-cap metric of radius `r`, pulled back to the unit disk.
    pub fn cap(mesh: &Mesh, r: f64) -> Result<MetricField> {
        let log_factor = mesh
            .vertices
            .iter()
            .map(|&p| cap_conformal_factor(r, p).map(f64::ln))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricField::Conformal { log_factor })
    }

    /// Per-vertex conformal factors `exp(log_factor)`.
    pub fn conformal_factors(&self) -> Option<Vec<f64>> {
        match self {
            MetricField::Conformal { log_factor } => {
                Some(log_factor.iter().map(|&l| l.exp()).collect())
            }
            MetricField::General { .. } => None,
        }
    }

    /// Metric with the log-factor increased by `eps * w`. Fails on a
    /// general-kind input.
    pub fn perturbed(&self, w: &[f64], eps: f64) -> Result<MetricField> {
        match self {
            MetricField::Conformal { log_factor } => {
                if w.len() != log_factor.len() {
                    return Err(Error::Parameter(format!(
                        "direction length {} does not match vertex count {}",
                        w.len(),
                        log_factor.len()
                    )));
                }
                Ok(MetricField::Conformal {
                    log_factor: log_factor
                        .iter()
                        .zip(w)
                        .map(|(&l, &wi)| l + eps * wi)
                        .collect(),
                })
            }
            MetricField::General { .. } => Err(Error::Parameter(
                "perturbation requires a conformal metric".into(),
            )),
        }
    }

    /// Check the invariants against a mesh.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        match self {
            MetricField::Conformal { log_factor } => {
                if log_factor.len() != mesh.vertices.len() {
                    return Err(Error::Parameter(format!(
                        "log_factor length {} does not match vertex count {}",
                        log_factor.len(),
                        mesh.vertices.len()
                    )));
                }
                if let Some(i) = log_factor.iter().position(|l| !l.is_finite()) {
                    return Err(Error::Parameter(format!("non-finite log-factor at vertex {i}")));
                }
                Ok(())
            }
            MetricField::General { g } => {
                if g.len() != mesh.triangles.len() {
                    return Err(Error::Parameter(format!(
                        "metric length {} does not match triangle count {}",
                        g.len(),
                        mesh.triangles.len()
                    )));
                }
                for (t, &[g11, g12, g22]) in g.iter().enumerate() {
                    let det = g11 * g22 - g12 * g12;
                    if g11 <= 0.0 || det <= 0.0 || !det.is_finite() {
                        return Err(Error::Assembly {
                            triangle: t,
                            detail: format!("g = [{g11}, {g12}, {g22}], det = {det}"),
                        });
                    }
                }
                Ok(())
            }
        }
    }

    pub fn read_json(path: &std::path::Path) -> Result<MetricField> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Conformal factor of the round cap of radius `r` pulled back to the unit
/// disk through the stereographic chart: `4 T^2 / (1 + T^2 |w|^2)^2` with
/// `T = tan(r/2)`.
pub fn cap_conformal_factor(r: f64, point: [f64; 2]) -> Result<f64> {
    if r <= 0.0 || r > std::f64::consts::FRAC_PI_2 || r.is_nan() {
        return Err(Error::Parameter(format!("cap radius {r} outside (0, pi/2]")));
    }
    let t = (r / 2.0).tan();
    let rho2 = point[0] * point[0] + point[1] * point[1];
    let denom = 1.0 + t * t * rho2;
    Ok(4.0 * t * t / (denom * denom))
}

/// Assembled operators for one `(mesh, metric, alpha)` triple.
#[derive(Debug)]
pub struct OperatorBundle {
    pub k: SymCsr,
    pub m: SymCsr,
    pub b: SymCsr,
    pub a: SymCsr,
    pub alpha: f64,
}

/// Areas and boundary lengths of `(mesh, metric)`.
#[derive(Debug, Clone, Serialize)]
pub struct Measure {
    pub area: f64,
    pub loop_lengths: Vec<f64>,
    pub boundary_length: f64,
}

fn triangle_gradients(p: &[[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let area = 0.5
        * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut grads = [[0.0; 2]; 3];
    for i in 0..3 {
        let e = [p[(i + 2) % 3][0] - p[(i + 1) % 3][0], p[(i + 2) % 3][1] - p[(i + 1) % 3][1]];
        grads[i] = [-e[1] / (2.0 * area), e[0] / (2.0 * area)];
    }
    (area, grads)
}

/// Exact integral of the product of three P1 basis functions divided by the
/// triangle area: `w(i, j, k) = (1/A) \int phi_i phi_j phi_k`.
fn trilinear_weight(i: usize, j: usize, k: usize) -> f64 {
    let same = (i == j) as u8 + (j == k) as u8 + (i == k) as u8;
    match same {
        3 => 1.0 / 10.0,
        1 => 1.0 / 30.0,
        _ => 1.0 / 60.0,
    }
}

/// Consistent mass matrix with a per-vertex coefficient field interpolated
/// linearly inside triangles. With `coeff = exp(log_factor)` this is the
/// metric mass matrix of a conformal field.
pub fn weighted_conformal_mass(mesh: &Mesh, coeff: &[f64]) -> SymCsr {
    let mut builder = Builder::new(mesh.vertices.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_coords(t);
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let mut local = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += coeff[tri[k]] * trilinear_weight(i, j, k);
                }
                local[i][j] = area * acc;
            }
        }
        builder.add_block(tri, &local);
    }
    builder.finish()
}

fn edge_vector(mesh: &Mesh, owner: usize, a: usize, b: usize) -> [f64; 2] {
    let tri = mesh.triangles[owner];
    let coords = mesh.triangle_coords(owner);
    let pos = |v: usize| tri.iter().position(|&x| x == v).expect("vertex on owner triangle");
    let (pa, pb) = (coords[pos(a)], coords[pos(b)]);
    [pb[0] - pa[0], pb[1] - pa[1]]
}

/// Consistent boundary mass with a per-vertex weight field interpolated
/// linearly along boundary edges. With `weight = sqrt(factor)` this is the
/// boundary mass of a conformal field.
pub fn weighted_boundary_mass(mesh: &Mesh, weight: &[f64]) -> SymCsr {
    let mut builder = Builder::new(mesh.vertices.len());
    for (&(a, b), &owner) in mesh.boundary_edges().iter() {
        let e = edge_vector(mesh, owner, a, b);
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        let (wa, wb) = (weight[a], weight[b]);
        let local = [
            [len * (3.0 * wa + wb) / 12.0, len * (wa + wb) / 12.0],
            [len * (wa + wb) / 12.0, len * (wa + 3.0 * wb) / 12.0],
        ];
        builder.add_block(&[a, b], &local);
    }
    builder.finish()
}

/// Assemble `K`, `M`, `B` and `A = K - alpha M` for `(mesh, metric, alpha)`.
///
/// `K` uses per-triangle `g^{-1} sqrt(det g)` with piecewise-linear
/// gradients (the identity for any conformal field); `M` is the consistent
/// mass with weight `sqrt(det g)`; `B` is the consistent 1D boundary mass
/// with the metric length element along boundary edges.
pub fn assemble(mesh: &Mesh, metric: &MetricField, alpha: f64) -> Result<OperatorBundle> {
    metric.validate(mesh)?;
    let nv = mesh.vertices.len();

    let mut k_builder = Builder::new(nv);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_coords(t);
        let (area, grads) = triangle_gradients(&p);
        if area <= 0.0 {
            return Err(Error::InvalidMesh(format!("nonpositive area at triangle {t}")));
        }
        // g^{ij} sqrt(det g); the identity for conformal metrics
        let gmat = match metric {
            MetricField::Conformal { .. } => [[1.0, 0.0], [0.0, 1.0]],
            MetricField::General { g } => {
                let [g11, g12, g22] = g[t];
                let det = g11 * g22 - g12 * g12;
                let s = det.sqrt();
                [[g22 / s, -g12 / s], [-g12 / s, g11 / s]]
            }
        };
        let mut local = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let gi = grads[i];
                let gj = grads[j];
                local[i][j] = area
                    * (gi[0] * (gmat[0][0] * gj[0] + gmat[0][1] * gj[1])
                        + gi[1] * (gmat[1][0] * gj[0] + gmat[1][1] * gj[1]));
            }
        }
        k_builder.add_block(tri, &local);
    }
    let mut k = k_builder.finish();
    // pin the constant kernel: fold each row's rounding residue into the diagonal
    let ones = vec![1.0; nv];
    let mut residue = vec![0.0; nv];
    k.matvec(&ones, &mut residue);
    for i in 0..nv {
        for idx in k.row_ptr[i]..k.row_ptr[i + 1] {
            if k.cols[idx] == i {
                k.vals[idx] -= residue[i];
            }
        }
    }

    let m = match metric {
        MetricField::Conformal { log_factor } => {
            let coeff: Vec<f64> = log_factor.iter().map(|&l| l.exp()).collect();
            weighted_conformal_mass(mesh, &coeff)
        }
        MetricField::General { g } => {
            let mut builder = Builder::new(nv);
            for (t, tri) in mesh.triangles.iter().enumerate() {
                let area = mesh.triangle_area(t);
                let [g11, g12, g22] = g[t];
                let w = (g11 * g22 - g12 * g12).sqrt() * area / 12.0;
                let local = [[2.0 * w, w, w], [w, 2.0 * w, w], [w, w, 2.0 * w]];
                builder.add_block(tri, &local);
            }
            builder.finish()
        }
    };

    let b = match metric {
        MetricField::Conformal { log_factor } => {
            let weight: Vec<f64> = log_factor.iter().map(|&l| (0.5 * l).exp()).collect();
            weighted_boundary_mass(mesh, &weight)
        }
        MetricField::General { g } => {
            let mut builder = Builder::new(nv);
            for (&(a, bv), &owner) in mesh.boundary_edges().iter() {
                let e = edge_vector(mesh, owner, a, bv);
                let [g11, g12, g22] = g[owner];
                let len =
                    (g11 * e[0] * e[0] + 2.0 * g12 * e[0] * e[1] + g22 * e[1] * e[1]).sqrt();
                let local = [[len / 3.0, len / 6.0], [len / 6.0, len / 3.0]];
                builder.add_block(&[a, bv], &local);
            }
            builder.finish()
        }
    };

    let a = k.add_scaled(&m, -alpha);
    Ok(OperatorBundle { k, m, b, a, alpha })
}

/// Area and per-loop boundary lengths of `(mesh, metric)`.
pub fn measure(mesh: &Mesh, metric: &MetricField) -> Result<Measure> {
    metric.validate(mesh)?;
    let area = match metric {
        MetricField::Conformal { log_factor } => {
            let mut acc = 0.0;
            for (t, tri) in mesh.triangles.iter().enumerate() {
                let area = mesh.triangle_area(t);
                let csum: f64 = tri.iter().map(|&v| log_factor[v].exp()).sum();
                acc += area * csum / 3.0;
            }
            acc
        }
        MetricField::General { g } => {
            let mut acc = 0.0;
            for (t, &[g11, g12, g22]) in g.iter().enumerate() {
                acc += mesh.triangle_area(t) * (g11 * g22 - g12 * g12).sqrt();
            }
            acc
        }
    };

    let owners = mesh.boundary_edges();
    let mut loop_lengths = Vec::with_capacity(mesh.boundary_loops.len());
    for bd_loop in &mesh.boundary_loops {
        let mut len = 0.0;
        for i in 0..bd_loop.len() {
            let (a, b) = (bd_loop[i], bd_loop[(i + 1) % bd_loop.len()]);
            let key = (a.min(b), a.max(b));
            let owner = *owners
                .get(&key)
                .ok_or_else(|| Error::InvalidMesh(format!("loop edge {key:?} not on boundary")))?;
            let e = edge_vector(mesh, owner, a, b);
            len += match metric {
                MetricField::Conformal { log_factor } => {
                    let ref_len = (e[0] * e[0] + e[1] * e[1]).sqrt();
                    ref_len * ((0.5 * log_factor[a]).exp() + (0.5 * log_factor[b]).exp()) / 2.0
                }
                MetricField::General { g } => {
                    let [g11, g12, g22] = g[owner];
                    (g11 * e[0] * e[0] + 2.0 * g12 * e[0] * e[1] + g22 * e[1] * e[1]).sqrt()
                }
            };
        }
        loop_lengths.push(len);
    }
    let boundary_length = loop_lengths.iter().sum();
    Ok(Measure { area, loop_lengths, boundary_length })
}
