//! Dirichlet-to-Neumann realization at frequency `alpha` by Schur
//! complement, the Steklov-with-frequency eigensolver, and the
//! admissibility / nodal / multiplicity checks.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::assembly::{self, MetricField, OperatorBundle};
use crate::band::BandedCholesky;
use crate::mesh::Mesh;
use crate::sparse::position_table;
use crate::{Error, Result};

/// Dirichlet-gap certificate: `lambda0_dirichlet` is the smallest eigenvalue
/// of the interior pencil `K_II u = lambda M_II u`, and the metric is
/// admissible at `alpha` iff the gap is positive.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub alpha: f64,
    pub lambda0_dirichlet: f64,
    pub gap: f64,
    pub admissible: bool,
}

/// Sorted Steklov-with-frequency eigenpairs. `boundary_modes[j]` lists the
/// j-th eigenvector over `boundary_vertices` (B-orthonormal); `extensions[j]`
/// is the full-vertex discrete extension solving the interior equation.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub alpha: f64,
    pub eigenvalues: Vec<f64>,
    pub boundary_vertices: Vec<usize>,
    pub boundary_modes: Vec<Vec<f64>>,
    pub extensions: Vec<Vec<f64>>,
    /// Row sums of the boundary mass over `boundary_vertices`; the exact
    /// quadrature weights for boundary integrals of P1 fields.
    pub boundary_weights: Vec<f64>,
    pub admissibility: AdmissibilityReport,
}

fn interior_vertices(mesh: &Mesh) -> Vec<usize> {
    let boundary = mesh.boundary_vertices();
    let table = position_table(mesh.vertices.len(), &boundary);
    (0..mesh.vertices.len()).filter(|&v| table[v] == usize::MAX).collect()
}

fn lambda0_interior(bundle: &OperatorBundle, interior: &[usize]) -> Result<f64> {
    if interior.is_empty() {
        return Ok(f64::INFINITY);
    }
    let n = bundle.k.n;
    let table = position_table(n, interior);
    let k_ii = bundle.k.submatrix(interior, &table);
    let m_ii = bundle.m.submatrix(interior, &table);
    let chol = BandedCholesky::factor(&k_ii)?;

    // inverse iteration on the stiffness pencil
    let ni = interior.len();
    let mut x = vec![1.0; ni];
    let mut lambda = f64::INFINITY;
    let mut work = vec![0.0; ni];
    for _ in 0..10_000 {
        m_ii.matvec(&x, &mut work);
        chol.solve(&mut work);
        let norm2 = m_ii.quad_form(&work);
        if norm2 <= 0.0 || norm2.is_nan() {
            return Err(Error::Nonconvergence("interior mass degenerate".into()));
        }
        let scale = norm2.sqrt();
        for v in work.iter_mut() {
            *v /= scale;
        }
        std::mem::swap(&mut x, &mut work);
        let new_lambda = k_ii.quad_form(&x);
        if (new_lambda - lambda).abs() <= 1e-12 * new_lambda.abs().max(1.0) {
            return Ok(new_lambda);
        }
        lambda = new_lambda;
    }
    Ok(lambda)
}

/// Smallest interior Dirichlet eigenvalue and the admissibility gap at
/// `alpha`.
pub fn dirichlet_gap(mesh: &Mesh, metric: &MetricField, alpha: f64) -> Result<AdmissibilityReport> {
    let bundle = assembly::assemble(mesh, metric, alpha)?;
    dirichlet_gap_from_bundle(&bundle, mesh)
}

pub(crate) fn dirichlet_gap_from_bundle(
    bundle: &OperatorBundle,
    mesh: &Mesh,
) -> Result<AdmissibilityReport> {
    let interior = interior_vertices(mesh);
    let lambda0 = lambda0_interior(bundle, &interior)?;
    let gap = lambda0 - bundle.alpha;
    Ok(AdmissibilityReport {
        alpha: bundle.alpha,
        lambda0_dirichlet: lambda0,
        gap,
        admissible: gap > 0.0,
    })
}

/// Solve the Steklov-with-frequency eigenproblem: form the boundary Schur
/// complement `S = A_GG - A_GI A_II^{-1} A_IG` and solve the
/// symmetric-definite pencil `S u = sigma B u` for the lowest `count` pairs.
pub fn steklov_spectrum(
    mesh: &Mesh,
    metric: &MetricField,
    alpha: f64,
    count: usize,
) -> Result<SpectrumResult> {
    let bundle = assembly::assemble(mesh, metric, alpha)?;
    steklov_spectrum_from_bundle(&bundle, mesh, count)
}

pub(crate) fn steklov_spectrum_from_bundle(
    bundle: &OperatorBundle,
    mesh: &Mesh,
    count: usize,
) -> Result<SpectrumResult> {
    let admissibility = dirichlet_gap_from_bundle(bundle, mesh)?;
    if !admissibility.admissible {
        return Err(Error::NotAdmissible { alpha: bundle.alpha, gap: admissibility.gap });
    }

    let n = bundle.a.n;
    let boundary = mesh.boundary_vertices();
    let interior = interior_vertices(mesh);
    let nb = boundary.len();
    let ni = interior.len();
    let count = count.min(nb);
    let b_pos = position_table(n, &boundary);
    let i_pos = position_table(n, &interior);

    // interior factorization doubles as the discrete admissibility certificate
    let a_ii = bundle.a.submatrix(&interior, &i_pos);
    let chol_ii = match BandedCholesky::factor(&a_ii) {
        Ok(c) => Some(c),
        Err(Error::Factorization { .. }) => {
            return Err(Error::NotAdmissible { alpha: bundle.alpha, gap: admissibility.gap })
        }
        Err(e) => return Err(e),
    };

    // coupling triplets (interior-local, boundary-local, value)
    let mut coupling = Vec::new();
    for (il, &i) in interior.iter().enumerate() {
        for (j, v) in bundle.a.row(i) {
            let bl = b_pos[j];
            if bl != usize::MAX {
                coupling.push((il, bl, v));
            }
        }
    }

    // X = A_II^{-1} A_IG, one banded solve per boundary column
    let mut x = DMatrix::<f64>::zeros(ni.max(1), nb);
    if let Some(chol) = &chol_ii {
        let mut rhs = vec![0.0; ni];
        for g in 0..nb {
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for &(il, bl, v) in &coupling {
                if bl == g {
                    rhs[il] = v;
                }
            }
            chol.solve(&mut rhs);
            for il in 0..ni {
                x[(il, g)] = rhs[il];
            }
        }
    }

    let mut s = DMatrix::<f64>::zeros(nb, nb);
    for (gl, &g) in boundary.iter().enumerate() {
        for (j, v) in bundle.a.row(g) {
            let hl = b_pos[j];
            if hl != usize::MAX {
                s[(gl, hl)] += v;
            }
        }
    }
    for &(il, bl, v) in &coupling {
        // A_GI = A_IG^T, so row bl of S loses v * X[il, :]
        for h in 0..nb {
            s[(bl, h)] -= v * x[(il, h)];
        }
    }

    let scale = s.iter().fold(0.0f64, |acc, &v| acc.max(v.abs())).max(1e-300);
    let asym = (&s - s.transpose()).iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if asym > 1e-10 * scale {
        return Err(Error::Nonconvergence(format!(
            "schur complement asymmetry {asym:e} exceeds tolerance"
        )));
    }
    let s = (&s + s.transpose()) * 0.5;

    let mut b_gg = DMatrix::<f64>::zeros(nb, nb);
    for (gl, &g) in boundary.iter().enumerate() {
        for (j, v) in bundle.b.row(g) {
            let hl = b_pos[j];
            if hl != usize::MAX {
                b_gg[(gl, hl)] += v;
            }
        }
    }
    let chol_b = Cholesky::new(b_gg.clone())
        .ok_or(Error::Factorization { pivot: 0, value: f64::NAN })?;
    let l = chol_b.l();
    let t1 = l
        .solve_lower_triangular(&s)
        .ok_or(Error::Factorization { pivot: 0, value: 0.0 })?;
    let c = l
        .solve_lower_triangular(&t1.transpose())
        .ok_or(Error::Factorization { pivot: 0, value: 0.0 })?;
    let c = (&c + c.transpose()) * 0.5;

    let eigen = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));

    let lt = l.transpose();
    let mut eigenvalues = Vec::with_capacity(count);
    let mut boundary_modes = Vec::with_capacity(count);
    let mut extensions = Vec::with_capacity(count);
    let ones = DVector::<f64>::from_element(nb, 1.0);
    for (rank, &idx) in order.iter().take(count).enumerate() {
        eigenvalues.push(eigen.eigenvalues[idx]);
        let y = eigen.eigenvectors.column(idx).into_owned();
        let mut u = lt
            .solve_upper_triangular(&y)
            .ok_or(Error::Factorization { pivot: 0, value: 0.0 })?;
        // deterministic signs: positive boundary mean for the ground mode,
        // positive dominant entry otherwise
        let flip = if rank == 0 {
            (u.transpose() * &b_gg * &ones)[(0, 0)] < 0.0
        } else {
            let mut dominant = 0;
            for i in 0..nb {
                if u[i].abs() > u[dominant].abs() {
                    dominant = i;
                }
            }
            u[dominant] < 0.0
        };
        if flip {
            u.neg_mut();
        }

        let mut extension = vec![0.0; n];
        for (gl, &g) in boundary.iter().enumerate() {
            extension[g] = u[gl];
        }
        if ni > 0 {
            let interior_part = -(&x * &u);
            for (il, &i) in interior.iter().enumerate() {
                extension[i] = interior_part[il];
            }
        }
        boundary_modes.push(u.iter().copied().collect());
        extensions.push(extension);
    }

    let boundary_weights = (&b_gg * &ones).iter().copied().collect();
    Ok(SpectrumResult {
        alpha: bundle.alpha,
        eigenvalues,
        boundary_vertices: boundary,
        boundary_modes,
        extensions,
        boundary_weights,
        admissibility,
    })
}

impl SpectrumResult {
    /// Rayleigh quotient of the stored pair `j` recomputed from the full
    /// matrices; equals the stored eigenvalue for a consistent solve.
    pub fn rayleigh_quotient(&self, bundle: &OperatorBundle, j: usize) -> f64 {
        let ext = &self.extensions[j];
        bundle.a.quad_form(ext) / bundle.b.quad_form(ext)
    }
}

/// Number of nodal domains of a vertex field: connected components of
/// `{v > 0}` and `{v < 0}` in the vertex adjacency graph. Zeros belong to
/// no component.
pub fn nodal_domains(mesh: &Mesh, values: &[f64]) -> Result<usize> {
    if values.len() != mesh.vertices.len() {
        return Err(Error::Parameter("field length does not match vertex count".into()));
    }
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::Parameter("field is identically zero".into()));
    }
    let adjacency = mesh.vertex_adjacency();
    let mut component = vec![usize::MAX; values.len()];
    let mut count = 0;
    for start in 0..values.len() {
        if values[start] == 0.0 || component[start] != usize::MAX {
            continue;
        }
        let sign = values[start] > 0.0;
        component[start] = count;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if component[w] == usize::MAX && values[w] != 0.0 && (values[w] > 0.0) == sign {
                    component[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    Ok(count)
}

/// Greedy clustering of a sorted eigenvalue list: consecutive values join a
/// cluster when their gap is at most `rel_tol * max(1, |sigma|)`.
pub fn cluster_multiplicities(eigenvalues: &[f64], rel_tol: f64) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut current = 0usize;
    for i in 0..eigenvalues.len() {
        if current == 0 {
            current = 1;
            continue;
        }
        let gap = eigenvalues[i] - eigenvalues[i - 1];
        let scale = eigenvalues[i].abs().max(eigenvalues[i - 1].abs()).max(1.0);
        if gap <= rel_tol * scale {
            current += 1;
        } else {
            sizes.push(current);
            current = 1;
        }
    }
    if current > 0 {
        sizes.push(current);
    }
    sizes
}

/// Default relative clustering tolerance used by the solvers and the CLI.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-2;
