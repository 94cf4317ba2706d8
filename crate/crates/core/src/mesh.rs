//! Triangulated reference domains (disk, periodic cylinder) with ordered
//! boundary loops. All metrics live on top of these meshes.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A triangulated reference domain.
///
/// Vertices are 2D reference coordinates; triangles are counterclockwise
/// vertex-index triples; boundary loops are ordered vertex cycles. For
/// periodic (cylinder) meshes `angular_period` marks the second coordinate
/// as periodic, and per-triangle coordinates must be read through
/// [`Mesh::triangle_coords`], which unwraps seam triangles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_loops: Vec<Vec<usize>>,
    pub genus: usize,
    pub boundary_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_period: Option<f64>,
}

impl Mesh {
    /// Concentric-ring triangulation of the unit disk: one center vertex,
    /// ring `i` of `n_angular` vertices at radius `i / n_rings`.
    pub fn disk(n_rings: usize, n_angular: usize) -> Result<Mesh> {
        if n_rings == 0 {
            return Err(Error::Parameter("n_rings must be positive".into()));
        }
        if n_angular < 3 {
            return Err(Error::Parameter("n_angular must be at least 3".into()));
        }
        let vid = |ring: usize, j: usize| -> usize {
            // ring >= 1
            1 + (ring - 1) * n_angular + (j % n_angular)
        };
        let mut vertices = vec![[0.0, 0.0]];
        for ring in 1..=n_rings {
            let radius = ring as f64 / n_rings as f64;
            for j in 0..n_angular {
                let th = 2.0 * PI * j as f64 / n_angular as f64;
                vertices.push([radius * th.cos(), radius * th.sin()]);
            }
        }
        let mut triangles = Vec::with_capacity(n_angular * (2 * n_rings - 1));
        for j in 0..n_angular {
            triangles.push([0, vid(1, j), vid(1, j + 1)]);
        }
        for ring in 1..n_rings {
            for j in 0..n_angular {
                let (a, b) = (vid(ring, j), vid(ring, j + 1));
                let (c, d) = (vid(ring + 1, j), vid(ring + 1, j + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        let boundary: Vec<usize> = (0..n_angular).map(|j| vid(n_rings, j)).collect();
        Ok(Mesh {
            vertices,
            triangles,
            boundary_loops: vec![boundary],
            genus: 0,
            boundary_count: 1,
            angular_period: None,
        })
    }

    /// Structured grid triangulation of `[-s0, s0] x S^1`, periodic in the
    /// angular direction, with `n_s + 1` rows of `n_angular` vertices.
    pub fn cylinder(s0: f64, n_s: usize, n_angular: usize) -> Result<Mesh> {
        if s0 <= 0.0 || !s0.is_finite() {
            return Err(Error::Parameter("s0 must be positive".into()));
        }
        if n_s == 0 {
            return Err(Error::Parameter("n_s must be positive".into()));
        }
        if n_angular < 3 {
            return Err(Error::Parameter("n_angular must be at least 3".into()));
        }
        let vid = |row: usize, j: usize| row * n_angular + (j % n_angular);
        let mut vertices = Vec::with_capacity((n_s + 1) * n_angular);
        for row in 0..=n_s {
            let s = -s0 + 2.0 * s0 * row as f64 / n_s as f64;
            for j in 0..n_angular {
                let th = 2.0 * PI * j as f64 / n_angular as f64;
                vertices.push([s, th]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n_s * n_angular);
        for row in 0..n_s {
            for j in 0..n_angular {
                let (a, b) = (vid(row, j), vid(row, j + 1));
                let (c, d) = (vid(row + 1, j), vid(row + 1, j + 1));
                // fixed diagonal a-d
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        let lower: Vec<usize> = (0..n_angular).collect();
        let upper: Vec<usize> = (0..n_angular).map(|j| vid(n_s, j)).collect();
        Ok(Mesh {
            vertices,
            triangles,
            boundary_loops: vec![lower, upper],
            genus: 0,
            boundary_count: 2,
            angular_period: Some(2.0 * PI),
        })
    }

    /// Reference coordinates of triangle `t`, seam-unwrapped for periodic
    /// meshes so that plane geometry (areas, gradients) is valid per triangle.
    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [i, j, k] = self.triangles[t];
        let mut p = [self.vertices[i], self.vertices[j], self.vertices[k]];
        if let Some(period) = self.angular_period {
            let base = p[0][1];
            for q in p.iter_mut().skip(1) {
                while q[1] - base > period / 2.0 {
                    q[1] -= period;
                }
                while q[1] - base < -period / 2.0 {
                    q[1] += period;
                }
            }
        }
        p
    }

    /// Signed reference area of triangle `t` (positive when counterclockwise).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_coords(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Undirected edge map: (min, max) vertex pair to incident triangles.
    pub fn edge_map(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edges.entry(key).or_default().push(t);
            }
        }
        edges
    }

    /// Boundary edges with their unique owning triangle, keyed (min, max).
    pub fn boundary_edges(&self) -> BTreeMap<(usize, usize), usize> {
        self.edge_map()
            .into_iter()
            .filter(|(_, ts)| ts.len() == 1)
            .map(|(e, ts)| (e, ts[0]))
            .collect()
    }

    /// Sorted list of boundary vertices (concatenation of all loops).
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_loops.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Vertex-to-vertex adjacency from triangle edges.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in self.edge_map().keys() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// All invariant violations; empty iff the mesh is valid. Violations are
    /// reported, never repaired.
    pub fn validate(&self) -> Vec<String> {
        let mut diagnostics = Vec::new();
        let nv = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                diagnostics.push(format!("vertex index out of range at triangle {t}"));
                return diagnostics;
            }
        }
        for t in 0..self.triangles.len() {
            if self.triangle_area(t) <= 0.0 {
                diagnostics.push(format!("negative area at triangle {t}"));
            }
        }

        let edges = self.edge_map();
        let mut boundary_edges = Vec::new();
        for (&(a, b), ts) in edges.iter() {
            match ts.len() {
                1 => boundary_edges.push((a, b)),
                2 => {}
                n => diagnostics.push(format!("edge ({a},{b}) belongs to {n} triangles")),
            }
        }

        let euler = nv as i64 - edges.len() as i64 + self.triangles.len() as i64;
        let expected = 2 - 2 * self.genus as i64 - self.boundary_count as i64;
        if euler != expected {
            diagnostics.push(format!(
                "euler characteristic {euler} does not match 2 - 2*{} - {} = {expected}",
                self.genus, self.boundary_count
            ));
        }

        if self.boundary_loops.len() != self.boundary_count {
            diagnostics.push(format!(
                "boundary loop count {} does not match boundary_count {}",
                self.boundary_loops.len(),
                self.boundary_count
            ));
        }

        // loops must traverse exactly the set of boundary edges, once each
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (l, bd_loop) in self.boundary_loops.iter().enumerate() {
            if bd_loop.len() < 2 {
                diagnostics.push(format!("boundary loop {l} has fewer than 2 vertices"));
                continue;
            }
            for i in 0..bd_loop.len() {
                let (a, b) = (bd_loop[i], bd_loop[(i + 1) % bd_loop.len()]);
                let key = (a.min(b), a.max(b));
                match edges.get(&key).map(|ts| ts.len()) {
                    Some(1) => *seen.entry(key).or_insert(0) += 1,
                    Some(_) => diagnostics
                        .push(format!("loop {l} traverses interior edge ({a},{b})")),
                    None => diagnostics.push(format!("loop {l} uses missing edge ({a},{b})")),
                }
            }
        }
        for (edge, count) in &seen {
            if *count > 1 {
                diagnostics.push(format!("boundary edge {edge:?} traversed {count} times"));
            }
        }
        for edge in &boundary_edges {
            if !seen.contains_key(edge) {
                diagnostics.push(format!("boundary edge {edge:?} not covered by any loop"));
            }
        }
        diagnostics
    }

    pub fn read_json(path: &std::path::Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
