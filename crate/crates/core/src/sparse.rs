//! Minimal symmetric sparse storage for the assembled operators.
//!
//! Full (not half) symmetric pattern in CSR, built deterministically from
//! per-element contributions. Sizes here are desk scale, so clarity beats
//! cleverness.

#[derive(Debug, Clone)]
pub struct SymCsr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Deterministic accumulator: one ordered map per row.
pub struct Builder {
    n: usize,
    rows: Vec<std::collections::BTreeMap<usize, f64>>,
}

impl Builder {
    pub fn new(n: usize) -> Builder {
        Builder { n, rows: vec![Default::default(); n] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        *self.rows[i].entry(j).or_insert(0.0) += v;
    }

    /// Add a symmetric local block for global indices `idx`.
    pub fn add_block<const K: usize>(&mut self, idx: &[usize; K], local: &[[f64; K]; K]) {
        for a in 0..K {
            for b in 0..K {
                self.add(idx[a], idx[b], local[a][b]);
            }
        }
    }

    pub fn finish(self) -> SymCsr {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &self.rows {
            for (&j, &v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SymCsr { n: self.n, row_ptr, cols, vals }
    }
}

impl SymCsr {
    pub fn zeros(n: usize) -> SymCsr {
        SymCsr { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                acc += x[i] * v * x[j];
            }
        }
        acc
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                acc += x[i] * v * y[j];
            }
        }
        acc
    }

    /// `self + c * other`, requiring `other` to share the same dimension.
    pub fn add_scaled(&self, other: &SymCsr, c: f64) -> SymCsr {
        assert_eq!(self.n, other.n);
        let mut b = Builder::new(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                b.add(i, j, v);
            }
            for (j, v) in other.row(i) {
                b.add(i, j, c * v);
            }
        }
        b.finish()
    }

    /// Submatrix for `rows` x `cols`, given dense lookup tables mapping each
    /// global index to its position in `rows`/`cols` (or `usize::MAX`).
    pub fn submatrix(&self, rows: &[usize], col_pos: &[usize]) -> SymCsr {
        let mut b = Builder::new(rows.len());
        for (ri, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                let cj = col_pos[j];
                if cj != usize::MAX {
                    b.add(ri, cj, v);
                }
            }
        }
        b.finish()
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let vt = self.get(j, i);
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for (c, v) in self.row(i) {
            if c == j {
                return v;
            }
        }
        0.0
    }
}

/// Position lookup table: `table[global] = local` or `usize::MAX`.
pub fn position_table(n: usize, selected: &[usize]) -> Vec<usize> {
    let mut table = vec![usize::MAX; n];
    for (local, &global) in selected.iter().enumerate() {
        table[global] = local;
    }
    table
}
