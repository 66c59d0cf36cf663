//! Sparse symmetric systems of the macro FEM: tridiagonal in 1D, CSR with
//! the 9-point Q1 pattern in 2D.

use super::mesh::Mesh;

#[derive(Clone, Debug)]
pub struct Csr {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Pattern of all node pairs sharing an element.
    pub fn pattern(mesh: &Mesh) -> Self {
        let nn = mesh.node_count();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nn];
        for e in 0..mesh.element_count() {
            let nodes = mesh.element_nodes(e);
            for &a in &nodes {
                rows[a].extend(nodes.iter().copied());
            }
        }
        let mut row_ptr = Vec::with_capacity(nn + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self { row_ptr, cols, vals }
    }

    pub fn position(&self, row: usize, col: usize) -> usize {
        let s = &self.cols[self.row_ptr[row]..self.row_ptr[row + 1]];
        self.row_ptr[row] + s.binary_search(&col).expect("entry is in the pattern")
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = (self.row_ptr[r]..self.row_ptr[r + 1]).map(|i| self.vals[i] * x[self.cols[i]]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.row_ptr.len() - 1).map(|r| self.vals[self.position(r, r)]).collect()
    }
}

/// Symmetric system matrix.
#[derive(Clone, Debug)]
pub enum System {
    /// `(sub, diag, sup)` with `sub[i]` coupling `i` and `i − 1`.
    Tridiagonal { sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64> },
    Sparse(Csr),
}

impl System {
    pub fn zeros(mesh: &Mesh) -> Self {
        let nn = mesh.node_count();
        if mesh.n() == 1 {
            System::Tridiagonal { sub: vec![0.0; nn], diag: vec![0.0; nn], sup: vec![0.0; nn] }
        } else {
            System::Sparse(Csr::pattern(mesh))
        }
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        match self {
            System::Tridiagonal { sub, diag, sup } => {
                if row == col {
                    diag[row] += v;
                } else if col + 1 == row {
                    sub[row] += v;
                } else {
                    sup[row] += v;
                }
            }
            System::Sparse(m) => {
                let p = m.position(row, col);
                m.vals[p] += v;
            }
        }
    }

    /// Replace row and column `node` by the identity.
    pub fn pin(&mut self, node: usize) {
        match self {
            System::Tridiagonal { sub, diag, sup } => {
                sub[node] = 0.0;
                sup[node] = 0.0;
                diag[node] = 1.0;
                if node > 0 {
                    sup[node - 1] = 0.0;
                }
                if node + 1 < diag.len() {
                    sub[node + 1] = 0.0;
                }
            }
            System::Sparse(m) => {
                for i in m.row_ptr[node]..m.row_ptr[node + 1] {
                    let c = m.cols[i];
                    m.vals[i] = if c == node { 1.0 } else { 0.0 };
                    if c != node {
                        let p = m.position(c, node);
                        m.vals[p] = 0.0;
                    }
                }
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        match self {
            System::Tridiagonal { sub, diag, sup } => (0..diag.len())
                .map(|i| {
                    let mut v = diag[i] * x[i];
                    if i > 0 {
                        v += sub[i] * x[i - 1];
                    }
                    if i + 1 < diag.len() {
                        v += sup[i] * x[i + 1];
                    }
                    v
                })
                .collect(),
            System::Sparse(m) => {
                let mut y = vec![0.0; x.len()];
                m.mul(x, &mut y);
                y
            }
        }
    }

    /// Solve `A x = b`: Thomas elimination in 1D, Jacobi-preconditioned CG
    /// to relative residual `rel_tol` in 2D.
    pub fn solve(&self, b: &[f64], rel_tol: f64) -> Vec<f64> {
        match self {
            System::Tridiagonal { sub, diag, sup } => thomas(sub, diag, sup, b),
            System::Sparse(m) => pcg(m, b, rel_tol, 20 * b.len() + 100),
        }
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = b[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / den } else { 0.0 };
        d[i] = (b[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn pcg(m: &Csr, b: &[f64], rel_tol: f64, max_iters: usize) -> Vec<f64> {
    let n = b.len();
    let inv_diag: Vec<f64> = m.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return x;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for _ in 0..max_iters {
        m.mul(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= rel_tol * bnorm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(mesh: &Mesh) -> System {
        use super::super::mesh::{shape_gradients, GAUSS3};
        let mut s = System::zeros(mesh);
        let h: Vec<f64> = (0..mesh.n()).map(|a| mesh.h(a)).collect();
        let vol = mesh.element_volume();
        let points: Vec<(Vec<f64>, f64)> = if mesh.n() == 1 {
            GAUSS3.iter().map(|&(t, w)| (vec![t], w)).collect()
        } else {
            GAUSS3.iter().flat_map(|&(t, w)| GAUSS3.iter().map(move |&(r, v)| (vec![t, r], w * v))).collect()
        };
        for e in 0..mesh.element_count() {
            let nodes = mesh.element_nodes(e);
            for (t, w) in &points {
                let g = shape_gradients(t, &h);
                for (i, &a) in nodes.iter().enumerate() {
                    for (j, &b) in nodes.iter().enumerate() {
                        let v: f64 = g[i].iter().zip(&g[j]).map(|(p, q)| p * q).sum::<f64>() * vol * w;
                        s.add(a, b, v);
                    }
                }
            }
        }
        s
    }

    #[test]
    fn solvers_invert_their_products() {
        for mesh in [Mesh::uniform(vec![1.0], 9).unwrap(), Mesh::uniform(vec![1.0, 2.0], 6).unwrap()] {
            let mut s = laplacian(&mesh);
            for node in 0..mesh.node_count() {
                if mesh.is_boundary(node) {
                    s.pin(node);
                }
            }
            let x: Vec<f64> = (0..mesh.node_count()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
            let b = s.mul(&x);
            let y = s.solve(&b, 1e-14);
            for (p, q) in x.iter().zip(&y) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }
}
