//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Counts of positive, negative and (numerically) zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub pos: usize,
    pub neg: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn from_eigenvalues(eigs: &DVector<f64>, tol: f64) -> Self {
        let mut out = Inertia { pos: 0, neg: 0, zero: 0 };
        for &l in eigs.iter() {
            if l.abs() <= tol {
                out.zero += 1;
            } else if l > 0.0 {
                out.pos += 1;
            } else {
                out.neg += 1;
            }
        }
        out
    }

    pub fn is_positive_definite(&self) -> bool {
        self.neg == 0 && self.zero == 0
    }

    pub fn is_negative_definite(&self) -> bool {
        self.pos == 0 && self.zero == 0
    }
}

/// Eigenvalues sorted ascending with matching eigenvector columns.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Largest |m_ij - m_ji|.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// xᵀ M x without allocating.
pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for j in 0..n {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let mut col = 0.0;
        for i in 0..n {
            col += m[(i, j)] * x[i];
        }
        acc += col * xj;
    }
    acc
}

/// xᵀ M x for a slice-backed point, used by the grid oracle hot loop.
pub fn quad_form_slice(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += m[(i, j)] * x[i];
        }
        acc += col * x[j];
    }
    acc
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm2(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let e = sym_eigenvalues(m);
    e[0].abs().max(e[e.len() - 1].abs())
}

/// Applies `g` to the eigenvalues of a symmetric matrix: U diag(g(λ)) Uᵀ.
pub fn sym_fn(m: &DMatrix<f64>, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let d = DMatrix::from_diagonal(&vals.map(g));
    &vecs * d * vecs.transpose()
}
