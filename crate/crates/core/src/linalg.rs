//! Small dense linear algebra for symmetric positive semi-definite matrices.
//!
//! Matrices here are tiny (d ≤ 4 in practice), so everything is a flat
//! row-major `Vec<f64>` and the symmetric eigensolver is cyclic Jacobi with a
//! fixed sweep order, which keeps results reproducible across platforms.

use std::fmt;

use crate::error::{Error, Result};

/// Relative eigenvalue floor used by [`SpdMatrix::regularized`].
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Off-diagonal mass at which Jacobi sweeps stop, relative to the Frobenius norm.
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;
const SYMMETRY_TOL: f64 = 1e-12;

/// Square matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    n: usize,
    a: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.a.chunks(self.n.max(1)).collect();
        write!(f, "Mat{rows:?}")
    }
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i * d.len() + i] = v;
        }
        m
    }

    /// Builds from row-major entries; panics if `data.len() != n*n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        Mat { n, a: data }
    }

    pub fn from_rows<const N: usize>(rows: [[f64; N]; N]) -> Self {
        Mat {
            n: N,
            a: rows.iter().flatten().copied().collect(),
        }
    }

    /// 2×2 rotation by angle `t`.
    pub fn rotation(t: f64) -> Self {
        Mat::from_rows([[t.cos(), -t.sin()], [t.sin(), t.cos()]])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut t = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.a[j * n + i] = self.a[i * n + j];
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        let n = self.n;
        debug_assert_eq!(n, other.n);
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(n, v.len());
        (0..n)
            .map(|i| (0..n).map(|j| self.a[i * n + j] * v[j]).sum())
            .collect()
    }

    /// `|A v|` without allocating.
    pub fn mul_vec_norm(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..n {
                r += self.a[i * n + j] * v[j];
            }
            s += r * r;
        }
        s.sqrt()
    }

    pub fn add(&self, other: &Mat) -> Mat {
        Mat {
            n: self.n,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        Mat {
            n: self.n,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x - y).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat {
            n: self.n,
            a: self.a.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += y;
        }
    }

    pub fn scale_mut(&mut self, s: f64) {
        for x in &mut self.a {
            *x *= s;
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest relative asymmetry `|a_ij − a_ji| / ‖A‖_F`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let scale = self.frobenius();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.a[i * n + j] - self.a[j * n + i]).abs());
            }
        }
        worst / scale
    }

    fn symmetrized(&self) -> Mat {
        let n = self.n;
        let mut s = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let m = 0.5 * (self.a[i * n + j] + self.a[j * n + i]);
                s.a[i * n + j] = m;
                s.a[j * n + i] = m;
            }
        }
        s
    }
}

/// Largest singular value of `a`.
pub fn op_norm(a: &Mat) -> f64 {
    let ata = a.transpose().mul(a);
    sym_max_eigenvalue(&ata).max(0.0).sqrt()
}

/// `|AB|_op` without allocating in the 2×2 case.
pub fn op_norm_of_product(a: &Mat, b: &Mat) -> f64 {
    if a.n != 2 {
        return op_norm(&a.mul(b));
    }
    let (x, y) = (&a.a, &b.a);
    let c0 = x[0] * y[0] + x[1] * y[2];
    let c1 = x[0] * y[1] + x[1] * y[3];
    let c2 = x[2] * y[0] + x[3] * y[2];
    let c3 = x[2] * y[1] + x[3] * y[3];
    let s = c0 * c0 + c1 * c1 + c2 * c2 + c3 * c3;
    let det = c0 * c3 - c1 * c2;
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (s + disc)).sqrt()
}

/// Largest eigenvalue of a symmetric matrix; closed form for n ≤ 2.
pub fn sym_max_eigenvalue(s: &Mat) -> f64 {
    match s.n {
        0 => 0.0,
        1 => s.a[0],
        2 => {
            let (a, b, d) = (s.a[0], 0.5 * (s.a[1] + s.a[2]), s.a[3]);
            let m = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            m + r
        }
        _ => {
            let (vals, _) = jacobi_eigen(s);
            vals.last().copied().unwrap_or(0.0)
        }
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as the columns of the second component.
pub fn jacobi_eigen(s: &Mat) -> (Vec<f64>, Mat) {
    let n = s.n;
    let mut a = s.symmetrized();
    let mut v = Mat::identity(n);
    let scale = a.frobenius();
    if n <= 1 || scale == 0.0 {
        return (a.a.iter().step_by(n + 1).copied().collect(), v);
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a.a[i * n + j] * a.a[i * n + j];
            }
        }
        if off.sqrt() <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a.a[p * n + p];
                let aqq = a.a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a.a[k * n + p];
                    let akq = a.a[k * n + q];
                    a.a[k * n + p] = c * akp - sn * akq;
                    a.a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a.a[p * n + k];
                    let aqk = a.a[q * n + k];
                    a.a[p * n + k] = c * apk - sn * aqk;
                    a.a[q * n + k] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v.a[k * n + p];
                    let vkq = v.a[k * n + q];
                    v.a[k * n + p] = c * vkp - sn * vkq;
                    v.a[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.a[i * n + i].total_cmp(&a.a[j * n + j]));
    let vals = order.iter().map(|&i| a.a[i * n + i]).collect();
    let mut vecs = Mat::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vecs.a[k * n + col] = v.a[k * n + src];
        }
    }
    (vals, vecs)
}

/// Symmetric positive semi-definite matrix with its spectral decomposition.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    mat: Mat,
    vals: Vec<f64>,
    vecs: Mat,
    clamped: bool,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl SpdMatrix {
    /// Validates symmetry and semi-definiteness and caches the eigensystem.
    pub fn new(mat: Mat) -> Result<Self> {
        let asym = mat.asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let mat = mat.symmetrized();
        let (mut vals, vecs) = jacobi_eigen(&mat);
        let top = vals.last().copied().unwrap_or(0.0).abs();
        if let Some(&low) = vals.first() {
            if low < -EIGEN_FLOOR * top.max(f64::MIN_POSITIVE) {
                return Err(Error::NotPsd { eigenvalue: low });
            }
        }
        for v in &mut vals {
            *v = v.max(0.0);
        }
        Ok(SpdMatrix {
            mat,
            vals,
            vecs,
            clamped: false,
        })
    }

    pub fn identity(d: usize) -> Self {
        SpdMatrix {
            mat: Mat::identity(d),
            vals: vec![1.0; d],
            vecs: Mat::identity(d),
            clamped: false,
        }
    }

    /// Diagonal matrix; panics on a negative entry.
    pub fn diag(d: &[f64]) -> Self {
        assert!(d.iter().all(|&x| x >= 0.0), "negative diagonal entry");
        Self::new(Mat::diag(d)).expect("diagonal matrices are symmetric")
    }

    pub fn scalar(w: f64) -> Self {
        Self::diag(&[w])
    }

    /// Rebuilds `U diag(vals) Uᵀ` from an orthonormal basis.
    pub fn from_eigen(vals: Vec<f64>, vecs: Mat) -> Self {
        let n = vals.len();
        let mut mat = Mat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += vecs.get(i, k) * vals[k] * vecs.get(j, k);
                }
                mat.set(i, j, s);
                mat.set(j, i, s);
            }
        }
        SpdMatrix {
            mat,
            vals,
            vecs,
            clamped: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.n
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.vals
    }

    pub fn eigenvectors(&self) -> &Mat {
        &self.vecs
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.vals.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.vals.first().copied().unwrap_or(0.0)
    }

    /// Whether [`regularized`](Self::regularized) raised any eigenvalue.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    /// Raises eigenvalues below `EIGEN_FLOOR·λ_max` to that floor.
    pub fn regularized(&self) -> SpdMatrix {
        let floor = EIGEN_FLOOR * self.max_eigenvalue();
        if self.min_eigenvalue() >= floor && floor > 0.0 {
            return self.clone();
        }
        let floor = if floor > 0.0 { floor } else { EIGEN_FLOOR };
        let vals = self.vals.iter().map(|&v| v.max(floor)).collect();
        let mut out = Self::from_eigen(vals, self.vecs.clone());
        out.clamped = true;
        out
    }

    /// Spectral power `U diag(λ^t) Uᵀ`.
    pub fn power(&self, t: f64) -> Result<SpdMatrix> {
        if t == 0.0 {
            return Ok(SpdMatrix::identity(self.dim()));
        }
        if t == 1.0 {
            return Ok(self.clone());
        }
        if t < 0.0 {
            let floor = EIGEN_FLOOR * self.max_eigenvalue();
            let low = self.min_eigenvalue();
            if low < floor || low == 0.0 {
                return Err(Error::Singular {
                    eigenvalue: low,
                    cell: None,
                });
            }
        }
        let vals = self.vals.iter().map(|&v| v.powf(t)).collect();
        let mut out = Self::from_eigen(vals, self.vecs.clone());
        out.clamped = self.clamped;
        Ok(out)
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        self.power(-1.0)
    }

    pub fn sqrt(&self) -> SpdMatrix {
        self.power(0.5).expect("positive powers always exist")
    }

    /// Operator norm, which for a PSD matrix is `λ_max`.
    pub fn op_norm(&self) -> f64 {
        self.max_eigenvalue()
    }

    pub fn scaled(&self, s: f64) -> SpdMatrix {
        assert!(s >= 0.0);
        let vals = self.vals.iter().map(|v| v * s).collect();
        SpdMatrix {
            mat: self.mat.scaled(s),
            vals,
            vecs: self.vecs.clone(),
            clamped: self.clamped,
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.mat.mul_vec(v)
    }
}

/// `‖AB − BA‖ ≤ tol·‖A‖·‖B‖` in operator norm.
pub fn commuting(a: &SpdMatrix, b: &SpdMatrix, tol: f64) -> bool {
    let ab = a.mat().mul(b.mat());
    let ba = b.mat().mul(a.mat());
    op_norm(&ab.sub(&ba)) <= tol * a.op_norm() * b.op_norm()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
