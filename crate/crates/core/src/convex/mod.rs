//! Origin-symmetric convex bodies in `ℝ^d`, handled through support functions.
//!
//! A body is a segment `[−v, v]`, an ellipsoid `A·B` (image of the unit ball
//! under a symmetric PSD matrix), or a *sampled* body given by support values
//! `h_i` on a fixed [`DirectionSet`]. A sampled body stands for the polytope
//! `{x : |⟨x, u_i⟩| ≤ h_i for all i}`, so containment of an ellipsoid or
//! segment inside it is decided exactly, while statements about directions
//! between samples hold up to the angular resolution of the set.

mod john;
mod norm;

use std::sync::Arc;

use once_cell::sync::OnceCell;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::grid::Vector;
use crate::linalg::{dot, norm, op_norm, SpdMatrix};

pub use john::{john_ellipsoid, reducing_matrix, JOHN_MAX_ITERATIONS};
pub use norm::NormFunction;

/// Default number of directions for `d = 2`.
pub const CIRCLE_DIRECTIONS: usize = 180;
/// Default number of directions for `d = 3`.
pub const SPHERE_DIRECTIONS: usize = 512;
const HIGH_DIM_DIRECTIONS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Layout {
    Line,
    /// `θ_k = kπ/m` for `k < m`.
    Circle,
    Scattered,
}

/// Unit vectors covering the sphere up to sign: no two are equal or antipodal.
#[derive(Debug, PartialEq)]
pub struct DirectionSet {
    d: usize,
    layout: Layout,
    dirs: Vec<f64>,
}

impl DirectionSet {
    /// Shared default set for dimension `d`.
    pub fn standard(d: usize) -> Arc<DirectionSet> {
        static CACHE: [OnceCell<Arc<DirectionSet>>; 8] = [const { OnceCell::new() }; 8];
        assert!((1..=8).contains(&d), "direction sets are provided for 1 ≤ d ≤ 8");
        CACHE[d - 1]
            .get_or_init(|| {
                Arc::new(match d {
                    1 => DirectionSet::line(),
                    2 => DirectionSet::circle(CIRCLE_DIRECTIONS),
                    3 => DirectionSet::fibonacci_hemisphere(SPHERE_DIRECTIONS),
                    _ => DirectionSet::scattered(d, HIGH_DIM_DIRECTIONS, d as u64),
                })
            })
            .clone()
    }

    pub fn line() -> Self {
        DirectionSet {
            d: 1,
            layout: Layout::Line,
            dirs: vec![1.0],
        }
    }

    /// `m` equally spaced angles on the upper half circle.
    pub fn circle(m: usize) -> Self {
        let mut dirs = Vec::with_capacity(2 * m);
        for k in 0..m {
            let t = std::f64::consts::PI * k as f64 / m as f64;
            dirs.push(t.cos());
            dirs.push(t.sin());
        }
        DirectionSet {
            d: 2,
            layout: Layout::Circle,
            dirs,
        }
    }

    /// Fibonacci lattice on the open upper hemisphere.
    pub fn fibonacci_hemisphere(m: usize) -> Self {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut dirs = Vec::with_capacity(3 * m);
        for i in 0..m {
            let z = (i as f64 + 0.5) / m as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            dirs.extend_from_slice(&[r * phi.cos(), r * phi.sin(), z]);
        }
        DirectionSet {
            d: 3,
            layout: Layout::Scattered,
            dirs,
        }
    }

    /// Seeded Gaussian directions, sign-normalized so the first coordinate is positive.
    pub fn scattered(d: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dirs = Vec::with_capacity(d * m);
        for _ in 0..m {
            let mut v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
            let n = norm(&v);
            let s = if v[0] < 0.0 { -1.0 } else { 1.0 } / n;
            v.iter_mut().for_each(|x| *x *= s);
            dirs.extend(v);
        }
        DirectionSet {
            d,
            layout: Layout::Scattered,
            dirs,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.dirs.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    #[inline]
    pub fn dir(&self, i: usize) -> &[f64] {
        &self.dirs[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.dirs.chunks(self.d)
    }

    /// Index of a sample equal to `±u`, if any.
    fn exact_index(&self, u: &[f64]) -> Option<usize> {
        match self.layout {
            Layout::Line => Some(0),
            Layout::Circle => {
                let m = self.len();
                let step = std::f64::consts::PI / m as f64;
                let t = reduced_angle(u);
                let k = (t / step).round() as usize % m;
                let c = dot(self.dir(k), u).abs();
                (c >= 1.0 - 1e-15).then_some(k)
            }
            Layout::Scattered => self.iter().position(|w| dot(w, u).abs() >= 1.0 - 1e-15),
        }
    }

    /// Upper bound for the support of the polytope described by `h` at unit `u`.
    fn interpolate(&self, h: &[f64], u: &[f64]) -> f64 {
        if let Some(k) = self.exact_index(u) {
            return h[k];
        }
        match self.layout {
            Layout::Line => h[0],
            Layout::Circle => {
                // u = a·u_k + b·u_{k+1} with a, b ≥ 0, so sublinearity gives
                // h(u) ≤ a·h_k + b·h_{k+1}; this is exact for the polygon.
                let m = self.len();
                let step = std::f64::consts::PI / m as f64;
                let t = reduced_angle(u);
                let k = ((t / step).floor() as usize).min(m - 1);
                let t0 = k as f64 * step;
                let (h0, h1) = (h[k], h[(k + 1) % m]);
                let s = step.sin();
                let a = (t0 + step - t).sin() / s;
                let b = (t - t0).sin() / s;
                a * h0 + b * h1
            }
            Layout::Scattered => {
                let (mut best, mut second) = ((f64::NEG_INFINITY, 0usize), (f64::NEG_INFINITY, 0usize));
                for (i, w) in self.iter().enumerate() {
                    let c = dot(w, u).abs();
                    if c > best.0 {
                        second = best;
                        best = (c, i);
                    } else if c > second.0 {
                        second = (c, i);
                    }
                }
                h[best.1].max(h[second.1])
            }
        }
    }
}

fn reduced_angle(u: &[f64]) -> f64 {
    let mut t = u[1].atan2(u[0]);
    if t < 0.0 {
        t += std::f64::consts::PI;
    }
    if t >= std::f64::consts::PI {
        t -= std::f64::consts::PI;
    }
    t
}

/// Standard normal sample (Box–Muller).
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Support values on a shared direction set.
#[derive(Clone, Debug)]
pub struct Sampled {
    dirs: Arc<DirectionSet>,
    h: Vec<f64>,
}

impl Sampled {
    pub fn directions(&self) -> &Arc<DirectionSet> {
        &self.dirs
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }
}

/// Closed, bounded, origin-symmetric convex set.
#[derive(Clone, Debug)]
pub enum ConvexBody {
    /// `[−v, v]`; the zero vector gives `{0}`.
    Segment(Vector),
    /// `A·B` for symmetric PSD `A`.
    Ellipsoid(SpdMatrix),
    Sampled(Sampled),
}

impl ConvexBody {
    pub fn zero(d: usize) -> Self {
        ConvexBody::Segment(vec![0.0; d])
    }

    pub fn unit_ball(d: usize) -> Self {
        ConvexBody::Ellipsoid(SpdMatrix::identity(d))
    }

    pub fn segment(v: Vector) -> Self {
        ConvexBody::Segment(v)
    }

    pub fn ellipsoid(a: SpdMatrix) -> Self {
        ConvexBody::Ellipsoid(a)
    }

    /// Sampled body; `h` must be finite and nonnegative with one value per direction.
    pub fn sampled(dirs: Arc<DirectionSet>, h: Vec<f64>) -> Result<Self> {
        if h.len() != dirs.len() {
            return Err(Error::DimensionMismatch {
                expected: dirs.len(),
                found: h.len(),
            });
        }
        if let Some(i) = h.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(domain(format!("support value {} in direction {i} is invalid", h[i])));
        }
        Ok(ConvexBody::Sampled(Sampled { dirs, h }))
    }

    /// Support function sampled from a closure on the standard directions.
    pub fn from_support(d: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dirs = DirectionSet::standard(d);
        let h = dirs.iter().map(f).collect();
        Self::sampled(dirs, h)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Segment(v) => v.len(),
            ConvexBody::Ellipsoid(a) => a.dim(),
            ConvexBody::Sampled(s) => s.dirs.dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ConvexBody::Segment(v) => v.iter().all(|x| *x == 0.0),
            ConvexBody::Ellipsoid(a) => a.max_eigenvalue() == 0.0,
            ConvexBody::Sampled(s) => s.h.iter().all(|x| *x == 0.0),
        }
    }

    /// `h_K(u)` for a unit vector `u`.
    pub fn support(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        let n = norm(u);
        if (n - 1.0).abs() > 1e-12 {
            return Err(domain(format!("support direction must be a unit vector, |u| = {n}")));
        }
        Ok(self.support_unchecked(u))
    }

    fn support_unchecked(&self, u: &[f64]) -> f64 {
        match self {
            ConvexBody::Segment(v) => dot(v, u).abs(),
            ConvexBody::Ellipsoid(a) => a.mat().mul_vec_norm(u),
            ConvexBody::Sampled(s) => s.dirs.interpolate(&s.h, u),
        }
    }

    /// `h_K(v)` for any vector, using positive homogeneity.
    pub fn support_vec(&self, v: &[f64]) -> f64 {
        match self {
            ConvexBody::Segment(s) => dot(s, v).abs(),
            ConvexBody::Ellipsoid(a) => a.mat().mul_vec_norm(v),
            ConvexBody::Sampled(_) => {
                let n = norm(v);
                if n == 0.0 {
                    return 0.0;
                }
                let u: Vec<f64> = v.iter().map(|x| x / n).collect();
                n * self.support_unchecked(&u)
            }
        }
    }

    /// Support values on every direction of `dirs`; exact for a body sampled on `dirs`.
    pub fn support_on(&self, dirs: &DirectionSet) -> Vec<f64> {
        if let ConvexBody::Sampled(s) = self {
            if *s.dirs == *dirs {
                return s.h.clone();
            }
        }
        dirs.iter().map(|u| self.support_unchecked(u)).collect()
    }

    pub fn to_sampled(&self, dirs: &Arc<DirectionSet>) -> ConvexBody {
        ConvexBody::Sampled(Sampled {
            dirs: dirs.clone(),
            h: self.support_on(dirs),
        })
    }

    /// Direction set for a binary operation: a sampled operand's set, else the default.
    fn shared_dirs(&self, other: &ConvexBody) -> Arc<DirectionSet> {
        match (self, other) {
            (ConvexBody::Sampled(s), _) | (_, ConvexBody::Sampled(s)) => s.dirs.clone(),
            _ => DirectionSet::standard(self.dim()),
        }
    }

    fn check_dim(&self, other: &ConvexBody) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// `K + L`, with `h_{K+L} = h_K + h_L`.
    pub fn minkowski_sum(&self, other: &ConvexBody) -> Result<ConvexBody> {
        self.check_dim(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        match (self, other) {
            (ConvexBody::Segment(v), ConvexBody::Segment(w)) if collinear(v, w) => {
                let s = if dot(v, w) >= 0.0 { 1.0 } else { -1.0 };
                return Ok(ConvexBody::Segment(v.iter().zip(w).map(|(a, b)| a + s * b).collect()));
            }
            (ConvexBody::Ellipsoid(a), ConvexBody::Ellipsoid(b)) => {
                if let Some(c) = proportional(a, b) {
                    return Ok(ConvexBody::Ellipsoid(a.scaled(1.0 + c)));
                }
            }
            _ => {}
        }
        let dirs = self.shared_dirs(other);
        let h = self
            .support_on(&dirs)
            .iter()
            .zip(other.support_on(&dirs))
            .map(|(a, b)| a + b)
            .collect();
        Ok(ConvexBody::Sampled(Sampled { dirs, h }))
    }

    /// `αK` for `α ≥ 0`.
    pub fn scale(&self, alpha: f64) -> Result<ConvexBody> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(domain(format!("scale factor must be finite and nonnegative, got {alpha}")));
        }
        Ok(match self {
            ConvexBody::Segment(v) => ConvexBody::Segment(v.iter().map(|x| alpha * x).collect()),
            ConvexBody::Ellipsoid(a) => ConvexBody::Ellipsoid(a.scaled(alpha)),
            ConvexBody::Sampled(s) => ConvexBody::Sampled(Sampled {
                dirs: s.dirs.clone(),
                h: s.h.iter().map(|x| alpha * x).collect(),
            }),
        })
    }

    /// Closed convex hull of `K ∪ L`, with `h = max(h_K, h_L)`.
    pub fn hull_union(&self, other: &ConvexBody) -> Result<ConvexBody> {
        self.check_dim(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        match (self, other) {
            (ConvexBody::Segment(v), ConvexBody::Segment(w)) if collinear(v, w) => {
                return Ok(if norm(v) >= norm(w) { self.clone() } else { other.clone() });
            }
            (ConvexBody::Ellipsoid(a), ConvexBody::Ellipsoid(b)) => {
                if let Some(c) = proportional(a, b) {
                    return Ok(if c <= 1.0 { self.clone() } else { other.clone() });
                }
            }
            _ => {}
        }
        let dirs = self.shared_dirs(other);
        let h = self
            .support_on(&dirs)
            .iter()
            .zip(other.support_on(&dirs))
            .map(|(a, b)| a.max(b))
            .collect();
        Ok(ConvexBody::Sampled(Sampled { dirs, h }))
    }

    /// `L ⊆ K` up to sampling: `h_L(u) ≤ (1 + slack)·h_K(u)` on every sampled `u`.
    pub fn contains(&self, other: &ConvexBody, slack: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let dirs = self.shared_dirs(other);
        let outer = self.support_on(&dirs);
        let inner = other.support_on(&dirs);
        outer.iter().zip(&inner).all(|(k, l)| *l <= k * (1.0 + slack))
    }

    /// `sup{|v| : v ∈ K}`.
    pub fn magnitude(&self) -> f64 {
        match self {
            ConvexBody::Segment(v) => norm(v),
            ConvexBody::Ellipsoid(a) => a.op_norm(),
            ConvexBody::Sampled(s) => s.h.iter().copied().fold(0.0, f64::max),
        }
    }

    /// `sup{|Av| : v ∈ K}` without forming `AK`.
    ///
    /// For a sampled body this is `max_i h_i / |A^{-1} u_i|`, the support of
    /// `AK` on the directions `A^{-1}u_i`, which needs only the stored values.
    pub fn magnitude_image(&self, a: &SpdMatrix) -> Result<f64> {
        match self {
            ConvexBody::Segment(v) => Ok(a.mat().mul_vec_norm(v)),
            ConvexBody::Ellipsoid(b) => Ok(op_norm(&a.mat().mul(b.mat()))),
            ConvexBody::Sampled(s) => {
                let inv = a.inverse()?;
                Ok(s
                    .dirs
                    .iter()
                    .zip(&s.h)
                    .map(|(u, h)| h / inv.mat().mul_vec_norm(u))
                    .fold(0.0, f64::max))
            }
        }
    }

    /// `AK = {Av : v ∈ K}` for symmetric `A`.
    pub fn apply_matrix(&self, a: &SpdMatrix) -> Result<ConvexBody> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: a.dim(),
            });
        }
        Ok(match self {
            ConvexBody::Segment(v) => ConvexBody::Segment(a.mul_vec(v)),
            ConvexBody::Ellipsoid(b) => {
                // h(u) = |B A u|, the ellipsoid of (A B² A)^{1/2}.
                let ab = b.mat().mul(a.mat());
                let gram = ab.transpose().mul(&ab);
                ConvexBody::Ellipsoid(SpdMatrix::new(gram)?.sqrt())
            }
            ConvexBody::Sampled(s) => ConvexBody::Sampled(Sampled {
                dirs: s.dirs.clone(),
                h: s.dirs.iter().map(|u| self.support_vec(&a.mul_vec(u))).collect(),
            }),
        })
    }

    /// `0 ∈ int K`, checked on the sampled directions.
    pub fn check_absorbing(&self) -> Result<()> {
        let dirs = match self {
            ConvexBody::Sampled(s) => s.dirs.clone(),
            _ => DirectionSet::standard(self.dim()),
        };
        let h = self.support_on(&dirs);
        match h.iter().position(|x| *x <= 0.0) {
            Some(i) => Err(Error::NotAbsorbing {
                direction: i,
                value: h[i],
            }),
            None => match self {
                ConvexBody::Segment(_) if self.dim() > 1 => Err(Error::NotAbsorbing {
                    direction: 0,
                    value: 0.0,
                }),
                ConvexBody::Ellipsoid(a) if a.min_eigenvalue() <= 0.0 => Err(Error::NotAbsorbing {
                    direction: 0,
                    value: a.min_eigenvalue(),
                }),
                _ => Ok(()),
            },
        }
    }

    /// Sublinearity spot-check on adjacent direction triples (planar sampled bodies).
    ///
    /// For `u_k` between `u_{k−1}` and `u_{k+1}` convexity forces
    /// `h_k ≤ a·h_{k−1} + b·h_{k+1}`. Other kinds are convex by construction.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let ConvexBody::Sampled(s) = self else {
            return true;
        };
        if s.dirs.layout != Layout::Circle {
            return true;
        }
        let m = s.h.len();
        let step = std::f64::consts::PI / m as f64;
        let coef = 1.0 / (2.0 * step.cos());
        (0..m).all(|k| {
            let prev = s.h[(k + m - 1) % m];
            let next = s.h[(k + 1) % m];
            s.h[k] <= coef * (prev + next) * (1.0 + tol) + tol
        })
    }
}

fn collinear(v: &[f64], w: &[f64]) -> bool {
    let vv = dot(v, v);
    let ww = dot(w, w);
    let vw = dot(v, w);
    (vv * ww - vw * vw).abs() <= 1e-24 * vv * ww
}

/// `c` with `b = c·a`, if the two matrices are proportional.
fn proportional(a: &SpdMatrix, b: &SpdMatrix) -> Option<f64> {
    let na = a.mat().frobenius();
    if na == 0.0 {
        return None;
    }
    let c = b.mat().frobenius() / na;
    (b.mat().sub(&a.mat().scaled(c)).frobenius() <= 1e-14 * b.mat().frobenius().max(na)).then_some(c)
}

/// `h` of the Minkowski sum of segments `[−g_j, g_j]`: `Σ_j |⟨g_j, u⟩|`.
pub fn zonotope(generators: &[Vector]) -> Result<ConvexBody> {
    let d = generators.first().map_or(0, |g| g.len());
    if d == 0 {
        return Err(domain("zonotope needs at least one generator"));
    }
    ConvexBody::from_support(d, |u| generators.iter().map(|g| dot(g, u).abs()).sum())
}
