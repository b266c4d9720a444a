//! Deterministic generators for weights, vector fields and convex bodies.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convex::{gaussian, zonotope, ConvexBody};
use crate::error::{domain, Error, Result};
use crate::grid::{DyadicField, DyadicGrid, Vector};
use crate::linalg::{jacobi_eigen, Mat, SpdMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weight family.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSpec {
    /// `c` (scalar) or `c·I` (matrix).
    Constant(f64),
    /// `(|x| + 2^{−L})^a`, with `|x|` the distance of the cell's lower corner to the origin.
    Power(f64),
    /// Log-normal multiplicative cascade over the dyadic tree.
    Random { seed: u64, roughness: f64 },
    /// `diag(w_{a_1}, …, w_{a_d})` of power weights.
    Diagonal(Vec<f64>),
    /// `R·diag(w_{a_1}, …, w_{a_d})·Rᵀ` for a seeded rotation `R`; exponents
    /// default to `±1/2` alternating.
    RotatedDiagonal { seed: u64, exponents: Vec<f64> },
}

fn default_exponents(d: usize) -> Vec<f64> {
    (0..d).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect()
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            WeightSpec::Constant(c) => write!(f, "constant({c})"),
            WeightSpec::Power(a) => write!(f, "power({a})"),
            WeightSpec::Random { seed, roughness } => write!(f, "random({seed},{roughness})"),
            WeightSpec::Diagonal(v) => write!(f, "diagonal({})", list(v)),
            WeightSpec::RotatedDiagonal { seed, exponents } if exponents.is_empty() => {
                write!(f, "rotated-diagonal({seed})")
            }
            WeightSpec::RotatedDiagonal { seed, exponents } => {
                write!(f, "rotated-diagonal({seed},{})", list(exponents))
            }
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], &s[i + 1..s.len() - 1]),
            Some(_) => return Err(domain(format!("unbalanced parentheses in weight spec `{s}`"))),
            None => (s, ""),
        };
        let nums: Vec<&str> = args.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        let float = |a: &str| a.parse::<f64>().map_err(|_| domain(format!("`{a}` is not a number in `{s}`")));
        let floats = |v: &[&str]| v.iter().map(|a| float(a)).collect::<Result<Vec<f64>>>();
        let int = |a: &str| a.parse::<u64>().map_err(|_| domain(format!("`{a}` is not a seed in `{s}`")));
        let arity = |lo: usize, hi: usize| {
            if nums.len() < lo || nums.len() > hi {
                Err(domain(format!("`{name}` takes {lo}..={hi} arguments, got {}", nums.len())))
            } else {
                Ok(())
            }
        };
        match name.trim() {
            "constant" => {
                arity(0, 1)?;
                Ok(WeightSpec::Constant(nums.first().map_or(Ok(1.0), |a| float(a))?))
            }
            "power" => {
                arity(1, 1)?;
                Ok(WeightSpec::Power(float(nums[0])?))
            }
            "random" => {
                arity(1, 2)?;
                Ok(WeightSpec::Random {
                    seed: int(nums[0])?,
                    roughness: nums.get(1).map_or(Ok(0.5), |a| float(a))?,
                })
            }
            "diagonal" => {
                arity(1, usize::MAX)?;
                Ok(WeightSpec::Diagonal(floats(&nums)?))
            }
            "rotated-diagonal" => {
                arity(1, usize::MAX)?;
                Ok(WeightSpec::RotatedDiagonal {
                    seed: int(nums[0])?,
                    exponents: floats(&nums[1..])?,
                })
            }
            other => Err(domain(format!("unknown weight generator `{other}`"))),
        }
    }
}

impl WeightSpec {
    /// Scalar weight on `grid`.
    pub fn scalar(&self, grid: &DyadicGrid) -> Result<DyadicField<f64>> {
        match self {
            WeightSpec::Constant(c) if *c > 0.0 => Ok(DyadicField::constant(*grid, *c)),
            WeightSpec::Constant(c) => Err(domain(format!("constant weight must be positive, got {c}"))),
            WeightSpec::Power(a) => Ok(power_weight(grid, *a)),
            WeightSpec::Random { seed, roughness } => Ok(cascade(grid, *seed, *roughness)),
            WeightSpec::Diagonal(v) if v.len() == 1 => Ok(power_weight(grid, v[0])),
            other => Err(domain(format!("`{other}` does not describe a scalar weight"))),
        }
    }

    /// `d × d` matrix weight on `grid`.
    pub fn matrix(&self, grid: &DyadicGrid, d: usize) -> Result<DyadicField<SpdMatrix>> {
        if d == 0 {
            return Err(domain("matrix dimension must be positive"));
        }
        match self {
            WeightSpec::Constant(_) | WeightSpec::Power(_) => {
                let w = self.scalar(grid)?;
                Ok(w.map(|v| SpdMatrix::identity(d).scaled(*v)))
            }
            WeightSpec::Random { seed, roughness } => Ok(matrix_cascade(grid, d, *seed, *roughness)),
            WeightSpec::Diagonal(v) => {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: v.len(),
                    });
                }
                Ok(rotated_power(grid, &Mat::identity(d), v))
            }
            WeightSpec::RotatedDiagonal { seed, exponents } => {
                let e = if exponents.is_empty() {
                    default_exponents(d)
                } else {
                    exponents.clone()
                };
                if e.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: e.len(),
                    });
                }
                let r = random_rotation(d, &mut rng(*seed));
                Ok(rotated_power(grid, &r, &e))
            }
        }
    }
}

fn corner_radius(grid: &DyadicGrid, cell: usize) -> f64 {
    let [x, y] = grid.cell_corner(cell);
    let o = grid.origin();
    ((x - o[0]).powi(2) + (y - o[1]).powi(2)).sqrt()
}

/// `w(x) = (|x| + 2^{−L})^a`.
pub fn power_weight(grid: &DyadicGrid, a: f64) -> DyadicField<f64> {
    let offset = 0.5f64.powi(grid.depth() as i32);
    DyadicField::from_fn(*grid, |c| (corner_radius(grid, c) + offset).powf(a))
}

/// `exp(Σ_{k=1}^{L} roughness·g_{Q_k(x)})` with independent standard normals per cube.
pub fn cascade(grid: &DyadicGrid, seed: u64, roughness: f64) -> DyadicField<f64> {
    let mut r = rng(seed);
    let g: Vec<Vec<f64>> = (0..=grid.depth())
        .map(|k| (0..grid.cubes_at(k)).map(|_| if k == 0 { 0.0 } else { gaussian(&mut r) }).collect())
        .collect();
    DyadicField::from_fn(*grid, |c| {
        let s: f64 = (1..=grid.depth()).map(|k| g[k as usize][grid.ancestor(c, k)]).sum();
        (roughness * s).exp()
    })
}

fn random_symmetric(d: usize, r: &mut ChaCha8Rng) -> Mat {
    let mut m = Mat::zeros(d);
    for i in 0..d {
        for j in i..d {
            let v = gaussian(r) * if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

/// `exp(S(x))` with `S(x) = roughness·Σ_k G_{Q_k(x)}` for random symmetric `G` per cube.
pub fn matrix_cascade(grid: &DyadicGrid, d: usize, seed: u64, roughness: f64) -> DyadicField<SpdMatrix> {
    let mut r = rng(seed);
    let g: Vec<Vec<Mat>> = (0..=grid.depth())
        .map(|k| {
            (0..grid.cubes_at(k))
                .map(|_| if k == 0 { Mat::zeros(d) } else { random_symmetric(d, &mut r) })
                .collect()
        })
        .collect();
    DyadicField::from_fn(*grid, |c| {
        let mut s = Mat::zeros(d);
        for k in 1..=grid.depth() {
            s.add_assign(&g[k as usize][grid.ancestor(c, k)]);
        }
        let (vals, vecs) = jacobi_eigen(&s.scaled(roughness));
        let m = SpdMatrix::from_eigen(vals.iter().map(|v| v.exp()).collect(), vecs);
        SpdMatrix::new(m.mat().clone()).expect("exponential of a symmetric matrix is positive definite")
    })
}

/// Orthogonal matrix from Gram–Schmidt on a Gaussian matrix.
pub fn random_rotation(d: usize, r: &mut ChaCha8Rng) -> Mat {
    let mut cols: Vec<Vector> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vector = (0..d).map(|_| gaussian(r)).collect();
        for c in &cols {
            let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= p * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut m = Mat::zeros(d);
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            m.set(i, j, *x);
        }
    }
    m
}

/// `R·diag(w_{a_i}(x))·Rᵀ`.
pub fn rotated_power(grid: &DyadicGrid, r: &Mat, exponents: &[f64]) -> DyadicField<SpdMatrix> {
    let comps: Vec<DyadicField<f64>> = exponents.iter().map(|a| power_weight(grid, *a)).collect();
    DyadicField::from_fn(*grid, |c| {
        let diag: Vec<f64> = comps.iter().map(|w| w.values()[c]).collect();
        let m = r.mul(&Mat::diag(&diag)).mul(&r.transpose());
        SpdMatrix::new(m).expect("conjugated diagonal matrices are symmetric")
    })
}

/// Independent standard normal vectors per cell.
pub fn gaussian_vectors(grid: &DyadicGrid, d: usize, r: &mut ChaCha8Rng) -> DyadicField<Vector> {
    DyadicField::from_fn(*grid, |_| (0..d).map(|_| gaussian(r)).collect())
}

/// Positive values `exp(spread·g)` per cell.
pub fn lognormal(grid: &DyadicGrid, spread: f64, r: &mut ChaCha8Rng) -> DyadicField<f64> {
    DyadicField::from_fn(*grid, |_| (spread * gaussian(r)).exp())
}

/// Absorbing sampled body: a random zonotope plus a small random ellipsoid.
pub fn random_body(d: usize, r: &mut ChaCha8Rng) -> ConvexBody {
    let count = r.gen_range(1..=d + 2);
    let gens: Vec<Vector> = (0..count).map(|_| (0..d).map(|_| gaussian(r)).collect()).collect();
    let z = zonotope(&gens).expect("generators are nonempty");
    let b = random_symmetric(d, r);
    let (vals, vecs) = jacobi_eigen(&b);
    let scale = r.gen_range(0.05..1.0);
    let e = SpdMatrix::from_eigen(vals.iter().map(|v| scale * v.abs().max(0.1)).collect(), vecs);
    let e = SpdMatrix::new(e.mat().clone()).expect("positive definite");
    z.minkowski_sum(&ConvexBody::ellipsoid(e)).expect("same dimension")
}

/// A field mixing segments, ellipsoids and sampled bodies.
pub fn random_body_field(grid: &DyadicGrid, d: usize, r: &mut ChaCha8Rng) -> DyadicField<ConvexBody> {
    DyadicField::from_fn(*grid, |_| match r.gen_range(0..3) {
        0 => ConvexBody::segment((0..d).map(|_| gaussian(r)).collect()),
        1 => {
            let b = random_symmetric(d, r);
            let (vals, vecs) = jacobi_eigen(&b);
            let e = SpdMatrix::from_eigen(vals.iter().map(|v| v.abs() + 0.01).collect(), vecs);
            ConvexBody::ellipsoid(SpdMatrix::new(e.mat().clone()).expect("positive definite"))
        }
        _ => random_body(d, r),
    })
}
