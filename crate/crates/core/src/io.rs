//! Plain-text field files.
//!
//! ```text
//! weightlab-field v1 dim=<n> depth=<L> kind=<scalar|vector|matrix|body> d=<d>
//! <one line per cell, row-major>
//! ```
//!
//! Scalars are one number per line, vectors `d` numbers, matrices `d²`
//! numbers row-major. Body lines start with a tag: `segment v₁ … v_d`,
//! `ellipsoid a₁₁ … a_dd` or `sampled h₁ … h_m` (support values on the
//! standard directions of dimension `d`). Numbers are written in the
//! shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::convex::{ConvexBody, DirectionSet};
use crate::error::{Error, Result};
use crate::grid::{DyadicField, DyadicGrid, Vector};
use crate::linalg::{Mat, SpdMatrix};

const MAGIC: &str = "weightlab-field";

/// A field of any supported value kind.
#[derive(Clone, Debug)]
pub enum AnyField {
    Scalar(DyadicField<f64>),
    Vector(DyadicField<Vector>),
    Matrix(DyadicField<SpdMatrix>),
    Body(DyadicField<ConvexBody>),
}

impl AnyField {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyField::Scalar(_) => "scalar",
            AnyField::Vector(_) => "vector",
            AnyField::Matrix(_) => "matrix",
            AnyField::Body(_) => "body",
        }
    }

    pub fn grid(&self) -> &DyadicGrid {
        match self {
            AnyField::Scalar(f) => f.grid(),
            AnyField::Vector(f) => f.grid(),
            AnyField::Matrix(f) => f.grid(),
            AnyField::Body(f) => f.grid(),
        }
    }

    /// Value dimension `d` (1 for scalars).
    pub fn value_dim(&self) -> usize {
        match self {
            AnyField::Scalar(_) => 1,
            AnyField::Vector(f) => f.vector_dim(),
            AnyField::Matrix(f) => f.values()[0].dim(),
            AnyField::Body(f) => f.values()[0].dim(),
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn numbers(line_no: usize, parts: &[&str]) -> Result<Vec<f64>> {
    parts
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(line_no, format!("`{t}` is not a number"))))
        .collect()
}

fn expect_len(line_no: usize, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(parse_err(line_no, format!("expected {n} numbers, found {}", v.len())));
    }
    Ok(())
}

fn matrix(line_no: usize, v: Vec<f64>, d: usize) -> Result<SpdMatrix> {
    expect_len(line_no, &v, d * d)?;
    SpdMatrix::new(Mat::from_row_major(d, v)).map_err(|e| parse_err(line_no, e.to_string()))
}

/// Reads a field file.
pub fn read_field(reader: impl BufRead) -> Result<AnyField> {
    let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(MAGIC) || tokens.next() != Some("v1") {
        return Err(parse_err(hline, format!("header must start with `{MAGIC} v1`")));
    }
    let (mut dim, mut depth, mut kind, mut d) = (None, None, None, None);
    for t in tokens {
        let (k, v) = t.split_once('=').ok_or_else(|| parse_err(hline, format!("bad header field `{t}`")))?;
        let int = || v.parse::<u32>().map_err(|_| parse_err(hline, format!("`{t}` needs an integer")));
        match k {
            "dim" => dim = Some(int()?),
            "depth" => depth = Some(int()?),
            "d" => d = Some(int()? as usize),
            "kind" => kind = Some(v.to_string()),
            _ => return Err(parse_err(hline, format!("unknown header field `{k}`"))),
        }
    }
    let missing = |name: &str| parse_err(hline, format!("header lacks `{name}=`"));
    let grid = DyadicGrid::new(dim.ok_or_else(|| missing("dim"))?, depth.ok_or_else(|| missing("depth"))?)
        .map_err(|e| parse_err(hline, e.to_string()))?;
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let d = d.ok_or_else(|| missing("d"))?;
    if d == 0 {
        return Err(parse_err(hline, "d must be positive"));
    }
    let n = grid.cell_count();
    let mut rows: Vec<(usize, String)> = Vec::with_capacity(n);
    for (i, l) in lines {
        rows.push((i, l?));
    }
    if rows.len() != n {
        return Err(parse_err(rows.last().map_or(hline, |r| r.0), format!("expected {n} cell lines, found {}", rows.len())));
    }
    let field = match kind.as_str() {
        "scalar" => {
            let vals = rows
                .iter()
                .map(|(i, l)| {
                    let v = numbers(*i, &l.split_whitespace().collect::<Vec<_>>())?;
                    expect_len(*i, &v, 1)?;
                    Ok(v[0])
                })
                .collect::<Result<Vec<f64>>>()?;
            AnyField::Scalar(DyadicField::new(grid, vals)?)
        }
        "vector" => {
            let vals = rows
                .iter()
                .map(|(i, l)| {
                    let v = numbers(*i, &l.split_whitespace().collect::<Vec<_>>())?;
                    expect_len(*i, &v, d)?;
                    Ok(v)
                })
                .collect::<Result<Vec<Vector>>>()?;
            AnyField::Vector(DyadicField::new(grid, vals)?)
        }
        "matrix" => {
            let vals = rows
                .iter()
                .map(|(i, l)| matrix(*i, numbers(*i, &l.split_whitespace().collect::<Vec<_>>())?, d))
                .collect::<Result<Vec<SpdMatrix>>>()?;
            AnyField::Matrix(DyadicField::new(grid, vals)?)
        }
        "body" => {
            let vals = rows.iter().map(|(i, l)| body(*i, l, d)).collect::<Result<Vec<ConvexBody>>>()?;
            AnyField::Body(DyadicField::new(grid, vals)?)
        }
        other => return Err(parse_err(hline, format!("unknown kind `{other}`"))),
    };
    Ok(field)
}

fn body(line_no: usize, line: &str, d: usize) -> Result<ConvexBody> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let Some((tag, rest)) = parts.split_first() else {
        return Err(parse_err(line_no, "empty body line"));
    };
    let v = numbers(line_no, rest)?;
    match *tag {
        "segment" => {
            expect_len(line_no, &v, d)?;
            Ok(ConvexBody::segment(v))
        }
        "ellipsoid" => Ok(ConvexBody::ellipsoid(matrix(line_no, v, d)?)),
        "sampled" => {
            if d > 8 {
                return Err(parse_err(line_no, "sampled bodies are supported for d ≤ 8"));
            }
            ConvexBody::sampled(DirectionSet::standard(d), v).map_err(|e| parse_err(line_no, e.to_string()))
        }
        other => Err(parse_err(line_no, format!("unknown body kind `{other}`"))),
    }
}

fn push_numbers(out: &mut String, v: &[f64]) {
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{x}").expect("writing to a string");
    }
}

/// Serializes a field; sampled bodies are resampled on the standard directions if needed.
pub fn format_field(f: &AnyField) -> String {
    let g = f.grid();
    let mut out = format!(
        "{MAGIC} v1 dim={} depth={} kind={} d={}\n",
        g.dim(),
        g.depth(),
        f.kind(),
        f.value_dim()
    );
    for cell in 0..g.cell_count() {
        match f {
            AnyField::Scalar(s) => push_numbers(&mut out, &[s.values()[cell]]),
            AnyField::Vector(s) => push_numbers(&mut out, &s.values()[cell]),
            AnyField::Matrix(s) => push_numbers(&mut out, s.values()[cell].mat().as_slice()),
            AnyField::Body(s) => {
                let b = &s.values()[cell];
                match b {
                    ConvexBody::Segment(v) => {
                        out.push_str("segment ");
                        push_numbers(&mut out, v);
                    }
                    ConvexBody::Ellipsoid(a) => {
                        out.push_str("ellipsoid ");
                        push_numbers(&mut out, a.mat().as_slice());
                    }
                    ConvexBody::Sampled(_) => {
                        out.push_str("sampled ");
                        push_numbers(&mut out, &b.support_on(&DirectionSet::standard(b.dim())));
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_field(mut w: impl Write, f: &AnyField) -> Result<()> {
    w.write_all(format_field(f).as_bytes())?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<AnyField> {
    read_field(BufReader::new(File::open(path)?))
}

pub fn save(path: impl AsRef<Path>, f: &AnyField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(f: &AnyField) -> AnyField {
        let text = format_field(f);
        let back = read_field(text.as_bytes()).unwrap();
        assert_eq!(format_field(&back), text);
        back
    }

    #[test]
    fn scalar_and_vector_round_trip() {
        let g = DyadicGrid::new(2, 2).unwrap();
        let s = DyadicField::from_fn(g, |i| 0.1 * i as f64 + 1.0 / 3.0);
        match round_trip(&AnyField::Scalar(s.clone())) {
            AnyField::Scalar(b) => assert_eq!(b, s),
            other => panic!("{}", other.kind()),
        }
        let v = DyadicField::from_fn(g, |i| vec![i as f64, -1e-300, 2.5e10]);
        match round_trip(&AnyField::Vector(v.clone())) {
            AnyField::Vector(b) => assert_eq!(b, v),
            other => panic!("{}", other.kind()),
        }
    }

    #[test]
    fn matrix_and_body_round_trip() {
        let g = DyadicGrid::new(1, 2).unwrap();
        let m = DyadicField::from_fn(g, |i| SpdMatrix::new(Mat::from_rows([[2.0 + i as f64, 0.5], [0.5, 1.0]])).unwrap());
        round_trip(&AnyField::Matrix(m));
        let b = DyadicField::from_fn(g, |i| match i {
            0 => ConvexBody::segment(vec![1.0, 2.0]),
            1 => ConvexBody::ellipsoid(SpdMatrix::diag(&[2.0, 3.0])),
            _ => ConvexBody::from_support(2, |u| u[0].abs() + 0.5 * u[1].abs()).unwrap(),
        });
        match round_trip(&AnyField::Body(b)) {
            AnyField::Body(back) => {
                assert!(matches!(back.values()[0], ConvexBody::Segment(_)));
                assert!(matches!(back.values()[1], ConvexBody::Ellipsoid(_)));
                assert!(matches!(back.values()[3], ConvexBody::Sampled(_)));
            }
            other => panic!("{}", other.kind()),
        }
    }

    #[test]
    fn malformed_files_are_rejected_with_line_numbers() {
        let cases = [
            ("", 1),
            ("weightlab-field v2 dim=1 depth=0 kind=scalar d=1\n1\n", 1),
            ("weightlab-field v1 dim=1 depth=1 kind=scalar d=1\n1\n", 2),
            ("weightlab-field v1 dim=1 depth=1 kind=scalar d=1\n1\nx\n", 3),
            ("weightlab-field v1 dim=1 depth=0 kind=matrix d=2\n1 2 3 4\n", 2),
            ("weightlab-field v1 dim=1 depth=0 kind=body d=2\ncube 1 2\n", 2),
            ("weightlab-field v1 dim=1 depth=0 kind=tensor d=2\n1\n", 1),
        ];
        for (text, line) in cases {
            match read_field(text.as_bytes()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }
}
