//! Line-oriented text formats for paths, connection fields, verification
//! reports, and tolerance overrides.
//!
//! All formats share the same conventions: `#` starts a comment, blank
//! lines are ignored, tokens are whitespace-separated, and floats are
//! written with 17 significant digits so a write/parse round trip is exact
//! bit for bit.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauge::{check_algebra, CMatrix, ConnectionField, GroupTag};
use crate::paths::{Path, Point};
use crate::verify::{SuiteTolerances, VerificationReport};

/// Algebra membership tolerance applied to matrices read from field files.
pub const FIELD_FILE_TOL: f64 = 1e-10;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line + 1,
        msg: msg.into(),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite number {tok:?}")));
    }
    Ok(v)
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} {tok:?}")))
}

fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            None
        } else {
            Some((i, tokens))
        }
    })
}

fn parse_coords(tokens: &[&str], n: usize, line: usize) -> Result<Point> {
    if tokens.len() != n {
        return Err(parse_err(
            line,
            format!("expected {n} coordinates, found {}", tokens.len()),
        ));
    }
    let mut coords = Vec::with_capacity(n);
    for t in tokens {
        coords.push(parse_f64(t, line)?);
    }
    Point::new(coords).map_err(|e| parse_err(line, e.to_string()))
}

/// Path file: one `dim n` line, one `base` line, then zero or more `v`
/// vertex lines, in that order.
pub fn parse_path(text: &str) -> Result<Path> {
    let mut dim: Option<usize> = None;
    let mut base: Option<Point> = None;
    let mut vertices: Vec<Point> = Vec::new();
    for (line, tokens) in meaningful_lines(text) {
        match tokens[0] {
            "dim" => {
                if dim.is_some() {
                    return Err(parse_err(line, "duplicate dim line"));
                }
                if tokens.len() != 2 {
                    return Err(parse_err(line, "dim takes exactly one value"));
                }
                let n = parse_usize(tokens[1], line, "dimension")?;
                if n == 0 {
                    return Err(parse_err(line, "dimension must be at least 1"));
                }
                dim = Some(n);
            }
            "base" => {
                let n = dim.ok_or_else(|| parse_err(line, "base line before dim"))?;
                if base.is_some() {
                    return Err(parse_err(line, "duplicate base line"));
                }
                base = Some(parse_coords(&tokens[1..], n, line)?);
            }
            "v" => {
                let n = dim.ok_or_else(|| parse_err(line, "vertex line before dim"))?;
                if base.is_none() {
                    return Err(parse_err(line, "vertex line before base"));
                }
                vertices.push(parse_coords(&tokens[1..], n, line)?);
            }
            other => return Err(parse_err(line, format!("unknown keyword {other:?}"))),
        }
    }
    let base =
        base.ok_or_else(|| parse_err(text.lines().count().saturating_sub(1), "missing base line"))?;
    Path::new(base, vertices)
}

fn push_floats(out: &mut String, values: impl Iterator<Item = f64>) {
    for v in values {
        out.push(' ');
        out.push_str(&format!("{v:.16e}"));
    }
}

pub fn write_path(p: &Path) -> String {
    let mut out = String::new();
    out.push_str(&format!("dim {}\n", p.dim()));
    out.push_str("base");
    push_floats(&mut out, p.base().coords().iter().cloned());
    out.push('\n');
    for v in p.vertices() {
        out.push_str("v");
        push_floats(&mut out, v.coords().iter().cloned());
        out.push('\n');
    }
    out
}

fn parse_matrix(tokens: &[&str], d: usize, line: usize) -> Result<CMatrix> {
    let need = 2 * d * d;
    if tokens.len() != need {
        return Err(parse_err(
            line,
            format!(
                "expected {need} matrix entries (re im pairs), found {}",
                tokens.len()
            ),
        ));
    }
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d * d {
        let re = parse_f64(tokens[2 * i], line)?;
        let im = parse_f64(tokens[2 * i + 1], line)?;
        m[(i / d, i % d)] = Complex64::new(re, im);
    }
    Ok(m)
}

/// Field file: a `group` line (`u1`, `su2`, or `gl d`), a `dim n` line,
/// then `C mu ...` and `D mu nu ...` coefficient matrices in row-major
/// `re im` pairs. Omitted coefficients are zero; direction indices are
/// 1-based; duplicates are errors. Algebra membership is checked on load
/// with tolerance `FIELD_FILE_TOL`.
pub fn parse_field(text: &str) -> Result<ConnectionField> {
    let mut group: Option<GroupTag> = None;
    let mut dim: Option<usize> = None;
    let mut constant: Vec<Option<CMatrix>> = Vec::new();
    let mut linear: Vec<Vec<Option<CMatrix>>> = Vec::new();
    let index = |tok: &str, line: usize, n: usize| -> Result<usize> {
        let mu = parse_usize(tok, line, "direction index")?;
        if mu == 0 || mu > n {
            return Err(parse_err(
                line,
                format!("direction index {mu} out of range 1..={n}"),
            ));
        }
        Ok(mu - 1)
    };
    for (line, tokens) in meaningful_lines(text) {
        match tokens[0] {
            "group" => {
                if group.is_some() {
                    return Err(parse_err(line, "duplicate group line"));
                }
                let tag = match tokens.get(1).copied() {
                    Some("u1") if tokens.len() == 2 => GroupTag::U1,
                    Some("su2") if tokens.len() == 2 => GroupTag::Su2,
                    Some("gl") if tokens.len() == 3 => {
                        let d = parse_usize(tokens[2], line, "matrix dimension")?;
                        if d == 0 {
                            return Err(parse_err(line, "matrix dimension must be at least 1"));
                        }
                        GroupTag::Gl(d)
                    }
                    _ => return Err(parse_err(line, "group must be 'u1', 'su2', or 'gl <d>'")),
                };
                group = Some(tag);
            }
            "dim" => {
                if group.is_none() {
                    return Err(parse_err(line, "dim line before group"));
                }
                if dim.is_some() {
                    return Err(parse_err(line, "duplicate dim line"));
                }
                if tokens.len() != 2 {
                    return Err(parse_err(line, "dim takes exactly one value"));
                }
                let n = parse_usize(tokens[1], line, "dimension")?;
                if n == 0 {
                    return Err(parse_err(line, "dimension must be at least 1"));
                }
                constant = vec![None; n];
                linear = vec![vec![None; n]; n];
                dim = Some(n);
            }
            "C" => {
                let (g, n) = match (group, dim) {
                    (Some(g), Some(n)) => (g, n),
                    _ => return Err(parse_err(line, "coefficient line before group/dim")),
                };
                if tokens.len() < 2 {
                    return Err(parse_err(line, "C takes a direction index"));
                }
                let mu = index(tokens[1], line, n)?;
                if constant[mu].is_some() {
                    return Err(parse_err(line, format!("duplicate C {}", mu + 1)));
                }
                let m = parse_matrix(&tokens[2..], g.matrix_dim(), line)?;
                check_algebra(&m, g, FIELD_FILE_TOL).map_err(|e| parse_err(line, e.to_string()))?;
                constant[mu] = Some(m);
            }
            "D" => {
                let (g, n) = match (group, dim) {
                    (Some(g), Some(n)) => (g, n),
                    _ => return Err(parse_err(line, "coefficient line before group/dim")),
                };
                if tokens.len() < 3 {
                    return Err(parse_err(line, "D takes two direction indices"));
                }
                let mu = index(tokens[1], line, n)?;
                let nu = index(tokens[2], line, n)?;
                if linear[mu][nu].is_some() {
                    return Err(parse_err(
                        line,
                        format!("duplicate D {} {}", mu + 1, nu + 1),
                    ));
                }
                let m = parse_matrix(&tokens[3..], g.matrix_dim(), line)?;
                check_algebra(&m, g, FIELD_FILE_TOL).map_err(|e| parse_err(line, e.to_string()))?;
                linear[mu][nu] = Some(m);
            }
            other => return Err(parse_err(line, format!("unknown keyword {other:?}"))),
        }
    }
    let group = group
        .ok_or_else(|| parse_err(text.lines().count().saturating_sub(1), "missing group line"))?;
    let dim =
        dim.ok_or_else(|| parse_err(text.lines().count().saturating_sub(1), "missing dim line"))?;
    let d = group.matrix_dim();
    let zero = CMatrix::zeros(d, d);
    let constant: Vec<CMatrix> = constant
        .into_iter()
        .map(|m| m.unwrap_or_else(|| zero.clone()))
        .collect();
    let linear: Vec<Vec<CMatrix>> = linear
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|m| m.unwrap_or_else(|| zero.clone()))
                .collect()
        })
        .collect();
    ConnectionField::with_matrices(group, dim, constant, linear, FIELD_FILE_TOL)
}

fn push_matrix(out: &mut String, m: &CMatrix) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            out.push_str(&format!(" {:.16e} {:.16e}", z.re, z.im));
        }
    }
}

pub fn write_field(f: &ConnectionField) -> String {
    let mut out = String::new();
    out.push_str(&format!("group {}\n", f.group()));
    out.push_str(&format!("dim {}\n", f.dim()));
    let is_zero = |m: &CMatrix| m.iter().all(|z| z.re == 0.0 && z.im == 0.0);
    for (i, m) in f.constant_matrices().iter().enumerate() {
        if !is_zero(m) {
            out.push_str(&format!("C {}", i + 1));
            push_matrix(&mut out, m);
            out.push('\n');
        }
    }
    for (i, row) in f.linear_matrices().iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            if !is_zero(m) {
                out.push_str(&format!("D {} {}", i + 1, j + 1));
                push_matrix(&mut out, m);
                out.push('\n');
            }
        }
    }
    out
}

/// Report CSV: one row per identity plus a final `ALL` summary row with the
/// total sample count, the worst per-identity maximum, and the mean of the
/// per-identity means. Order and tolerance carry no aggregate meaning and
/// are written as zero in the summary.
pub fn write_report(r: &VerificationReport) -> String {
    let mut out =
        String::from("identity,samples,max_error,mean_error,observed_order,tolerance,pass\n");
    let verdict = |p: bool| if p { "pass" } else { "fail" };
    for rec in &r.records {
        out.push_str(&format!(
            "{},{},{:.5e},{:.5e},{:.5e},{:.5e},{}\n",
            rec.name,
            rec.samples,
            rec.max_error,
            rec.mean_error,
            rec.observed_order,
            rec.tolerance,
            verdict(rec.pass),
        ));
    }
    let total: usize = r.records.iter().map(|rec| rec.samples).sum();
    let worst = r
        .records
        .iter()
        .map(|rec| rec.max_error)
        .fold(0.0, f64::max);
    let mean = if r.records.is_empty() {
        0.0
    } else {
        r.records.iter().map(|rec| rec.mean_error).sum::<f64>() / r.records.len() as f64
    };
    out.push_str(&format!(
        "ALL,{},{:.5e},{:.5e},{:.5e},{:.5e},{}\n",
        total,
        worst,
        mean,
        0.0,
        0.0,
        verdict(r.pass),
    ));
    out
}

/// Tolerance override file: `<key> <value>` per line, keys as accepted by
/// `SuiteTolerances::set`.
pub fn apply_tolerances(text: &str, tols: &mut SuiteTolerances) -> Result<()> {
    for (line, tokens) in meaningful_lines(text) {
        if tokens.len() != 2 {
            return Err(parse_err(line, "expected '<key> <value>'"));
        }
        let value = parse_f64(tokens[1], line)?;
        tols.set(tokens[0], value)
            .map_err(|e| parse_err(line, e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::IdentityRecord;

    #[test]
    fn path_write_parse_round_trip_is_exact() {
        let p = Path::new(
            Point::new(vec![0.1, -2.5e-7]).unwrap(),
            vec![
                Point::new(vec![1.0 / 3.0, 7.13e300]).unwrap(),
                Point::new(vec![-0.0, 1e-320]).unwrap(),
            ],
        )
        .unwrap();
        let text = write_path(&p);
        let q = parse_path(&text).unwrap();
        assert_eq!(p, q);
        let r = parse_path(&write_path(&q)).unwrap();
        assert_eq!(q, r);
    }

    #[test]
    fn path_parser_accepts_comments_and_blank_lines() {
        let text = "# a loop\n\ndim 2\nbase 0 0   # origin\nv 1 0\nv 1 1\n\n# done\n";
        let p = parse_path(text).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.vertices().len(), 2);
    }

    #[test]
    fn path_parser_reports_line_numbers() {
        let cases = [
            ("base 0 0\n", 1, "before dim"),
            ("dim 2\nv 1 0\n", 2, "before base"),
            ("dim 2\nbase 0 0\nv 1\n", 3, "coordinates"),
            ("dim 2\nbase 0 0\nv 1 x\n", 3, "invalid number"),
            ("dim 2\ndim 3\n", 2, "duplicate"),
            ("dim 2\nbase 0 0\nw 1 1\n", 3, "unknown keyword"),
            ("dim 0\n", 1, "at least 1"),
            ("dim 2\nbase 0 inf\n", 2, "non-finite"),
        ];
        for (text, line, needle) in cases {
            match parse_path(text) {
                Err(Error::Parse { line: l, msg }) => {
                    assert_eq!(l, line, "line for {text:?}");
                    assert!(msg.contains(needle), "msg {msg:?} for {text:?}");
                }
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
        assert!(matches!(parse_path("dim 2\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn field_write_parse_round_trip() {
        let f = ConnectionField::reference_su2();
        let text = write_field(&f);
        let g = parse_field(&text).unwrap();
        assert_eq!(f, g);
        let u = ConnectionField::reference_u1(0.5);
        assert_eq!(parse_field(&write_field(&u)).unwrap(), u);
    }

    #[test]
    fn field_parser_validates_structure() {
        assert!(parse_field("dim 2\ngroup u1\n").is_err());
        assert!(parse_field("group u1\n").is_err());
        let dup = "group u1\ndim 2\nD 1 2 0 1\nD 1 2 0 1\n";
        assert!(matches!(
            parse_field(dup),
            Err(Error::Parse { line: 4, .. })
        ));
        let range = "group u1\ndim 2\nC 3 0 1\n";
        assert!(matches!(
            parse_field(range),
            Err(Error::Parse { line: 3, .. })
        ));
        let count = "group su2\ndim 1\nC 1 0 1 0 1\n";
        assert!(parse_field(count).is_err());
        let bad_group = "group su3\ndim 2\n";
        assert!(parse_field(bad_group).is_err());
    }

    #[test]
    fn field_parser_enforces_algebra_membership() {
        // A Hermitian (not anti-Hermitian) coefficient must be rejected.
        let text = "group u1\ndim 2\nC 1 1 0\n";
        assert!(matches!(
            parse_field(text),
            Err(Error::Parse { line: 3, .. })
        ));
        // An anti-Hermitian one passes.
        let ok = "group u1\ndim 2\nC 1 0 1\n";
        assert!(parse_field(ok).is_ok());
    }

    #[test]
    fn zero_matrices_may_be_omitted() {
        let text = "group su2\ndim 2\n";
        let f = parse_field(text).unwrap();
        assert_eq!(f, ConnectionField::zero(GroupTag::Su2, 2).unwrap());
    }

    #[test]
    fn report_layout_is_stable() {
        let report = VerificationReport {
            records: vec![
                IdentityRecord {
                    name: "homomorphism".into(),
                    samples: 10,
                    max_error: 1.25e-12,
                    mean_error: 5e-13,
                    observed_order: 0.0,
                    tolerance: 1e-9,
                    pass: true,
                },
                IdentityRecord {
                    name: "curvature".into(),
                    samples: 4,
                    max_error: 2e-5,
                    mean_error: 1e-5,
                    observed_order: 1.98,
                    tolerance: 1e-4,
                    pass: true,
                },
            ],
            notes: vec![],
            pass: true,
        };
        let text = write_report(&report);
        let expected = "identity,samples,max_error,mean_error,observed_order,tolerance,pass\n\
                        homomorphism,10,1.25000e-12,5.00000e-13,0.00000e0,1.00000e-9,pass\n\
                        curvature,4,2.00000e-5,1.00000e-5,1.98000e0,1.00000e-4,pass\n\
                        ALL,14,2.00000e-5,5.00000e-6,0.00000e0,0.00000e0,pass\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn tolerance_files_override_by_key() {
        let mut tols = SuiteTolerances::default();
        apply_tolerances("# loosen\ncurvature_rel 1e-2\norder_min 1.5\n", &mut tols).unwrap();
        assert_eq!(tols.curvature_rel, 1e-2);
        assert_eq!(tols.order_min, 1.5);
        assert!(apply_tolerances("bogus 1\n", &mut tols).is_err());
        assert!(apply_tolerances("curvature_rel\n", &mut tols).is_err());
    }
}
