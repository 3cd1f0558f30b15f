//! ASCII OFF import/export.
//!
//! Identifications and metric data travel in a trailing comment block:
//!
//! ```text
//! # IDENT none
//! # IDENT periodic_x <period>
//! # IDENT periodic_xy <period_x> <period_y>
//! # IDENT conformal <f_0> <f_1> ... <f_{n-1}>
//! # IDENT edge <a> <b> <length>
//! ```
//!
//! `conformal` and `edge` lines appear only for surfaces carrying a
//! conformal factor; floats are written in shortest round-trip form.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{Identification, SurfaceError, TriangulatedSurface};

pub fn write_off<W: Write>(surface: &TriangulatedSurface, mut out: W) -> Result<(), SurfaceError> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", surface.vertex_count(), surface.triangle_count())?;
    for p in surface.positions() {
        writeln!(out, "{:?} {:?} 0", p[0], p[1])?;
    }
    for t in surface.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    match surface.identification() {
        Identification::None => writeln!(out, "# IDENT none")?,
        Identification::PeriodicX { period } => writeln!(out, "# IDENT periodic_x {period:?}")?,
        Identification::PeriodicXY { period_x, period_y } => {
            writeln!(out, "# IDENT periodic_xy {period_x:?} {period_y:?}")?
        }
    }
    if let Some(f) = surface.conformal_factor() {
        write!(out, "# IDENT conformal")?;
        for x in f {
            write!(out, " {x:?}")?;
        }
        writeln!(out)?;
        for (&[a, b], len) in surface.edges().iter().zip(surface.edge_lengths()) {
            writeln!(out, "# IDENT edge {a} {b} {len:?}")?;
        }
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> SurfaceError {
    SurfaceError::OffParse { line, message: message.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T, SurfaceError> {
    tok.ok_or_else(|| parse_err(line, "missing number"))?
        .parse()
        .map_err(|_| parse_err(line, "malformed number"))
}

pub fn read_off<R: BufRead>(input: R) -> Result<TriangulatedSurface, SurfaceError> {
    let mut body: Vec<(usize, String)> = Vec::new();
    let mut ident = Identification::None;
    let mut conformal: Option<Vec<f64>> = None;
    let mut edge_lengths: HashMap<[usize; 2], f64> = HashMap::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("# IDENT") {
            let mut tok = rest.split_whitespace();
            match tok.next() {
                Some("none") => ident = Identification::None,
                Some("periodic_x") => ident = Identification::PeriodicX { period: num(tok.next(), lineno)? },
                Some("periodic_xy") => {
                    ident = Identification::PeriodicXY {
                        period_x: num(tok.next(), lineno)?,
                        period_y: num(tok.next(), lineno)?,
                    }
                }
                Some("conformal") => {
                    conformal = Some(tok.map(|t| num(Some(t), lineno)).collect::<Result<_, _>>()?);
                }
                Some("edge") => {
                    let a: usize = num(tok.next(), lineno)?;
                    let b: usize = num(tok.next(), lineno)?;
                    edge_lengths.insert([a.min(b), a.max(b)], num(tok.next(), lineno)?);
                }
                other => return Err(parse_err(lineno, format!("unknown IDENT record {other:?}"))),
            }
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        body.push((lineno, trimmed.to_string()));
    }
    let mut lines = body.into_iter();
    match lines.next() {
        Some((_, h)) if h == "OFF" => {}
        Some((n, _)) => return Err(parse_err(n, "expected OFF header")),
        None => return Err(parse_err(0, "empty input")),
    }
    let (n, counts) = lines.next().ok_or_else(|| parse_err(0, "missing counts"))?;
    let mut tok = counts.split_whitespace();
    let nv: usize = num(tok.next(), n)?;
    let nf: usize = num(tok.next(), n)?;
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or_else(|| parse_err(0, "truncated vertex list"))?;
        let mut tok = l.split_whitespace();
        positions.push([num(tok.next(), n)?, num(tok.next(), n)?]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = lines.next().ok_or_else(|| parse_err(0, "truncated face list"))?;
        let mut tok = l.split_whitespace();
        let k: usize = num(tok.next(), n)?;
        if k != 3 {
            return Err(parse_err(n, "only triangles are supported"));
        }
        triangles.push([num(tok.next(), n)?, num(tok.next(), n)?, num(tok.next(), n)?]);
    }
    let surface = TriangulatedSurface::new(positions, triangles, ident)?;
    match conformal {
        None => Ok(surface),
        Some(f) => {
            let lengths = surface
                .edges()
                .iter()
                .map(|e| edge_lengths.get(e).copied().ok_or_else(|| parse_err(0, format!("missing edge {e:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            surface.with_metric(f, lengths)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_surface, stretch_metric, SurfaceKind};
    use std::io::Cursor;

    fn roundtrip(s: &TriangulatedSurface) -> TriangulatedSurface {
        let mut buf = Vec::new();
        write_off(s, &mut buf).unwrap();
        read_off(Cursor::new(buf)).unwrap()
    }

    #[test]
    fn roundtrip_preserves_everything() {
        for kind in [SurfaceKind::Rectangle, SurfaceKind::Cylinder, SurfaceKind::FlatTorus] {
            let s = build_surface(kind, 6, &[1.0, 1.3]).unwrap();
            let r = roundtrip(&s);
            assert_eq!(r.id(), s.id());
            assert_eq!(r.identification(), s.identification());
        }
        let s = stretch_metric(&build_surface(SurfaceKind::Rectangle, 8, &[1.0, 1.0]).unwrap(), 0.3, 20.0).unwrap();
        let r = roundtrip(&s);
        assert_eq!(r.edge_lengths(), s.edge_lengths());
        assert_eq!(r.conformal_factor(), s.conformal_factor());
    }

    #[test]
    fn ident_block_grammar() {
        let text = "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n# IDENT none\n";
        let s = read_off(Cursor::new(text)).unwrap();
        assert_eq!(s.identification(), Identification::None);
        let bad = text.replace("none", "mobius");
        assert!(matches!(read_off(Cursor::new(bad)), Err(SurfaceError::OffParse { line: 9, .. })));
        let quad = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(read_off(Cursor::new(quad)).is_err());
    }
}
