//! CSV and JSON persistence.
//!
//! Field snapshots look like
//!
//! ```text
//! # nx,ny,lambda2,a,b,c
//! # 32,32,5.0000000000000000e0,...
//! i,j,x,y,q1,q2,q3,q4,q5
//! 1,1,3.0303030303030304e-2,...
//! ```
//!
//! with every real printed with 17 significant digits, so reading back
//! reproduces the bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path as FsPath;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Domain, QField};
use crate::flow::TrajectoryRow;
use crate::hedgehog::HedgehogProfile;
use crate::landscape::{EdgeKind, LandscapeGraph};
use crate::maier_saupe::MsCriticalPoint;
use crate::string::{MepResult, Path};

/// Formats a real with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub lambda2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FieldHeader {
    pub fn of(d: &Domain) -> Self {
        FieldHeader {
            nx: d.nx(),
            ny: d.ny(),
            lambda2: d.lambda2(),
            a: d.bulk().a,
            b: d.bulk().b,
            c: d.bulk().c,
        }
    }
}

pub fn field_to_string(f: &QField) -> String {
    let d = f.domain();
    let h = FieldHeader::of(d);
    let mut s = String::new();
    s.push_str("# nx,ny,lambda2,a,b,c\n");
    let _ = writeln!(
        s,
        "# {},{},{},{},{},{}",
        h.nx,
        h.ny,
        fmt17(h.lambda2),
        fmt17(h.a),
        fmt17(h.b),
        fmt17(h.c)
    );
    s.push_str("i,j,x,y,q1,q2,q3,q4,q5\n");
    for j in 1..=d.ny() {
        for i in 1..=d.nx() {
            let o = d.node_offset(i, j);
            let q = &f.as_slice()[o..o + 5];
            let _ = write!(s, "{i},{j},{},{}", fmt17(i as f64 * d.hx()), fmt17(j as f64 * d.hy()));
            for v in q {
                let _ = write!(s, ",{}", fmt17(*v));
            }
            s.push('\n');
        }
    }
    s
}

pub fn write_field(path: impl AsRef<FsPath>, f: &QField) -> Result<()> {
    fs::write(path, field_to_string(f))?;
    Ok(())
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, column: usize) -> Result<T> {
    tok.trim()
        .parse()
        .map_err(|_| parse_err(line, column, format!("invalid number `{}`", tok.trim())))
}

/// Reads the header of a snapshot.
pub fn parse_field_header(text: &str) -> Result<FieldHeader> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == "# nx,ny,lambda2,a,b,c" => {}
        _ => return Err(parse_err(1, 1, "expected `# nx,ny,lambda2,a,b,c`")),
    }
    let l2 = lines.next().ok_or_else(|| parse_err(2, 1, "missing header values"))?;
    let body = l2
        .strip_prefix('#')
        .ok_or_else(|| parse_err(2, 1, "header values must start with `#`"))?;
    let toks: Vec<&str> = body.split(',').collect();
    if toks.len() != 6 {
        return Err(parse_err(2, toks.len().min(6) + 1, "expected 6 header values"));
    }
    Ok(FieldHeader {
        nx: parse_num(toks[0], 2, 1)?,
        ny: parse_num(toks[1], 2, 2)?,
        lambda2: parse_num(toks[2], 2, 3)?,
        a: parse_num(toks[3], 2, 4)?,
        b: parse_num(toks[4], 2, 5)?,
        c: parse_num(toks[5], 2, 6)?,
    })
}

/// Parses a snapshot for `domain`. A header that disagrees with the domain is
/// a `ShapeMismatch`.
pub fn parse_field(text: &str, domain: &Arc<Domain>) -> Result<QField> {
    let h = parse_field_header(text)?;
    let want = FieldHeader::of(domain);
    if h != want {
        return Err(Error::ShapeMismatch {
            expected: format!("{want:?}"),
            found: format!("{h:?}"),
        });
    }
    let mut data = vec![0.0; domain.len()];
    let mut seen = vec![false; domain.nx() * domain.ny()];
    let mut rows = 0;
    let mut last_line = 2;
    for (k, line) in text.lines().enumerate().skip(2) {
        let ln = k + 1;
        last_line = ln;
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("i,") {
            continue;
        }
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != 9 {
            return Err(parse_err(ln, toks.len().min(9) + 1, format!("expected 9 columns, found {}", toks.len())));
        }
        let i: usize = parse_num(toks[0], ln, 1)?;
        let j: usize = parse_num(toks[1], ln, 2)?;
        if !(1..=domain.nx()).contains(&i) || !(1..=domain.ny()).contains(&j) {
            return Err(parse_err(ln, 1, format!("node ({i},{j}) outside the grid")));
        }
        let o = domain.node_offset(i, j);
        for c in 0..5 {
            data[o + c] = parse_num(toks[4 + c], ln, 5 + c)?;
        }
        seen[o / 5] = true;
        rows += 1;
    }
    if rows != seen.len() || seen.iter().any(|s| !s) {
        return Err(parse_err(
            last_line + 1,
            1,
            format!("expected {} node rows, found {rows}", seen.len()),
        ));
    }
    QField::from_vec(domain.clone(), data)
}

pub fn read_field(path: impl AsRef<FsPath>, domain: &Arc<Domain>) -> Result<QField> {
    parse_field(&fs::read_to_string(path)?, domain)
}

pub fn write_trajectory(path: impl AsRef<FsPath>, rows: &[TrajectoryRow]) -> Result<()> {
    let mut s = String::from("step,time,energy,modified_energy,grad_inf_norm\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.step,
            fmt17(r.time),
            fmt17(r.energy),
            fmt17(r.modified_energy),
            fmt17(r.grad_inf_norm)
        );
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_profile(path: impl AsRef<FsPath>, p: &Path) -> Result<()> {
    let mut s = String::from("node,alpha,energy\n");
    for (i, (a, e)) in p.alpha.iter().zip(&p.energies).enumerate() {
        let _ = writeln!(s, "{i},{},{}", fmt17(*a), fmt17(*e));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_mep_summary(path: impl AsRef<FsPath>, r: &MepResult) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(r)?)?;
    Ok(())
}

#[derive(Serialize)]
struct LandscapeNodeJson<'a> {
    id: usize,
    index: usize,
    energy: f64,
    file: &'a str,
}

#[derive(Serialize)]
struct LandscapeEdgeJson {
    from: usize,
    to: usize,
    kind: EdgeKind,
    sign: i8,
}

#[derive(Serialize)]
struct LandscapeJson<'a> {
    nodes: Vec<LandscapeNodeJson<'a>>,
    edges: Vec<LandscapeEdgeJson>,
    truncated: bool,
}

/// Landscape JSON; `files[i]` names the snapshot of node `i`.
pub fn landscape_json(g: &LandscapeGraph, files: &[String]) -> Result<String> {
    let doc = LandscapeJson {
        nodes: g
            .nodes
            .iter()
            .map(|n| LandscapeNodeJson {
                id: n.id,
                index: n.morse_index,
                energy: n.energy,
                file: files.get(n.id).map(String::as_str).unwrap_or(""),
            })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| LandscapeEdgeJson {
                from: e.from,
                to: e.to,
                kind: e.kind,
                sign: e.sign,
            })
            .collect(),
        truncated: g.truncated,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn write_landscape(path: impl AsRef<FsPath>, g: &LandscapeGraph, files: &[String]) -> Result<()> {
    fs::write(path, landscape_json(g, files)?)?;
    Ok(())
}

pub fn write_branches(path: impl AsRef<FsPath>, alpha: f64, pts: &[MsCriticalPoint]) -> Result<()> {
    let mut s = String::from("alpha,eta,branch,stable,s2,s4\n");
    for p in pts {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt17(alpha),
            fmt17(p.eta),
            p.branch,
            p.stable,
            fmt17(p.s2),
            fmt17(p.s4)
        );
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_hedgehog(path: impl AsRef<FsPath>, p: &HedgehogProfile) -> Result<()> {
    let mut s = String::from("r,h\n");
    for (r, h) in p.r.iter().zip(&p.h) {
        let _ = writeln!(s, "{},{}", fmt17(*r), fmt17(*h));
    }
    fs::write(path, s)?;
    Ok(())
}
