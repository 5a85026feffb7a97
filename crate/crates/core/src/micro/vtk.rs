//! Legacy ASCII STRUCTURED_POINTS import with a sidecar orientation table.

use std::collections::BTreeMap;
use std::path::Path;

use super::Microstructure;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredPoints {
    /// Cell counts along x, y, z.
    pub cells: [usize; 3],
    pub spacing: [f64; 3],
    pub values: Vec<i64>,
}

pub fn parse_structured_points(text: &str, path: &Path) -> Result<StructuredPoints> {
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect();
    if lines.len() < 4 || !lines[0].1.starts_with("# vtk DataFile") {
        return Err(err(1, "missing `# vtk DataFile` header".into()));
    }
    if lines[2].1 != "ASCII" {
        return Err(err(3, "only ASCII files are supported".into()));
    }
    let mut dims: Option<[usize; 3]> = None;
    let mut spacing = [1.0; 3];
    let mut cell_count: Option<(usize, usize)> = None;
    let mut values = Vec::new();
    let mut i = 3;
    let triple = |n: usize, rest: &[&str]| -> Result<[f64; 3]> {
        if rest.len() != 3 {
            return Err(err(n, "expected three numbers".into()));
        }
        let mut out = [0.0; 3];
        for (o, s) in out.iter_mut().zip(rest) {
            *o = s.parse().map_err(|_| err(n, format!("bad number {s:?}")))?;
        }
        Ok(out)
    };
    while i < lines.len() {
        let (n, l) = lines[i];
        let toks: Vec<&str> = l.split_whitespace().collect();
        i += 1;
        match toks.first().copied() {
            None => {}
            Some("DATASET") => {
                if toks.get(1) != Some(&"STRUCTURED_POINTS") {
                    return Err(err(n, "only DATASET STRUCTURED_POINTS is supported".into()));
                }
            }
            Some("DIMENSIONS") => {
                let t = triple(n, &toks[1..])?;
                if t.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
                    return Err(err(n, "dimensions must be positive integers".into()));
                }
                dims = Some([t[0] as usize, t[1] as usize, t[2] as usize]);
            }
            Some("SPACING") | Some("ASPECT_RATIO") => spacing = triple(n, &toks[1..])?,
            Some("ORIGIN") => {
                triple(n, &toks[1..])?;
            }
            Some("CELL_DATA") => {
                let c = toks.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err(n, "bad CELL_DATA count".into()))?;
                cell_count = Some((n, c));
            }
            Some("POINT_DATA") => return Err(err(n, "grain ids must be CELL_DATA".into())),
            Some("SCALARS") => {
                let Some((_, count)) = cell_count else {
                    return Err(err(n, "SCALARS before CELL_DATA".into()));
                };
                if toks.get(3).is_some_and(|c| *c != "1") {
                    return Err(err(n, "grain-id array must have one component".into()));
                }
                if lines.get(i).is_some_and(|(_, l)| l.starts_with("LOOKUP_TABLE")) {
                    i += 1;
                }
                while values.len() < count && i < lines.len() {
                    let (vn, vl) = lines[i];
                    for tok in vl.split_whitespace() {
                        let v: f64 = tok.parse().map_err(|_| err(vn, format!("bad value {tok:?}")))?;
                        if v.fract() != 0.0 {
                            return Err(err(vn, format!("grain id {tok} is not an integer")));
                        }
                        values.push(v as i64);
                    }
                    i += 1;
                }
                if values.len() != count {
                    return Err(err(n, format!("CELL_DATA declares {count} values, found {}", values.len())));
                }
                break;
            }
            Some(_) => {}
        }
    }
    let dims = dims.ok_or_else(|| err(0, "missing DIMENSIONS".into()))?;
    let (cn, count) = cell_count.ok_or_else(|| err(0, "missing CELL_DATA".into()))?;
    if values.is_empty() {
        return Err(err(cn, "no SCALARS array after CELL_DATA".into()));
    }
    let as_points = dims.map(|d| (d - 1).max(1));
    let cells = if as_points.iter().product::<usize>() == count {
        as_points
    } else if dims.iter().product::<usize>() == count {
        dims
    } else {
        return Err(err(cn, format!("CELL_DATA {count} does not match DIMENSIONS {dims:?}")));
    };
    if cells[2] > 1 {
        return Err(err(0, format!("2D only: grid has depth {}", cells[2])));
    }
    Ok(StructuredPoints { cells, spacing, values })
}

/// `<grain id> <angle in degrees>` per line; `#` starts a comment.
pub fn parse_orientation_table(text: &str, path: &Path) -> Result<BTreeMap<i64, (usize, f64)>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
        let mut it = l.split_whitespace();
        let id = it.next().and_then(|s| s.parse::<i64>().ok());
        let a = it.next().and_then(|s| s.parse::<f64>().ok());
        let (Some(id), Some(a), None) = (id, a, it.next()) else {
            return Err(err("expected `<grain id> <angle>`".into()));
        };
        if !(-180.0..=180.0).contains(&a) {
            return Err(err(format!("angle {a} outside [-180, 180]")));
        }
        if out.insert(id, (i + 1, a)).is_some() {
            return Err(err(format!("duplicate grain {id}")));
        }
    }
    Ok(out)
}

/// Import a voxel file plus orientation sidecar; grain ids are renumbered densely in ascending order.
pub fn import_vtk(vtk_path: &Path, orientation_path: &Path) -> Result<Microstructure> {
    let sp = parse_structured_points(&std::fs::read_to_string(vtk_path)?, vtk_path)?;
    let table = parse_orientation_table(&std::fs::read_to_string(orientation_path)?, orientation_path)?;
    let mut first_seen: BTreeMap<i64, usize> = BTreeMap::new();
    for (offset, v) in sp.values.iter().enumerate() {
        first_seen.entry(*v).or_insert(offset);
    }
    let mut dense = BTreeMap::new();
    let mut orientation_deg = Vec::with_capacity(first_seen.len());
    for (k, (id, offset)) in first_seen.iter().enumerate() {
        let (_, a) = table.get(id).ok_or_else(|| Error::Parse {
            path: orientation_path.to_path_buf(),
            line: 0,
            msg: format!("no orientation for grain {id} (first used at cell offset {offset})"),
        })?;
        dense.insert(*id, k);
        orientation_deg.push(*a);
    }
    let m = Microstructure {
        height: sp.cells[1],
        width: sp.cells[0],
        grain_id: sp.values.iter().map(|v| dense[v]).collect(),
        orientation_deg,
        physical_size: sp.spacing[0] * sp.cells[0] as f64,
    };
    m.validate()?;
    Ok(m)
}
