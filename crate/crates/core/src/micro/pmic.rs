use std::fmt::Write as _;
use std::path::Path;

use super::Microstructure;
use crate::error::{Error, Result};

const MAGIC: &str = "PMIC 1";

/// Text form: header, one `id angle` line per grain, then `grid` and H rows from y = 0 upward.
pub fn to_pmic(m: &Microstructure) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "height {}", m.height);
    let _ = writeln!(s, "width {}", m.width);
    let _ = writeln!(s, "physical_size_mm {}", m.physical_size);
    let _ = writeln!(s, "grains {}", m.n_grains());
    for (g, a) in m.orientation_deg.iter().enumerate() {
        let _ = writeln!(s, "{g} {a}");
    }
    s.push_str("grid\n");
    for row in m.grain_id.chunks(m.width) {
        let line: Vec<String> = row.iter().map(|g| g.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_pmic(text: &str, path: &Path) -> Result<Microstructure> {
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")));

    let (n, l) = next("magic")?;
    if l != MAGIC {
        return Err(err(n, format!("expected {MAGIC:?}")));
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (n, l) = next(key)?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.trim().to_string())),
            _ => Err(err(n, format!("expected `{key} <value>`"))),
        }
    };
    let int = |(n, v): (usize, String)| v.parse::<usize>().map_err(|e| err(n, e.to_string()));
    let height = int(field("height")?)?;
    let width = int(field("width")?)?;
    let (n, v) = field("physical_size_mm")?;
    let physical_size = v.parse::<f64>().map_err(|e| err(n, e.to_string()))?;
    let grains = int(field("grains")?)?;

    let mut orientation_deg = Vec::with_capacity(grains);
    for g in 0..grains {
        let (n, l) = next("orientation entry")?;
        let mut it = l.split_whitespace();
        let id = it.next().and_then(|s| s.parse::<usize>().ok());
        let angle = it.next().and_then(|s| s.parse::<f64>().ok());
        match (id, angle, it.next()) {
            (Some(id), Some(a), None) if id == g => orientation_deg.push(a),
            (Some(id), Some(_), None) => return Err(err(n, format!("expected grain {g}, found {id}"))),
            _ => return Err(err(n, "expected `<id> <angle>`".into())),
        }
    }
    let (n, l) = next("grid")?;
    if l != "grid" {
        return Err(err(n, "expected `grid`".into()));
    }
    let mut grain_id = Vec::with_capacity(height * width);
    for _ in 0..height {
        let (n, l) = next("grid row")?;
        let row: std::result::Result<Vec<usize>, _> = l.split_whitespace().map(str::parse).collect();
        let row = row.map_err(|e| err(n, e.to_string()))?;
        if row.len() != width {
            return Err(err(n, format!("row has {} ids, expected {width}", row.len())));
        }
        grain_id.extend(row);
    }
    if let Ok((n, _)) = next("") {
        return Err(err(n, "trailing data after grid".into()));
    }
    let m = Microstructure { height, width, grain_id, orientation_deg, physical_size };
    m.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(m)
}

pub fn save_grid(m: &Microstructure, path: &Path) -> Result<()> {
    std::fs::write(path, to_pmic(m))?;
    Ok(())
}

pub fn load_grid(path: &Path) -> Result<Microstructure> {
    parse_pmic(&std::fs::read_to_string(path)?, path)
}
