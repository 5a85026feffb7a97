use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "time_s,strain,stress_mpa";

/// Mean-field response sampled on uniform output times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub times: Vec<f64>,
    pub strains: Vec<f64>,
    pub stresses: Vec<f64>,
}

impl ResponseCurve {
    pub fn new(times: Vec<f64>, strains: Vec<f64>, stresses: Vec<f64>) -> Result<Self> {
        if times.len() != strains.len() || times.len() != stresses.len() {
            return Err(Error::Dimension(format!(
                "curve arrays differ: {} times, {} strains, {} stresses",
                times.len(),
                strains.len(),
                stresses.len()
            )));
        }
        Ok(ResponseCurve { times, strains, stresses })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for i in 0..self.len() {
            s.push_str(&format!("{},{},{}\n", self.times[i], self.strains[i], self.stresses[i]));
        }
        s
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let perr = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        let mut cols = [Vec::new(), Vec::new(), Vec::new()];
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != CSV_HEADER {
                    return Err(perr(1, format!("expected header {CSV_HEADER:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(perr(i + 1, format!("expected 3 fields, found {}", fields.len())));
            }
            for (c, f) in cols.iter_mut().zip(&fields) {
                c.push(f.trim().parse::<f64>().map_err(|e| perr(i + 1, e.to_string()))?);
            }
        }
        let [t, e, s] = cols;
        ResponseCurve::new(t, e, s)
    }
}

/// Piecewise-linear interpolation of (xs, ys) at x; xs increasing, clamped at the ends.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    if x1 == x0 {
        return ys[k];
    }
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interp_is_linear_and_clamped() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [0.0, 10.0, 30.0];
        assert_eq!(interp(&xs, &ys, 0.5), 5.0);
        assert_eq!(interp(&xs, &ys, 2.0), 20.0);
        assert_eq!(interp(&xs, &ys, 3.0), 30.0);
        assert_eq!(interp(&xs, &ys, 9.0), 30.0);
        assert_eq!(interp(&xs, &ys, -1.0), 0.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(ResponseCurve::new(vec![1.0], vec![], vec![1.0]).is_err());
    }
}
