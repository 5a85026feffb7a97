//! Error metrics, percentile case selection and error histograms.

use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::surrogate::{predict_sc, Dataset, ScDeepOnet, ScalerPerStep};

/// Points with |f_fe| below this fraction of the case's peak |f_fe| are left
/// out of relative-error means.
pub const EXCLUSION_FRACTION: f64 = 1e-3;
pub const HISTOGRAM_BINS: usize = 50;
pub const REPORT_PERCENTILES: [f64; 4] = [0.0, 50.0, 85.0, 100.0];

/// |f_fe − f_pred| / |f_fe| in percent.
pub fn relative_error(fe: f64, pred: f64) -> f64 {
    (fe - pred).abs() / fe.abs() * 100.0
}

fn same_len(fe: &[f64], pred: &[f64]) -> Result<()> {
    if fe.len() != pred.len() {
        return Err(Error::Dimension(format!("{} FE points vs {} predictions", fe.len(), pred.len())));
    }
    if fe.is_empty() {
        return Err(Error::Contract("empty series".into()));
    }
    Ok(())
}

/// Relative errors of one curve with the near-zero points removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseErrors {
    pub errors: Vec<f64>,
    pub excluded: usize,
}

impl CaseErrors {
    pub fn mean(&self) -> Result<f64> {
        if self.errors.is_empty() {
            return Err(Error::Undefined("every point of the case is near zero".into()));
        }
        Ok(self.errors.iter().sum::<f64>() / self.errors.len() as f64)
    }
}

pub fn case_errors(fe: &[f64], pred: &[f64]) -> Result<CaseErrors> {
    same_len(fe, pred)?;
    let peak = fe.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = EXCLUSION_FRACTION * peak;
    let mut errors = Vec::with_capacity(fe.len());
    let mut excluded = 0;
    for (&f, &p) in fe.iter().zip(pred) {
        if f.abs() < threshold || f == 0.0 {
            excluded += 1;
        } else {
            errors.push(relative_error(f, p));
        }
    }
    Ok(CaseErrors { errors, excluded })
}

pub fn mae(fe: &[f64], pred: &[f64]) -> Result<f64> {
    same_len(fe, pred)?;
    Ok(fe.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / fe.len() as f64)
}

/// 1 − SS_res / SS_tot with the mean over all points.
pub fn r2(fe: &[f64], pred: &[f64]) -> Result<f64> {
    same_len(fe, pred)?;
    let mean = fe.iter().sum::<f64>() / fe.len() as f64;
    let ss_tot: f64 = fe.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Undefined("r2 of a constant reference series".into()));
    }
    let ss_res: f64 = fe.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Nearest-rank percentile over ascending errors: rank ⌈p·N/100⌉, at least
/// 1. Ties keep the lower case index. Returns case indices.
pub fn percentile_cases(errors: &[f64], percentiles: &[f64]) -> Result<Vec<usize>> {
    if errors.is_empty() {
        return Err(Error::Contract("no cases to rank".into()));
    }
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(a.cmp(&b)));
    percentiles
        .iter()
        .map(|&p| {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::Argument(format!("percentile {p} outside [0, 100]")));
            }
            let rank = ((p / 100.0 * errors.len() as f64).ceil() as usize).max(1);
            Ok(order[rank - 1])
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Uniform bins over [min, max] of `values`; the last bin is closed.
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(Error::Contract("histogram needs values and bins".into()));
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let i = if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
            counts[i] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fe_seconds_per_case: f64,
    pub inference_seconds_per_case: f64,
    pub speedup: f64,
}

impl Timing {
    pub fn new(fe_seconds_per_case: f64, inference_seconds_per_case: f64) -> Self {
        Self { fe_seconds_per_case, inference_seconds_per_case, speedup: fe_seconds_per_case / inference_seconds_per_case }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean over cases of each case's mean relative error, in percent.
    pub mean_relative_error_pct: f64,
    pub mae_mpa: f64,
    pub r2: f64,
    /// Share of included step predictions within 5% relative error.
    pub fraction_within_5pct: f64,
    pub per_case_relative_error_pct: Vec<f64>,
    pub excluded_points: usize,
    pub peak_abs_stress_mpa: f64,
    pub timing: Option<Timing>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// (percentile, case index) for the reported percentiles.
    pub percentile_cases: Vec<(f64, usize)>,
    pub histogram: Histogram,
}

/// Metrics of predicted against FE curves, all in MPa.
pub fn evaluate_curves(fe: &[Vec<f64>], pred: &[Vec<f64>], timing: Option<Timing>) -> Result<Evaluation> {
    if fe.is_empty() {
        return Err(Error::Contract("empty test set".into()));
    }
    if fe.len() != pred.len() {
        return Err(Error::Dimension(format!("{} FE curves vs {} predictions", fe.len(), pred.len())));
    }
    let mut per_case = Vec::with_capacity(fe.len());
    let (mut excluded, mut within, mut included) = (0, 0, 0);
    for (f, p) in fe.iter().zip(pred) {
        let c = case_errors(f, p)?;
        per_case.push(c.mean()?);
        excluded += c.excluded;
        included += c.errors.len();
        within += c.errors.iter().filter(|&&e| e <= 5.0).count();
    }
    let flat_fe: Vec<f64> = fe.iter().flatten().copied().collect();
    let flat_pred: Vec<f64> = pred.iter().flatten().copied().collect();
    let abs_err: Vec<f64> = flat_fe.iter().zip(&flat_pred).map(|(a, b)| (a - b).abs()).collect();
    let picks = percentile_cases(&per_case, &REPORT_PERCENTILES)?;
    let report = MetricsReport {
        mean_relative_error_pct: per_case.iter().sum::<f64>() / per_case.len() as f64,
        mae_mpa: mae(&flat_fe, &flat_pred)?,
        r2: r2(&flat_fe, &flat_pred)?,
        fraction_within_5pct: within as f64 / included as f64,
        per_case_relative_error_pct: per_case,
        excluded_points: excluded,
        peak_abs_stress_mpa: flat_fe.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        timing,
    };
    Ok(Evaluation {
        report,
        percentile_cases: REPORT_PERCENTILES.iter().copied().zip(picks).collect(),
        histogram: Histogram::new(&abs_err, HISTOGRAM_BINS)?,
    })
}

/// Predicts the test set with an SC model and evaluates it. The FE cost per
/// case is supplied by the caller from the dataset generation run.
pub fn evaluate_sc(
    model: &ScDeepOnet,
    test: &Dataset,
    basis: &BasisSet,
    fe_seconds_per_case: Option<f64>,
) -> Result<(Evaluation, Vec<Vec<f64>>)> {
    if test.is_empty() {
        return Err(Error::Contract("empty test set".into()));
    }
    let scaler = ScalerPerStep::from_basis(basis)?;
    let p = predict_sc(model, &test.grids, test.height, test.width, basis, &scaler)?;
    let timing = fe_seconds_per_case.map(|fe| Timing::new(fe, p.seconds_per_case));
    Ok((evaluate_curves(&test.targets, &p.stresses, timing)?, p.stresses))
}

/// FE and predicted curves of the percentile cases, long format.
pub fn curve_bundle_csv(eval: &Evaluation, times: &[f64], fe: &[Vec<f64>], pred: &[Vec<f64>]) -> String {
    let mut s = String::from("percentile,case,time_s,fe_mpa,pred_mpa\n");
    for &(p, c) in &eval.percentile_cases {
        for (k, t) in times.iter().enumerate() {
            s.push_str(&format!("{p},{c},{t},{},{}\n", fe[c][k], pred[c][k]));
        }
    }
    s
}
