//! Error metrics, percentile case selection and the error histogram on
//! hand-made curves.

use xtalnet::eval::{evaluate_curves, percentile_cases, Timing};

fn main() -> xtalnet::Result<()> {
    let fe: Vec<Vec<f64>> = (1..=8).map(|c| (1..=10).map(|t| (c * t) as f64).collect()).collect();
    let pred: Vec<Vec<f64>> = fe
        .iter()
        .enumerate()
        .map(|(c, row)| row.iter().map(|v| v * (1.0 + 0.01 * c as f64)).collect())
        .collect();
    let ev = evaluate_curves(&fe, &pred, Some(Timing::new(2.0, 1e-4)))?;
    let r = &ev.report;
    println!("mean relative error {:.3}%, MAE {:.3}, R2 {:.5}", r.mean_relative_error_pct, r.mae_mpa, r.r2);
    println!("within 5%: {:.1}%, speedup {:.0}x", r.fraction_within_5pct * 100.0, r.timing.as_ref().unwrap().speedup);
    for (p, c) in &ev.percentile_cases {
        println!("percentile {p:>5}: case {c} ({:.2}%)", r.per_case_relative_error_pct[*c]);
    }
    println!("90th percentile case: {:?}", percentile_cases(&r.per_case_relative_error_pct, &[90.0])?);
    print!("{}", ev.histogram.to_csv().lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
