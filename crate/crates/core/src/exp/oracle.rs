//! Self-checks of the diversity measure, each reported as a JSON verdict.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::diversity::{
    clustering_demo, first_order_det_approx, half_squared_distance_sum, DiversityReport,
};
use crate::envs::enumerate_tabular;
use crate::error::Result;
use crate::kernels::{gram, KernelSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleVerdict {
    pub oracle: String,
    pub passed: bool,
    pub values: Value,
}

/// Fixed, well-spread unit directions in the plane.
fn triangle(scale: f64, m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64 + 0.3;
            vec![
                scale * a.cos(),
                scale * a.sin(),
                0.5 * scale * (i as f64 - 1.0),
            ]
        })
        .collect()
}

fn sum_sq_dist(e: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            s += e[i]
                .iter()
                .zip(&e[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        }
    }
    s
}

/// Error of the first-order determinant approximation for three embeddings
/// at scale `eps` under the SE kernel with unit length scale.
pub fn first_order_error(eps: f64) -> Result<(f64, f64)> {
    let e = triangle(eps, 3);
    let det = gram(&KernelSpec::default(), &e)?.det();
    Ok((det, (det - first_order_det_approx(&e, 1.0)?).abs()))
}

/// Sweeps `eps` over `1e-1, 1e-2, 1e-3`: fits the log-log slope of the
/// M = 3 approximation error and compares M = 4 against M = 3.
pub fn first_order_sweep() -> Result<OracleVerdict> {
    let eps = [1e-1, 1e-2, 1e-3];
    let mut errs = Vec::new();
    let mut dets = Vec::new();
    for &e in &eps {
        let (d, err) = first_order_error(e)?;
        dets.push(d);
        errs.push(err);
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let ratio_at_1e2 = errs[1] / (eps[1] * eps[1]);

    let kernel = KernelSpec::default();
    let e3 = triangle(1e-3, 3);
    let e4 = triangle(1e-3, 4);
    let r3 = gram(&kernel, &e3)?.det() / sum_sq_dist(&e3);
    let r4 = gram(&kernel, &e4)?.det() / sum_sq_dist(&e4);
    let naive = half_squared_distance_sum(&triangle(1e-2, 3), 1.0);

    let passed = ratio_at_1e2 <= 1e-3 && (slope - 4.0).abs() <= 0.3 && r4 <= 1e-4 * r3;
    Ok(OracleVerdict {
        oracle: "first_order".into(),
        passed,
        values: json!({
            "eps": eps,
            "det_m3": dets,
            "abs_error_m3": errs,
            "error_over_eps2_at_1e-2": ratio_at_1e2,
            "loglog_slope": slope,
            "m3_det_over_sum_sq_dist": r3,
            "m4_det_over_sum_sq_dist": r4,
            "half_squared_distance_sum_at_1e-2": naive,
        }),
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn tabular(kernel: &KernelSpec) -> Result<OracleVerdict> {
    let report = enumerate_tabular(kernel)?;
    Ok(OracleVerdict {
        oracle: "tabular".into(),
        passed: report.passed(),
        values: serde_json::to_value(&report).expect("report serializes"),
    })
}

/// Two tight clusters of three agents far apart against six agents evenly
/// spaced on a line: the clustered population has the larger mean pairwise
/// distance but the smaller determinant.
pub fn clustering() -> Result<OracleVerdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let clustered = clustering_demo(2, 3, 10.0, 0.05, &mut rng)?;
    let line: Vec<Vec<f64>> = (0..6)
        .map(|i| vec![2.0 * i as f64, 0.0, 0.0, 0.0])
        .collect();
    let spread = DiversityReport::compute(&line, &KernelSpec::default())?;
    let passed = clustered.mean_pairwise_distance > spread.mean_pairwise_distance
        && clustered.determinant < spread.determinant;
    Ok(OracleVerdict {
        oracle: "clustering".into(),
        passed,
        values: json!({
            "clustered": {"det": clustered.determinant, "mean_pairwise_distance": clustered.mean_pairwise_distance},
            "spread": {"det": spread.determinant, "mean_pairwise_distance": spread.mean_pairwise_distance},
        }),
    })
}

/// All three verdicts; `kernel` applies to the tabular enumeration.
pub fn run_all(kernel: &KernelSpec) -> Result<Vec<OracleVerdict>> {
    Ok(vec![tabular(kernel)?, first_order_sweep()?, clustering()?])
}
