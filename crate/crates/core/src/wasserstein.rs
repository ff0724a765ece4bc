//! First-order Wasserstein distance between histograms on the line.

use crate::error::{Error, Result};

/// `W_1` between two histograms on the grid `{1, ..., K}`: the L1 distance
/// between their cumulative distribution functions.
pub fn wasserstein_1d(f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::Shape(format!("histograms of length {} and {}", f.len(), g.len())));
    }
    let mut cf = 0.0;
    let mut cg = 0.0;
    let mut total = 0.0;
    for j in 0..f.len().saturating_sub(1) {
        cf += f[j];
        cg += g[j];
        total += (cf - cg).abs();
    }
    Ok(total)
}

/// `W_1` for histograms placed at arbitrary real `positions`.
pub fn wasserstein_on_line(f: &[f64], g: &[f64], positions: &[f64]) -> Result<f64> {
    if f.len() != g.len() || f.len() != positions.len() {
        return Err(Error::Shape(format!(
            "histograms of length {} and {} with {} positions",
            f.len(),
            g.len(),
            positions.len()
        )));
    }
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let mut cf = 0.0;
    let mut cg = 0.0;
    let mut total = 0.0;
    for w in order.windows(2) {
        cf += f[w[0]];
        cg += g[w[0]];
        total += (cf - cg).abs() * (positions[w[1]] - positions[w[0]]);
    }
    Ok(total)
}
