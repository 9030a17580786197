use anyhow::{ensure, Result};
use kmedyn::{rkhs_dist_sq, Expansion, KernelSpec, PointSet};

/// Above this many pooled points the median heuristic uses an evenly strided
/// subset of this size.
const MEDIAN_MAX_POINTS: usize = 2000;

/// Median pairwise Euclidean distance of the pooled sample.
pub fn median_bandwidth(a: &PointSet, b: &PointSet) -> Result<f64> {
    ensure!(a.dim() == b.dim(), "column mismatch: {} vs {}", a.dim(), b.dim());
    let pooled: Vec<&[f64]> = a.rows().chain(b.rows()).collect();
    let stride = pooled.len().div_ceil(MEDIAN_MAX_POINTS).max(1);
    let pts: Vec<&[f64]> = pooled.into_iter().step_by(stride).collect();
    ensure!(pts.len() >= 2, "median heuristic needs at least two points");
    let mut d = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d.push(pts[i].iter().zip(pts[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    ensure!(m > 0.0, "median pairwise distance is zero; give --bandwidth explicitly");
    Ok(m)
}

/// RKHS distance (not squared) between the uniform embeddings of two samples.
pub fn mmd_distance(a: &PointSet, b: &PointSet, kernel: KernelSpec) -> Result<f64> {
    ensure!(a.dim() == b.dim(), "column mismatch: {} vs {}", a.dim(), b.dim());
    let ea = Expansion::uniform(kernel, a.clone())?;
    let eb = Expansion::uniform(kernel, b.clone())?;
    Ok(rkhs_dist_sq(&ea, &eb)?.sqrt())
}
