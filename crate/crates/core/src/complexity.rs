//! Operation-count sweeps of `cir` on adversarial families.

use crate::cir::cir;
use crate::fixtures;
use crate::network::Network;
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Directed path: `n − 1` refinements, sparse rows.
    Path,
    /// Path over the complete graph: `n − 1` refinements, dense rows.
    DensePath,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Path => "path",
            Family::DensePath => "dense_path",
        }
    }

    pub fn build(self, n: usize) -> Network {
        match self {
            Family::Path => fixtures::path(n),
            Family::DensePath => fixtures::dense_path(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub family: Family,
    pub cells: usize,
    pub edges: usize,
    pub refinements: usize,
    pub total_ops: u64,
    /// Largest per-iteration `ops / (|E| + |C| · rank)`.
    pub max_iteration_ratio: f64,
}

impl SweepPoint {
    pub fn measure(family: Family, n: usize) -> Self {
        let net = family.build(n);
        let trace = cir(&net, &Partition::uniform(n)).expect("single-type network");
        let edges = net.edge_count();
        let max_iteration_ratio = trace
            .stats
            .iter()
            .map(|s| s.ops.total() as f64 / (edges + n * s.rank_before) as f64)
            .fold(0.0, f64::max);
        SweepPoint {
            family,
            cells: n,
            edges,
            refinements: trace.refinements(),
            total_ops: trace.total_ops().total(),
            max_iteration_ratio,
        }
    }

    /// `ops / n³`.
    pub fn cubic_constant(&self) -> f64 {
        self.total_ops as f64 / (self.cells as f64).powi(3)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub family: Family,
    pub points: Vec<SweepPoint>,
    pub slope: f64,
}

impl FamilyReport {
    pub fn max_iteration_ratio(&self) -> f64 {
        self.points.iter().map(|p| p.max_iteration_ratio).fold(0.0, f64::max)
    }
}

/// Per-iteration work is at most `2 (|E| + |C|)`: one fold per edge, one key
/// entry per old color and per nonzero sum, one probe per cell.
pub const ITERATION_RATIO_BOUND: f64 = 2.0;

/// Super-cubic growth threshold on the fitted slope.
pub const SLOPE_LIMIT: f64 = 3.2;

pub fn sweep(family: Family, sizes: &[usize]) -> FamilyReport {
    let points: Vec<SweepPoint> = sizes.iter().map(|&n| SweepPoint::measure(family, n)).collect();
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.cells as f64, p.total_ops as f64)).collect();
    FamilyReport { family, slope: log_log_slope(&xy), points }
}

pub fn render(reports: &[FamilyReport]) -> String {
    let mut out = String::from("family       cells     edges  refinements      total_ops   ops/n^3  iter_ratio\n");
    for r in reports {
        for p in &r.points {
            out.push_str(&format!(
                "{:<10} {:>7} {:>9} {:>12} {:>14} {:>9.4} {:>11.3}\n",
                r.family.name(),
                p.cells,
                p.edges,
                p.refinements,
                p.total_ops,
                p.cubic_constant(),
                p.max_iteration_ratio
            ));
        }
        out.push_str(&format!("{:<10} log-log slope {:.3} (limit {SLOPE_LIMIT})\n", r.family.name(), r.slope));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&x: &f64| (x, 5.0 * x.powi(3))).collect();
        assert!((log_log_slope(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn families_refine_one_cell_at_a_time() {
        for family in [Family::Path, Family::DensePath] {
            let p = SweepPoint::measure(family, 16);
            assert_eq!(p.refinements, 15);
            assert!(p.max_iteration_ratio <= ITERATION_RATIO_BOUND);
        }
    }

    #[test]
    fn dense_path_grows_cubically() {
        let report = sweep(Family::DensePath, &[16, 32, 64]);
        assert!(report.slope > 2.7 && report.slope <= SLOPE_LIMIT, "{}", report.slope);
    }
}
