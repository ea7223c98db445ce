//! Aggregates over experiment records.

use serde::{Deserialize, Serialize};

use super::{ExperimentRecord, MatrixFamily, Sweep};

/// Per-cell aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub matrix: MatrixFamily,
    pub sweep: Option<Sweep>,
    pub k: usize,
    pub n: usize,
    pub l: usize,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_rel_error: f64,
    pub mean_sq_rel_error: f64,
    pub converged: usize,
}

type CellKey = (MatrixFamily, Option<Sweep>, usize, usize, usize, Option<u64>);

fn key(r: &ExperimentRecord) -> CellKey {
    (r.matrix, r.sweep, r.k, r.n, r.l, r.snr_db.map(f64::to_bits))
}

/// Groups records by cell, keeping first-appearance order.
pub fn summarize_cells(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<CellKey> = Vec::new();
    let mut groups: Vec<Vec<&ExperimentRecord>> = Vec::new();
    for r in records {
        let k = key(r);
        match keys.iter().position(|x| *x == k) {
            Some(i) => groups[i].push(r),
            None => {
                keys.push(k);
                groups.push(vec![r]);
            }
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let first = g[0];
            let trials = g.len();
            let successes = g.iter().filter(|r| r.success).count();
            let t = trials as f64;
            CellSummary {
                matrix: first.matrix,
                sweep: first.sweep,
                k: first.k,
                n: first.n,
                l: first.l,
                snr_db: first.snr_db,
                trials,
                successes,
                success_rate: successes as f64 / t,
                mean_rel_error: g.iter().map(|r| r.rel_error).sum::<f64>() / t,
                mean_sq_rel_error: g.iter().map(|r| r.rel_error * r.rel_error).sum::<f64>() / t,
                converged: g.iter().filter(|r| r.converged).count(),
            }
        })
        .collect()
}

fn matrices(records: &[ExperimentRecord]) -> Vec<MatrixFamily> {
    let mut out = Vec::new();
    for r in records {
        if !out.contains(&r.matrix) {
            out.push(r.matrix);
        }
    }
    out
}

/// Least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// `None` with fewer than two points or no spread in `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let m = xs.len();
    if m < 2 || ys.len() != m {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        points: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransitionSummary {
    pub matrix: MatrixFamily,
    pub cells: Vec<CellSummary>,
}

impl PhaseTransitionSummary {
    /// Mean success rate over the cells whose `kn` satisfies `keep`.
    pub fn region_rate(&self, keep: impl Fn(usize) -> bool) -> Option<f64> {
        let rates: Vec<f64> = self.cells.iter().filter(|c| keep(c.k * c.n)).map(|c| c.success_rate).collect();
        (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
    }
}

pub fn phase_transition_summary(records: &[ExperimentRecord]) -> Vec<PhaseTransitionSummary> {
    let cells = summarize_cells(records);
    matrices(records)
        .into_iter()
        .map(|m| PhaseTransitionSummary {
            matrix: m,
            cells: cells.iter().filter(|c| c.matrix == m).cloned().collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalLPoint {
    pub k: usize,
    pub n: usize,
    pub kn: usize,
    /// Smallest tested `L` whose success rate reached the target.
    pub l_min: Option<usize>,
    /// Running maximum of `l_min` in `kn` order.
    pub l_min_monotone: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalLSummary {
    pub matrix: MatrixFamily,
    pub sweep: Sweep,
    /// Sorted by `kn`.
    pub points: Vec<MinimalLPoint>,
    /// Fit of the monotone curve against `kn`.
    pub fit: Option<LinearFit>,
}

pub fn minimal_l_summary(records: &[ExperimentRecord], min_success_rate: f64) -> Vec<MinimalLSummary> {
    let cells = summarize_cells(records);
    let mut out = Vec::new();
    for m in matrices(records) {
        for sweep in [Sweep::FixedK, Sweep::FixedN] {
            let mine: Vec<&CellSummary> = cells.iter().filter(|c| c.matrix == m && c.sweep == Some(sweep)).collect();
            if mine.is_empty() {
                continue;
            }
            let mut kn_cells: Vec<(usize, usize)> = Vec::new();
            for c in &mine {
                if !kn_cells.contains(&(c.k, c.n)) {
                    kn_cells.push((c.k, c.n));
                }
            }
            kn_cells.sort_by_key(|&(k, n)| (k * n, k, n));
            let mut running: Option<usize> = None;
            let points: Vec<MinimalLPoint> = kn_cells
                .into_iter()
                .map(|(k, n)| {
                    let l_min = mine
                        .iter()
                        .filter(|c| c.k == k && c.n == n && c.success_rate >= min_success_rate - 1e-12)
                        .map(|c| c.l)
                        .min();
                    let l_min_monotone = l_min.map(|l| {
                        let v = running.map_or(l, |r| r.max(l));
                        running = Some(v);
                        v
                    });
                    MinimalLPoint {
                        k,
                        n,
                        kn: k * n,
                        l_min,
                        l_min_monotone,
                    }
                })
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter_map(|p| p.l_min_monotone.map(|l| (p.kn as f64, l as f64)))
                .unzip();
            out.push(MinimalLSummary {
                matrix: m,
                sweep,
                fit: linear_fit(&xs, &ys),
                points,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdmaPoint {
    pub snr_db: f64,
    pub trials: usize,
    /// Mean relative error.
    pub avg_rel_error: f64,
    /// Mean squared relative error.
    pub mse: f64,
    /// `10·log10(mse)`.
    pub mse_db: f64,
    /// Largest `‖X̂ − X₀‖_F / ((1 + √(kn))·η)` over the trials.
    pub max_bound_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdmaSummary {
    pub matrix: MatrixFamily,
    pub points: Vec<CdmaPoint>,
    /// Fit of `mse_db` against SNR over the fit window.
    pub mse_fit: Option<LinearFit>,
    /// Fit of `10·log10(avg_rel_error)` against SNR over the fit window.
    pub rel_error_fit: Option<LinearFit>,
}

/// Error-versus-SNR curves; the fits use points with SNR in `[lo, hi]`.
pub fn cdma_summary(records: &[ExperimentRecord], lo: f64, hi: f64) -> Vec<CdmaSummary> {
    let cells = summarize_cells(records);
    matrices(records)
        .into_iter()
        .map(|m| {
            let mut points: Vec<CdmaPoint> = cells
                .iter()
                .filter(|c| c.matrix == m)
                .filter_map(|c| {
                    let snr = c.snr_db?;
                    let ratio = records
                        .iter()
                        .filter(|r| r.matrix == m && r.snr_db == Some(snr) && r.k == c.k && r.n == c.n)
                        .map(|r| r.abs_error / ((1.0 + ((r.k * r.n) as f64).sqrt()) * r.eta))
                        .fold(0.0, f64::max);
                    Some(CdmaPoint {
                        snr_db: snr,
                        trials: c.trials,
                        avg_rel_error: c.mean_rel_error,
                        mse: c.mean_sq_rel_error,
                        mse_db: 10.0 * c.mean_sq_rel_error.log10(),
                        max_bound_ratio: ratio,
                    })
                })
                .collect();
            points.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
            let window: Vec<&CdmaPoint> = points.iter().filter(|p| p.snr_db >= lo && p.snr_db <= hi).collect();
            let xs: Vec<f64> = window.iter().map(|p| p.snr_db).collect();
            let mse: Vec<f64> = window.iter().map(|p| p.mse_db).collect();
            let rel: Vec<f64> = window.iter().map(|p| 10.0 * p.avg_rel_error.log10()).collect();
            CdmaSummary {
                matrix: m,
                mse_fit: linear_fit(&xs, &mse),
                rel_error_fit: linear_fit(&xs, &rel),
                points,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaSummary {
    pub snr_db: Option<f64>,
    pub trials: usize,
    /// Trials with every bearing within the tolerance.
    pub hits: usize,
    pub max_angle_error: f64,
}

pub fn doa_summary(records: &[ExperimentRecord], tolerance: f64) -> Vec<DoaSummary> {
    let mut snrs: Vec<Option<f64>> = Vec::new();
    for r in records {
        if !snrs.iter().any(|s| s.map(f64::to_bits) == r.snr_db.map(f64::to_bits)) {
            snrs.push(r.snr_db);
        }
    }
    snrs.into_iter()
        .map(|snr| {
            let errs: Vec<f64> = records
                .iter()
                .filter(|r| r.snr_db.map(f64::to_bits) == snr.map(f64::to_bits))
                .map(|r| r.angle_error.unwrap_or(f64::INFINITY))
                .collect();
            DoaSummary {
                snr_db: snr,
                trials: errs.len(),
                hits: errs.iter().filter(|&&e| e <= tolerance).count(),
                max_angle_error: errs.iter().copied().fold(0.0, f64::max),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;

    fn rec(k: usize, n: usize, l: usize, trial: usize, rel: f64) -> ExperimentRecord {
        ExperimentRecord {
            kind: ExperimentKind::MinimalL,
            matrix: MatrixFamily::Gaussian,
            sweep: Some(Sweep::FixedK),
            k,
            n,
            l,
            snr_db: None,
            trial,
            seed: 0,
            rel_error: rel,
            abs_error: rel,
            eta: 0.0,
            success: rel <= 0.01,
            converged: true,
            iterations: 1,
            angle_error: None,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn fit_of_exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn fit_matches_hand_computation() {
        // Residuals 0.1, 0.2, −0.7, 0.4; SSres = 0.7, SStot = 4.75.
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 2.0, 2.0, 4.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 0.9).abs() < 1e-12);
        assert!((f.intercept - 0.9).abs() < 1e-12);
        assert!((f.r2 - (1.0 - 0.7 / 4.75)).abs() < 1e-12);
    }

    #[test]
    fn minimal_l_picks_first_passing_and_cleans_up() {
        let mut r = Vec::new();
        // kn=5: passes from L=40; kn=10: passes from L=30 (non-monotone raw).
        for (n, pass_from) in [(1, 40), (2, 30)] {
            for l in [20, 30, 40] {
                for t in 0..2 {
                    r.push(rec(5, n, l, t, if l >= pass_from { 0.0 } else { 1.0 }));
                }
            }
        }
        let s = minimal_l_summary(&r, 0.9);
        assert_eq!(s.len(), 1);
        let p = &s[0].points;
        assert_eq!((p[0].kn, p[0].l_min, p[0].l_min_monotone), (5, Some(40), Some(40)));
        assert_eq!((p[1].kn, p[1].l_min, p[1].l_min_monotone), (10, Some(30), Some(40)));
        assert_eq!(s[0].fit.unwrap().slope, 0.0);
    }

    #[test]
    fn minimal_l_none_when_never_passing() {
        let r = vec![rec(5, 1, 20, 0, 1.0), rec(5, 1, 40, 0, 0.5)];
        let s = minimal_l_summary(&r, 0.9);
        assert_eq!(s[0].points[0].l_min, None);
        assert!(s[0].fit.is_none());
    }

    #[test]
    fn cells_keep_order_and_rates() {
        let r = vec![rec(2, 1, 20, 0, 0.0), rec(1, 1, 20, 0, 1.0), rec(2, 1, 20, 1, 1.0)];
        let c = summarize_cells(&r);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].k, c[0].trials, c[0].successes), (2, 2, 1));
        assert_eq!(c[0].success_rate, 0.5);
        assert_eq!(c[0].mean_sq_rel_error, 0.5);
    }

    #[test]
    fn cdma_slope_of_synthetic_curve() {
        // rel = 10^{−snr/20} gives mse_db = −snr and a slope of −1.
        let mut r = Vec::new();
        for snr in [0.0, 20.0, 40.0, 60.0, 80.0] {
            let mut x = rec(5, 5, 128, 0, 10f64.powf(-snr / 20.0));
            x.snr_db = Some(snr);
            x.eta = 1.0;
            r.push(x);
        }
        let s = cdma_summary(&r, 20.0, 60.0);
        let f = s[0].mse_fit.unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && f.points == 3);
        assert!((s[0].rel_error_fit.unwrap().slope + 0.5).abs() < 1e-12);
        assert!((s[0].points[0].max_bound_ratio - 1.0 / 6.0).abs() < 1e-12);
    }
}
