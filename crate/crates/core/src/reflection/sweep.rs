use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::skorokhod::skorokhod_residual;
use crate::error::{Error, Result};
use crate::levy::ScenarioTree;
use crate::regulated::Barrier;
use crate::solver::{solve_penalized, DriverPair, SolutionTriple};
use crate::verify::beta_norms;

/// One penalty level of a sweep.
///
/// `cauchy_diff` and `monotone_excess` compare with the next level of the
/// schedule (`2n` for a doubling schedule) and are empty on the last row.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub cauchy_diff: Option<f64>,
    /// `max (Y^n - Y^{n'})` over nodes; nonpositive when the sweep is monotone.
    pub monotone_excess: Option<f64>,
    pub violation: f64,
    pub skorokhod: f64,
    pub norm_y: f64,
    pub norm_z: f64,
    pub norm_k: f64,
    pub solution_norm: f64,
    pub data_norm: f64,
    pub oracle_err: Option<f64>,
    pub y0: f64,
    pub mean_k_terminal: f64,
    pub active_jump_nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub beta: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Smallest level whose solution applies a right-jump correction.
    pub jump_activation_level: Option<u64>,
    #[serde(skip)]
    pub limit: SolutionTriple,
}

impl ConvergenceReport {
    /// `Y^n ≤ Y^{n'} + tol` between consecutive levels.
    pub fn monotone(&self, tol: f64) -> bool {
        self.rows.iter().filter_map(|r| r.monotone_excess).all(|e| e <= tol)
    }

    pub fn violation_nonincreasing(&self, tol: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].violation <= w[0].violation + tol)
    }

    pub fn skorokhod_nonincreasing(&self, tol: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].skorokhod <= w[0].skorokhod + tol)
    }

    /// Least-squares slope of `log(solution norm / data norm)` against `log n`.
    pub fn norm_growth_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.solution_norm > 0.0 && r.data_norm > 0.0)
            .map(|r| ((r.n as f64).ln(), (r.solution_norm / r.data_norm).ln()))
            .collect();
        least_squares_slope(&pts)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n",
            "cauchy_diff",
            "violation",
            "skorokhod",
            "norm_Y",
            "norm_Z",
            "norm_K",
            "oracle_err",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                opt(r.cauchy_diff),
                format!("{:e}", r.violation),
                format!("{:e}", r.skorokhod),
                format!("{:e}", r.norm_y),
                format!("{:e}", r.norm_z),
                format!("{:e}", r.norm_k),
                opt(r.oracle_err),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solve the penalized equation for every level of `schedule` (concurrently)
/// and tabulate how the solutions settle.
pub fn penalization_sweep(
    tree: &ScenarioTree,
    drivers: &DriverPair,
    barrier: &Barrier,
    schedule: &[u64],
    oracle: Option<&SolutionTriple>,
    beta: f64,
) -> Result<ConvergenceReport> {
    if schedule.is_empty() {
        return Err(Error::invalid("empty penalty schedule"));
    }
    if schedule[0] == 0 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("penalty schedule must be positive and strictly increasing"));
    }
    if let Some(o) = oracle {
        if o.scenarios.len() != tree.scenarios() {
            return Err(Error::invalid("oracle does not match the tree"));
        }
    }

    let solved: Vec<(SolutionTriple, ConvergenceRow)> = schedule
        .par_iter()
        .map(|&n| {
            let sol = solve_penalized(tree, drivers, barrier, n)?;
            let norms = beta_norms(&sol, barrier, drivers, tree, beta)?;
            let row = ConvergenceRow {
                n,
                cauchy_diff: None,
                monotone_excess: None,
                violation: sol.barrier_violation(barrier),
                skorokhod: skorokhod_residual(&sol, barrier, tree),
                norm_y: norms.norm_y(),
                norm_z: norms.norm_z(),
                norm_k: norms.norm_k(),
                solution_norm: norms.solution_norm(),
                data_norm: norms.data_norm(),
                oracle_err: oracle.map(|o| sol.max_abs_diff(o)),
                y0: sol.y0_mean(),
                mean_k_terminal: *sol.expected_k(tree).last().unwrap(),
                active_jump_nodes: sol.active_jump_nodes,
            };
            Ok((sol, row))
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<ConvergenceRow> = solved.iter().map(|(_, r)| r.clone()).collect();
    for i in 0..rows.len().saturating_sub(1) {
        let (a, b) = (&solved[i].0, &solved[i + 1].0);
        rows[i].cauchy_diff = Some(a.max_abs_diff(b));
        rows[i].monotone_excess = Some(a.max_excess_over(b));
    }
    let jump_activation_level = rows.iter().find(|r| r.active_jump_nodes > 0).map(|r| r.n);
    for r in &rows {
        log::debug!(
            "n={} violation={:e} skorokhod={:e} oracle_err={:?}",
            r.n,
            r.violation,
            r.skorokhod,
            r.oracle_err
        );
    }
    let limit = solved.into_iter().last().unwrap().0;
    Ok(ConvergenceReport {
        beta,
        rows,
        jump_activation_level,
        limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{build_tree, teugels_basis, LevyMeasure, TreeOptions, DEFAULT_RANK_TOL};
    use crate::reflection::snell_oracle;
    use crate::regulated::{make_barrier, BarrierFamily, BarrierSpec};

    fn unit_tree(n: usize, p: usize) -> ScenarioTree {
        let nu = LevyMeasure::from_pairs(&[(1.0, 1.0)]).unwrap();
        let b = teugels_basis(&nu, DEFAULT_RANK_TOL).unwrap();
        build_tree(&nu, &b, TreeOptions::new(1.0, n, p, 8)).unwrap()
    }

    #[test]
    fn schedule_must_increase() {
        let t = unit_tree(4, 1);
        let bar = make_barrier(&BarrierSpec::new(BarrierFamily::Constant { c: 0.0 }), &t).unwrap();
        let z = DriverPair::zero();
        assert!(penalization_sweep(&t, &z, &bar, &[], None, 1.0).is_err());
        assert!(penalization_sweep(&t, &z, &bar, &[2, 2], None, 1.0).is_err());
        assert!(penalization_sweep(&t, &z, &bar, &[0, 2], None, 1.0).is_err());
    }

    #[test]
    fn inactive_barrier_rows_agree() {
        let t = unit_tree(10, 2);
        let spec = BarrierSpec::new(BarrierFamily::Constant { c: -1.0 }).with_terminal(0.5);
        let bar = make_barrier(&spec, &t).unwrap();
        let rep = penalization_sweep(&t, &DriverPair::zero(), &bar, &[1, 2, 4, 8], None, 1.0).unwrap();
        for r in &rep.rows {
            assert_eq!(r.skorokhod, 0.0);
            assert_eq!(r.violation, 0.0);
            assert_eq!(r.norm_k, 0.0);
            assert_eq!(r.y0, 0.5);
        }
        assert!(rep.rows[..3].iter().all(|r| r.cauchy_diff == Some(0.0)));
        assert_eq!(rep.jump_activation_level, None);
    }

    #[test]
    fn decreasing_barrier_against_oracle() {
        let t = unit_tree(50, 4);
        let bar = make_barrier(&BarrierSpec::new(BarrierFamily::Linear { a: 1.0, b: -1.0 }), &t)
            .unwrap();
        let oracle = snell_oracle(&t, &DriverPair::zero(), &bar).unwrap();
        let schedule: Vec<u64> = (0..=10).map(|i| 1 << i).collect();
        let rep =
            penalization_sweep(&t, &DriverPair::zero(), &bar, &schedule, Some(&oracle), 1.0).unwrap();
        assert!(rep.monotone(1e-12));
        assert!(rep.violation_nonincreasing(0.0));
        let errs: Vec<f64> = rep.rows.iter().map(|r| r.oracle_err.unwrap()).collect();
        for (w, r) in errs.windows(2).zip(&rep.rows) {
            assert!(w[1] <= w[0]);
            if r.n >= 16 {
                assert!(w[1] <= 0.75 * w[0], "n={} {:?}", r.n, w);
            }
        }
        assert!(*errs.last().unwrap() <= 2e-2);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,cauchy_diff,violation,skorokhod,norm_Y,norm_Z,norm_K,oracle_err\n"));
        assert_eq!(text.lines().count(), 12);
    }

    #[test]
    fn right_jump_activates_at_two() {
        let t = unit_tree(10, 2);
        let spec = BarrierSpec::new(BarrierFamily::Linear { a: 1.0, b: -1.0 }).with_jump(0.5, -0.6);
        let bar = make_barrier(&spec, &t).unwrap();
        let rep = penalization_sweep(&t, &DriverPair::zero(), &bar, &[1, 2, 4, 8], None, 1.0).unwrap();
        assert_eq!(rep.jump_activation_level, Some(2));
        assert_eq!(rep.rows[0].active_jump_nodes, 0);
        assert!(rep.rows[1..].iter().all(|r| r.active_jump_nodes > 0));
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!((least_squares_slope(&pts).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(least_squares_slope(&pts[..1]), None);
    }
}
