//! Small linear programs over the simplex, backed by `microlp`.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};

use crate::error::{Error, Result};

fn solver_err(e: microlp::Error) -> Error {
    match e {
        microlp::Error::Infeasible => Error::Infeasible("linear program has no feasible point".into()),
        other => Error::Solver(other.to_string()),
    }
}

fn into_solution(outcome: microlp::SolveOutcome) -> Result<Solution> {
    outcome
        .into_solution()
        .map_err(|_| Error::Solver("linear program interrupted".into()))
}

/// Reads simplex weights out of an LP solution, clipping round-off.
fn read_simplex(sol: &Solution, vars: &[Variable]) -> Vec<f64> {
    let mut h: Vec<f64> = vars.iter().map(|v| sol.var_value(*v).max(0.0)).collect();
    let total: f64 = h.iter().sum();
    if total > 0.0 {
        h.iter_mut().for_each(|x| *x /= total);
    }
    h
}

/// Incremental `max_{h in Δ_n} min_k a_k · h` with rows added one at a time.
///
/// Each added row reuses the previous basis.
pub(crate) struct MaxMinLp {
    n: usize,
    h: Vec<Variable>,
    t: Variable,
    state: Option<Solution>,
    pending: Option<Problem>,
}

impl MaxMinLp {
    pub(crate) fn new(n: usize) -> Self {
        let mut pb = Problem::new(OptimizationDirection::Maximize);
        let h: Vec<Variable> = (0..n).map(|_| pb.add_var(0.0, (0.0, f64::INFINITY))).collect();
        // t is bounded so the game is bounded before any row exists.
        let t = pb.add_var(1.0, (-2.0, 2.0));
        let sum: Vec<(Variable, f64)> = h.iter().map(|v| (*v, 1.0)).collect();
        pb.add_constraint(&sum[..], ComparisonOp::Eq, 1.0);
        Self {
            n,
            h,
            t,
            state: None,
            pending: Some(pb),
        }
    }

    fn row_expr(&self, row: &[f64]) -> Vec<(Variable, f64)> {
        debug_assert_eq!(row.len(), self.n);
        let mut expr: Vec<(Variable, f64)> = Vec::with_capacity(self.n + 1);
        expr.push((self.t, 1.0));
        for (v, a) in self.h.iter().zip(row) {
            if *a != 0.0 {
                expr.push((*v, -a));
            }
        }
        expr
    }

    /// Adds the constraint `t <= row · h`.
    pub(crate) fn add_row(&mut self, row: &[f64]) -> Result<()> {
        let expr = self.row_expr(row);
        if let Some(pb) = self.pending.as_mut() {
            pb.add_constraint(&expr[..], ComparisonOp::Le, 0.0);
            return Ok(());
        }
        let sol = self.state.take().expect("solved state");
        let outcome = sol
            .add_constraint(&expr[..], ComparisonOp::Le, 0.0)
            .map_err(solver_err)?;
        self.state = Some(into_solution(outcome)?);
        Ok(())
    }

    /// Current optimum `(value, maximizer)`.
    pub(crate) fn solve(&mut self) -> Result<(f64, Vec<f64>)> {
        if let Some(pb) = self.pending.take() {
            let sol = into_solution(pb.solve().map_err(solver_err)?)?;
            self.state = Some(sol);
        }
        let sol = self.state.as_ref().expect("solved state");
        Ok((sol.var_value(self.t), read_simplex(sol, &self.h)))
    }
}

/// A linear cut keeping `{h : g · h >= c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

fn polytope_problem(
    n: usize,
    cuts: &[HalfSpace],
    objective: &[f64],
    slack: bool,
) -> (Problem, Vec<Variable>, Option<Variable>) {
    let mut pb = Problem::new(OptimizationDirection::Maximize);
    let h: Vec<Variable> = objective
        .iter()
        .map(|c| pb.add_var(*c, (0.0, f64::INFINITY)))
        .collect();
    let s = slack.then(|| pb.add_var(1.0, (f64::NEG_INFINITY, 1.0)));
    let sum: Vec<(Variable, f64)> = h.iter().map(|v| (*v, 1.0)).collect();
    pb.add_constraint(&sum[..], ComparisonOp::Eq, 1.0);
    for cut in cuts {
        debug_assert_eq!(cut.normal.len(), n);
        let mut expr: Vec<(Variable, f64)> = h
            .iter()
            .zip(&cut.normal)
            .filter(|(_, g)| **g != 0.0)
            .map(|(v, g)| (*v, *g))
            .collect();
        if let Some(s) = s {
            expr.push((s, -1.0));
        }
        pb.add_constraint(&expr[..], ComparisonOp::Ge, cut.offset);
    }
    (pb, h, s)
}

/// Largest uniform slack `s <= 1` with `g_k · h - c_k >= s` for every cut, and the point attaining it.
pub(crate) fn max_slack(n: usize, cuts: &[HalfSpace]) -> Result<(f64, Vec<f64>)> {
    let zeros = vec![0.0; n];
    let (pb, h, s) = polytope_problem(n, cuts, &zeros, true);
    let sol = into_solution(pb.solve().map_err(solver_err)?)?;
    Ok((sol.var_value(s.expect("slack var")), read_simplex(&sol, &h)))
}

/// `max objective · h` over `Δ_n` and the cuts; `None` if the polytope is empty.
pub(crate) fn maximize_linear(
    n: usize,
    cuts: &[HalfSpace],
    objective: &[f64],
) -> Result<Option<(f64, Vec<f64>)>> {
    let (pb, h, _) = polytope_problem(n, cuts, objective, false);
    match pb.solve() {
        Ok(outcome) => {
            let sol = into_solution(outcome)?;
            Ok(Some((sol.objective(), read_simplex(&sol, &h))))
        }
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(solver_err(e)),
    }
}

/// `min_{r in Δ(X)} max_i (TV(r, q_i) - u_i)`, returning the value and `r`.
pub(crate) fn min_max_excess(rows: &[&[f64]], u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let domain = rows[0].len();
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let r: Vec<Variable> = (0..domain).map(|_| pb.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let t = pb.add_var(1.0, (-2.0, 2.0));
    let sum: Vec<(Variable, f64)> = r.iter().map(|v| (*v, 1.0)).collect();
    pb.add_constraint(&sum[..], ComparisonOp::Eq, 1.0);
    for (q, ui) in rows.iter().zip(u) {
        // s_x >= r_x - q_x, s_x >= 0, sum_x s_x = TV(r, q) at the optimum.
        let s: Vec<Variable> = (0..domain).map(|_| pb.add_var(0.0, (0.0, f64::INFINITY))).collect();
        for x in 0..domain {
            pb.add_constraint([(s[x], 1.0), (r[x], -1.0)], ComparisonOp::Ge, -q[x]);
        }
        let mut expr: Vec<(Variable, f64)> = s.iter().map(|v| (*v, 1.0)).collect();
        expr.push((t, -1.0));
        pb.add_constraint(&expr[..], ComparisonOp::Le, *ui);
    }
    let sol = into_solution(pb.solve().map_err(solver_err)?)?;
    Ok((sol.var_value(t), read_simplex(&sol, &r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_min_matches_pennies() {
        // Matching pennies has value 0 at (1/2, 1/2).
        let mut lp = MaxMinLp::new(2);
        lp.add_row(&[1.0, -1.0]).unwrap();
        lp.add_row(&[-1.0, 1.0]).unwrap();
        let (v, h) = lp.solve().unwrap();
        assert!(v.abs() < 1e-9);
        assert!((h[0] - 0.5).abs() < 1e-9);
        lp.add_row(&[-0.5, -0.5]).unwrap();
        let (v, _) = lp.solve().unwrap();
        assert!((v + 0.5).abs() < 1e-9);
    }

    #[test]
    fn slack_detects_empty_polytope() {
        let cuts = vec![HalfSpace {
            normal: vec![1.0, -1.0],
            offset: 1.5,
        }];
        let (s, _) = max_slack(2, &cuts).unwrap();
        assert!(s < 0.0);
        assert!(maximize_linear(2, &cuts, &[1.0, 0.0]).unwrap().is_none());
    }

    #[test]
    fn min_max_excess_of_corners() {
        let q0 = [1.0, 0.0];
        let q1 = [0.0, 1.0];
        let (v, r) = min_max_excess(&[&q0, &q1], &[0.0, 0.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
        assert!((r[0] - 0.5).abs() < 1e-9);
    }
}
