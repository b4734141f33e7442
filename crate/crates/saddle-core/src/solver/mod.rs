//! Shared infrastructure for the three solver instantiations.
//!
//! Every variant runs the same template: at iteration k it builds a primal
//! direction estimate `g_bar` and a dual value estimate `f_bar`, solves
//!
//! ```text
//!   x_k = argmin_{x in X} a_k <g_bar, x> + a_k phi(x)
//!         + (A_{k-1} mu + mu0) * [weighted Bregman terms to past anchors]
//!   y_k = argmax_{y in Y} a_k <y, f_bar> - a_k psi(y)
//!         - (A_{k-1} nu + nu0) * [weighted Bregman terms to past anchors]
//! ```
//!
//! and returns either the a-weighted average `A_t^{-1} sum_k a_k (x_k, y_k)`
//! or a randomly indexed iterate. This module holds the pieces common to all
//! variants: the running weighted average and the optional per-iteration
//! diagnostics that track the convergence certificate
//!
//! ```text
//!   sum_{k<=t} a_k Gap^{u,v}(x_k, y_k)  +  cP * T^P_t  +  cD * T^D_t
//!       <=  (initial divergence terms),
//! ```
//!
//! where `T^P_t = (A_t mu + mu0) Delta_X(u, x_t)` and
//! `T^D_t = (A_t nu + nu0) Delta_Y(v, y_t)` measure distance to the
//! comparator and the coefficients depend on the solver kind. The
//! cancellation terms `C^P_k = (A_{k-1} mu + mu0) Delta_X(x_k, x_{k-1})`
//! and `C^D_k = (A_{k-1} nu + nu0) Delta_Y(y_k, y_{k-1})` are tracked for
//! inspection; they quantify the per-step movement the certificate spends
//! against estimator error.
//!
//! Diagnostics are off by default: they need a comparator `(u, v)` and two
//! extra Lagrangian evaluations per step, which are bookkeeping outside the
//! oracle budget.

pub mod full;
pub mod stochastic;

use crate::error::Result;
use crate::gap::Comparator;
use crate::geometry::divergence;
use crate::linalg;
use crate::problem::{evaluate_lagrangian, SaddleProblem};
use crate::schedule::{Regime, Schedule, SolverKind};

/// Running a-weighted sums of the iterates. The averaged point is
/// `sum_k a_k x_k / A_t`, the default return value of the deterministic and
/// stochastic variants.
#[derive(Debug, Clone)]
pub struct WeightedAverage {
    sum_x: Vec<f64>,
    sum_y: Vec<f64>,
    weight: f64,
}

impl WeightedAverage {
    pub fn new(d: usize, n: usize) -> WeightedAverage {
        WeightedAverage { sum_x: vec![0.0; d], sum_y: vec![0.0; n], weight: 0.0 }
    }

    pub fn accumulate(&mut self, a: f64, x: &[f64], y: &[f64]) {
        linalg::axpy(a, x, &mut self.sum_x);
        linalg::axpy(a, y, &mut self.sum_y);
        self.weight += a;
    }

    /// Total weight `A_t` accumulated so far.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `A_t^{-1} sum_k a_k x_k`; `None` before the first accumulation.
    pub fn primal(&self) -> Option<Vec<f64>> {
        (self.weight > 0.0).then(|| self.sum_x.iter().map(|s| s / self.weight).collect())
    }

    pub fn dual(&self) -> Option<Vec<f64>> {
        (self.weight > 0.0).then(|| self.sum_y.iter().map(|s| s / self.weight).collect())
    }

    pub fn sums(&self) -> (&[f64], &[f64]) {
        (&self.sum_x, &self.sum_y)
    }
}

/// Per-iteration certificate tracker against a fixed comparator `(u, v)`.
///
/// `observe` must be called once per completed iteration, in order. The
/// left-hand side of the certificate accumulates `a_k Gap^{u,v}` plus the
/// current distance terms; `certificate` returns both sides for the solver
/// kind the diagnostics were created with.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    u: Vec<f64>,
    v: Vec<f64>,
    kind: SolverKind,
    div_x0: f64,
    div_y0: f64,
    gap_sum: f64,
    last_gap: f64,
    t_primal: f64,
    t_dual: f64,
    c_primal: f64,
    c_dual: f64,
    iteration: usize,
}

impl Diagnostics {
    /// Starts tracking from the initial point `(x0, y0)`. The comparator is
    /// validated by evaluating the Lagrangian at `(u, v)`.
    pub fn new(
        problem: &SaddleProblem,
        kind: SolverKind,
        comparator: &Comparator,
        x0: &[f64],
        y0: &[f64],
    ) -> Result<Diagnostics> {
        evaluate_lagrangian(problem, &comparator.u, &comparator.v)?;
        let div_x0 = divergence(problem.geometry_x, &comparator.u, x0);
        let div_y0 = divergence(problem.geometry_y, &comparator.v, y0);
        Ok(Diagnostics {
            u: comparator.u.clone(),
            v: comparator.v.clone(),
            kind,
            div_x0,
            div_y0,
            gap_sum: 0.0,
            last_gap: 0.0,
            t_primal: 0.0,
            t_dual: 0.0,
            c_primal: 0.0,
            c_dual: 0.0,
            iteration: 0,
        })
    }

    /// Records iteration k. `y_gap` is the dual point the gap is evaluated
    /// at: the iterate itself for full and stochastic runs, the materialized
    /// virtual full update for block-coordinate runs.
    #[allow(clippy::too_many_arguments)]
    pub fn observe(
        &mut self,
        problem: &SaddleProblem,
        regime: &Regime,
        schedule: &Schedule,
        k: usize,
        x_k: &[f64],
        x_prev: &[f64],
        y_k: &[f64],
        y_prev: &[f64],
        y_gap: &[f64],
    ) -> Result<()> {
        let a_k = schedule.a(k);
        let big_a = schedule.big_a(k);
        let big_a_prev = schedule.big_a(k - 1);

        let gap = evaluate_lagrangian(problem, x_k, &self.v)?
            - evaluate_lagrangian(problem, &self.u, y_gap)?;
        self.last_gap = gap;
        self.gap_sum += a_k * gap;

        self.t_primal =
            (big_a * regime.mu + regime.mu0) * divergence(problem.geometry_x, &self.u, x_k);
        self.t_dual =
            (big_a * regime.nu + regime.nu0) * divergence(problem.geometry_y, &self.v, y_k);
        self.c_primal =
            (big_a_prev * regime.mu + regime.mu0) * divergence(problem.geometry_x, x_k, x_prev);
        self.c_dual =
            (big_a_prev * regime.nu + regime.nu0) * divergence(problem.geometry_y, y_k, y_prev);
        self.iteration = k;
        Ok(())
    }

    /// Both sides of the solver kind's certificate at the last observed
    /// iteration: `(lhs, rhs)` with the guarantee `lhs <= rhs` (in
    /// expectation for the randomized kinds).
    pub fn certificate(&self, regime: &Regime, schedule: &Schedule) -> (f64, f64) {
        let a1 = schedule.a(1);
        match self.kind {
            SolverKind::FullDeterministic => {
                let lhs = self.gap_sum + 0.5 * self.t_primal + self.t_dual;
                let rhs = regime.mu0 * self.div_x0 + regime.nu0 * self.div_y0;
                (lhs, rhs)
            }
            SolverKind::StochasticHistoric => {
                let lhs = self.gap_sum + 0.25 * self.t_primal + 0.25 * self.t_dual;
                let rhs = (a1 * regime.mu + regime.mu0) * self.div_x0
                    + (a1 * regime.nu + regime.nu0) * self.div_y0;
                (lhs, rhs)
            }
            SolverKind::StochasticReplacement => {
                let lhs = self.gap_sum + 0.5 * self.t_primal + 0.5 * self.t_dual;
                let rhs = regime.mu0 * self.div_x0 + regime.nu0 * self.div_y0;
                (lhs, rhs)
            }
            SolverKind::SeparableHistoric => {
                let wp = schedule.wp(self.iteration.max(1));
                let lhs =
                    self.gap_sum + 0.25 * (1.0 - wp) * self.t_primal + 0.25 * self.t_dual;
                let rhs = (a1 * regime.mu + regime.mu0) * self.div_x0
                    + 0.5 * regime.nu0 * self.div_y0;
                (lhs, rhs)
            }
            SolverKind::SeparableReplacement => {
                let half_n = 0.5 * schedule.num_blocks() as f64;
                let lhs = self.gap_sum + 0.5 * self.t_primal + half_n * self.t_dual;
                let rhs = 0.5 * regime.mu0 * self.div_x0 + half_n * regime.nu0 * self.div_y0;
                (lhs, rhs)
            }
        }
    }

    /// `sum_{k<=t} a_k Gap^{u,v}` accumulated so far.
    pub fn gap_sum(&self) -> f64 {
        self.gap_sum
    }

    /// Gap of the most recent iterate.
    pub fn last_gap(&self) -> f64 {
        self.last_gap
    }

    pub fn t_primal(&self) -> f64 {
        self.t_primal
    }

    pub fn t_dual(&self) -> f64 {
        self.t_dual
    }

    pub fn c_primal(&self) -> f64 {
        self.c_primal
    }

    pub fn c_dual(&self) -> f64 {
        self.c_dual
    }

    pub fn comparator_primal(&self) -> &[f64] {
        &self.u
    }

    pub fn comparator_dual(&self) -> &[f64] {
        &self.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_average_normalizes_by_total_weight() {
        let mut avg = WeightedAverage::new(2, 1);
        assert!(avg.primal().is_none());
        avg.accumulate(1.0, &[1.0, 0.0], &[2.0]);
        avg.accumulate(3.0, &[0.0, 1.0], &[4.0]);
        let x = avg.primal().unwrap();
        assert!((x[0] - 0.25).abs() < 1e-15);
        assert!((x[1] - 0.75).abs() < 1e-15);
        let y = avg.dual().unwrap();
        assert!((y[0] - 3.5).abs() < 1e-15);
        assert!((avg.weight() - 4.0).abs() < 1e-15);
    }
}
