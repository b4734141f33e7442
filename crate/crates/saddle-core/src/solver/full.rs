//! Deterministic full-vector instantiation of the template update.
//!
//! The primal direction extrapolates the two most recent coupling products,
//!
//! ```text
//!   g_bar_{k-1} = J(x_{k-1})^T y_{k-1}
//!       + (a_{k-1}/a_k) (J(x_{k-1})^T y_{k-1} - J(x_{k-2})^T y_{k-2}),
//! ```
//!
//! where `J(x)` is the Jacobian of the coupling map `f` and history at
//! negative indices equals the initial point, so the correction vanishes at
//! k = 1. The dual side uses the exact values `f_bar = f(x_k)`. Both prox
//! steps anchor at the previous iterate only:
//!
//! ```text
//!   x_k = argmin_x a_k <g_bar, x> + a_k phi(x)
//!         + (A_{k-1} mu + mu0) Delta_X(x, x_{k-1}),
//!   y_k = argmax_y a_k <y, f(x_k)> - a_k psi(y)
//!         - (A_{k-1} nu + nu0) Delta_Y(y, y_{k-1}).
//! ```
//!
//! Oracle accounting: one step queries every component pair exactly once,
//! at x_k, after the primal prox; the values feed the dual prox and the
//! gradients form `J(x_k)^T y_k` once y_k is known. The counter therefore
//! advances by exactly n per iteration, plus n once at initialization for
//! the product at `(x_0, y_0)`. Per-iteration work is O(nd); the Jacobian
//! is never kept beyond the current step, only the two products are.

use crate::error::{Error, Result};
use crate::gap::Comparator;
use crate::geometry::{prox_multi, AnchorSet};
use crate::linalg;
use crate::problem::{block_gradient, evaluate_lagrangian, OracleCounter, SaddleProblem};
use crate::schedule::{Regime, Schedule, SolverKind};
use crate::solver::{Diagnostics, WeightedAverage};

/// State machine for one deterministic run. `x`, `x_prev`, `x_prev2` are
/// the three most recent primal iterates (likewise for the dual side);
/// `jty` and `jty_prev` cache `J(x)^T y` for the two most recent pairs.
#[derive(Debug, Clone)]
pub struct FullState {
    x_prev2: Vec<f64>,
    x_prev: Vec<f64>,
    x: Vec<f64>,
    y_prev2: Vec<f64>,
    y_prev: Vec<f64>,
    y: Vec<f64>,
    jty: Vec<f64>,
    jty_prev: Vec<f64>,
    g_bar: Vec<f64>,
    values: Vec<f64>,
    jacobian: Vec<Vec<f64>>,
    average: WeightedAverage,
    diagnostics: Option<Diagnostics>,
    iteration: usize,
}

impl FullState {
    /// Validates the start point and pays the initial n oracle calls for
    /// `J(x_0)^T y_0`. All history slots begin at the initial point.
    pub fn init(
        problem: &SaddleProblem,
        x0: &[f64],
        y0: &[f64],
        counter: &mut OracleCounter,
    ) -> Result<FullState> {
        evaluate_lagrangian(problem, x0, y0)?;
        let mut jty = vec![0.0; problem.d];
        let mut values = vec![0.0; problem.n];
        let mut jacobian = vec![vec![0.0; problem.d]; problem.n];
        for block_idx in 0..problem.num_blocks() {
            let eval = block_gradient(problem, x0, block_idx, counter);
            for (pos, &j) in problem.partition.block(block_idx).iter().enumerate() {
                linalg::axpy(y0[j], &eval.gradients[pos], &mut jty);
                values[j] = eval.values[pos];
                jacobian[j].copy_from_slice(&eval.gradients[pos]);
            }
        }
        Ok(FullState {
            x_prev2: x0.to_vec(),
            x_prev: x0.to_vec(),
            x: x0.to_vec(),
            y_prev2: y0.to_vec(),
            y_prev: y0.to_vec(),
            y: y0.to_vec(),
            jty_prev: jty.clone(),
            jty,
            g_bar: vec![0.0; problem.d],
            values,
            jacobian,
            average: WeightedAverage::new(problem.d, problem.n),
            diagnostics: None,
            iteration: 0,
        })
    }

    /// Attaches certificate tracking against `comparator`. Must be called
    /// before the first step.
    pub fn with_diagnostics(
        mut self,
        problem: &SaddleProblem,
        comparator: &Comparator,
    ) -> Result<FullState> {
        if self.iteration != 0 {
            return Err(Error::Config("diagnostics must attach before stepping".into()));
        }
        self.diagnostics = Some(Diagnostics::new(
            problem,
            SolverKind::FullDeterministic,
            comparator,
            &self.x,
            &self.y,
        )?);
        Ok(self)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_prev(&self) -> &[f64] {
        &self.x_prev
    }

    pub fn y_prev(&self) -> &[f64] {
        &self.y_prev
    }

    /// Completed iteration count.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Primal direction used by the most recent step.
    pub fn last_direction(&self) -> &[f64] {
        &self.g_bar
    }

    /// Coupling values `f(x_k)` at the current iterate.
    pub fn coupling_values(&self) -> &[f64] {
        &self.values
    }

    pub fn average(&self) -> &WeightedAverage {
        &self.average
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        self.diagnostics.as_ref()
    }
}

/// `g_bar_{k-1} = jty + (a_{k-1}/a_k)(jty - jty_prev)` from the cached
/// products. `a_k` must be positive.
pub fn full_primal_extrapolate(state: &FullState, a_k: f64, a_km1: f64) -> Vec<f64> {
    debug_assert!(a_k > 0.0);
    let ratio = a_km1 / a_k;
    state
        .jty
        .iter()
        .zip(&state.jty_prev)
        .map(|(cur, prev)| cur + ratio * (cur - prev))
        .collect()
}

/// Advances the state through iteration k. Steps must be taken in order;
/// the schedule must already cover index k.
pub fn full_step(
    problem: &SaddleProblem,
    regime: &Regime,
    schedule: &Schedule,
    state: &mut FullState,
    counter: &mut OracleCounter,
    k: usize,
) -> Result<()> {
    if k != state.iteration + 1 {
        return Err(Error::Config(format!(
            "steps must be sequential: expected {}, got {k}",
            state.iteration + 1
        )));
    }
    if k > schedule.max_index() {
        return Err(Error::Config(format!(
            "schedule covers {} iterations but step {k} was requested",
            schedule.max_index()
        )));
    }
    let a_k = schedule.a(k);
    let a_km1 = schedule.a(k - 1);
    let big_a_prev = schedule.big_a(k - 1);
    let stiffness_p = big_a_prev * regime.mu + regime.mu0;
    let stiffness_d = big_a_prev * regime.nu + regime.nu0;

    let g_bar = full_primal_extrapolate(state, a_k, a_km1);
    let x_k = prox_multi(
        problem.geometry_x,
        &problem.domain_x,
        &g_bar,
        a_k,
        &problem.phi,
        stiffness_p,
        &AnchorSet::single(problem.geometry_x, &state.x),
    )?;

    for block_idx in 0..problem.num_blocks() {
        let eval = block_gradient(problem, &x_k, block_idx, counter);
        for (pos, &j) in problem.partition.block(block_idx).iter().enumerate() {
            state.values[j] = eval.values[pos];
            state.jacobian[j].copy_from_slice(&eval.gradients[pos]);
        }
    }

    let neg_values: Vec<f64> = state.values.iter().map(|v| -v).collect();
    let y_k = prox_multi(
        problem.geometry_y,
        &problem.domain_y,
        &neg_values,
        a_k,
        &problem.psi,
        stiffness_d,
        &AnchorSet::single(problem.geometry_y, &state.y),
    )?;

    let mut jty_new = vec![0.0; problem.d];
    for (j, row) in state.jacobian.iter().enumerate() {
        linalg::axpy(y_k[j], row, &mut jty_new);
    }

    std::mem::swap(&mut state.x_prev2, &mut state.x_prev);
    std::mem::swap(&mut state.x_prev, &mut state.x);
    state.x = x_k;
    std::mem::swap(&mut state.y_prev2, &mut state.y_prev);
    std::mem::swap(&mut state.y_prev, &mut state.y);
    state.y = y_k;
    std::mem::swap(&mut state.jty_prev, &mut state.jty);
    state.jty = jty_new;
    state.g_bar = g_bar;

    state.average.accumulate(a_k, &state.x, &state.y);
    state.iteration = k;

    if let Some(diag) = state.diagnostics.as_mut() {
        diag.observe(
            problem,
            regime,
            schedule,
            k,
            &state.x,
            &state.x_prev,
            &state.y,
            &state.y_prev,
            &state.y,
        )?;
    }
    Ok(())
}

/// Runs t iterations from `(x0, y0)`, optionally with certificate
/// diagnostics, and returns the final state with its oracle counter.
pub fn run_full(
    problem: &SaddleProblem,
    regime: &Regime,
    schedule: &Schedule,
    x0: &[f64],
    y0: &[f64],
    t: usize,
    comparator: Option<&Comparator>,
) -> Result<(FullState, OracleCounter)> {
    let mut counter = OracleCounter::new();
    let mut state = FullState::init(problem, x0, y0, &mut counter)?;
    if let Some(c) = comparator {
        state = state.with_diagnostics(problem, c)?;
    }
    for k in 1..=t {
        full_step(problem, regime, schedule, &mut state, &mut counter, k)?;
    }
    Ok((state, counter))
}
