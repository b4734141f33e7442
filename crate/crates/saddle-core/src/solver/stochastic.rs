//! Variance-reduced stochastic instantiation over component blocks.
//!
//! The method keeps comparison tables that remember, per block I, the
//! primal point x_hat_{k,I} at which block I's first-order information was
//! last refreshed, the dual weights y_hat_k stored blockwise, and the
//! component values f_hat_k at the stored points. One block of each table
//! is refreshed per iteration at randomly drawn indices, so every entry
//! lags the iterate by a geometrically distributed age. Writing
//! g_hat_{k,i} = grad f_i(x_hat_{k,I(i)}), the primal direction estimate is
//!
//! ```text
//!   g_bar_{k-1} = g_hat_{k-1}^T y_hat_{k-1}
//!       + (a_{k-1}/(p_{P_k} a_k)) sum_{i in B_{P_k}}
//!             (y_{k-1,i} grad f_i(x_{k-1}) - y_hat_{k-2,i} g_hat_{k-2,i}),
//! ```
//!
//! which is conditionally unbiased for the deterministic extrapolation with
//! table-lagged history, and the dual value estimate is
//!
//! ```text
//!   f_bar_{k-1/2} = f_hat_k
//!       + (a_{k-1}/(q_{Q_k} a_k)) sum_{j in B_{Q_k}}
//!             (f_j(x_{k-1}) - f_hat_{k-1,j}) e_j,
//! ```
//!
//! where f_hat_k already reflects this iteration's primal-side refresh.
//! One iteration therefore interleaves draws and updates in the order:
//! draw P_k, form g_bar and the primal prox point x_k, draw R_k and refresh
//! x_hat_{k,R_k} <- x_k together with the f_hat rows of block R_k, draw
//! Q_k, form f_bar and the dual prox point y_k, draw S_k and refresh
//! y_hat_{k,S_k} <- y_{k,S_k}. History at negative indices equals the
//! initial point, so both corrections vanish at k = 1 (a_0 = 0) and the
//! corresponding component queries are skipped.
//!
//! Strategy 1 spreads the prox penalty over the tables: the primal anchors
//! are {x_{k-1}} and {x_hat_{k-1,I}}_I with weights (1-w^P_k, w^P_k
//! gamma_I) and the dual anchors are {y_{k-1}, y_hat_{k-1}} with weights
//! (1-w^D_k, w^D_k). Strategy 2 sets w^P = w^D = 0 and instead relies on
//! refresh-probability floors; both read their weights off the schedule.
//! The blockwise dual anchor is only sound when psi splits over the dual
//! blocks; for non-separable psi with w^D > 0 the dual refresh falls back
//! to replacing the entire table with probability 1/N (the S draw is
//! uniform in that regime and a draw of block 0 fires the replacement).
//!
//! Instead of an n x d gradient table, the state holds per block and per
//! generation the weighted row sum m_{k,I} = sum_{i in B_I} y_hat_{k,i}
//! grad f_i(x_hat_{k,I}). The product cache g_hat_k^T y_hat_k = sum_I
//! m_{k,I} is maintained by subtracting the affected blocks' old row sums
//! and adding the recomputed ones, and the anchor aggregate sum_I gamma_I
//! grad h_gen(x_hat_{k,I}) by the matching single-block delta. All tables
//! keep depth-2 generation history, so total storage is O(Nd + n) floats.
//!
//! Oracle accounting per iteration (uniform block size b = n/N): |B_P|
//! fresh gradients at x_{k-1}, |B_Q| values at x_{k-1}, |B_R| rows at x_k
//! (shared by f_hat, the row sum, and the cache delta), and |B_S| rows at
//! x_hat_{k-1,S} when S_k != R_k (when they collide the new rows already
//! carry the new weights). That is at most 4b, with the P and Q parts
//! dropped at k = 1; the whole-table fallback costs n - |B_R| extra when
//! it fires. `step_oracle_cost` states the exact count for a recorded
//! draw, and the counter is asserted against it in tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gap::Comparator;
use crate::geometry::{anchor_aggregate, prox_multi, AnchorSet, GeometryKind};
use crate::linalg;
use crate::problem::{
    block_gradient, block_values, evaluate_lagrangian, BlockEval, BlockPartition, OracleCounter,
    SaddleProblem,
};
use crate::schedule::{Regime, SamplingPlan, Schedule, SolverKind};
use crate::solver::{Diagnostics, WeightedAverage};

/// One table entry with its two most recent generations. `install` at
/// generation g assumes all queries from then on ask for generations
/// >= g - 1, which the per-iteration ordering guarantees: every lag-2 read
/// happens before the same iteration's install.
#[derive(Debug, Clone)]
struct Lagged {
    cur: Vec<f64>,
    prev: Vec<f64>,
    cur_gen: usize,
    prev_gen: usize,
}

impl Lagged {
    fn new(v: Vec<f64>) -> Lagged {
        Lagged { prev: v.clone(), cur: v, cur_gen: 0, prev_gen: 0 }
    }

    /// Value as of generation `gen`: the newest install not after `gen`.
    fn at(&self, gen: usize) -> &[f64] {
        if self.cur_gen <= gen {
            &self.cur
        } else {
            debug_assert!(self.prev_gen <= gen, "history depth exceeded");
            &self.prev
        }
    }

    fn latest(&self) -> &[f64] {
        &self.cur
    }

    fn install(&mut self, gen: usize, v: Vec<f64>) {
        debug_assert!(gen > self.cur_gen || (gen == 0 && self.cur_gen == 0));
        std::mem::swap(&mut self.prev, &mut self.cur);
        self.prev_gen = self.cur_gen;
        self.cur = v;
        self.cur_gen = gen;
    }

    fn floats(&self) -> usize {
        self.cur.len() + self.prev.len()
    }
}

/// Comparison tables plus the two incrementally maintained aggregates.
/// Generations are iteration indices; generation 0 is the initial point.
#[derive(Debug, Clone)]
pub struct ComparisonTables {
    xhat: Vec<Lagged>,
    yhat: Vec<Lagged>,
    fhat: Vec<Lagged>,
    /// Per-block weighted row sums m_{k,I}; their sum is the product cache.
    row_sums: Vec<Lagged>,
    /// `g_hat_k^T y_hat_k`, updated blockwise.
    product: Vec<f64>,
    /// `sum_I gamma_I grad h_gen(x_hat_{k,I})`, updated blockwise.
    anchor: Vec<f64>,
    gamma: Vec<f64>,
    geometry_x: GeometryKind,
    generation: usize,
    /// Iteration whose primal half has been installed, for ordering checks.
    primal_refreshed: usize,
}

impl ComparisonTables {
    /// Fills every block's entry from the initial pair, paying n oracle
    /// calls for the sweep that seeds the value table and the row sums.
    pub fn init(
        problem: &SaddleProblem,
        gamma: &[f64],
        x0: &[f64],
        y0: &[f64],
        counter: &mut OracleCounter,
    ) -> Result<ComparisonTables> {
        let nb = problem.num_blocks();
        if gamma.len() != nb {
            return Err(Error::Config(format!(
                "gamma has length {} but the partition has {nb} blocks",
                gamma.len()
            )));
        }
        let mut xhat = Vec::with_capacity(nb);
        let mut yhat = Vec::with_capacity(nb);
        let mut fhat = Vec::with_capacity(nb);
        let mut row_sums = Vec::with_capacity(nb);
        let mut product = vec![0.0; problem.d];
        let mut anchor = vec![0.0; problem.d];
        for block_idx in 0..nb {
            let block = problem.partition.block(block_idx);
            let eval = block_gradient(problem, x0, block_idx, counter);
            let mut sum = vec![0.0; problem.d];
            let mut yb = Vec::with_capacity(block.len());
            for (pos, &j) in block.iter().enumerate() {
                linalg::axpy(y0[j], &eval.gradients[pos], &mut sum);
                yb.push(y0[j]);
            }
            linalg::axpy(1.0, &sum, &mut product);
            let g = anchor_aggregate(problem.geometry_x, &[x0], &[gamma[block_idx]]);
            linalg::axpy(1.0, &g, &mut anchor);
            xhat.push(Lagged::new(x0.to_vec()));
            yhat.push(Lagged::new(yb));
            fhat.push(Lagged::new(eval.values));
            row_sums.push(Lagged::new(sum));
        }
        Ok(ComparisonTables {
            xhat,
            yhat,
            fhat,
            row_sums,
            product,
            anchor,
            gamma: gamma.to_vec(),
            geometry_x: problem.geometry_x,
            generation: 0,
            primal_refreshed: 0,
        })
    }

    /// Latest fully refreshed generation.
    pub fn generation(&self) -> usize {
        self.generation
    }

    /// `x_hat_{gen,I}`.
    pub fn primal_point(&self, block: usize, gen: usize) -> &[f64] {
        self.xhat[block].at(gen)
    }

    /// Block I of `y_hat_gen`, in block-position order.
    pub fn dual_block(&self, block: usize, gen: usize) -> &[f64] {
        self.yhat[block].at(gen)
    }

    /// Block I of `f_hat_gen`, in block-position order.
    pub fn value_block(&self, block: usize, gen: usize) -> &[f64] {
        self.fhat[block].at(gen)
    }

    /// `m_{gen,I} = sum_{i in B_I} y_hat_{gen,i} grad f_i(x_hat_{gen,I})`.
    pub fn row_sum(&self, block: usize, gen: usize) -> &[f64] {
        self.row_sums[block].at(gen)
    }

    /// The maintained `g_hat^T y_hat` at the current generation.
    pub fn cached_product(&self) -> &[f64] {
        &self.product
    }

    /// The maintained `sum_I gamma_I grad h_gen(x_hat_I)`.
    pub fn anchor_aggregate(&self) -> &[f64] {
        &self.anchor
    }

    /// `g_hat_gen^T y_hat_gen` reassembled from the stored row sums.
    pub fn lagged_product(&self, gen: usize) -> Vec<f64> {
        let d = self.product.len();
        let mut out = vec![0.0; d];
        for slot in &self.row_sums {
            linalg::axpy(1.0, slot.at(gen), &mut out);
        }
        out
    }

    /// `y_hat_gen` as a full dual vector.
    pub fn assemble_dual(&self, partition: &BlockPartition, gen: usize) -> Vec<f64> {
        let n: usize = (0..partition.num_blocks()).map(|i| partition.block(i).len()).sum();
        let mut y = vec![0.0; n];
        for (block_idx, slot) in self.yhat.iter().enumerate() {
            let vals = slot.at(gen);
            for (pos, &j) in partition.block(block_idx).iter().enumerate() {
                y[j] = vals[pos];
            }
        }
        y
    }

    /// `f_hat_gen` as a full value vector.
    pub fn assemble_values(&self, partition: &BlockPartition, gen: usize) -> Vec<f64> {
        let n: usize = (0..partition.num_blocks()).map(|i| partition.block(i).len()).sum();
        let mut f = vec![0.0; n];
        for (block_idx, slot) in self.fhat.iter().enumerate() {
            let vals = slot.at(gen);
            for (pos, &j) in partition.block(block_idx).iter().enumerate() {
                f[j] = vals[pos];
            }
        }
        f
    }

    /// Reference recomputation of the product cache by a fresh O(nd)
    /// sweep at the stored points. Diagnostic only: the sweep is not
    /// charged to any run budget.
    pub fn recompute_product(&self, problem: &SaddleProblem) -> Vec<f64> {
        let mut scratch = OracleCounter::new();
        let mut out = vec![0.0; problem.d];
        for block_idx in 0..problem.num_blocks() {
            let eval =
                block_gradient(problem, self.xhat[block_idx].latest(), block_idx, &mut scratch);
            let weights = self.yhat[block_idx].latest();
            for (pos, grad) in eval.gradients.iter().enumerate() {
                linalg::axpy(weights[pos], grad, &mut out);
            }
        }
        out
    }

    /// Reference recomputation of the anchor aggregate.
    pub fn recompute_anchor_aggregate(&self) -> Vec<f64> {
        let points: Vec<&[f64]> = self.xhat.iter().map(|s| s.latest()).collect();
        anchor_aggregate(self.geometry_x, &points, &self.gamma)
    }

    /// Largest deviation `|f_hat_i - f_i(x_hat_I)|` over the value table,
    /// from a fresh uncharged sweep.
    pub fn value_table_error(&self, problem: &SaddleProblem) -> f64 {
        let mut scratch = OracleCounter::new();
        let mut worst = 0.0f64;
        for block_idx in 0..problem.num_blocks() {
            let fresh =
                block_values(problem, self.xhat[block_idx].latest(), block_idx, &mut scratch);
            for (have, want) in self.fhat[block_idx].latest().iter().zip(&fresh) {
                worst = worst.max((have - want).abs());
            }
        }
        worst
    }

    /// Total f64 storage across all fields; the structural memory bound
    /// 4Nd + 4n + 2d + N floats.
    pub fn storage_floats(&self) -> usize {
        let slots: usize = self
            .xhat
            .iter()
            .chain(&self.yhat)
            .chain(&self.fhat)
            .chain(&self.row_sums)
            .map(Lagged::floats)
            .sum();
        slots + self.product.len() + self.anchor.len() + self.gamma.len()
    }
}

/// How the dual table is refreshed at the end of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualRefresh {
    /// Replace block S_k with the corresponding block of y_k.
    Block(usize),
    /// Non-separable fallback: replace the whole table when fired.
    Whole { fired: bool },
}

/// Installs the primal half of the refresh: `x_hat_{k,R} <- x_k`, the
/// f_hat rows of block R, and the anchor-aggregate delta. Returns the
/// block evaluation at x_k so the dual half can finish the row sums and
/// the product cache without re-querying. Costs |B_R| oracle calls.
pub fn table_refresh_primal(
    problem: &SaddleProblem,
    tables: &mut ComparisonTables,
    k: usize,
    r_block: usize,
    x_k: &[f64],
    counter: &mut OracleCounter,
) -> BlockEval {
    debug_assert_eq!(tables.generation, k - 1, "refresh must follow iteration order");
    let eval = block_gradient(problem, x_k, r_block, counter);

    let gamma_r = tables.gamma[r_block];
    let old = anchor_aggregate(tables.geometry_x, &[tables.xhat[r_block].latest()], &[gamma_r]);
    linalg::axpy(-1.0, &old, &mut tables.anchor);
    let new = anchor_aggregate(tables.geometry_x, &[x_k], &[gamma_r]);
    linalg::axpy(1.0, &new, &mut tables.anchor);

    tables.xhat[r_block].install(k, x_k.to_vec());
    tables.fhat[r_block].install(k, eval.values.clone());
    tables.primal_refreshed = k;
    eval
}

/// Installs the dual half: `y_hat_{k,S} <- y_{k,S}` (or the whole table in
/// the fallback), the affected row sums, and the product cache. The old
/// row sums are subtracted before the new ones are added, so a single
/// block degenerates to an exact rebuild. Costs |B_S| calls when S != R,
/// none when they collide, and n - |B_R| when the whole-table fallback
/// fires.
pub fn table_refresh_dual(
    problem: &SaddleProblem,
    tables: &mut ComparisonTables,
    k: usize,
    r_block: usize,
    r_eval: BlockEval,
    dual: DualRefresh,
    y_k: &[f64],
    counter: &mut OracleCounter,
) {
    debug_assert_eq!(tables.primal_refreshed, k, "primal half must run first");
    let gather = |block_idx: usize| -> Vec<f64> {
        problem.partition.block(block_idx).iter().map(|&j| y_k[j]).collect()
    };
    let weighted_sum = |weights: &[f64], grads: &[Vec<f64>]| -> Vec<f64> {
        let mut sum = vec![0.0; problem.d];
        for (w, g) in weights.iter().zip(grads) {
            linalg::axpy(*w, g, &mut sum);
        }
        sum
    };

    let r_weights_change = match dual {
        DualRefresh::Block(s) => s == r_block,
        DualRefresh::Whole { fired } => fired,
    };

    linalg::axpy(-1.0, tables.row_sums[r_block].latest(), &mut tables.product);
    let new_r_weights =
        if r_weights_change { gather(r_block) } else { tables.yhat[r_block].latest().to_vec() };
    let sum_r = weighted_sum(&new_r_weights, &r_eval.gradients);
    linalg::axpy(1.0, &sum_r, &mut tables.product);
    tables.row_sums[r_block].install(k, sum_r);
    if r_weights_change {
        tables.yhat[r_block].install(k, new_r_weights);
    }

    match dual {
        DualRefresh::Block(s) if s != r_block => {
            linalg::axpy(-1.0, tables.row_sums[s].latest(), &mut tables.product);
            let eval = block_gradient(problem, tables.xhat[s].latest(), s, counter);
            let weights = gather(s);
            let sum_s = weighted_sum(&weights, &eval.gradients);
            linalg::axpy(1.0, &sum_s, &mut tables.product);
            tables.row_sums[s].install(k, sum_s);
            tables.yhat[s].install(k, weights);
        }
        DualRefresh::Block(_) => {}
        DualRefresh::Whole { fired } => {
            if fired {
                for block_idx in 0..problem.num_blocks() {
                    if block_idx == r_block {
                        continue;
                    }
                    linalg::axpy(-1.0, tables.row_sums[block_idx].latest(), &mut tables.product);
                    let eval = block_gradient(
                        problem,
                        tables.xhat[block_idx].latest(),
                        block_idx,
                        counter,
                    );
                    let weights = gather(block_idx);
                    let sum = weighted_sum(&weights, &eval.gradients);
                    linalg::axpy(1.0, &sum, &mut tables.product);
                    tables.row_sums[block_idx].install(k, sum);
                    tables.yhat[block_idx].install(k, weights);
                }
            }
        }
    }
    tables.generation = k;
}

/// Both refresh halves in iteration order, for callers that do not need
/// to interleave the dual estimate between them.
pub fn table_refresh(
    problem: &SaddleProblem,
    tables: &mut ComparisonTables,
    k: usize,
    r_block: usize,
    dual: DualRefresh,
    x_k: &[f64],
    y_k: &[f64],
    counter: &mut OracleCounter,
) {
    let eval = table_refresh_primal(problem, tables, k, r_block, x_k, counter);
    table_refresh_dual(problem, tables, k, r_block, eval, dual, y_k, counter);
}

/// Seeded sampler for the four per-iteration block draws. One iteration
/// consumes exactly four uniform variates in the order P, R, Q, S, so a
/// replayed seed reproduces the index sequence exactly.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    p_cdf: Vec<f64>,
    q_cdf: Vec<f64>,
    r_cdf: Vec<f64>,
    s_cdf: Vec<f64>,
    seed: u64,
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = v
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

impl RandomStream {
    pub fn new(plan: &SamplingPlan, seed: u64) -> RandomStream {
        RandomStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            p_cdf: cumulative(&plan.p),
            q_cdf: cumulative(&plan.q),
            r_cdf: cumulative(&plan.r),
            s_cdf: cumulative(&plan.s),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn draw_from(rng: &mut ChaCha8Rng, cdf: &[f64]) -> usize {
        let u: f64 = rng.gen();
        cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1)
    }

    pub fn draw_p(&mut self) -> usize {
        Self::draw_from(&mut self.rng, &self.p_cdf)
    }

    pub fn draw_q(&mut self) -> usize {
        Self::draw_from(&mut self.rng, &self.q_cdf)
    }

    pub fn draw_r(&mut self) -> usize {
        Self::draw_from(&mut self.rng, &self.r_cdf)
    }

    pub fn draw_s(&mut self) -> usize {
        Self::draw_from(&mut self.rng, &self.s_cdf)
    }
}

/// Indices drawn during one iteration, in stream order, together with how
/// the S draw was interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawRecord {
    pub p: usize,
    pub r: usize,
    pub q: usize,
    pub s: usize,
    pub dual: DualRefresh,
}

impl DrawRecord {
    /// Whether this step replaced the entire dual table.
    pub fn whole_refresh_fired(&self) -> bool {
        matches!(self.dual, DualRefresh::Whole { fired: true })
    }
}

/// Exact number of counted component queries iteration k makes given its
/// draws: |B_R|, plus |B_P| + |B_Q| when a_{k-1} > 0, plus the dual-half
/// cost (|B_S| if S != R in blockwise mode; n - |B_R| if the whole-table
/// fallback fired; nothing otherwise).
pub fn step_oracle_cost(
    problem: &SaddleProblem,
    schedule: &Schedule,
    k: usize,
    rec: &DrawRecord,
) -> u64 {
    let b = |i: usize| problem.partition.block(i).len() as u64;
    let mut cost = b(rec.r);
    if schedule.a(k - 1) > 0.0 {
        cost += b(rec.p) + b(rec.q);
    }
    match rec.dual {
        DualRefresh::Block(s) if s != rec.r => cost += b(s),
        DualRefresh::Block(_) => {}
        DualRefresh::Whole { fired } => {
            if fired {
                cost += problem.n as u64 - b(rec.r);
            }
        }
    }
    cost
}

/// `g_bar_{k-1}`: the cached table product plus the importance-weighted
/// block-P correction. Tables must still be at generation k-1. Costs
/// |B_P| oracle calls, or none at k = 1 where the correction vanishes.
#[allow(clippy::too_many_arguments)]
pub fn stoch_primal_estimate(
    problem: &SaddleProblem,
    tables: &ComparisonTables,
    plan: &SamplingPlan,
    x_prev: &[f64],
    y_prev: &[f64],
    p_block: usize,
    k: usize,
    a_k: f64,
    a_km1: f64,
    counter: &mut OracleCounter,
) -> Vec<f64> {
    debug_assert_eq!(tables.generation, k - 1);
    let mut g_bar = tables.cached_product().to_vec();
    if a_km1 > 0.0 {
        let coeff = a_km1 / (plan.p[p_block] * a_k);
        let eval = block_gradient(problem, x_prev, p_block, counter);
        let mut delta = vec![0.0; problem.d];
        for (pos, &j) in problem.partition.block(p_block).iter().enumerate() {
            linalg::axpy(y_prev[j], &eval.gradients[pos], &mut delta);
        }
        let lag2 = tables.row_sum(p_block, k.saturating_sub(2));
        for (dl, old) in delta.iter_mut().zip(lag2) {
            *dl -= old;
        }
        linalg::axpy(coeff, &delta, &mut g_bar);
    }
    g_bar
}

/// `f_bar_{k-1/2}`: the value table at generation k (the primal half of
/// the refresh must already be installed) plus the block-Q correction
/// evaluated at x_{k-1}. Costs |B_Q| calls, or none at k = 1.
#[allow(clippy::too_many_arguments)]
pub fn stoch_dual_estimate(
    problem: &SaddleProblem,
    tables: &ComparisonTables,
    plan: &SamplingPlan,
    x_prev: &[f64],
    q_block: usize,
    k: usize,
    a_k: f64,
    a_km1: f64,
    counter: &mut OracleCounter,
) -> Vec<f64> {
    debug_assert_eq!(tables.primal_refreshed, k, "dual estimate precedes the primal refresh");
    let mut f_bar = tables.assemble_values(&problem.partition, k);
    if a_km1 > 0.0 {
        let coeff = a_km1 / (plan.q[q_block] * a_k);
        let fresh = block_values(problem, x_prev, q_block, counter);
        let old = tables.value_block(q_block, k - 1);
        for (pos, &j) in problem.partition.block(q_block).iter().enumerate() {
            f_bar[j] += coeff * (fresh[pos] - old[pos]);
        }
    }
    f_bar
}

/// State machine for one stochastic run.
#[derive(Debug, Clone)]
pub struct StochasticState {
    x_prev: Vec<f64>,
    x: Vec<f64>,
    y_prev: Vec<f64>,
    y: Vec<f64>,
    tables: ComparisonTables,
    stream: RandomStream,
    kind: SolverKind,
    whole_dual_mode: bool,
    average: WeightedAverage,
    diagnostics: Option<Diagnostics>,
    last_draws: Option<DrawRecord>,
    iteration: usize,
}

impl StochasticState {
    /// Validates the start pair, seeds the tables (n oracle calls), and
    /// fixes the dual-refresh mode: blockwise unless the historic strategy
    /// is run on a problem whose psi is not dual separable.
    pub fn init(
        problem: &SaddleProblem,
        plan: &SamplingPlan,
        kind: SolverKind,
        x0: &[f64],
        y0: &[f64],
        seed: u64,
        counter: &mut OracleCounter,
    ) -> Result<StochasticState> {
        if !matches!(kind, SolverKind::StochasticHistoric | SolverKind::StochasticReplacement) {
            return Err(Error::Config(format!(
                "stochastic runs accept the two stochastic solver kinds, got {kind:?}"
            )));
        }
        if plan.num_blocks() != problem.num_blocks() {
            return Err(Error::Config(format!(
                "plan covers {} blocks but the partition has {}",
                plan.num_blocks(),
                problem.num_blocks()
            )));
        }
        evaluate_lagrangian(problem, x0, y0)?;
        let tables = ComparisonTables::init(problem, &plan.gamma, x0, y0, counter)?;
        let whole_dual_mode =
            kind == SolverKind::StochasticHistoric && !problem.dual_separable;
        Ok(StochasticState {
            x_prev: x0.to_vec(),
            x: x0.to_vec(),
            y_prev: y0.to_vec(),
            y: y0.to_vec(),
            tables,
            stream: RandomStream::new(plan, seed),
            kind,
            whole_dual_mode,
            average: WeightedAverage::new(problem.d, problem.n),
            diagnostics: None,
            last_draws: None,
            iteration: 0,
        })
    }

    /// Attaches certificate tracking against `comparator`. Must be called
    /// before the first step.
    pub fn with_diagnostics(
        mut self,
        problem: &SaddleProblem,
        comparator: &Comparator,
    ) -> Result<StochasticState> {
        if self.iteration != 0 {
            return Err(Error::Config("diagnostics must attach before stepping".into()));
        }
        self.diagnostics =
            Some(Diagnostics::new(problem, self.kind, comparator, &self.x, &self.y)?);
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

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn tables(&self) -> &ComparisonTables {
        &self.tables
    }

    pub fn average(&self) -> &WeightedAverage {
        &self.average
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        self.diagnostics.as_ref()
    }

    /// Indices drawn by the most recent step.
    pub fn last_draws(&self) -> Option<&DrawRecord> {
        self.last_draws.as_ref()
    }

    /// Whether dual refreshes replace the whole table (fallback mode).
    pub fn whole_dual_mode(&self) -> bool {
        self.whole_dual_mode
    }
}

/// Advances the state through iteration k: draw P, estimate and prox the
/// primal side, refresh the primal table at R, draw Q, estimate and prox
/// the dual side, refresh the dual table at S.
pub fn stoch_step(
    problem: &SaddleProblem,
    regime: &Regime,
    schedule: &Schedule,
    plan: &SamplingPlan,
    state: &mut StochasticState,
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
    let stiffness_p = schedule.big_a(k - 1) * regime.mu + regime.mu0;
    let stiffness_d = schedule.big_a(k - 1) * regime.nu + regime.nu0;

    let p_block = state.stream.draw_p();
    let g_bar = stoch_primal_estimate(
        problem, &state.tables, plan, &state.x, &state.y, p_block, k, a_k, a_km1, counter,
    );
    let wp = schedule.wp(k);
    let primal_anchors = if wp > 0.0 {
        let mut agg = anchor_aggregate(problem.geometry_x, &[&state.x], &[1.0 - wp]);
        linalg::axpy(wp, state.tables.anchor_aggregate(), &mut agg);
        AnchorSet::from_aggregate(agg)
    } else {
        AnchorSet::single(problem.geometry_x, &state.x)
    };
    let x_k = prox_multi(
        problem.geometry_x,
        &problem.domain_x,
        &g_bar,
        a_k,
        &problem.phi,
        stiffness_p,
        &primal_anchors,
    )?;

    let r_block = state.stream.draw_r();
    let r_eval = table_refresh_primal(problem, &mut state.tables, k, r_block, &x_k, counter);

    let q_block = state.stream.draw_q();
    let f_bar =
        stoch_dual_estimate(problem, &state.tables, plan, &state.x, q_block, k, a_k, a_km1, counter);
    let wd = schedule.wd(k);
    let dual_anchors = if wd > 0.0 {
        let yhat = state.tables.assemble_dual(&problem.partition, k - 1);
        AnchorSet::weighted(problem.geometry_y, &[&state.y, &yhat], &[1.0 - wd, wd])?
    } else {
        AnchorSet::single(problem.geometry_y, &state.y)
    };
    let neg_values: Vec<f64> = f_bar.iter().map(|v| -v).collect();
    let y_k = prox_multi(
        problem.geometry_y,
        &problem.domain_y,
        &neg_values,
        a_k,
        &problem.psi,
        stiffness_d,
        &dual_anchors,
    )?;

    let s_draw = state.stream.draw_s();
    let dual = if state.whole_dual_mode {
        DualRefresh::Whole { fired: s_draw == 0 }
    } else {
        DualRefresh::Block(s_draw)
    };
    table_refresh_dual(problem, &mut state.tables, k, r_block, r_eval, dual, &y_k, counter);

    std::mem::swap(&mut state.x_prev, &mut state.x);
    state.x = x_k;
    std::mem::swap(&mut state.y_prev, &mut state.y);
    state.y = y_k;
    state.last_draws = Some(DrawRecord { p: p_block, r: r_block, q: q_block, s: s_draw, dual });
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

/// Runs t iterations from `(x0, y0)` under `seed`, optionally with
/// certificate diagnostics, and returns the final state with its counter.
#[allow(clippy::too_many_arguments)]
pub fn run_stochastic(
    problem: &SaddleProblem,
    regime: &Regime,
    schedule: &Schedule,
    plan: &SamplingPlan,
    x0: &[f64],
    y0: &[f64],
    t: usize,
    seed: u64,
    comparator: Option<&Comparator>,
) -> Result<(StochasticState, OracleCounter)> {
    let mut counter = OracleCounter::new();
    let mut state =
        StochasticState::init(problem, plan, schedule.kind(), x0, y0, seed, &mut counter)?;
    if let Some(c) = comparator {
        state = state.with_diagnostics(problem, c)?;
    }
    for k in 1..=t {
        stoch_step(problem, regime, schedule, plan, &mut state, &mut counter, k)?;
    }
    Ok((state, counter))
}
