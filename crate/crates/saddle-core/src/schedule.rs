//! Averaging sequences, balancing weights, anchor weights, and block
//! sampling distributions for the three solver instantiations.
//!
//! Every solver runs the same template update driven by a positive
//! averaging sequence `a_1, a_2, ...` with running sum
//! `A_k = a_1 + ... + a_k` (and `a_0 = A_0 = 0`). Convergence of the
//! weighted averages requires per-step growth conditions that tie `a_k`
//! to the regularization levels `A_k mu + mu0` and `A_k nu + nu0` and to
//! the coupling constants of the problem:
//!
//! * the full-vector method needs
//!   `a_k <= min{ sqrt((A_k mu + mu0)(A_{k-1} nu + nu0)) / (sqrt(2) G),
//!                sqrt((A_k mu + mu0)(A_{k-1} mu + mu0)) / (2 L) }`;
//! * the block-stochastic methods replace `(G, L)` by sampled analogs
//!   built from the block constants and the sampling vectors, add
//!   balancing weights `w^P_k, w^D_k` that split the prox center between
//!   the previous iterate and a table of block anchors, and add either
//!   geometric-decay conditions (historical anchors) or step-ratio
//!   conditions (anchor replacement) that control how fast `A_k` may
//!   grow relative to the table refresh rate `1/N`.
//!
//! The regime `(mu > 0?, nu > 0?)` determines the shape of the sequence:
//! geometric growth when both are positive, a linear ramp capped by a
//! geometric or constant branch in the mixed regimes, and a constant
//! sequence when neither is. Coefficients the analysis pins down exactly
//! are used verbatim; coefficients known only up to an absolute constant
//! are scaled to the largest value that passes [`certify_schedule`] by
//! bisection. The certificate re-evaluates every condition numerically,
//! including the infinite decay sums, which are computed by an exact
//! backward recurrence seeded with a closed-form geometric tail bound.

use crate::error::{Error, Result};
use crate::problem::{BlockPartition, SaddleProblem};

/// Sum tolerance for probability and weight vectors.
pub const PLAN_SUM_TOL: f64 = 1e-12;

/// Relative slack above which a certificate inequality counts as violated.
pub const CERT_REL_TOL: f64 = 1e-9;

/// Absolute slack floor for certificate inequalities near zero.
pub const CERT_ABS_TOL: f64 = 1e-12;

/// Solver instantiation a schedule or sampling plan is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Deterministic full-vector updates; no sampling.
    FullDeterministic,
    /// Block-stochastic estimates with historically anchored prox terms.
    StochasticHistoric,
    /// Block-stochastic estimates with probabilistic anchor replacement.
    StochasticReplacement,
    /// Dual-separable block updates with historically anchored prox terms.
    SeparableHistoric,
    /// Dual-separable block updates with probabilistic anchor replacement.
    SeparableReplacement,
}

impl SolverKind {
    pub fn tag(self) -> &'static str {
        match self {
            SolverKind::FullDeterministic => "full",
            SolverKind::StochasticHistoric => "stochastic-historic",
            SolverKind::StochasticReplacement => "stochastic-replacement",
            SolverKind::SeparableHistoric => "separable-historic",
            SolverKind::SeparableReplacement => "separable-replacement",
        }
    }

    pub fn from_tag(tag: &str) -> Option<SolverKind> {
        match tag {
            "full" => Some(SolverKind::FullDeterministic),
            "stochastic-historic" => Some(SolverKind::StochasticHistoric),
            "stochastic-replacement" => Some(SolverKind::StochasticReplacement),
            "separable-historic" => Some(SolverKind::SeparableHistoric),
            "separable-replacement" => Some(SolverKind::SeparableReplacement),
            _ => None,
        }
    }

    pub fn is_separable(self) -> bool {
        matches!(
            self,
            SolverKind::SeparableHistoric | SolverKind::SeparableReplacement
        )
    }

    pub fn is_replacement(self) -> bool {
        matches!(
            self,
            SolverKind::StochasticReplacement | SolverKind::SeparableReplacement
        )
    }

    pub fn is_historic(self) -> bool {
        matches!(
            self,
            SolverKind::StochasticHistoric | SolverKind::SeparableHistoric
        )
    }
}

/// Strong-convexity regime a schedule is built for. `mu` and `nu` are the
/// moduli of the primal and dual regularizers; `mu0 > 0` and `nu0 > 0` are
/// the base regularization levels that keep the prox steps well posed even
/// when `mu = nu = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Regime {
    pub mu: f64,
    pub nu: f64,
    pub mu0: f64,
    pub nu0: f64,
}

impl Regime {
    pub fn new(mu: f64, nu: f64, mu0: f64, nu0: f64) -> Result<Regime> {
        if !(mu >= 0.0) || !(nu >= 0.0) || !mu.is_finite() || !nu.is_finite() {
            return Err(Error::Config(format!(
                "strong convexity moduli must be finite and nonnegative, got mu={mu}, nu={nu}"
            )));
        }
        if !(mu0 > 0.0) || !(nu0 > 0.0) || !mu0.is_finite() || !nu0.is_finite() {
            return Err(Error::Config(format!(
                "base regularization levels must be finite and positive, got mu0={mu0}, nu0={nu0}"
            )));
        }
        Ok(Regime { mu, nu, mu0, nu0 })
    }

    pub fn mu_positive(&self) -> bool {
        self.mu > 0.0
    }

    pub fn nu_positive(&self) -> bool {
        self.nu > 0.0
    }

    /// Default regime for a problem: `mu0 = 1` and `nu0 = 1`, except that
    /// separable solvers use `nu0 = mu0 / N`, which balances the dual
    /// distance term whose certificate coefficient scales with `N`.
    pub fn for_problem(problem: &SaddleProblem, kind: SolverKind) -> Regime {
        let mu0 = 1.0;
        let nu0 = if kind.is_separable() {
            mu0 / problem.num_blocks() as f64
        } else {
            1.0
        };
        Regime {
            mu: problem.mu,
            nu: problem.nu,
            mu0,
            nu0,
        }
    }
}

/// How block sampling probabilities are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Uniform,
    Importance,
}

impl Sampling {
    pub fn tag(self) -> &'static str {
        match self {
            Sampling::Uniform => "uniform",
            Sampling::Importance => "importance",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Sampling> {
        match tag {
            "uniform" => Some(Sampling::Uniform),
            "importance" => Some(Sampling::Importance),
            _ => None,
        }
    }
}

/// Block sampling distributions and prox anchor weights, together with
/// the derived coupling constants the step-size conditions depend on.
///
/// `p` draws the block used by the primal gradient estimate, `q` the block
/// used by the dual value estimate, `r` and `s` the refresh probabilities
/// of the primal and dual anchor tables, and `gamma` weights the anchor
/// terms inside the primal prox step.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `sqrt(max_I G_I^2 / p_I)`.
    pub g_p: f64,
    /// `sqrt(max_I L_I^2 / (p_I gamma_I))`.
    pub l_p_gamma: f64,
    /// `sqrt(max_I G_I^2 / (q_I gamma_I))`.
    pub g_q_gamma: f64,
    /// `sqrt(max_I G_I^2 / (p_I s_I^2))`.
    pub g_p_s: f64,
    /// `sqrt(sum_I L_I^2 / (p_I r_I^2))`.
    pub l_p_r: f64,
    /// `sqrt(sum_I G_I^2 / (q_I r_I^2))`.
    pub g_q_r: f64,
}

/// `max_I num_I^2 / den_I`, with `0/0 = 0` so that blocks whose constant
/// vanishes contribute nothing regardless of their sampling mass.
fn ratio_max(num: &[f64], den: impl Fn(usize) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, &v) in num.iter().enumerate() {
        if v > 0.0 {
            let d = den(i);
            let term = if d > 0.0 { v * v / d } else { f64::INFINITY };
            worst = worst.max(term);
        }
    }
    worst
}

/// `sum_I num_I^2 / den_I` with the same `0/0 = 0` convention.
fn ratio_sum(num: &[f64], den: impl Fn(usize) -> f64) -> f64 {
    let mut total = 0.0f64;
    for (i, &v) in num.iter().enumerate() {
        if v > 0.0 {
            let d = den(i);
            total += if d > 0.0 { v * v / d } else { f64::INFINITY };
        }
    }
    total
}

fn normalized(target: &[f64]) -> Option<Vec<f64>> {
    let sum: f64 = target.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        Some(target.iter().map(|v| v / sum).collect())
    } else {
        None
    }
}

fn uniform_vec(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// `v <- v/2 + uniform/2`, which keeps every entry at or above `1/(2N)`
/// while preserving half of the proportional shape.
fn floor_mix(v: &mut [f64]) {
    let n = v.len() as f64;
    for entry in v.iter_mut() {
        *entry = 0.5 * *entry + 0.5 / n;
    }
}

impl SamplingPlan {
    /// All five vectors uniform.
    pub fn uniform(partition: &BlockPartition) -> Result<SamplingPlan> {
        let n = partition.num_blocks();
        let u = uniform_vec(n);
        SamplingPlan::from_vectors(partition, u.clone(), u.clone(), u.clone(), u.clone(), u)
    }

    /// Importance sampling proportional to the block constants, with the
    /// proportionality target depending on the solver kind:
    ///
    /// * historic stochastic: `p, gamma ∝ lambda`, `q ∝ G`, `r, s` uniform;
    /// * replacement stochastic: `p, r ∝ sqrt(lambda)`, `q, s ∝ sqrt(G)`,
    ///   with `r` and `s` mixed half-and-half with uniform so every entry
    ///   stays at or above `1/(2N)`;
    /// * historic separable: `p ∝ lambda`, `gamma ∝ L`, the rest uniform;
    /// * replacement separable: `p ∝ sqrt(lambda)`, `r ∝ sqrt(L)` mixed
    ///   with uniform, the rest uniform.
    ///
    /// An all-zero proportionality target falls back to uniform. The full
    /// deterministic solver samples nothing and gets the uniform plan.
    pub fn importance(partition: &BlockPartition, kind: SolverKind) -> Result<SamplingPlan> {
        let n = partition.num_blocks();
        let u = uniform_vec(n);
        let lambda = &partition.block_lambda;
        let g = &partition.block_g;
        let l = &partition.block_l;
        let sqrt_of = |v: &[f64]| v.iter().map(|x| x.sqrt()).collect::<Vec<f64>>();

        let prop = |target: &[f64]| normalized(target).unwrap_or_else(|| u.clone());

        let (p, q, r, s, gamma) = match kind {
            SolverKind::FullDeterministic => {
                (u.clone(), u.clone(), u.clone(), u.clone(), u.clone())
            }
            SolverKind::StochasticHistoric => (
                prop(lambda),
                prop(g),
                u.clone(),
                u.clone(),
                prop(lambda),
            ),
            SolverKind::StochasticReplacement => {
                let mut r = prop(&sqrt_of(lambda));
                let mut s = prop(&sqrt_of(g));
                floor_mix(&mut r);
                floor_mix(&mut s);
                (prop(&sqrt_of(lambda)), prop(&sqrt_of(g)), r, s, u.clone())
            }
            SolverKind::SeparableHistoric => {
                (prop(lambda), u.clone(), u.clone(), u.clone(), prop(l))
            }
            SolverKind::SeparableReplacement => {
                let mut r = prop(&sqrt_of(l));
                floor_mix(&mut r);
                (prop(&sqrt_of(lambda)), u.clone(), r, u.clone(), u.clone())
            }
        };
        SamplingPlan::from_vectors(partition, p, q, r, s, gamma)
    }

    /// Builds a plan from explicit vectors, validating normalization and
    /// positivity and computing the derived constants.
    pub fn from_vectors(
        partition: &BlockPartition,
        p: Vec<f64>,
        q: Vec<f64>,
        r: Vec<f64>,
        s: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<SamplingPlan> {
        let n = partition.num_blocks();
        if partition.block_lambda.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateConstants);
        }
        for (name, v) in [("p", &p), ("q", &q), ("r", &r), ("s", &s), ("gamma", &gamma)] {
            if v.len() != n {
                return Err(Error::Config(format!(
                    "sampling vector {name} has length {} but the partition has {n} blocks",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Config(format!(
                    "sampling vector {name} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = v.iter().sum();
            if (sum - 1.0).abs() > PLAN_SUM_TOL {
                return Err(Error::Config(format!(
                    "sampling vector {name} sums to {sum}, expected 1"
                )));
            }
        }
        let g = &partition.block_g;
        let l = &partition.block_l;
        for i in 0..n {
            if partition.block_lambda[i] > 0.0 && p[i] == 0.0 {
                return Err(Error::Config(format!(
                    "p[{i}] = 0 but block {i} has a nonzero coupling constant"
                )));
            }
            if g[i] > 0.0 && (q[i] == 0.0 || s[i] == 0.0) {
                return Err(Error::Config(format!(
                    "q[{i}] or s[{i}] = 0 but block {i} has a nonzero gradient bound"
                )));
            }
            if l[i] > 0.0 && (r[i] == 0.0 || gamma[i] == 0.0) {
                return Err(Error::Config(format!(
                    "r[{i}] or gamma[{i}] = 0 but block {i} has a nonzero smoothness bound"
                )));
            }
        }

        let g_p = ratio_max(g, |i| p[i]).sqrt();
        let l_p_gamma = ratio_max(l, |i| p[i] * gamma[i]).sqrt();
        let g_q_gamma = ratio_max(g, |i| q[i] * gamma[i]).sqrt();
        let g_p_s = ratio_max(g, |i| p[i] * s[i] * s[i]).sqrt();
        let l_p_r = ratio_sum(l, |i| p[i] * r[i] * r[i]).sqrt();
        let g_q_r = ratio_sum(g, |i| q[i] * r[i] * r[i]).sqrt();

        Ok(SamplingPlan {
            p,
            q,
            r,
            s,
            gamma,
            g_p,
            l_p_gamma,
            g_q_gamma,
            g_p_s,
            l_p_r,
            g_q_r,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.p.len()
    }

    /// The separable methods reuse `g_p` as their coupling constant.
    pub fn g_p_sep(&self) -> f64 {
        self.g_p
    }

    pub fn min_r(&self) -> f64 {
        self.r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_s(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether the refresh probabilities satisfy the `1/(2N)` floor the
    /// replacement-strategy analysis assumes.
    pub fn replacement_floor_ok(&self) -> bool {
        let floor = 1.0 / (2.0 * self.num_blocks() as f64) - PLAN_SUM_TOL;
        self.min_r() >= floor && self.min_s() >= floor
    }
}

/// Dispatcher used by configuration loading.
pub fn make_plan(
    partition: &BlockPartition,
    kind: SolverKind,
    sampling: Sampling,
) -> Result<SamplingPlan> {
    match sampling {
        Sampling::Uniform => SamplingPlan::uniform(partition),
        Sampling::Importance => SamplingPlan::importance(partition, kind),
    }
}

/// Emission rule for the averaging sequence past `k = 1`.
#[derive(Debug, Clone)]
enum Pattern {
    /// `a_k = a_1`.
    Constant,
    /// `a_k = alpha A_{k-1}`.
    Geometric { alpha: f64 },
    /// `a_k = min(ramp k, geo A_{k-1}, step_cap a_{k-1})`.
    RampGeo { ramp: f64, geo: f64, step_cap: f64 },
    /// `a_k = min(ramp k, cap, step_cap a_{k-1})`.
    RampConst { ramp: f64, cap: f64, step_cap: f64 },
    /// Provided sequence; cannot be extended.
    Explicit,
}

/// Emission rule for a balancing-weight sequence.
#[derive(Debug, Clone)]
enum WeightRule {
    Zero,
    Constant(f64),
    /// `early` through index `switch`, `late` from `switch + 1` on.
    Piecewise { early: f64, late: f64, switch: usize },
    /// `w_k = bar level0 / (A_{k-1} strength + level0)`: holds the product
    /// `w_k (A_{k-1} strength + level0)` at exactly `bar level0` for all k.
    LevelDecay { bar: f64, strength: f64, level0: f64 },
}

impl WeightRule {
    /// Weight at index `k`; `big_a_prev` is `A_{k-1}` (zero at `k = 0`).
    fn at(&self, k: usize, big_a_prev: f64) -> f64 {
        match *self {
            WeightRule::Zero => 0.0,
            WeightRule::Constant(w) => w,
            WeightRule::Piecewise { early, late, switch } => {
                if k <= switch {
                    early
                } else {
                    late
                }
            }
            WeightRule::LevelDecay { bar, strength, level0 } => {
                bar * level0 / (big_a_prev * strength + level0)
            }
        }
    }
}

/// A materialized averaging schedule: `a_k`, exact running sums `A_k`, and
/// balancing weights `w^P_k`, `w^D_k`, all indexed from 0 with `a_0 = 0`.
#[derive(Debug, Clone)]
pub struct Schedule {
    kind: SolverKind,
    n_blocks: usize,
    alpha: f64,
    alpha_binding: &'static str,
    pattern: Pattern,
    wp_rule: WeightRule,
    wd_rule: WeightRule,
    a: Vec<f64>,
    big_a: Vec<f64>,
    wp: Vec<f64>,
    wd: Vec<f64>,
}

impl Schedule {
    /// Wraps explicit sequences, e.g. for certifying a hand-rolled
    /// schedule. `a[0]` must be zero and later entries positive; `wp` and
    /// `wd` must have the same length as `a`. The schedule cannot be
    /// extended past the provided length.
    pub fn from_sequences(
        kind: SolverKind,
        n_blocks: usize,
        alpha: f64,
        a: Vec<f64>,
        wp: Vec<f64>,
        wd: Vec<f64>,
    ) -> Result<Schedule> {
        if a.len() < 2 {
            return Err(Error::Config("schedule needs at least a_0 and a_1".into()));
        }
        if a[0] != 0.0 {
            return Err(Error::Config(format!("a_0 must be 0, got {}", a[0])));
        }
        if a[1..].iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "averaging weights a_k must be positive and finite for k >= 1".into(),
            ));
        }
        if wp.len() != a.len() || wd.len() != a.len() {
            return Err(Error::Config(
                "weight sequences must have the same length as the averaging sequence".into(),
            ));
        }
        if n_blocks == 0 {
            return Err(Error::Config("schedule needs at least one block".into()));
        }
        let mut big_a = Vec::with_capacity(a.len());
        let mut sum = 0.0;
        for &v in &a {
            sum += v;
            big_a.push(sum);
        }
        Ok(Schedule {
            kind,
            n_blocks,
            alpha,
            alpha_binding: "explicit",
            pattern: Pattern::Explicit,
            wp_rule: WeightRule::Zero,
            wd_rule: WeightRule::Zero,
            a,
            big_a,
            wp,
            wd,
        })
    }

    fn from_pattern(
        kind: SolverKind,
        n_blocks: usize,
        alpha: f64,
        binding: &'static str,
        a1: f64,
        pattern: Pattern,
        wp_rule: WeightRule,
        wd_rule: WeightRule,
        len: usize,
    ) -> Schedule {
        let mut sched = Schedule {
            kind,
            n_blocks,
            alpha,
            alpha_binding: binding,
            pattern,
            wp_rule,
            wd_rule,
            a: vec![0.0, a1],
            big_a: vec![0.0, a1],
            wp: Vec::new(),
            wd: Vec::new(),
        };
        sched.materialize(len);
        sched
    }

    fn materialize(&mut self, len: usize) {
        while self.a.len() <= len {
            let k = self.a.len();
            let prev_a = self.a[k - 1];
            let prev_big = self.big_a[k - 1];
            let next = match self.pattern {
                Pattern::Constant => self.a[1],
                Pattern::Geometric { alpha } => alpha * prev_big,
                Pattern::RampGeo { ramp, geo, step_cap } => {
                    (ramp * k as f64).min(geo * prev_big).min(step_cap * prev_a)
                }
                Pattern::RampConst { ramp, cap, step_cap } => {
                    (ramp * k as f64).min(cap).min(step_cap * prev_a)
                }
                Pattern::Explicit => break,
            };
            self.a.push(next);
            self.big_a.push(prev_big + next);
        }
        for k in self.wp.len()..=len.max(self.a.len() - 1) {
            let prev_big = if k == 0 { 0.0 } else { self.big_a[k - 1] };
            self.wp.push(self.wp_rule.at(k, prev_big));
            self.wd.push(self.wd_rule.at(k, prev_big));
        }
    }

    /// Extends the materialized sequences to index `len`. Explicit
    /// schedules cannot grow.
    pub fn extend_to(&mut self, len: usize) -> Result<()> {
        if matches!(self.pattern, Pattern::Explicit) && self.a.len() <= len {
            return Err(Error::Config(
                "explicit schedule cannot be extended past its provided length".into(),
            ));
        }
        self.materialize(len);
        Ok(())
    }

    /// Largest index with materialized values.
    pub fn max_index(&self) -> usize {
        self.a.len() - 1
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn num_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Growth hyperparameter actually in force: the geometric rate in the
    /// doubly strongly convex regime, otherwise the scale applied to the
    /// nominal ramp coefficients.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Which constraint fixed `alpha`: a growth cap, the certificate
    /// conditions themselves, exact analytic constants, or a user override.
    pub fn alpha_binding(&self) -> &'static str {
        self.alpha_binding
    }

    pub fn a(&self, k: usize) -> f64 {
        self.a[k]
    }

    pub fn big_a(&self, k: usize) -> f64 {
        self.big_a[k]
    }

    pub fn wp(&self, k: usize) -> f64 {
        self.wp[k]
    }

    pub fn wd(&self, k: usize) -> f64 {
        self.wd[k]
    }
}

/// Problem constants a certificate is evaluated against: aggregate `(G, L)`
/// for the full method, a sampling plan for the block methods.
#[derive(Debug, Clone)]
pub enum CertifySource<'a> {
    Aggregate { g: f64, l: f64 },
    Plan(&'a SamplingPlan),
}

/// One violated inequality: `lhs <= rhs` failed at index `k`.
#[derive(Debug, Clone)]
pub struct ViolationSite {
    pub condition: &'static str,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of [`certify_schedule`]: the number of inequalities evaluated
/// and violated, the worst relative violation, and where it occurred.
#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub kind: SolverKind,
    pub horizon: usize,
    /// Horizon actually checked; smaller than `horizon` only when the
    /// schedule was materialized shorter.
    pub effective_horizon: usize,
    pub checked: usize,
    pub violations: usize,
    pub max_violation: f64,
    pub worst: Option<ViolationSite>,
}

impl CertifyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Checker {
    checked: usize,
    violations: usize,
    max_violation: f64,
    worst: Option<ViolationSite>,
}

impl Checker {
    fn new() -> Checker {
        Checker {
            checked: 0,
            violations: 0,
            max_violation: 0.0,
            worst: None,
        }
    }

    /// Requires `lhs <= rhs` up to certificate tolerance.
    fn require(&mut self, condition: &'static str, k: usize, lhs: f64, rhs: f64) {
        self.checked += 1;
        let slack = lhs - rhs;
        let tol = CERT_ABS_TOL + CERT_REL_TOL * rhs.abs().max(lhs.abs().min(1e300));
        if slack > tol || lhs.is_nan() || (lhs.is_infinite() && lhs > 0.0) {
            self.violations += 1;
            let rel = if rhs.abs() > 0.0 {
                slack / rhs.abs()
            } else {
                f64::INFINITY
            };
            if rel > self.max_violation || self.worst.is_none() {
                self.max_violation = self.max_violation.max(rel);
                self.worst = Some(ViolationSite {
                    condition,
                    k,
                    lhs,
                    rhs,
                });
            }
        }
    }
}

/// Per-kind denominator constants for the three step-size bounds. A zero
/// problem constant turns the corresponding bound off (infinite).
struct RateConsts {
    /// Coupling bound: pairs `(A_k mu + mu0)` with `(A_{k-1} nu + nu0)`.
    g_den: f64,
    /// Smoothness bound: pairs `(A_k mu + mu0)` with `(A_{k-1} mu + mu0)`.
    l_den: f64,
    /// Dual coupling bound: pairs `(A_k nu + nu0)` with `(A_{k-1} mu + mu0)`.
    /// Only the non-separable kinds have one.
    q_den: f64,
}

fn rate_consts(kind: SolverKind, source: &CertifySource) -> Result<RateConsts> {
    let den = |c: f64, scale: f64| if c > 0.0 { scale * c } else { f64::INFINITY };
    match (kind, source) {
        (SolverKind::FullDeterministic, CertifySource::Aggregate { g, l }) => Ok(RateConsts {
            g_den: den(*g, std::f64::consts::SQRT_2),
            l_den: den(*l, 2.0),
            q_den: f64::INFINITY,
        }),
        (SolverKind::StochasticHistoric, CertifySource::Plan(plan)) => Ok(RateConsts {
            g_den: den(plan.g_p, 4.0),
            l_den: den(plan.l_p_gamma, 4.0 * std::f64::consts::SQRT_2),
            q_den: den(plan.g_q_gamma, 4.0),
        }),
        (SolverKind::StochasticReplacement, CertifySource::Plan(plan)) => Ok(RateConsts {
            g_den: den(plan.g_p_s, 10.0),
            l_den: den(plan.l_p_r, 10.0),
            q_den: den(plan.g_q_r, 15.0),
        }),
        (SolverKind::SeparableHistoric, CertifySource::Plan(plan)) => Ok(RateConsts {
            g_den: den(plan.g_p, 2.0 * std::f64::consts::SQRT_2),
            l_den: den(plan.l_p_gamma, 4.0),
            q_den: f64::INFINITY,
        }),
        (SolverKind::SeparableReplacement, CertifySource::Plan(plan)) => Ok(RateConsts {
            g_den: den(plan.g_p, 5.0 * std::f64::consts::SQRT_2),
            l_den: den(plan.l_p_r, 10.0),
            q_den: f64::INFINITY,
        }),
        (SolverKind::FullDeterministic, CertifySource::Plan(_)) => Err(Error::Config(
            "full deterministic schedules certify against aggregate constants, not a plan".into(),
        )),
        (_, CertifySource::Aggregate { .. }) => Err(Error::Config(
            "block solver schedules certify against a sampling plan".into(),
        )),
    }
}

/// The three step-size bounds at index `k >= 1`. `wp_prev`/`wd_prev` are
/// the weights entering the historic bounds (index `k-1` for stochastic,
/// `k` for separable).
fn rate_bounds(
    kind: SolverKind,
    rc: &RateConsts,
    regime: &Regime,
    amu_k: f64,
    amu_prev: f64,
    anu_k: f64,
    anu_prev: f64,
    wp_eff: f64,
    wd_eff: f64,
) -> [f64; 3] {
    let _ = regime;
    let sqrt_div = |num: f64, den: f64| {
        if den.is_infinite() {
            f64::INFINITY
        } else {
            num.sqrt() / den
        }
    };
    match kind {
        SolverKind::FullDeterministic | SolverKind::StochasticReplacement => [
            sqrt_div(amu_k * anu_prev, rc.g_den),
            sqrt_div(amu_k * amu_prev, rc.l_den),
            sqrt_div(anu_k * amu_prev, rc.q_den),
        ],
        SolverKind::StochasticHistoric => [
            sqrt_div(wd_eff * amu_k * anu_prev, rc.g_den),
            sqrt_div(wp_eff * amu_k * amu_prev, rc.l_den),
            sqrt_div(wp_eff * anu_k * amu_prev, rc.q_den),
        ],
        SolverKind::SeparableHistoric => [
            sqrt_div((1.0 - wp_eff) * amu_k * anu_prev, rc.g_den),
            sqrt_div(wp_eff * (1.0 - wp_eff) * amu_k * amu_prev, rc.l_den),
            f64::INFINITY,
        ],
        SolverKind::SeparableReplacement => [
            sqrt_div(amu_k * anu_prev, rc.g_den),
            sqrt_div(amu_k * amu_prev, rc.l_den),
            f64::INFINITY,
        ],
    }
}

/// First-step size each kind's analysis prescribes, from the base levels
/// and the initial weights.
fn first_step(kind: SolverKind, rc: &RateConsts, regime: &Regime, wp0: f64, wd0: f64) -> f64 {
    let (mu0, nu0) = (regime.mu0, regime.nu0);
    let div = |num: f64, den: f64| if den.is_finite() { num / den } else { f64::INFINITY };
    let candidates = match kind {
        SolverKind::FullDeterministic => [
            div((mu0 * nu0).sqrt(), rc.g_den),
            div(mu0, rc.l_den),
            f64::INFINITY,
        ],
        SolverKind::StochasticHistoric => [
            div((wd0 * mu0 * nu0).sqrt(), rc.g_den),
            div(wp0.sqrt() * mu0, rc.l_den),
            div((wp0 * mu0 * nu0).sqrt(), rc.q_den),
        ],
        SolverKind::StochasticReplacement => {
            // The first step uses 1/15 on every branch, tighter than the
            // per-step bounds of 1/10 on the first two.
            let g_big = if rc.g_den.is_finite() || rc.q_den.is_finite() {
                let a = if rc.g_den.is_finite() { rc.g_den / 10.0 } else { 0.0 };
                let b = if rc.q_den.is_finite() { rc.q_den / 15.0 } else { 0.0 };
                a.max(b)
            } else {
                f64::INFINITY
            };
            [
                div((mu0 * nu0).sqrt(), 15.0 * g_big),
                div(mu0, 1.5 * rc.l_den),
                f64::INFINITY,
            ]
        }
        SolverKind::SeparableHistoric => [
            div(((1.0 - wp0) * mu0 * nu0).sqrt(), rc.g_den),
            div((wp0 * (1.0 - wp0)).sqrt() * mu0, rc.l_den),
            f64::INFINITY,
        ],
        SolverKind::SeparableReplacement => [
            div((mu0 * nu0).sqrt(), rc.g_den),
            div(mu0, rc.l_den),
            f64::INFINITY,
        ],
    };
    candidates.into_iter().fold(f64::INFINITY, f64::min)
}

/// Exact backward evaluation of the decay sums
/// `S(l) = sum_{k'>=0} w_{l+k'+1} A_{l+k'} (1 - 1/N)^{k'}`,
/// seeded at the last materialized index with the closed-form geometric
/// tail `w A / (1 - g rho)`, where `g` bounds the growth ratio of `A`
/// beyond the materialized range. The bound is exact for geometric
/// schedules and conservative for the ramp patterns, whose ratios are
/// non-increasing. `g rho >= 1` marks the sum as divergent.
fn decay_sums(big_a: &[f64], w: &[f64], n_blocks: usize) -> Vec<f64> {
    let len = big_a.len() - 1;
    let rho = 1.0 - 1.0 / n_blocks as f64;
    let window = 64.min(len.saturating_sub(1)).max(1);
    let mut growth = 1.0f64;
    for j in (len - window + 1)..=len {
        if big_a[j - 1] > 0.0 {
            growth = growth.max(big_a[j] / big_a[j - 1]);
        }
    }
    let mut sums = vec![0.0; len + 1];
    let seed = if growth * rho >= 1.0 - 1e-12 {
        f64::INFINITY
    } else {
        w[len] * big_a[len - 1] / (1.0 - growth * rho)
    };
    sums[len - 1] = seed;
    for l in (1..len - 1).rev() {
        sums[l] = w[l + 1] * big_a[l] + rho * sums[l + 1];
    }
    sums
}

/// Evaluates every hypothesis of the target analysis over
/// `k = 1..=horizon` and reports the violations. The conditions are, by
/// kind:
///
/// * full: the two-branch step bound;
/// * stochastic historic: the weighted three-branch step bound, the
///   first-step bound, weight range `[0, 1/2]` and monotonicity, the
///   primal/dual decay sums (when `mu`/`nu > 0`), and the growth cap
///   `A_k <= (1 + 1/(2N))^k a_1` (when `mu > 0` or `nu > 0`);
/// * stochastic replacement: the three-branch step bound, the first-step
///   bound, and the two step-ratio conditions;
/// * separable historic: the weighted two-branch step bound, the
///   first-step bound, weight range `[0, 1)` and monotonicity, the primal
///   decay sum and growth cap (when `mu > 0`);
/// * separable replacement: the two-branch step bound, the first-step
///   bound, and the primal step-ratio condition.
///
/// Decay sums use values past `horizon`; schedules should be materialized
/// a few hundred indices beyond it or the tail bound turns conservative.
pub fn certify_schedule(
    schedule: &Schedule,
    regime: &Regime,
    source: &CertifySource,
    horizon: usize,
) -> Result<CertifyReport> {
    let rc = rate_consts(schedule.kind, source)?;
    let kind = schedule.kind;
    let n = schedule.n_blocks;
    let len = schedule.max_index();
    let h = horizon.min(len);
    let mut ck = Checker::new();
    let (mu, nu, mu0, nu0) = (regime.mu, regime.nu, regime.mu0, regime.nu0);

    // First-step bound. The full method has none: its step condition at
    // k = 1 already covers a_1.
    if kind != SolverKind::FullDeterministic {
        let a1_bound = first_step(kind, &rc, regime, schedule.wp[0], schedule.wd[0]);
        ck.require("first-step-bound", 1, schedule.a[1], a1_bound);
    }

    // Step bounds. Stochastic-historic weights enter at index k-1,
    // separable-historic at index k.
    let start = if kind == SolverKind::FullDeterministic { 1 } else { 2 };
    for k in start..=h {
        let amu_k = schedule.big_a[k] * mu + mu0;
        let amu_prev = schedule.big_a[k - 1] * mu + mu0;
        let anu_k = schedule.big_a[k] * nu + nu0;
        let anu_prev = schedule.big_a[k - 1] * nu + nu0;
        let (wp_eff, wd_eff) = match kind {
            SolverKind::SeparableHistoric => (schedule.wp[k], 0.0),
            _ => (schedule.wp[k - 1], schedule.wd[k - 1]),
        };
        let [bg, bl, bq] = rate_bounds(
            kind, &rc, regime, amu_k, amu_prev, anu_k, anu_prev, wp_eff, wd_eff,
        );
        ck.require("coupling-rate", k, schedule.a[k], bg);
        ck.require("smoothness-rate", k, schedule.a[k], bl);
        if bq.is_finite() {
            ck.require("dual-coupling-rate", k, schedule.a[k], bq);
        }
    }

    // Weight structure.
    if kind.is_historic() {
        let wp_hi = if kind == SolverKind::SeparableHistoric {
            1.0 - f64::EPSILON
        } else {
            0.5
        };
        for k in 0..=h {
            ck.require("weight-range", k, schedule.wp[k], wp_hi);
            ck.require("weight-range", k, -schedule.wp[k], 0.0);
            if k > 0 {
                ck.require("weight-monotone", k, schedule.wp[k], schedule.wp[k - 1]);
            }
            if kind == SolverKind::StochasticHistoric {
                ck.require("weight-range", k, schedule.wd[k], 0.5);
                ck.require("weight-range", k, -schedule.wd[k], 0.0);
                if k > 0 {
                    ck.require("weight-monotone", k, schedule.wd[k], schedule.wd[k - 1]);
                }
            }
        }
    }

    // Decay sums and growth cap for the historic kinds.
    if kind.is_historic() {
        let cap_active = match kind {
            SolverKind::StochasticHistoric => mu > 0.0 || nu > 0.0,
            _ => mu > 0.0,
        };
        if cap_active {
            let base = 1.0 + 1.0 / (2.0 * n as f64);
            let mut capv = 1.0;
            for k in 1..=h {
                capv *= base;
                ck.require("growth-cap", k, schedule.big_a[k], capv * schedule.a[1]);
            }
        }
        if mu > 0.0 {
            let sums = decay_sums(&schedule.big_a, &schedule.wp, n);
            for l in 1..=h.min(len.saturating_sub(2)) {
                let rhs = schedule.wp[l] * schedule.big_a[l] + schedule.a[l];
                ck.require("primal-decay", l, sums[l] / n as f64, rhs);
            }
        }
        if nu > 0.0 && kind == SolverKind::StochasticHistoric {
            let sums = decay_sums(&schedule.big_a, &schedule.wd, n);
            for l in 1..=h.min(len.saturating_sub(2)) {
                let rhs = schedule.wd[l] * schedule.big_a[l] + schedule.a[l];
                ck.require("dual-decay", l, sums[l] / n as f64, rhs);
            }
        }
    }

    // Step-ratio conditions for the replacement kinds.
    if kind.is_replacement() {
        let (min_r, min_s) = match source {
            CertifySource::Plan(plan) => (plan.min_r(), plan.min_s()),
            CertifySource::Aggregate { .. } => unreachable!("checked by rate_consts"),
        };
        let fac_primal = match kind {
            SolverKind::StochasticReplacement => 1.0 + min_r.min(min_s) / 5.0,
            _ => 1.0 + min_r / 5.0,
        };
        let fac_dual = 1.0 + min_r / 5.0;
        for k in 2..=h {
            let lhs_p = schedule.a[k] * schedule.a[k]
                / (schedule.big_a[k] * mu + mu0);
            let rhs_p = fac_primal * schedule.a[k - 1] * schedule.a[k - 1]
                / (schedule.big_a[k - 1] * mu + mu0);
            ck.require("step-ratio-primal", k, lhs_p, rhs_p);
            if kind == SolverKind::StochasticReplacement {
                let lhs_d = schedule.a[k] * schedule.a[k]
                    / (schedule.big_a[k] * nu + nu0);
                let rhs_d = fac_dual * schedule.a[k - 1] * schedule.a[k - 1]
                    / (schedule.big_a[k - 1] * nu + nu0);
                ck.require("step-ratio-dual", k, lhs_d, rhs_d);
            }
        }
    }

    Ok(CertifyReport {
        kind,
        horizon,
        effective_horizon: h,
        checked: ck.checked,
        violations: ck.violations,
        max_violation: ck.max_violation,
        worst: ck.worst,
    })
}

/// Default balancing weights per kind and regime.
fn weight_rules(kind: SolverKind, regime: &Regime, n: usize) -> (WeightRule, WeightRule) {
    let nf = n as f64;
    match kind {
        SolverKind::FullDeterministic
        | SolverKind::StochasticReplacement
        | SolverKind::SeparableReplacement => (WeightRule::Zero, WeightRule::Zero),
        SolverKind::StochasticHistoric => {
            match (regime.mu > 0.0, regime.nu > 0.0) {
                (true, true) => {
                    let w = (1.0 / nf).min(0.5);
                    (WeightRule::Constant(w), WeightRule::Constant(w))
                }
                // The primal weight drops after the ramp branch takes
                // over; the switch index is detected during emission.
                (true, false) => (
                    WeightRule::Constant((1.0 / nf).min(0.5)),
                    WeightRule::Constant(0.5),
                ),
                (false, true) => (
                    WeightRule::Constant(0.5),
                    WeightRule::Constant((1.0 / (nf * nf)).min(0.5)),
                ),
                (false, false) => (WeightRule::Constant(0.5), WeightRule::Constant(0.5)),
            }
        }
        SolverKind::SeparableHistoric => {
            let wp = match (regime.mu > 0.0, regime.nu > 0.0) {
                (true, _) => WeightRule::Constant((1.0 / nf).min(0.5)),
                _ => WeightRule::Constant(0.5),
            };
            (wp, WeightRule::Zero)
        }
    }
}

/// Weight applied after the ramp branch becomes binding in the
/// `(mu > 0, nu = 0)` regime: small enough that the decay sums still
/// telescope once `A_k` grows quadratically.
fn post_switch_weight(n: usize, switch: usize) -> f64 {
    let nf = n as f64;
    1.0 / (nf + nf * nf / switch as f64 + 0.5 / switch as f64)
}

/// Nominal ramp coefficient for a bound of shape
/// `a_k <= sqrt(W (A mu_side + base_level) other_level) / den`: substituting
/// `a_k = c k`, `A_k ~ c k^2 / 2` gives the self-consistent
/// `c = W mu_side other_level / (2 den^2)`.
fn ramp_coeff(w: f64, mu_side: f64, other_level: f64, den: f64) -> f64 {
    if den.is_finite() {
        w * mu_side * other_level / (2.0 * den * den)
    } else {
        f64::INFINITY
    }
}

/// Fraction of the initial-iterate distance budget the historic anchor
/// weights are allowed to spend under geometric growth.
const BALANCE_SAFETY: f64 = 0.9;

/// Weight rules for the historic kinds when both sides grow geometrically.
/// An anchor term at index `k` spends `w_k (A_{k-1} mu + mu0)` of
/// comparator-distance budget; holding that product constant makes the
/// expected refresh flow balance exactly at every iterate after the first,
/// and the first iterate absorbs at most an extra `a_1 mu`, capping the
/// product at `a_1 mu / (N - 1)` per side. The cap and `a_1` depend on
/// each other through the first-step bound, so iterate to the fixed point;
/// the square-root weight dependence of the bound makes the iteration
/// contract, and the safety fraction covers the terminal residual.
fn historic_strong_rules(
    kind: SolverKind,
    rc: &RateConsts,
    regime: &Regime,
    n: usize,
) -> (WeightRule, WeightRule, f64) {
    let nf = n as f64;
    let base = (1.0 / nf).min(0.5);
    let dual_anchored = matches!(kind, SolverKind::StochasticHistoric);
    let mut wp_bar = base;
    let mut wd_bar = if dual_anchored { base } else { 0.0 };
    let mut a1 = first_step(kind, rc, regime, wp_bar, wd_bar);
    if n > 1 && a1.is_finite() {
        for _ in 0..200 {
            let next_p = base.min(BALANCE_SAFETY * a1 * regime.mu / ((nf - 1.0) * regime.mu0));
            let next_d = if dual_anchored {
                base.min(BALANCE_SAFETY * a1 * regime.nu / ((nf - 1.0) * regime.nu0))
            } else {
                0.0
            };
            let next_a1 = first_step(kind, rc, regime, next_p, next_d);
            let settled = (next_p - wp_bar).abs() <= 1e-14 * wp_bar
                && (next_d - wd_bar).abs() <= 1e-14 * wd_bar.max(1.0)
                && (next_a1 - a1).abs() <= 1e-14 * a1;
            wp_bar = next_p;
            wd_bar = next_d;
            a1 = next_a1;
            if settled {
                break;
            }
        }
    }
    let wd_rule = if dual_anchored {
        WeightRule::LevelDecay { bar: wd_bar, strength: regime.nu, level0: regime.nu0 }
    } else {
        WeightRule::Zero
    };
    (
        WeightRule::LevelDecay { bar: wp_bar, strength: regime.mu, level0: regime.mu0 },
        wd_rule,
        a1,
    )
}

struct EmitSpec {
    kind: SolverKind,
    n: usize,
    len: usize,
}

/// Builds the candidate schedule for one value of the tunable parameter
/// `theta` (the geometric rate, or the scale on the ramp coefficients).
fn emit(
    spec: &EmitSpec,
    regime: &Regime,
    rc: &RateConsts,
    theta: f64,
    binding: &'static str,
) -> Schedule {
    let kind = spec.kind;
    let n = spec.n;
    let (wp_rule, wd_rule) = weight_rules(kind, regime, n);
    let wp0 = wp_rule.at(0);
    let wd0 = wd_rule.at(0);
    let a1 = first_step(kind, rc, regime, wp0, wd0);
    let (mu, nu, mu0, nu0) = (regime.mu, regime.nu, regime.mu0, regime.nu0);
    let step_cap = if kind.is_replacement() {
        1.0 + 1.0 / (30.0 * n as f64)
    } else {
        f64::INFINITY
    };

    match (mu > 0.0, nu > 0.0) {
        (true, true) => Schedule::from_pattern(
            kind,
            n,
            theta,
            binding,
            a1,
            Pattern::Geometric { alpha: theta },
            wp_rule,
            wd_rule,
            spec.len,
        ),
        (false, false) => Schedule::from_pattern(
            kind,
            n,
            theta,
            binding,
            a1,
            Pattern::Constant,
            wp_rule,
            wd_rule,
            spec.len,
        ),
        (true, false) => {
            // Linear ramp against a geometric branch. The ramp coefficient
            // comes from the coupling bounds (whose dual level freezes at
            // nu0), the geometric rate from the smoothness bound.
            let geo_for = |wp_w: f64| {
                if rc.l_den.is_finite() {
                    theta
                        * match kind {
                            SolverKind::FullDeterministic
                            | SolverKind::StochasticReplacement
                            | SolverKind::SeparableReplacement => mu / rc.l_den,
                            SolverKind::StochasticHistoric => wp_w.sqrt() * mu / rc.l_den,
                            SolverKind::SeparableHistoric => {
                                (wp_w * (1.0 - wp_w)).sqrt() * mu / rc.l_den
                            }
                        }
                } else {
                    f64::INFINITY
                }
            };
            let ramp_for = |wp_late: f64| {
                theta
                    * match kind {
                        SolverKind::FullDeterministic => ramp_coeff(1.0, mu, nu0, rc.g_den),
                        SolverKind::StochasticHistoric => ramp_coeff(wd0, mu, nu0, rc.g_den)
                            .min(ramp_coeff(wp_late, mu, nu0, rc.q_den)),
                        SolverKind::StochasticReplacement => ramp_coeff(1.0, mu, nu0, rc.g_den)
                            .min(ramp_coeff(1.0, mu, nu0, rc.q_den)),
                        SolverKind::SeparableHistoric => {
                            ramp_coeff(1.0 - wp0, mu, nu0, rc.g_den)
                        }
                        SolverKind::SeparableReplacement => ramp_coeff(1.0, mu, nu0, rc.g_den),
                    }
            };
            // First pass detects where the ramp branch becomes binding so
            // the historic kinds can drop their primal weight there. The
            // second pass rebuilds both coefficients with the late weight,
            // which only shrinks them, so the early phase stays valid.
            let probe = Schedule::from_pattern(
                kind,
                n,
                theta,
                binding,
                a1,
                Pattern::RampGeo {
                    ramp: ramp_for(wp0),
                    geo: geo_for(wp0),
                    step_cap,
                },
                wp_rule.clone(),
                wd_rule.clone(),
                spec.len,
            );
            let mut switch = None;
            if kind.is_historic() {
                for k in 2..=probe.max_index() {
                    if ramp_for(wp0) * k as f64 <= geo_for(wp0) * probe.big_a[k - 1] {
                        switch = Some(k - 1);
                        break;
                    }
                }
            }
            let (wp_rule, ramp, geo) = match switch {
                Some(sw) if sw >= 1 => {
                    let late = post_switch_weight(n, sw);
                    (
                        WeightRule::Piecewise {
                            early: wp0,
                            late,
                            switch: sw,
                        },
                        ramp_for(late),
                        geo_for(late),
                    )
                }
                _ => (wp_rule, ramp_for(wp0), geo_for(wp0)),
            };
            Schedule::from_pattern(
                kind,
                n,
                theta,
                binding,
                a1,
                Pattern::RampGeo { ramp, geo, step_cap },
                wp_rule,
                wd_rule,
                spec.len,
            )
        }
        (false, true) => {
            // Linear ramp capped by the constant smoothness bound; the
            // ramp coefficient grows with the dual level A_k nu.
            let cap = if rc.l_den.is_finite() {
                theta
                    * match kind {
                        SolverKind::FullDeterministic
                        | SolverKind::StochasticReplacement
                        | SolverKind::SeparableReplacement => mu0 / rc.l_den,
                        SolverKind::StochasticHistoric => wp0.sqrt() * mu0 / rc.l_den,
                        SolverKind::SeparableHistoric => {
                            (wp0 * (1.0 - wp0)).sqrt() * mu0 / rc.l_den
                        }
                    }
            } else {
                f64::INFINITY
            };
            let ramp = theta
                * match kind {
                    SolverKind::FullDeterministic => ramp_coeff(1.0, nu, mu0, rc.g_den),
                    SolverKind::StochasticHistoric => ramp_coeff(wd0, nu, mu0, rc.g_den)
                        .min(ramp_coeff(wp0, nu, mu0, rc.q_den)),
                    SolverKind::StochasticReplacement => ramp_coeff(1.0, nu, mu0, rc.g_den)
                        .min(ramp_coeff(1.0, nu, mu0, rc.q_den)),
                    SolverKind::SeparableHistoric => ramp_coeff(1.0 - wp0, nu, mu0, rc.g_den),
                    SolverKind::SeparableReplacement => ramp_coeff(1.0, nu, mu0, rc.g_den),
                };
            Schedule::from_pattern(
                kind,
                n,
                theta,
                binding,
                a1,
                Pattern::RampConst { ramp, cap, step_cap },
                wp_rule,
                wd_rule,
                spec.len,
            )
        }
    }
}

/// Extra indices materialized past the certification horizon so the decay
/// sums rely on real values rather than the tail bound.
fn tail_margin(n: usize) -> usize {
    (20 * n).max(400)
}

/// Builds the averaging schedule for a solver kind, regime, and constant
/// source, self-certified over `horizon` steps.
///
/// The sequence shape follows the regime: `a_k = alpha A_{k-1}` when both
/// moduli are positive, `min(c1 k, c2 A_{k-1})` when only `mu > 0`,
/// `min(c3 k, c4)` when only `nu > 0`, and constant otherwise, with the
/// replacement kinds additionally clamped to at most `1 + 1/(30N)`
/// per-step growth. Coefficients the analysis fixes exactly are used
/// verbatim; where only their order is known, the largest scale passing
/// [`certify_schedule`] is found by bisection. `alpha_override` replaces
/// the tuned parameter and fails with [`Error::ScheduleCertificate`] if
/// the result does not certify.
pub fn make_schedule(
    kind: SolverKind,
    regime: &Regime,
    source: &CertifySource,
    alpha_override: Option<f64>,
    horizon: usize,
) -> Result<Schedule> {
    if horizon < 2 {
        return Err(Error::Config("schedule horizon must be at least 2".into()));
    }
    let rc = rate_consts(kind, source)?;
    if !rc.g_den.is_finite() && !rc.l_den.is_finite() && !rc.q_den.is_finite() {
        return Err(Error::DegenerateConstants);
    }
    let n = match source {
        CertifySource::Plan(plan) => plan.num_blocks(),
        CertifySource::Aggregate { .. } => 1,
    };
    if kind.is_replacement() {
        if let CertifySource::Plan(plan) = source {
            if !plan.replacement_floor_ok() {
                return Err(Error::Config(format!(
                    "replacement-kind plan needs min refresh probability >= 1/(2N) = {:.6}, got r {:.6}, s {:.6}",
                    1.0 / (2.0 * n as f64),
                    plan.min_r(),
                    plan.min_s(),
                )));
            }
        }
    }
    let spec = EmitSpec {
        kind,
        n,
        len: horizon + tail_margin(n),
    };
    let nf = n as f64;

    let certified = |sched: &Schedule| -> Result<bool> {
        Ok(certify_schedule(sched, regime, source, horizon)?.passed())
    };

    let geometric = regime.mu > 0.0 && regime.nu > 0.0;

    // Exact analytic parameter when the analysis pins it down: the full
    // method's geometric rate (and its constant first step, theta-free).
    if kind == SolverKind::FullDeterministic && geometric && alpha_override.is_none() {
        let g_branch = if rc.g_den.is_finite() {
            (regime.mu * regime.nu).sqrt() / rc.g_den
        } else {
            f64::INFINITY
        };
        let l_branch = if rc.l_den.is_finite() {
            regime.mu / rc.l_den
        } else {
            f64::INFINITY
        };
        let alpha = g_branch.min(l_branch);
        let sched = emit(&spec, regime, &rc, alpha, "strong-convexity-ratio");
        if certified(&sched)? {
            return Ok(sched);
        }
        return Err(Error::ScheduleCertificate(format!(
            "analytic geometric rate {alpha:.6e} failed its own certificate",
        )));
    }

    if let Some(theta) = alpha_override {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Config(format!(
                "alpha override must be positive and finite, got {theta}"
            )));
        }
        let sched = emit(&spec, regime, &rc, theta, "user-override");
        let report = certify_schedule(&sched, regime, source, horizon)?;
        if report.passed() {
            return Ok(sched);
        }
        let site = report.worst.as_ref().map_or_else(
            || "unknown condition".to_string(),
            |w| format!("{} at k = {} ({:.6e} > {:.6e})", w.condition, w.k, w.lhs, w.rhs),
        );
        return Err(Error::ScheduleCertificate(format!(
            "alpha override {theta:.6e} violates {} condition(s); worst: {site}",
            report.violations,
        )));
    }

    // Bracket top for the tunable parameter.
    let (hi, cap_label): (f64, &'static str) = if geometric {
        match kind {
            SolverKind::FullDeterministic => unreachable!("handled above"),
            SolverKind::StochasticHistoric | SolverKind::SeparableHistoric => {
                let cap = if n > 1 {
                    (1.0 / (2.0 * nf)).min(1.0 / (nf - 1.0))
                } else {
                    0.5
                };
                (cap, "growth-cap")
            }
            SolverKind::StochasticReplacement | SolverKind::SeparableReplacement => {
                (1.0 / (30.0 * nf), "step-ratio-cap")
            }
        }
    } else {
        (1.0, "nominal-coefficients")
    };

    let top = emit(&spec, regime, &rc, hi, cap_label);
    if certified(&top)? {
        return Ok(top);
    }
    let mut lo = 0.0f64;
    let mut lo_sched: Option<Schedule> = None;
    let mut hi_f = hi;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi_f);
        if !(mid > 0.0) || mid == lo || mid == hi_f {
            break;
        }
        let cand = emit(&spec, regime, &rc, mid, "certificate-bisection");
        if certified(&cand)? {
            lo = mid;
            lo_sched = Some(cand);
        } else {
            hi_f = mid;
        }
    }
    lo_sched.ok_or_else(|| {
        Error::ScheduleCertificate(format!(
            "no positive growth parameter certifies for {} in regime (mu={}, nu={})",
            kind.tag(),
            regime.mu,
            regime.nu,
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BlockPartition, ComponentKind, ComponentOracle};

    /// Partition of singleton blocks with the given constants.
    fn partition_with(g: &[f64], l: &[f64]) -> BlockPartition {
        let n = g.len();
        let comps: Vec<ComponentOracle> = (0..n)
            .map(|_| ComponentOracle {
                kind: ComponentKind::Affine { w: vec![1.0], b: 0.0 },
                lipschitz: 1.0,
                smoothness: 0.0,
                nonlinear: false,
            })
            .collect();
        let blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let bounds = vec![Some(1.0); n];
        let mut part = BlockPartition::new(blocks, &comps, &bounds).unwrap();
        part.override_constants(g.to_vec(), l.to_vec()).unwrap();
        part
    }

    fn all_kinds() -> [SolverKind; 5] {
        [
            SolverKind::FullDeterministic,
            SolverKind::StochasticHistoric,
            SolverKind::StochasticReplacement,
            SolverKind::SeparableHistoric,
            SolverKind::SeparableReplacement,
        ]
    }

    #[test]
    fn full_constant_schedule_matches_hand_value() {
        // mu = nu = 0, G = sqrt(2), L = 2, mu0 = nu0 = 1:
        // a_1 = min(1/(sqrt2 * sqrt2), 1/(2*2)) = min(1/2, 1/4) = 1/4.
        let regime = Regime::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let source = CertifySource::Aggregate {
            g: std::f64::consts::SQRT_2,
            l: 2.0,
        };
        let sched = make_schedule(
            SolverKind::FullDeterministic,
            &regime,
            &source,
            None,
            500,
        )
        .unwrap();
        assert!((sched.a(1) - 0.25).abs() < 1e-15);
        for k in 2..=500 {
            assert_eq!(sched.a(k), sched.a(1));
        }
        assert!((sched.big_a(400) - 100.0).abs() < 1e-9);
        let report = certify_schedule(&sched, &regime, &source, 500).unwrap();
        assert!(report.passed(), "{:?}", report.worst);
    }

    #[test]
    fn full_geometric_schedule_matches_hand_value() {
        // mu = nu = 1, G = L = 1: alpha = min(1/sqrt2, 1/2) = 1/2 and
        // a_1 = min(1/sqrt2, 1/2) = 1/2, so A_t = 1.5^(t-1) / 2.
        let regime = Regime::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let source = CertifySource::Aggregate { g: 1.0, l: 1.0 };
        let sched = make_schedule(
            SolverKind::FullDeterministic,
            &regime,
            &source,
            None,
            300,
        )
        .unwrap();
        assert!((sched.alpha() - 0.5).abs() < 1e-15);
        assert_eq!(sched.alpha_binding(), "strong-convexity-ratio");
        assert!((sched.a(1) - 0.5).abs() < 1e-15);
        let expect = 0.5 * 1.5f64.powi(9);
        assert!((sched.big_a(10) - expect).abs() / expect < 1e-12);
        let report = certify_schedule(&sched, &regime, &source, 300).unwrap();
        assert!(report.passed(), "{:?}", report.worst);
    }

    #[test]
    fn full_mixed_regimes_certify() {
        let source = CertifySource::Aggregate { g: 2.0, l: 1.5 };
        for (mu, nu) in [(1.0, 0.0), (0.0, 1.0)] {
            let regime = Regime::new(mu, nu, 1.0, 1.0).unwrap();
            let sched = make_schedule(
                SolverKind::FullDeterministic,
                &regime,
                &source,
                None,
                2000,
            )
            .unwrap();
            let report = certify_schedule(&sched, &regime, &source, 2000).unwrap();
            assert!(
                report.passed(),
                "regime ({mu},{nu}): {:?}",
                report.worst
            );
            for k in 1..=2000 {
                assert!(sched.a(k) > 0.0);
            }
        }
    }

    #[test]
    fn mixed_regime_ramp_grows_quadratically() {
        // Coupling-dominated instance: the ramp branch takes over and
        // A_t should grow as t^2 (ratio test around 4 at doubling).
        let regime = Regime::new(1.0, 0.0, 1.0, 1.0).unwrap();
        let source = CertifySource::Aggregate { g: 1.0, l: 0.05 };
        let sched = make_schedule(
            SolverKind::FullDeterministic,
            &regime,
            &source,
            None,
            4000,
        )
        .unwrap();
        let ratio = sched.big_a(4000) / sched.big_a(2000);
        assert!(
            ratio > 3.3 && ratio < 4.7,
            "expected quadratic growth, got doubling ratio {ratio}"
        );
    }

    #[test]
    fn uniform_plan_constants_match_definitions() {
        let part = partition_with(&[1.0, 2.0, 3.0], &[0.5, 1.0, 2.0]);
        let plan = SamplingPlan::uniform(&part).unwrap();
        let n = 3.0f64;
        assert!((plan.g_p - n.sqrt() * 3.0).abs() < 1e-12);
        assert!((plan.l_p_gamma - n * 2.0).abs() < 1e-12);
        assert!((plan.g_q_gamma - n * 3.0).abs() < 1e-12);
        assert!((plan.g_p_s - (n * n * n).sqrt() * 3.0).abs() < 1e-12);
        let lpr: f64 = part
            .block_l
            .iter()
            .map(|l| l * l * n * n * n)
            .sum::<f64>()
            .sqrt();
        assert!((plan.l_p_r - lpr).abs() < 1e-12);
        let gqr: f64 = part
            .block_g
            .iter()
            .map(|g| g * g * n * n * n)
            .sum::<f64>()
            .sqrt();
        assert!((plan.g_q_r - gqr).abs() < 1e-12);
    }

    #[test]
    fn importance_plan_matches_hand_computation() {
        // lambda = (3, 1): p = gamma = (3/4, 1/4).
        let part = partition_with(&[5.0f64.sqrt(), 1.0], &[2.0, 0.0]);
        assert!((part.block_lambda[0] - 3.0).abs() < 1e-12);
        let plan = SamplingPlan::importance(&part, SolverKind::StochasticHistoric).unwrap();
        assert!((plan.p[0] - 0.75).abs() < 1e-12);
        assert!((plan.p[1] - 0.25).abs() < 1e-12);
        assert_eq!(plan.gamma, plan.p);
        // l_p_gamma = sqrt(max(L_1^2/(p_1 g_1), L_2^2/(p_2 g_2)))
        //           = sqrt(4 / (9/16)) = 8/3.
        assert!((plan.l_p_gamma - 8.0 / 3.0).abs() < 1e-12);
        // q ∝ G: q = (sqrt5/(sqrt5+1), 1/(sqrt5+1)).
        let qs = 5.0f64.sqrt() + 1.0;
        assert!((plan.q[0] - 5.0f64.sqrt() / qs).abs() < 1e-12);
        // Recompute every derived constant independently.
        let re = SamplingPlan::from_vectors(
            &part,
            plan.p.clone(),
            plan.q.clone(),
            plan.r.clone(),
            plan.s.clone(),
            plan.gamma.clone(),
        )
        .unwrap();
        for (a, b) in [
            (plan.g_p, re.g_p),
            (plan.l_p_gamma, re.l_p_gamma),
            (plan.g_q_gamma, re.g_q_gamma),
            (plan.g_p_s, re.g_p_s),
            (plan.l_p_r, re.l_p_r),
            (plan.g_q_r, re.g_q_r),
        ] {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn replacement_plans_respect_refresh_floor() {
        let part = partition_with(&[4.0, 1.0, 0.2, 2.0], &[3.0, 0.0, 1.0, 0.5]);
        for kind in [
            SolverKind::StochasticReplacement,
            SolverKind::SeparableReplacement,
        ] {
            let plan = SamplingPlan::importance(&part, kind).unwrap();
            assert!(plan.replacement_floor_ok(), "{kind:?}");
            let sum: f64 = plan.r.iter().sum();
            assert!((sum - 1.0).abs() < PLAN_SUM_TOL);
        }
    }

    #[test]
    fn degenerate_constants_rejected() {
        let part = partition_with(&[0.0, 0.0], &[0.0, 0.0]);
        match SamplingPlan::uniform(&part) {
            Err(Error::DegenerateConstants) => {}
            other => panic!("expected DegenerateConstants, got {other:?}"),
        }
    }

    #[test]
    fn emitted_schedules_certify_across_kinds_and_regimes() {
        let part = partition_with(&[1.0, 2.0, 0.5, 1.5], &[0.8, 0.0, 1.2, 0.3]);
        for kind in all_kinds() {
            for (mu, nu) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.5)] {
                let nu0 = if kind.is_separable() { 0.25 } else { 1.0 };
                let regime = Regime::new(mu, nu, 1.0, nu0).unwrap();
                let plan = SamplingPlan::importance(&part, kind).unwrap();
                let source = if kind == SolverKind::FullDeterministic {
                    CertifySource::Aggregate { g: 2.0, l: 2.3 }
                } else {
                    CertifySource::Plan(&plan)
                };
                let sched = make_schedule(kind, &regime, &source, None, 1200)
                    .unwrap_or_else(|e| panic!("{kind:?} regime ({mu},{nu}): {e}"));
                let report = certify_schedule(&sched, &regime, &source, 1200).unwrap();
                assert!(
                    report.passed(),
                    "{kind:?} regime ({mu},{nu}): worst {:?}",
                    report.worst
                );
                for k in 1..=1200 {
                    assert!(sched.a(k) > 0.0, "{kind:?} a_{k} not positive");
                }
            }
        }
    }

    #[test]
    fn geometric_regime_grows_geometrically_and_constant_regime_linearly() {
        let part = partition_with(&[1.0, 1.0], &[1.0, 1.0]);
        let plan = SamplingPlan::uniform(&part).unwrap();
        let source = CertifySource::Plan(&plan);
        let regime = Regime::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let sched =
            make_schedule(SolverKind::StochasticHistoric, &regime, &source, None, 600).unwrap();
        let alpha = sched.alpha();
        assert!(alpha > 0.0);
        let ratio = sched.big_a(500) / sched.big_a(499);
        assert!((ratio - (1.0 + alpha)).abs() < 1e-9);

        let flat = Regime::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let sched =
            make_schedule(SolverKind::StochasticHistoric, &flat, &source, None, 600).unwrap();
        assert!((sched.big_a(600) - 600.0 * sched.a(1)).abs() < 1e-9 * sched.big_a(600));
    }

    #[test]
    fn inflated_growth_rates_are_flagged() {
        // Geometric schedules with alpha = 1 and alpha = 1/(N-1) both break
        // the primal decay sum at N = 4: the series ratio (1+alpha)(1-1/N)
        // reaches 1 already at alpha = 1/3.
        let part = partition_with(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 1.0]);
        let plan = SamplingPlan::uniform(&part).unwrap();
        let source = CertifySource::Plan(&plan);
        let regime = Regime::new(1.0, 1.0, 1.0, 1.0).unwrap();
        for alpha in [1.0, 1.0 / 3.0] {
            let len = 800;
            let mut a = vec![0.0, 0.1];
            let mut big = 0.1;
            for _ in 2..=len {
                let next = alpha * big;
                a.push(next);
                big += next;
            }
            let w = vec![0.25; len + 1];
            let sched = Schedule::from_sequences(
                SolverKind::StochasticHistoric,
                4,
                alpha,
                a,
                w.clone(),
                w,
            )
            .unwrap();
            let report = certify_schedule(&sched, &regime, &source, 400).unwrap();
            assert!(report.violations > 0, "alpha = {alpha} should be flagged");
            let flagged = report.worst.unwrap();
            assert!(
                flagged.condition == "primal-decay"
                    || flagged.condition == "dual-decay"
                    || flagged.condition == "growth-cap"
                    || flagged.condition == "coupling-rate",
                "unexpected worst condition {}",
                flagged.condition
            );
        }
    }

    #[test]
    fn user_override_failing_certificate_is_an_error() {
        let part = partition_with(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 1.0]);
        let plan = SamplingPlan::uniform(&part).unwrap();
        let source = CertifySource::Plan(&plan);
        let regime = Regime::new(1.0, 1.0, 1.0, 1.0).unwrap();
        match make_schedule(
            SolverKind::StochasticHistoric,
            &regime,
            &source,
            Some(1.0),
            300,
        ) {
            Err(Error::ScheduleCertificate(_)) => {}
            other => panic!("expected certificate error, got {other:?}"),
        }
    }

    #[test]
    fn weight_switch_detected_in_ramp_regime() {
        // Small coupling constants and large smoothness put the geometric
        // branch first; the ramp branch takes over once A_k is large and
        // the primal weight must drop at the detected switch.
        let part = partition_with(&[0.05, 0.05], &[4.0, 4.0]);
        let plan = SamplingPlan::uniform(&part).unwrap();
        let source = CertifySource::Plan(&plan);
        let regime = Regime::new(2.0, 0.0, 1.0, 1.0).unwrap();
        let sched =
            make_schedule(SolverKind::StochasticHistoric, &regime, &source, None, 3000).unwrap();
        let w0 = sched.wp(0);
        let wlast = sched.wp(3000);
        assert!(wlast <= w0);
        for k in 1..=3000 {
            assert!(sched.wp(k) <= sched.wp(k - 1) + 1e-15);
        }
        let report = certify_schedule(&sched, &regime, &source, 3000).unwrap();
        assert!(report.passed(), "{:?}", report.worst);
    }

    #[test]
    fn schedule_accounting_is_exact() {
        let regime = Regime::new(0.5, 0.25, 1.0, 1.0).unwrap();
        let source = CertifySource::Aggregate { g: 1.0, l: 1.0 };
        let mut sched = make_schedule(
            SolverKind::FullDeterministic,
            &regime,
            &source,
            None,
            200,
        )
        .unwrap();
        assert_eq!(sched.a(0), 0.0);
        assert_eq!(sched.big_a(0), 0.0);
        let mut sum = 0.0;
        for k in 0..=sched.max_index() {
            sum += sched.a(k);
            assert_eq!(sum, sched.big_a(k), "running sum must match at {k}");
        }
        // Deterministic extension: same prefix after growing.
        let before: Vec<f64> = (0..=200).map(|k| sched.a(k)).collect();
        sched.extend_to(900).unwrap();
        for (k, v) in before.iter().enumerate() {
            assert_eq!(sched.a(k), *v);
        }
    }

    #[test]
    fn n_equals_one_plans_and_schedules_are_sound() {
        let part = partition_with(&[2.0], &[1.0]);
        for kind in all_kinds() {
            let plan = SamplingPlan::importance(&part, kind).unwrap();
            assert_eq!(plan.p, vec![1.0]);
            assert!(plan.replacement_floor_ok());
            let source = if kind == SolverKind::FullDeterministic {
                CertifySource::Aggregate { g: 2.0, l: 1.0 }
            } else {
                CertifySource::Plan(&plan)
            };
            let regime = Regime::new(1.0, 1.0, 1.0, 1.0).unwrap();
            let sched = make_schedule(kind, &regime, &source, None, 400).unwrap();
            let report = certify_schedule(&sched, &regime, &source, 400).unwrap();
            assert!(report.passed(), "{kind:?}: {:?}", report.worst);
        }
    }

    #[test]
    fn zero_smoothness_leaves_coupling_branch_only() {
        // L = 0 disables the smoothness bound; the schedule must still be
        // emitted and certified from the coupling branch alone.
        let regime = Regime::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let source = CertifySource::Aggregate { g: 1.0, l: 0.0 };
        let sched = make_schedule(
            SolverKind::FullDeterministic,
            &regime,
            &source,
            None,
            100,
        )
        .unwrap();
        assert!((sched.a(1) - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-15);
        let report = certify_schedule(&sched, &regime, &source, 100).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn solver_kind_tags_round_trip() {
        for kind in all_kinds() {
            assert_eq!(SolverKind::from_tag(kind.tag()), Some(kind));
        }
        assert_eq!(SolverKind::from_tag("nonsense"), None);
        assert_eq!(Sampling::from_tag("importance"), Some(Sampling::Importance));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn kind_strategy() -> impl Strategy<Value = SolverKind> {
            prop_oneof![
                Just(SolverKind::FullDeterministic),
                Just(SolverKind::StochasticHistoric),
                Just(SolverKind::StochasticReplacement),
                Just(SolverKind::SeparableHistoric),
                Just(SolverKind::SeparableReplacement),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            /// Any emitted schedule self-certifies, has positive steps,
            /// exact running sums, and non-increasing weights.
            #[test]
            fn emitted_schedules_are_internally_consistent(
                kind in kind_strategy(),
                g in proptest::collection::vec(0.0f64..4.0, 2..5),
                mu in prop_oneof![Just(0.0f64), 0.05f64..3.0],
                nu in prop_oneof![Just(0.0f64), 0.05f64..3.0],
                importance in proptest::bool::ANY,
            ) {
                let l: Vec<f64> = g.iter().map(|v| 0.5 * v + 0.1).collect();
                let mut g = g;
                if g.iter().all(|v| *v == 0.0) {
                    g[0] = 1.0;
                }
                let part = partition_with(&g, &l);
                let plan = if importance {
                    SamplingPlan::importance(&part, kind).unwrap()
                } else {
                    SamplingPlan::uniform(&part).unwrap()
                };
                let nu0 = if kind.is_separable() { 1.0 / g.len() as f64 } else { 1.0 };
                let regime = Regime::new(mu, nu, 1.0, nu0).unwrap();
                let agg_g = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let agg_l = l.iter().sum::<f64>();
                let source = if kind == SolverKind::FullDeterministic {
                    CertifySource::Aggregate { g: agg_g, l: agg_l }
                } else {
                    CertifySource::Plan(&plan)
                };
                let horizon = 150;
                let sched = make_schedule(kind, &regime, &source, None, horizon).unwrap();
                let report = certify_schedule(&sched, &regime, &source, horizon).unwrap();
                prop_assert!(report.passed(), "worst: {:?}", report.worst);
                prop_assert_eq!(sched.a(0), 0.0);
                let mut sum = 0.0;
                for k in 0..=horizon {
                    if k >= 1 {
                        prop_assert!(sched.a(k) > 0.0);
                        prop_assert!(sched.wp(k) <= sched.wp(k - 1) + 1e-15);
                        prop_assert!(sched.wd(k) <= sched.wd(k - 1) + 1e-15);
                    }
                    sum += sched.a(k);
                    prop_assert!((sum - sched.big_a(k)).abs() <= 1e-12 * sum.max(1.0));
                }
            }

            /// Plan vectors are normalized distributions whose derived
            /// constants come back identical when recomputed.
            #[test]
            fn plans_are_normalized_and_reproducible(
                g in proptest::collection::vec(0.0f64..5.0, 1..6),
                kind in kind_strategy(),
            ) {
                let l: Vec<f64> = g.iter().rev().map(|v| 0.3 * v).collect();
                let mut g = g;
                if g.iter().all(|v| *v == 0.0) {
                    g[0] = 2.0;
                }
                let part = partition_with(&g, &l);
                let plan = SamplingPlan::importance(&part, kind).unwrap();
                for v in [&plan.p, &plan.q, &plan.r, &plan.s, &plan.gamma] {
                    let sum: f64 = v.iter().sum();
                    prop_assert!((sum - 1.0).abs() <= PLAN_SUM_TOL);
                    prop_assert!(v.iter().all(|x| *x >= 0.0));
                }
                let re = SamplingPlan::from_vectors(
                    &part,
                    plan.p.clone(),
                    plan.q.clone(),
                    plan.r.clone(),
                    plan.s.clone(),
                    plan.gamma.clone(),
                )
                .unwrap();
                prop_assert!((plan.g_p - re.g_p).abs() <= 1e-10 * plan.g_p.max(1.0));
                prop_assert!((plan.l_p_r - re.l_p_r).abs() <= 1e-10 * plan.l_p_r.max(1.0));
                if kind.is_replacement() {
                    prop_assert!(plan.replacement_floor_ok());
                }
            }
        }
    }
}
