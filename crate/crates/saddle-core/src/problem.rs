//! Saddle-point problems with dual-linear coupling,
//!
//! ```text
//!     min_{x in X} max_{y in Y}  L(x, y) = <y, f(x)> - psi(y) + phi(x),
//! ```
//!
//! where each component f_j : X -> R is convex with a value/gradient
//! oracle, phi is mu-strongly convex and psi is nu-strongly convex
//! relative to their geometries (mu, nu >= 0). Whenever some f_j is
//! nonlinear, the dual domain must confine y_j >= 0, otherwise the coupled
//! objective stops being convex-concave.
//!
//! Components are grouped into blocks B_1..B_N partitioning {0..n-1}, and
//! each block carries two bounds that hold for all feasible x, x' and all
//! z in R^{B_J}, y in Y:
//!
//! ```text
//!     || sum_{j in B_J} z_j grad f_j(x) ||_X*            <= G_J ||z||_2,
//!     || sum_{j in B_J} y_j (grad f_j(x) - grad f_j(x')) ||_X*
//!                                                        <= L_J ||x - x'||_X.
//! ```
//!
//! Default estimates are G_J = sqrt(sum_{j in B_J} G_j^2) and
//! L_J = sum_{j in B_J} D_j M_j, where G_j bounds ||grad f_j||_X*, M_j
//! bounds the curvature of f_j as an operator X -> X*, and D_j bounds
//! |y_j| over Y. The combined per-block scale is
//! lambda_J = sqrt(G_J^2 + L_J^2). Aggregate constants G and L satisfy
//!
//! ```text
//!     sup_x ||Df(x)^T z||_X* <= G ||z||_Y   for all z,
//!     sup_y ||(Df(x) - Df(x'))^T y||_X* <= L ||x - x'||_X,
//! ```
//!
//! with defaults G = ||(G_1..G_N)||_2 (valid because ||.||_Y >= ||.||_2
//! for the supported dual norms) and L = ||(L_1..L_N)||_1.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::GeometryKind;
use crate::linalg::{self, NormKind};

/// Feasibility slack accepted when evaluating the objective at points that
/// come out of floating-point prox steps.
pub const FEAS_TOL: f64 = 1e-9;

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Closed feasible set for one side of the problem.
#[derive(Debug, Clone)]
pub enum Domain {
    /// All of R^m.
    Reals,
    /// Coordinate box `[lo_i, hi_i]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Probability simplex `{ z >= 0, sum z = 1 }`.
    Simplex,
    /// Nonnegative orthant `{ z >= 0 }`.
    NonnegOrthant,
    /// Euclidean ball `{ ||z - center||_2 <= radius }`.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    /// Validates internal consistency against the ambient dimension.
    pub fn check_dim(&self, m: usize, side: &str) -> Result<()> {
        match self {
            Domain::Box { lo, hi } => {
                if lo.len() != m || hi.len() != m {
                    return Err(Error::Config(format!(
                        "{side} box bounds have length {}/{} but dimension is {m}",
                        lo.len(),
                        hi.len()
                    )));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::Config(format!("{side} box has lo > hi")));
                }
            }
            Domain::Ball { center, radius } => {
                if center.len() != m {
                    return Err(Error::Config(format!(
                        "{side} ball center has length {} but dimension is {m}",
                        center.len()
                    )));
                }
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::Config(format!("{side} ball radius must be positive")));
                }
            }
            Domain::Simplex | Domain::NonnegOrthant | Domain::Reals => {}
        }
        Ok(())
    }

    /// Membership test with slack `tol`.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        match self {
            Domain::Reals => true,
            Domain::Box { lo, hi } => z
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            Domain::Simplex => {
                z.iter().all(|v| *v >= -tol) && (z.iter().sum::<f64>() - 1.0).abs() <= tol * z.len() as f64
            }
            Domain::NonnegOrthant => z.iter().all(|v| *v >= -tol),
            Domain::Ball { center, radius } => linalg::dist2(z, center) <= radius + tol,
        }
    }

    /// `sup |z_j|` over the domain, if finite.
    pub fn coordinate_bound(&self, j: usize) -> Option<f64> {
        match self {
            Domain::Reals | Domain::NonnegOrthant => None,
            Domain::Box { lo, hi } => Some(lo[j].abs().max(hi[j].abs())),
            Domain::Simplex => Some(1.0),
            Domain::Ball { center, radius } => Some(center[j].abs() + radius),
        }
    }

    /// Whether any feasible point has `z_j < 0`.
    pub fn allows_negative(&self, j: usize) -> bool {
        match self {
            Domain::Reals => true,
            Domain::Box { lo, .. } => lo[j] < 0.0,
            Domain::Simplex | Domain::NonnegOrthant => false,
            Domain::Ball { center, radius } => center[j] - radius < 0.0,
        }
    }

    /// Whether the domain factors over an arbitrary block partition of the
    /// coordinates.
    pub fn is_product(&self) -> bool {
        matches!(self, Domain::Reals | Domain::Box { .. } | Domain::NonnegOrthant)
    }

    /// Draws a feasible point. Unbounded domains sample from a standard
    /// normal (folded onto the orthant where required).
    pub fn sample<R: Rng>(&self, m: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::Reals => (0..m).map(|_| standard_normal(rng)).collect(),
            Domain::NonnegOrthant => (0..m).map(|_| standard_normal(rng).abs()).collect(),
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| rng.gen_range(0.0..=1.0) * (h - l) + l)
                .collect(),
            Domain::Simplex => {
                // Exponential spacings give the uniform distribution.
                let mut v: Vec<f64> = (0..m)
                    .map(|_| -(rng.gen_range(f64::MIN_POSITIVE..1.0)).ln())
                    .collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                v
            }
            Domain::Ball { center, radius } => {
                let dir: Vec<f64> = (0..m).map(|_| standard_normal(rng)).collect();
                let n = linalg::norm2(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.gen_range(0.0f64..=1.0).powf(1.0 / m as f64);
                center
                    .iter()
                    .zip(&dir)
                    .map(|(c, d)| c + r * d / n)
                    .collect()
            }
        }
    }

    /// Restriction to a coordinate subset, for blockwise dual updates.
    pub fn restrict(&self, idx: &[usize]) -> Domain {
        match self {
            Domain::Reals => Domain::Reals,
            Domain::NonnegOrthant => Domain::NonnegOrthant,
            Domain::Box { lo, hi } => Domain::Box {
                lo: idx.iter().map(|&j| lo[j]).collect(),
                hi: idx.iter().map(|&j| hi[j]).collect(),
            },
            Domain::Simplex | Domain::Ball { .. } => {
                unreachable!("restrict requires a product domain")
            }
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; one draw per call keeps the stream reproducible.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Analytic form of one coupling component f_j.
#[derive(Clone)]
pub enum ComponentKind {
    /// `f(x) = <w, x> + b`.
    Affine { w: Vec<f64>, b: f64 },
    /// `f(x) = (<w, x> - b)^2 / 2`.
    SquaredAffine { w: Vec<f64>, b: f64 },
    /// `f(x) = ln(1 + exp(-label <w, x>))`.
    Logistic { w: Vec<f64>, label: f64 },
    /// Huber loss of `<w, x> - b` with transition width `delta`.
    Huber { w: Vec<f64>, b: f64, delta: f64 },
    /// Caller-supplied oracle; constants must be provided explicitly.
    Custom {
        value: ValueFn,
        gradient: GradientFn,
        nonlinear: bool,
    },
}

impl fmt::Debug for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentKind::Affine { w, b } => f.debug_struct("Affine").field("dim", &w.len()).field("b", b).finish(),
            ComponentKind::SquaredAffine { w, b } => f
                .debug_struct("SquaredAffine")
                .field("dim", &w.len())
                .field("b", b)
                .finish(),
            ComponentKind::Logistic { w, label } => f
                .debug_struct("Logistic")
                .field("dim", &w.len())
                .field("label", label)
                .finish(),
            ComponentKind::Huber { w, b, delta } => f
                .debug_struct("Huber")
                .field("dim", &w.len())
                .field("b", b)
                .field("delta", delta)
                .finish(),
            ComponentKind::Custom { nonlinear, .. } => {
                f.debug_struct("Custom").field("nonlinear", nonlinear).finish()
            }
        }
    }
}

impl ComponentKind {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ComponentKind::Affine { w, b } => linalg::dot(w, x) + b,
            ComponentKind::SquaredAffine { w, b } => {
                let t = linalg::dot(w, x) - b;
                0.5 * t * t
            }
            ComponentKind::Logistic { w, label } => log1p_exp(-label * linalg::dot(w, x)),
            ComponentKind::Huber { w, b, delta } => huber(linalg::dot(w, x) - b, *delta),
            ComponentKind::Custom { value, .. } => value(x),
        }
    }

    /// Writes the gradient into `out` and returns the value. A single call
    /// serves both queries, which is what the oracle counters charge for.
    pub fn pair_into(&self, x: &[f64], out: &mut [f64]) -> f64 {
        match self {
            ComponentKind::Affine { w, b } => {
                out.copy_from_slice(w);
                linalg::dot(w, x) + b
            }
            ComponentKind::SquaredAffine { w, b } => {
                let t = linalg::dot(w, x) - b;
                for (o, wi) in out.iter_mut().zip(w) {
                    *o = t * wi;
                }
                0.5 * t * t
            }
            ComponentKind::Logistic { w, label } => {
                let m = label * linalg::dot(w, x);
                let s = sigmoid(-m);
                for (o, wi) in out.iter_mut().zip(w) {
                    *o = -label * s * wi;
                }
                log1p_exp(-m)
            }
            ComponentKind::Huber { w, b, delta } => {
                let t = linalg::dot(w, x) - b;
                let slope = t.clamp(-delta, *delta);
                for (o, wi) in out.iter_mut().zip(w) {
                    *o = slope * wi;
                }
                huber(t, *delta)
            }
            ComponentKind::Custom { value, gradient, .. } => {
                gradient(x, out);
                value(x)
            }
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        match self {
            ComponentKind::Affine { .. } => false,
            ComponentKind::Custom { nonlinear, .. } => *nonlinear,
            _ => true,
        }
    }

    fn weight_dim(&self) -> Option<usize> {
        match self {
            ComponentKind::Affine { w, .. }
            | ComponentKind::SquaredAffine { w, .. }
            | ComponentKind::Logistic { w, .. }
            | ComponentKind::Huber { w, .. } => Some(w.len()),
            ComponentKind::Custom { .. } => None,
        }
    }

    /// Default `(G_j, M_j)` given the primal domain and the dual norm of
    /// the primal space. Returns `None` for custom components.
    fn default_constants(&self, domain_x: &Domain, xstar: NormKind) -> Option<(f64, f64)> {
        match self {
            ComponentKind::Affine { w, .. } => Some((xstar.eval(w), 0.0)),
            ComponentKind::SquaredAffine { w, b } => {
                let (lo, hi) = affine_range(w, *b, domain_x);
                let span = lo.abs().max(hi.abs());
                let wn = xstar.eval(w);
                Some((span * wn, wn * wn))
            }
            ComponentKind::Logistic { w, label } => {
                let wn = xstar.eval(w);
                Some((label.abs() * wn, 0.25 * label * label * wn * wn))
            }
            ComponentKind::Huber { w, delta, .. } => {
                let wn = xstar.eval(w);
                Some((delta * wn, wn * wn))
            }
            ComponentKind::Custom { .. } => None,
        }
    }
}

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn huber(t: f64, delta: f64) -> f64 {
    if t.abs() <= delta {
        0.5 * t * t
    } else {
        delta * t.abs() - 0.5 * delta * delta
    }
}

/// Range of `<w, x> - b` over a domain; either end may be infinite.
fn affine_range(w: &[f64], b: f64, domain: &Domain) -> (f64, f64) {
    match domain {
        Domain::Reals => {
            if w.iter().all(|v| *v == 0.0) {
                (-b, -b)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
        }
        Domain::Box { lo, hi } => {
            let mut smin = -b;
            let mut smax = -b;
            for ((wi, l), h) in w.iter().zip(lo).zip(hi) {
                smin += (wi * l).min(wi * h);
                smax += (wi * l).max(wi * h);
            }
            (smin, smax)
        }
        Domain::Simplex => {
            let lo = w.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            let hi = w.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            (lo - b, hi - b)
        }
        Domain::NonnegOrthant => {
            let lo = if w.iter().any(|v| *v < 0.0) { f64::NEG_INFINITY } else { -b };
            let hi = if w.iter().any(|v| *v > 0.0) { f64::INFINITY } else { -b };
            (lo, hi)
        }
        Domain::Ball { center, radius } => {
            let mid = linalg::dot(w, center) - b;
            let half = radius * linalg::norm2(w);
            (mid - half, mid + half)
        }
    }
}

/// One coupling component together with its bound metadata.
#[derive(Debug, Clone)]
pub struct ComponentOracle {
    pub kind: ComponentKind,
    /// `G_j`: bound on `||grad f_j(x)||_X*` over the feasible set.
    pub lipschitz: f64,
    /// `M_j`: bound on the curvature of f_j as an operator X -> X*.
    pub smoothness: f64,
    pub nonlinear: bool,
}

impl ComponentOracle {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.kind.value(x)
    }

    pub fn pair_into(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.kind.pair_into(x, out)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.kind.pair_into(x, &mut g);
        g
    }
}

/// Regularizers with closed-form prox steps in their matching geometry.
#[derive(Debug, Clone)]
pub enum ProxFriendly {
    Zero,
    /// `(s/2) ||z||_2^2`; euclidean geometry only.
    SquaredNorm { strength: f64 },
    /// `(s/2) ||z - center||_2^2`; euclidean geometry only.
    SquaredDistance { strength: f64, center: Vec<f64> },
    /// `s * KL(z || anchor)`; entropy geometries only.
    KlToAnchor { strength: f64, anchor: Vec<f64> },
}

impl ProxFriendly {
    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            ProxFriendly::Zero => 0.0,
            ProxFriendly::SquaredNorm { strength } => {
                0.5 * strength * z.iter().map(|v| v * v).sum::<f64>()
            }
            ProxFriendly::SquaredDistance { strength, center } => {
                let d = linalg::dist2(z, center);
                0.5 * strength * d * d
            }
            ProxFriendly::KlToAnchor { strength, anchor } => {
                strength
                    * z.iter()
                        .zip(anchor)
                        .map(|(v, a)| if *v > 0.0 { v * (v / a).ln() } else { 0.0 })
                        .sum::<f64>()
            }
        }
    }

    /// Strong-convexity modulus relative to the matching geometry's
    /// divergence.
    pub fn strength(&self) -> f64 {
        match self {
            ProxFriendly::Zero => 0.0,
            ProxFriendly::SquaredNorm { strength }
            | ProxFriendly::SquaredDistance { strength, .. }
            | ProxFriendly::KlToAnchor { strength, .. } => *strength,
        }
    }

    /// Restriction to a coordinate subset. All supported regularizers are
    /// coordinate-separable, so this is a parameter slice.
    pub fn restrict(&self, idx: &[usize]) -> ProxFriendly {
        match self {
            ProxFriendly::Zero => ProxFriendly::Zero,
            ProxFriendly::SquaredNorm { strength } => ProxFriendly::SquaredNorm { strength: *strength },
            ProxFriendly::SquaredDistance { strength, center } => ProxFriendly::SquaredDistance {
                strength: *strength,
                center: idx.iter().map(|&j| center[j]).collect(),
            },
            ProxFriendly::KlToAnchor { strength, anchor } => ProxFriendly::KlToAnchor {
                strength: *strength,
                anchor: idx.iter().map(|&j| anchor[j]).collect(),
            },
        }
    }

    fn compatible_with(&self, geom: GeometryKind) -> bool {
        match self {
            ProxFriendly::Zero => true,
            ProxFriendly::SquaredNorm { .. } | ProxFriendly::SquaredDistance { .. } => {
                geom == GeometryKind::Euclidean
            }
            ProxFriendly::KlToAnchor { .. } => geom != GeometryKind::Euclidean,
        }
    }

    fn check(&self, m: usize, side: &str) -> Result<()> {
        let strength = self.strength();
        if !strength.is_finite() || strength < 0.0 {
            return Err(Error::Config(format!("{side} regularizer strength must be >= 0")));
        }
        match self {
            ProxFriendly::SquaredDistance { center, .. } if center.len() != m => Err(Error::Config(
                format!("{side} regularizer center has length {} but dimension is {m}", center.len()),
            )),
            ProxFriendly::KlToAnchor { anchor, .. } => {
                if anchor.len() != m {
                    return Err(Error::Config(format!(
                        "{side} regularizer anchor has length {} but dimension is {m}",
                        anchor.len()
                    )));
                }
                if anchor.iter().any(|a| !(*a > 0.0)) {
                    return Err(Error::Config(format!("{side} KL anchor must be strictly positive")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// How to split the n components into blocks.
#[derive(Debug, Clone)]
pub enum PartitionSpec {
    /// One block holding every component.
    WholeVector,
    /// n singleton blocks.
    Singletons,
    /// N contiguous blocks with sizes differing by at most one.
    Uniform(usize),
    Explicit(Vec<Vec<usize>>),
}

impl PartitionSpec {
    pub fn resolve(&self, n: usize) -> Result<Vec<Vec<usize>>> {
        match self {
            PartitionSpec::WholeVector => Ok(vec![(0..n).collect()]),
            PartitionSpec::Singletons => Ok((0..n).map(|j| vec![j]).collect()),
            PartitionSpec::Uniform(nb) => {
                let nb = *nb;
                if nb == 0 || nb > n {
                    return Err(Error::Partition(format!(
                        "cannot split {n} components into {nb} blocks"
                    )));
                }
                let base = n / nb;
                let extra = n % nb;
                let mut blocks = Vec::with_capacity(nb);
                let mut start = 0;
                for i in 0..nb {
                    let len = base + usize::from(i < extra);
                    blocks.push((start..start + len).collect());
                    start += len;
                }
                Ok(blocks)
            }
            PartitionSpec::Explicit(blocks) => Ok(blocks.clone()),
        }
    }
}

/// Validated block structure with per-block bounds.
#[derive(Debug, Clone)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    /// `G_J = sqrt(sum_{j in B_J} G_j^2)` unless overridden.
    pub block_g: Vec<f64>,
    /// `L_J = sum_{j in B_J} D_j M_j` unless overridden.
    pub block_l: Vec<f64>,
    /// `lambda_J = sqrt(G_J^2 + L_J^2)`.
    pub block_lambda: Vec<f64>,
    index_to_block: Vec<usize>,
}

impl BlockPartition {
    /// Validates the blocks and computes default bounds. `dual_bounds[j]`
    /// is `D_j`; it may be `None` only where `M_j = 0`.
    pub fn new(
        blocks: Vec<Vec<usize>>,
        components: &[ComponentOracle],
        dual_bounds: &[Option<f64>],
    ) -> Result<Self> {
        let n = components.len();
        if blocks.is_empty() {
            return Err(Error::Partition("no blocks".into()));
        }
        let mut seen = vec![false; n];
        for (bi, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::Partition(format!("block {bi} is empty")));
            }
            for &j in block {
                if j >= n {
                    return Err(Error::Partition(format!(
                        "block {bi} references component {j} but n = {n}"
                    )));
                }
                if seen[j] {
                    return Err(Error::Partition(format!("component {j} appears in two blocks")));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!("component {j} is not covered")));
        }

        let mut index_to_block = vec![0usize; n];
        for (bi, block) in blocks.iter().enumerate() {
            for &j in block {
                index_to_block[j] = bi;
            }
        }

        let mut block_g = Vec::with_capacity(blocks.len());
        let mut block_l = Vec::with_capacity(blocks.len());
        for block in &blocks {
            let mut g2 = 0.0;
            let mut l = 0.0;
            for &j in block {
                let c = &components[j];
                g2 += c.lipschitz * c.lipschitz;
                if c.smoothness > 0.0 {
                    match dual_bounds[j] {
                        Some(d) => l += d * c.smoothness,
                        None => {
                            return Err(Error::MissingDualBound {
                                index: j,
                                smoothness: c.smoothness,
                            })
                        }
                    }
                }
            }
            block_g.push(g2.sqrt());
            block_l.push(l);
        }
        let block_lambda = lambda_of(&block_g, &block_l);
        Ok(BlockPartition {
            blocks,
            block_g,
            block_l,
            block_lambda,
            index_to_block,
        })
    }

    /// Replaces the default bounds with measured ones; lambda is recomputed.
    pub fn override_constants(&mut self, block_g: Vec<f64>, block_l: Vec<f64>) -> Result<()> {
        if block_g.len() != self.blocks.len() || block_l.len() != self.blocks.len() {
            return Err(Error::Config("block constant overrides have wrong length".into()));
        }
        if block_g.iter().chain(&block_l).any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("block constants must be nonnegative".into()));
        }
        self.block_lambda = lambda_of(&block_g, &block_l);
        self.block_g = block_g;
        self.block_l = block_l;
        Ok(())
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    pub fn block_of(&self, j: usize) -> usize {
        self.index_to_block[j]
    }
}

fn lambda_of(g: &[f64], l: &[f64]) -> Vec<f64> {
    g.iter().zip(l).map(|(gi, li)| (gi * gi + li * li).sqrt()).collect()
}

/// Component input to `build_problem`: the analytic kind plus an optional
/// `(G_j, M_j)` override (mandatory for custom components).
#[derive(Debug, Clone)]
pub struct ComponentSpec {
    pub kind: ComponentKind,
    pub constants: Option<(f64, f64)>,
}

impl ComponentSpec {
    pub fn new(kind: ComponentKind) -> Self {
        ComponentSpec { kind, constants: None }
    }

    pub fn with_constants(kind: ComponentKind, lipschitz: f64, smoothness: f64) -> Self {
        ComponentSpec {
            kind,
            constants: Some((lipschitz, smoothness)),
        }
    }
}

/// Everything `build_problem` needs.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub d: usize,
    pub components: Vec<ComponentSpec>,
    pub partition: PartitionSpec,
    pub phi: ProxFriendly,
    pub psi: ProxFriendly,
    pub geometry_x: GeometryKind,
    pub geometry_y: GeometryKind,
    pub domain_x: Domain,
    pub domain_y: Domain,
    /// Per-coordinate `D_j` overrides; defaults come from `domain_y`.
    pub dual_bounds: Option<Vec<f64>>,
    /// Measured `(G_J, L_J)` replacing the conservative defaults.
    pub block_constants: Option<(Vec<f64>, Vec<f64>)>,
    /// `(G, L)` aggregate overrides.
    pub aggregates: Option<(f64, f64)>,
}

impl ProblemSpec {
    pub fn new(d: usize, components: Vec<ComponentSpec>) -> Self {
        ProblemSpec {
            d,
            components,
            partition: PartitionSpec::WholeVector,
            phi: ProxFriendly::Zero,
            psi: ProxFriendly::Zero,
            geometry_x: GeometryKind::Euclidean,
            geometry_y: GeometryKind::Euclidean,
            domain_x: Domain::Reals,
            domain_y: Domain::Reals,
            dual_bounds: None,
            block_constants: None,
            aggregates: None,
        }
    }
}

/// Immutable problem instance; oracles are pure and the struct is safe to
/// share across solver threads.
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    pub d: usize,
    pub n: usize,
    pub components: Vec<ComponentOracle>,
    pub partition: BlockPartition,
    pub phi: ProxFriendly,
    pub psi: ProxFriendly,
    pub mu: f64,
    pub nu: f64,
    pub geometry_x: GeometryKind,
    pub geometry_y: GeometryKind,
    pub domain_x: Domain,
    pub domain_y: Domain,
    /// Aggregate coupling bound G for the full-vector operator.
    pub aggregate_g: f64,
    /// Aggregate curvature bound L for the full-vector operator.
    pub aggregate_l: f64,
    pub dual_separable: bool,
}

impl SaddleProblem {
    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    /// Norm of the primal space.
    pub fn norm_x(&self) -> NormKind {
        self.geometry_x.primal_norm()
    }

    /// Norm of the dual space (the exponent p in [1, 2]).
    pub fn norm_y(&self) -> NormKind {
        self.geometry_y.primal_norm()
    }

    pub fn phi_value(&self, x: &[f64]) -> f64 {
        self.phi.value(x)
    }

    pub fn psi_value(&self, y: &[f64]) -> f64 {
        self.psi.value(y)
    }

    /// All coupling values f(x); diagnostic path, not counted against
    /// oracle budgets.
    pub fn coupling_values(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.value(x)).collect()
    }

    /// `L(x, y)` without feasibility checks; callers guarantee both points
    /// are feasible (prox outputs always are).
    pub fn lagrangian_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let coupling: f64 = self
            .components
            .iter()
            .zip(y)
            .map(|(c, yj)| if *yj != 0.0 { yj * c.value(x) } else { 0.0 })
            .sum();
        coupling + self.phi.value(x) - self.psi.value(y)
    }
}

/// `L(x, y)` with feasibility validation on both arguments.
pub fn evaluate_lagrangian(problem: &SaddleProblem, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != problem.d || !problem.domain_x.contains(x, FEAS_TOL) {
        return Err(Error::Domain("primal point infeasible".into()));
    }
    if y.len() != problem.n || !problem.domain_y.contains(y, FEAS_TOL) {
        return Err(Error::Domain("dual point infeasible".into()));
    }
    Ok(problem.lagrangian_unchecked(x, y))
}

/// Counts component oracle calls. One unit buys the `(f_j, grad f_j)` pair
/// at a single point; value-only queries cost the same unit.
#[derive(Debug, Clone, Default)]
pub struct OracleCounter {
    total: u64,
}

impl OracleCounter {
    pub fn new() -> Self {
        OracleCounter::default()
    }

    pub fn add(&mut self, calls: usize) {
        self.total += calls as u64;
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Values and gradients of a block, aligned with `partition.block(i)`.
#[derive(Debug, Clone)]
pub struct BlockEval {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
}

/// Evaluates `(f_j(x), grad f_j(x))` for every j in block `i`. This is the
/// solvers' only component access path, so the counter here is the oracle
/// budget ground truth.
pub fn block_gradient(
    problem: &SaddleProblem,
    x: &[f64],
    i: usize,
    counter: &mut OracleCounter,
) -> BlockEval {
    let block = problem.partition.block(i);
    counter.add(block.len());
    let mut values = Vec::with_capacity(block.len());
    let mut gradients = Vec::with_capacity(block.len());
    for &j in block {
        let mut g = vec![0.0; problem.d];
        values.push(problem.components[j].pair_into(x, &mut g));
        gradients.push(g);
    }
    BlockEval { values, gradients }
}

/// Values of a block; costs one oracle unit per component, same as the
/// pair query it is served by.
pub fn block_values(
    problem: &SaddleProblem,
    x: &[f64],
    i: usize,
    counter: &mut OracleCounter,
) -> Vec<f64> {
    let block = problem.partition.block(i);
    counter.add(block.len());
    block.iter().map(|&j| problem.components[j].value(x)).collect()
}

/// Builds and validates a problem instance.
pub fn build_problem(spec: ProblemSpec) -> Result<SaddleProblem> {
    let d = spec.d;
    let n = spec.components.len();
    if d == 0 || n == 0 {
        return Err(Error::Config("need d >= 1 and at least one component".into()));
    }

    spec.geometry_x.check_domain(&spec.domain_x, "primal")?;
    spec.geometry_y.check_domain(&spec.domain_y, "dual")?;
    spec.domain_x.check_dim(d, "primal")?;
    spec.domain_y.check_dim(n, "dual")?;

    if !spec.phi.compatible_with(spec.geometry_x) {
        return Err(Error::Convexity(
            "primal regularizer is not matched to the primal geometry".into(),
        ));
    }
    if !spec.psi.compatible_with(spec.geometry_y) {
        return Err(Error::Convexity(
            "dual regularizer is not matched to the dual geometry".into(),
        ));
    }
    spec.phi.check(d, "primal")?;
    spec.psi.check(n, "dual")?;

    let xstar = spec.geometry_x.primal_norm().dual();
    let mut components = Vec::with_capacity(n);
    for (j, cs) in spec.components.into_iter().enumerate() {
        if let Some(dim) = cs.kind.weight_dim() {
            if dim != d {
                return Err(Error::Config(format!(
                    "component {j} has weight length {dim} but d = {d}"
                )));
            }
        }
        let nonlinear = cs.kind.is_nonlinear();
        if nonlinear && spec.domain_y.allows_negative(j) {
            return Err(Error::Convexity(format!(
                "component {j} is nonlinear but the dual domain allows y_{j} < 0"
            )));
        }
        let (lipschitz, smoothness) = match cs.constants {
            Some((g, m)) => {
                if !(g >= 0.0) || !(m >= 0.0) {
                    return Err(Error::Config(format!("component {j} constants must be >= 0")));
                }
                (g, m)
            }
            None => cs
                .kind
                .default_constants(&spec.domain_x, xstar)
                .ok_or_else(|| {
                    Error::Config(format!("custom component {j} needs explicit (G_j, M_j) constants"))
                })?,
        };
        components.push(ComponentOracle {
            kind: cs.kind,
            lipschitz,
            smoothness,
            nonlinear,
        });
    }

    let dual_bounds: Vec<Option<f64>> = match &spec.dual_bounds {
        Some(v) => {
            if v.len() != n {
                return Err(Error::Config("dual_bounds has wrong length".into()));
            }
            v.iter().map(|d| Some(*d)).collect()
        }
        None => (0..n).map(|j| spec.domain_y.coordinate_bound(j)).collect(),
    };

    let blocks = spec.partition.resolve(n)?;
    let mut partition = BlockPartition::new(blocks, &components, &dual_bounds)?;
    if let Some((g, l)) = spec.block_constants {
        partition.override_constants(g, l)?;
    }

    let (aggregate_g, aggregate_l) = match spec.aggregates {
        Some((g, l)) => {
            if !(g >= 0.0) || !(l >= 0.0) {
                return Err(Error::Config("aggregate constants must be >= 0".into()));
            }
            (g, l)
        }
        None => (linalg::norm2(&partition.block_g), linalg::norm1(&partition.block_l)),
    };

    let dual_separable = spec.domain_y.is_product() || partition.num_blocks() == 1;

    Ok(SaddleProblem {
        d,
        n,
        mu: spec.phi.strength(),
        nu: spec.psi.strength(),
        components,
        partition,
        phi: spec.phi,
        psi: spec.psi,
        geometry_x: spec.geometry_x,
        geometry_y: spec.geometry_y,
        domain_x: spec.domain_x,
        domain_y: spec.domain_y,
        aggregate_g,
        aggregate_l,
        dual_separable,
    })
}

/// Spot-checks the two block bounds on random feasible points:
/// random x, x' from the primal domain, z standard normal on the block,
/// y from the dual domain. Fails on the first violation beyond a small
/// relative slack.
pub fn spot_check_block_bounds(problem: &SaddleProblem, seed: u64, trials: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xstar = problem.norm_x().dual();
    let mut grad = vec![0.0; problem.d];
    let mut acc = vec![0.0; problem.d];
    let mut acc2 = vec![0.0; problem.d];
    for trial in 0..trials {
        let x = problem.domain_x.sample(problem.d, &mut rng);
        let xp = problem.domain_x.sample(problem.d, &mut rng);
        let y = problem.domain_y.sample(problem.n, &mut rng);
        for (bi, block) in problem.partition.blocks().iter().enumerate() {
            // Bound (G_J): || sum z_j grad f_j(x) || <= G_J ||z||_2.
            acc.iter_mut().for_each(|v| *v = 0.0);
            let mut z2 = 0.0;
            for &j in block {
                let zj = standard_normal(&mut rng);
                z2 += zj * zj;
                problem.components[j].pair_into(&x, &mut grad);
                linalg::axpy(zj, &grad, &mut acc);
            }
            let lhs = xstar.eval(&acc);
            let rhs = problem.partition.block_g[bi] * z2.sqrt();
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::BoundCheck(format!(
                    "gradient bound violated on block {bi} at trial {trial}: {lhs:.6e} > {rhs:.6e}"
                )));
            }
            // Bound (L_J): || sum y_j (grad f_j(x) - grad f_j(x')) || <= L_J ||x - x'||.
            acc.iter_mut().for_each(|v| *v = 0.0);
            acc2.iter_mut().for_each(|v| *v = 0.0);
            for &j in block {
                problem.components[j].pair_into(&x, &mut grad);
                linalg::axpy(y[j], &grad, &mut acc);
                problem.components[j].pair_into(&xp, &mut grad);
                linalg::axpy(y[j], &grad, &mut acc2);
            }
            for (a, b) in acc.iter_mut().zip(&acc2) {
                *a -= b;
            }
            let lhs = xstar.eval(&acc);
            let mut diff: Vec<f64> = x.iter().zip(&xp).map(|(a, b)| a - b).collect();
            let rhs = problem.partition.block_l[bi] * problem.norm_x().eval(&diff);
            diff.clear();
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::BoundCheck(format!(
                    "curvature bound violated on block {bi} at trial {trial}: {lhs:.6e} > {rhs:.6e}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Central finite differences, independent of the analytic gradients.
    fn fd_gradient(kind: &ComponentKind, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let up = kind.value(&xp);
            xp[i] = x[i] - h;
            let dn = kind.value(&xp);
            xp[i] = x[i];
            g[i] = (up - dn) / (2.0 * h);
        }
        g
    }

    fn sample_kinds() -> Vec<ComponentKind> {
        vec![
            ComponentKind::Affine {
                w: vec![1.0, -2.0, 0.5],
                b: 0.3,
            },
            ComponentKind::SquaredAffine {
                w: vec![0.7, 1.1, -0.4],
                b: -0.2,
            },
            ComponentKind::Logistic {
                w: vec![-0.9, 0.3, 1.2],
                label: 1.0,
            },
            ComponentKind::Logistic {
                w: vec![0.5, -1.5, 0.25],
                label: -1.0,
            },
            ComponentKind::Huber {
                w: vec![2.0, 0.1, -1.0],
                b: 0.4,
                delta: 0.5,
            },
        ]
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in sample_kinds() {
            for _ in 0..100 {
                let x: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
                let mut g = vec![0.0; 3];
                let v = kind.pair_into(&x, &mut g);
                assert_relative_eq!(v, kind.value(&x), max_relative = 1e-12);
                let fd = fd_gradient(&kind, &x);
                for (gi, fi) in g.iter().zip(&fd) {
                    assert_relative_eq!(gi, fi, max_relative = 1e-5, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn huber_straddles_transition() {
        let kind = ComponentKind::Huber {
            w: vec![1.0],
            b: 0.0,
            delta: 1.0,
        };
        assert_relative_eq!(kind.value(&[0.5]), 0.125);
        assert_relative_eq!(kind.value(&[2.0]), 1.5);
        let mut g = vec![0.0];
        kind.pair_into(&[-3.0], &mut g);
        assert_relative_eq!(g[0], -1.0);
    }

    #[test]
    fn squared_affine_constants_on_ball() {
        // f(x) = (<z, x> - b)^2 / 2 on an l2 ball of radius R:
        // G = ||z|| (R ||z|| + |b|), M = ||z||^2.
        let w = vec![3.0, 4.0];
        let b = 2.0;
        let r = 1.5;
        let kind = ComponentKind::SquaredAffine { w: w.clone(), b };
        let domain = Domain::Ball {
            center: vec![0.0, 0.0],
            radius: r,
        };
        let (g, m) = kind.default_constants(&domain, NormKind::L2).unwrap();
        let wn = linalg::norm2(&w);
        assert_relative_eq!(g, wn * (r * wn + b.abs()), max_relative = 1e-12);
        assert_relative_eq!(m, wn * wn, max_relative = 1e-12);
    }

    #[test]
    fn affine_constants_follow_dual_norm() {
        let kind = ComponentKind::Affine {
            w: vec![0.0, 1.0],
            b: 0.0,
        };
        let (g2, _) = kind.default_constants(&Domain::Reals, NormKind::L2).unwrap();
        let (ginf, _) = kind.default_constants(&Domain::Simplex, NormKind::Linf).unwrap();
        assert_eq!(g2, 1.0);
        assert_eq!(ginf, 1.0);
    }

    fn matrix_game_spec() -> ProblemSpec {
        // Matching pennies payoff [[0, 1], [1, 0]] on simplex x simplex.
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let components = rows
            .into_iter()
            .map(|w| ComponentSpec::new(ComponentKind::Affine { w, b: 0.0 }))
            .collect();
        let mut spec = ProblemSpec::new(2, components);
        spec.partition = PartitionSpec::Singletons;
        spec.geometry_x = GeometryKind::EntropySimplex;
        spec.geometry_y = GeometryKind::EntropySimplex;
        spec.domain_x = Domain::Simplex;
        spec.domain_y = Domain::Simplex;
        spec
    }

    #[test]
    fn matrix_game_block_constants() {
        let p = build_problem(matrix_game_spec()).unwrap();
        assert_eq!(p.partition.block_g, vec![1.0, 1.0]);
        assert_eq!(p.partition.block_l, vec![0.0, 0.0]);
        assert_eq!(p.partition.block_lambda, vec![1.0, 1.0]);
        assert_relative_eq!(p.aggregate_g, 2.0f64.sqrt());
        assert_eq!(p.aggregate_l, 0.0);
        assert!(!p.dual_separable);
        for (bi, (g, l)) in p.partition.block_g.iter().zip(&p.partition.block_l).enumerate() {
            let lam = p.partition.block_lambda[bi];
            assert_eq!(lam, (g * g + l * l).sqrt());
        }
    }

    #[test]
    fn lagrangian_of_matrix_game() {
        let p = build_problem(matrix_game_spec()).unwrap();
        // L(x, y) = y^T A x with A = [[0,1],[1,0]].
        let v = evaluate_lagrangian(&p, &[0.25, 0.75], &[0.6, 0.4]).unwrap();
        assert_relative_eq!(v, 0.6 * 0.75 + 0.4 * 0.25, max_relative = 1e-14);
        assert!(matches!(
            evaluate_lagrangian(&p, &[0.5, 0.6], &[0.5, 0.5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn scalar_toy_constants() {
        // f_1(x) = x, phi = x^2/2, psi = y^2/2 on R x R.
        let mut spec = ProblemSpec::new(
            1,
            vec![ComponentSpec::new(ComponentKind::Affine { w: vec![1.0], b: 0.0 })],
        );
        spec.phi = ProxFriendly::SquaredNorm { strength: 1.0 };
        spec.psi = ProxFriendly::SquaredNorm { strength: 1.0 };
        let p = build_problem(spec).unwrap();
        assert_eq!(p.mu, 1.0);
        assert_eq!(p.nu, 1.0);
        assert_eq!(p.aggregate_g, 1.0);
        assert_eq!(p.aggregate_l, 0.0);
        assert!(p.dual_separable);
    }

    #[test]
    fn partition_validation_rejects_bad_blocks() {
        let spec = matrix_game_spec();
        let mut overlap = spec.clone();
        overlap.partition = PartitionSpec::Explicit(vec![vec![0, 1], vec![1]]);
        assert!(matches!(build_problem(overlap), Err(Error::Partition(_))));
        let mut missing = spec.clone();
        missing.partition = PartitionSpec::Explicit(vec![vec![0]]);
        assert!(matches!(build_problem(missing), Err(Error::Partition(_))));
        let mut out_of_range = spec;
        out_of_range.partition = PartitionSpec::Explicit(vec![vec![0], vec![2]]);
        assert!(matches!(build_problem(out_of_range), Err(Error::Partition(_))));
    }

    #[test]
    fn nonlinear_component_needs_signed_dual_guard() {
        let mut spec = ProblemSpec::new(
            2,
            vec![ComponentSpec::new(ComponentKind::SquaredAffine {
                w: vec![1.0, 0.0],
                b: 0.0,
            })],
        );
        spec.domain_x = Domain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        spec.domain_y = Domain::Reals;
        assert!(matches!(build_problem(spec.clone()), Err(Error::Convexity(_))));
        spec.domain_y = Domain::NonnegOrthant;
        spec.dual_bounds = Some(vec![1.0]);
        let p = build_problem(spec).unwrap();
        assert!(p.components[0].nonlinear);
    }

    #[test]
    fn smoothness_without_dual_bound_is_rejected() {
        // Nonneg orthant has no coordinate bound, so M_j > 0 cannot be
        // folded into L_J without an explicit D_j.
        let mut spec = ProblemSpec::new(
            2,
            vec![ComponentSpec::new(ComponentKind::SquaredAffine {
                w: vec![1.0, 1.0],
                b: 0.5,
            })],
        );
        spec.domain_x = Domain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        spec.domain_y = Domain::NonnegOrthant;
        assert!(matches!(
            build_problem(spec.clone()),
            Err(Error::MissingDualBound { index: 0, .. })
        ));
        spec.dual_bounds = Some(vec![2.0]);
        let p = build_problem(spec).unwrap();
        let c = &p.components[0];
        assert_relative_eq!(p.partition.block_l[0], 2.0 * c.smoothness);
    }

    #[test]
    fn uniform_partition_shapes() {
        let blocks = PartitionSpec::Uniform(3).resolve(8).unwrap();
        assert_eq!(blocks, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7]]);
        assert!(PartitionSpec::Uniform(9).resolve(8).is_err());
    }

    #[test]
    fn default_aggregates_respect_l1_caps() {
        let p = build_problem(matrix_game_spec()).unwrap();
        assert!(p.aggregate_g <= linalg::norm1(&p.partition.block_g) + 1e-15);
        assert!(p.aggregate_l <= linalg::norm1(&p.partition.block_l) + 1e-15);
    }

    #[test]
    fn spot_checks_pass_on_mixed_instance() {
        // Squared and logistic components over a ball, dual on the simplex.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 4;
        let mut comps = Vec::new();
        for j in 0..6 {
            let w: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
            let kind = if j % 2 == 0 {
                ComponentKind::SquaredAffine { w, b: 0.1 * j as f64 }
            } else {
                ComponentKind::Logistic { w, label: 1.0 }
            };
            comps.push(ComponentSpec::new(kind));
        }
        let mut spec = ProblemSpec::new(d, comps);
        spec.partition = PartitionSpec::Uniform(3);
        spec.domain_x = Domain::Ball {
            center: vec![0.0; d],
            radius: 2.0,
        };
        spec.geometry_y = GeometryKind::EntropySimplex;
        spec.domain_y = Domain::Simplex;
        let p = build_problem(spec).unwrap();
        spot_check_block_bounds(&p, 11, 50).unwrap();
    }

    #[test]
    fn block_gradient_counts_components() {
        let p = build_problem(matrix_game_spec()).unwrap();
        let mut counter = OracleCounter::new();
        let eval = block_gradient(&p, &[0.5, 0.5], 0, &mut counter);
        assert_eq!(counter.total(), 1);
        assert_eq!(eval.values, vec![0.5]);
        assert_eq!(eval.gradients[0], vec![0.0, 1.0]);
        block_values(&p, &[0.5, 0.5], 1, &mut counter);
        assert_eq!(counter.total(), 2);
    }

    #[test]
    fn domain_samples_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let domains = vec![
            (Domain::Reals, 3),
            (Domain::Simplex, 4),
            (Domain::NonnegOrthant, 3),
            (
                Domain::Box {
                    lo: vec![-1.0, 0.0],
                    hi: vec![1.0, 2.0],
                },
                2,
            ),
            (
                Domain::Ball {
                    center: vec![1.0, 1.0, 1.0],
                    radius: 0.5,
                },
                3,
            ),
        ];
        for (dom, m) in domains {
            for _ in 0..200 {
                let z = dom.sample(m, &mut rng);
                assert!(dom.contains(&z, 1e-12), "{dom:?} produced infeasible {z:?}");
            }
        }
    }
}
