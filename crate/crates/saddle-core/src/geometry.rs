//! Bregman divergences and the multi-anchor prox step shared by every
//! solver update.
//!
//! A geometry fixes a 1-strongly convex generator h_gen and its divergence
//! Delta(u, z) = h_gen(u) - h_gen(z) - <grad h_gen(z), u - z>:
//!
//! ```text
//!     euclidean:        h_gen = ||u||^2 / 2,        Delta = ||u - z||^2 / 2,
//!     entropy kinds:    h_gen = sum u_i ln u_i - u_i,
//!                       Delta = sum u_i ln(u_i / z_i) - u_i + z_i,
//! ```
//!
//! the entropy divergence reducing to KL(u || z) on the simplex. The prox
//! step solved here is
//!
//! ```text
//!     argmin_{u in domain}  a <g, u> + a h(u) + c sum_i w_i Delta(u, z_i)
//! ```
//!
//! with anchor weights w_i >= 0 summing to one. The anchors enter only
//! through the aggregate m = sum_i w_i grad h_gen(z_i), because
//! sum_i w_i Delta(u, z_i) = h_gen(u) - <m, u> + const. Solvers exploit
//! this by maintaining m incrementally instead of touching every anchor
//! per step. The dual (maximization) update is the same operation with g
//! negated.

use crate::error::{Error, Result};
use crate::linalg::{self, NormKind};
use crate::problem::{Domain, ProxFriendly};

/// Floor applied to entropy prox outputs so that points adjacent to a
/// vertex stay strictly positive and later divergences stay finite.
const ENTROPY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Euclidean,
    EntropySimplex,
    EntropyOrthant,
}

impl GeometryKind {
    /// Norm the divergence is 1-strongly convex against: l2 for euclidean,
    /// l1 for the entropy kinds.
    pub fn primal_norm(self) -> NormKind {
        match self {
            GeometryKind::Euclidean => NormKind::L2,
            GeometryKind::EntropySimplex | GeometryKind::EntropyOrthant => NormKind::L1,
        }
    }

    /// Entropy geometries are tied to their domains; euclidean works with
    /// any supported domain.
    pub fn check_domain(self, domain: &Domain, side: &str) -> Result<()> {
        let ok = match self {
            GeometryKind::Euclidean => true,
            GeometryKind::EntropySimplex => matches!(domain, Domain::Simplex),
            GeometryKind::EntropyOrthant => matches!(domain, Domain::NonnegOrthant),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{side} geometry {self:?} does not match domain {domain:?}"
            )))
        }
    }

    /// `grad h_gen(z)` written into `out`.
    pub fn generator_gradient_into(self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), out.len());
        match self {
            GeometryKind::Euclidean => out.copy_from_slice(z),
            GeometryKind::EntropySimplex | GeometryKind::EntropyOrthant => {
                for (o, v) in out.iter_mut().zip(z) {
                    *o = v.ln();
                }
            }
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::EntropySimplex => "entropy-simplex",
            GeometryKind::EntropyOrthant => "entropy-orthant",
        }
    }

    pub fn from_tag(tag: &str) -> Option<GeometryKind> {
        match tag {
            "euclidean" => Some(GeometryKind::Euclidean),
            "entropy-simplex" => Some(GeometryKind::EntropySimplex),
            "entropy-orthant" => Some(GeometryKind::EntropyOrthant),
            _ => None,
        }
    }
}

/// `Delta(u, z)`; `z` must be interior (strictly positive for entropy).
pub fn divergence(kind: GeometryKind, u: &[f64], z: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), z.len());
    match kind {
        GeometryKind::Euclidean => {
            let d = linalg::dist2(u, z);
            0.5 * d * d
        }
        GeometryKind::EntropySimplex | GeometryKind::EntropyOrthant => u
            .iter()
            .zip(z)
            .map(|(ui, zi)| {
                debug_assert!(*zi > 0.0, "entropy divergence needs interior anchor");
                if *ui > 0.0 {
                    ui * (ui / zi).ln() - ui + zi
                } else {
                    *zi
                }
            })
            .sum(),
    }
}

/// Weighted anchor combination `sum_i w_i grad h_gen(z_i)`, the sufficient
/// statistic the prox step consumes.
pub fn anchor_aggregate(kind: GeometryKind, points: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(points.len(), weights.len());
    let m = points[0].len();
    let mut agg = vec![0.0; m];
    let mut grad = vec![0.0; m];
    for (z, w) in points.iter().zip(weights) {
        kind.generator_gradient_into(z, &mut grad);
        linalg::axpy(*w, &grad, &mut agg);
    }
    agg
}

/// Prox anchors, reduced to their aggregate generator gradient.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    aggregate: Vec<f64>,
}

impl AnchorSet {
    pub fn single(kind: GeometryKind, z: &[f64]) -> AnchorSet {
        let mut aggregate = vec![0.0; z.len()];
        kind.generator_gradient_into(z, &mut aggregate);
        AnchorSet { aggregate }
    }

    /// Validates the weights (nonnegative, summing to one within 1e-12)
    /// and caches the aggregate.
    pub fn weighted(kind: GeometryKind, points: &[&[f64]], weights: &[f64]) -> Result<AnchorSet> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Config("anchor points and weights must align".into()));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Config("anchor weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("anchor weights sum to {sum}, expected 1")));
        }
        Ok(AnchorSet {
            aggregate: anchor_aggregate(kind, points, weights),
        })
    }

    /// Wraps an aggregate maintained incrementally by a solver. The caller
    /// is responsible for its consistency; table invariants re-check it
    /// against a full recompute.
    pub fn from_aggregate(aggregate: Vec<f64>) -> AnchorSet {
        AnchorSet { aggregate }
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }
}

/// Solves `argmin_{u in domain} a <g, u> + a h(u) + c sum w_i Delta(u, z_i)`.
///
/// Supported regularizers: `h = 0` under any geometry, quadratic h under
/// euclidean (folded into the stiffness), and KL-to-anchor h under entropy
/// (folded into the exponent). Entropy solutions are strictly positive.
pub fn prox_multi(
    kind: GeometryKind,
    domain: &Domain,
    g: &[f64],
    a: f64,
    h: &ProxFriendly,
    c: f64,
    anchors: &AnchorSet,
) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(Error::Config(format!("prox stiffness must be positive, got {c}")));
    }
    if !(a >= 0.0) {
        return Err(Error::Config(format!("prox scale must be nonnegative, got {a}")));
    }
    let m = g.len();
    debug_assert_eq!(anchors.aggregate().len(), m);
    match kind {
        GeometryKind::Euclidean => prox_euclidean(domain, g, a, h, c, anchors.aggregate()),
        GeometryKind::EntropySimplex => {
            let t = entropy_exponent(g, a, h, c, anchors.aggregate())?;
            let mut u = softmax(&t);
            for v in u.iter_mut() {
                *v = v.max(ENTROPY_FLOOR);
            }
            Ok(u)
        }
        GeometryKind::EntropyOrthant => {
            let t = entropy_exponent(g, a, h, c, anchors.aggregate())?;
            Ok(t.iter().map(|ti| ti.exp().max(ENTROPY_FLOOR)).collect())
        }
    }
}

/// Euclidean case. The smooth part is isotropic quadratic
/// `((a s + c)/2) ||u - u*||^2 + const`, so the constrained solution is
/// the projection of the unconstrained minimizer u*.
fn prox_euclidean(
    domain: &Domain,
    g: &[f64],
    a: f64,
    h: &ProxFriendly,
    c: f64,
    aggregate: &[f64],
) -> Result<Vec<f64>> {
    let (s, center) = match h {
        ProxFriendly::Zero => (0.0, None),
        ProxFriendly::SquaredNorm { strength } => (*strength, None),
        ProxFriendly::SquaredDistance { strength, center } => (*strength, Some(center.as_slice())),
        ProxFriendly::KlToAnchor { .. } => {
            return Err(Error::ProxUnsupported(
                "KL regularizer under euclidean geometry".into(),
            ))
        }
    };
    let stiffness = a * s + c;
    let mut u: Vec<f64> = (0..g.len())
        .map(|i| {
            let mut num = c * aggregate[i] - a * g[i];
            if let Some(ctr) = center {
                num += a * s * ctr[i];
            }
            num / stiffness
        })
        .collect();
    project_euclidean(domain, &mut u);
    Ok(u)
}

fn project_euclidean(domain: &Domain, u: &mut [f64]) {
    match domain {
        Domain::Reals => {}
        Domain::Box { lo, hi } => {
            for ((v, l), h) in u.iter_mut().zip(lo).zip(hi) {
                *v = v.clamp(*l, *h);
            }
        }
        Domain::NonnegOrthant => {
            for v in u.iter_mut() {
                *v = v.max(0.0);
            }
        }
        Domain::Ball { center, radius } => {
            let dist = linalg::dist2(u, center);
            if dist > *radius {
                let scale = radius / dist;
                for (v, c) in u.iter_mut().zip(center) {
                    *v = c + (*v - c) * scale;
                }
            }
        }
        Domain::Simplex => project_simplex(u),
    }
}

/// Euclidean projection onto the probability simplex by the sorted
/// water-filling rule: u = max(v - tau, 0) with tau chosen so the result
/// sums to one.
pub fn project_simplex(v: &mut [f64]) {
    let m = v.len();
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, vj) in sorted.iter().enumerate() {
        cumsum += vj;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if vj - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
        sum += *x;
    }
    // Exact renormalization absorbs the last-ulp drift of the threshold.
    if sum > 0.0 {
        for x in v.iter_mut() {
            *x /= sum;
        }
    } else {
        v.iter_mut().for_each(|x| *x = 1.0 / m as f64);
    }
}

/// Entropy case exponent: with generator gradient ln u, the stationarity
/// condition is `(a s + c) ln u = c m + a s ln(alpha) - a g` up to the
/// simplex multiplier, where s and alpha come from a KL regularizer
/// (s = 0 without one).
fn entropy_exponent(
    g: &[f64],
    a: f64,
    h: &ProxFriendly,
    c: f64,
    aggregate: &[f64],
) -> Result<Vec<f64>> {
    let (s, anchor) = match h {
        ProxFriendly::Zero => (0.0, None),
        ProxFriendly::KlToAnchor { strength, anchor } => (*strength, Some(anchor.as_slice())),
        ProxFriendly::SquaredNorm { .. } | ProxFriendly::SquaredDistance { .. } => {
            return Err(Error::ProxUnsupported(
                "quadratic regularizer under entropy geometry".into(),
            ))
        }
    };
    let stiffness = a * s + c;
    Ok((0..g.len())
        .map(|i| {
            let mut num = c * aggregate[i] - a * g[i];
            if let Some(al) = anchor {
                num += a * s * al[i].ln();
            }
            num / stiffness
        })
        .collect())
}

/// `exp(t - max t) / sum`, the log-domain-shifted simplex normalization.
fn softmax(t: &[f64]) -> Vec<f64> {
    let max = t.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let mut u: Vec<f64> = t.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = u.iter().sum();
    u.iter_mut().for_each(|v| *v /= sum);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Objective evaluated from raw anchor points, independent of the
    /// aggregate shortcut inside `prox_multi`.
    fn objective(
        kind: GeometryKind,
        g: &[f64],
        a: f64,
        h: &ProxFriendly,
        c: f64,
        points: &[&[f64]],
        weights: &[f64],
        u: &[f64],
    ) -> f64 {
        let breg: f64 = points
            .iter()
            .zip(weights)
            .map(|(z, w)| w * divergence(kind, u, z))
            .sum();
        a * linalg::dot(g, u) + a * h.value(u) + c * breg
    }

    #[test]
    fn euclidean_weighted_mean() {
        let points: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, 1.0]];
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        let weights = [0.5, 0.3, 0.2];
        let anchors = AnchorSet::weighted(GeometryKind::Euclidean, &refs, &weights).unwrap();
        let u = prox_multi(
            GeometryKind::Euclidean,
            &Domain::Reals,
            &[0.0, 0.0],
            1.0,
            &ProxFriendly::Zero,
            3.7,
            &anchors,
        )
        .unwrap();
        assert_relative_eq!(u[0], 0.5 - 0.2, max_relative = 1e-14);
        assert_relative_eq!(u[1], 0.6 + 0.2, max_relative = 1e-14);
    }

    #[test]
    fn euclidean_single_anchor_closed_form() {
        // argmin a<g,u> + c * ||u-z||^2/2 = z - (a/c) g.
        let z = [2.0, -1.0];
        let anchors = AnchorSet::single(GeometryKind::Euclidean, &z);
        let g = [1.0, 0.0];
        let (a, c) = (0.75, 3.0);
        let u = prox_multi(
            GeometryKind::Euclidean,
            &Domain::Reals,
            &g,
            a,
            &ProxFriendly::Zero,
            c,
            &anchors,
        )
        .unwrap();
        assert_relative_eq!(u[0], z[0] - a / c * g[0], max_relative = 1e-14);
        assert_relative_eq!(u[1], z[1], max_relative = 1e-14);
        // Grid confirmation along the active coordinate.
        let best = (-400..400)
            .map(|i| z[0] + i as f64 * 0.005)
            .min_by(|p, q| {
                let op = a * g[0] * p + 0.5 * c * (p - z[0]).powi(2);
                let oq = a * g[0] * q + 0.5 * c * (q - z[0]).powi(2);
                op.partial_cmp(&oq).unwrap()
            })
            .unwrap();
        assert!((best - u[0]).abs() <= 0.005 + 1e-12);
    }

    #[test]
    fn entropy_uniform_anchor_stays_uniform() {
        let z = [0.25; 4];
        let anchors = AnchorSet::single(GeometryKind::EntropySimplex, &z);
        let u = prox_multi(
            GeometryKind::EntropySimplex,
            &Domain::Simplex,
            &[0.0; 4],
            1.0,
            &ProxFriendly::Zero,
            2.0,
            &anchors,
        )
        .unwrap();
        for v in u {
            assert_relative_eq!(v, 0.25, max_relative = 1e-14);
        }
    }

    /// Independent oracle: solve the simplex stationarity condition
    /// ln u_i = t_i - lambda, sum u_i = 1 by bisection on lambda.
    fn simplex_prox_bisection(t: &[f64]) -> Vec<f64> {
        let mut lo = t.iter().fold(f64::INFINITY, |m, v| m.min(*v)) - 50.0;
        let mut hi = t.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) + 50.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let sum: f64 = t.iter().map(|ti| (ti - mid).exp()).sum();
            if sum > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        t.iter().map(|ti| (ti - lam).exp()).collect()
    }

    #[test]
    fn entropy_prox_matches_bisection_oracle() {
        // anchor (1/2, 1/2), a = c = 1, g = (-ln 2, 0): stationarity gives
        // exponent t_i = ln z_i - g_i, hence u = (2/3, 1/3).
        let z = [0.5, 0.5];
        let g = [-(2.0f64).ln(), 0.0];
        let anchors = AnchorSet::single(GeometryKind::EntropySimplex, &z);
        let u = prox_multi(
            GeometryKind::EntropySimplex,
            &Domain::Simplex,
            &g,
            1.0,
            &ProxFriendly::Zero,
            1.0,
            &anchors,
        )
        .unwrap();
        let t: Vec<f64> = (0..2).map(|i| z[i].ln() - g[i]).collect();
        let oracle = simplex_prox_bisection(&t);
        assert_relative_eq!(u[0], oracle[0], max_relative = 1e-12);
        assert_relative_eq!(u[1], oracle[1], max_relative = 1e-12);
        assert_relative_eq!(u[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(u[1], 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn multi_anchor_equals_synthetic_single_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for kind in [GeometryKind::Euclidean, GeometryKind::EntropySimplex] {
            let domain = match kind {
                GeometryKind::Euclidean => Domain::Reals,
                _ => Domain::Simplex,
            };
            for _ in 0..20 {
                let m = 5;
                let points: Vec<Vec<f64>> = (0..3)
                    .map(|_| domain.sample(m, &mut rng))
                    .map(|mut p| {
                        if kind != GeometryKind::Euclidean {
                            p.iter_mut().for_each(|v| *v = v.max(1e-3));
                            let s: f64 = p.iter().sum();
                            p.iter_mut().for_each(|v| *v /= s);
                        }
                        p
                    })
                    .collect();
                let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
                let weights = [0.2, 0.5, 0.3];
                let g: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let multi = AnchorSet::weighted(kind, &refs, &weights).unwrap();
                let agg = multi.aggregate().to_vec();
                // Synthetic anchor with grad h_gen(z*) equal to the aggregate.
                let synthetic: Vec<f64> = match kind {
                    GeometryKind::Euclidean => agg.clone(),
                    _ => agg.iter().map(|v| v.exp()).collect(),
                };
                let single = AnchorSet::single(kind, &synthetic);
                let a = rng.gen_range(0.1..2.0);
                let c = rng.gen_range(0.5..4.0);
                let u1 = prox_multi(kind, &domain, &g, a, &ProxFriendly::Zero, c, &multi).unwrap();
                let u2 = prox_multi(kind, &domain, &g, a, &ProxFriendly::Zero, c, &single).unwrap();
                for (p, q) in u1.iter().zip(&u2) {
                    assert_relative_eq!(p, q, max_relative = 1e-10, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn three_point_inequality_holds() {
        // With h relatively gamma-strongly convex and stiffness
        // c = A*gamma + gamma0, the prox output satisfies
        // m(u) >= m(z+) + (c + a*gamma) * Delta(u, z+).
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = 4;
        for kind in [GeometryKind::Euclidean, GeometryKind::EntropySimplex] {
            let domain = match kind {
                GeometryKind::Euclidean => Domain::Box {
                    lo: vec![-2.0; m],
                    hi: vec![2.0; m],
                },
                _ => Domain::Simplex,
            };
            for trial in 0..25 {
                let anchors_raw: Vec<Vec<f64>> = (0..2)
                    .map(|_| {
                        let mut p = domain.sample(m, &mut rng);
                        if kind != GeometryKind::Euclidean {
                            p.iter_mut().for_each(|v| *v = v.max(1e-3));
                            let s: f64 = p.iter().sum();
                            p.iter_mut().for_each(|v| *v /= s);
                        }
                        p
                    })
                    .collect();
                let refs: Vec<&[f64]> = anchors_raw.iter().map(|p| p.as_slice()).collect();
                let weights = [0.6, 0.4];
                let g: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let gamma = rng.gen_range(0.0..2.0);
                let h = match kind {
                    GeometryKind::Euclidean => {
                        if trial % 2 == 0 {
                            ProxFriendly::SquaredNorm { strength: gamma }
                        } else {
                            ProxFriendly::Zero
                        }
                    }
                    _ => {
                        if trial % 2 == 0 {
                            ProxFriendly::KlToAnchor {
                                strength: gamma,
                                anchor: vec![1.0 / m as f64; m],
                            }
                        } else {
                            ProxFriendly::Zero
                        }
                    }
                };
                let gamma = h.strength();
                let a = rng.gen_range(0.05..1.5);
                let c = rng.gen_range(0.5..5.0);
                let anchors = AnchorSet::weighted(kind, &refs, &weights).unwrap();
                let z_plus = prox_multi(kind, &domain, &g, a, &h, c, &anchors).unwrap();
                let m_plus = objective(kind, &g, a, &h, c, &refs, &weights, &z_plus);
                for _ in 0..100 {
                    let mut u = domain.sample(m, &mut rng);
                    if kind != GeometryKind::Euclidean {
                        u.iter_mut().for_each(|v| *v = v.max(1e-9));
                        let s: f64 = u.iter().sum();
                        u.iter_mut().for_each(|v| *v /= s);
                    }
                    let m_u = objective(kind, &g, a, &h, c, &refs, &weights, &u);
                    let gain = (c + a * gamma) * divergence(kind, &u, &z_plus);
                    assert!(
                        m_u - m_plus - gain >= -1e-8,
                        "{kind:?}: three-point slack {:.3e}",
                        m_u - m_plus - gain
                    );
                }
            }
        }
    }

    #[test]
    fn box_and_ball_projections_bind() {
        let anchors = AnchorSet::single(GeometryKind::Euclidean, &[0.9, 0.0]);
        let u = prox_multi(
            GeometryKind::Euclidean,
            &Domain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            &[-1.0, 0.5],
            1.0,
            &ProxFriendly::Zero,
            1.0,
            &anchors,
        )
        .unwrap();
        assert_relative_eq!(u[0], 1.0);
        assert_relative_eq!(u[1], 0.0);

        let ball = Domain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let far = AnchorSet::single(GeometryKind::Euclidean, &[5.0, 0.0]);
        let u = prox_multi(
            GeometryKind::Euclidean,
            &ball,
            &[0.0, 0.0],
            1.0,
            &ProxFriendly::Zero,
            1.0,
            &far,
        )
        .unwrap();
        assert_relative_eq!(linalg::norm2(&u), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn simplex_projection_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut u = v.clone();
            project_simplex(&mut u);
            assert!(Domain::Simplex.contains(&u, 1e-12));
            // Compare against a dense grid restricted to the simplex.
            let obj = |p: &[f64]| linalg::dist2(p, &v);
            let mut best = f64::INFINITY;
            let steps = 30;
            for i in 0..=steps {
                for j in 0..=steps - i {
                    for k in 0..=steps - i - j {
                        let l = steps - i - j - k;
                        let p = [
                            i as f64 / steps as f64,
                            j as f64 / steps as f64,
                            k as f64 / steps as f64,
                            l as f64 / steps as f64,
                        ];
                        best = best.min(obj(&p));
                    }
                }
            }
            assert!(obj(&u) <= best + 0.1, "projection should beat the coarse grid");
        }
    }

    #[test]
    fn prox_first_order_optimality() {
        // Zeroth-order certificate: no feasible point improves the
        // objective by more than the tolerance.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let m = 3;
        let domain = Domain::Simplex;
        for _ in 0..20 {
            let z = {
                let mut p = domain.sample(m, &mut rng);
                p.iter_mut().for_each(|v| *v = v.max(1e-3));
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= s);
                p
            };
            let g: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let anchors = AnchorSet::single(GeometryKind::EntropySimplex, &z);
            let u = prox_multi(
                GeometryKind::EntropySimplex,
                &domain,
                &g,
                1.0,
                &ProxFriendly::Zero,
                2.0,
                &anchors,
            )
            .unwrap();
            let zr: Vec<&[f64]> = vec![&z];
            let base = objective(GeometryKind::EntropySimplex, &g, 1.0, &ProxFriendly::Zero, 2.0, &zr, &[1.0], &u);
            for _ in 0..200 {
                let v = domain.sample(m, &mut rng);
                let other =
                    objective(GeometryKind::EntropySimplex, &g, 1.0, &ProxFriendly::Zero, 2.0, &zr, &[1.0], &v);
                assert!(other >= base - 1e-8);
            }
        }
    }

    #[test]
    fn divergence_closed_forms() {
        assert_relative_eq!(
            divergence(GeometryKind::Euclidean, &[1.0, 0.0], &[0.0, 0.0]),
            0.5
        );
        assert_relative_eq!(divergence(GeometryKind::EntropySimplex, &[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_relative_eq!(
            divergence(GeometryKind::EntropySimplex, &[1.0, 0.0], &[0.5, 0.5]),
            2.0f64.ln(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn unsupported_pairs_are_rejected() {
        let anchors = AnchorSet::single(GeometryKind::Euclidean, &[0.0]);
        let err = prox_multi(
            GeometryKind::Euclidean,
            &Domain::Reals,
            &[0.0],
            1.0,
            &ProxFriendly::KlToAnchor {
                strength: 1.0,
                anchor: vec![1.0],
            },
            1.0,
            &anchors,
        );
        assert!(matches!(err, Err(Error::ProxUnsupported(_))));
        let anchors = AnchorSet::single(GeometryKind::EntropySimplex, &[0.5, 0.5]);
        let err = prox_multi(
            GeometryKind::EntropySimplex,
            &Domain::Simplex,
            &[0.0, 0.0],
            1.0,
            &ProxFriendly::SquaredNorm { strength: 1.0 },
            1.0,
            &anchors,
        );
        assert!(matches!(err, Err(Error::ProxUnsupported(_))));
    }

    #[test]
    fn entropy_prox_survives_extreme_exponents() {
        // Large linear terms push one coordinate toward a vertex; the
        // log-domain shift must keep the output finite and positive.
        let anchors = AnchorSet::single(GeometryKind::EntropySimplex, &[0.5, 0.5]);
        let u = prox_multi(
            GeometryKind::EntropySimplex,
            &Domain::Simplex,
            &[-500.0, 500.0],
            1.0,
            &ProxFriendly::Zero,
            1.0,
            &anchors,
        )
        .unwrap();
        assert!(u.iter().all(|v| v.is_finite() && *v > 0.0));
        assert_relative_eq!(u.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }
}
