//! Dense vector kernels shared by the solvers.
//!
//! Everything operates on `&[f64]` slices; callers own all buffers. The
//! solvers keep per-iteration allocation out of their hot loops by reusing
//! scratch vectors, so these helpers never allocate except where the
//! signature returns a fresh `Vec`.

/// Inner product `<a, b>`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `||a - b||_2`.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Norms used for primal and dual spaces. The primal norm is `L2` under a
/// euclidean geometry and `L1` under an entropy geometry; `Linf` appears
/// only as the dual of `L1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => norm1(v),
            NormKind::L2 => norm2(v),
            NormKind::Linf => norm_inf(v),
        }
    }

    /// Norm of the dual space.
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::Linf,
            NormKind::L2 => NormKind::L2,
            NormKind::Linf => NormKind::L1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_agree_on_simple_vectors() {
        let v = [3.0, -4.0];
        assert_eq!(norm1(&v), 7.0);
        assert_eq!(norm2(&v), 5.0);
        assert_eq!(norm_inf(&v), 4.0);
        assert_eq!(NormKind::L1.dual(), NormKind::Linf);
        assert_eq!(NormKind::L2.dual(), NormKind::L2);
    }

    #[test]
    fn axpy_accumulates() {
        let mut out = vec![1.0, 1.0];
        axpy(2.0, &[1.0, -1.0], &mut out);
        assert_eq!(out, vec![3.0, -1.0]);
    }
}
