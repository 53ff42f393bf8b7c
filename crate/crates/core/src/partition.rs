//! Partition functions `ψ: [d] → [c]` defining the Subset-Norm groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layout {
    /// Consecutive blocks `{ik, ..., ik + k - 1}`; the last one may be shorter.
    Blocks {
        size: usize,
    },
    /// `ψ(j) = j mod stride`: column groups of a row-major matrix.
    Strided {
        stride: usize,
    },
    Explicit(Vec<usize>),
}

/// A partition of `d` coordinates into `c` non-empty disjoint subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    d: usize,
    c: usize,
    layout: Layout,
    /// Only kept for explicit assignments; regular layouts derive sizes.
    explicit_sizes: Option<Vec<usize>>,
}

impl Partition {
    /// Consecutive blocks of size `k`; `k` must divide `d`.
    pub fn equipartition(d: usize, k: usize) -> Result<Partition> {
        if k == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "equipartition needs d, k >= 1 (d={d}, k={k})"
            )));
        }
        if d % k != 0 {
            return Err(Error::invalid(format!(
                "subset size {k} does not divide d = {d}; pad or use a ragged partition"
            )));
        }
        Ok(Partition::blocks(d, k))
    }

    /// Consecutive blocks of size `k` with a shorter final block when `k ∤ d`.
    pub fn ragged(d: usize, k: usize) -> Result<Partition> {
        if k == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "ragged partition needs d, k >= 1 (d={d}, k={k})"
            )));
        }
        Ok(Partition::blocks(d, k.min(d)))
    }

    fn blocks(d: usize, k: usize) -> Partition {
        Partition {
            d,
            c: d.div_ceil(k),
            layout: Layout::Blocks { size: k },
            explicit_sizes: None,
        }
    }

    /// One subset holding every coordinate (AdaGrad-Norm grouping).
    pub fn single(d: usize) -> Result<Partition> {
        Partition::equipartition(d, d)
    }

    /// Singleton subsets (coordinate-wise grouping).
    pub fn coordinate(d: usize) -> Result<Partition> {
        Partition::equipartition(d, 1)
    }

    /// Groups an `m × n` row-major parameter along its smaller dimension:
    /// one subset per row when `m >= n`, one per column otherwise.
    pub fn heuristic_2d(m: usize, n: usize) -> Result<Partition> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("shape {m}x{n} must be positive")));
        }
        if m >= n {
            Ok(Partition::blocks(m * n, n))
        } else {
            Ok(Partition {
                d: m * n,
                c: n,
                layout: Layout::Strided { stride: n },
                explicit_sizes: None,
            })
        }
    }

    /// Ragged blocks of size `max(1, round(sqrt(d) / 2))`, a default for
    /// parameters without a useful 2D shape.
    pub fn sqrt_half(d: usize) -> Result<Partition> {
        let k = ((d as f64).sqrt() / 2.0).round().max(1.0) as usize;
        Partition::ragged(d, k)
    }

    /// Arbitrary assignment; subset ids must cover `0..c` with no gaps.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Partition> {
        let d = assignment.len();
        if d == 0 {
            return Err(Error::invalid("empty assignment"));
        }
        let c = assignment.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; c];
        for &a in &assignment {
            sizes[a] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("subset {empty} is empty")));
        }
        Ok(Partition {
            d,
            c,
            layout: Layout::Explicit(assignment),
            explicit_sizes: Some(sizes),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn c(&self) -> usize {
        self.c
    }

    /// `|Ψ_i|`.
    pub fn subset_size(&self, i: usize) -> usize {
        match (&self.layout, &self.explicit_sizes) {
            (_, Some(sizes)) => sizes[i],
            (Layout::Blocks { size }, _) => (*size).min(self.d - i * size),
            (Layout::Strided { stride }, _) => self.d / stride,
            (Layout::Explicit(_), None) => unreachable!("explicit partitions keep their sizes"),
        }
    }

    pub fn subset_sizes(&self) -> Vec<usize> {
        (0..self.c).map(|i| self.subset_size(i)).collect()
    }

    /// `ψ(j)`.
    #[inline]
    pub fn subset_of(&self, j: usize) -> usize {
        match &self.layout {
            Layout::Blocks { size } => j / size,
            Layout::Strided { stride } => j % stride,
            Layout::Explicit(a) => a[j],
        }
    }

    pub fn assignment(&self) -> Vec<usize> {
        (0..self.d).map(|j| self.subset_of(j)).collect()
    }

    /// `Ψ_i` in increasing coordinate order.
    pub fn members(&self, i: usize) -> Vec<usize> {
        (0..self.d).filter(|&j| self.subset_of(j) == i).collect()
    }

    fn check_len(&self, len: usize, context: &'static str) -> Result<()> {
        if len != self.d {
            return Err(Error::shape(context, self.d, len));
        }
        Ok(())
    }

    fn reduce(&self, g: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        match &self.layout {
            Layout::Blocks { size } => g
                .chunks(*size)
                .map(|block| block.iter().fold(0.0, |acc, v| acc + f(*v)))
                .collect(),
            _ => {
                let mut out = vec![0.0; self.c];
                for (j, v) in g.iter().enumerate() {
                    out[self.subset_of(j)] += f(*v);
                }
                out
            }
        }
    }

    /// `‖g_{Ψ_i}‖²` for every subset.
    pub fn subset_sqnorms(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(g.len(), "subset_sqnorms")?;
        Ok(self.reduce(g, |v| v * v))
    }

    /// `(Σ_{j∈Ψ_i} g_j)²`: the literal sum-then-square reduction.
    pub fn subset_squared_sums(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(g.len(), "subset_squared_sums")?;
        Ok(self.reduce(g, |v| v).into_iter().map(|s| s * s).collect())
    }
}

/// How to build a [`Partition`] for a parameter of a given shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum PartitionRule {
    /// Group along the smaller dimension of a 2D parameter.
    Heuristic2d,
    /// Consecutive blocks of size `k` over the flattened parameter.
    Equipartition {
        k: usize,
    },
    /// Like `Equipartition`, tolerating a shorter final block.
    Ragged {
        k: usize,
    },
    /// Ragged blocks of about `sqrt(d)/2` coordinates.
    SqrtHalf,
    Single,
    Coordinate,
}

impl PartitionRule {
    pub fn resolve(&self, rows: usize, cols: usize) -> Result<Partition> {
        let d = rows * cols;
        match *self {
            PartitionRule::Heuristic2d => Partition::heuristic_2d(rows, cols),
            PartitionRule::Equipartition { k } => Partition::equipartition(d, k),
            PartitionRule::Ragged { k } => Partition::ragged(d, k),
            PartitionRule::SqrtHalf => Partition::sqrt_half(d),
            PartitionRule::Single => Partition::single(d),
            PartitionRule::Coordinate => Partition::coordinate(d),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equipartition_consecutive_blocks() {
        let p = Partition::equipartition(6, 2).unwrap();
        assert_eq!(p.c(), 3);
        assert_eq!(p.members(0), vec![0, 1]);
        assert_eq!(p.members(1), vec![2, 3]);
        assert_eq!(p.members(2), vec![4, 5]);
    }

    #[test]
    fn equipartition_extremes() {
        let norm = Partition::equipartition(4, 4).unwrap();
        assert_eq!(norm.c(), 1);
        assert_eq!(norm.assignment(), vec![0; 4]);
        let coord = Partition::equipartition(4, 1).unwrap();
        assert_eq!(coord.c(), 4);
        assert_eq!(coord.assignment(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn equipartition_requires_divisibility() {
        assert!(matches!(
            Partition::equipartition(7, 2),
            Err(Error::InvalidParameter(_))
        ));
        let r = Partition::ragged(7, 2).unwrap();
        assert_eq!(r.subset_sizes(), vec![2, 2, 2, 1]);
    }

    #[test]
    fn heuristic_shapes() {
        let p = Partition::heuristic_2d(2048, 1024).unwrap();
        assert_eq!(p.c(), 2048);
        assert_eq!(p.subset_sizes()[0], 1024);

        let p = Partition::heuristic_2d(3, 7).unwrap();
        assert_eq!(p.c(), 7);
        assert!(p.subset_sizes().iter().all(|&s| s == 3));
        // column j of a 3x7 row-major matrix
        assert_eq!(p.members(2), vec![2, 9, 16]);

        let p = Partition::heuristic_2d(5, 5).unwrap();
        assert_eq!(p.c(), 5);
        assert_eq!(p.members(1), vec![5, 6, 7, 8, 9]);
    }

    #[test]
    fn sqnorms_hand_values() {
        let p = Partition::equipartition(4, 2).unwrap();
        assert_eq!(
            p.subset_sqnorms(&[3.0, 4.0, 0.0, 0.0]).unwrap(),
            vec![25.0, 0.0]
        );
        assert_eq!(p.subset_sqnorms(&[0.0; 4]).unwrap(), vec![0.0, 0.0]);
        assert!(p.subset_sqnorms(&[1.0; 3]).is_err());
        assert_eq!(
            p.subset_squared_sums(&[3.0, -4.0, 1.0, 1.0]).unwrap(),
            vec![1.0, 4.0]
        );
    }

    #[test]
    fn single_subset_is_squared_norm() {
        let g = [0.3, -1.7, 2.2, 0.05];
        let p = Partition::single(4).unwrap();
        let expected = g.iter().fold(0.0, |acc: f64, v| acc + v * v);
        assert_eq!(p.subset_sqnorms(&g).unwrap(), vec![expected]);
    }

    #[test]
    fn explicit_assignment_validation() {
        assert!(Partition::from_assignment(vec![0, 2, 2]).is_err());
        let p = Partition::from_assignment(vec![1, 0, 1]).unwrap();
        assert_eq!(p.subset_sizes(), vec![1, 2]);
    }

    proptest! {
        #[test]
        fn partitions_are_exhaustive_and_disjoint(c in 1usize..40, k in 1usize..40) {
            let d = c * k;
            let p = Partition::equipartition(d, k).unwrap();
            prop_assert_eq!(p.subset_sizes().iter().sum::<usize>(), d);
            let mut seen = vec![0usize; p.c()];
            for j in 0..d {
                seen[p.subset_of(j)] += 1;
            }
            prop_assert_eq!(seen, p.subset_sizes());
        }

        #[test]
        fn heuristic_state_is_larger_dim(m in 1usize..60, n in 1usize..60) {
            let p = Partition::heuristic_2d(m, n).unwrap();
            prop_assert_eq!(p.c(), m.max(n));
            prop_assert_eq!(p.subset_sizes().iter().sum::<usize>(), m * n);
        }

        #[test]
        fn sqnorms_sum_to_norm(g in proptest::collection::vec(-10.0f64..10.0, 1..200), k in 1usize..8) {
            let p = Partition::ragged(g.len(), k).unwrap();
            let total: f64 = p.subset_sqnorms(&g).unwrap().iter().sum();
            let direct: f64 = g.iter().map(|v| v * v).sum();
            prop_assert!((total - direct).abs() <= 1e-12 * direct.max(1e-300));
        }
    }
}
