//! Pivot-free determinant and adjugate for small dense real matrices.
//!
//! Everything here is Laplace (cofactor) expansion along the first row, which
//! is exact up to rounding and independent of pivoting choices. Matrices up
//! to 5x5 are stored in fixed stack buffers.

pub const MAX_DIM: usize = 5;

type Buf = [f64; MAX_DIM * MAX_DIM];

/// Square matrix of dimension `n <= 5`, row-major in a fixed buffer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMatrix {
    n: usize,
    a: Buf,
}

impl SmallMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} unsupported");
        Self {
            n,
            a: [0.0; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// The matrix with row `row` and column `col` removed.
    pub fn minor_matrix(&self, row: usize, col: usize) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n - 1);
        let mut idx = 0;
        for i in (0..n).filter(|&i| i != row) {
            for j in (0..n).filter(|&j| j != col) {
                out.a[idx] = self.a[i * n + j];
                idx += 1;
            }
        }
        out
    }

    pub fn determinant(&self) -> f64 {
        laplace(&self.a, self.n)
    }

    /// Transposed cofactor matrix: `adj[j][k] = (-1)^(j+k) det(minor(k, j))`.
    pub fn adjugate(&self) -> Self {
        let n = self.n;
        if n == 1 {
            return Self::identity(1);
        }
        let mut out = Self::zeros(n);
        for k in 0..n {
            for j in 0..n {
                let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                out.set(j, k, sign * self.minor_matrix(k, j).determinant());
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self::from_fn(self.n, |i, j| {
            (0..self.n).map(|k| self.get(i, k) * rhs.get(k, j)).sum()
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.a[..self.n * self.n].iter().copied()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.entries()
            .zip(other.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn laplace(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => {
            let m = n - 1;
            let mut sub: Buf = [0.0; MAX_DIM * MAX_DIM];
            let mut det = 0.0;
            for col in 0..n {
                let pivot = a[col];
                if pivot == 0.0 {
                    continue;
                }
                let mut idx = 0;
                for i in 1..n {
                    for j in (0..n).filter(|&j| j != col) {
                        sub[idx] = a[i * n + j];
                        idx += 1;
                    }
                }
                let term = pivot * laplace(&sub[..m * m], m);
                if col % 2 == 0 {
                    det += term;
                } else {
                    det -= term;
                }
            }
            det
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Leibniz formula over all permutations; independent of the Laplace path.
    fn leibniz(m: &SmallMatrix) -> f64 {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for pos in 0..n {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let n = m.dim();
        perms(n)
            .into_iter()
            .map(|p| {
                let mut inversions = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if p[i] > p[j] {
                            inversions += 1;
                        }
                    }
                }
                let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
                sign * (0..n).map(|i| m.get(i, p[i])).product::<f64>()
            })
            .sum()
    }

    fn pseudo_random(n: usize, seed: u64) -> SmallMatrix {
        let mut s = seed;
        SmallMatrix::from_fn(n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn determinant_matches_leibniz() {
        for n in 1..=5 {
            for seed in 0..20 {
                let m = pseudo_random(n, seed);
                assert!((m.determinant() - leibniz(&m)).abs() < 1e-13, "n={n}");
            }
        }
    }

    #[test]
    fn identity_and_duplicate_columns() {
        assert_eq!(SmallMatrix::identity(5).determinant(), 1.0);
        let mut m = pseudo_random(5, 3);
        for i in 0..5 {
            let v = m.get(i, 1);
            m.set(i, 3, v);
        }
        assert!(m.determinant().abs() <= 1e-14);
    }

    #[test]
    fn adjugate_identity() {
        assert_eq!(SmallMatrix::identity(5).adjugate(), SmallMatrix::identity(5));
        for seed in 0..100 {
            let m = pseudo_random(5, seed);
            let lhs = m.mul(&m.adjugate());
            let mut rhs = SmallMatrix::identity(5);
            let d = m.determinant();
            for i in 0..5 {
                rhs.set(i, i, d);
            }
            assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }

    #[test]
    fn adjugate_small_cases() {
        let m = SmallMatrix::from_fn(2, |i, j| [[1.0, 2.0], [3.0, 4.0]][i][j]);
        let adj = m.adjugate();
        assert_eq!(adj, SmallMatrix::from_fn(2, |i, j| [[4.0, -2.0], [-3.0, 1.0]][i][j]));
    }
}
