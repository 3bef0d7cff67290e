//! Small dense LU factorization with partial pivoting, used for the
//! per-group local solves.

/// Row-major LU factors `P A = L U` of a square matrix.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n x n` matrix `a`. Returns `None` when a pivot
    /// is exactly zero or not finite.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Option<Self> {
        assert_eq!(a.len(), n * n, "matrix must be n x n");
        let mut pivots = Vec::with_capacity(n);
        for col in 0..n {
            let (p, best) =
                (col..n)
                    .map(|r| (r, a[r * n + col].abs()))
                    .fold(
                        (col, -1.0),
                        |acc, cur| if cur.1 > acc.1 { cur } else { acc },
                    );
            if best <= 0.0 || !best.is_finite() {
                return None;
            }
            if p != col {
                for c in 0..n {
                    a.swap(col * n + c, p * n + c);
                }
            }
            pivots.push(p);
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                a[r * n + col] = f;
                if f != 0.0 {
                    for c in col + 1..n {
                        a[r * n + c] -= f * a[col * n + c];
                    }
                }
            }
        }
        Some(Self { n, lu: a, pivots })
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for (col, &p) in self.pivots.iter().enumerate() {
            b.swap(col, p);
        }
        for r in 1..n {
            let row = &self.lu[r * n..r * n + r];
            let s: f64 = row.iter().zip(&b[..r]).map(|(l, x)| l * x).sum();
            b[r] -= s;
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n..(r + 1) * n];
            let s: f64 = row[r + 1..]
                .iter()
                .zip(&b[r + 1..])
                .map(|(u, x)| u * x)
                .sum();
            b[r] = (b[r] - s) / row[r];
        }
    }
}
