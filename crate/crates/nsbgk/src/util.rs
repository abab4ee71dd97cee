//! Small numeric helpers: deterministic summation, a seedable RNG for the
//! built-in check suites, a dense solver for the projection Newton systems,
//! and cubic interpolation weights.

/// Pairwise (tree) summation. Deterministic for a fixed input order and more
/// accurate than a running sum on long arrays.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 32 {
        let mut s = 0.0;
        for v in x {
            s += v;
        }
        s
    } else {
        let mid = x.len() / 2;
        pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
    }
}

/// SplitMix64 generator. Used for reproducible random fields in tests and the
/// `check` subcommand; byte-stable across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller.
    pub fn gauss(&mut self) -> f64 {
        let u1 = (1.0 - self.next_f64()).max(1e-300);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Solve `a x = b` in place for a small dense system (Gaussian elimination
/// with partial pivoting). `a` is row-major n x n; `b` holds the solution on
/// return. Returns false when the matrix is numerically singular.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-300 {
            return false;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for j in col + 1..n {
            s -= a[col * n + j] * b[j];
        }
        b[col] = s / a[col * n + col];
    }
    true
}

/// Cubic Lagrange weights for the 4-point stencil {i0-1, i0, i0+1, i0+2}
/// at fractional offset `theta` in [0, 1) past node i0. Weights sum to 1.
#[inline]
pub fn cubic_weights(theta: f64) -> [f64; 4] {
    let t = theta;
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t * t - 1.0) * (t - 2.0) / 2.0,
        -t * (t + 1.0) * (t - 2.0) / 2.0,
        t * (t * t - 1.0) / 6.0,
    ]
}

/// FNV-1a 64-bit hash, used for snapshot file checksums.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_smooth_data() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.01).sin()).collect();
        let naive: f64 = x.iter().sum();
        assert!((pairwise_sum(&x) - naive).abs() < 1e-10);
    }

    #[test]
    fn cubic_weights_partition_of_unity() {
        for i in 0..50 {
            let t = i as f64 / 50.0;
            let w = cubic_weights(t);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_weights_reproduce_cubic_polynomial() {
        // p(x) = x^3 - 2x^2 + 3x - 1 sampled at -1, 0, 1, 2; interpolate at theta.
        let p = |x: f64| x * x * x - 2.0 * x * x + 3.0 * x - 1.0;
        let samples = [p(-1.0), p(0.0), p(1.0), p(2.0)];
        for i in 0..10 {
            let t = i as f64 / 10.0;
            let w = cubic_weights(t);
            let val: f64 = w.iter().zip(samples.iter()).map(|(a, b)| a * b).sum();
            assert!((val - p(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_dense_inverts_small_system() {
        let mut a = vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let mut b = vec![1.0, 2.0, 3.0];
        assert!(solve_dense(&mut a, &mut b, 3));
        // residual against the original matrix
        let a0 = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let rhs = [1.0, 2.0, 3.0];
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                s += a0[i * 3 + j] * b[j];
            }
            assert!((s - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
