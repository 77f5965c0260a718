use crate::Scalar;

/// Solves `a * x = b` in place by LU with partial pivoting. `a` is
/// row-major `n x n` and is destroyed; `b` receives the solution.
/// Returns `false` when a pivot vanishes.
pub(crate) fn lu_solve<T: Scalar>(a: &mut [T], b: &mut [T], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == T::zero() || !best.is_finite() {
            return false;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            b.swap(k, piv);
        }
        let d = a[k * n + k];
        for r in (k + 1)..n {
            let f = a[r * n + k] / d;
            if f == T::zero() {
                continue;
            }
            a[r * n + k] = f;
            for c in (k + 1)..n {
                let akc = a[k * n + c];
                a[r * n + c] -= f * akc;
            }
            let bk = b[k];
            b[r] -= f * bk;
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in (k + 1)..n {
            s -= a[k * n + c] * b[c];
        }
        b[k] = s / a[k * n + k];
    }
    true
}
