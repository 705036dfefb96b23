use crate::scalar::Real;

/// Inverts a small dense matrix by Gauss–Jordan elimination with partial
/// pivoting. Returns `None` when a pivot vanishes.
pub fn invert<T: Real, const N: usize>(mut a: [[T; N]; N]) -> Option<[[T; N]; N]> {
    let mut inv = [[T::zero(); N]; N];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() <= T::min_positive_value() {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = T::one() / a[col][col];
        for k in 0..N {
            a[col][k] *= d;
            inv[col][k] *= d;
        }
        for r in 0..N {
            if r != col {
                let f = a[r][col];
                if f != T::zero() {
                    for k in 0..N {
                        let (ack, ick) = (a[col][k], inv[col][k]);
                        a[r][k] -= f * ack;
                        inv[r][k] -= f * ick;
                    }
                }
            }
        }
    }
    Some(inv)
}
