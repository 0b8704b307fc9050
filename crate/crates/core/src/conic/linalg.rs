use crate::scalar::Scalar;

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    let m = a.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if m == T::zero() || !m.is_finite() {
        return m;
    }
    let s: T = a.iter().map(|v| (*v / m) * (*v / m)).sum();
    m * s.sqrt()
}

/// Dense lower Cholesky factor of a symmetric positive definite matrix
/// stored row-major; only the lower triangle of the input is read.
pub(crate) struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(mut a: Vec<T>, n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        for j in 0..n {
            let row_j = &mut a[j * n..j * n + n];
            let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let ljj = d.sqrt();
            row_j[j] = ljj;
            let inv = ljj.recip();
            for i in j + 1..n {
                let (upper, lower) = a.split_at_mut(i * n);
                let row_j = &upper[j * n..j * n + j];
                let row_i = &mut lower[..n];
                let v = (row_i[j] - dot(&row_i[..j], row_j)) * inv;
                row_i[j] = v;
            }
        }
        Some(Self { n, l: a })
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            b[i] = (b[i] - dot(row, &b[..i])) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let v = b[i] / self.l[i * n + i];
            b[i] = v;
            let row = &self.l[i * n..i * n + i];
            axpy(-v, row, &mut b[..i]);
        }
    }
}
