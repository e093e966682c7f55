//! Small direct solvers: tridiagonal (plain, cyclic, bordered by a dense
//! row) and a general banded LU with partial pivoting.

use crate::error::{Error, Result};

fn singular(what: &str) -> Error {
    Error::SolverFailure {
        reason: format!("singular {what} system"),
        iterations: 0,
        residual: f64::NAN,
    }
}

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(singular("tridiagonal"));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(singular("tridiagonal"));
        }
        c[i] = if i + 1 < n { upper[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Periodic tridiagonal system: row `i` is
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]` with indices mod n.
pub fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::InvalidInput("cyclic system needs n >= 3".into()));
    }
    // Sherman-Morrison on the corner entries.
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &bb, upper, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &bb, upper, &u)?;
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

/// Periodic tridiagonal system whose row 0 is replaced by a dense row.
///
/// Rows `1..n` follow the cyclic convention of [`solve_cyclic_tridiagonal`];
/// `lower[0]`, `diag[0]`, `upper[0]` are unused.
pub fn solve_bordered_cyclic(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    dense_row: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    // T' has identity in row 0; x0 decouples and rows 1..n form a plain
    // tridiagonal system in x1..x_{n-1}.
    let solve_reduced = |r: &[f64]| -> Result<Vec<f64>> {
        let x0 = r[0];
        let m = n - 1;
        let lo: Vec<f64> = (0..m).map(|k| if k == 0 { 0.0 } else { lower[k + 1] }).collect();
        let di: Vec<f64> = (0..m).map(|k| diag[k + 1]).collect();
        let up: Vec<f64> = (0..m).map(|k| if k + 1 == m { 0.0 } else { upper[k + 1] }).collect();
        let mut rr: Vec<f64> = (0..m).map(|k| r[k + 1]).collect();
        rr[0] -= lower[1] * x0;
        rr[m - 1] -= upper[n - 1] * x0;
        let inner = solve_tridiagonal(&lo, &di, &up, &rr)?;
        let mut x = Vec::with_capacity(n);
        x.push(x0);
        x.extend(inner);
        Ok(x)
    };
    let y = solve_reduced(rhs)?;
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    let z = solve_reduced(&e0)?;
    // A = T' + e0 w^T with w = dense_row - e0
    let wy: f64 = dense_row.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - y[0];
    let wz: f64 = dense_row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - z[0];
    let denom = 1.0 + wz;
    if denom == 0.0 || !denom.is_finite() {
        return Err(singular("bordered"));
    }
    let f = wy / denom;
    Ok(y.iter().zip(&z).map(|(yi, zi)| yi - f * zi).collect())
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored by
/// rows with `kl` extra columns reserved for pivoting fill.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        // column c of row r lives at r*width + (c + kl - r)
        r * self.width + (c + self.kl - r)
    }

    pub fn in_band(&self, r: usize, c: usize) -> bool {
        c + self.kl >= r && c <= r + self.ku
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(self.in_band(r, c), "({r},{c}) outside band");
        let o = self.offset(r, c);
        self.data[o] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.data[self.offset(r, c)]
        } else {
            0.0
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }

    /// In-place LU with partial pivoting (rows limited to the band).
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let span = kl + self.ku; // columns right of the pivot touched by U
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.offset(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.offset(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(singular("banded"));
            }
            piv[k] = p;
            let last_col = (k + span).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let a = self.offset(k, c);
                    let b = self.offset(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.offset(k, k)];
            let kstart = self.offset(k, k);
            for r in k + 1..=last_row {
                let orc = self.offset(r, k);
                let l = self.data[orc] / pivot;
                self.data[orc] = l;
                if l == 0.0 {
                    continue;
                }
                let rstart = self.offset(r, k);
                let len = last_col - k;
                let (head, tail) = if rstart > kstart {
                    let (h, t) = self.data.split_at_mut(rstart);
                    (&h[kstart + 1..kstart + 1 + len], &mut t[1..1 + len])
                } else {
                    unreachable!("row below pivot precedes it in storage")
                };
                for (dst, src) in tail.iter_mut().zip(head) {
                    *dst -= l * src;
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let a = &self.m;
        let n = a.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + a.kl).min(n - 1) {
                    x[r] -= a.data[a.offset(r, k)] * xk;
                }
            }
        }
        let span = a.kl + a.ku;
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + span).min(n - 1) {
                s -= a.data[a.offset(k, c)] * x[c];
            }
            x[k] = s / a.data[a.offset(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    #[test]
    fn tridiagonal_roundtrip() {
        let n = 7;
        let lo: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let di = vec![4.0; n];
        let up: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = di[i] * x[i];
            if i > 0 {
                b[i] += lo[i] * x[i - 1];
            }
            if i + 1 < n {
                b[i] += up[i] * x[i + 1];
            }
        }
        let got = solve_tridiagonal(&lo, &di, &up, &b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-13);
        }
    }

    fn cyclic_dense(lo: &[f64], di: &[f64], up: &[f64]) -> Vec<Vec<f64>> {
        let n = di.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] += di[i];
            a[i][(i + n - 1) % n] += lo[i];
            a[i][(i + 1) % n] += up[i];
        }
        a
    }

    #[test]
    fn cyclic_roundtrip() {
        let n = 9;
        let lo: Vec<f64> = (0..n).map(|i| -1.0 + 0.03 * i as f64).collect();
        let di: Vec<f64> = (0..n).map(|i| 3.0 + 0.1 * i as f64).collect();
        let up: Vec<f64> = (0..n).map(|i| -0.7 - 0.02 * i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).cos()).collect();
        let b = dense_mul(&cyclic_dense(&lo, &di, &up), &x);
        let got = solve_cyclic_tridiagonal(&lo, &di, &up, &b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn bordered_roundtrip_with_singular_cyclic_part() {
        // pure periodic Laplacian rows (singular) + mass row
        let n = 12;
        let lo = vec![1.0; n];
        let di = vec![-2.0; n];
        let up = vec![1.0; n];
        let w: Vec<f64> = (0..n).map(|i| 0.1 + 0.01 * i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.4).sin() + 2.0).collect();
        let mut a = cyclic_dense(&lo, &di, &up);
        a[0] = w.clone();
        let b = dense_mul(&a, &x);
        let got = solve_bordered_cyclic(&lo, &di, &up, &w, &b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-11, "{g} vs {e}");
        }
    }

    #[test]
    fn banded_lu_needs_pivoting() {
        let n = 30;
        let (kl, ku) = (3, 2);
        let mut m = BandedMatrix::zeros(n, kl, ku);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                let v = ((r * 7 + c * 13) % 11) as f64 - 5.0;
                m.add(r, c, v);
            }
            // zero diagonal on some rows forces row swaps
            if r % 4 == 0 {
                let d = m.get(r, r);
                m.add(r, r, -d);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let b = m.mul_vec(&x);
        let lu = m.clone().factor().unwrap();
        let got = lu.solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-9, "{g} vs {e}");
        }
    }
}
