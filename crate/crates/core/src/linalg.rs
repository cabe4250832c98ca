//! Least-squares residuals and guarded small-matrix inversion.

use nalgebra::DMatrix;

use crate::{CMatrix, CVector, Error, Result, C64};

/// Relative rank tolerance on the pivoted `R` diagonal.
pub const RANK_TOL: f64 = 1e-10;
/// Largest condition number accepted before refusing to invert.
pub const MAX_CONDITION: f64 = 1e12;

/// Householder QR with column pivoting of a tall complex matrix.
///
/// Stores the reflectors in place (column major) so `Qᴴy` can be applied to
/// many right-hand sides.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Reflector `k` lives in `v[k*rows + k ..(k+1)*rows]`, scaled so `vᴴv = 2`.
    v: Vec<C64>,
    diag: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factor `x`; fails if the numerical rank is below the column count.
    pub fn new(x: &CMatrix) -> Result<Self> {
        Self::from_column_major(x.nrows(), x.ncols(), x.as_slice().to_vec())
    }

    /// Factor a column-major buffer of size `rows × cols`.
    pub fn from_column_major(rows: usize, cols: usize, a: Vec<C64>) -> Result<Self> {
        Self::factor(rows, cols, a, false)
    }

    /// Like [`PivotedQr::from_column_major`] but stops at the numerical rank
    /// instead of failing, so residuals are taken against the numerical
    /// column space. Fails only when every column is zero.
    pub fn truncated(rows: usize, cols: usize, a: Vec<C64>) -> Result<Self> {
        Self::factor(rows, cols, a, true)
    }

    fn factor(rows: usize, cols: usize, mut a: Vec<C64>, truncate: bool) -> Result<Self> {
        if cols == 0 || rows < cols || a.len() != rows * cols {
            return Err(Error::Dimension(format!("QR needs rows >= cols >= 1, got {rows}x{cols}")));
        }
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut norms: Vec<f64> = (0..cols).map(|j| col_norm2(&a[j * rows..(j + 1) * rows])).collect();
        let mut diag = Vec::with_capacity(cols);
        let mut first = 0.0;
        for k in 0..cols {
            // recompute trailing norms
            for j in k..cols {
                norms[j] = col_norm2(&a[j * rows + k..(j + 1) * rows]);
            }
            let (piv, &pn) = norms[k..].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            let piv = piv + k;
            if piv != k {
                for i in 0..rows {
                    a.swap(k * rows + i, piv * rows + i);
                }
                perm.swap(k, piv);
                norms.swap(k, piv);
            }
            let nrm = pn.sqrt();
            if k == 0 {
                first = nrm;
            }
            if !(nrm > RANK_TOL * first) || !nrm.is_finite() {
                if truncate && k > 0 && nrm.is_finite() {
                    return Ok(Self { rows, cols, v: a, diag, perm, rank: k });
                }
                return Err(Error::RankDeficient { rank: k, cols });
            }
            let (head, tail) = a.split_at_mut((k + 1) * rows);
            let col = &mut head[k * rows + k..];
            let x0 = col[0];
            let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
            let alpha = -phase * nrm;
            col[0] -= alpha;
            let vnorm2 = col_norm2(col);
            let s = (2.0 / vnorm2).sqrt();
            col.iter_mut().for_each(|c| *c *= s);
            diag.push(alpha.norm());
            for j in 0..cols - k - 1 {
                let target = &mut tail[j * rows + k..(j + 1) * rows];
                apply_reflector(col, target);
            }
        }
        Ok(Self { rows, cols, v: a, diag, perm, rank: cols })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Estimated 2-norm condition from the pivoted diagonal.
    pub fn diag_condition(&self) -> f64 {
        let max = self.diag.iter().cloned().fold(0.0, f64::max);
        let min = self.diag.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Apply `Qᴴ` in place.
    pub fn apply_qh(&self, y: &mut [C64]) {
        for k in 0..self.rank {
            let v = &self.v[k * self.rows + k..(k + 1) * self.rows];
            apply_reflector(v, &mut y[k..]);
        }
    }

    /// `‖y − X X†y‖`.
    pub fn residual_norm(&self, y: &[C64]) -> f64 {
        let mut w = y.to_vec();
        self.apply_qh(&mut w);
        col_norm2(&w[self.rank..]).sqrt()
    }
}

#[inline]
fn col_norm2(x: &[C64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum()
}

/// `target ← (I − v vᴴ) target` for a reflector with `vᴴv = 2`.
#[inline]
fn apply_reflector(v: &[C64], target: &mut [C64]) {
    let mut dot = C64::new(0.0, 0.0);
    for (vi, ti) in v.iter().zip(target.iter()) {
        dot += vi.conj() * ti;
    }
    if dot == C64::new(0.0, 0.0) {
        return;
    }
    for (vi, ti) in v.iter().zip(target.iter_mut()) {
        *ti -= vi * dot;
    }
}

/// Orthogonal-complement residual `‖Π⊥_X y‖`.
pub fn projection_objective(x: &CMatrix, y: &CVector) -> Result<f64> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("X has {} rows, y has {}", x.nrows(), y.len())));
    }
    if x.ncols() == 1 {
        return single_column_residual(x.as_slice(), y.as_slice());
    }
    Ok(PivotedQr::new(x)?.residual_norm(y.as_slice()))
}

/// `‖y − x (xᴴy / xᴴx)‖` for one column.
pub fn single_column_residual(x: &[C64], y: &[C64]) -> Result<f64> {
    let (coef, _) = single_column_fit(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (b - a * coef).norm_sqr()).sum::<f64>().sqrt())
}

/// Least-squares coefficient `xᴴy / xᴴx` and `xᴴx`.
pub fn single_column_fit(x: &[C64], y: &[C64]) -> Result<(C64, f64)> {
    let xx = col_norm2(x);
    let scale = col_norm2(y).max(1.0);
    if !(xx > f64::MIN_POSITIVE * scale) {
        return Err(Error::DegenerateSignal("projection onto a zero column".into()));
    }
    let mut xy = C64::new(0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        xy += a.conj() * b;
    }
    Ok((xy / xx, xx))
}

/// Inverse of a square real matrix after symmetric diagonal equilibration,
/// refusing when the equilibrated condition number exceeds [`MAX_CONDITION`].
/// Returns the inverse and that condition number.
pub fn checked_inverse(a: &DMatrix<f64>, what: &'static str) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Dimension(format!("{what}: expected a square matrix")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned { what, cond: f64::INFINITY });
    }
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let d = a[(i, i)].abs();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = smax / smin;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned { what, cond });
    }
    let inv_scaled = svd.pseudo_inverse(0.0).map_err(|_| Error::IllConditioned { what, cond })?;
    let inv = DMatrix::from_fn(n, n, |i, j| inv_scaled[(i, j)] * s[i] * s[j]);
    Ok((inv, cond))
}
