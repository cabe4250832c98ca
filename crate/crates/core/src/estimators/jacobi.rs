//! Jacobi-Anger expansion of the far-field steering vector.

use crate::bessel::bessel_j_into;
use crate::geometry::RisGeometry;
use crate::par;
use crate::{CMatrix, CVector, C64};

/// `jⁿ` for any integer `n`.
fn j_pow(n: i64) -> C64 {
    match n.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// `J_n` for `n = −N..N` from the non-negative orders.
#[inline]
fn signed_bessel(pos: &[f64], n: i64) -> f64 {
    let v = pos[n.unsigned_abs() as usize];
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

/// `G(ϑ)` with rows `n = −N..N` and one column per element,
/// `[g_m(ϑ)]_n = jⁿ J_n(k q_m sinϑ) e^{−jnψ_m}`.
#[derive(Clone, Debug)]
pub struct JacobiBasis {
    pub order: usize,
    pub g: CMatrix,
}

impl JacobiBasis {
    pub fn new(geom: &RisGeometry, elevation: f64, order: usize) -> Self {
        let ks = geom.wavenumber() * elevation.sin();
        let n = order as i64;
        let mut g = CMatrix::zeros(2 * order + 1, geom.len());
        let mut jn = vec![0.0; order + 1];
        for (m, (q, psi)) in geom.radii().iter().zip(geom.angles()).enumerate() {
            bessel_j_into(ks * q, &mut jn);
            for i in -n..=n {
                g[((i + n) as usize, m)] = j_pow(i) * signed_bessel(&jn, i) * C64::from_polar(1.0, -(i as f64) * psi);
            }
        }
        Self { order, g }
    }

    /// `[h(φ)]_n = e^{jnφ}`.
    pub fn h(order: usize, azimuth: f64) -> CVector {
        let n = order as i64;
        CVector::from_iterator(2 * order + 1, (-n..=n).map(|i| C64::from_polar(1.0, i as f64 * azimuth)))
    }

    /// `Gᵀ(ϑ)h(φ)`, the truncated far-field steering vector.
    pub fn steering(&self, azimuth: f64) -> CVector {
        self.g.tr_mul(&Self::h(self.order, azimuth))
    }
}

/// `Q̃Gᵀ(ϑ)` for many elevations, with elements sharing a radius folded
/// together ahead of time.
#[derive(Clone, Debug)]
pub struct JacobiTable {
    order: usize,
    rows: usize,
    wavenumber: f64,
    radii: Vec<f64>,
    /// `P[n][r][t] = Σ_{m: q_m = q_r} Q̃_{t,m} e^{−jnψ_m}`, `n` offset by `N`.
    p: Vec<C64>,
}

impl JacobiTable {
    pub fn new(qtilde: &CMatrix, geom: &RisGeometry, order: usize, parallel: bool) -> Self {
        let rows = qtilde.nrows();
        let (radii, group) = group_radii(geom.radii());
        let nr = radii.len();
        let n = order as i64;
        let psi = geom.angles();
        let blocks = par::map_indexed(2 * order + 1, parallel, |idx| {
            let i = idx as i64 - n;
            let mut block = vec![C64::new(0.0, 0.0); nr * rows];
            for (m, &r) in group.iter().enumerate() {
                let e = C64::from_polar(1.0, -(i as f64) * psi[m]);
                let dst = &mut block[r * rows..(r + 1) * rows];
                for (d, q) in dst.iter_mut().zip(qtilde.column(m).iter()) {
                    *d += q * e;
                }
            }
            block
        });
        Self { order, rows, wavenumber: geom.wavenumber(), radii, p: blocks.concat() }
    }

    pub fn order(&self) -> usize {
        self.order
    }
    pub fn columns(&self) -> usize {
        2 * self.order + 1
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn distinct_radii(&self) -> usize {
        self.radii.len()
    }

    /// `Q̃Gᵀ(ϑ)` as a column-major `T × (2N+1)` buffer.
    pub fn design(&self, elevation: f64) -> Vec<C64> {
        let ks = self.wavenumber * elevation.sin();
        let nb = self.order + 1;
        let mut jn = vec![0.0; self.radii.len() * nb];
        for (r, q) in self.radii.iter().enumerate() {
            bessel_j_into(ks * q, &mut jn[r * nb..(r + 1) * nb]);
        }
        let n = self.order as i64;
        let nr = self.radii.len();
        let mut out = vec![C64::new(0.0, 0.0); self.rows * self.columns()];
        for i in -n..=n {
            let idx = (i + n) as usize;
            let col = &mut out[idx * self.rows..(idx + 1) * self.rows];
            let block = &self.p[idx * nr * self.rows..(idx + 1) * nr * self.rows];
            for r in 0..nr {
                let b = signed_bessel(&jn[r * nb..(r + 1) * nb], i);
                if b == 0.0 {
                    continue;
                }
                for (c, p) in col.iter_mut().zip(&block[r * self.rows..(r + 1) * self.rows]) {
                    *c += p * b;
                }
            }
            let s = j_pow(i);
            col.iter_mut().for_each(|c| *c *= s);
        }
        out
    }
}

/// Distinct radii (relative tolerance 1e−12) and each element's group.
fn group_radii(radii: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let mut distinct: Vec<f64> = Vec::new();
    let mut group = vec![0; radii.len()];
    for &m in &order {
        let q = radii[m];
        match distinct.last() {
            Some(&last) if (q - last).abs() <= 1e-12 * q.max(1e-300) => {}
            _ => distinct.push(q),
        }
        group[m] = distinct.len() - 1;
    }
    (distinct, group)
}
