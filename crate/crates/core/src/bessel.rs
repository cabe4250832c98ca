//! Bessel functions of the first kind for integer order.

/// `J_0(x), …, J_nmax(x)` by Miller's backward recurrence, normalised with
/// `J_0 + 2·Σ J_2k = 1`.
pub fn bessel_j_upto(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    bessel_j_into(x, &mut out);
    out
}

/// Fill `out[n] = J_n(x)` for `n < out.len()`.
pub fn bessel_j_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let nmax = out.len() - 1;
    let ax = x.abs();
    if ax == 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = 1.0;
        return;
    }
    let top = (nmax as f64).max(ax);
    let mut start = (top + 20.0 + (40.0 * top).sqrt()).ceil() as usize;
    start += start % 2;

    const BIG: f64 = 1e250;
    let mut next = 0.0f64; // J_{k+1}
    let mut cur = 1e-300f64; // J_k
    let mut sum = 0.0f64;
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut k = start;
    loop {
        if k <= nmax {
            out[k] = cur;
        }
        if k.is_multiple_of(2) {
            sum += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = (2.0 * k as f64 / ax) * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur.abs() > BIG {
            cur /= BIG;
            next /= BIG;
            sum /= BIG;
            out.iter_mut().skip(k + 1).for_each(|v| *v /= BIG);
        }
    }
    for (n, v) in out.iter_mut().enumerate() {
        *v /= sum;
        if x < 0.0 && n % 2 == 1 {
            *v = -*v;
        }
    }
}

/// `J_n(x)` for any integer order, using `J_{−n} = (−1)^n J_n`.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_upto(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn series(n: usize, x: f64) -> f64 {
        // Σ_k (−1)^k (x/2)^{2k+n} / (k!(k+n)!)
        let h = x / 2.0;
        let mut term = h.powi(n as i32) / (1..=n).map(|v| v as f64).product::<f64>();
        let mut sum = term;
        for k in 1..60 {
            term *= -h * h / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-30 {
                break;
            }
        }
        sum
    }

    #[test]
    fn matches_power_series_on_small_arguments() {
        let mut worst = 0.0f64;
        for i in 0..=200 {
            let x = -2.0 + 4.0 * i as f64 / 200.0;
            let v = bessel_j_upto(30, x);
            for (n, &got) in v.iter().enumerate() {
                let want = if x < 0.0 && n % 2 == 1 { -series(n, -x) } else { series(n, x.abs()) };
                worst = worst.max((got - want).abs());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn known_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 10.0) - 0.043_472_746_168_861_6).abs() < 1e-14);
        assert!((bessel_j(5, 50.0) - (-0.081_400_247_696_569_64)).abs() < 1e-13);
        assert!((bessel_j(50, 88.9) - 0.043_172_665_133_217_96).abs() < 1e-13);
        assert!((bessel_j(-3, 2.5) + bessel_j(3, 2.5)).abs() < 1e-16);
    }

    #[test]
    fn order_zero_at_origin() {
        let v = bessel_j_upto(5, 0.0);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn jacobi_anger_generating_function_large_argument() {
        // e^{jx cos α} = J_0(x) + 2·Σ_{n≥1} jⁿ J_n(x) cos(nα)
        let x = 110.0;
        let j = bessel_j_upto(200, x);
        let jpow = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
        for alpha in [0.0, 0.3, 1.9, 3.0] {
            let mut sum = C64::new(j[0], 0.0);
            for (n, &jn) in j.iter().enumerate().skip(1) {
                sum += jpow[n % 4] * (2.0 * jn * (n as f64 * alpha).cos());
            }
            let want = C64::from_polar(1.0, x * alpha.cos());
            assert!((sum - want).norm() < 1e-11, "{alpha}: {sum}");
        }
    }

    #[test]
    fn neumann_sum_identity() {
        for x in [0.5, 7.0, 45.0, 111.0] {
            let j = bessel_j_upto(300, x);
            let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-13, "{x}: {s}");
        }
    }
}
