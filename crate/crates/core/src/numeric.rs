//! Small numerical kernels: root bracketing, scalar minimisation and a dense
//! Levenberg–Marquardt solver for the few-parameter spectrum fits.

use crate::scalar::Real;

/// Bisection on a sign change of `f` over `[lo, hi]`.
pub fn bisect<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, max_iter: usize) -> T {
    let mut f_lo = f(lo);
    for _ in 0..max_iter {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return mid;
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, tol: T) -> T {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting. Returns
/// `None` for a singular system.
pub fn solve_linear<T: Real, const N: usize>(mut a: [[T; N]; N], mut b: [T; N]) -> Option<[T; N]> {
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
        b.swap(col, pivot);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] = a[row][k] - factor * a[col][k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = [T::zero(); N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for k in row + 1..N {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Outcome of [`levenberg_marquardt`].
#[derive(Debug, Clone, Copy)]
pub struct LmResult<T, const N: usize> {
    pub params: [T; N],
    pub cost: T,
    pub iterations: usize,
}

/// Minimises `Σ r_i(x)²` with a central-difference Jacobian.
///
/// `residuals` writes into the provided buffer, which always has the length
/// of the first evaluation.
pub fn levenberg_marquardt<T: Real, const N: usize>(
    residuals: impl Fn(&[T; N], &mut Vec<T>),
    x0: [T; N],
    max_iter: usize,
) -> LmResult<T, N> {
    let cost_of = |r: &[T]| r.iter().fold(T::zero(), |acc, &v| acc + v * v);
    let mut x = x0;
    let mut r = Vec::new();
    residuals(&x, &mut r);
    let m = r.len();
    let mut cost = cost_of(&r);
    let mut lambda = T::lit(1e-3);
    let step_scale = T::eps().cbrt();
    let mut jac = vec![[T::zero(); N]; m];
    let (mut r_plus, mut r_minus, mut r_trial) = (Vec::new(), Vec::new(), Vec::new());
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        for j in 0..N {
            let h = step_scale * x[j].abs().max(T::one());
            let mut xp = x;
            let mut xm = x;
            xp[j] = xp[j] + h;
            xm[j] = xm[j] - h;
            residuals(&xp, &mut r_plus);
            residuals(&xm, &mut r_minus);
            for i in 0..m {
                jac[i][j] = (r_plus[i] - r_minus[i]) / (h + h);
            }
        }
        let mut jtj = [[T::zero(); N]; N];
        let mut jtr = [T::zero(); N];
        for i in 0..m {
            for a in 0..N {
                jtr[a] = jtr[a] + jac[i][a] * r[i];
                for b in 0..N {
                    jtj[a][b] = jtj[a][b] + jac[i][a] * jac[i][b];
                }
            }
        }

        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj;
            for k in 0..N {
                lhs[k][k] = lhs[k][k] + lambda * jtj[k][k].max(T::min_positive_value());
            }
            let rhs = jtr.map(|v| -v);
            let Some(delta) = solve_linear(lhs, rhs) else {
                lambda = lambda * T::lit(10.0);
                continue;
            };
            let mut trial = x;
            for k in 0..N {
                trial[k] = trial[k] + delta[k];
            }
            residuals(&trial, &mut r_trial);
            let trial_cost = cost_of(&r_trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(T::min_positive_value());
                x = trial;
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                improved = true;
                if rel < T::eps() * T::lit(64.0) {
                    return LmResult { params: x, cost, iterations };
                }
                break;
            }
            lambda = lambda * T::lit(10.0);
        }
        if !improved {
            break;
        }
    }
    LmResult { params: x, cost, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 200);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn golden_section_parabola() {
        let x = golden_section(|x: f64| (x - 1.25).powi(2) + 3.0, -10.0, 10.0, 1e-9);
        assert!((x - 1.25).abs() < 1e-7);
    }

    #[test]
    fn linear_solve_3x3() {
        let a: [[f64; 3]; 3] = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        let b = [8.0, -11.0, -3.0];
        let x = solve_linear(a, b).unwrap();
        for (got, want) in x.iter().zip([2.0, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(solve_linear([[1.0f64, 2.0], [2.0, 4.0]], [1.0, 2.0]).is_none());
    }

    #[test]
    fn lm_fits_exponential() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-1.3 * x).exp() + 0.2).collect();
        let fit = levenberg_marquardt(
            |p: &[f64; 3], r: &mut Vec<f64>| {
                r.clear();
                r.extend(xs.iter().zip(&ys).map(|(x, y)| p[0] * (-p[1] * x).exp() + p[2] - y));
            },
            [1.0, 0.5, 0.0],
            200,
        );
        assert!((fit.params[0] - 2.5).abs() < 1e-6);
        assert!((fit.params[1] - 1.3).abs() < 1e-6);
        assert!((fit.params[2] - 0.2).abs() < 1e-6);
    }
}
