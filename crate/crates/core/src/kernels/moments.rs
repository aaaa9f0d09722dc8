//! Closed-form integrals of `omega_{1-alpha}` over short intervals, written
//! to avoid the cancellation in `F(b) - F(a)` when `b - a << a`.

use crate::specialfn::gamma;

/// `(near + width)^p - near^p` for `near >= 0`, `width > 0`.
pub(crate) fn pow_diff(p: f64, near: f64, width: f64) -> f64 {
    if near == 0.0 {
        return width.powf(p);
    }
    near.powf(p) * (p * (width / near).ln_1p()).exp_m1()
}

/// `omega_beta(near + width) - omega_beta(near)`.
pub(crate) fn omega_diff(beta: f64, near: f64, width: f64) -> f64 {
    pow_diff(beta - 1.0, near, width) / gamma(beta)
}

/// Mean of `omega_{1-alpha}(u)` over `u in [near, near + width]`.
pub(crate) fn mean_omega(alpha: f64, near: f64, width: f64) -> f64 {
    omega_diff(2.0 - alpha, near, width) / width
}

/// `int_{c-h}^{c+h} (c - u) omega_{1-alpha}(u) du` for `0 < h <= c`.
///
/// Positive, since the weight decreases in `u`.
pub(crate) fn centered_moment(alpha: f64, c: f64, h: f64) -> f64 {
    let x = h / c;
    let m = if x <= 0.5 {
        // c^{2-alpha} int_{-x}^{x} y (1+y)^{-alpha} dy, odd-power series in x.
        let mut coef = 1.0; // binom(-alpha, j), j = 0
        let mut sum = 0.0;
        let x2 = x * x;
        let mut xp = x * x2; // x^{j+2} at j = 1
        let mut j = 1usize;
        loop {
            coef *= (-alpha - (j as f64 - 1.0)) / j as f64;
            let term = 2.0 * coef * xp / (j as f64 + 2.0);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() || j > 400 {
                break;
            }
            coef *= (-alpha - j as f64) / (j as f64 + 1.0);
            xp *= x2;
            j += 2;
        }
        c.powf(2.0 - alpha) / gamma(1.0 - alpha) * sum
    } else {
        // u omega_{1-alpha}(u) = (1-alpha) omega_{2-alpha}(u)
        let lo = c - h;
        (1.0 - alpha) * omega_diff(3.0 - alpha, lo, 2.0 * h) - c * omega_diff(2.0 - alpha, lo, 2.0 * h)
    };
    -m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::oracle::weighted;

    #[test]
    fn pow_diff_matches_naive_when_well_conditioned() {
        let got = pow_diff(0.5, 1.0, 3.0);
        assert!((got - 1.0).abs() < 1e-15);
        assert_eq!(pow_diff(0.5, 0.0, 4.0), 2.0);
    }

    #[test]
    fn mean_omega_against_quadrature() {
        for &alpha in &[0.05, 0.3, 0.5, 0.7, 0.95] {
            for &(near, width) in &[(0.0, 0.3), (1e-6, 1e-7), (0.2, 1e-9), (0.5, 0.5), (3.0, 0.01)] {
                let want = weighted(alpha, near, width, |_| 1.0) / width;
                let got = mean_omega(alpha, near, width);
                assert!(((got - want) / want).abs() < 1e-10, "{alpha} {near} {width}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn centered_moment_against_quadrature() {
        for &alpha in &[0.05, 0.3, 0.5, 0.7, 0.95] {
            for &(c, h) in &[(1.0, 1.0), (1.0, 0.9), (1.0, 0.51), (1.0, 0.49), (1.0, 1e-3), (2e-4, 1e-4), (5.0, 0.25)] {
                let want = weighted(alpha, c - h, 2.0 * h, |x| h - x);
                let got = centered_moment(alpha, c, h);
                assert!(got > 0.0);
                assert!(((got - want) / want).abs() < 1e-10, "{alpha} {c} {h}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn centered_moment_branches_agree() {
        for &alpha in &[0.2, 0.5, 0.8] {
            let (c, h) = (1.0, 0.5);
            let series = centered_moment(alpha, c, h * (1.0 - 1e-15));
            let closed = centered_moment(alpha, c, h * (1.0 + 1e-15));
            assert!(((series - closed) / closed).abs() < 1e-13);
        }
    }
}
