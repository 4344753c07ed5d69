//! Smoothing kernels for two-point gradient estimation under higher-order
//! smoothness.
//!
//! A kernel of order `ell` is a polynomial K on [-1, 1] whose moments under
//! r ~ U[-1, 1] satisfy E[K] = 0, E[r K] = 1, and E[r^j K] = 0 for
//! j = 2..=ell, where ell is the largest integer strictly below the
//! smoothness order beta. All moments here are expectations with respect to
//! that uniform draw (not Lebesgue integrals), which is the normalization
//! the estimator consumes directly.
//!
//! Construction solves the (ell+1) x (ell+1) moment system in the span of
//! Legendre polynomials P_0..P_ell, whose moment matrix is lower triangular
//! and nonsingular. Verification goes through an independent route:
//! fixed-node Gauss-Legendre quadrature.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Nodes for moment verification and constant evaluation. Exact for
/// polynomial integrands up to degree 127.
const QUAD_NODES: usize = 64;

/// A polynomial smoothing kernel with its smoothness order and the two
/// constants that drive the estimator's bias and second-moment envelopes.
#[derive(Debug, Clone)]
pub struct Kernel {
    beta: f64,
    ell: usize,
    /// Monomial coefficients; `coeffs[k]` multiplies r^k.
    coeffs: Vec<f64>,
    /// kappa = E[K(r)^2].
    kappa: f64,
    /// kappa_beta = E[|r|^beta |K(r)|].
    kappa_beta: f64,
}

/// Largest integer strictly below `beta`.
pub fn order_below(beta: f64) -> usize {
    (beta - 1.0).ceil() as usize
}

/// Builds the order-`ell` kernel for smoothness `beta >= 2`.
pub fn build_legendre_kernel(beta: f64) -> Result<Kernel> {
    if !(beta >= 2.0) || !beta.is_finite() {
        return Err(Error::UnsupportedSmoothness(beta));
    }
    let ell = order_below(beta);
    let legendre = legendre_monomial_table(ell);

    // Moment matrix A[j][k] = E[r^j P_k(r)], exact via E[r^m] = 1/(m+1) for
    // even m and 0 for odd m. Lower triangular because P_k is orthogonal to
    // all polynomials of degree below k.
    let mut a = DMatrix::zeros(ell + 1, ell + 1);
    for j in 0..=ell {
        for k in 0..=ell {
            let mut m = 0.0;
            for (deg, c) in legendre[k].iter().enumerate() {
                m += c * uniform_moment(j + deg);
            }
            a[(j, k)] = m;
        }
    }
    let mut rhs = DVector::zeros(ell + 1);
    rhs[1] = 1.0;
    let w = a.lu().solve(&rhs).ok_or(Error::KernelConstruction)?;

    // Collect the Legendre combination into monomial coefficients.
    let mut coeffs = vec![0.0; ell + 1];
    for k in 0..=ell {
        for (deg, c) in legendre[k].iter().enumerate() {
            coeffs[deg] += w[k] * c;
        }
    }

    let kappa = expectation(|r| {
        let v = eval_poly(&coeffs, r);
        v * v
    });
    let kappa_beta = abs_moment(&coeffs, beta);

    Ok(Kernel { beta, ell, coeffs, kappa, kappa_beta })
}

impl Kernel {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Monomial coefficients, lowest degree first.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// E[K(r)^2].
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// E[|r|^beta |K(r)|].
    pub fn kappa_beta(&self) -> f64 {
        self.kappa_beta
    }

    /// Evaluates K at `r` in [-1, 1] by Horner's rule.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::KernelDomain(r));
        }
        Ok(eval_poly(&self.coeffs, r))
    }

    /// Moments E[r^j K(r)] for j = 0..=j_max, by quadrature. This is the
    /// verification route, independent of the closed-form moments used in
    /// construction.
    pub fn moments(&self, j_max: usize) -> Vec<f64> {
        (0..=j_max)
            .map(|j| expectation(|r| r.powi(j as i32) * eval_poly(&self.coeffs, r)))
            .collect()
    }
}

fn eval_poly(coeffs: &[f64], r: f64) -> f64 {
    let mut acc = 0.0;
    for c in coeffs.iter().rev() {
        acc = acc * r + c;
    }
    acc
}

/// E[r^m] under r ~ U[-1, 1].
fn uniform_moment(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        1.0 / (m as f64 + 1.0)
    } else {
        0.0
    }
}

/// Monomial coefficients of P_0..P_ell via the three-term recurrence
/// (k+1) P_{k+1} = (2k+1) r P_k - k P_{k-1}.
fn legendre_monomial_table(ell: usize) -> Vec<Vec<f64>> {
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(ell + 1);
    table.push(vec![1.0]);
    if ell >= 1 {
        table.push(vec![0.0, 1.0]);
    }
    for k in 1..ell {
        let (prev, cur) = (&table[k - 1], &table[k]);
        let mut next = vec![0.0; k + 2];
        for (deg, c) in cur.iter().enumerate() {
            next[deg + 1] += (2 * k + 1) as f64 * c;
        }
        for (deg, c) in prev.iter().enumerate() {
            next[deg] -= k as f64 * c;
        }
        for c in next.iter_mut() {
            *c /= (k + 1) as f64;
        }
        table.push(next);
    }
    table
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Standard initial guess, then Newton to machine precision.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_value_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_value_deriv(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_value_deriv(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let p2 = (((2 * k + 1) as f64) * x * p1 - (k as f64) * p0) / ((k + 1) as f64);
        p0 = p1;
        p1 = p2;
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// E[f(r)] under r ~ U[-1, 1] by fixed-node quadrature.
pub(crate) fn expectation<F: Fn(f64) -> f64>(f: F) -> f64 {
    let (nodes, weights) = gauss_legendre(QUAD_NODES);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(*x);
    }
    0.5 * acc
}

/// E[f(r)] restricted to [lo, hi] (still with the U[-1,1] density 1/2).
fn expectation_on<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    let (nodes, weights) = gauss_legendre(QUAD_NODES);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(mid + half * x);
    }
    0.5 * half * acc
}

/// E[|r|^beta |K(r)|]: quadrature split at r = 0 and at sign changes of K so
/// every piece is smooth (polynomial when beta is an integer).
fn abs_moment(coeffs: &[f64], beta: f64) -> f64 {
    let mut cuts = vec![-1.0, 0.0, 1.0];
    cuts.extend(poly_roots_in_unit_interval(coeffs));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut acc = 0.0;
    for pair in cuts.windows(2) {
        acc +=
            expectation_on(pair[0], pair[1], |r| r.abs().powf(beta) * eval_poly(coeffs, r).abs());
    }
    acc
}

/// Sign-change roots of the kernel polynomial inside (-1, 1), by scan and
/// bisection. Degree is tiny, so a fine scan cannot skip a crossing in
/// practice.
fn poly_roots_in_unit_interval(coeffs: &[f64]) -> Vec<f64> {
    const SCAN: usize = 8192;
    let mut roots = Vec::new();
    let mut prev_x = -1.0;
    let mut prev_v = eval_poly(coeffs, prev_x);
    for i in 1..=SCAN {
        let x = -1.0 + 2.0 * i as f64 / SCAN as f64;
        let v = eval_poly(coeffs, x);
        if prev_v == 0.0 {
            roots.push(prev_x);
        } else if prev_v * v < 0.0 {
            let (mut lo, mut hi) = (prev_x, x);
            let (mut flo, _) = (prev_v, v);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let fm = eval_poly(coeffs, mid);
                if flo * fm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
    }
    roots.retain(|r| r.abs() < 1.0 - 1e-12);
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Expected constants below are hand-derived from the moment conditions.
    //
    // beta = 2 or 3 (ell = 1 or 2): K(r) = 3r. Then kappa = E[9r^2] = 3,
    // kappa_2 = E[3|r|^3] = 3/4, kappa_3 = E[3r^4] = 3/5.
    //
    // beta = 4 or 5 (ell = 3 or 4): odd ansatz b1 r + b3 r^3 with
    // b1/3 + b3/5 = 1, b1/5 + b3/7 = 0 gives K = (75 r - 105 r^3)/4.
    // kappa = (5625/3 - 3150 + 11025/7)/16 = 18.75. K changes sign at
    // sqrt(5/7), and splitting the integral there gives
    // kappa_4 = 55755/76832 exactly.

    #[test]
    fn order_below_beta() {
        assert_eq!(order_below(2.0), 1);
        assert_eq!(order_below(2.5), 2);
        assert_eq!(order_below(3.0), 2);
        assert_eq!(order_below(4.0), 3);
        assert_eq!(order_below(6.0), 5);
    }

    #[test]
    fn beta_two_kernel_is_three_r() {
        let k = build_legendre_kernel(2.0).unwrap();
        assert_eq!(k.ell(), 1);
        assert_relative_eq!(k.coeffs()[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(k.coeffs()[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(k.eval(0.5).unwrap(), 1.5, epsilon = 1e-12);
        assert_relative_eq!(k.kappa(), 3.0, epsilon = 1e-10);
        assert_relative_eq!(k.kappa_beta(), 0.75, epsilon = 1e-10);
    }

    #[test]
    fn beta_three_shares_the_linear_kernel() {
        // The j = 2 condition is free for odd K, so ell = 2 still yields 3r.
        let k = build_legendre_kernel(3.0).unwrap();
        assert_relative_eq!(k.coeffs()[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(k.coeffs()[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(k.kappa_beta(), 0.6, epsilon = 1e-10);
    }

    #[test]
    fn beta_four_kernel_is_cubic() {
        let k = build_legendre_kernel(4.0).unwrap();
        assert_relative_eq!(k.coeffs()[1], 75.0 / 4.0, epsilon = 1e-10);
        assert_relative_eq!(k.coeffs()[3], -105.0 / 4.0, epsilon = 1e-10);
        assert_relative_eq!(k.eval(1.0).unwrap(), -7.5, epsilon = 1e-10);
        assert_relative_eq!(k.kappa(), 18.75, epsilon = 1e-9);
        assert_relative_eq!(k.kappa_beta(), 55755.0 / 76832.0, epsilon = 1e-9);
    }

    #[test]
    fn moment_conditions_hold_to_quadrature_precision() {
        for beta in [2.0, 2.5, 3.0, 4.0, 4.5, 5.0, 6.0] {
            let k = build_legendre_kernel(beta).unwrap();
            let m = k.moments(k.ell());
            assert!(m[0].abs() < 1e-10, "beta {beta}: E[K] = {}", m[0]);
            assert!((m[1] - 1.0).abs() < 1e-10, "beta {beta}: E[rK] = {}", m[1]);
            for (j, mj) in m.iter().enumerate().take(k.ell() + 1).skip(2) {
                assert!(mj.abs() < 1e-10, "beta {beta}: E[r^{j} K] = {mj}");
            }
        }
    }

    #[test]
    fn solved_kernels_are_odd_polynomials() {
        // Even-degree components only feed even moments, which are all
        // constrained to zero, so the unique solution has none.
        for beta in [2.0, 3.0, 4.0, 5.0, 6.0] {
            let k = build_legendre_kernel(beta).unwrap();
            for (deg, c) in k.coeffs().iter().enumerate() {
                if deg % 2 == 0 {
                    assert!(c.abs() < 1e-9, "beta {beta}: even coeff r^{deg} = {c}");
                }
            }
        }
    }

    #[test]
    fn constants_stay_within_growth_envelopes() {
        // kappa_beta <= 2 sqrt(2) beta, and kappa grows but stays finite and
        // positive on the supported range.
        for beta in [2.0, 2.5, 3.0, 4.0, 5.0, 6.0] {
            let k = build_legendre_kernel(beta).unwrap();
            assert!(k.kappa_beta() <= 2.0 * 2.0_f64.sqrt() * beta, "beta {beta}");
            assert!(k.kappa() > 0.0 && k.kappa().is_finite());
        }
    }

    #[test]
    fn six_node_quadrature_route_matches_construction_route() {
        // moments() integrates numerically; construction used closed-form
        // monomial moments. Cross-check on a higher-order kernel.
        let k = build_legendre_kernel(6.0).unwrap();
        let m = k.moments(7);
        assert!((m[1] - 1.0).abs() < 1e-10);
        // Degree-7 moment need not vanish; it just has to be finite.
        assert!(m[7].is_finite());
    }

    #[test]
    fn eval_rejects_out_of_domain_arguments() {
        let k = build_legendre_kernel(2.0).unwrap();
        assert!(matches!(k.eval(1.2), Err(Error::KernelDomain(_))));
        assert!(matches!(k.eval(-1.0001), Err(Error::KernelDomain(_))));
    }

    #[test]
    fn small_beta_is_rejected() {
        assert!(matches!(build_legendre_kernel(1.5), Err(Error::UnsupportedSmoothness(_))));
        assert!(matches!(build_legendre_kernel(f64::NAN), Err(Error::UnsupportedSmoothness(_))));
    }

    #[test]
    fn quadrature_is_exact_on_a_polynomial() {
        // E[r^8] = 1/9 under U[-1,1].
        assert_relative_eq!(expectation(|r| r.powi(8)), 1.0 / 9.0, epsilon = 1e-14);
    }
}
