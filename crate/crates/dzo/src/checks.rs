//! Self-contained validation suites.
//!
//! Each suite re-derives a property the library is supposed to guarantee and
//! reports it as a pass/fail [`Check`] with the measured numbers in the
//! detail string. The CLI `validate` subcommand prints one line per check;
//! the same suites back the integration gate, so the two can never drift
//! apart. Construction failures become failed checks rather than panics.

use crate::estimator::{probe_bias, probe_second_moment};
use crate::hard::{
    claimed_optimum, hard_instance_gradient_profile, hard_instance_optimum, make_hard_instance,
    HardInstance,
};
use crate::kernel::build_legendre_kernel;
use crate::network::{build_topology, metropolis_matrix, GraphKind, MixingMatrix};
use crate::noise::{NoiseKind, NoiseModel};
use crate::objective::{
    make_affine, make_constant, make_holder_probe, make_quadratic, ProjectionSet,
};
use crate::rng::{Purpose, StreamFactory};
use crate::Result;

/// One validated property with its measured evidence.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    fn fail(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(name, false, detail)
    }

    /// `PASS name | detail` or `FAIL name | detail`, one per line.
    pub fn summary_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} {} | {}", self.name, self.detail)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

// Fixed seeds for the Monte-Carlo checks; each probe owns a factory so the
// suites can run in any order or subset without changing their verdicts.
const UNBIASED_SEED: u64 = 0xA11CE;
const BIAS_SEED: u64 = 0xB1A5;
const VARIANCE_SEED: u64 = 0x5EC0;
const MIXING_SEED: u64 = 0x391D;

/// Moment conditions and constant growth for one kernel order.
pub fn kernel_check(beta: f64) -> Check {
    let name = format!("kernel beta={beta}");
    let k = match build_legendre_kernel(beta) {
        Ok(k) => k,
        Err(e) => return Check::fail(name, format!("construction failed: {e}")),
    };
    let moments = k.moments(k.ell());
    let mut gap = 0.0f64;
    for (j, m) in moments.iter().enumerate() {
        let target = if j == 1 { 1.0 } else { 0.0 };
        gap = gap.max((m - target).abs());
    }
    let envelope = 2.0 * 2.0f64.sqrt() * beta;
    let passed = gap <= 1e-10 && k.kappa_beta() <= envelope && k.kappa().is_finite();
    Check::new(
        name,
        passed,
        format!(
            "moment gap {:.2e} (tol 1e-10), kappa {:.6}, kappa_beta {:.6} <= {:.3}",
            gap,
            k.kappa(),
            k.kappa_beta(),
            envelope
        ),
    )
}

pub fn kernel_suite() -> Vec<Check> {
    [2.0, 3.0, 4.0, 5.0, 6.0].iter().map(|&b| kernel_check(b)).collect()
}

fn matrix_check(name: String, w: &MixingMatrix, adjacency: &[bool], exact_rho_zero: bool) -> Check {
    let n = w.n();
    let mut sym = 0.0f64;
    let mut row_gap = 0.0f64;
    let mut min_entry = f64::INFINITY;
    let mut sparsity_ok = true;
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let v = w.entry(i, j);
            sum += v;
            sym = sym.max((v - w.entry(j, i)).abs());
            min_entry = min_entry.min(v);
            if i != j && (v > 0.0) != adjacency[i * n + j] {
                sparsity_ok = false;
            }
        }
        row_gap = row_gap.max((sum - 1.0).abs());
    }
    let bound = 1.0 - 1.0 / (71.0 * (n * n) as f64);
    let rho_ok = if exact_rho_zero { w.rho() == 0.0 } else { w.rho() < bound };
    let passed = sym <= 1e-12 && row_gap <= 1e-12 && min_entry >= 0.0 && sparsity_ok && rho_ok;
    Check::new(
        name,
        passed,
        format!(
            "sym {:.1e}, row gap {:.1e}, min entry {:.1e}, sparsity {}, rho {:.6} vs {:.6}",
            sym,
            row_gap,
            min_entry,
            if sparsity_ok { "ok" } else { "broken" },
            w.rho(),
            if exact_rho_zero { 0.0 } else { bound }
        ),
    )
}

/// Metropolis properties for one topology.
pub fn mixing_check(kind: GraphKind, n: usize, p: Option<f64>, sample: u32) -> Check {
    let name = match p {
        Some(p) => format!("mixing {} n={n} p={p} sample={sample}", kind.name()),
        None => format!("mixing {} n={n}", kind.name()),
    };
    let factory = StreamFactory::new(MIXING_SEED);
    let mut stream = factory.stream(Purpose::Verify, sample, n as u64);
    let g = match build_topology(kind, n, p, &mut stream) {
        Ok(g) => g,
        Err(e) => return Check::fail(name, format!("construction failed: {e}")),
    };
    let mut adjacency = vec![false; n * n];
    for &(i, j) in g.edges() {
        adjacency[i * n + j] = true;
        adjacency[j * n + i] = true;
    }
    let w = metropolis_matrix(&g);
    matrix_check(name, &w, &adjacency, kind == GraphKind::Complete)
}

/// Ring, path, complete for every n in 3..=50, every square grid in range,
/// and 20 connected random graphs.
pub fn mixing_suite() -> Vec<Check> {
    let mut out = Vec::new();
    for n in 3..=50 {
        out.push(mixing_check(GraphKind::Ring, n, None, 0));
        out.push(mixing_check(GraphKind::Path, n, None, 0));
        out.push(mixing_check(GraphKind::Complete, n, None, 0));
    }
    for side in 2..=7 {
        out.push(mixing_check(GraphKind::Grid, side * side, None, 0));
    }
    for k in 0..20u32 {
        let n = 10 + 2 * k as usize;
        out.push(mixing_check(GraphKind::ErdosRenyi, n, Some(0.3), k));
    }
    out
}

/// Kernel estimator on an affine objective with zero noise: the Monte-Carlo
/// mean gradient must sit within 3 aggregate standard errors of the exact
/// one. Affine functions kill both the smoothing bias and the curvature
/// term, so any residual is estimator error.
pub fn estimator_unbiasedness_check(beta: f64, d: usize, n_samples: u64) -> Check {
    let name = format!("estimator unbiased beta={beta} d={d}");
    let run = || -> Result<(f64, f64)> {
        let factory = StreamFactory::new(UNBIASED_SEED);
        let theta = ProjectionSet::ball(vec![0.0; d], 5.0)?;
        let c = theta.sample(&mut factory.stream(Purpose::Verify, 0, d as u64))?;
        let obj = make_affine(c, 0.7, theta)?;
        let x = vec![0.25; d];
        let kernel = build_legendre_kernel(beta)?;
        let probe = probe_bias(&obj, &x, &kernel, &[0.2], n_samples, &factory)?;
        let p = probe.points[0];
        Ok((p.bias, p.se))
    };
    match run() {
        Ok((gap, se)) => Check::new(
            name,
            gap <= 3.0 * se,
            format!("|mean - grad| {:.3e} vs 3 se {:.3e} at {n_samples} samples", gap, 3.0 * se),
        ),
        Err(e) => Check::fail(name, format!("probe failed: {e}")),
    }
}

pub fn estimator_suite() -> Vec<Check> {
    [1, 5, 20].iter().map(|&d| estimator_unbiasedness_check(2.0, d, 100_000)).collect()
}

/// Bias decay of the kernel estimator on the one-dimensional smoothness
/// probe. The probe point and radii keep every query on a single analytic
/// branch, where the bias is exactly E[r^beta K] h^(beta-1) and the fitted
/// log-log slope must match beta - 1. For beta = 2 the per-radius bias is
/// also held under the envelope kappa_beta * L * d * h^(beta-1) with 10%
/// headroom.
pub fn estimator_bias_checks(beta: f64, n_samples: u64) -> Vec<Check> {
    let label = format!("estimator bias beta={beta}");
    let run = || -> Result<Vec<Check>> {
        let factory = StreamFactory::new(BIAS_SEED);
        let theta = ProjectionSet::ball(vec![0.0], 1.0)?;
        let obj = make_holder_probe(beta, 1, theta)?;
        let kernel = build_legendre_kernel(beta)?;
        // The beta = 2 probe u|u| is smooth everywhere except the origin, so
        // it measures the bias exactly there. Higher-order probes are too
        // symmetric at the origin; they sit at 0.5 with h < 0.5 instead.
        let (x, hs): (f64, &[f64]) = if beta == 2.0 {
            (0.0, &[0.4, 0.2, 0.1, 0.05])
        } else {
            (0.5, &[0.4, 0.28, 0.2, 0.14])
        };
        let probe = probe_bias(&obj, &[x], &kernel, hs, n_samples, &factory)?;
        let mut out = Vec::new();
        let check_envelope = beta == 2.0;
        for p in &probe.points {
            let envelope = 1.1 * kernel.kappa_beta() * obj.meta().holder_l * p.h.powf(beta - 1.0);
            let passed = !check_envelope || p.bias <= envelope;
            out.push(Check::new(
                format!("{label} h={}", p.h),
                passed,
                format!(
                    "bias {:.4e} se {:.1e}{}",
                    p.bias,
                    p.se,
                    if check_envelope {
                        format!(" envelope {envelope:.4e}")
                    } else {
                        String::new()
                    }
                ),
            ));
        }
        let slope = probe.slope.expect("grid has several radii");
        let expected = beta - 1.0;
        let tol = if beta == 2.0 { 0.15 } else { 0.2 };
        out.push(Check::new(
            format!("{label} slope"),
            (slope - expected).abs() <= tol,
            format!("fitted {slope:.4} vs {expected} +- {tol}"),
        ));
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![Check::fail(label, format!("probe failed: {e}"))])
}

/// Second-moment envelope of the kernel estimator on quadratics under
/// Gaussian noise, plus the scaling of the pure-noise term, measured on a
/// constant objective where it is the only contribution.
pub fn estimator_variance_checks(beta: f64, n_samples: u64) -> Vec<Check> {
    let label = format!("second moment beta={beta}");
    let run = || -> Result<Vec<Check>> {
        let factory = StreamFactory::new(VARIANCE_SEED);
        let kernel = build_legendre_kernel(beta)?;
        let kappa = kernel.kappa();
        let (alpha, lbar) = (1.0, 4.0);
        let mut out = Vec::new();
        for &d in &[2usize, 8] {
            let theta = ProjectionSet::ball(vec![0.0; d], 10.0)?;
            let obj = make_quadratic(
                d,
                alpha,
                lbar,
                theta,
                &mut factory.stream(Purpose::Verify, 1, d as u64),
            )?;
            let x = vec![0.8; d];
            let grad_sq: f64 = obj.grad(&x).iter().map(|g| g * g).sum();
            for &sigma in &[0.5, 1.0] {
                let noise = NoiseModel::new(NoiseKind::Gaussian, sigma)?;
                for &h in &[0.1, 0.05] {
                    let probe =
                        probe_second_moment(&obj, &x, h, &kernel, &noise, n_samples, &factory)?;
                    let dd = d as f64;
                    let envelope = 1.1
                        * (9.0 * kappa * dd * grad_sq
                            + 9.0 * kappa * lbar * dd * dd * h * h / 8.0
                            + 3.0 * kappa * sigma * sigma * dd * dd / (2.0 * h * h));
                    out.push(Check::new(
                        format!("{label} envelope d={d} sigma={sigma} h={h}"),
                        probe.mean <= envelope,
                        format!(
                            "E|g|^2 {:.4e} (se {:.1e}) <= {:.4e}",
                            probe.mean, probe.se, envelope
                        ),
                    ));
                }
            }
        }
        // Noise-term scaling: constant objective, so E|g|^2 = kappa sigma^2
        // d^2 / (2 h^2) exactly and the log-log slopes are -2 in h, 2 in d.
        let mut measured = Vec::new();
        for &d in &[2usize, 8] {
            for &h in &[0.1, 0.05] {
                let theta = ProjectionSet::ball(vec![0.0; d], 10.0)?;
                let obj = make_constant(0.0, d, theta)?;
                let noise = NoiseModel::new(NoiseKind::Gaussian, 1.0)?;
                let probe = probe_second_moment(
                    &obj,
                    &vec![0.0; d],
                    h,
                    &kernel,
                    &noise,
                    n_samples,
                    &factory,
                )?;
                measured.push((d, h, probe.mean));
            }
        }
        let pick = |d: usize, h: f64| {
            measured.iter().find(|&&(dd, hh, _)| dd == d && hh == h).expect("cell measured").2
        };
        for &d in &[2usize, 8] {
            let slope = (pick(d, 0.1) / pick(d, 0.05)).ln() / (0.1f64 / 0.05).ln();
            out.push(Check::new(
                format!("{label} noise slope in h (d={d})"),
                (slope + 2.0).abs() <= 0.3,
                format!("fitted {slope:.4} vs -2 +- 0.3"),
            ));
        }
        for &h in &[0.1, 0.05] {
            let slope = (pick(8, h) / pick(2, h)).ln() / (8.0f64 / 2.0).ln();
            out.push(Check::new(
                format!("{label} noise slope in d (h={h})"),
                (slope - 2.0).abs() <= 0.3,
                format!("fitted {slope:.4} vs 2 +- 0.3"),
            ));
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![Check::fail(label, format!("probe failed: {e}"))])
}

/// Richardson-extrapolated one-sided jump of f and f' across a seam; the
/// linear part of the two-sided difference cancels, leaving the jump plus
/// O(eps^2) curvature residue far below the tolerance.
fn seam_jumps(inst: &HardInstance, tau: f64, s: f64) -> (f64, f64) {
    let eps = 1e-4 * inst.a().min(1.0);
    let dv = |e: f64| inst.phi(tau, s + e) - inst.phi(tau, s - e);
    let dg = |e: f64| inst.phi_deriv(tau, s + e) - inst.phi_deriv(tau, s - e);
    let vjump = (2.0 * dv(eps / 2.0) - dv(eps)).abs();
    let gjump = (2.0 * dg(eps / 2.0) - dg(eps)).abs();
    (vjump, gjump)
}

/// Integrity of one hard-instance cell: seam gluing, gradient formula
/// against finite differences, and the numeric optimum against the closed
/// forms, with the exponent discrepancy of the quoted minimal value flagged
/// whenever a negative-sign coordinate makes it visible.
pub fn hard_cell_check(beta: f64, alpha: f64, horizon: u64, d: usize) -> Vec<Check> {
    let label = format!("hard beta={beta} alpha={alpha} T={horizon} d={d}");
    let omega_plus = vec![1i8; d];
    let omega_mixed: Vec<i8> = (0..d).map(|k| if k % 2 == 0 { -1 } else { 1 }).collect();
    let run = || -> Result<Vec<Check>> {
        let plus = make_hard_instance(beta, alpha, horizon, d, &omega_plus)?;
        let mixed = make_hard_instance(beta, alpha, horizon, d, &omega_mixed)?;
        let mut out = Vec::new();

        let mut vmax = 0.0f64;
        let mut gmax = 0.0f64;
        for tau in [1.0, -1.0] {
            for s in [0.0, mixed.a()] {
                let (v, g) = seam_jumps(&mixed, tau, s);
                vmax = vmax.max(v);
                gmax = gmax.max(g);
            }
        }
        out.push(Check::new(
            format!("{label} seams"),
            vmax <= 1e-8 && gmax <= 1e-8,
            format!("value jump {vmax:.2e}, derivative jump {gmax:.2e} (tol 1e-8)"),
        ));

        let profile = hard_instance_gradient_profile(&mixed, 201);
        out.push(Check::new(
            format!("{label} gradient"),
            profile.max_fd_gap <= 1e-6,
            format!(
                "max |formula - fd| {:.2e} over {} points (tol 1e-6)",
                profile.max_fd_gap, profile.points
            ),
        ));

        let (_, f_num) = hard_instance_optimum(&mixed);
        let claimed = claimed_optimum(&mixed);
        let scale = claimed.f_at_claimed_x.abs().max(1e-12);
        let discrepancy =
            (claimed.f_printed - claimed.f_at_claimed_x).abs() > 1e-12 * scale.max(1.0);
        // Negative-sign coordinates put the quoted minimizer at the right
        // seam, where the printed value uses the wrong h exponent; the flag
        // must fire there and stay silent for the all-plus pattern.
        let expect_flag = omega_mixed.contains(&-1);
        out.push(Check::new(
            format!("{label} optimum"),
            f_num <= claimed.f_at_claimed_x + 1e-9 * scale && discrepancy == expect_flag,
            format!(
                "numeric {:.6e}, at claimed x {:.6e}, printed {:.6e}{}",
                f_num,
                claimed.f_at_claimed_x,
                claimed.f_printed,
                if discrepancy { " [exponent discrepancy]" } else { "" }
            ),
        ));

        let (x_plus, f_plus) = hard_instance_optimum(&plus);
        out.push(Check::new(
            format!("{label} all-plus optimum"),
            x_plus.iter().all(|&v| v == 0.0) && f_plus == 0.0,
            format!(
                "x* max |coord| {:.1e}, f* {:.1e} (must be exactly 0)",
                x_plus.iter().fold(0.0f64, |m, &v| m.max(v.abs())),
                f_plus
            ),
        ));
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![Check::fail(label, format!("construction failed: {e}"))])
}

pub fn hard_suite() -> Vec<Check> {
    let mut out = Vec::new();
    for &beta in &[2.0, 3.0] {
        for &alpha in &[0.5, 1.0] {
            for &horizon in &[16u64, 256] {
                for &d in &[1usize, 4] {
                    out.extend(hard_cell_check(beta, alpha, horizon, d));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_suite_is_green() {
        let checks = kernel_suite();
        assert_eq!(checks.len(), 5);
        for c in &checks {
            assert!(c.passed, "{}", c.summary_line());
        }
    }

    #[test]
    fn mixing_check_catches_single_graphs() {
        let c = mixing_check(GraphKind::Ring, 8, None, 0);
        assert!(c.passed, "{}", c.summary_line());
        let c = mixing_check(GraphKind::Complete, 12, None, 0);
        assert!(c.passed && c.detail.contains("rho 0.000000"), "{}", c.summary_line());
        let c = mixing_check(GraphKind::Grid, 5, None, 0);
        assert!(!c.passed, "non-square grid must fail as a check");
    }

    #[test]
    fn estimator_unbiasedness_holds_at_small_samples() {
        // Smaller sample count than the gate uses; the 3 se band scales with
        // it, so the verdict is still meaningful.
        let c = estimator_unbiasedness_check(2.0, 3, 20_000);
        assert!(c.passed, "{}", c.summary_line());
    }

    #[test]
    fn bias_checks_report_slope_and_envelope() {
        let checks = estimator_bias_checks(2.0, 40_000);
        assert_eq!(checks.len(), 5);
        assert!(checks[0].detail.contains("envelope"));
        assert!(checks.last().unwrap().name.ends_with("slope"));
        for c in &checks {
            assert!(c.passed, "{}", c.summary_line());
        }
    }

    #[test]
    fn variance_checks_cover_envelope_and_slopes() {
        let checks = estimator_variance_checks(2.0, 30_000);
        assert_eq!(checks.len(), 12);
        for c in &checks {
            assert!(c.passed, "{}", c.summary_line());
        }
    }

    #[test]
    fn hard_cell_flags_the_exponent_discrepancy() {
        let checks = hard_cell_check(2.0, 1.0, 16, 1);
        assert_eq!(checks.len(), 4);
        for c in &checks {
            assert!(c.passed, "{}", c.summary_line());
        }
        let opt = checks.iter().find(|c| c.name.ends_with(" optimum")).unwrap();
        assert!(opt.detail.contains("exponent discrepancy"), "{}", opt.detail);
    }

    #[test]
    fn summary_lines_are_machine_readable() {
        let c = Check::new("kernel beta=2", true, "gap 1e-16");
        assert_eq!(c.summary_line(), "PASS kernel beta=2 | gap 1e-16");
        let c = Check::fail("x", "boom");
        assert!(c.summary_line().starts_with("FAIL x | "));
        assert!(!all_passed(&[c]));
    }
}
