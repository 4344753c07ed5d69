//! Objective families, feasible sets, and verification helpers.
//!
//! Every objective exposes exact values and gradients (the optimizer itself
//! only ever sees noisy point evaluations; exact gradients exist so probes
//! and tests can measure estimator bias against ground truth). Families
//! carry metadata: function class, curvature constants, smoothness order,
//! and the optimum when it is known.

use nalgebra::{DMatrix, DVector};

use crate::hard::HardInstance;
use crate::rng::{Purpose, RandomStream, StreamFactory};
use crate::{vecmath, Error, Result};

/// Fixed seed for the internal sampling some constructors need (PL-constant
/// estimation) and for instance construction in the config layer. Keeps
/// instances deterministic and, in particular, independent of the run seed,
/// so seed sweeps optimize one fixed objective over one fixed graph.
pub(crate) const CONSTRUCTOR_SEED: u64 = 0x5ca1_ab1e;

/// Sample count for PL-constant estimation at construction.
const PL_SAMPLES: u64 = 8192;

/// Estimated PL constants are shrunk by this factor so that verification on
/// fresh samples does not trip over the sampling gap of the infimum.
const PL_SHRINK: f64 = 0.98;

/// Convex feasible set with a cheap exact projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSet {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ProjectionSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidDimension);
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonPositiveScale(radius));
        }
        Ok(ProjectionSet::Ball { center, radius })
    }

    pub fn axis_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidDimension);
        }
        if lo.len() != hi.len() {
            return Err(Error::Shape { expected: lo.len(), got: hi.len() });
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a <= b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::NonPositiveScale(b - a));
            }
        }
        Ok(ProjectionSet::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            ProjectionSet::Ball { center, .. } => center.len(),
            ProjectionSet::Box { lo, .. } => lo.len(),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: x.len() });
        }
        Ok(match self {
            ProjectionSet::Ball { center, radius } => {
                let dist = vecmath::dist_sq(x, center).sqrt();
                if dist <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / dist;
                    x.iter().zip(center).map(|(xi, ci)| ci + s * (xi - ci)).collect()
                }
            }
            ProjectionSet::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).map(|(xi, (l, h))| xi.clamp(*l, *h)).collect()
            }
        })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            ProjectionSet::Ball { center, radius } => {
                vecmath::dist_sq(x, center).sqrt() <= radius + tol
            }
            ProjectionSet::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(xi, (l, h))| *xi >= l - tol && *xi <= h + tol)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ProjectionSet::Ball { radius, .. } => 2.0 * radius,
            ProjectionSet::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
            }
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            ProjectionSet::Ball { center, .. } => center.clone(),
            ProjectionSet::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect()
            }
        }
    }

    /// A fixed boundary point, used as the default shared initializer.
    pub fn boundary_point(&self) -> Vec<f64> {
        match self {
            ProjectionSet::Ball { center, radius } => {
                let mut p = center.clone();
                p[0] += radius;
                p
            }
            ProjectionSet::Box { hi, .. } => hi.clone(),
        }
    }

    /// Uniform draw from the set.
    pub fn sample(&self, stream: &mut RandomStream) -> Result<Vec<f64>> {
        Ok(match self {
            ProjectionSet::Ball { center, radius } => {
                let b = stream.sample_ball(center.len())?;
                center.iter().zip(b).map(|(c, v)| c + radius * v).collect()
            }
            ProjectionSet::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(l, h)| l + stream.sample_unit() * (h - l)).collect()
            }
        })
    }
}

/// Structural guarantees an objective comes with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionClass {
    StronglyConvex,
    GradientDominant,
    SmoothOnly,
}

impl FunctionClass {
    pub fn name(self) -> &'static str {
        match self {
            FunctionClass::StronglyConvex => "strongly_convex",
            FunctionClass::GradientDominant => "gradient_dominant",
            FunctionClass::SmoothOnly => "smooth_only",
        }
    }
}

/// Curvature and smoothness metadata attached to an objective.
#[derive(Debug, Clone)]
pub struct Meta {
    pub class: FunctionClass,
    /// Strong convexity / gradient dominance constant, when the class has one.
    pub alpha: Option<f64>,
    /// Smoothness order the family is calibrated for.
    pub beta: f64,
    /// Taylor-remainder constant of order beta.
    pub holder_l: f64,
    /// Gradient Lipschitz constant (on the feasible set for the families
    /// whose Hessian is unbounded globally).
    pub grad_lipschitz: f64,
}

#[derive(Debug, Clone)]
enum Form {
    /// f(x) = (1/2) (x - x*)^T H (x - x*).
    Quadratic {
        h: DMatrix<f64>,
        xstar: Vec<f64>,
    },
    /// f(x) = ||A x - y||^2.
    LeastSquares {
        a: DMatrix<f64>,
        y: DVector<f64>,
    },
    /// f(x) = (1/m) sum_i log(1 + exp(-<a_i, x>)).
    Logistic {
        a: DMatrix<f64>,
    },
    /// f(x) = sum_k sign(x_k) |x_k|^beta, the canonical Holder-smooth probe
    /// with unit remainder constant.
    HolderProbe {
        beta: i32,
    },
    /// f(x) = <c, x> + b.
    Affine {
        c: Vec<f64>,
        b: f64,
    },
    Constant {
        value: f64,
    },
    Hard(HardInstance),
}

/// An objective with exact oracle access, metadata, and its feasible set.
#[derive(Debug, Clone)]
pub struct Objective {
    dim: usize,
    form: Form,
    meta: Meta,
    optimum: Option<(Vec<f64>, f64)>,
    theta: ProjectionSet,
}

impl Objective {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn theta(&self) -> &ProjectionSet {
        &self.theta
    }

    /// Known minimizer and minimal value, when the family provides one.
    pub fn optimum(&self) -> Option<(&[f64], f64)> {
        self.optimum.as_ref().map(|(x, f)| (x.as_slice(), *f))
    }

    pub fn fstar(&self) -> Result<f64> {
        self.optimum.as_ref().map(|(_, f)| *f).ok_or(Error::MissingOptimum)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.form {
            Form::Quadratic { h, xstar } => {
                let u = DVector::from_iterator(x.len(), x.iter().zip(xstar).map(|(a, b)| a - b));
                0.5 * (h * &u).dot(&u)
            }
            Form::LeastSquares { a, y } => {
                let r = a * DVector::from_column_slice(x) - y;
                r.norm_squared()
            }
            Form::Logistic { a } => {
                let z = a * DVector::from_column_slice(x);
                z.iter().map(|zi| softplus(-zi)).sum::<f64>() / a.nrows() as f64
            }
            Form::HolderProbe { beta } => x.iter().map(|&u| u.signum() * u.abs().powi(*beta)).sum(),
            Form::Affine { c, b } => vecmath::dot(c, x) + b,
            Form::Constant { value } => *value,
            Form::Hard(inst) => inst.value(x),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        match &self.form {
            Form::Quadratic { h, xstar } => {
                let u = DVector::from_iterator(x.len(), x.iter().zip(xstar).map(|(a, b)| a - b));
                (h * u).iter().copied().collect()
            }
            Form::LeastSquares { a, y } => {
                let r = a * DVector::from_column_slice(x) - y;
                (2.0 * a.transpose() * r).iter().copied().collect()
            }
            Form::Logistic { a } => {
                let z = a * DVector::from_column_slice(x);
                let m = a.nrows() as f64;
                // d/dx log(1+exp(-z)) = -sigmoid(-z) a_i
                let coeff = DVector::from_iterator(z.len(), z.iter().map(|zi| -sigmoid(-zi) / m));
                (a.transpose() * coeff).iter().copied().collect()
            }
            Form::HolderProbe { beta } => {
                x.iter().map(|&u| *beta as f64 * u.abs().powi(*beta - 1)).collect()
            }
            Form::Affine { c, .. } => c.clone(),
            Form::Constant { .. } => vec![0.0; self.dim],
            Form::Hard(inst) => inst.grad(x),
        }
    }

    /// The underlying hard instance, when this objective wraps one.
    pub fn hard_instance(&self) -> Option<&HardInstance> {
        match &self.form {
            Form::Hard(inst) => Some(inst),
            _ => None,
        }
    }

    pub(crate) fn from_hard(inst: HardInstance, meta: Meta, optimum: (Vec<f64>, f64)) -> Objective {
        let theta = inst.theta();
        Objective { dim: inst.dim(), form: Form::Hard(inst), meta, optimum: Some(optimum), theta }
    }
}

fn softplus(z: f64) -> f64 {
    // log(1 + e^z) without overflow on either tail.
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Strongly convex quadratic with spectrum spread linearly over
/// [alpha, lbar], conjugated by a random orthogonal matrix drawn from
/// `stream`, minimized at the center of `theta`.
pub fn make_quadratic(
    d: usize,
    alpha: f64,
    lbar: f64,
    theta: ProjectionSet,
    stream: &mut RandomStream,
) -> Result<Objective> {
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    if theta.dim() != d {
        return Err(Error::Shape { expected: d, got: theta.dim() });
    }
    if !(alpha > 0.0 && alpha <= lbar) {
        return Err(Error::Spectrum { alpha, lbar });
    }
    let eigs: Vec<f64> = if d == 1 {
        vec![alpha]
    } else {
        (0..d).map(|k| alpha + (lbar - alpha) * k as f64 / (d - 1) as f64).collect()
    };
    let q = random_orthogonal(d, stream);
    let lam = DMatrix::from_diagonal(&DVector::from_vec(eigs.clone()));
    let mut h = &q * lam * q.transpose();
    // Exact symmetry; the conjugation is symmetric only up to rounding.
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let xstar = theta.center();
    // Spectrum is exact by construction: alpha = lambda_min, lbar = lambda_max.
    let (lam_min, lam_max) = (eigs[0], *eigs.last().unwrap());
    Ok(Objective {
        dim: d,
        form: Form::Quadratic { h, xstar: xstar.clone() },
        meta: Meta {
            class: FunctionClass::StronglyConvex,
            alpha: Some(lam_min),
            beta: 2.0,
            holder_l: lam_max / 2.0,
            grad_lipschitz: lam_max,
        },
        optimum: Some((xstar, 0.0)),
        theta,
    })
}

fn random_orthogonal(d: usize, stream: &mut RandomStream) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| stream.sample_normal());
    g.qr().q()
}

/// Least-squares objective f(x) = ||Ax - y||^2 over `theta`. Gradient
/// dominant with a numerically certified constant: the closed form
/// 2 sigma_min_+^2 is not trusted, the constant is estimated by sampling the
/// PL ratio over theta and shrunk slightly below the observed infimum.
pub fn make_least_squares(rows: &[Vec<f64>], y: &[f64], theta: ProjectionSet) -> Result<Objective> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::InvalidDimension);
    }
    let d = rows[0].len();
    if d == 0 || theta.dim() != d {
        return Err(Error::Shape { expected: theta.dim(), got: d });
    }
    for r in rows {
        if r.len() != d {
            return Err(Error::Shape { expected: d, got: r.len() });
        }
    }
    if y.len() != m {
        return Err(Error::Shape { expected: m, got: y.len() });
    }
    let a = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);

    // Min-norm minimizer through the pseudo-inverse; f* is its residual.
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let pinv = svd.pseudo_inverse(1e-12 * s_max.max(1.0)).map_err(|_| Error::KernelConstruction)?;
    let xstar: Vec<f64> = (&pinv * &yv).iter().copied().collect();
    let fstar = (&a * DVector::from_column_slice(&xstar) - &yv).norm_squared();

    let gram_lmax = s_max * s_max;
    let mut obj = Objective {
        dim: d,
        form: Form::LeastSquares { a, y: yv },
        meta: Meta {
            class: FunctionClass::GradientDominant,
            alpha: None,
            beta: 2.0,
            holder_l: gram_lmax,
            grad_lipschitz: 2.0 * gram_lmax,
        },
        optimum: Some((xstar, fstar)),
        theta,
    };
    obj.meta.alpha = estimate_pl_constant(&obj)?;
    Ok(obj)
}

/// Logistic loss (1/m) sum log(1 + exp(-<a_i, x>)): smooth and convex but
/// with no curvature guarantee, so no optimum or alpha is exposed.
pub fn make_logistic(rows: &[Vec<f64>], theta: ProjectionSet) -> Result<Objective> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::InvalidDimension);
    }
    let d = rows[0].len();
    if d == 0 || theta.dim() != d {
        return Err(Error::Shape { expected: theta.dim(), got: d });
    }
    for r in rows {
        if r.len() != d {
            return Err(Error::Shape { expected: d, got: r.len() });
        }
    }
    let a = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
    let s_max = a.clone().svd(false, false).singular_values.max();
    // Hessian = (1/m) sum sigma'(z_i) a_i a_i^T with sigma' <= 1/4.
    let lbar = s_max * s_max / (4.0 * m as f64);
    Ok(Objective {
        dim: d,
        form: Form::Logistic { a },
        meta: Meta {
            class: FunctionClass::SmoothOnly,
            alpha: None,
            beta: 2.0,
            holder_l: lbar / 2.0,
            grad_lipschitz: lbar,
        },
        optimum: None,
        theta,
    })
}

/// Canonical smoothness probe f(x) = sum_k sign(x_k) |x_k|^beta for integer
/// beta >= 2. Its order-(beta-1) Taylor remainder constant is exactly 1, and
/// its gradient estimator bias admits closed forms, which makes it the
/// reference instrument for bias measurements.
pub fn make_holder_probe(beta: f64, d: usize, theta: ProjectionSet) -> Result<Objective> {
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    if theta.dim() != d {
        return Err(Error::Shape { expected: d, got: theta.dim() });
    }
    if beta < 2.0 || beta.fract() != 0.0 || beta > 32.0 {
        return Err(Error::ProbeOrder);
    }
    let b = beta as i32;
    // Hessian diag beta (beta-1) |u|^(beta-2) is bounded by the set radius.
    let reach = theta
        .project(&vec![0.0; d])
        .map(|_| {
            // Largest coordinate magnitude over the set.
            match &theta {
                ProjectionSet::Ball { center, radius } => {
                    center.iter().map(|c| c.abs()).fold(0.0f64, f64::max) + radius
                }
                ProjectionSet::Box { lo, hi } => {
                    lo.iter().chain(hi.iter()).map(|v| v.abs()).fold(0.0f64, f64::max)
                }
            }
        })
        .unwrap_or(1.0);
    let lbar = beta * (beta - 1.0) * reach.powi(b - 2);
    Ok(Objective {
        dim: d,
        form: Form::HolderProbe { beta: b },
        meta: Meta {
            class: FunctionClass::SmoothOnly,
            alpha: None,
            beta,
            holder_l: 1.0,
            grad_lipschitz: lbar,
        },
        optimum: None,
        theta,
    })
}

/// f(x) = <c, x> + b. Gradient estimators are exactly unbiased on affine
/// functions, which makes this the null instrument for estimator tests.
pub fn make_affine(c: Vec<f64>, b: f64, theta: ProjectionSet) -> Result<Objective> {
    let d = c.len();
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    if theta.dim() != d {
        return Err(Error::Shape { expected: d, got: theta.dim() });
    }
    Ok(Objective {
        dim: d,
        form: Form::Affine { c, b },
        meta: Meta {
            class: FunctionClass::SmoothOnly,
            alpha: None,
            beta: 2.0,
            holder_l: 0.0,
            grad_lipschitz: 0.0,
        },
        optimum: None,
        theta,
    })
}

/// Constant objective; every gradient estimate must vanish on it when the
/// noise is zero. Every feasible point is a minimizer; the set center stands
/// in as the recorded one.
pub fn make_constant(value: f64, d: usize, theta: ProjectionSet) -> Result<Objective> {
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    if theta.dim() != d {
        return Err(Error::Shape { expected: d, got: theta.dim() });
    }
    let center = theta.center();
    Ok(Objective {
        dim: d,
        form: Form::Constant { value },
        meta: Meta {
            class: FunctionClass::SmoothOnly,
            alpha: None,
            beta: 2.0,
            holder_l: 0.0,
            grad_lipschitz: 0.0,
        },
        optimum: Some((center, value)),
        theta,
    })
}

/// Infimum of ||grad f||^2 / (2 (f - f*)) over samples from theta, shrunk by
/// `PL_SHRINK`. Returns None when the objective is flat on theta (nothing to
/// certify). Requires a known optimum.
fn estimate_pl_constant(obj: &Objective) -> Result<Option<f64>> {
    let fstar = obj.fstar()?;
    let mut stream = StreamFactory::new(CONSTRUCTOR_SEED).stream(Purpose::Verify, 0, 0);
    let mut inf = f64::INFINITY;
    for _ in 0..PL_SAMPLES {
        let x = obj.theta().sample(&mut stream)?;
        let gap = obj.value(&x) - fstar;
        if gap <= 1e-12 * (1.0 + fstar.abs()) {
            continue;
        }
        let ratio = vecmath::norm_sq(&obj.grad(&x)) / (2.0 * gap);
        inf = inf.min(ratio);
    }
    Ok(if inf.is_finite() { Some(PL_SHRINK * inf) } else { None })
}

/// Result of a gradient-dominance check.
#[derive(Debug, Clone, Copy)]
pub struct PlReport {
    /// max over samples of 2 alpha (f - f*) / ||grad f||^2; <= 1 certifies.
    pub max_ratio: f64,
    /// Samples that actually entered the max (nonzero gradient, gap > 0).
    pub checked: usize,
}

impl PlReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_ratio <= 1.0 + tol
    }
}

/// Samples the gradient-dominance inequality 2 alpha (f - f*) <= ||grad f||^2
/// over theta and reports the worst ratio.
pub fn verify_pl(
    obj: &Objective,
    alpha: f64,
    n_samples: u64,
    stream: &mut RandomStream,
) -> Result<PlReport> {
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveScale(alpha));
    }
    let fstar = obj.fstar()?;
    let mut max_ratio = 0.0f64;
    let mut checked = 0;
    for _ in 0..n_samples {
        let x = obj.theta().sample(stream)?;
        let gap = obj.value(&x) - fstar;
        let g2 = vecmath::norm_sq(&obj.grad(&x));
        if g2 <= 1e-300 {
            // A zero gradient at a non-minimizer would break PL outright.
            if gap > 1e-9 * (1.0 + fstar.abs()) {
                max_ratio = f64::INFINITY;
                checked += 1;
            }
            continue;
        }
        max_ratio = max_ratio.max(2.0 * alpha * gap / g2);
        checked += 1;
    }
    Ok(PlReport { max_ratio, checked })
}

/// Estimates G = sup_theta ||grad f|| by sampling the interior and the
/// boundary. A sampled maximum, so it can only undershoot the true bound.
pub fn estimate_grad_bound(
    obj: &Objective,
    n_samples: u64,
    stream: &mut RandomStream,
) -> Result<f64> {
    let mut best = 0.0f64;
    for k in 0..n_samples {
        // Alternate between interior draws and boundary draws; the max of
        // convex functions' gradients lives on the boundary.
        let x = if k % 2 == 0 {
            obj.theta().sample(stream)?
        } else {
            match obj.theta() {
                ProjectionSet::Ball { center, radius } => {
                    let dir = stream.sample_sphere(center.len())?;
                    center.iter().zip(dir).map(|(c, v)| c + radius * v).collect()
                }
                ProjectionSet::Box { lo, hi } => lo
                    .iter()
                    .zip(hi)
                    .map(|(l, h)| if stream.sample_unit() < 0.5 { *l } else { *h })
                    .collect(),
            }
        };
        best = best.max(vecmath::norm(&obj.grad(&x)));
    }
    Ok(best)
}
