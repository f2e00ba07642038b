//! Explicit super/sub-solutions.
//!
//! Two constructions: the boundary barrier M (1 - (1 + d)^(-k)) built on the
//! distance to the boundary, whose exponent k and amplitude M are selected
//! so the operator value dips below -|f|_inf everywhere in the domain, and
//! the exponential annulus barrier behind the strong maximum principle,
//! whose decay rate c makes the weighted Hessian's eigenvalue combination
//! lam mu+ + Lam mu- strictly positive.
//!
//! Domains are balls and annuli: the distance function is closed-form there
//! and the semiconcavity constant is explicit, so the audits are exact.

use crate::matkernel::SymMat;
use crate::operators::{
    eval, eval_lower_order, Jet, LowerOrderSpec, OperatorSpec,
};
use crate::rng::SampleRng;
use crate::scalar::{dot, norm, Real};
use crate::{tol, Error, Result};

/// Ball or annulus with explicit distance machinery.
#[derive(Clone, Debug)]
pub enum Domain<R> {
    Ball { center: Vec<R>, radius: R },
    Annulus { center: Vec<R>, r1: R, r2: R },
}

impl<R: Real> Domain<R> {
    pub fn ball(center: Vec<R>, radius: R) -> Result<Self> {
        if !(radius > R::zero()) {
            return Err(Error::InvalidInput("ball radius must be positive".into()));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn annulus(center: Vec<R>, r1: R, r2: R) -> Result<Self> {
        if !(R::zero() < r1 && r1 < r2) {
            return Err(Error::InvalidInput("annulus needs 0 < r1 < r2".into()));
        }
        Ok(Domain::Annulus { center, r1, r2 })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.len(),
        }
    }

    pub fn diam(&self) -> R {
        match self {
            Domain::Ball { radius, .. } => R::c(2.0) * *radius,
            Domain::Annulus { r2, .. } => R::c(2.0) * *r2,
        }
    }

    /// Semiconcavity constant: D^2 d <= c1 I everywhere off the medial axis.
    pub fn c1(&self) -> R {
        match self {
            Domain::Ball { radius, .. } => radius.recip(),
            Domain::Annulus { r1, .. } => r1.recip(),
        }
    }

    /// Largest interior distance value.
    pub fn max_dist(&self) -> R {
        match self {
            Domain::Ball { radius, .. } => *radius,
            Domain::Annulus { r1, r2, .. } => (*r2 - *r1) / R::c(2.0),
        }
    }

    /// Signed interior distance (positive inside).
    pub fn dist(&self, x: &[R]) -> R {
        match self {
            Domain::Ball { center, radius } => {
                *radius - norm(&crate::scalar::sub(x, center))
            }
            Domain::Annulus { center, r1, r2 } => {
                let rho = norm(&crate::scalar::sub(x, center));
                (rho - *r1).min(*r2 - rho)
            }
        }
    }

    pub fn contains(&self, x: &[R]) -> bool {
        self.dist(x) > R::zero()
    }

    /// Distance to the medial axis (center for the ball, mid-sphere for the annulus).
    fn medial_gap(&self, x: &[R]) -> R {
        match self {
            Domain::Ball { center, .. } => norm(&crate::scalar::sub(x, center)),
            Domain::Annulus { center, r1, r2 } => {
                let rho = norm(&crate::scalar::sub(x, center));
                (rho - (*r1 + *r2) / R::c(2.0)).abs()
            }
        }
    }
}

/// Analytic jet of the distance function at an interior point off the
/// medial axis: (d, grad d, D^2 d) with |grad d| = 1 and D^2 d <= c1 I.
pub fn distance_jet<R: Real>(dom: &Domain<R>, x: &[R]) -> Result<(R, Vec<R>, SymMat<R>)> {
    let n = dom.dim();
    if x.len() != n {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let d = dom.dist(x);
    if !(d > R::zero()) {
        return Err(Error::Domain("point not interior".into()));
    }
    if dom.medial_gap(x) < R::tol_floor(1e-12) {
        return Err(Error::Singular("medial axis point".into()));
    }
    match dom {
        Domain::Ball { center, .. } => {
            let rel = crate::scalar::sub(x, center);
            let rho = norm(&rel);
            let xh: Vec<R> = rel.iter().map(|v| *v / rho).collect();
            let grad: Vec<R> = xh.iter().map(|v| -*v).collect();
            let hess = tangent_projector(&xh).scale(-rho.recip());
            Ok((d, grad, hess))
        }
        Domain::Annulus { center, r1, r2 } => {
            let rel = crate::scalar::sub(x, center);
            let rho = norm(&rel);
            let xh: Vec<R> = rel.iter().map(|v| *v / rho).collect();
            if rho - *r1 < *r2 - rho {
                // inner sphere closest: d = rho - r1
                let hess = tangent_projector(&xh).scale(rho.recip());
                Ok((d, xh, hess))
            } else {
                let grad: Vec<R> = xh.iter().map(|v| -*v).collect();
                let hess = tangent_projector(&xh).scale(-rho.recip());
                Ok((d, grad, hess))
            }
        }
    }
}

/// I - xh xh^T.
fn tangent_projector<R: Real>(xh: &[R]) -> SymMat<R> {
    let n = xh.len();
    SymMat::from_fn(n, |i, j| {
        let id = if i == j { R::one() } else { R::zero() };
        id - xh[i] * xh[j]
    })
}

/// Which of the two exponent rules fixed k.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KBinding {
    CurvatureRule,
    EllipticityRule,
}

/// Smallest integer exponent k satisfying both selection rules, using the
/// worst-case direction bound sum_i |d_i|^(2+alpha) >= N^(-alpha/2).
pub fn choose_k<R: Real>(
    alpha: R,
    lam_min: R,
    lam_max: R,
    n: usize,
    c1: R,
    c_h: R,
    diam: R,
) -> Result<(u32, KBinding)> {
    if !(alpha > R::zero() && lam_min > R::zero() && lam_max >= lam_min && c1 > R::zero()) {
        return Err(Error::InvalidInput("positive inputs required".into()));
    }
    let one = R::one();
    let two = R::c(2.0);
    let nn = R::c(n as f64);
    // rule 1: (k+1) (sum |d_i|^(2+alpha))^((1+alpha)/(2+alpha))
    //           >= 2 c1 N^((1+alpha)/(2+alpha)) (1 + diam),
    // worst case reduces to (k+1) >= 2 c1 (1 + diam) N^((1+alpha)/2).
    let rule1 = two * c1 * (one + diam) * nn.powf((one + alpha) / two);
    // rule 2: lam (k+1) N^(-1/(2+alpha)) >= 3 N Lam c1 + 2 c_h (1 + diam).
    let rule2 = nn.powf((two + alpha).recip())
        * (R::c(3.0) * nn * lam_max * c1 + two * c_h * (one + diam))
        / lam_min;
    let need = rule1.max(rule2);
    let k_plus_1 = need.to_f64_lossy().ceil().max(2.0) as u32;
    let binding = if rule1 >= rule2 {
        KBinding::CurvatureRule
    } else {
        KBinding::EllipticityRule
    };
    Ok((k_plus_1 - 1, binding))
}

/// Jet of the boundary barrier m (1 - (1 + d)^(-k)).
pub fn barrier_jet<R: Real>(
    m_amp: R,
    k: u32,
    dom: &Domain<R>,
    x: &[R],
) -> Result<(R, Vec<R>, SymMat<R>)> {
    if !(m_amp > R::zero()) {
        return Err(Error::InvalidInput("barrier amplitude must be positive".into()));
    }
    let (d, grad_d, hess_d) = distance_jet(dom, x)?;
    let one = R::one();
    let kk = R::c(k as f64);
    let opd = one + d;
    let psi = m_amp * (one - opd.powf(-kk));
    let gcoef = m_amp * kk * opd.powf(-(kk + one));
    let grad: Vec<R> = grad_d.iter().map(|g| *g * gcoef).collect();
    let hcoef = m_amp * kk * opd.powf(-(kk + R::c(2.0)));
    let hess = hess_d
        .scale(opd)
        .sub(&SymMat::outer(&grad_d).scale(kk + one))
        .scale(hcoef);
    Ok((psi, grad, hess))
}

/// Barrier amplitude threshold: M = M_unit * max(1, c_h + |f|_inf), where
/// M_unit beats the closed-form chain bound at the deepest interior point.
pub fn choose_m<R: Real>(
    alpha: R,
    lam_min: R,
    n: usize,
    k: u32,
    c_h: R,
    f_inf: R,
    max_dist: R,
) -> R {
    let one = R::one();
    let kk = R::c(k as f64);
    let nn = R::c(n as f64);
    let depth = (one + max_dist).powf(kk + R::c(2.0) + (kk + one) * alpha);
    let unit = (R::c(4.0) * depth / ((kk + one) * lam_min * nn.powf(-(R::c(2.0) + alpha).recip())))
        .powf((one + alpha).recip())
        / kk;
    unit * one.max(c_h + f_inf) * R::c(tol::STRICT_PAD)
}

/// One sampled row of the barrier audit.
#[derive(Clone, Debug)]
pub struct BarrierRow<R> {
    pub x: Vec<R>,
    pub d: R,
    pub f_value: R,
    pub h_value: R,
    /// Closed-form chain bound at this point.
    pub bound_value: R,
    ///

    /// F + h + |f|_inf; nonpositive when the barrier works.
    pub margin: R,
}

/// Barrier audit report.
#[derive(Clone, Debug)]
pub struct BarrierReport<R> {
    /// Worst F(psi) + h(psi) + |f|_inf over samples (supersolution side).
    pub worst_margin_super: R,
    /// Worst |f|_inf - (F(-psi) + h(-psi)) over samples (subsolution side).
    pub worst_margin_sub: R,
    /// Worst violation of any chain line, relative.
    pub worst_chain_violation: R,
    pub rows: Vec<BarrierRow<R>>,
}

/// Audits the boundary barrier: at sampled interior points the operator
/// value of +psi must sit below the closed-form chain bound and below
/// -|f|_inf, and -psi must dominate +|f|_inf from above.
#[allow(clippy::too_many_arguments)]
pub fn barrier_audit<R: Real>(
    op: &OperatorSpec<R>,
    lower: &LowerOrderSpec<R>,
    dom: &Domain<R>,
    m_amp: R,
    k: u32,
    f_inf: R,
    samples: u64,
    seed: u64,
) -> Result<BarrierReport<R>> {
    let n = dom.dim();
    let (lam_lo, lam_hi) = op.effective_ellipticity()?;
    let c1 = dom.c1();
    let nn = R::c(n as f64);
    let one = R::one();
    let two = R::c(2.0);
    let kk = R::c(k as f64);
    let mut worst_super = R::c(-f64::INFINITY);
    let mut worst_sub = R::c(-f64::INFINITY);
    let mut worst_chain = R::c(-f64::INFINITY);
    let mut rows = Vec::new();
    let mut accepted = 0u64;
    let mut attempt = 0u64;
    while accepted < samples {
        attempt += 1;
        if attempt > samples * 50 {
            return Err(Error::Internal("sample rejection rate too high".into()));
        }
        let mut rng = SampleRng::for_sample(seed, 8, attempt);
        let half = dom.diam() / two;
        let center = match dom {
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.clone(),
        };
        let x: Vec<R> = (0..n)
            .map(|i| center[i] + rng.uniform(-half, half))
            .collect();
        if !dom.contains(&x) || dom.medial_gap(&x) < R::c(1e-3) * half {
            continue;
        }
        accepted += 1;

        let (d, grad_d, hess_d) = distance_jet(dom, &x)?;
        let (_, grad, hess) = barrier_jet(m_amp, k, dom, &x)?;
        let f_val = eval(op, &Jet::new(x.clone(), grad.clone(), hess.clone())?)?;
        let h_val = eval_lower_order(lower, &x, &grad, op.alpha)?;

        // chain lines; K is the homogeneity factor of the barrier jet
        let opd = one + d;
        let kfac = (m_amp * kk).powf(one + alpha_of(op)) / opd.powf(kk + two + (kk + one) * alpha_of(op));
        let sum_pow = |p: R| -> R {
            grad_d.iter().map(|g| g.abs().powf(p)).sum()
        };
        let s_low = sum_pow(two + alpha_of(op));
        let envelope = eval(
            &envelope_spec(op, lam_lo, lam_hi)?,
            &Jet::new(x.clone(), grad_d.clone(), hess_d.clone())?,
        )?;
        let h_term = lower.c_h() * (m_amp * kk).powf(one + alpha_of(op))
            / opd.powf((kk + one) * (one + alpha_of(op)));
        let t1 = kfac * (opd * envelope - (kk + one) * lam_lo * s_low) + h_term;
        let t2 = kfac * (opd * lam_hi * c1 * sum_pow(alpha_of(op)) - (kk + one) * lam_lo * s_low)
            + h_term;
        let t3 = kfac
            * (two * nn * lam_hi * c1
                - (kk + one) * lam_lo * nn.powf(-(two + alpha_of(op)).recip()))
            + h_term;
        let t4 = -(kk + one) * lam_lo * nn.powf(-(two + alpha_of(op)).recip()) * kfac
            / R::c(4.0);

        let fh = f_val + h_val;
        let chain_checks = [
            (fh - lower.c_h(), t1),
            (t1, t2),
            (t2, t3),
            (t3 + lower.c_h(), t4),
        ];
        for (lo_side, hi_side) in chain_checks {
            let scale = one + lo_side.abs() + hi_side.abs();
            worst_chain = worst_chain.max((lo_side - hi_side) / scale);
        }

        let margin_super = fh + f_inf;
        worst_super = worst_super.max(margin_super);

        // subsolution side: -psi
        let neg_grad: Vec<R> = grad.iter().map(|g| -*g).collect();
        let f_neg = eval(op, &Jet::new(x.clone(), neg_grad.clone(), hess.scale(-one))?)?;
        let h_neg = eval_lower_order(lower, &x, &neg_grad, op.alpha)?;
        worst_sub = worst_sub.max(f_inf - (f_neg + h_neg));

        if rows.len() < 4096 {
            rows.push(BarrierRow {
                x,
                d,
                f_value: f_val,
                h_value: h_val,
                bound_value: t4,
                margin: margin_super,
            });
        }
    }
    Ok(BarrierReport {
        worst_margin_super: worst_super,
        worst_margin_sub: worst_sub,
        worst_chain_violation: worst_chain,
        rows,
    })
}

fn alpha_of<R: Real>(op: &OperatorSpec<R>) -> R {
    op.alpha
}

/// Extremal envelope with the operator's effective constants, used to bound
/// any family member from above inside the chain audit.
fn envelope_spec<R: Real>(
    op: &OperatorSpec<R>,
    lam_lo: R,
    lam_hi: R,
) -> Result<OperatorSpec<R>> {
    OperatorSpec::new(crate::operators::Family::PucciPlus, op.alpha, lam_lo, lam_hi)
}

/// Jet and spectral data of the annulus barrier w = e^(-c r) - e^(-c R) at x
/// (relative to the annulus center x1), with the derived quantities
/// a = c^2/r^2 + c/r^3, b = -c/r and the weighted direction vectors.
#[derive(Clone, Debug)]
pub struct SmpJet<R> {
    pub w: R,
    pub grad: Vec<R>,
    pub hess: SymMat<R>,
    pub a: R,
    pub b: R,
    pub vec_i: Vec<R>,
    pub vec_j: Vec<R>,
}

/// Computes the annulus barrier jet; r = |x - x1| must lie in [R/2, 3R/2].
pub fn smp_barrier_jet<R: Real>(c: R, r_ball: R, x1: &[R], x: &[R], alpha: R) -> Result<SmpJet<R>> {
    if !(c > R::zero() && r_ball > R::zero()) {
        return Err(Error::InvalidInput("decay rate and radius must be positive".into()));
    }
    let rel = crate::scalar::sub(x, x1);
    let r = norm(&rel);
    let half = r_ball / R::c(2.0);
    if !(r >= half && r <= R::c(3.0) * half) {
        return Err(Error::Domain(format!(
            "r = {r} outside the annulus [R/2, 3R/2] around the touching ball"
        )));
    }
    let ecr = (-c * r).exp();
    let w = ecr - (-c * r_ball).exp();
    let grad: Vec<R> = rel.iter().map(|v| -c * *v * ecr / r).collect();
    let a_raw = c * c / (r * r) + c / (r * r * r);
    let b_raw = -c / r;
    let n = rel.len();
    let hess = SymMat::from_fn(n, |i, j| {
        let main = a_raw * rel[i] * rel[j];
        let diag = if i == j { b_raw } else { R::zero() };
        ecr * (main + diag)
    });
    let vec_i: Vec<R> = rel
        .iter()
        .map(|v| v.abs().powf(alpha / R::c(2.0)) * *v)
        .collect();
    let vec_j: Vec<R> = rel.iter().map(|v| v.abs().powf(alpha / R::c(2.0))).collect();
    Ok(SmpJet { w, grad, hess, a: a_raw, b: b_raw, vec_i, vec_j })
}

/// The two nonzero eigenvalues of the scaled rank-two model
/// a i i^T + b j j^T (the rest of the spectrum is zero on (i, j)-perp).
pub fn smp_mu_pair<R: Real>(x_rel: &[R], c: R, alpha: R) -> Result<(R, R)> {
    let r = norm(x_rel);
    if r == R::zero() {
        return Err(Error::Singular("relative position vanishes".into()));
    }
    let a = c * c / (r * r) + c / (r * r * r);
    let b = -c / r;
    let vec_i: Vec<R> = x_rel
        .iter()
        .map(|v| v.abs().powf(alpha / R::c(2.0)) * *v)
        .collect();
    let vec_j: Vec<R> = x_rel.iter().map(|v| v.abs().powf(alpha / R::c(2.0))).collect();
    let ni2 = dot(&vec_i, &vec_i);
    let nj2 = dot(&vec_j, &vec_j);
    let ij = dot(&vec_i, &vec_j);
    let t = a * ni2 + b * nj2;
    let gram = (ni2 * nj2 - ij * ij).max(R::zero());
    let disc = (t * t / R::c(4.0) - a * b * gram).max(R::zero()).sqrt();
    Ok((t / R::c(2.0) + disc, t / R::c(2.0) - disc))
}

/// Smallest power-of-two decay rate making both positivity readings hold on
/// a sampled annulus grid: the rank-two eigenvalue combination
/// lam mu+ + Lam mu- and the direct extremal-envelope value of the barrier
/// jet. A 10% margin is kept on the sampled minimum.
pub fn choose_decay<R: Real>(
    lam_min: R,
    lam_max: R,
    alpha: R,
    n: usize,
    r_ball: R,
    seed: u64,
) -> Result<R> {
    let minus = OperatorSpec::new(
        crate::operators::Family::PucciMinus,
        alpha,
        lam_min,
        lam_max,
    )?;
    let x1 = vec![R::zero(); n];
    let mut c = R::one();
    for _ in 0..42 {
        let mut ok = true;
        'sampling: for k in 0..400u64 {
            let mut rng = SampleRng::for_sample(seed, 9, k);
            let dir = rng.direction::<R>(n);
            let r = rng.uniform(r_ball / R::c(2.0), R::c(1.5) * r_ball);
            let x: Vec<R> = dir.iter().map(|d| *d * r).collect();
            let (mu_p, mu_m) = smp_mu_pair(&x, c, alpha)?;
            let comb = lam_min * mu_p + lam_max * mu_m;
            if !(comb > R::c(0.1) * lam_min * mu_p.abs().max(mu_m.abs())) {
                ok = false;
                break 'sampling;
            }
            let jet = smp_barrier_jet(c, r_ball, &x1, &x, alpha)?;
            let direct = eval(&minus, &Jet::new(x, jet.grad.clone(), jet.hess.clone())?)?;
            if !(direct > R::zero()) {
                ok = false;
                break 'sampling;
            }
        }
        if ok {
            return Ok(c);
        }
        c = c * R::c(2.0);
    }
    Err(Error::Infeasible(
        "no power-of-two decay rate up to 2^41 made the annulus barrier strictly admissible".into(),
    ))
}
