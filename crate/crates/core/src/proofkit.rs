//! Executable pieces of the Lipschitz-regularity argument.
//!
//! The doubled-variable proof runs on a radial comparison profile omega:
//! either the Hölder family s^gamma or the Lipschitz family
//! s - omega0 s^(1+tau). From the profile come the radial Hessian of
//! g(x) = omega(|x|), the quadratic-corrected Hessian delivered by the
//! doubled-variable matrix lemma, its radial coefficient fit, and the
//! "pinch" bounds: a certified negative eigenvalue of Theta H Theta that
//! pinches the doubled maximum. The four regime constant systems are
//! assembled into a `Certificate` whose inequalities can be re-verified
//! after the fact.

use crate::matkernel::{eig_sym, op_norm, SymMat};
use crate::scalar::{norm, Real};
use crate::{tol, Error, Result};

/// Radial comparison profile.
#[derive(Clone, Copy, Debug)]
pub enum RadialProfile<R> {
    /// omega(s) = s^gamma, gamma in (0, 1).
    Holder { gamma: R },
    /// omega(s) = s - omega0 s^(1+tau), valid below s0 = ((1+tau) omega0)^(-1/tau).
    Lip { tau: R, omega0: R },
}

impl<R: Real> RadialProfile<R> {
    pub fn holder(gamma: R) -> Result<Self> {
        if !(gamma > R::zero() && gamma < R::one()) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} outside (0,1)")));
        }
        Ok(RadialProfile::Holder { gamma })
    }

    pub fn lip(tau: R, omega0: R) -> Result<Self> {
        if !(tau > R::zero() && tau < R::one()) {
            return Err(Error::InvalidInput(format!("tau = {tau} outside (0,1)")));
        }
        if !(omega0 > R::zero() && omega0 * (R::one() + tau) < R::one()) {
            return Err(Error::InvalidInput(
                "omega0 must satisfy 0 < omega0 (1 + tau) < 1 so the profile stays increasing past s = 1".into(),
            ));
        }
        Ok(RadialProfile::Lip { tau, omega0 })
    }

    /// Upper end of the s-interval where the profile is increasing and concave.
    pub fn validity_sup(&self) -> R {
        match self {
            RadialProfile::Holder { .. } => R::infinity(),
            RadialProfile::Lip { tau, omega0 } => {
                ((R::one() + *tau) * *omega0).powf(-tau.recip())
            }
        }
    }

    /// Threshold below which the Lipschitz profile has slope in [1/2, 1).
    pub fn half_slope_sup(&self) -> R {
        match self {
            RadialProfile::Holder { .. } => R::infinity(),
            RadialProfile::Lip { tau, omega0 } => {
                (R::c(2.0) * *omega0 * (R::one() + *tau)).powf(-tau.recip())
            }
        }
    }

    /// (omega, omega', omega'') at s.
    pub fn eval(&self, s: R) -> Result<(R, R, R)> {
        if !(s > R::zero()) || s >= self.validity_sup() {
            return Err(Error::Domain(format!(
                "s = {s} outside the profile validity interval (0, {})",
                self.validity_sup()
            )));
        }
        Ok(match self {
            RadialProfile::Holder { gamma } => {
                let g = *gamma;
                (
                    s.powf(g),
                    g * s.powf(g - R::one()),
                    -g * (R::one() - g) * s.powf(g - R::c(2.0)),
                )
            }
            RadialProfile::Lip { tau, omega0 } => {
                let (t, w0) = (*tau, *omega0);
                (
                    s - w0 * s.powf(R::one() + t),
                    R::one() - w0 * (R::one() + t) * s.powf(t),
                    -w0 * t * (R::one() + t) * s.powf(t - R::one()),
                )
            }
        })
    }
}

/// Hessian of g(x) = omega(|x|):
/// (w'' - w'/s) xh xh^T + (w'/s) I with xh = x/|x|.
pub fn radial_hessian<R: Real>(profile: &RadialProfile<R>, x: &[R]) -> Result<SymMat<R>> {
    let s = norm(x);
    if s == R::zero() {
        return Err(Error::Singular("radial hessian at the origin".into()));
    }
    let (_, dw, ddw) = profile.eval(s)?;
    let n = x.len();
    let t = dw / s;
    Ok(SymMat::from_fn(n, |i, j| {
        let rad = (ddw - t) * x[i] * x[j] / (s * s);
        if i == j {
            rad + t
        } else {
            rad
        }
    }))
}

/// Quadratic-corrected Hessian H + H^2 / (2 |H|), the matrix the
/// doubled-variable lemma hands back at the canonical regularization choice.
pub fn corrected_hessian<R: Real>(profile: &RadialProfile<R>, x: &[R]) -> Result<SymMat<R>> {
    let h1 = radial_hessian(profile, x)?;
    let nrm = op_norm(&h1)?;
    if nrm == R::zero() {
        return Err(Error::Degenerate("radial hessian vanished".into()));
    }
    Ok(h1.add(&h1.square().scale((R::c(2.0) * nrm).recip())))
}

/// Least-squares radial coefficients of S against
/// (beta w'' - gamma w'/s) xh xh^T + gamma (w'/s) I.
/// Returns (beta, gamma, Frobenius residual). In dimension 1 the tangential
/// part is absent and gamma defaults to 1.
pub fn fit_radial_coeffs<R: Real>(
    s_mat: &SymMat<R>,
    profile: &RadialProfile<R>,
    x: &[R],
) -> Result<(R, R, R)> {
    let s = norm(x);
    if s == R::zero() {
        return Err(Error::Singular("radial fit at the origin".into()));
    }
    let (_, dw, ddw) = profile.eval(s)?;
    let n = x.len();
    let xh: Vec<R> = x.iter().map(|v| *v / s).collect();
    let radial_val = s_mat.quad_form(&xh);
    let beta = radial_val / ddw;
    let gamma = if n == 1 {
        R::one()
    } else {
        (s_mat.trace() - radial_val) / (R::c((n - 1) as f64) * dw / s)
    };
    let model = SymMat::from_fn(n, |i, j| {
        let rad = (beta * ddw - gamma * dw / s) * xh[i] * xh[j];
        if i == j {
            rad + gamma * dw / s
        } else {
            rad
        }
    });
    Ok((beta, gamma, s_mat.sub(&model).frob()))
}

/// Axes where |x_i| >= |x|^(1+eps); requires 0 < |x| < 1.
pub fn dominant_axes<R: Real>(x: &[R], eps: R) -> Result<Vec<usize>> {
    let s = norm(x);
    if !(s > R::zero() && s < R::one()) {
        return Err(Error::Domain(format!("|x| = {s} outside (0, 1)")));
    }
    if !(eps > R::zero()) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let cut = s.powf(R::one() + eps);
    Ok((0..x.len()).filter(|&i| x[i].abs() >= cut).collect())
}

/// Diagonal weight entries |w'(|x|) x_i / |x||^(alpha/2).
pub fn profile_theta<R: Real>(profile: &RadialProfile<R>, x: &[R], alpha: R) -> Result<Vec<R>> {
    let s = norm(x);
    if s == R::zero() {
        return Err(Error::Singular("weight at the origin".into()));
    }
    let (_, dw, _) = profile.eval(s)?;
    let dir: Vec<R> = x.iter().map(|v| dw * *v / s).collect();
    Ok(crate::operators::theta_alpha(&dir, alpha))
}

/// The curvature-domination precondition of the large-alpha pinch bound:
/// beta w''(s)(1 - N s^(2 eps)) + gamma N s^(2 eps) w'(s)/s <= w''(s)/4 < 0.
pub fn pinch_precondition<R: Real>(
    profile: &RadialProfile<R>,
    x: &[R],
    eps: R,
    beta: R,
    gamma: R,
) -> Result<bool> {
    let s = norm(x);
    let (_, dw, ddw) = profile.eval(s)?;
    let n = R::c(x.len() as f64);
    let z = s.powf(R::c(2.0) * eps);
    let lhs = beta * ddw * (R::one() - n * z) + gamma * n * z * dw / s;
    Ok(lhs <= ddw / R::c(4.0) && ddw < R::zero())
}

/// Certified negative eigenvalue bound for Theta H~ Theta.
/// Branch alpha <= 2 needs no eps; branch alpha > 2 requires a nonempty
/// dominant axis set and the curvature-domination precondition.
/// Returns (bound, alt_bound): `alt_bound` carries the s^(2 eps) exponent
/// variant so a verifier can report which one the spectrum satisfies.
pub fn pinch_bound<R: Real>(
    profile: &RadialProfile<R>,
    x: &[R],
    alpha: R,
    eps: Option<R>,
) -> Result<(R, R)> {
    let s = norm(x);
    let (_, dw, ddw) = profile.eval(s)?;
    let n = x.len();
    let h = corrected_hessian(profile, x)?;
    let (beta, gamma, _) = fit_radial_coeffs(&h, profile, x)?;
    if alpha <= R::c(2.0) {
        let b = R::c(n as f64).powf(-alpha / R::c(2.0)) * beta * ddw * dw.powf(alpha);
        Ok((b, b))
    } else {
        let e = eps.ok_or_else(|| {
            Error::Precondition("alpha > 2 requires an eps for the dominant axis set".into())
        })?;
        let axes = dominant_axes(x, e)?;
        if axes.is_empty() {
            return Err(Error::Precondition(format!(
                "dominant axis set empty at |x| = {s}, eps = {e}"
            )));
        }
        if !pinch_precondition(profile, x, e, beta, gamma)? {
            return Err(Error::Precondition(format!(
                "curvature domination fails at |x| = {s}, eps = {e}"
            )));
        }
        let nn = R::c(n as f64);
        let count = R::c(axes.len() as f64);
        let z = s.powf(R::c(2.0) * e);
        let common = (R::one() - nn * z) / count * dw.powf(alpha) * ddw / R::c(4.0);
        let bound = common * s.powf((alpha - R::c(2.0)) * e);
        let alt = common * z;
        Ok((bound, alt))
    }
}

/// Outcome of one pinch verification.
#[derive(Clone, Debug)]
pub struct PinchReport<R> {
    /// Smallest eigenvalue of Theta H~ Theta.
    pub mu1: R,
    pub bound: R,
    pub alt_bound: R,
    pub ok: bool,
    pub ok_alt: bool,
}

/// Computes the smallest eigenvalue of Theta H~ Theta and compares it with
/// the certified bound (both exponent variants).
pub fn pinch_verify<R: Real>(
    profile: &RadialProfile<R>,
    x: &[R],
    alpha: R,
    eps: Option<R>,
) -> Result<PinchReport<R>> {
    let (bound, alt_bound) = pinch_bound(profile, x, alpha, eps)?;
    let h = corrected_hessian(profile, x)?;
    let th = profile_theta(profile, x, alpha)?;
    let weighted = h.conj_diag(&th);
    let mu1 = eig_sym(&weighted)?.values[0];
    let slack = R::tol_floor(tol::AUDIT);
    let ok = mu1 <= bound + slack * bound.abs().max(R::one());
    let ok_alt = mu1 <= alt_bound + slack * alt_bound.abs().max(R::one());
    Ok(PinchReport { mu1, bound, alt_bound, ok, ok_alt })
}

/// An eps that makes the large-alpha pinch preconditions hold for every
/// point with |x| <= s_max, using the worst-case radial coefficient ranges
/// beta >= 1/2, gamma <= 3/2 and the worst (diagonal) direction.
pub fn pinch_eps_for<R: Real>(profile: &RadialProfile<R>, n: usize, s_max: R) -> Result<R> {
    let (_, dw, ddw) = profile.eval(s_max)?;
    let nn = R::c(n as f64);
    // z = s^(2 eps) must satisfy N z (1/2 + 3/2 * w'/(s |w''|)) <= 1/4.
    let ratio = dw / (s_max * ddw.abs());
    let z_cap = (R::c(4.0) * nn * (R::c(0.5) + R::c(1.5) * ratio)).recip();
    let eps_curv = z_cap.ln() / (R::c(2.0) * s_max.ln());
    // nonempty dominant axes in the worst direction: |x_i| = |x|/sqrt(N).
    let eps_axes = -nn.sqrt().ln() / s_max.ln();
    Ok((eps_curv.max(eps_axes)) * R::c(1.25) + R::c(0.01))
}

/// The four proof regimes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    HolderSmallAlpha,
    HolderLargeAlpha,
    LipSmallAlpha,
    LipLargeAlpha,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::HolderSmallAlpha => "holder_small_alpha",
            Regime::HolderLargeAlpha => "holder_large_alpha",
            Regime::LipSmallAlpha => "lip_small_alpha",
            Regime::LipLargeAlpha => "lip_large_alpha",
        }
    }
}

/// One named bound: the doubled maximum is controlled by c M^(1+alpha) d^(-tau).
#[derive(Clone, Copy, Debug)]
pub struct NamedBound<R> {
    pub tau: R,
    pub c: R,
}

/// Constant system of one regime.
#[derive(Clone, Debug)]
pub struct RegimeBounds<R> {
    pub regime: Regime,
    /// Exponent of the certified negative eigenvalue.
    pub tau_hat: R,
    /// Its constant.
    pub c_main: R,
    /// Remaining eigenvalues of the weighted sum.
    pub extra_eigs: NamedBound<R>,
    /// Coefficient movement in x.
    pub x_dependence: NamedBound<R>,
    /// Gradient substitution between the doubled gradients.
    pub gradient_swap: NamedBound<R>,
    /// Lower order term.
    pub lower_order: NamedBound<R>,
}

impl<R: Real> RegimeBounds<R> {
    pub fn named(&self) -> [(&'static str, NamedBound<R>); 4] {
        [
            ("extra_eigs", self.extra_eigs),
            ("x_dependence", self.x_dependence),
            ("gradient_swap", self.gradient_swap),
            ("lower_order", self.lower_order),
        ]
    }

    /// Every named exponent must sit strictly below tau_hat.
    pub fn check_ordering(&self) -> Result<()> {
        for (name, b) in self.named() {
            if !(b.tau < self.tau_hat) {
                return Err(Error::Precondition(format!(
                    "{name}: tau = {} is not below tau_hat = {}",
                    b.tau, self.tau_hat
                )));
            }
        }
        Ok(())
    }

    /// Left side of the radius-smallness inequality at radius d.
    pub fn delta_lhs(&self, d: R, lam_max: R) -> R {
        self.x_dependence.c * d.powf(self.tau_hat - self.x_dependence.tau)
            + self.gradient_swap.c * d.powf(self.tau_hat - self.gradient_swap.tau)
            + self.lower_order.c * d.powf(self.tau_hat - self.lower_order.tau)
            + lam_max * self.extra_eigs.c * d.powf(self.tau_hat - self.extra_eigs.tau)
    }
}

/// Structural constants shared by all regimes.
#[derive(Clone, Copy, Debug)]
pub struct ProofConsts<R> {
    pub n: usize,
    pub gamma_f: R,
    pub c_gamma_f: R,
    pub c_f: R,
    pub c_h: R,
}

/// Regime parameters.
#[derive(Clone, Copy, Debug)]
pub enum RegimeParams<R> {
    HolderSmall { gamma: R },
    HolderLarge { gamma: R, eps: R },
    LipSmall { tau: R, gamma: R, omega0: R, c_gamma_r: R },
    LipLarge { tau: R, gamma: R, omega0: R, eps: R, c_gamma_r: R },
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Precondition(what.to_string()))
    }
}

/// Assembles the constant system of one regime, checking the exponent
/// constraints that regime demands.
pub fn regime_constants<R: Real>(
    alpha: R,
    params: RegimeParams<R>,
    consts: &ProofConsts<R>,
) -> Result<RegimeBounds<R>> {
    let one = R::one();
    let two = R::c(2.0);
    let n = R::c(consts.n as f64);
    let gf = consts.gamma_f;
    require(gf > R::zero() && gf <= one, "gamma_f must lie in (0, 1]")?;
    require(alpha > R::zero(), "alpha must be positive")?;

    let bounds = match params {
        RegimeParams::HolderSmall { gamma } | RegimeParams::HolderLarge { gamma, .. } => {
            require(gamma > R::zero() && gamma < one, "gamma must lie in (0, 1)")?;
            let (regime, tau_hat) = match params {
                RegimeParams::HolderSmall { .. } => {
                    require(alpha <= two, "small-alpha Hölder regime needs alpha <= 2")?;
                    (Regime::HolderSmallAlpha, two - gamma + (one - gamma) * alpha)
                }
                RegimeParams::HolderLarge { eps, .. } => {
                    require(alpha >= two, "large-alpha Hölder regime needs alpha >= 2")?;
                    require(
                        eps > R::zero() && eps < (gf / two).min((one - gamma) / two),
                        "eps must lie in (0, min(gamma_f/2, (1-gamma)/2))",
                    )?;
                    (
                        Regime::HolderLargeAlpha,
                        two - gamma + (one - gamma) * alpha - eps,
                    )
                }
                _ => unreachable!(),
            };
            let am1p = (alpha - one).max(R::zero());
            RegimeBounds {
                regime,
                tau_hat,
                c_main: gamma * (one - gamma) / R::c(8.0),
                extra_eigs: NamedBound {
                    tau: (one - gamma) * alpha,
                    c: R::c(6.0) * gamma.powf(alpha),
                },
                x_dependence: NamedBound {
                    tau: two - gamma + (one - gamma) * alpha - gf,
                    c: R::c(12.0) * consts.c_gamma_f * gamma.powf(one + alpha) * (n + R::c(3.0) - gamma),
                },
                gradient_swap: NamedBound {
                    tau: two - gamma + (one - gamma) * am1p,
                    c: consts.c_f * two.powf(one + alpha) * (gamma + one).powf(am1p),
                },
                lower_order: NamedBound {
                    tau: (one - gamma) * (one + alpha),
                    c: two * consts.c_h * ((gamma + R::c(3.0)).powf(one + alpha) + one),
                },
            }
        }
        RegimeParams::LipSmall { tau, gamma, omega0, c_gamma_r } => {
            require(alpha <= two, "small-alpha Lipschitz regime needs alpha <= 2")?;
            require(
                tau > R::zero() && tau < gf.min(R::c(0.5)).min(alpha / two),
                "tau must lie in (0, min(gamma_f, 1/2, alpha/2))",
            )?;
            require(
                gamma < one && gamma * one.min(alpha) > two * tau,
                "gamma must lie in (2 tau / min(1, alpha), 1)",
            )?;
            require(omega0 * (one + tau) < one, "omega0 (1 + tau) must be below 1")?;
            let wob = omega0 * tau * (one + tau);
            let c3 = if alpha <= one {
                two * consts.c_f * (R::c(6.0) + two * wob) * c_gamma_r.powf(alpha / two)
            } else {
                two * consts.c_f
                    * (R::c(6.0) + two * wob)
                    * c_gamma_r.sqrt()
                    * alpha
                    * R::c(3.0).powf(alpha - one)
            };
            RegimeBounds {
                regime: Regime::LipSmallAlpha,
                tau_hat: one - tau,
                c_main: wob / R::c(8.0),
                extra_eigs: NamedBound { tau: R::zero(), c: R::c(6.0) },
                x_dependence: NamedBound {
                    tau: one - gf,
                    c: consts.c_gamma_f * (R::c(6.0) + two * wob),
                },
                gradient_swap: NamedBound {
                    tau: one - one.min(alpha) * gamma / two,
                    c: c3,
                },
                lower_order: NamedBound {
                    tau: R::zero(),
                    c: consts.c_h * (two.powf(one + alpha) + one),
                },
            }
        }
        RegimeParams::LipLarge { tau, gamma, omega0, eps, c_gamma_r } => {
            require(alpha > two, "large-alpha Lipschitz regime needs alpha > 2")?;
            require(
                tau > R::zero() && tau < alpha.recip().min(gf),
                "tau must lie in (0, min(1/alpha, gamma_f))",
            )?;
            require(gamma > tau * alpha && gamma < one, "gamma must lie in (tau alpha, 1)")?;
            let eps_cap = ((gamma / two - tau) / (alpha - two)).min((gf - tau) / (alpha - two));
            require(
                eps > tau / two && eps < eps_cap,
                "eps must lie in (tau/2, min((gamma/2 - tau)/(alpha - 2), (gamma_f - tau)/(alpha - 2)))",
            )?;
            require(omega0 * (one + tau) < one, "omega0 (1 + tau) must be below 1")?;
            let wob = omega0 * tau * (one + tau);
            RegimeBounds {
                regime: Regime::LipLargeAlpha,
                tau_hat: (two - alpha) * eps + one - tau,
                c_main: wob / R::c(8.0),
                extra_eigs: NamedBound { tau: R::zero(), c: R::c(6.0) },
                x_dependence: NamedBound {
                    tau: one - gf,
                    c: consts.c_gamma_f * (R::c(6.0) + two * wob),
                },
                gradient_swap: NamedBound {
                    tau: one - gamma / two,
                    c: two * c_gamma_r * two.powf(alpha - one),
                },
                lower_order: NamedBound {
                    tau: R::zero(),
                    c: two.powf(two + alpha) * consts.c_h,
                },
            }
        }
    };
    bounds.check_ordering()?;
    Ok(bounds)
}

/// Small-radius threshold for the large-alpha Hölder regime.
pub fn holder_delta_cap<R: Real>(n: usize, gamma: R, eps: R) -> R {
    let nn = R::c(n as f64);
    let two = R::c(2.0);
    (((R::one() - gamma).ln() - (two * nn * (R::c(4.0) - gamma)).ln()) / (two * eps)).exp()
}

/// Small-radius threshold for the large-alpha Lipschitz regime.
pub fn lip_delta_cap<R: Real>(n: usize, tau: R, omega0: R, eps: R) -> R {
    let nn = R::c(n as f64);
    let one = R::one();
    let two = R::c(2.0);
    let wob = omega0 * tau * (one + tau);
    let first = ((omega0 * (one + tau) * tau).ln() - (two * nn * (one + wob)).ln())
        / (two * eps - tau);
    let second = -(two * omega0 * (one + tau)).ln() / tau;
    first.exp().min(second.exp())
}

/// Inputs the certificate is built from.
#[derive(Clone, Copy, Debug)]
pub struct CertInputs<R> {
    pub alpha: R,
    pub lam_min: R,
    pub lam_max: R,
    pub n: usize,
    pub gamma_f: R,
    pub c_gamma_f: R,
    pub c_f: R,
    pub c_h: R,
    /// Interior radius the modulus is certified on (0 < r < 1).
    pub r: R,
    pub sup_u: R,
    pub sup_v: R,
}

/// The executable certificate: the Lipschitz-pass constants plus the
/// Hölder-pass constant they depend on.
#[derive(Clone, Debug)]
pub struct Certificate<R> {
    pub regime: Regime,
    pub bounds: RegimeBounds<R>,
    /// Hölder-pass exponent (the gamma feeding the Lipschitz pass).
    pub gamma: R,
    pub tau: R,
    pub omega0: R,
    /// Dominant-axis exponent; zero in the small-alpha regimes.
    pub eps: R,
    /// Hölder-pass modulus constant on the intermediate ball.
    pub c_gamma_r: R,
    /// Hölder-pass admissible radius.
    pub delta_holder: R,
    /// Admissible doubling radius of the Lipschitz pass.
    pub delta: R,
    /// Doubling weight.
    pub m_weight: R,
    /// Resulting modulus constant: u(x) - v(y) <= sup(u - v) + modulus * omega(|x-y|).
    pub modulus: R,
    pub inputs: CertInputs<R>,
}

fn bisect_delta<R: Real>(bounds: &RegimeBounds<R>, lam_min: R, lam_max: R, cap: R) -> Result<R> {
    // Left side is increasing in d and vanishes at 0+; aim at 98% of the
    // budget so the re-verified margin stays at or above 1%.
    let target = lam_min * bounds.c_main / R::c(2.0) * R::c(0.98);
    if !(target > R::zero()) {
        return Err(Error::Infeasible("radius budget is not positive".into()));
    }
    if bounds.delta_lhs(cap, lam_max) < target {
        return Ok(cap);
    }
    let mut lo = R::c(1e-300).max(R::min_positive_value());
    if bounds.delta_lhs(lo, lam_max) >= target {
        return Err(Error::Infeasible(
            "radius-smallness inequality fails at the smallest representable radius".into(),
        ));
    }
    let mut hi = cap;
    for _ in 0..200 {
        // geometric midpoint in log space; lo * hi underflows for the
        // astronomically small radii some constant systems produce
        let mid = ((lo.ln() + hi.ln()) / R::c(2.0)).exp();
        if !(mid > lo && mid < hi) {
            break;
        }
        if bounds.delta_lhs(mid, lam_max) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= hi * R::tol_floor(1e-9) {
            break;
        }
    }
    Ok(lo)
}

fn midpoint<R: Real>(lo: R, hi: R) -> R {
    (lo + hi) / R::c(2.0)
}

/// Builds the two-pass certificate: a Hölder pass at the intermediate
/// radius fixes the constant the Lipschitz-pass gradient-swap bound needs,
/// then the Lipschitz pass maximizes its admissible radius and picks the
/// smallest workable doubling weight.
pub fn certificate<R: Real>(inp: CertInputs<R>) -> Result<Certificate<R>> {
    let one = R::one();
    let two = R::c(2.0);
    if !(inp.r > R::zero() && inp.r < one) {
        return Err(Error::InvalidInput(format!("r = {} outside (0, 1)", inp.r)));
    }
    if !(inp.lam_min > R::zero() && inp.lam_min <= inp.lam_max) {
        return Err(Error::InvalidInput("ellipticity bounds out of order".into()));
    }
    if inp.sup_u < R::zero() || inp.sup_v < R::zero() {
        return Err(Error::InvalidInput("sup norms must be nonnegative".into()));
    }
    let consts = ProofConsts {
        n: inp.n,
        gamma_f: inp.gamma_f,
        c_gamma_f: inp.c_gamma_f,
        c_f: inp.c_f,
        c_h: inp.c_h,
    };
    let sups = inp.sup_u + inp.sup_v;
    let pad = R::c(tol::STRICT_PAD);

    // Hölder pass on the intermediate ball of radius (1 + r) / 2.
    let gamma = R::c(0.5);
    let r_mid = (one + inp.r) / two;
    let (h_params, h_cap) = if inp.alpha <= two {
        (RegimeParams::HolderSmall { gamma }, R::c(0.999))
    } else {
        let eps_h = midpoint(R::zero(), (inp.gamma_f / two).min((one - gamma) / two));
        (
            RegimeParams::HolderLarge { gamma, eps: eps_h },
            holder_delta_cap(inp.n, gamma, eps_h).min(R::c(0.999)),
        )
    };
    let h_bounds = regime_constants(inp.alpha, h_params, &consts)?;
    let delta_holder = bisect_delta(&h_bounds, inp.lam_min, inp.lam_max, h_cap)?;
    let omega_h = delta_holder.powf(gamma);
    let m_holder = pad
        * one
            .max(R::c(4.0) * sups / ((one - r_mid) * (one - r_mid)))
            .max(two * sups / omega_h);
    let c_gamma_r = m_holder;

    // Lipschitz pass at radius r.
    let (tau, gamma_lip, eps, regime) = if inp.alpha <= two {
        let tau = midpoint(R::zero(), inp.gamma_f.min(R::c(0.5)).min(inp.alpha / two));
        let gamma_lip = midpoint(two * tau / one.min(inp.alpha), one);
        (tau, gamma_lip, R::zero(), Regime::LipSmallAlpha)
    } else {
        // tau is kept below 2 gamma_f / alpha as well, so the eps interval
        // stays nonempty for every admissible gamma_f.
        let tau_cap = inp
            .alpha
            .recip()
            .min(inp.gamma_f)
            .min(two * inp.gamma_f / inp.alpha);
        let tau = midpoint(R::zero(), tau_cap);
        let gamma_lip = midpoint(tau * inp.alpha, one);
        let eps_cap = ((gamma_lip / two - tau) / (inp.alpha - two))
            .min((inp.gamma_f - tau) / (inp.alpha - two));
        let eps = midpoint(tau / two, eps_cap);
        (tau, gamma_lip, eps, Regime::LipLargeAlpha)
    };
    let omega0 = (two * (one + tau)).recip();
    let params = match regime {
        Regime::LipSmallAlpha => RegimeParams::LipSmall { tau, gamma: gamma_lip, omega0, c_gamma_r },
        Regime::LipLargeAlpha => RegimeParams::LipLarge { tau, gamma: gamma_lip, omega0, eps, c_gamma_r },
        _ => unreachable!(),
    };
    let bounds = regime_constants(inp.alpha, params, &consts)?;

    // Radius caps: profile slope in [1/2, 1), doubled-gradient pinning, and
    // the large-alpha smallness threshold.
    let profile = RadialProfile::lip(tau, omega0)?;
    let cap_slope = profile.half_slope_sup() * R::c(0.999);
    let cap_pin = (R::c(16.0) * c_gamma_r).recip().powf(gamma_lip.recip()) * R::c(0.999);
    let mut cap = cap_slope.min(cap_pin).min(R::c(0.999));
    if regime == Regime::LipLargeAlpha {
        cap = cap.min(lip_delta_cap(inp.n, tau, omega0, eps) * R::c(0.999));
    }
    let delta = bisect_delta(&bounds, inp.lam_min, inp.lam_max, cap)?;

    let m_weight = pad
        * one
            .max(two * sups * (one + tau) / (delta * tau))
            .max(R::c(8.0) * sups / ((one - inp.r) * (one - inp.r)));

    let cert = Certificate {
        regime,
        bounds,
        gamma,
        tau,
        omega0,
        eps,
        c_gamma_r,
        delta_holder,
        delta,
        m_weight,
        modulus: m_weight,
        inputs: inp,
    };
    cert.verify()?;
    Ok(cert)
}

impl<R: Real> Certificate<R> {
    /// The Lipschitz-pass comparison profile.
    pub fn profile(&self) -> Result<RadialProfile<R>> {
        RadialProfile::lip(self.tau, self.omega0)
    }

    /// Re-verifies every inequality of the certificate.
    pub fn verify(&self) -> Result<()> {
        let one = R::one();
        let two = R::c(2.0);
        self.bounds.check_ordering()?;
        let budget = self.inputs.lam_min * self.bounds.c_main / two;
        let lhs = self.bounds.delta_lhs(self.delta, self.inputs.lam_max);
        if !(lhs <= budget * R::c(0.99)) {
            return Err(Error::Precondition(format!(
                "radius-smallness inequality lacks a 1% margin: lhs {lhs} vs budget {budget}"
            )));
        }
        // slope window of the profile below delta
        if !(self.omega0 * (one + self.tau) * self.delta.powf(self.tau) < R::c(0.5)) {
            return Err(Error::Precondition("profile slope window fails at delta".into()));
        }
        // doubled-gradient pinning
        if !((self.c_gamma_r * self.delta.powf(self.gamma_lip())).sqrt() < R::c(0.25)) {
            return Err(Error::Precondition("gradient pinning cap fails at delta".into()));
        }
        if self.regime == Regime::LipLargeAlpha {
            let cap = lip_delta_cap(self.inputs.n, self.tau, self.omega0, self.eps);
            if !(self.delta < cap) {
                return Err(Error::Precondition("delta exceeds the smallness threshold".into()));
            }
        }
        // weight constraints
        let sups = self.inputs.sup_u + self.inputs.sup_v;
        let m = self.m_weight;
        if !(m > one) {
            return Err(Error::Precondition("doubling weight must exceed 1".into()));
        }
        if !(m * self.delta * self.tau / (one + self.tau) > two * sups) {
            return Err(Error::Precondition("doubling weight fails the radius constraint".into()));
        }
        let half_gap = (one - self.inputs.r) / two;
        if !(m * half_gap * half_gap > two * sups) {
            return Err(Error::Precondition("doubling weight fails the localization constraint".into()));
        }
        Ok(())
    }

    /// The gamma used by the Lipschitz-pass gradient-swap bound.
    fn gamma_lip(&self) -> R {
        match self.regime {
            Regime::LipSmallAlpha => {
                // reconstruct from tau: gradient_swap tau = 1 - min(1, alpha) gamma / 2
                (one_minus(self.bounds.gradient_swap.tau)) * R::c(2.0)
                    / R::one().min(self.inputs.alpha)
            }
            _ => (one_minus(self.bounds.gradient_swap.tau)) * R::c(2.0),
        }
    }

    /// Key-value serialization.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        s.push_str("[certificate]\n");
        s.push_str(&format!("regime={}\n", self.regime.name()));
        s.push_str(&format!("tau_hat={}\n", self.bounds.tau_hat));
        s.push_str(&format!("c={}\n", self.bounds.c_main));
        for (name, b) in self.bounds.named() {
            s.push_str(&format!("{name}.tau={}\n{name}.c={}\n", b.tau, b.c));
        }
        s.push_str(&format!("gamma={}\n", self.gamma));
        s.push_str(&format!("tau={}\n", self.tau));
        s.push_str(&format!("omega0={}\n", self.omega0));
        s.push_str(&format!("eps={}\n", self.eps));
        s.push_str(&format!("c_gamma_r={}\n", self.c_gamma_r));
        s.push_str(&format!("delta_holder={}\n", self.delta_holder));
        s.push_str(&format!("delta={}\n", self.delta));
        s.push_str(&format!("M={}\n", self.m_weight));
        s.push_str(&format!("modulus={}\n", self.modulus));
        s
    }

    pub fn csv_header() -> &'static str {
        "regime,tau_hat,c,delta,M,modulus"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.regime.name(),
            self.bounds.tau_hat,
            self.bounds.c_main,
            self.delta,
            self.m_weight,
            self.modulus
        )
    }
}

fn one_minus<R: Real>(v: R) -> R {
    R::one() - v
}
