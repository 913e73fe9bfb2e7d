//! Lambert W, the penalty and splitting functions, and the closed-form
//! robustness/consistency curves.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Residual target for [`lambert_w`], relative to `max(1, |z|)`.
pub const LAMBERT_TOL: f64 = 1e-13;
/// Slack accepted on the unit interval before a domain error.
pub const DOMAIN_SLACK: f64 = 1e-12;

const BRANCH_POINT: f64 = -1.0 / E;

/// Principal branch of the Lambert W function, `W(z) e^W(z) = z`, `W >= -1`.
///
/// Arguments in `[-1/e - 1e-12, -1/e]` are treated as the branch point.
pub fn lambert_w(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::Domain("lambert_w of NaN".into()));
    }
    if z < BRANCH_POINT - DOMAIN_SLACK {
        return Err(Error::Domain(format!("lambert_w({z}) is below -1/e")));
    }
    if z <= BRANCH_POINT {
        return Ok(-1.0);
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let mut w = if z < -0.25 {
        let p = (2.0 * (E * z + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if z < 3.0 {
        z.ln_1p() * (1.0 - z.ln_1p() / (2.0 + z.ln_1p()))
    } else {
        let l1 = z.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    let tol = LAMBERT_TOL * z.abs().max(1.0);
    for _ in 0..40 {
        let ew = w.exp();
        let resid = w * ew - z;
        if resid == 0.0 {
            break;
        }
        // Once within tolerance, one more step polishes the last digits.
        let close = resid.abs() <= tol;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let step = resid / (ew * wp1 - (w + 2.0) * resid / (2.0 * wp1));
        if !step.is_finite() {
            break;
        }
        w -= step;
        if close || step.abs() <= 1e-16 * w.abs().max(1e-300) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

fn check_unit(name: &str, v: f64) -> Result<f64> {
    if !(v >= -DOMAIN_SLACK && v <= 1.0 + DOMAIN_SLACK) {
        return Err(Error::Domain(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Where a point `(A, X)` lies in the unit square for a given lambda.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// `f = f0(X - A)`.
    L,
    /// Below the knee, behind the advice: `f = f1(X)`.
    BR,
    /// `f = f1(X)`.
    TR,
}

/// The LAB penalty family for a fixed lambda.
#[derive(Clone, Copy, Debug)]
pub struct Penalty {
    lambda: f64,
    e_lm1: f64,
    knee: f64,
    f1_zero: f64,
}

impl Penalty {
    pub fn new(lambda: f64) -> Result<Self> {
        let lambda = check_unit("lambda", lambda)?;
        let e_lm1 = (lambda - 1.0).exp();
        Ok(Self { lambda, e_lm1, knee: lambda * (1.0 - lambda).exp(), f1_zero: e_lm1 - lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `lambda e^{1 - lambda}`: where the two pieces of `f1` meet.
    pub fn knee(&self) -> f64 {
        self.knee
    }

    /// `min(e^{z + lambda - 1}, 1)`.
    pub fn f0(&self, z: f64) -> f64 {
        (z + self.lambda - 1.0).exp().min(1.0)
    }

    /// The penalty once the advice has been overtaken. Input clamped to [0, 1].
    pub fn f1(&self, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        if z >= 1.0 {
            1.0
        } else if z < self.knee {
            self.f1_zero / (1.0 - z)
        } else {
            // -lambda / W(x) rewritten as e^{W(x) + z + lambda - 1} so that
            // lambda = 0 needs no special case.
            let x = -self.lambda * (1.0 - self.lambda - z).exp();
            let w = lambert_w(x).unwrap_or(-1.0);
            (w + z + self.lambda - 1.0).exp().min(1.0)
        }
    }

    pub fn try_f0(&self, z: f64) -> Result<f64> {
        Ok(self.f0(check_unit("z", z)?))
    }

    pub fn try_f1(&self, z: f64) -> Result<f64> {
        Ok(self.f1(check_unit("z", z)?))
    }

    /// The two-argument penalty `f(A, X)`. Inputs clamped to [0, 1].
    pub fn f(&self, a: f64, x: f64) -> f64 {
        let f1 = self.f1(x);
        if a > x {
            f1
        } else {
            self.f0(x - a).max(f1)
        }
    }

    pub fn try_f(&self, a: f64, x: f64) -> Result<f64> {
        Ok(self.f(check_unit("A", a)?, check_unit("X", x)?))
    }

    /// `X` on the boundary between L and TR for a given `A`.
    fn l_boundary(&self, a: f64) -> f64 {
        if a <= 0.0 {
            f64::INFINITY
        } else if self.lambda <= 0.0 {
            f64::NEG_INFINITY
        } else {
            a - a.ln() + 1.0 - self.lambda + self.lambda.ln()
        }
    }

    pub fn classify_region(&self, a: f64, x: f64) -> Region {
        if a <= x && x < self.l_boundary(a) {
            Region::L
        } else if x < a && x < self.knee {
            Region::BR
        } else {
            Region::TR
        }
    }

    /// Smallest `X >= 0` with `f1(X) >= phi`.
    pub fn f1_inverse(&self, phi: f64) -> f64 {
        if phi <= self.f1_zero {
            0.0
        } else if phi >= 1.0 {
            1.0
        } else if phi < self.e_lm1 {
            (1.0 - self.f1_zero / phi).clamp(0.0, 1.0)
        } else {
            (1.0 - self.lambda + phi.ln() + self.lambda / phi).clamp(self.knee, 1.0)
        }
    }

    /// Closed-form version of [`Penalty::invert_level`].
    pub fn invert_level_closed(&self, w: f64, a: f64, x0: f64, level: f64) -> f64 {
        let room = (1.0 - x0).max(0.0);
        if w <= 0.0 || level >= w {
            return 0.0;
        }
        let phi = (1.0 - level.max(0.0) / w).min(1.0);
        let via_f1 = self.f1_inverse(phi);
        let via_f0 = a + (1.0 - self.lambda + phi.ln()).max(0.0);
        (via_f1.min(via_f0) - x0).clamp(0.0, room)
    }

    /// Smallest `z` in `[0, 1 - X0]` with `w (1 - f(A, X0 + z)) <= level`,
    /// by bisection to 1e-12.
    pub fn invert_level(&self, w: f64, a: f64, x0: f64, level: f64) -> f64 {
        let room = (1.0 - x0).max(0.0);
        let potential = |z: f64| w * (1.0 - self.f(a, x0 + z));
        if potential(0.0) <= level {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, room);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if potential(mid) <= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Bisection inversion with full domain checks.
pub fn invert_level_lab(w: f64, a: f64, x0: f64, level: f64, p: &Penalty) -> Result<f64> {
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::Domain(format!("weight {w} must be finite and >= 0")));
    }
    if !(level >= 0.0) {
        return Err(Error::Domain(format!("level {level} must be >= 0")));
    }
    let a = check_unit("A", a)?;
    let x0 = check_unit("X", x0)?;
    Ok(p.invert_level(w, a, x0, level))
}

/// Which PAW splitting function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitKind {
    Robust,
    Consistent,
}

/// The PAW splitting functions `g_r`, `g_c` and their antiderivatives.
#[derive(Clone, Copy, Debug)]
pub struct Splitting {
    lambda: f64,
    e_lm1: f64,
}

impl Splitting {
    pub fn new(lambda: f64) -> Result<Self> {
        let lambda = check_unit("lambda", lambda)?;
        Ok(Self { lambda, e_lm1: (lambda - 1.0).exp() })
    }

    pub fn g(&self, kind: SplitKind, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        if z >= self.lambda {
            return (z - 1.0).exp();
        }
        match kind {
            SplitKind::Robust => self.e_lm1 * (z + 1.0 - self.lambda),
            SplitKind::Consistent => self.e_lm1,
        }
    }

    pub fn g_r(&self, z: f64) -> f64 {
        self.g(SplitKind::Robust, z)
    }

    pub fn g_c(&self, z: f64) -> f64 {
        self.g(SplitKind::Consistent, z)
    }

    /// `int_0^z g`.
    pub fn antiderivative(&self, kind: SplitKind, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        let low = |t: f64| match kind {
            SplitKind::Robust => self.e_lm1 * (0.5 * t * t + (1.0 - self.lambda) * t),
            SplitKind::Consistent => self.e_lm1 * t,
        };
        if z <= self.lambda {
            low(z)
        } else {
            low(self.lambda) + (z - 1.0).exp() - self.e_lm1
        }
    }

    /// `int_a^b g`.
    pub fn integral(&self, kind: SplitKind, a: f64, b: f64) -> f64 {
        self.antiderivative(kind, b) - self.antiderivative(kind, a)
    }
}

/// Robustness of LAB.
pub fn r_lab(lambda: f64) -> f64 {
    if lambda >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - lambda;
    // e^{-d} - 1 + d and 1 - (1 - d) e^d lose everything to cancellation as
    // d -> 0, so switch to their series there.
    let (gap, one_minus_knee) = if d < 1e-2 {
        let (mut a, mut b, mut term) = (0.0, 0.0, d);
        for k in 2..=12 {
            term *= d / k as f64;
            a += if k % 2 == 0 { term } else { -term };
            b += (k - 1) as f64 * term;
        }
        (a, b)
    } else {
        ((-d).exp_m1() + d, 1.0 - lambda * d.exp())
    };
    -(-d).exp_m1() - gap * one_minus_knee.ln() - lambda * d
}

/// Consistency of LAB.
pub fn c_lab(lambda: f64) -> f64 {
    1.0 + lambda - (lambda - 1.0).exp()
}

/// Robustness of PAW.
pub fn r_paw(lambda: f64) -> f64 {
    1.0 - (1.0 - lambda + 0.5 * lambda * lambda) * (lambda - 1.0).exp()
}

/// Consistency of PAW.
pub fn c_paw(lambda: f64) -> f64 {
    1.0 - (1.0 - lambda) * (lambda - 1.0).exp()
}

/// The PAW lambda whose consistency equals LAB's at `lambda_lab`.
pub fn map_lambda_equal_consistency(lambda_lab: f64) -> Result<f64> {
    let l = check_unit("lambda", lambda_lab)?;
    Ok((1.0 + lambert_w(l - (l - 1.0).exp())?).clamp(0.0, 1.0))
}

/// Inverse of [`c_lab`] on `[1 - 1/e, 1]`.
pub fn lambda_lab_for_consistency(c: f64) -> Result<f64> {
    let lo = 1.0 - 1.0 / E;
    if !(c >= lo - DOMAIN_SLACK && c <= 1.0 + DOMAIN_SLACK) {
        return Err(Error::Domain(format!("consistency {c} outside [1 - 1/e, 1]")));
    }
    let c = c.clamp(lo, 1.0);
    Ok((c - 1.0 - lambert_w(-(c - 2.0).exp())?).clamp(0.0, 1.0))
}

/// Inverse of [`c_paw`] on `[1 - 1/e, 1]`.
pub fn lambda_paw_for_consistency(c: f64) -> Result<f64> {
    map_lambda_equal_consistency(lambda_lab_for_consistency(c)?)
}

/// Evenly spaced points `0, 1/(k-1), ..., 1`.
pub fn unit_grid(k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
    }
}
