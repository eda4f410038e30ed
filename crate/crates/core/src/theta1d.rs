//! One-dimensional rescaled theta function kernel.
//!
//! Evaluates
//!
//! ```text
//! theta~(z | omega) = sum_{n in Z} exp(-n^2 omega / 2 + n z),    omega > 0,
//! ```
//!
//! together with its first two logarithmic derivatives in `z`, via recursive
//! partial summation. The series is a real-exponential rewrite of the usual
//! trigonometric one (nome `q = exp(-omega/2)`, hyperbolic summands), so all
//! arithmetic stays real:
//!
//! ```text
//! v_n  = 2 q^{n^2} cosh(n z)          (value summands,     S = 1 + sum v_n)
//! w_n  = 2 n q^{n^2} sinh(n z)        (first derivative,   U = sum w_n)
//! xi_n = 2 n^2 q^{n^2} cosh(n z)      (second derivative,  V = sum xi_n)
//! ```
//!
//! For `omega >= OMEGA_BOUNDED` the remainder after summing `n < B` is bounded
//! by `3 q^{(B-1)^2}` for all three series (with the derivative series read in
//! the trigonometric normalization), so the truncation order comes from
//! [`bound_b`]. Below the threshold the kernel falls back to adaptive
//! summation. Arguments are first folded into `|z| <= omega/2` using the
//! quasi-periodicity `theta~(z + omega) = exp(z + omega/2) theta~(z)`, which
//! keeps every summand bounded by 2 and makes the truncation bounds apply.

use crate::error::{Error, Result};

/// Omega threshold above which the `3 q^{(B-1)^2}` remainder bound is certified
/// for the value and both derivative series (2 * pi * 0.882).
pub const OMEGA_BOUNDED: f64 = 5.541769440932395;

/// Adaptive summation gives up past this many terms.
const MAX_ADAPTIVE_TERMS: usize = 200_000;

/// Arguments to the scalar kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaArgs {
    /// Real argument z.
    pub z: f64,
    /// Quadratic-form coefficient, must be positive.
    pub omega: f64,
    /// Absolute target precision on the raw (reduced-argument) values, in (0, 1).
    pub eps: f64,
}

impl ThetaArgs {
    pub fn new(z: f64, omega: f64, eps: f64) -> Result<Self> {
        let args = Self { z, omega, eps };
        args.validate()?;
        Ok(args)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.z.is_finite() || !self.omega.is_finite() || !self.eps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite theta argument: z={}, omega={}, eps={}",
                self.z, self.omega, self.eps
            )));
        }
        if self.omega <= 0.0 {
            return Err(Error::Domain(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Log-space evaluation of the scalar theta function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEval {
    /// log theta~(z | omega)
    pub log_value: f64,
    /// d/dz log theta~
    pub dlog: f64,
    /// d^2/dz^2 log theta~
    pub d2log: f64,
}

/// Result of folding an argument into the fundamental strip `|z_r| <= omega/2`.
///
/// The original argument satisfies `z = sign * (z_r + k * omega)` and
/// `theta~(|z|) = exp(log_prefactor) * theta~(z_r)` with
/// `log_prefactor = k z_r + k^2 omega / 2`. Log-derivatives shift as
/// `dlog(z) = sign * (k + dlog(z_r))` and `d2log(z) = d2log(z_r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArgReduction {
    pub z_r: f64,
    pub k: i64,
    pub log_prefactor: f64,
    pub sign: f64,
}

/// Folds `z` into `|z_r| <= omega/2` using parity and quasi-periodicity.
pub fn reduce_argument(z: f64, omega: f64) -> ArgReduction {
    let sign = if z < 0.0 { -1.0 } else { 1.0 };
    let a = z.abs();
    let k = (a / omega).round() as i64;
    let kf = k as f64;
    let z_r = a - kf * omega;
    ArgReduction {
        z_r,
        k,
        log_prefactor: kf * z_r + kf * kf * omega / 2.0,
        sign,
    }
}

/// Smallest `B >= 1` with `3 q^{(B-1)^2} <= eps`, `q = exp(-omega/2)`.
///
/// Summing the `B - 1` terms `0 < n < B` then leaves remainders at most `eps`
/// on the value and on both derivatives (trigonometric normalization) whenever
/// `omega >= OMEGA_BOUNDED` and the argument lies in the fundamental strip.
pub fn bound_b(eps: f64, omega: f64) -> usize {
    let bound = |m: f64| 3.0 * (-omega / 2.0 * m * m).exp();
    // 3 q^0 = 3 > eps for every eps < 1, so B >= 2.
    let mut m = (2.0 * (3.0 / eps).ln() / omega).sqrt().ceil().max(1.0);
    while bound(m) > eps {
        m += 1.0;
    }
    while m > 1.0 && bound(m - 1.0) <= eps {
        m -= 1.0;
    }
    m as usize + 1
}

/// Coupled three-term recurrences over the summand triples `(v_n, w_n, xi_n)`.
///
/// Freshly constructed state sits at `n = 1`; each [`step`](Self::step)
/// advances all three sequences by one index. The `w` and `xi` relations carry
/// `1/(n-1)` factors, so the `n = 1 -> 2` step installs explicitly computed
/// values and the recurrences proper run from `n = 2` on.
#[derive(Debug, Clone)]
pub struct ThetaRecurrence {
    n: usize,
    v: (f64, f64),
    w: (f64, f64),
    xi: (f64, f64),
    /// Explicit (w_2, xi_2), consumed by the first step.
    second: (f64, f64),
    /// g_n = 2 cosh(z) q^{2n+1} for the current n.
    g: f64,
    /// p_n = q^{2n} for the current n.
    p: f64,
    /// q^2
    q2: f64,
}

impl ThetaRecurrence {
    /// Seeds the recurrence state for the reduced argument `z` (`|z| <= omega/2`).
    pub fn new(z: f64, omega: f64) -> Self {
        // For very large omega the nome underflows while cosh overflows, so the
        // seeds are assembled from paired exponentials with non-positive
        // exponents in that regime.
        let (v1, w1, x1, w2, x2, g1) = if omega <= 1200.0 {
            let q = (-omega / 2.0).exp();
            let (sh, ch) = (z.sinh(), z.cosh());
            let q4 = q.powi(4);
            let ch2 = 2.0 * ch * ch - 1.0;
            let sh2 = 2.0 * sh * ch;
            (
                2.0 * q * ch,
                2.0 * q * sh,
                2.0 * q * ch,
                4.0 * q4 * sh2,
                8.0 * q4 * ch2,
                2.0 * ch * q.powi(3),
            )
        } else {
            let e = |t: f64| t.exp();
            let v1 = e(-omega / 2.0 + z) + e(-omega / 2.0 - z);
            let w1 = e(-omega / 2.0 + z) - e(-omega / 2.0 - z);
            let w2 = 2.0 * (e(-2.0 * omega + 2.0 * z) - e(-2.0 * omega - 2.0 * z));
            let x2 = 4.0 * (e(-2.0 * omega + 2.0 * z) + e(-2.0 * omega - 2.0 * z));
            let g1 = e(-1.5 * omega + z) + e(-1.5 * omega - z);
            (v1, w1, v1, w2, x2, g1)
        };
        Self {
            n: 1,
            v: (2.0, v1),
            w: (0.0, w1),
            xi: (0.0, x1),
            second: (w2, x2),
            g: g1,
            p: (-omega).exp(),
            q2: (-omega).exp(),
        }
    }

    /// Index of the newest computed summand.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn v(&self) -> f64 {
        self.v.1
    }

    pub fn w(&self) -> f64 {
        self.w.1
    }

    pub fn xi(&self) -> f64 {
        self.xi.1
    }

    /// Advances the summand triple from index `n` to `n + 1`.
    pub fn step(&mut self) {
        let q4n = self.p * self.p;
        let v_next = self.g * self.v.1 - q4n * self.v.0;
        let (w_next, xi_next) = if self.n == 1 {
            self.second
        } else {
            let nf = self.n as f64;
            let nm1 = nf - 1.0;
            let np1 = nf + 1.0;
            let w_next = np1 * (self.g / nf * self.w.1 - q4n / nm1 * self.w.0);
            let xi_next =
                np1 * np1 * (self.g / (nf * nf) * self.xi.1 - q4n / (nm1 * nm1) * self.xi.0);
            (w_next, xi_next)
        };
        self.v = (self.v.1, v_next);
        self.w = (self.w.1, w_next);
        self.xi = (self.xi.1, xi_next);
        self.g *= self.q2;
        self.p *= self.q2;
        self.n += 1;
    }
}

/// Sums `S = 1 + v_1 + ... + v_{B-1}` and the matching `U`, `V` partial sums.
fn sum_fixed(z: f64, omega: f64, b: usize) -> (f64, f64, f64) {
    let (mut s, mut u, mut v) = (1.0, 0.0, 0.0);
    if b < 2 {
        return (s, u, v);
    }
    let mut rec = ThetaRecurrence::new(z, omega);
    loop {
        s += rec.v();
        u += rec.w();
        v += rec.xi();
        if rec.n() + 1 >= b {
            break;
        }
        rec.step();
    }
    (s, u, v)
}

/// Adaptive summation for omega below [`OMEGA_BOUNDED`]: terms are added until
/// three consecutive summand triples fall below `eps` relative to the running
/// value sum, then two further safety terms are taken.
fn sum_adaptive(z: f64, omega: f64, eps: f64) -> Result<(f64, f64, f64)> {
    let (mut s, mut u, mut v) = (1.0, 0.0, 0.0);
    let mut rec = ThetaRecurrence::new(z, omega);
    let mut consecutive_small = 0usize;
    let mut extra = 0usize;
    loop {
        s += rec.v();
        u += rec.w();
        v += rec.xi();
        let tol = eps * s;
        let small = rec.v().abs() < tol && rec.w().abs() < tol && rec.xi().abs() < tol;
        if consecutive_small >= 3 {
            extra += 1;
            if extra >= 2 {
                return Ok((s, u, v));
            }
        } else if small {
            consecutive_small += 1;
        } else {
            consecutive_small = 0;
        }
        if rec.n() >= MAX_ADAPTIVE_TERMS {
            return Err(Error::Domain(format!(
                "theta series did not converge within {MAX_ADAPTIVE_TERMS} terms \
                 (omega = {omega}, eps = {eps})"
            )));
        }
        rec.step();
    }
}

/// Evaluates `log theta~`, `d/dz log theta~` and `d^2/dz^2 log theta~`.
///
/// Absolute error on the raw values at the reduced argument is at most
/// `args.eps`.
pub fn theta_tilde(args: ThetaArgs) -> Result<ThetaEval> {
    args.validate()?;
    let red = reduce_argument(args.z, args.omega);
    let (s, u, v) = if args.omega >= OMEGA_BOUNDED {
        sum_fixed(red.z_r, args.omega, bound_b(args.eps, args.omega))
    } else {
        sum_adaptive(red.z_r, args.omega, args.eps)?
    };
    let dlog_r = u / s;
    let d2log_r = v / s - dlog_r * dlog_r;
    let eval = ThetaEval {
        log_value: red.log_prefactor + s.ln(),
        dlog: red.sign * (red.k as f64 + dlog_r),
        d2log: d2log_r,
    };
    if !eval.log_value.is_finite() || !eval.dlog.is_finite() || !eval.d2log.is_finite() {
        return Err(Error::Domain(format!(
            "theta evaluation overflowed for z={}, omega={}",
            args.z, args.omega
        )));
    }
    Ok(eval)
}

/// Raw partial sums `(S_B, U_B, V_B)` over `0 < n < B` at the given argument,
/// without argument reduction. Exposed for truncation-bound checks; `z` should
/// already lie in the fundamental strip.
pub fn partial_sums(z: f64, omega: f64, b: usize) -> (f64, f64, f64) {
    sum_fixed(z, omega, b)
}
