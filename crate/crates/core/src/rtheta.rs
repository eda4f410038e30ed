//! N-dimensional rescaled theta function over the integer lattice,
//!
//! ```text
//! theta~(z | Omega) = sum_{n in Z^k} exp(-1/2 n' Omega n + n' z),
//! ```
//!
//! for symmetric positive-definite `Omega`, together with the normalized first
//! and second lattice moments
//!
//! ```text
//! D_i = (grad_i theta~) / theta~,    H_ij = (grad_i grad_j theta~) / theta~.
//! ```
//!
//! The sum is truncated to lattice points inside the ellipsoid
//! `(n - c)' Omega (n - c) <= R^2`, centered at the continuous maximizer
//! `c = Omega^{-1} z`; the radius is chosen so that the Gaussian tail stays
//! below the requested precision relative to the leading term. Enumeration
//! walks the axis-aligned bounding box of the ellipsoid and tests each
//! candidate for membership, which is adequate at the dimensions used here.
//!
//! For diagonal `Omega` the function factorizes into scalar theta functions
//! and [`rt_eval_factorized`] evaluates it through the 1-D kernel instead, in
//! time linear in the dimension.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::theta1d::{theta_tilde, ThetaArgs};

/// Default cap on candidate lattice sites visited per evaluation.
pub const DEFAULT_POINT_BUDGET: usize = 20_000_000;

/// Evaluation of the lattice theta function and its normalized moments.
#[derive(Debug, Clone, PartialEq)]
pub struct RtEval {
    /// log theta~(z | Omega)
    pub log_value: f64,
    /// Normalized gradient D.
    pub grad_norm: DVector<f64>,
    /// Normalized Hessian H (symmetric).
    pub hess_norm: DMatrix<f64>,
}

/// Reusable lattice evaluation state for a fixed `Omega`.
///
/// Construction validates and factorizes `Omega` once; [`eval`](Self::eval)
/// can then be called for many arguments `z`, which is the access pattern of
/// the density code (one `Omega`, one `z` per observation).
#[derive(Debug, Clone)]
pub struct RtLattice {
    dim: usize,
    omega: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// Half-widths of the bounding box per unit radius: sqrt((Omega^{-1})_ii).
    unit_halfwidth: Vec<f64>,
    eps: f64,
    budget: usize,
}

impl RtLattice {
    pub fn new(omega: DMatrix<f64>, eps: f64, budget: usize) -> Result<Self> {
        let dim = omega.nrows();
        if dim == 0 || omega.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "Omega must be square and non-empty, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Omega has non-finite entries".into()));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (omega[(i, j)] - omega[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "Omega is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must lie in (0, 1), got {eps}"
            )));
        }
        let chol = omega
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("Omega is not positive-definite".into()))?;
        let inv = chol.inverse();
        let unit_halfwidth = (0..dim).map(|i| inv[(i, i)].sqrt()).collect();
        Ok(Self {
            dim,
            omega,
            chol,
            unit_halfwidth,
            eps,
            budget,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Squared truncation radius for the centered sum at offset `delta = c - round(c)`.
    ///
    /// `2 ln(1/eps)` alone would bound an absolute Gaussian tail; the shift
    /// term makes the bound relative to the leading summand (whose exponent is
    /// about `-delta' Omega delta / 2`), and the dimension term absorbs the
    /// lattice-shell multiplicity.
    fn radius_sq(&self, shift_term: f64) -> f64 {
        2.0 * (1.0 / self.eps).ln() + shift_term + 2.0 * self.dim as f64 + 9.0
    }

    /// Evaluates log theta~, D and H at `z`.
    pub fn eval(&self, z: &DVector<f64>) -> Result<RtEval> {
        let (sw, swn, swnn, center_dot) = self.weighted_sums(z, false)?;
        let log_value = center_dot + sw.ln();
        let grad_norm = &swn / sw;
        let mut hess_norm = swnn / sw;
        // fill the strict upper triangle from the accumulated lower one
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                hess_norm[(i, j)] = hess_norm[(j, i)];
            }
        }
        if !log_value.is_finite() {
            return Err(Error::Domain(
                "lattice theta evaluation overflowed".into(),
            ));
        }
        Ok(RtEval {
            log_value,
            grad_norm,
            hess_norm,
        })
    }

    /// Enumerates the truncated lattice and returns the points with their
    /// (centered) weights plus the weight total. Used by the sampler.
    pub fn enumerate(&self, z: &DVector<f64>) -> Result<(Vec<(Vec<i64>, f64)>, f64)> {
        let mut points = Vec::new();
        let (sw, _, _, _) = self.weighted_sums_collect(z, Some(&mut points))?;
        Ok((points, sw))
    }

    fn weighted_sums(
        &self,
        z: &DVector<f64>,
        _unused: bool,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>, f64)> {
        self.weighted_sums_collect(z, None)
    }

    /// Core enumeration: returns (sum w, sum w n, sum w n n' (lower), z'c / 2).
    ///
    /// Weights are `w(n) = exp(-1/2 (n-c)' Omega (n-c))`, so the raw summand is
    /// `w(n) * exp(z'c / 2)`.
    fn weighted_sums_collect(
        &self,
        z: &DVector<f64>,
        mut collect: Option<&mut Vec<(Vec<i64>, f64)>>,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>, f64)> {
        let k = self.dim;
        if z.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: z.len(),
            });
        }
        let c = self.chol.solve(z);
        let delta = DVector::from_iterator(k, c.iter().map(|v| v - v.round()));
        let shift_term = (self.omega.clone() * &delta).dot(&delta);
        let r_sq = self.radius_sq(shift_term);
        let r = r_sq.sqrt();

        let mut lo = vec![0i64; k];
        let mut hi = vec![0i64; k];
        let mut count: f64 = 1.0;
        for i in 0..k {
            let half = r * self.unit_halfwidth[i];
            lo[i] = (c[i] - half).ceil() as i64;
            hi[i] = (c[i] + half).floor() as i64;
            if hi[i] < lo[i] {
                // box misses the lattice entirely; keep at least the rounded center
                lo[i] = c[i].round() as i64;
                hi[i] = lo[i];
            }
            count *= (hi[i] - lo[i] + 1) as f64;
        }
        if count > self.budget as f64 {
            return Err(Error::Budget {
                budget: self.budget,
                required: count as usize,
            });
        }

        // When z = 0 the truncation region is symmetric under n -> -n, so the
        // odd moments vanish identically; enumerating one half and mirroring
        // keeps that exactness in floating point.
        let symmetric = z.iter().all(|&v| v == 0.0) && collect.is_none();

        let l = self.chol.l();
        let mut sw = 0.0f64;
        let mut swn = DVector::zeros(k);
        let mut swnn = DMatrix::zeros(k, k);
        let mut y = vec![0.0f64; k];
        let mut n = lo.clone();
        'outer: loop {
            // lexicographic sign of n, for the symmetric half-lattice walk
            let process = if symmetric {
                match n.iter().find(|&&v| v != 0) {
                    None => {
                        // origin: weight 1 (quad form is exactly 0)
                        sw += 1.0;
                        false
                    }
                    Some(&first) => first > 0,
                }
            } else {
                true
            };
            if process {
                for i in 0..k {
                    y[i] = n[i] as f64 - c[i];
                }
                // quad = || L' y ||^2 with the factor applied column-wise
                let mut quad = 0.0;
                for j in 0..k {
                    let mut t = 0.0;
                    for i in j..k {
                        t += l[(i, j)] * y[i];
                    }
                    quad += t * t;
                }
                if quad <= r_sq {
                    let w = (-0.5 * quad).exp();
                    if symmetric {
                        sw += 2.0 * w;
                        for i in 0..k {
                            let ni = n[i] as f64;
                            for j in 0..=i {
                                swnn[(i, j)] += 2.0 * w * ni * n[j] as f64;
                            }
                        }
                    } else {
                        sw += w;
                        for i in 0..k {
                            let ni = n[i] as f64;
                            swn[i] += w * ni;
                            for j in 0..=i {
                                swnn[(i, j)] += w * ni * n[j] as f64;
                            }
                        }
                        if let Some(points) = collect.as_deref_mut() {
                            points.push((n.clone(), w));
                        }
                    }
                }
            }
            // odometer increment
            let mut d = 0;
            loop {
                n[d] += 1;
                if n[d] <= hi[d] {
                    break;
                }
                n[d] = lo[d];
                d += 1;
                if d == k {
                    break 'outer;
                }
            }
        }
        if sw <= 0.0 {
            return Err(Error::Domain(
                "truncated lattice sum vanished; Omega may be ill-conditioned".into(),
            ));
        }
        Ok((sw, swn, swnn, 0.5 * z.dot(&c)))
    }
}

/// One-shot full lattice evaluation with the default point budget.
pub fn rt_eval_full(z: &DVector<f64>, omega: &DMatrix<f64>, eps: f64) -> Result<RtEval> {
    RtLattice::new(omega.clone(), eps, DEFAULT_POINT_BUDGET)?.eval(z)
}

/// Product fast path for diagonal `Omega`: the value is the product of scalar
/// theta functions, `D_j` the scalar log-derivatives, and `H` the induced
/// second-moment matrix (`H_jj = d2log_j + dlog_j^2`, `H_ij = D_i D_j` off the
/// diagonal, since distinct coordinates decouple).
pub fn rt_eval_factorized(
    z: &DVector<f64>,
    omega_diag: &DVector<f64>,
    eps: f64,
) -> Result<RtEval> {
    let k = omega_diag.len();
    if z.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: z.len(),
        });
    }
    let eps1 = (eps / k as f64).max(5e-16);
    let mut log_value = 0.0;
    let mut grad_norm = DVector::zeros(k);
    let mut hess_norm = DMatrix::zeros(k, k);
    for j in 0..k {
        let e = theta_tilde(ThetaArgs::new(z[j], omega_diag[j], eps1)?)?;
        log_value += e.log_value;
        grad_norm[j] = e.dlog;
        hess_norm[(j, j)] = e.d2log + e.dlog * e.dlog;
    }
    for i in 0..k {
        for j in 0..k {
            if i != j {
                hess_norm[(i, j)] = grad_norm[i] * grad_norm[j];
            }
        }
    }
    Ok(RtEval {
        log_value,
        grad_norm,
        hess_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force lattice sum over the full box |n_i| <= range.
    fn brute_force(
        z: &DVector<f64>,
        omega: &DMatrix<f64>,
        range: i64,
    ) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = z.len();
        let mut s = 0.0;
        let mut sn = DVector::zeros(k);
        let mut snn = DMatrix::zeros(k, k);
        let mut n = vec![-range; k];
        'outer: loop {
            let nv = DVector::from_iterator(k, n.iter().map(|&v| v as f64));
            let e = (-0.5 * (omega * &nv).dot(&nv) + nv.dot(z)).exp();
            s += e;
            for i in 0..k {
                sn[i] += e * nv[i];
                for j in 0..k {
                    snn[(i, j)] += e * nv[i] * nv[j];
                }
            }
            let mut d = 0;
            loop {
                n[d] += 1;
                if n[d] <= range {
                    break;
                }
                n[d] = -range;
                d += 1;
                if d == k {
                    break 'outer;
                }
            }
        }
        (s, sn, snn)
    }

    fn random_spd(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> DMatrix<f64> {
        let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        let mut m = &a * a.transpose();
        for i in 0..k {
            m[(i, i)] += scale;
        }
        m
    }

    #[test]
    fn only_origin_survives_for_large_omega() {
        for k in 1..=3 {
            let omega = DMatrix::<f64>::identity(k, k) * 200.0;
            let z = DVector::zeros(k);
            let e = rt_eval_full(&z, &omega, 1e-12).unwrap();
            assert_relative_eq!(e.log_value, 0.0, epsilon = 1e-12);
            assert_eq!(e.grad_norm, DVector::zeros(k));
            assert!(e.hess_norm.amax() < 1e-12);
        }
    }

    #[test]
    fn matches_frozen_two_dim_value() {
        // brute force (|n_i| <= 30) and mpmath agree on 1.2144817193040494
        let omega = DMatrix::from_row_slice(2, 2, &[6.0, 1.0, 1.0, 6.0]);
        let z = DVector::zeros(2);
        let e = rt_eval_full(&z, &omega, 1e-12).unwrap();
        assert_relative_eq!(e.log_value.exp(), 1.2144817193040494, epsilon = 1e-12);
        let (s, _, _) = brute_force(&z, &omega, 10);
        assert_relative_eq!(e.log_value.exp(), s, epsilon = 1e-12);
    }

    #[test]
    fn agrees_with_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let k = rng.random_range(1..=3);
            let scale = rng.random_range(4.0..8.0);
            let omega = random_spd(&mut rng, k, scale);
            let z = DVector::from_fn(k, |_, _| rng.random_range(-3.0..3.0));
            let e = rt_eval_full(&z, &omega, 1e-12).unwrap();
            let (s, sn, snn) = brute_force(&z, &omega, 12);
            assert_relative_eq!(e.log_value, s.ln(), epsilon = 1e-11, max_relative = 1e-11);
            for i in 0..k {
                assert_relative_eq!(e.grad_norm[i], sn[i] / s, epsilon = 1e-10);
                for j in 0..k {
                    assert_relative_eq!(e.hess_norm[(i, j)], snn[(i, j)] / s, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn factorized_equals_scalar_kernel_at_dim_one() {
        let z = DVector::from_vec(vec![0.7]);
        let od = DVector::from_vec(vec![6.5]);
        let e = rt_eval_factorized(&z, &od, 1e-12).unwrap();
        let s = theta_tilde(ThetaArgs::new(0.7, 6.5, 1e-12).unwrap()).unwrap();
        assert_relative_eq!(e.log_value, s.log_value, epsilon = 1e-15);
        assert_relative_eq!(e.grad_norm[0], s.dlog, epsilon = 1e-15);
        assert_relative_eq!(e.hess_norm[(0, 0)], s.d2log + s.dlog * s.dlog, epsilon = 1e-15);
    }

    #[test]
    fn factorized_matches_frozen_diagonal_value() {
        // 2 * log(1 + 2 e^{-3} + 2 e^{-12} + ...) = 2 * log(1.0995864251641936)
        let z = DVector::zeros(2);
        let od = DVector::from_vec(vec![6.0, 6.0]);
        let e = rt_eval_factorized(&z, &od, 1e-13).unwrap();
        assert_relative_eq!(
            e.log_value,
            2.0 * 1.0995864251641936f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn factorization_identity_against_full_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let k = rng.random_range(1..=4);
            let od = DVector::from_fn(k, |_, _| rng.random_range(5.6..12.0));
            let z = DVector::from_fn(k, |_, _| rng.random_range(-4.0..4.0));
            let omega = DMatrix::from_diagonal(&od);
            let full = rt_eval_full(&z, &omega, 1e-12).unwrap();
            let fact = rt_eval_factorized(&z, &od, 1e-12).unwrap();
            assert_relative_eq!(full.log_value, fact.log_value, epsilon = 1e-10);
            for i in 0..k {
                assert_relative_eq!(full.grad_norm[i], fact.grad_norm[i], epsilon = 1e-10);
                for j in 0..k {
                    assert_relative_eq!(
                        full.hess_norm[(i, j)],
                        fact.hess_norm[(i, j)],
                        epsilon = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn diagonal_omega_log_hessian_decouples() {
        // H - D D' is the Hessian of log theta~, which is diagonal for diagonal Omega.
        let od = DVector::from_vec(vec![6.0, 8.0]);
        let z = DVector::from_vec(vec![0.5, -0.2]);
        let e = rt_eval_factorized(&z, &od, 1e-12).unwrap();
        let off = e.hess_norm[(0, 1)] - e.grad_norm[0] * e.grad_norm[1];
        assert!(off.abs() < 1e-14);
    }

    #[test]
    fn moments_match_finite_differences_of_log_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..20 {
            let k = rng.random_range(1..=3);
            let omega = random_spd(&mut rng, k, 6.0);
            let z = DVector::from_fn(k, |_, _| rng.random_range(-2.0..2.0));
            let lat = RtLattice::new(omega.clone(), 1e-13, DEFAULT_POINT_BUDGET).unwrap();
            let e = lat.eval(&z).unwrap();
            let h = 1e-5;
            for i in 0..k {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let fd = (lat.eval(&zp).unwrap().log_value - lat.eval(&zm).unwrap().log_value)
                    / (2.0 * h);
                assert_relative_eq!(e.grad_norm[i], fd, max_relative = 1e-6, epsilon = 1e-8);
                for j in 0..k {
                    let fd2 = (lat.eval(&zp).unwrap().grad_norm[j]
                        - lat.eval(&zm).unwrap().grad_norm[j])
                        / (2.0 * h);
                    let analytic = e.hess_norm[(i, j)] - e.grad_norm[i] * e.grad_norm[j];
                    assert_relative_eq!(analytic, fd2, max_relative = 1e-5, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn evenness_is_exact_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let k = rng.random_range(1..=4);
            let scale = rng.random_range(1.0..8.0);
            let omega = random_spd(&mut rng, k, scale);
            let e = rt_eval_full(&DVector::zeros(k), &omega, 1e-10).unwrap();
            assert_eq!(e.grad_norm, DVector::zeros(k));
        }
    }

    #[test]
    fn tighter_eps_never_shrinks_the_lattice() {
        let omega = DMatrix::from_row_slice(2, 2, &[6.0, 1.5, 1.5, 7.0]);
        let z = DVector::from_vec(vec![0.4, -1.1]);
        let mut last = 0usize;
        for eps in [1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
            let lat = RtLattice::new(omega.clone(), eps, DEFAULT_POINT_BUDGET).unwrap();
            let (points, _) = lat.enumerate(&z).unwrap();
            assert!(points.len() >= last);
            last = points.len();
        }
    }

    #[test]
    fn rejects_bad_omega() {
        let asym = DMatrix::from_row_slice(2, 2, &[6.0, 1.0, 2.0, 6.0]);
        assert!(RtLattice::new(asym, 1e-10, 1000).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(matches!(
            RtLattice::new(indef, 1e-10, 1000),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn budget_violation_names_the_budget() {
        let omega = DMatrix::<f64>::identity(2, 2) * 0.05;
        let lat = RtLattice::new(omega, 1e-12, 10).unwrap();
        match lat.eval(&DVector::zeros(2)) {
            Err(Error::Budget { budget, required }) => {
                assert_eq!(budget, 10);
                assert!(required > 10);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
