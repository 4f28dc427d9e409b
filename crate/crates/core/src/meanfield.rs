//! Gap-equation frequency, mode functions and mean energy of the Gaussian
//! mean field.
//!
//! The dressed frequency solves the cubic
//!
//! ```text
//! Omega^3 - omega^2 Omega - 3 lambda / (2 m) = 0
//! ```
//!
//! and is computed twice: by the closed-form radical expression evaluated
//! with principal complex branches (the inner square root is negative for
//! small coupling and the expression is real only through branch
//! cancellation), and by bisection on a bracket that provably contains the
//! positive root. The two must agree or the solve reports a branch fault.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Which set of printed formulas to evaluate when the mass is not 1.
///
/// The source formulas carry inconsistent powers of `m` between the
/// Hamiltonian's quartic term and the mean energy; with `MNormalized`
/// (the verification default, forcing m = 1) they all coincide. `Literal`
/// evaluates them exactly as printed for general m, and cross-checks that
/// mix them are then expected to disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Literal,
    MNormalized,
}

impl Convention {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convention::Literal => "literal",
            Convention::MNormalized => "m_normalized",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Convention::Literal),
            "m_normalized" => Ok(Convention::MNormalized),
            other => Err(CoreError::InvalidParams(format!(
                "unknown convention '{other}' (expected literal | m_normalized)"
            ))),
        }
    }
}

/// Physical constants of the oscillator (hbar = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    pub m: f64,
    pub omega: f64,
    pub lambda: f64,
    pub convention: Convention,
}

impl PhysParams {
    pub fn new(m: f64, omega: f64, lambda: f64, convention: Convention) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "mass must be positive, got {m}"
            )));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "bare frequency must be positive, got {omega}"
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "quartic coupling must be finite and >= 0, got {lambda}"
            )));
        }
        if convention == Convention::MNormalized && m != 1.0 {
            return Err(CoreError::InvalidParams(format!(
                "convention m_normalized forces m = 1, got m = {m}"
            )));
        }
        Ok(Self {
            m,
            omega,
            lambda,
            convention,
        })
    }

    /// m = ω = 1, m-normalized: the verification default.
    pub fn standard(lambda: f64) -> Result<Self> {
        Self::new(1.0, 1.0, lambda, Convention::MNormalized)
    }

    fn cubic_residual(&self, omega_big: f64) -> f64 {
        omega_big.powi(3) - self.omega * self.omega * omega_big - 1.5 * self.lambda / self.m
    }
}

/// Diagnostics from the two-route gap solve.
#[derive(Debug, Clone, Copy)]
pub struct GapSolve {
    pub omega_closed: f64,
    pub omega_bisect: f64,
    pub cubic_residual: f64,
}

/// Mode-function values at a fixed time.
#[derive(Debug, Clone, Copy)]
pub struct ModeValues {
    pub t: f64,
    pub u: Complex64,
    pub udot: Complex64,
    /// v = -m * udot
    pub v: Complex64,
    /// pi = m * conj(udot)
    pub pi: Complex64,
}

impl ModeValues {
    /// u* v - u v*, which is `i` for a properly normalized mode.
    pub fn wronskian(&self) -> Complex64 {
        self.u.conj() * self.v - self.u * self.v.conj()
    }
}

/// The dressed mode: frequency, mean ground energy and the parameters it
/// was built from.
#[derive(Debug, Clone, Copy)]
pub struct MeanFieldSolution {
    pub params: PhysParams,
    pub omega_big: f64,
    pub e0: f64,
    pub gap: GapSolve,
    gap_consistent: bool,
}

/// Closed-form positive root, principal complex branches throughout.
fn cardano_root(m: f64, omega: f64, lambda: f64) -> f64 {
    let lm = lambda / m;
    let radicand = Complex64::new(-6912.0 * omega.powi(6) + 104976.0 * lm * lm, 0.0);
    let inner = 324.0 * lm + radicand.sqrt();
    let croot = inner.powf(1.0 / 3.0);
    let two_cbrt = 2.0f64.powf(1.0 / 3.0);
    let val = 2.0 * two_cbrt * omega * omega / croot + croot / (6.0 * two_cbrt);
    val.re
}

fn bisect_root(p: &PhysParams) -> f64 {
    let lo0 = p.omega;
    let hi0 = p.omega + 1.5 * p.lambda / (p.m * p.omega * p.omega) + 1.0;
    let f = |x: f64| p.cubic_residual(x);
    if f(lo0) == 0.0 {
        return lo0;
    }
    let (mut lo, mut hi) = (lo0, hi0);
    // f(lo) = -3 lambda / 2m <= 0 and f(hi) > 0 by construction
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solve the gap cubic for the dressed frequency, both routes, and build the
/// solution. Errors with a branch fault when the routes disagree beyond 1e-9.
pub fn solve_omega(params: PhysParams) -> Result<MeanFieldSolution> {
    let closed = cardano_root(params.m, params.omega, params.lambda);
    let bisect = bisect_root(&params);
    let diff = (closed - bisect).abs();
    if diff > 1e-9 * bisect.max(1.0) {
        return Err(CoreError::BranchFault {
            closed,
            bisect,
            diff,
        });
    }
    let residual = params.cubic_residual(closed);
    let bound = 1e-10 * closed.powi(3).max(1.0);
    if residual.abs() > bound {
        return Err(CoreError::CheckFailed {
            what: "gap cubic residual".into(),
            value: residual.abs(),
            bound,
        });
    }
    let gap = GapSolve {
        omega_closed: closed,
        omega_bisect: bisect,
        cubic_residual: residual,
    };
    let mut sol = MeanFieldSolution {
        params,
        omega_big: closed,
        e0: 0.0,
        gap,
        gap_consistent: true,
    };
    sol.e0 = sol.mean_energy(0.0);
    Ok(sol)
}

impl MeanFieldSolution {
    /// A solution with a caller-chosen frequency that need not satisfy the
    /// gap cubic. The mode functions keep their normalization for any
    /// positive frequency; used to drive the coefficient flow at couplings
    /// (alpha >= 1/6) that no gap-consistent parameter set reaches.
    pub fn with_frequency(params: PhysParams, omega_big: f64) -> Result<Self> {
        if !(omega_big > 0.0) || !omega_big.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "dressed frequency must be positive, got {omega_big}"
            )));
        }
        let residual = params.cubic_residual(omega_big);
        let gap = GapSolve {
            omega_closed: f64::NAN,
            omega_bisect: f64::NAN,
            cubic_residual: residual,
        };
        let mut sol = Self {
            params,
            omega_big,
            e0: 0.0,
            gap,
            gap_consistent: residual.abs() < 1e-10 * omega_big.powi(3).max(1.0),
        };
        sol.e0 = sol.mean_energy(0.0);
        Ok(sol)
    }

    /// Gap-consistent solution at a prescribed alpha = lambda/(4 m Omega^3),
    /// which pins Omega = omega/sqrt(1 - 6 alpha); only alpha < 1/6 is
    /// reachable this way. Beyond that, a detuned solution at Omega = omega.
    pub fn at_alpha(alpha: f64, m: f64, omega: f64, convention: Convention) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "alpha must be >= 0, got {alpha}"
            )));
        }
        if alpha < 1.0 / 6.0 {
            let omega_big = omega / (1.0 - 6.0 * alpha).sqrt();
            let lambda = 4.0 * m * omega_big.powi(3) * alpha;
            solve_omega(PhysParams::new(m, omega, lambda, convention)?)
        } else {
            let lambda = 4.0 * m * omega.powi(3) * alpha;
            Self::with_frequency(PhysParams::new(m, omega, lambda, convention)?, omega)
        }
    }

    pub fn is_gap_consistent(&self) -> bool {
        self.gap_consistent
    }

    /// alpha = lambda / (4 m Omega^3)
    pub fn alpha(&self) -> f64 {
        self.params.lambda / (4.0 * self.params.m * self.omega_big.powi(3))
    }

    /// u = e^{-i Omega t} / sqrt(2 m Omega) and its derived quantities.
    pub fn mode_at(&self, t: f64) -> ModeValues {
        let m = self.params.m;
        let om = self.omega_big;
        let norm = 1.0 / (2.0 * m * om).sqrt();
        let u = Complex64::new(0.0, -om * t).exp() * norm;
        let udot = Complex64::new(0.0, -om) * u;
        ModeValues {
            t,
            u,
            udot,
            v: -m * udot,
            pi: m * udot.conj(),
        }
    }

    /// Mean ground-state energy, pi*pi/2m + (m omega^2/2) u*u + (3 lambda/4)(u*u)^2,
    /// evaluated with the mode values at `t`. Constant along the solution.
    pub fn mean_energy(&self, t: f64) -> f64 {
        let p = self.params;
        let mv = self.mode_at(t);
        let uu = mv.u.norm_sqr();
        let pipi = mv.pi.norm_sqr();
        pipi / (2.0 * p.m) + 0.5 * p.m * p.omega * p.omega * uu + 0.75 * p.lambda * uu * uu
    }

    /// |u'' + omega^2 u + 3 lambda (u*u) u| with u'' = -Omega^2 u, a direct
    /// check of the mean-field equation at the mode values.
    pub fn meanfield_residual(&self, t: f64) -> f64 {
        let mv = self.mode_at(t);
        mode_equation_residual(&self.params, mv.u, self.omega_big)
    }
}

/// Residual of the mean-field mode equation for a pure phase mode
/// `u(t)` oscillating at `omega_big` (so u'' = -omega_big^2 u).
pub fn mode_equation_residual(params: &PhysParams, u: Complex64, omega_big: f64) -> f64 {
    let uddot = -omega_big * omega_big * u;
    (uddot + params.omega * params.omega * u + 3.0 * params.lambda * u.norm_sqr() * u).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn standard(lambda: f64) -> MeanFieldSolution {
        solve_omega(PhysParams::standard(lambda).unwrap()).unwrap()
    }

    #[test]
    fn free_oscillator_gap() {
        let sol = standard(0.0);
        assert_relative_eq!(sol.omega_big, 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.e0, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn unit_coupling_gap() {
        // positive root of x^3 - x = 3/2, frozen from an independent bisection
        let sol = standard(1.0);
        assert_relative_eq!(sol.omega_big, 1.4311271443936895, epsilon = 1e-9);
        assert!(sol.gap.cubic_residual.abs() < 1e-10);
        // E0 = Omega/4 + 1/(4 Omega) + 3/(16 Omega^2)
        let om = sol.omega_big;
        let expect = om / 4.0 + 1.0 / (4.0 * om) + 3.0 / (16.0 * om * om);
        assert_relative_eq!(sol.e0, expect, epsilon = 1e-12);
        assert!((sol.e0 - 0.624).abs() < 1e-3);
    }

    #[test]
    fn weak_coupling_expansion() {
        // Omega = 1 + (3/4) lambda + O(lambda^2) at m = omega = 1
        let sol = standard(1e-3);
        assert!((sol.omega_big - 1.00075).abs() < 3e-6);
    }

    #[test]
    fn closed_form_tracks_bisection_on_grid() {
        for lambda in [0.0, 0.01, 0.1, 0.5, 1.0, 2.0] {
            let sol = standard(lambda);
            assert!(
                (sol.gap.omega_closed - sol.gap.omega_bisect).abs() < 1e-9,
                "lambda = {lambda}"
            );
            assert!(sol.omega_big >= 1.0);
        }
    }

    #[test]
    fn cubic_has_exactly_one_positive_root() {
        // companion-matrix oracle for x^3 - omega^2 x - 3 lambda / 2m
        for lambda in [0.01f64, 0.1, 0.5, 1.0, 2.0] {
            let c = 1.5 * lambda;
            let companion = nalgebra::Matrix3::<f64>::new(
                0.0, 0.0, c, //
                1.0, 0.0, 1.0, //
                0.0, 1.0, 0.0,
            );
            let roots = companion.complex_eigenvalues();
            let positive: Vec<_> = roots
                .iter()
                .filter(|r| r.im.abs() < 1e-9 && r.re > 0.0)
                .collect();
            assert_eq!(positive.len(), 1, "lambda = {lambda}: {roots:?}");
            let sol = standard(lambda);
            assert!((positive[0].re - sol.omega_big).abs() < 1e-8);
        }
    }

    #[test]
    fn omega_increases_with_coupling() {
        let mut prev = 0.0;
        for i in 0..=20 {
            let sol = standard(0.1 * i as f64);
            assert!(sol.omega_big > prev, "lambda = {}", 0.1 * i as f64);
            prev = sol.omega_big;
        }
    }

    #[test]
    fn mode_values_and_wronskian() {
        let sol = standard(0.7);
        let norm = 1.0 / (2.0 * sol.omega_big).sqrt();
        let at0 = sol.mode_at(0.0);
        assert_relative_eq!(at0.u.re, norm, epsilon = 1e-14);
        assert_relative_eq!(at0.u.im, 0.0, epsilon = 1e-14);
        let half = sol.mode_at(std::f64::consts::PI / sol.omega_big);
        assert_relative_eq!(half.u.re, -norm, epsilon = 1e-13);
        for t in [0.0, 0.31, 2.7, 14.9] {
            let mv = sol.mode_at(t);
            assert!(
                (mv.wronskian() - Complex64::new(0.0, 1.0)).norm() < 1e-12,
                "t = {t}"
            );
            assert_relative_eq!(mv.u.norm_sqr(), norm * norm, epsilon = 1e-13);
        }
    }

    #[test]
    fn mean_energy_is_flat_in_time() {
        let sol = standard(1.0);
        let e = sol.mean_energy(0.0);
        for t in [0.4, 1.9, 7.3] {
            assert!((sol.mean_energy(t) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_vanishes_only_on_the_solution() {
        let sol = standard(1.0);
        for t in [0.0, 0.9, 4.2] {
            assert!(sol.meanfield_residual(t) < 1e-10);
        }
        // wrong amplitude: u -> 1.1 u breaks the cubic balance by
        // 3 lambda (1.1^2 - 1) |u|^2 |1.1 u|
        let mv = sol.mode_at(0.3);
        let scaled = mv.u * 1.1;
        let got = mode_equation_residual(&sol.params, scaled, sol.omega_big);
        let expect =
            3.0 * sol.params.lambda * (1.1f64.powi(2) - 1.0) * mv.u.norm_sqr() * scaled.norm();
        assert!(got > 1e-3);
        assert_relative_eq!(got, expect, epsilon = 1e-10);
        // harmonic case: any pure omega phase solves it
        let free = standard(0.0);
        assert!(free.meanfield_residual(5.0) < 1e-14);
    }

    #[test]
    fn param_validation() {
        assert!(PhysParams::new(-1.0, 1.0, 0.1, Convention::Literal).is_err());
        assert!(PhysParams::new(1.0, 0.0, 0.1, Convention::Literal).is_err());
        assert!(PhysParams::new(1.0, 1.0, -0.1, Convention::Literal).is_err());
        assert!(PhysParams::new(2.0, 1.0, 0.1, Convention::MNormalized).is_err());
        assert!(PhysParams::new(2.0, 1.0, 0.1, Convention::Literal).is_ok());
    }

    #[test]
    fn alpha_construction() {
        let sol = MeanFieldSolution::at_alpha(0.05, 1.0, 1.0, Convention::MNormalized).unwrap();
        assert_relative_eq!(sol.alpha(), 0.05, epsilon = 1e-12);
        assert!(sol.is_gap_consistent());
        assert_relative_eq!(sol.omega_big, 1.0 / 0.7f64.sqrt(), epsilon = 1e-12);
        // beyond 1/6 only the detuned route exists
        let stressed = MeanFieldSolution::at_alpha(0.2, 1.0, 1.0, Convention::MNormalized).unwrap();
        assert_relative_eq!(stressed.alpha(), 0.2, epsilon = 1e-12);
        assert!(!stressed.is_gap_consistent());
    }
}
