//! The order-(m lambda) coefficient flow: the time-dependent 4x4 system for
//! the cubic-generator coefficients b3_k, its phase reduction to a
//! constant-coefficient system, eigenvalue sweeps, the critical coupling,
//! and a fixed-step integrator cross-checked against the closed form.
//!
//! Two first-class variants of the system are kept side by side:
//!
//! * `PaperLiteral` - the 4x4 matrix and source exactly as printed, with the
//!   fourth diagonal entry of the reduced system read as (-6 alpha + 2); the
//!   alpha = 0 spectrum (-4, -2, 0, 2) forces that reading.
//! * `EngineDerived` - matrix and source obtained by projecting
//!   i([a, H4] + m lambda [B3, H4]) from the operator algebra onto the cubic
//!   monomials adag^(3-k) a^k. It differs from the printed system in the
//!   source factors {1,3,3,1} and in the (4,4) matrix entry (+9 alpha
//!   instead of -6 alpha).
//!
//! Neither variant is silently corrected; [`compare_modes`] reports every
//! difference.

use std::io::Write;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fock::NoPoly;
use crate::jsonfmt;
use crate::linalg;
use crate::meanfield::{Convention, MeanFieldSolution};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Threshold on max |Im nu| that declares the spectrum complex. Three orders
/// above the certified eigensolver error.
pub const SECULAR_INDICATOR_THRESHOLD: f64 = 1e-8;

/// Backward-error certification demanded of every eigenpair.
pub const EIGEN_CERTIFICATION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    PaperLiteral,
    EngineDerived,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::PaperLiteral => "paper_literal",
            Mode::EngineDerived => "engine_derived",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_literal" => Ok(Mode::PaperLiteral),
            "engine_derived" => Ok(Mode::EngineDerived),
            other => Err(CoreError::InvalidParams(format!(
                "unknown mode '{other}' (expected paper_literal | engine_derived)"
            ))),
        }
    }
}

/// The cubic monomial basis adag^(3-k) a^k, k = 0..3.
pub fn cubic_monomial(k: usize) -> NoPoly {
    NoPoly::monomial(3 - k as u32, k as u32, Complex64::new(1.0, 0.0))
}

/// Quartic sector polynomial H4 = (1/4) : (u a - u* adag)^4 : built directly
/// from the mode value `u`.
pub fn quartic_sector(u: Complex64) -> NoPoly {
    let mut h4 = NoPoly::zero();
    let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
    for j in 0..=4u32 {
        let c = (-u.conj()).powu(j) * u.powu(4 - j) * binom[j as usize] * 0.25;
        h4 = h4.add(&NoPoly::monomial(j, 4 - j, c));
    }
    h4
}

/// Time-dependent system `db/dt = K(t) b + i s(t)`.
///
/// Returns the matrix with the `i m lambda` prefactor folded in and the bare
/// source vector (no leading `i`). `PaperLiteral` uses the printed entries;
/// `EngineDerived` projects the operator-algebra commutators onto the cubic
/// monomials, discarding the quintic and linear leftovers.
pub fn build_time_system(
    sol: &MeanFieldSolution,
    t: f64,
    mode: Mode,
) -> (Matrix4<Complex64>, Vector4<Complex64>) {
    let u = sol.mode_at(t).u;
    let us = u.conj();
    let pref = I * sol.params.m * sol.params.lambda;
    match mode {
        Mode::PaperLiteral => {
            let uu = us * u;
            let uu2 = uu * uu;
            #[rustfmt::skip]
            let m = Matrix4::new(
                -9.0 * uu2,          Complex64::ZERO,  3.0 * us.powu(4),    Complex64::ZERO,
                18.0 * us * u.powu(3), -3.0 * uu2,     -6.0 * us.powu(3) * u, 9.0 * us.powu(4),
                -9.0 * u.powu(4),    6.0 * us * u.powu(3), 3.0 * uu2,       -18.0 * us.powu(3) * u,
                Complex64::ZERO,     -3.0 * u.powu(4), Complex64::ZERO,     -6.0 * uu2,
            );
            let s = Vector4::new(us.powu(4), -us.powu(3) * u, uu2, -us * u.powu(3));
            (m.map(|z| z * pref), s)
        }
        Mode::EngineDerived => {
            let h4 = quartic_sector(u);
            let mut m = Matrix4::from_element(Complex64::ZERO);
            for k in 0..4 {
                let com = cubic_monomial(k).commutator(&h4);
                for kp in 0..4 {
                    m[(kp, k)] = com.coeff(3 - kp as u32, kp as u32);
                }
            }
            let com_a = NoPoly::annihilation().commutator(&h4);
            let s = Vector4::from_fn(|kp, _| com_a.coeff(3 - kp as u32, kp as u32));
            (m.map(|z| z * pref), s)
        }
    }
}

/// Phase factors of the ansatz b_k = c_k e^{i (4 - 2k) Omega t}.
fn ansatz_phases(omega_big: f64, t: f64) -> Vector4<Complex64> {
    Vector4::from_fn(|k, _| (I * ((4 - 2 * k as i32) as f64) * omega_big * t).exp())
}

const FREQ_OFFSETS: [f64; 4] = [4.0, 2.0, 0.0, -2.0];

/// The constant-coefficient reduction: mode, alpha, the bracketed real 4x4
/// matrix (`dc/dt = i Omega matrix c + i source`), the transformed source
/// and the reference frequency. The `i Omega` prefactor is never folded in.
#[derive(Debug, Clone)]
pub struct CoeffSystem {
    pub mode: Mode,
    pub alpha: f64,
    pub matrix: Matrix4<f64>,
    pub source: Vector4<Complex64>,
    pub omega_big: f64,
}

fn reduce_at(
    sol: &MeanFieldSolution,
    t: f64,
    mode: Mode,
) -> (Matrix4<Complex64>, Vector4<Complex64>) {
    let (k, s) = build_time_system(sol, t, mode);
    let om = sol.omega_big;
    let ph = ansatz_phases(om, t);
    let mut c = Matrix4::from_element(Complex64::ZERO);
    for row in 0..4 {
        for col in 0..4 {
            // P^{-1} K P, then strip the i Omega prefactor
            c[(row, col)] = ph[row].conj() * k[(row, col)] * ph[col] / (I * om);
        }
    }
    for k_ in 0..4 {
        c[(k_, k_)] -= Complex64::new(FREQ_OFFSETS[k_], 0.0);
    }
    let stil = Vector4::from_fn(|k_, _| ph[k_].conj() * s[k_]);
    (c, stil)
}

impl CoeffSystem {
    /// Reduce the time-dependent system of `sol` to constant coefficients.
    /// Built at two separated times and compared entrywise; residual time
    /// dependence or imaginary parts above 1e-10 signal a phase-bookkeeping
    /// bug and are reported as an error.
    pub fn for_solution(sol: &MeanFieldSolution, mode: Mode) -> Result<Self> {
        let om = sol.omega_big;
        let (c1, s1) = reduce_at(sol, 0.0, mode);
        let (c2, s2) = reduce_at(sol, 0.37 / om, mode);
        let mut worst = 0.0f64;
        for i in 0..4 {
            worst = worst.max((s1[i] - s2[i]).norm());
            for j in 0..4 {
                worst = worst.max((c1[(i, j)] - c2[(i, j)]).norm());
                worst = worst.max(c1[(i, j)].im.abs());
            }
        }
        if worst > 1e-10 {
            return Err(CoreError::PhaseReduction(worst));
        }
        Ok(Self {
            mode,
            alpha: sol.alpha(),
            matrix: c1.map(|z| z.re),
            source: s1,
            omega_big: om,
        })
    }

    /// The reduced system at a prescribed alpha, independent of any gap
    /// solution: the bracketed matrix depends on the parameters only through
    /// alpha, so a canonical mode (m = omega = Omega = 1, lambda = 4 alpha)
    /// serves for spectra and sweeps at any alpha >= 0.
    pub fn at_alpha(alpha: f64, mode: Mode) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "alpha must be >= 0, got {alpha}"
            )));
        }
        let params =
            crate::meanfield::PhysParams::new(1.0, 1.0, 4.0 * alpha, Convention::MNormalized)?;
        let sol = MeanFieldSolution::with_frequency(params, 1.0)?;
        Self::for_solution(&sol, mode)
    }

    /// Eigenvalues nu of the bracketed real matrix, certified to
    /// [`EIGEN_CERTIFICATION`] backward error and sorted by (Re, Im). Mode
    /// frequencies are Omega * nu.
    pub fn eigen_spectrum(&self) -> Result<[Complex64; 4]> {
        let pairs = linalg::eig4_certified(&self.matrix, EIGEN_CERTIFICATION)?;
        Ok([
            pairs[0].value,
            pairs[1].value,
            pairs[2].value,
            pairs[3].value,
        ])
    }

    /// max |Im nu| over the spectrum.
    pub fn secular_indicator(&self) -> Result<f64> {
        let nus = self.eigen_spectrum()?;
        Ok(nus.iter().map(|z| z.im.abs()).fold(0.0, f64::max))
    }
}

/// Constant particular solution of the reduced flow.
#[derive(Debug, Clone)]
pub struct ParticularSolution {
    pub c: Vector4<Complex64>,
    /// 1-norm condition number of the bracketed matrix.
    pub condition: f64,
    /// || i Omega M c + i s ||_2, checked against 1e-10.
    pub residual: f64,
}

/// c_p = -(i Omega M)^{-1} (i s~). Near-singular systems (condition number
/// above 1e12) signal resonance and are refused; alpha = 0 hits this exactly
/// through the zero eigenvalue.
pub fn particular_solution(
    sys: &CoeffSystem,
    sol: &MeanFieldSolution,
) -> Result<ParticularSolution> {
    if (sys.alpha - sol.alpha()).abs() > 1e-10 * (1.0 + sys.alpha)
        || (sys.omega_big - sol.omega_big).abs() > 1e-10 * sys.omega_big
    {
        return Err(CoreError::InvalidParams(
            "coefficient system was built for different parameters".into(),
        ));
    }
    let condition = linalg::cond1_4(&sys.matrix);
    if !(condition < 1e12) {
        return Err(CoreError::ResonantSingular { cond: condition });
    }
    let mc = sys
        .matrix
        .map(|x| Complex64::new(x, 0.0) * I * sys.omega_big);
    let rhs = sys.source.map(|z| -I * z);
    let c = linalg::solve4(&mc, &rhs).ok_or(CoreError::ResonantSingular { cond: condition })?;
    let residual = (mc * c - rhs).norm();
    if residual > 1e-10 {
        return Err(CoreError::CheckFailed {
            what: "particular-solution residual".into(),
            value: residual,
            bound: 1e-10,
        });
    }
    Ok(ParticularSolution {
        c,
        condition,
        residual,
    })
}

/// Coefficients of the cubic generator at one time, in both the b (lab) and
/// c (rotated) forms; b_k = c_k e^{i (4-2k) Omega t} by construction.
#[derive(Debug, Clone, Copy)]
pub struct CoeffVector {
    pub t: f64,
    pub b: [Complex64; 4],
    pub c: [Complex64; 4],
}

impl CoeffVector {
    /// Build from constant rotated coefficients via the phase ansatz.
    pub fn from_constant(c: &Vector4<Complex64>, t: f64, omega_big: f64) -> Self {
        let ph = ansatz_phases(omega_big, t);
        let mut b = [Complex64::ZERO; 4];
        let mut cc = [Complex64::ZERO; 4];
        for k in 0..4 {
            b[k] = c[k] * ph[k];
            cc[k] = c[k];
        }
        Self { t, b, c: cc }
    }

    pub fn zero(t: f64) -> Self {
        Self {
            t,
            b: [Complex64::ZERO; 4],
            c: [Complex64::ZERO; 4],
        }
    }

    fn from_lab(b: Vector4<Complex64>, t: f64, omega_big: f64) -> Self {
        let ph = ansatz_phases(omega_big, t);
        let mut bb = [Complex64::ZERO; 4];
        let mut cc = [Complex64::ZERO; 4];
        for k in 0..4 {
            bb[k] = b[k];
            cc[k] = b[k] * ph[k].conj();
        }
        Self { t, b: bb, c: cc }
    }

    /// Analytic time derivative of b under the phase ansatz (constant c).
    pub fn bdot(&self, omega_big: f64) -> [Complex64; 4] {
        let mut out = [Complex64::ZERO; 4];
        for k in 0..4 {
            out[k] = I * FREQ_OFFSETS[k] * omega_big * self.b[k];
        }
        out
    }
}

/// Fixed-step fourth-order integration of the time-dependent flow.
/// The step must resolve the fast phase: dt <= (2 pi / Omega) / 200.
pub fn integrate_flow(
    sol: &MeanFieldSolution,
    mode: Mode,
    b0: [Complex64; 4],
    t_span: (f64, f64),
    dt: f64,
) -> Result<Vec<CoeffVector>> {
    let om = sol.omega_big;
    let max_dt = (2.0 * std::f64::consts::PI / om) / 200.0;
    if !(dt > 0.0) || dt > max_dt {
        return Err(CoreError::StepTooLarge { dt, max: max_dt });
    }
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(CoreError::InvalidParams(format!(
            "empty time span [{t0}, {t1}]"
        )));
    }
    let rhs = |t: f64, y: &Vector4<Complex64>| -> Vector4<Complex64> {
        let (k, s) = build_time_system(sol, t, mode);
        k * y + s.map(|z| I * z)
    };
    let steps = ((t1 - t0) / dt).ceil() as usize;
    let mut y = Vector4::from_row_slice(&b0);
    let mut t = t0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(CoeffVector::from_lab(y, t, om));
    for _ in 0..steps {
        let h = dt.min(t1 - t);
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &(y + k1 * Complex64::new(0.5 * h, 0.0)));
        let k3 = rhs(t + 0.5 * h, &(y + k2 * Complex64::new(0.5 * h, 0.0)));
        let k4 = rhs(t + h, &(y + k3 * Complex64::new(h, 0.0)));
        y += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
            * Complex64::new(h / 6.0, 0.0);
        t += h;
        out.push(CoeffVector::from_lab(y, t, om));
        if t >= t1 {
            break;
        }
    }
    Ok(out)
}

/// Closed-form solution of the reduced flow mapped back through the ansatz
/// phases: c(t) = V e^{i Omega D t} V^{-1} (b0 - c_p) + c_p, b = P(t) c.
pub fn closed_form_flow(
    sys: &CoeffSystem,
    sol: &MeanFieldSolution,
    b0: [Complex64; 4],
    t: f64,
) -> Result<[Complex64; 4]> {
    let part = particular_solution(sys, sol)?;
    let pairs = linalg::eig4_certified(&sys.matrix, EIGEN_CERTIFICATION)?;
    let mut v = Matrix4::from_element(Complex64::ZERO);
    for (j, p) in pairs.iter().enumerate() {
        v.set_column(j, &p.vector);
    }
    let vinv = v
        .try_inverse()
        .ok_or_else(|| CoreError::EigenFailure("defective eigenvector matrix".into()))?;
    let z0 = vinv * (Vector4::from_row_slice(&b0) - part.c);
    let om = sys.omega_big;
    let mut ct = part.c;
    for (j, p) in pairs.iter().enumerate() {
        let phase = (I * om * p.value * t).exp();
        ct += v.column(j) * (z0[j] * phase);
    }
    let ph = ansatz_phases(om, t);
    let mut out = [Complex64::ZERO; 4];
    for k in 0..4 {
        out[k] = ct[k] * ph[k];
    }
    Ok(out)
}

/// Eigenvalue sweep over an alpha grid plus the located critical coupling.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub mode: Mode,
    pub alpha_grid: Vec<f64>,
    pub spectra: Vec<[Complex64; 4]>,
    pub alpha_crit: Option<f64>,
    /// The matrix-reading decision carried with every report.
    pub reading_note: &'static str,
}

pub const FOURTH_ENTRY_NOTE: &str =
    "fourth diagonal entry of the reduced system read as (-6 alpha + 2); \
     the printed '-6a + 2a' cannot reproduce the alpha = 0 spectrum (-4, -2, 0, 2)";

impl StabilityReport {
    /// CSV with the pinned header, floats at 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "alpha,re_nu1,im_nu1,re_nu2,im_nu2,re_nu3,im_nu3,re_nu4,im_nu4"
        )?;
        for (a, nus) in self.alpha_grid.iter().zip(&self.spectra) {
            let mut row = jsonfmt::f64_repr(*a);
            for nu in nus {
                row.push(',');
                row.push_str(&jsonfmt::f64_repr(nu.re));
                row.push(',');
                row.push_str(&jsonfmt::f64_repr(nu.im));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

fn sweep_grid(
    mode: Mode,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<(Vec<f64>, Vec<[Complex64; 4]>)> {
    if !(lo >= 0.0) || !(hi > lo) || steps < 2 {
        return Err(CoreError::InvalidParams(format!(
            "bad sweep range [{lo}, {hi}] with {steps} steps"
        )));
    }
    let mut alpha_grid = Vec::with_capacity(steps);
    let mut spectra = Vec::with_capacity(steps);
    for i in 0..steps {
        let a = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
        let sys = CoeffSystem::at_alpha(a, mode)?;
        alpha_grid.push(a);
        spectra.push(sys.eigen_spectrum()?);
    }
    Ok((alpha_grid, spectra))
}

/// Certified spectra over a uniform grid; `alpha_crit` is filled when a
/// transition lies inside the range.
pub fn stability_sweep(mode: Mode, lo: f64, hi: f64, steps: usize) -> Result<StabilityReport> {
    let (alpha_grid, spectra) = sweep_grid(mode, lo, hi, steps)?;
    let alpha_crit = find_alpha_crit_in(mode, 1e-6, lo, hi).ok();
    Ok(StabilityReport {
        mode,
        alpha_grid,
        spectra,
        alpha_crit,
        reading_note: FOURTH_ENTRY_NOTE,
    })
}

fn indicator(alpha: f64, mode: Mode) -> Result<f64> {
    CoeffSystem::at_alpha(alpha, mode)?.secular_indicator()
}

/// Bisection for the real-to-complex transition of the spectrum over
/// `[lo, hi]`, to within `tol`. Errors when no transition exists in the
/// range (the coarse sweep is attached) or when the indicator is not
/// monotone across the returned bracket.
pub fn find_alpha_crit_in(mode: Mode, tol: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(CoreError::InvalidParams(format!(
            "tol must be > 0, got {tol}"
        )));
    }
    let over = |a: f64| -> Result<bool> { Ok(indicator(a, mode)? > SECULAR_INDICATOR_THRESHOLD) };
    if over(lo)? || !over(hi)? {
        let (alpha_grid, spectra) = sweep_grid(mode, lo, hi, 101)?;
        let sweep = StabilityReport {
            mode,
            alpha_grid,
            spectra,
            alpha_crit: None,
            reading_note: FOURTH_ENTRY_NOTE,
        };
        return Err(CoreError::NoTransition {
            lo,
            hi,
            mode: mode.as_str(),
            sweep: Box::new(sweep),
        });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if over(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    let crit = 0.5 * (a + b);
    // the indicator must be 0 below and positive above across the bracket
    for i in 0..8 {
        let probe = (crit - 4.0 * tol) + i as f64 * tol;
        if probe < lo || probe > hi {
            continue;
        }
        let above = over(probe)?;
        if (probe <= a && above) || (probe >= b && !above) {
            return Err(CoreError::NonMonotoneIndicator(crit));
        }
    }
    Ok(crit)
}

/// The standard bracket [0, 0.5].
pub fn find_alpha_crit(mode: Mode, tol: f64) -> Result<f64> {
    find_alpha_crit_in(mode, tol, 0.0, 0.5)
}

/// Every difference between the paper-literal and engine-derived systems,
/// in the dimensionless alpha-slope units of the reduced matrix.
#[derive(Debug, Clone)]
pub struct ModeDiscrepancy {
    /// engine source / paper source, componentwise (the binomial pattern).
    pub source_factors: [f64; 4],
    /// (row, col, paper entry, engine entry) of differing alpha slopes.
    pub matrix_diffs: Vec<(usize, usize, f64, f64)>,
    pub alpha_crit_paper: Option<f64>,
    pub alpha_crit_engine: Option<f64>,
}

impl ModeDiscrepancy {
    pub fn to_json(&self) -> String {
        let mut diffs = String::from("[");
        for (n, (r, c, p, e)) in self.matrix_diffs.iter().enumerate() {
            if n > 0 {
                diffs.push(',');
            }
            diffs.push_str(&format!(
                "{{\"row\":{r},\"col\":{c},\"paper\":{},\"engine\":{}}}",
                jsonfmt::f64_repr(*p),
                jsonfmt::f64_repr(*e)
            ));
        }
        diffs.push(']');
        let opt = |v: Option<f64>| match v {
            Some(x) => jsonfmt::f64_repr(x),
            None => "null".into(),
        };
        format!(
            "{{\"alpha_crit_engine\":{},\"alpha_crit_paper\":{},\"matrix_diffs\":{},\"source_factors\":[{},{},{},{}]}}",
            opt(self.alpha_crit_engine),
            opt(self.alpha_crit_paper),
            diffs,
            jsonfmt::f64_repr(self.source_factors[0]),
            jsonfmt::f64_repr(self.source_factors[1]),
            jsonfmt::f64_repr(self.source_factors[2]),
            jsonfmt::f64_repr(self.source_factors[3]),
        )
    }
}

/// Compare the two system variants entry by entry (alpha-slope units) and
/// locate both critical couplings. The engine mode's missing transition is
/// reported as `None`, not guessed.
pub fn compare_modes(tol: f64) -> Result<ModeDiscrepancy> {
    let probe = 0.25;
    let base_p = CoeffSystem::at_alpha(0.0, Mode::PaperLiteral)?.matrix;
    let base_e = CoeffSystem::at_alpha(0.0, Mode::EngineDerived)?.matrix;
    let slope_p = (CoeffSystem::at_alpha(probe, Mode::PaperLiteral)?.matrix - base_p) / probe;
    let slope_e = (CoeffSystem::at_alpha(probe, Mode::EngineDerived)?.matrix - base_e) / probe;
    let mut matrix_diffs = Vec::new();
    for r in 0..4 {
        for c in 0..4 {
            if (slope_p[(r, c)] - slope_e[(r, c)]).abs() > 1e-9 {
                matrix_diffs.push((r, c, slope_p[(r, c)], slope_e[(r, c)]));
            }
        }
    }
    let sol = MeanFieldSolution::at_alpha(0.01, 1.0, 1.0, Convention::MNormalized)?;
    let (_, s_p) = build_time_system(&sol, 0.0, Mode::PaperLiteral);
    let (_, s_e) = build_time_system(&sol, 0.0, Mode::EngineDerived);
    let mut source_factors = [0.0; 4];
    for k in 0..4 {
        source_factors[k] = (s_e[k] / s_p[k]).re;
    }
    let alpha_crit_paper = find_alpha_crit(Mode::PaperLiteral, tol).ok();
    let alpha_crit_engine = find_alpha_crit(Mode::EngineDerived, tol).ok();
    Ok(ModeDiscrepancy {
        source_factors,
        matrix_diffs,
        alpha_crit_paper,
        alpha_crit_engine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::PhysParams;
    use approx::assert_relative_eq;

    fn standard(lambda: f64) -> MeanFieldSolution {
        crate::meanfield::solve_omega(PhysParams::standard(lambda).unwrap()).unwrap()
    }

    #[test]
    fn paper_entry_printed_value() {
        // entry (1,3) of the printed time system is i m lambda 3 u*^4;
        // at t = 0, m = omega = 1 that is 3 i lambda / (2 m Omega)^2
        let sol = standard(1.0);
        let (k, _) = build_time_system(&sol, 0.0, Mode::PaperLiteral);
        let expect = 3.0 * sol.params.lambda / (2.0 * sol.omega_big).powi(2);
        assert_relative_eq!(k[(0, 2)].im, expect, epsilon = 1e-13);
        assert_relative_eq!(k[(0, 2)].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn engine_source_carries_binomial_factors() {
        let sol = standard(0.5);
        let (_, s_e) = build_time_system(&sol, 0.0, Mode::EngineDerived);
        let (_, s_p) = build_time_system(&sol, 0.0, Mode::PaperLiteral);
        for (k, f) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
            assert_relative_eq!((s_e[k] / s_p[k]).re, f, epsilon = 1e-12);
            assert_relative_eq!((s_e[k] / s_p[k]).im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lambda_zero_kills_matrix_not_source() {
        let sol = standard(0.0);
        let (k, s) = build_time_system(&sol, 0.4, Mode::PaperLiteral);
        assert!(k.iter().all(|z| z.norm() == 0.0));
        let u4 = sol.mode_at(0.4).u.norm_sqr().powi(2);
        for i in 0..4 {
            assert_relative_eq!(s[i].norm(), u4, epsilon = 1e-14);
        }
    }

    #[test]
    fn reduction_is_time_independent_and_real() {
        for mode in [Mode::PaperLiteral, Mode::EngineDerived] {
            let sol = standard(0.8);
            let sys = CoeffSystem::for_solution(&sol, mode).unwrap();
            // re-reduce at a third unrelated time and compare
            let (c3, s3) = reduce_at(&sol, 1.91 / sol.omega_big, mode);
            let mut worst = 0.0f64;
            for i in 0..4 {
                worst = worst.max((s3[i] - sys.source[i]).norm());
                for j in 0..4 {
                    worst = worst.max((c3[(i, j)].re - sys.matrix[(i, j)]).abs());
                    worst = worst.max(c3[(i, j)].im.abs());
                }
            }
            assert!(worst < 1e-10, "mode {mode:?}: {worst:e}");
        }
    }

    #[test]
    fn alpha_zero_matrix_is_exact_diagonal() {
        let sys = CoeffSystem::at_alpha(0.0, Mode::PaperLiteral).unwrap();
        let expect = Matrix4::from_diagonal(&nalgebra::Vector4::new(-4.0, -2.0, 0.0, 2.0));
        assert!((sys.matrix - expect).abs().max() < 1e-14);
        let nus = sys.eigen_spectrum().unwrap();
        for (nu, want) in nus.iter().zip([-4.0, -2.0, 0.0, 2.0]) {
            assert!((nu - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn printed_rows_at_alpha() {
        let a = 0.1;
        let sys = CoeffSystem::at_alpha(a, Mode::PaperLiteral).unwrap();
        #[rustfmt::skip]
        let expect = Matrix4::new(
            -9.0 * a - 4.0,  0.0,            3.0 * a,  0.0,
            18.0 * a,       -3.0 * a - 2.0, -6.0 * a,  9.0 * a,
            -9.0 * a,        6.0 * a,        3.0 * a, -18.0 * a,
            0.0,            -3.0 * a,        0.0,     -6.0 * a + 2.0,
        );
        assert!((sys.matrix - expect).abs().max() < 1e-12);
        assert_relative_eq!(sys.matrix.trace(), -15.0 * a - 4.0, epsilon = 1e-12);
        // engine variant differs only in the (3,3) slope
        let eng = CoeffSystem::at_alpha(a, Mode::EngineDerived).unwrap();
        let mut expect_e = expect;
        expect_e[(3, 3)] = 9.0 * a + 2.0;
        assert!((eng.matrix - expect_e).abs().max() < 1e-12);
        assert_relative_eq!(eng.matrix.trace(), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn weak_coupling_slopes() {
        let a = 1e-4;
        let sys = CoeffSystem::at_alpha(a, Mode::PaperLiteral).unwrap();
        let nus = sys.eigen_spectrum().unwrap();
        let base = [-4.0, -2.0, 0.0, 2.0];
        let slopes: Vec<f64> = nus
            .iter()
            .zip(base)
            .map(|(nu, b)| (nu.re - b) / a)
            .collect();
        for (got, want) in slopes.iter().zip([-9.0, -3.0, 3.0]) {
            assert!((got - want).abs() / want.abs() < 0.02, "{got} vs {want}");
        }
        // fourth slope: the matrix gives -6, the paper's text claims -3
        assert!((slopes[3] - (-6.0)).abs() < 0.01);
        assert!((slopes[3] - (-3.0)).abs() > 1.0);
    }

    #[test]
    fn critical_coupling_near_printed_value() {
        let ac = find_alpha_crit(Mode::PaperLiteral, 1e-6).unwrap();
        assert!((ac - 0.136593).abs() < 1e-4, "alpha_c = {ac}");
        assert!(indicator(0.0, Mode::PaperLiteral).unwrap() < 1e-12);
    }

    #[test]
    fn engine_mode_has_no_transition() {
        match find_alpha_crit(Mode::EngineDerived, 1e-4) {
            Err(CoreError::NoTransition { sweep, .. }) => {
                assert_eq!(sweep.alpha_grid.len(), 101);
                for nus in &sweep.spectra {
                    for nu in nus {
                        assert!(nu.im.abs() < SECULAR_INDICATOR_THRESHOLD);
                    }
                }
            }
            other => panic!("expected NoTransition, got {other:?}"),
        }
    }

    #[test]
    fn spectrum_conjugate_pairs_and_continuity() {
        let mut prev: Option<[Complex64; 4]> = None;
        let mut a = 0.0;
        while a <= 0.3 + 1e-12 {
            let nus = CoeffSystem::at_alpha(a, Mode::PaperLiteral)
                .unwrap()
                .eigen_spectrum()
                .unwrap();
            // complex eigenvalues of the real matrix pair up under conjugation
            for nu in nus.iter().filter(|nu| nu.im.abs() > 1e-10) {
                assert!(
                    nus.iter().any(|other| (other - nu.conj()).norm() < 1e-8),
                    "unpaired {nu} at alpha {a}"
                );
            }
            if let Some(p) = prev {
                for nu in nus.iter() {
                    let dist = p.iter().map(|q| (nu - q).norm()).fold(f64::MAX, f64::min);
                    assert!(dist < 1e-1, "branch jump at alpha {a}");
                }
            }
            prev = Some(nus);
            a += 1e-3;
        }
    }

    #[test]
    fn particular_solution_resonance_and_scaling() {
        // alpha = 0: the zero eigenvalue makes the system singular
        let sys0 = CoeffSystem::at_alpha(0.0, Mode::PaperLiteral).unwrap();
        let sol0 = MeanFieldSolution::with_frequency(
            PhysParams::new(1.0, 1.0, 0.0, Convention::MNormalized).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            particular_solution(&sys0, &sol0),
            Err(CoreError::ResonantSingular { .. })
        ));

        // finite alpha: residual certified, condition finite
        let sol = MeanFieldSolution::at_alpha(0.05, 1.0, 1.0, Convention::MNormalized).unwrap();
        let sys = CoeffSystem::for_solution(&sol, Mode::PaperLiteral).unwrap();
        let part = particular_solution(&sys, &sol).unwrap();
        assert!(part.residual < 1e-10);
        assert!(part.condition > 1.0 && part.condition < 1e4);

        // third component grows like 1/(3 alpha): |c_2| * 4 alpha Omega^3 -> 1
        let mut prev_gauge = f64::MAX;
        for alpha in [0.05, 0.025, 0.0125] {
            let sol =
                MeanFieldSolution::at_alpha(alpha, 1.0, 1.0, Convention::MNormalized).unwrap();
            let sys = CoeffSystem::for_solution(&sol, Mode::EngineDerived).unwrap();
            let part = particular_solution(&sys, &sol).unwrap();
            let gauge = part.c[2].norm() * 4.0 * alpha * sol.omega_big.powi(3);
            assert!((0.9..1.15).contains(&gauge), "alpha {alpha}: gauge {gauge}");
            assert!(gauge < prev_gauge);
            prev_gauge = gauge;
        }
    }

    #[test]
    fn integrator_enforces_step_bound() {
        let sol = standard(0.1);
        let too_big = (2.0 * std::f64::consts::PI / sol.omega_big) / 100.0;
        assert!(matches!(
            integrate_flow(
                &sol,
                Mode::PaperLiteral,
                [Complex64::ZERO; 4],
                (0.0, 1.0),
                too_big
            ),
            Err(CoreError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn free_flow_grows_linearly_in_the_resonant_component() {
        // lambda = 0: K = 0 and the constant source component drives
        // b_2(t) = i s2 t while the phased components stay bounded
        let sol = standard(0.0);
        let dt = (2.0 * std::f64::consts::PI) / 400.0;
        let traj = integrate_flow(
            &sol,
            Mode::EngineDerived,
            [Complex64::ZERO; 4],
            (0.0, 40.0),
            dt,
        )
        .unwrap();
        let last = traj.last().unwrap();
        let s2 = 3.0 * 0.25; // 3 (u*u)^2 at m = Omega = 1
        let expect = Complex64::new(0.0, s2 * last.t);
        assert!((last.b[2] - expect).norm() < 1e-9);
        // phased components oscillate within |s_k| / omega_k of zero
        // (quadrature of e^{i 2 omega t} sources); the largest is 3 r^4
        let bound = 4.0 * 0.25;
        assert!(last.b[0].norm() < bound && last.b[1].norm() < bound && last.b[3].norm() < bound);
        assert!(last.b[2].norm() > 10.0 * bound);
    }

    #[test]
    fn driven_initial_condition_is_a_fixed_point_of_the_reduced_flow() {
        use crate::meanfield::Convention;
        let sol = MeanFieldSolution::at_alpha(0.05, 1.0, 1.0, Convention::MNormalized).unwrap();
        let sys = CoeffSystem::for_solution(&sol, Mode::PaperLiteral).unwrap();
        let part = particular_solution(&sys, &sol).unwrap();
        let b0: [Complex64; 4] = part.c.into();
        let om = sol.omega_big;
        let dt = (2.0 * std::f64::consts::PI / om) / 2000.0;
        let traj = integrate_flow(&sol, Mode::PaperLiteral, b0, (0.0, 12.0), dt).unwrap();
        // c stays pinned at c_p, b just rotates through the ansatz phases
        for sample in traj.iter().step_by(400) {
            for k in 0..4 {
                assert!(
                    (sample.c[k] - part.c[k]).norm() < 1e-8,
                    "t = {}: c[{k}] drifted",
                    sample.t
                );
            }
        }
    }

    #[test]
    fn secular_onset_predicts_boundedness() {
        use crate::meanfield::Convention;
        // below the critical coupling every trajectory stays bounded
        let tame = MeanFieldSolution::at_alpha(0.05, 1.0, 1.0, Convention::MNormalized).unwrap();
        let sys = CoeffSystem::for_solution(&tame, Mode::PaperLiteral).unwrap();
        assert!(sys.secular_indicator().unwrap() < SECULAR_INDICATOR_THRESHOLD);
        let part = particular_solution(&sys, &tame).unwrap();
        let b0: [Complex64; 4] = (part.c * Complex64::new(1.3, 0.2)).into();
        let om = tame.omega_big;
        let dt = (2.0 * std::f64::consts::PI / om) / 200.0;
        let t_slow = 2.0 * std::f64::consts::PI / (3.0 * 0.05 * om);
        let traj = integrate_flow(&tame, Mode::PaperLiteral, b0, (0.0, 2.0 * t_slow), dt).unwrap();
        let scale = part.c.norm();
        let sup = traj
            .iter()
            .flat_map(|s| s.b.iter().map(|z| z.norm()))
            .fold(0.0f64, f64::max);
        assert!(
            sup < 10.0 * scale,
            "bounded flow exceeded {sup} vs scale {scale}"
        );

        // beyond it, growth at rate Omega * max Im nu
        let wild = MeanFieldSolution::at_alpha(0.2, 1.0, 1.0, Convention::MNormalized).unwrap();
        let sys2 = CoeffSystem::for_solution(&wild, Mode::PaperLiteral).unwrap();
        assert!(sys2.secular_indicator().unwrap() > SECULAR_INDICATOR_THRESHOLD);
        let dt2 = (2.0 * std::f64::consts::PI / wild.omega_big) / 200.0;
        let traj2 = integrate_flow(&wild, Mode::PaperLiteral, b0, (0.0, 20.0), dt2).unwrap();
        let first = traj2
            .first()
            .unwrap()
            .b
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        let last = traj2
            .last()
            .unwrap()
            .b
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(
            last / first > 1e4,
            "secular flow grew only {}x",
            last / first
        );
    }

    #[test]
    fn mode_discrepancy_report() {
        let d = compare_modes(1e-4).unwrap();
        assert_eq!(d.source_factors, [1.0, 3.0, 3.0, 1.0]);
        assert_eq!(d.matrix_diffs.len(), 1);
        let (r, c, p, e) = d.matrix_diffs[0];
        assert_eq!((r, c), (3, 3));
        assert_relative_eq!(p, -6.0, epsilon = 1e-9);
        assert_relative_eq!(e, 9.0, epsilon = 1e-9);
        assert!(d.alpha_crit_paper.is_some());
        assert!(d.alpha_crit_engine.is_none());
    }

    #[test]
    fn csv_has_pinned_header_and_17_digits() {
        let rep = stability_sweep(Mode::PaperLiteral, 0.0, 0.05, 3).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "alpha,re_nu1,im_nu1,re_nu2,im_nu2,re_nu3,im_nu3,re_nu4,im_nu4"
        );
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 9);
        assert!(first.starts_with("0.0000000000000000e0"));
    }
}
