//! Independent ground truth: dense diagonalization of the oscillator in the
//! bare-frequency number basis, Heisenberg evolution through the exact
//! spectrum, and the classical Duffing trajectory with period extraction.
//!
//! Everything here deliberately avoids the symbolic engine and the dressed
//! mode: ladder matrices are assembled directly, the Hamiltonian is the true
//! projection onto the truncated basis (built with padding, then cut), and
//! the classical run integrates the plain equation of motion.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fock::FockMatrix;
use crate::jsonfmt;
use crate::linalg;
use crate::meanfield::{MeanFieldSolution, PhysParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Number of low-lying levels tracked per truncation size.
pub const TRACKED_LEVELS: usize = 10;
/// Level convergence gate between the two largest truncations.
pub const CONVERGENCE_TOL: f64 = 1e-8;

fn ladder(dim: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 0..dim - 1 {
        a[(n, n + 1)] = ((n + 1) as f64).sqrt();
    }
    a
}

/// True projection of H onto the first `dim` number states: operators are
/// multiplied at dim + 4 where the products are still exact on the interior,
/// then cut back.
pub fn hamiltonian_matrix(params: &PhysParams, dim: usize) -> DMatrix<f64> {
    let padded = dim + 4;
    let a = ladder(padded);
    let x = a.transpose() - &a; // adag - a
    let y = a.transpose() + &a; // adag + a
                                // H = (omega/4)(Y^2 - X^2) + (lambda / (16 m omega^2)) Y^4
    let y2 = &y * &y;
    let h = (&y2 - &x * &x) * (params.omega / 4.0)
        + (&y2 * &y2) * (params.lambda / (16.0 * params.m * params.omega * params.omega));
    h.view((0, 0), (dim, dim)).into_owned()
}

/// Sorted spectrum of the lowest levels across increasing truncations.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub dims: Vec<usize>,
    /// Lowest [`TRACKED_LEVELS`] eigenvalues per truncation.
    pub energies: Vec<Vec<f64>>,
    /// Per-level: change below [`CONVERGENCE_TOL`] between the two largest dims.
    pub converged: Vec<bool>,
}

impl SpectrumResult {
    pub fn ground_energy(&self) -> f64 {
        self.energies.last().map(|e| e[0]).unwrap_or(f64::NAN)
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn to_json(&self) -> String {
        let dims = self
            .dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let energies = self
            .energies
            .iter()
            .map(|row| {
                format!(
                    "[{}]",
                    row.iter()
                        .map(|&x| jsonfmt::f64_repr(x))
                        .collect::<Vec<_>>()
                        .join(",")
                )
            })
            .collect::<Vec<_>>()
            .join(",");
        let converged = self
            .converged
            .iter()
            .map(|&b| if b { "true" } else { "false" })
            .collect::<Vec<_>>()
            .join(",");
        format!("{{\"converged\":[{converged}],\"dims\":[{dims}],\"energies\":[{energies}]}}")
    }
}

/// Dense diagonalization in the bare basis at each truncation in `dims`.
pub fn exact_diagonalize(params: &PhysParams, dims: &[usize]) -> Result<SpectrumResult> {
    if dims.is_empty() || dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::InvalidParams(
            "dims must be strictly increasing".into(),
        ));
    }
    if *dims.last().unwrap() > 512 {
        return Err(CoreError::InvalidParams("max truncation is 512".into()));
    }
    if dims[0] < TRACKED_LEVELS + 2 {
        return Err(CoreError::InvalidParams(format!(
            "smallest truncation must exceed {}",
            TRACKED_LEVELS + 2
        )));
    }
    let mut energies = Vec::with_capacity(dims.len());
    for &dim in dims {
        let h = hamiltonian_matrix(params, dim);
        let (vals, _) = linalg::eigh_real(&h);
        energies.push(
            vals.iter()
                .take(TRACKED_LEVELS)
                .copied()
                .collect::<Vec<f64>>(),
        );
    }
    let converged = if dims.len() >= 2 {
        let last = &energies[energies.len() - 1];
        let prev = &energies[energies.len() - 2];
        last.iter()
            .zip(prev)
            .map(|(a, b)| (a - b).abs() < CONVERGENCE_TOL)
            .collect()
    } else {
        vec![false; TRACKED_LEVELS]
    };
    Ok(SpectrumResult {
        dims: dims.to_vec(),
        energies,
        converged,
    })
}

/// Eigendecomposition of the projected Hamiltonian, reused across
/// evolutions at the same truncation.
#[derive(Debug, Clone)]
pub struct HamiltonianEigen {
    pub dim: usize,
    pub energies: DMatrix<f64>,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<Complex64>,
}

pub fn hamiltonian_eigen(params: &PhysParams, dim: usize) -> HamiltonianEigen {
    let h = hamiltonian_matrix(params, dim);
    let (vals, vecs) = linalg::eigh_real(&h);
    HamiltonianEigen {
        dim,
        energies: DMatrix::from_diagonal(&vals),
        eigvals: vals.iter().copied().collect(),
        eigvecs: vecs.map(|x| Complex64::new(x, 0.0)),
    }
}

/// e^{i H t} op e^{-i H t} through the eigendecomposition.
pub fn heisenberg_evolve(eig: &HamiltonianEigen, op: &FockMatrix, t: f64) -> Result<FockMatrix> {
    if eig.dim != op.dim() {
        return Err(CoreError::DimMismatch(eig.dim, op.dim()));
    }
    let n = eig.dim;
    let mut phased = eig.eigvecs.clone();
    for j in 0..n {
        let ph = (I * eig.eigvals[j] * t).exp();
        for i in 0..n {
            phased[(i, j)] *= ph;
        }
    }
    let u_t = &phased * eig.eigvecs.adjoint(); // e^{iHt}
    let unitarity = (&u_t * u_t.adjoint() - DMatrix::<Complex64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if unitarity > 1e-10 {
        return Err(CoreError::CheckFailed {
            what: "evolution unitarity defect".into(),
            value: unitarity,
            bound: 1e-10,
        });
    }
    FockMatrix::from_dmatrix(&u_t * op.data() * u_t.adjoint())
}

/// The dressed generator realized in the bare basis from scalars and matrix
/// powers only: a(t) = u*(t) P + v*(t) Q and
/// A(t) = a(t) + m lambda sum_k b_k(t) adag(t)^{3-k} a(t)^k.
/// Fully independent of the symbolic engine's `to_matrix`.
pub fn generator_matrix_bare(
    sol: &MeanFieldSolution,
    c: &[Complex64; 4],
    t: f64,
    dim: usize,
) -> FockMatrix {
    let prm = sol.params;
    let a = ladder(dim);
    let q = (a.transpose() + &a).map(|x| Complex64::new(x / (2.0 * prm.m * prm.omega).sqrt(), 0.0));
    let p = (a.transpose() - &a).map(|x| Complex64::new(0.0, x * (prm.m * prm.omega / 2.0).sqrt()));
    let mv = sol.mode_at(t);
    let a_mode = &p * mv.u.conj() + &q * mv.v.conj();
    let adag_mode = &p * mv.u + &q * mv.v;
    let ml = Complex64::new(prm.m * prm.lambda, 0.0);
    let mut out = a_mode.clone();
    for k in 0..4usize {
        let b_k = c[k] * (I * (4.0 - 2.0 * k as f64) * sol.omega_big * t).exp();
        let mut term = DMatrix::<Complex64>::identity(dim, dim);
        for _ in 0..(3 - k) {
            term = &term * &adag_mode;
        }
        for _ in 0..k {
            term = &term * &a_mode;
        }
        out += term * (ml * b_k);
    }
    FockMatrix::from_dmatrix(out).expect("square by construction")
}

/// One classical trajectory with extracted period.
#[derive(Debug, Clone)]
pub struct ClassicalRun {
    pub q0: f64,
    pub p0: f64,
    pub dt: f64,
    pub samples: Vec<(f64, f64, f64)>,
    pub period: f64,
    pub energy_drift: f64,
}

impl ClassicalRun {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t,q,p")?;
        for &(t, q, p) in &self.samples {
            writeln!(
                w,
                "{},{},{}",
                jsonfmt::f64_repr(t),
                jsonfmt::f64_repr(q),
                jsonfmt::f64_repr(p)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ClassicalFrequency {
    pub numeric: f64,
    pub first_order: f64,
    pub run: ClassicalRun,
}

const DRIFT_BOUND: f64 = 1e-8;

/// Integrate q'' + omega^2 q + lambda q^3 = 0 from (amplitude, 0) and read
/// the frequency off successive positive-going zero crossings with sub-step
/// linear interpolation. The first-order companion is the Lindstedt shift
/// omega (1 + 3 lambda a^2 / (8 omega^2)).
pub fn classical_frequency(params: &PhysParams, amplitude: f64) -> Result<ClassicalFrequency> {
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(CoreError::InvalidParams(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    let w = params.omega;
    let lam = params.lambda;
    if lam * amplitude * amplitude > 50.0 * w * w {
        return Err(CoreError::InvalidParams(
            "lambda * amplitude^2 beyond the step-resolution bound".into(),
        ));
    }
    let first_order = w * (1.0 + 3.0 * lam * amplitude * amplitude / (8.0 * w * w));
    let t_est = 2.0 * std::f64::consts::PI / first_order;
    let dt = t_est / 2000.0;
    let accel = |q: f64| -w * w * q - lam * q * q * q;
    let energy = |q: f64, p: f64| 0.5 * p * p + 0.5 * w * w * q * q + 0.25 * lam * q.powi(4);

    let (mut q, mut p) = (amplitude, 0.0);
    let e0 = energy(q, p);
    let mut t = 0.0;
    let mut drift = 0.0f64;
    let mut crossings: Vec<f64> = Vec::new();
    let mut samples = Vec::new();
    let steps = (3.2 * t_est / dt).ceil() as usize;
    samples.push((t, q, p));
    for _ in 0..steps {
        let (q_prev, _p_prev, t_prev) = (q, p, t);
        // classic fourth-order step on (q, p)
        let k1 = (p, accel(q));
        let k2 = (p + 0.5 * dt * k1.1, accel(q + 0.5 * dt * k1.0));
        let k3 = (p + 0.5 * dt * k2.1, accel(q + 0.5 * dt * k2.0));
        let k4 = (p + dt * k3.1, accel(q + dt * k3.0));
        q += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        p += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        t += dt;
        samples.push((t, q, p));
        drift = drift.max((energy(q, p) - e0).abs() / e0.abs());
        if q_prev < 0.0 && q >= 0.0 {
            crossings.push(t_prev + dt * (-q_prev) / (q - q_prev));
        }
    }
    if drift > DRIFT_BOUND {
        return Err(CoreError::EnergyDrift {
            drift,
            bound: DRIFT_BOUND,
        });
    }
    if crossings.len() < 2 {
        return Err(CoreError::InvalidParams(
            "too few zero crossings for a period".into(),
        ));
    }
    let periods: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let period = periods.iter().sum::<f64>() / periods.len() as f64;
    Ok(ClassicalFrequency {
        numeric: 2.0 * std::f64::consts::PI / period,
        first_order,
        run: ClassicalRun {
            q0: amplitude,
            p0: 0.0,
            dt,
            samples,
            period,
            energy_drift: drift,
        },
    })
}

/// Mean-field vs classical frequency shift at the quantum amplitude
/// identification a^2 = 2 |u|^2 = 1/(m Omega). The ratio is reported, not
/// gated; the amplitude identification itself is a convention.
#[derive(Debug, Clone)]
pub struct ClassicalComparison {
    pub meanfield_shift: f64,
    pub classical_shift_first_order: f64,
    pub classical_numeric: f64,
    pub classical_first_order: f64,
    pub amplitude: f64,
    pub shift_ratio: f64,
}

impl ClassicalComparison {
    pub fn to_json(&self) -> String {
        use crate::jsonfmt::f64_repr as f;
        format!(
            "{{\"amplitude\":{},\"classical_first_order\":{},\"classical_numeric\":{},\"classical_shift_first_order\":{},\"meanfield_shift\":{},\"shift_ratio\":{}}}",
            f(self.amplitude),
            f(self.classical_first_order),
            f(self.classical_numeric),
            f(self.classical_shift_first_order),
            f(self.meanfield_shift),
            f(self.shift_ratio),
        )
    }
}

pub fn classical_comparison(sol: &MeanFieldSolution) -> Result<ClassicalComparison> {
    let prm = sol.params;
    let amplitude = (1.0 / (prm.m * sol.omega_big)).sqrt();
    let cf = classical_frequency(&prm, amplitude)?;
    let meanfield_shift = sol.omega_big - prm.omega;
    let classical_shift = 3.0 * prm.lambda * amplitude * amplitude / (8.0 * prm.omega);
    Ok(ClassicalComparison {
        meanfield_shift,
        classical_shift_first_order: classical_shift,
        classical_numeric: cf.numeric,
        classical_first_order: cf.first_order,
        amplitude,
        shift_ratio: if classical_shift != 0.0 {
            meanfield_shift / classical_shift
        } else {
            f64::NAN
        },
    })
}
