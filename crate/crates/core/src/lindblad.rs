//! Rotating-frame Hamiltonians, Lindblad generators and their steady-state
//! and time-domain solutions.
//!
//! Density matrices are vectorized column-major, `vec(ρ)[i + j·n] = ρ_ij`,
//! matching nalgebra's storage order, so `L · vec(ρ) = vec(dρ/dt)`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::{residual_wavevector, LadderScheme};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_FLOOR: f64 = -1e-9;
/// Minimum relative gap σ_{n−2}/σ_max for the null space of L to count as one-dimensional.
pub const UNIQUENESS_GAP: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-9;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest entry modulus of a complex matrix or vector.
pub fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<Complex64, R, C>>(
    m: &nalgebra::Matrix<Complex64, R, C, S>,
) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Incoherent population pump `source → target` (black-body transfer,
/// state-changing collisions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncoherentTransfer {
    pub source: usize,
    pub target: usize,
    /// s⁻¹
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// All population in `level`.
    pub fn pure(dim: usize, level: usize) -> Self {
        let mut entries = DMatrix::zeros(dim, dim);
        entries[(level, level)] = Complex64::new(1.0, 0.0);
        DensityMatrix { entries }
    }

    pub fn from_matrix(entries: DMatrix<Complex64>) -> Self {
        assert!(entries.is_square(), "density matrix must be square");
        DensityMatrix { entries }
    }

    /// Hermitian part of the matrix unpacked from a column-major vector.
    pub fn from_vectorized(v: &DVector<Complex64>, dim: usize) -> Self {
        let m = DMatrix::from_column_slice(dim, dim, v.as_slice());
        let entries = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        DensityMatrix { entries }
    }

    pub fn vectorized(&self) -> DVector<Complex64> {
        DVector::from_column_slice(self.entries.as_slice())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn population(&self, level: usize) -> f64 {
        self.entries[(level, level)].re
    }

    /// ρ_ij = ⟨i|ρ|j⟩
    pub fn coherence(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Checks Hermiticity, unit trace and the positivity floor.
    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if !(herm <= HERMITICITY_TOL) {
            return Err(Error::Solver(format!("density matrix not Hermitian (error {herm:.3e})")));
        }
        let tr = self.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOL && tr.im.abs() <= TRACE_TOL) {
            return Err(Error::Solver(format!("density matrix trace {tr} differs from 1")));
        }
        let min_ev = self.min_eigenvalue();
        if !(min_ev >= POSITIVITY_FLOOR) {
            return Err(Error::Solver(format!(
                "density matrix has negative eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(())
    }

    /// ½‖ρ − σ‖₁
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.entries - &other.entries;
        let herm = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
        0.5 * herm.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    matrix: DMatrix<Complex64>,
}

impl Liouvillian {
    pub fn from_matrix(dim: usize, matrix: DMatrix<Complex64>) -> Self {
        assert_eq!(matrix.nrows(), dim * dim);
        assert_eq!(matrix.ncols(), dim * dim);
        Liouvillian { dim, matrix }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DMatrix<Complex64> {
        let v = &self.matrix * rho.vectorized();
        DMatrix::from_column_slice(self.dim, self.dim, v.as_slice())
    }

    /// Largest |d Tr ρ / d vec(ρ)_m| over columns, relative to max |L|.
    pub fn trace_defect(&self) -> f64 {
        let n = self.dim;
        let scale = max_abs(&self.matrix).max(f64::MIN_POSITIVE);
        (0..n * n)
            .map(|col| {
                (0..n)
                    .map(|k| self.matrix[(k + k * n, col)])
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
            / scale
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i + j * self.dim
    }

    fn add_collapse(&mut self, source: usize, target: usize, rate: f64) {
        if rate == 0.0 {
            return;
        }
        let n = self.dim;
        let (tt, ss) = (self.idx(target, target), self.idx(source, source));
        self.matrix[(tt, ss)] += rate;
        for k in 0..n {
            let a = self.idx(source, k);
            self.matrix[(a, a)] -= 0.5 * rate;
            let b = self.idx(k, source);
            self.matrix[(b, b)] -= 0.5 * rate;
        }
    }

    fn add_dephasing(&mut self, level: usize, rate: f64) {
        if rate == 0.0 {
            return;
        }
        for k in 0..self.dim {
            if k != level {
                let a = self.idx(level, k);
                self.matrix[(a, a)] -= rate;
                let b = self.idx(k, level);
                self.matrix[(b, b)] -= rate;
            }
        }
    }
}

/// Rotating-frame Hamiltonian (units of ħ, rad/s) for an atom moving at
/// `velocity` along the beam axis.
///
/// Diagonal: `H_jj = −(Σ Δ − k_res,j·v)` summed along the chain to level j,
/// so with zero velocity and no coupling the diagonal is minus the cumulative
/// detunings. Off-diagonal: `Ω/2` on each driven pair.
pub fn build_hamiltonian(scheme: &LadderScheme, velocity: f64) -> DMatrix<Complex64> {
    let n = scheme.dim();
    let cum = scheme.cumulative_detunings();
    let kres = residual_wavevector(scheme);
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        h[(j, j)] = Complex64::new(-(cum[j] - kres[j] * velocity), 0.0);
    }
    for d in &scheme.drives {
        let half = Complex64::new(0.5 * d.rabi, 0.0);
        h[(d.lower, d.upper)] += half;
        h[(d.upper, d.lower)] += half;
    }
    h
}

/// Generator `dρ/dt = −i[H, ρ] + Σ D[C]ρ` with collapse channels from the
/// scheme's decay branches, transit loss, incoherent transfers (scheme and
/// `extra`) and per-level pure dephasing.
///
/// A level's `extra_dephasing` γ adds γ to the decay rate of every coherence
/// involving that level (collapse operator √(2γ)|k⟩⟨k|).
pub fn build_liouvillian(
    h: &DMatrix<Complex64>,
    scheme: &LadderScheme,
    extra: &[IncoherentTransfer],
) -> Liouvillian {
    let n = h.nrows();
    debug_assert_eq!(n, scheme.dim());
    let mut l = Liouvillian {
        dim: n,
        matrix: DMatrix::zeros(n * n, n * n),
    };

    // −i(Hρ − ρH)_ij = −i Σ_m (H_im ρ_mj − ρ_im H_mj)
    for i in 0..n {
        for j in 0..n {
            let row = l.idx(i, j);
            for m in 0..n {
                let him = h[(i, m)];
                if him != Complex64::new(0.0, 0.0) {
                    let col = l.idx(m, j);
                    l.matrix[(row, col)] += -I * him;
                }
                let hmj = h[(m, j)];
                if hmj != Complex64::new(0.0, 0.0) {
                    let col = l.idx(i, m);
                    l.matrix[(row, col)] += I * hmj;
                }
            }
        }
    }

    for (s, level) in scheme.levels.iter().enumerate() {
        for b in &level.decays {
            l.add_collapse(s, b.target, b.rate);
        }
        l.add_dephasing(s, level.extra_dephasing);
        if s != 0 {
            l.add_collapse(s, 0, scheme.cell.transit_rate);
        }
    }
    for t in scheme.transfers.iter().chain(extra) {
        l.add_collapse(t.source, t.target, t.rate);
    }
    l
}

/// Unique trace-one solution of `Lρ = 0`.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    let svd = l.matrix.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let largest = sv[0].max(f64::MIN_POSITIVE);
    let gap = sv[sv.len().saturating_sub(2)] / largest;
    if !(gap > UNIQUENESS_GAP) {
        return Err(Error::DegenerateNullSpace {
            gap,
            threshold: UNIQUENESS_GAP,
        });
    }
    steady_state_unchecked(l)
}

/// [`steady_state`] without the singular-value uniqueness test; a singular
/// bordered system still reports an error.
pub fn steady_state_unchecked(l: &Liouvillian) -> Result<DensityMatrix> {
    let n = l.dim;
    let mut a = l.matrix.clone();
    // Replace the dρ_00/dt equation (redundant by trace preservation) with Tr ρ = 1.
    for c in 0..n * n {
        a[(0, c)] = Complex64::new(0.0, 0.0);
    }
    for k in 0..n {
        a[(0, k + k * n)] = Complex64::new(1.0, 0.0);
    }
    let mut b = DVector::zeros(n * n);
    b[0] = Complex64::new(1.0, 0.0);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Solver("bordered steady-state system is singular".into()))?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Solver("steady-state solve produced non-finite values".into()));
    }
    let rho = DensityMatrix::from_vectorized(&x, n);
    let residual = max_abs(&(&l.matrix * rho.vectorized()));
    let scale = max_abs(&l.matrix);
    if residual > RESIDUAL_TOL * scale {
        return Err(Error::Solver(format!(
            "steady-state residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}·‖L‖"
        )));
    }
    rho.check()?;
    Ok(rho)
}

/// Builds the generator for `scheme` at `velocity` and returns its steady state.
pub fn solve_steady(
    scheme: &LadderScheme,
    velocity: f64,
    extra: &[IncoherentTransfer],
) -> Result<DensityMatrix> {
    let h = build_hamiltonian(scheme, velocity);
    steady_state(&build_liouvillian(&h, scheme, extra))
}

/// Exact one-step propagator `exp(L·dt)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    matrix: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(l: &Liouvillian, dt: f64) -> Result<Self> {
        let scaled = &l.matrix * Complex64::new(dt, 0.0);
        let matrix = scaled.exp();
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::StepFailure {
                start: 0.0,
                end: dt,
                reason: "matrix exponential overflowed".into(),
            });
        }
        Ok(Propagator { dim: l.dim, matrix })
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// States at each requested time, with `rho0` taken at t = 0.
///
/// Every interval is propagated with the exact matrix exponential of `L`, so
/// stiffness does not constrain the step size.
pub fn time_evolve(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Vec<DensityMatrix>> {
    if rho0.dim() != l.dim {
        return Err(Error::validation("initial state dimension does not match generator"));
    }
    rho0.check()?;
    let mut out = Vec::with_capacity(times.len());
    let mut cache: HashMap<u64, Propagator> = HashMap::new();
    let mut v = rho0.vectorized();
    let mut t_prev = 0.0;
    for &t in times {
        if !(t >= t_prev) || (t == t_prev && !out.is_empty()) {
            return Err(Error::validation(format!(
                "times must be non-negative and strictly increasing (got {t} after {t_prev})"
            )));
        }
        let dt = t - t_prev;
        if dt > 0.0 {
            let prop = match cache.entry(dt.to_bits()) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(Propagator::new(l, dt).map_err(|err| match err {
                        Error::StepFailure { reason, .. } => Error::StepFailure {
                            start: t_prev,
                            end: t,
                            reason,
                        },
                        other => other,
                    })?)
                }
            };
            v = prop.apply(&v);
        }
        let rho = DensityMatrix::from_vectorized(&v, l.dim);
        rho.check().map_err(|e| Error::StepFailure {
            start: t_prev,
            end: t,
            reason: e.to_string(),
        })?;
        out.push(rho);
        t_prev = t;
    }
    Ok(out)
}
