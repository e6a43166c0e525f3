//! Quantum states, single-site observables, and projective measurement.

use std::sync::Arc;

use crate::error::{MerlError, MerlResult};
use crate::linalg::{
    self, apply_local, hermitian_eig_grouped, partial_trace, reduced_site_from_vector,
    sandwich_local, trace_product, CMatrix, CVector, Register, SpectralEntry, C64,
    DEFAULT_GROUP_TOL,
};

/// Branches whose probability falls below this are pruned.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-12;

const NORM_TOL: f64 = 1e-10;
const NEG_EIG_TOL: f64 = 1e-9;
const IMAG_TOL: f64 = 1e-9;
const VARIANCE_CLAMP: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum StateForm {
    /// Normalized amplitude vector.
    Pure(CVector),
    /// Density matrix.
    Mixed(CMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    reg: Register,
    form: StateForm,
}

impl QuantumState {
    /// Pure state from amplitudes that must already be normalized.
    pub fn pure(reg: Register, amplitudes: CVector) -> MerlResult<Self> {
        check_len(&reg, amplitudes.len())?;
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(MerlError::InvalidState(format!("amplitude norm² is {norm2}, expected 1")));
        }
        Ok(Self { reg, form: StateForm::Pure(amplitudes) })
    }

    /// Pure state from arbitrary nonzero amplitudes, rescaled to unit norm.
    pub fn pure_normalized(reg: Register, amplitudes: CVector) -> MerlResult<Self> {
        check_len(&reg, amplitudes.len())?;
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(MerlError::InvalidState("amplitudes have zero or non-finite norm".into()));
        }
        Ok(Self { reg, form: StateForm::Pure(amplitudes.unscale(norm)) })
    }

    /// Computational basis state with the given per-site digits.
    pub fn basis(reg: Register, digits: &[usize]) -> MerlResult<Self> {
        let idx = reg.index_of(digits)?;
        let mut v = CVector::zeros(reg.total_dim());
        v[idx] = C64::new(1.0, 0.0);
        Ok(Self { reg, form: StateForm::Pure(v) })
    }

    /// Density-matrix state; must be Hermitian, unit trace and positive
    /// semidefinite within tolerance.
    pub fn mixed(reg: Register, rho: CMatrix) -> MerlResult<Self> {
        let n = reg.total_dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(MerlError::DimensionMismatch(format!(
                "density matrix is {}x{} but register dimension is {n}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if !linalg::is_hermitian(&rho) {
            return Err(MerlError::InvalidState("density matrix is not Hermitian".into()));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(MerlError::InvalidState(format!("density matrix trace is {tr}, expected 1")));
        }
        let min_eig = (&rho + rho.adjoint())
            .scale(0.5)
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x));
        if min_eig < -NEG_EIG_TOL {
            return Err(MerlError::InvalidState(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { reg, form: StateForm::Mixed(rho) })
    }

    pub fn register(&self) -> &Register {
        &self.reg
    }

    pub fn form(&self) -> &StateForm {
        &self.form
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.form, StateForm::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&CVector> {
        match &self.form {
            StateForm::Pure(v) => Some(v),
            StateForm::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.form {
            StateForm::Pure(v) => v * v.adjoint(),
            StateForm::Mixed(rho) => rho.clone(),
        }
    }

    /// Same state carried as a density matrix.
    pub fn to_mixed(&self) -> Self {
        Self { reg: self.reg.clone(), form: StateForm::Mixed(self.density_matrix()) }
    }

    /// Reduced density matrix on `keep`.
    pub fn reduced(&self, keep: &[usize]) -> MerlResult<CMatrix> {
        if let ([site], StateForm::Pure(v)) = (keep, &self.form) {
            self.reg.check_site(*site)?;
            return Ok(reduced_site_from_vector(v, *site, &self.reg));
        }
        partial_trace(&self.density_matrix(), &self.reg, keep)
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &QuantumState) -> QuantumState {
        let reg = self.reg.concat(&other.reg);
        let form = match (&self.form, &other.form) {
            (StateForm::Pure(a), StateForm::Pure(b)) => StateForm::Pure(a.kronecker(b)),
            _ => StateForm::Mixed(linalg::kron(&self.density_matrix(), &other.density_matrix())),
        };
        QuantumState { reg, form }
    }

    fn check_register(&self, reg: &Register) -> MerlResult<()> {
        if &self.reg == reg {
            Ok(())
        } else {
            Err(MerlError::RegisterMismatch {
                left: reg.dims().to_vec(),
                right: self.reg.dims().to_vec(),
            })
        }
    }
}

fn check_len(reg: &Register, len: usize) -> MerlResult<()> {
    if len == reg.total_dim() {
        Ok(())
    } else {
        Err(MerlError::DimensionMismatch(format!(
            "{len} amplitudes for register {:?} of dimension {}",
            reg.dims(),
            reg.total_dim()
        )))
    }
}

/// Hermitian operator acting on one site of a register, with its grouped
/// spectral decomposition cached.
#[derive(Clone, Debug)]
pub struct Observable {
    reg: Register,
    site: usize,
    matrix: CMatrix,
    spectrum: Arc<[SpectralEntry]>,
}

impl Observable {
    pub fn new(reg: &Register, site: usize, matrix: CMatrix) -> MerlResult<Self> {
        Self::with_group_tol(reg, site, matrix, DEFAULT_GROUP_TOL)
    }

    pub fn with_group_tol(
        reg: &Register,
        site: usize,
        matrix: CMatrix,
        group_tol: f64,
    ) -> MerlResult<Self> {
        let d = reg.dim(site)?;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(MerlError::DimensionMismatch(format!(
                "observable is {}x{} but site {site} has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let spectrum = hermitian_eig_grouped(&matrix, group_tol)?;
        Ok(Self { reg: reg.clone(), site, matrix, spectrum: spectrum.into() })
    }

    /// The same local operator placed on another site of the register.
    pub fn at_site(&self, site: usize) -> MerlResult<Self> {
        let d = self.reg.dim(site)?;
        if d != self.matrix.nrows() {
            return Err(MerlError::DimensionMismatch(format!(
                "cannot move a {d0}x{d0} observable to site {site} of dimension {d}",
                d0 = self.matrix.nrows()
            )));
        }
        Ok(Self { site, ..self.clone() })
    }

    pub fn register(&self) -> &Register {
        &self.reg
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &[SpectralEntry] {
        &self.spectrum
    }

    pub fn embedded(&self) -> CMatrix {
        linalg::embed(&self.matrix, self.site, &self.reg).expect("observable validated at construction")
    }
}

/// One outcome of a projective measurement.
#[derive(Clone, Debug)]
pub struct OutcomeBranch {
    pub eigenvalue: f64,
    pub probability: f64,
    /// Lüders post-measurement state; `None` when the branch was pruned.
    pub post_state: Option<QuantumState>,
}

impl OutcomeBranch {
    pub fn is_pruned(&self) -> bool {
        self.post_state.is_none()
    }
}

/// `(⟨Q⟩, ⟨Q²⟩)` evaluated on the reduced state of the observable's site.
fn moments(q: &Observable, s: &QuantumState) -> MerlResult<(f64, f64)> {
    s.check_register(&q.reg)?;
    let rho = s.reduced(&[q.site])?;
    let m1 = trace_product(&rho, &q.matrix);
    let m2 = trace_product(&rho, &(&q.matrix * &q.matrix));
    let scale = 1.0 + linalg::max_abs(&q.matrix).powi(2);
    if m1.im.abs() > IMAG_TOL * scale || m2.im.abs() > IMAG_TOL * scale {
        return Err(MerlError::Numeric(format!(
            "expectation has imaginary residue ({:.3e}, {:.3e})",
            m1.im, m2.im
        )));
    }
    Ok((m1.re, m2.re))
}

/// `Tr(ρ Q)`.
pub fn expectation(q: &Observable, s: &QuantumState) -> MerlResult<f64> {
    moments(q, s).map(|(m1, _)| m1)
}

/// `Tr(ρ Q²) − Tr(ρ Q)²`, clamped at zero for tiny negative round-off.
pub fn variance(q: &Observable, s: &QuantumState) -> MerlResult<f64> {
    let (m1, m2) = moments(q, s)?;
    let v = m2 - m1 * m1;
    if v >= 0.0 {
        Ok(v)
    } else if v >= -VARIANCE_CLAMP * (1.0 + m2.abs()) {
        Ok(0.0)
    } else {
        Err(MerlError::Numeric(format!("negative variance {v:.3e}")))
    }
}

/// Projective measurement of `o` with the default pruning threshold.
pub fn measure_branches(o: &Observable, s: &QuantumState) -> MerlResult<Vec<OutcomeBranch>> {
    measure_branches_with(o, s, DEFAULT_PRUNE_TOL)
}

/// Projective measurement of `o`, one branch per grouped eigenvalue.
///
/// Each branch carries `p_j = Tr(Π_j ρ Π_j)` and, unless `p_j < prune_tol`,
/// the Lüders post-state `Π_j ρ Π_j / p_j`. Pure inputs stay pure.
pub fn measure_branches_with(
    o: &Observable,
    s: &QuantumState,
    prune_tol: f64,
) -> MerlResult<Vec<OutcomeBranch>> {
    s.check_register(&o.reg)?;
    let branches = o
        .spectrum
        .iter()
        .map(|entry| {
            let (probability, post) = match &s.form {
                StateForm::Pure(v) => {
                    let projected = apply_local(v, &entry.projector, o.site, &s.reg);
                    let p = projected.norm_squared();
                    (p, (p >= prune_tol).then(|| StateForm::Pure(projected.unscale(p.sqrt()))))
                }
                StateForm::Mixed(rho) => {
                    let projected = sandwich_local(rho, &entry.projector, o.site, &s.reg);
                    let p = projected.trace().re;
                    (p, (p >= prune_tol).then(|| StateForm::Mixed(projected.unscale(p))))
                }
            };
            OutcomeBranch {
                eigenvalue: entry.eigenvalue,
                probability: probability.max(0.0),
                post_state: post.map(|form| QuantumState { reg: s.reg.clone(), form }),
            }
        })
        .collect();
    Ok(branches)
}

/// Both sides of the product-form uncertainty relation
/// `V(R)V(S) ≥ ¼|⟨[R,S]⟩|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobertsonTerms {
    /// `V(R)·V(S)`
    pub lhs: f64,
    /// `¼|⟨[R,S]⟩|²`
    pub rhs: f64,
}

pub fn robertson_check(r: &Observable, s: &Observable, st: &QuantumState) -> MerlResult<RobertsonTerms> {
    if r.reg != s.reg {
        return Err(MerlError::RegisterMismatch {
            left: r.reg.dims().to_vec(),
            right: s.reg.dims().to_vec(),
        });
    }
    let lhs = variance(r, st)? * variance(s, st)?;
    // operators on different sites commute
    let rhs = if r.site == s.site {
        let comm = &r.matrix * &s.matrix - &s.matrix * &r.matrix;
        let rho = st.reduced(&[r.site])?;
        0.25 * trace_product(&rho, &comm).norm_sqr()
    } else {
        0.0
    };
    Ok(RobertsonTerms { lhs, rhs })
}
