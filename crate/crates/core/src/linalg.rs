//! Dense complex linear algebra over composite (multi-site) registers.
//!
//! All tensor products use one ordering: the first factor is the most
//! significant index block, so a basis index of a register `[d0, d1, …]`
//! reads as the mixed-radix number `(i0 i1 …)` with `i0` the leading digit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{MerlError, MerlResult};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative tolerance for merging (near-)degenerate eigenvalues.
pub const DEFAULT_GROUP_TOL: f64 = 1e-9;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Ordered list of site dimensions defining a composite Hilbert space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Register {
    dims: Vec<usize>,
    total: usize,
}

impl Register {
    pub fn new(dims: Vec<usize>) -> MerlResult<Self> {
        if dims.is_empty() {
            return Err(MerlError::InvalidRegister("register has no sites".into()));
        }
        if let Some((site, &d)) = dims.iter().enumerate().find(|(_, &d)| d < 2) {
            return Err(MerlError::InvalidRegister(format!(
                "site {site} has dimension {d}; every site needs dimension >= 2"
            )));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| MerlError::InvalidRegister("total dimension overflows".into()))?;
        Ok(Self { dims, total })
    }

    /// `n` sites of equal dimension `d`.
    pub fn uniform(n: usize, d: usize) -> MerlResult<Self> {
        Self::new(vec![d; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn dim(&self, site: usize) -> MerlResult<usize> {
        self.check_site(site)?;
        Ok(self.dims[site])
    }

    pub fn check_site(&self, site: usize) -> MerlResult<()> {
        if site < self.dims.len() {
            Ok(())
        } else {
            Err(MerlError::SiteOutOfRange { site, sites: self.dims.len() })
        }
    }

    /// Product of the dimensions strictly after `site`.
    pub fn stride(&self, site: usize) -> usize {
        self.dims[site + 1..].iter().product()
    }

    /// Register of `self` followed by `other`.
    pub fn concat(&self, other: &Register) -> Register {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Register { total: self.total * other.total, dims }
    }

    /// Mixed-radix digits of a basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Basis index of mixed-radix digits. Digits must be in range.
    pub fn index_of(&self, digits: &[usize]) -> MerlResult<usize> {
        if digits.len() != self.dims.len() {
            return Err(MerlError::DimensionMismatch(format!(
                "{} digits for a {}-site register",
                digits.len(),
                self.dims.len()
            )));
        }
        let mut idx = 0;
        for (site, (&x, &d)) in digits.iter().zip(&self.dims).enumerate() {
            if x >= d {
                return Err(MerlError::DimensionMismatch(format!(
                    "digit {x} at site {site} exceeds local dimension {d}"
                )));
            }
            idx = idx * d + x;
        }
        Ok(idx)
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest `|M[i][j] − conj(M[j][i])|`; `INFINITY` for non-square input.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(m: &CMatrix) -> bool {
    hermitian_deviation(m) <= HERMITIAN_TOL * (1.0 + max_abs(m))
}

/// Kronecker product `a ⊗ b`, `a` being the most significant block.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `I ⊗ … ⊗ local ⊗ … ⊗ I` with `local` at `site`.
pub fn embed(local: &CMatrix, site: usize, reg: &Register) -> MerlResult<CMatrix> {
    let d = reg.dim(site)?;
    if local.nrows() != d || local.ncols() != d {
        return Err(MerlError::DimensionMismatch(format!(
            "operator is {}x{} but site {site} has dimension {d}",
            local.nrows(),
            local.ncols()
        )));
    }
    let left: usize = reg.dims()[..site].iter().product();
    let right = reg.stride(site);
    let out = kron(&CMatrix::identity(left, left), local);
    Ok(kron(&out, &CMatrix::identity(right, right)))
}

/// Applies a local operator at `site` to a state vector without forming the
/// embedded matrix.
pub fn apply_local(v: &CVector, local: &CMatrix, site: usize, reg: &Register) -> CVector {
    let d = reg.dims()[site];
    let right = reg.stride(site);
    let block = d * right;
    let mut out = CVector::zeros(v.len());
    for base in (0..v.len()).step_by(block) {
        for r in 0..right {
            for a in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..d {
                    let l = local[(a, b)];
                    if l != C64::new(0.0, 0.0) {
                        acc += l * v[base + b * right + r];
                    }
                }
                out[base + a * right + r] = acc;
            }
        }
    }
    out
}

/// `(I ⊗ local ⊗ I) · m`, acting on the row index of a square operator.
pub fn apply_local_left(m: &CMatrix, local: &CMatrix, site: usize, reg: &Register) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for (j, col) in m.column_iter().enumerate() {
        let col = col.into_owned();
        out.set_column(j, &apply_local(&col, local, site, reg));
    }
    out
}

/// `(I ⊗ p ⊗ I) · m · (I ⊗ p ⊗ I)` for Hermitian `p`.
pub fn sandwich_local(m: &CMatrix, p: &CMatrix, site: usize, reg: &Register) -> CMatrix {
    let left = apply_local_left(m, p, site, reg);
    apply_local_left(&left.adjoint(), p, site, reg).adjoint()
}

/// Reduced operator on `keep` (taken in register order), tracing out the
/// remaining sites.
pub fn partial_trace(m: &CMatrix, reg: &Register, keep: &[usize]) -> MerlResult<CMatrix> {
    if keep.is_empty() {
        return Err(MerlError::EmptyKeepSet);
    }
    let n = reg.total_dim();
    if m.nrows() != n || m.ncols() != n {
        return Err(MerlError::DimensionMismatch(format!(
            "operator is {}x{} but register dimension is {n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    for &s in &kept {
        reg.check_site(s)?;
    }
    let traced: Vec<usize> = (0..reg.num_sites()).filter(|s| !kept.contains(s)).collect();
    let kept_reg_dims: Vec<usize> = kept.iter().map(|&s| reg.dims()[s]).collect();
    let dk: usize = kept_reg_dims.iter().product();
    let dt: usize = traced.iter().map(|&s| reg.dims()[s]).product();

    // full index for every (kept, traced) pair
    let mut full = vec![0usize; dk * dt];
    for (i, slot) in (0..n).map(|i| (i, reg.digits(i))) {
        let mut k = 0;
        for &s in &kept {
            k = k * reg.dims()[s] + slot[s];
        }
        let mut t = 0;
        for &s in &traced {
            t = t * reg.dims()[s] + slot[s];
        }
        full[k * dt + t] = i;
    }

    let mut out = CMatrix::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                acc += m[(full[a * dt + t], full[b * dt + t])];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Reduced density matrix of one site from a state vector, `Tr_{¬site} |v⟩⟨v|`.
pub fn reduced_site_from_vector(v: &CVector, site: usize, reg: &Register) -> CMatrix {
    let d = reg.dims()[site];
    let right = reg.stride(site);
    let block = d * right;
    let mut out = CMatrix::zeros(d, d);
    for base in (0..v.len()).step_by(block) {
        for r in 0..right {
            for a in 0..d {
                let va = v[base + a * right + r];
                for b in 0..d {
                    out[(a, b)] += va * v[base + b * right + r].conj();
                }
            }
        }
    }
    out
}

/// One entry of a grouped spectral decomposition.
#[derive(Clone, Debug)]
pub struct SpectralEntry {
    pub eigenvalue: f64,
    /// Orthogonal projector onto the (merged) eigenspace.
    pub projector: CMatrix,
}

/// Eigendecomposition of a Hermitian matrix with degenerate eigenvalues merged.
///
/// Eigenvalues come out in descending order. Neighbouring eigenvalues closer
/// than `group_tol · (1 + spectral radius)` share one entry whose projector
/// spans the whole merged eigenspace.
pub fn hermitian_eig_grouped(h: &CMatrix, group_tol: f64) -> MerlResult<Vec<SpectralEntry>> {
    if !h.is_square() {
        return Err(MerlError::DimensionMismatch(format!(
            "eigendecomposition of a non-square {}x{} matrix",
            h.nrows(),
            h.ncols()
        )));
    }
    let deviation = hermitian_deviation(h);
    if deviation > HERMITIAN_TOL * (1.0 + max_abs(h)) {
        return Err(MerlError::NotHermitian { deviation });
    }
    // symmetrise away the sub-tolerance skew before handing to the solver
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let radius = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = group_tol * (1.0 + radius);

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if eig.eigenvalues[*g.last().unwrap()] - eig.eigenvalues[i] <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }

    Ok(groups
        .into_iter()
        .map(|g| {
            let eigenvalue = g.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / g.len() as f64;
            let mut projector = CMatrix::zeros(n, n);
            for &i in &g {
                let v = eig.eigenvectors.column(i);
                projector += v * v.adjoint();
            }
            SpectralEntry { eigenvalue, projector }
        })
        .collect())
}

/// `Tr(a · b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Builds a complex matrix from rows of `(re, im)` pairs.
pub fn cmatrix_from_rows(rows: &[Vec<(f64, f64)>]) -> MerlResult<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(MerlError::DimensionMismatch("empty matrix".into()));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
        return Err(MerlError::DimensionMismatch(format!(
            "row {r} has {} entries, expected {ncols}",
            rows[r].len()
        )));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| C64::new(rows[i][j].0, rows[i][j].1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{pauli_x, pauli_y, pauli_z, spin1_z};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        assert_eq!(a.shape(), b.shape());
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn kron_identity_and_sign_rule() {
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4, 4));
        let zz = kron(&pauli_z(), &pauli_z());
        let want = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.), c(-1.), c(-1.), c(1.)]));
        assert_eq!(zz, want);
        let big = kron(&CMatrix::identity(2, 2), &CMatrix::identity(3, 3));
        assert_eq!(big.shape(), (6, 6));
    }

    #[test]
    fn kron_first_factor_is_most_significant() {
        // |1⟩⊗|0⟩ = e_2 in a 2x2 register
        let mut e1 = CMatrix::zeros(2, 1);
        e1[(1, 0)] = c(1.0);
        let mut e0 = CMatrix::zeros(2, 1);
        e0[(0, 0)] = c(1.0);
        let v = kron(&e1, &e0);
        assert_eq!(v[(2, 0)], c(1.0));
    }

    #[test]
    fn embed_places_operator() {
        let reg = Register::new(vec![2, 2]).unwrap();
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(embed(&pauli_z(), 0, &reg).unwrap(), kron(&pauli_z(), &i2));
        assert_eq!(embed(&pauli_z(), 1, &reg).unwrap(), kron(&i2, &pauli_z()));

        let reg3 = Register::uniform(3, 3).unwrap();
        let e = embed(&spin1_z(), 2, &reg3).unwrap();
        assert_eq!(e.shape(), (27, 27));
        assert_eq!(e, kron(&CMatrix::identity(9, 9), &spin1_z()));
        assert_eq!(max_diff(&e, &CMatrix::from_diagonal(&e.diagonal())), 0.0);
    }

    #[test]
    fn embed_rejects_wrong_size() {
        let reg = Register::new(vec![2, 3]).unwrap();
        let err = embed(&pauli_z(), 1, &reg).unwrap_err();
        assert!(matches!(err, MerlError::DimensionMismatch(ref m) if m.contains("site 1")));
        assert!(matches!(embed(&pauli_z(), 5, &reg), Err(MerlError::SiteOutOfRange { .. })));
    }

    #[test]
    fn register_validation() {
        assert!(Register::new(vec![]).is_err());
        assert!(Register::new(vec![2, 1]).is_err());
        let r = Register::new(vec![2, 3, 2]).unwrap();
        assert_eq!(r.total_dim(), 12);
        assert_eq!(r.digits(7), vec![1, 0, 1]);
        assert_eq!(r.index_of(&[1, 0, 1]).unwrap(), 7);
    }

    #[test]
    fn partial_trace_of_bell_is_maximally_mixed() {
        // hand oracle: |Φ+⟩⟨Φ+| has entries 1/2 at (0,0),(0,3),(3,0),(3,3)
        let mut rho = CMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            rho[(i, j)] = c(0.5);
        }
        let reg = Register::uniform(2, 2).unwrap();
        let red = partial_trace(&rho, &reg, &[0]).unwrap();
        assert!(max_diff(&red, &CMatrix::identity(2, 2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_product() {
        let ra = CMatrix::from_row_slice(2, 2, &[c(0.7), C64::new(0.1, 0.2), C64::new(0.1, -0.2), c(0.3)]);
        let rb = CMatrix::from_row_slice(3, 3, &[
            c(0.5), c(0.1), c(0.0),
            c(0.1), c(0.25), c(0.0),
            c(0.0), c(0.0), c(0.25),
        ]);
        let reg = Register::new(vec![2, 3]).unwrap();
        let full = kron(&ra, &rb);
        assert!(max_diff(&partial_trace(&full, &reg, &[0]).unwrap(), &ra) < 1e-15);
        assert!(max_diff(&partial_trace(&full, &reg, &[1]).unwrap(), &rb) < 1e-15);
        assert!(max_diff(&partial_trace(&full, &reg, &[1, 0]).unwrap(), &full) < 1e-15);
        assert_eq!(partial_trace(&full, &reg, &[]), Err(MerlError::EmptyKeepSet));
    }

    #[test]
    fn grouped_spectra() {
        let z = hermitian_eig_grouped(&pauli_z(), DEFAULT_GROUP_TOL).unwrap();
        assert_eq!(z.len(), 2);
        assert_abs_diff_eq!(z[0].eigenvalue, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z[1].eigenvalue, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z[0].projector[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z[1].projector[(1, 1)].re, 1.0, epsilon = 1e-14);

        let id = hermitian_eig_grouped(&CMatrix::identity(4, 4), DEFAULT_GROUP_TOL).unwrap();
        assert_eq!(id.len(), 1);
        assert!(max_diff(&id[0].projector, &CMatrix::identity(4, 4)) < 1e-12);

        let s = pauli_x() + pauli_y() + pauli_z();
        let e = hermitian_eig_grouped(&s, DEFAULT_GROUP_TOL).unwrap();
        assert_eq!(e.len(), 2);
        assert_abs_diff_eq!(e[0].eigenvalue, 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[1].eigenvalue, -(3f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_embedded_spectrum_groups() {
        let reg = Register::uniform(3, 3).unwrap();
        let e = embed(&spin1_z(), 1, &reg).unwrap();
        let spec = hermitian_eig_grouped(&e, DEFAULT_GROUP_TOL).unwrap();
        assert_eq!(spec.len(), 3);
        for s in &spec {
            assert_abs_diff_eq!(s.projector.trace().re, 9.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.), c(1.), c(0.), c(0.)]);
        assert!(matches!(hermitian_eig_grouped(&m, 1e-9), Err(MerlError::NotHermitian { .. })));
    }

    #[test]
    fn local_application_matches_embedding() {
        let reg = Register::new(vec![2, 3, 2]).unwrap();
        let v = CVector::from_fn(12, |i, _| C64::new(i as f64, 1.0 - i as f64));
        let op = crate::scenarios::spin1_x();
        let direct = embed(&op, 1, &reg).unwrap() * &v;
        let fast = apply_local(&v, &op, 1, &reg);
        assert!((direct - fast).norm() < 1e-12);
    }
}
