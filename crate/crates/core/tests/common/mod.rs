//! Brute-force reference implementation used only by tests.
//!
//! Everything here works on full density matrices and fully embedded
//! operators (`I ⊗ … ⊗ A ⊗ … ⊗ I`, built with explicit index loops), with
//! projectors taken straight from nalgebra's eigensolver. None of the
//! crate's local-application, partial-trace or branching code is used.

#![allow(dead_code)]

use merl_core::linalg::{CMatrix, C64};

pub struct Oracle {
    pub dims: Vec<usize>,
}

impl Oracle {
    pub fn new(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec() }
    }

    fn total(&self) -> usize {
        self.dims.iter().product()
    }

    fn digits(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for s in (0..self.dims.len()).rev() {
            out[s] = i % self.dims[s];
            i /= self.dims[s];
        }
        out
    }

    /// Explicit embedding: ⟨i|E|j⟩ = A[i_s, j_s] · Π_{t≠s} δ(i_t, j_t).
    pub fn embed(&self, local: &CMatrix, site: usize) -> CMatrix {
        let n = self.total();
        CMatrix::from_fn(n, n, |i, j| {
            let (di, dj) = (self.digits(i), self.digits(j));
            let others_equal = (0..self.dims.len()).all(|t| t == site || di[t] == dj[t]);
            if others_equal {
                local[(di[site], dj[site])]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Spectral projectors with eigenvalues merged at an absolute 1e-8.
    pub fn projectors(local: &CMatrix) -> Vec<(f64, CMatrix)> {
        let eig = local.clone().symmetric_eigen();
        let n = local.nrows();
        let mut out: Vec<(f64, CMatrix)> = Vec::new();
        for i in 0..n {
            let lam = eig.eigenvalues[i];
            let v = eig.eigenvectors.column(i);
            let p = v * v.adjoint();
            match out.iter_mut().find(|(l, _)| (l - lam).abs() < 1e-8) {
                Some(slot) => slot.1 += p,
                None => out.push((lam, p)),
            }
        }
        out
    }

    pub fn expect(rho: &CMatrix, op: &CMatrix) -> f64 {
        (rho * op).trace().re
    }

    pub fn var(&self, rho: &CMatrix, q: &CMatrix, site: usize) -> f64 {
        let e = self.embed(q, site);
        Self::expect(rho, &(&e * &e)) - Self::expect(rho, &e).powi(2)
    }

    /// `(p_j, ρ_j)` for each outcome with p_j > 1e-13.
    pub fn branches(&self, rho: &CMatrix, o: &CMatrix, site: usize) -> Vec<(f64, CMatrix)> {
        Self::projectors(o)
            .into_iter()
            .filter_map(|(_, p)| {
                let e = self.embed(&p, site);
                let r = &e * rho * &e;
                let pr = r.trace().re;
                (pr > 1e-13).then(|| (pr, r.unscale(pr)))
            })
            .collect()
    }

    /// `E[V(Q | O^{c_1} … O^{c_m})]` by recursion over outcomes.
    pub fn seq(&self, rho: &CMatrix, q: &CMatrix, a: usize, ctrl: &[(usize, CMatrix)]) -> f64 {
        match ctrl.split_first() {
            None => self.var(rho, q, a),
            Some(((c, o), rest)) => self
                .branches(rho, o, *c)
                .iter()
                .map(|(p, r)| p * self.seq(r, q, a, rest))
                .sum(),
        }
    }

    pub fn var_of_cond_exp(&self, rho: &CMatrix, q: &CMatrix, a: usize, c: usize, o: &CMatrix) -> f64 {
        let qe = self.embed(q, a);
        let bs = self.branches(rho, o, c);
        let m1: f64 = bs.iter().map(|(p, r)| p * Self::expect(r, &qe)).sum();
        let m2: f64 = bs.iter().map(|(p, r)| p * Self::expect(r, &qe).powi(2)).sum();
        m2 - m1 * m1
    }

    pub fn nested(
        &self,
        rho: &CMatrix,
        q: &CMatrix,
        a: usize,
        priors: &[(usize, CMatrix)],
        target: &(usize, CMatrix),
    ) -> f64 {
        match priors.split_first() {
            None => self.var_of_cond_exp(rho, q, a, target.0, &target.1),
            Some(((c, o), rest)) => self
                .branches(rho, o, *c)
                .iter()
                .map(|(p, r)| p * self.nested(r, q, a, rest, target))
                .sum(),
        }
    }

    /// Lines `Σ_k V(Q_k)`, then `Σ_k E[V(Q_k | first m controls)]`.
    /// `pairs[k]` = (Q_k, per-control O_k in chain order).
    pub fn merl_lines(
        &self,
        rho: &CMatrix,
        a: usize,
        controls: &[usize],
        pairs: &[(CMatrix, Vec<CMatrix>)],
    ) -> Vec<f64> {
        let mut lines = vec![pairs.iter().map(|(q, _)| self.var(rho, q, a)).sum()];
        for m in 1..=controls.len() {
            lines.push(
                pairs
                    .iter()
                    .map(|(q, os)| {
                        let chain: Vec<(usize, CMatrix)> =
                            controls[..m].iter().copied().zip(os[..m].iter().cloned()).collect();
                        self.seq(rho, q, a, &chain)
                    })
                    .sum(),
            );
        }
        lines
    }
}

pub fn density(amps: &merl_core::linalg::CVector) -> CMatrix {
    amps * amps.adjoint()
}
