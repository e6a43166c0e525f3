//! Seeded random states and observables for property testing and audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, CVector, Register, C64};
use crate::state::QuantumState;

/// Deterministic generator for a `(seed, stream)` pair.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-distributed pure state drawn from `rng` (normalized complex Gaussian
/// vector).
pub fn random_pure<R: Rng + ?Sized>(reg: &Register, rng: &mut R) -> QuantumState {
    let n = reg.total_dim();
    loop {
        let v = CVector::from_fn(n, |_, _| gaussian(rng));
        if v.norm() > 1e-300 {
            return QuantumState::pure_normalized(reg.clone(), v).expect("nonzero finite vector");
        }
    }
}

/// Haar-random pure state, deterministic in `seed`.
pub fn haar_random_pure(reg: &Register, seed: u64) -> QuantumState {
    random_pure(reg, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random `d×d` Hermitian matrix from the Gaussian unitary ensemble.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian(rng));
    (&g + g.adjoint()).scale(0.5)
}

/// Random full-rank density matrix (`GG†/Tr`).
pub fn random_mixed<R: Rng + ?Sized>(reg: &Register, rng: &mut R) -> QuantumState {
    let n = reg.total_dim();
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    let rho = rho.unscale(tr);
    let rho = (&rho + rho.adjoint()).scale(0.5);
    QuantumState::mixed(reg.clone(), rho).expect("Wishart matrix is a valid state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::pauli_z;
    use crate::state::{expectation, Observable};

    #[test]
    fn same_seed_same_state() {
        let reg = Register::new(vec![2, 3]).unwrap();
        assert_eq!(haar_random_pure(&reg, 42), haar_random_pure(&reg, 42));
        assert_ne!(haar_random_pure(&reg, 42), haar_random_pure(&reg, 43));
    }

    #[test]
    fn normalized() {
        let reg = Register::new(vec![3, 3, 2]).unwrap();
        for seed in 0..20 {
            let n = haar_random_pure(&reg, seed).amplitudes().unwrap().norm();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_sigma_z_vanishes() {
        // Monte-Carlo oracle: Haar symmetry gives E⟨σ_z⟩ = 0 with std 1/√3 per sample
        let reg = Register::new(vec![2]).unwrap();
        let z = Observable::new(&reg, 0, pauli_z()).unwrap();
        let mut rng = rng_for(7, 0);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| expectation(&z, &random_pure(&reg, &mut rng)).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn random_mixed_is_valid() {
        let reg = Register::new(vec![2, 2]).unwrap();
        let s = random_mixed(&reg, &mut rng_for(1, 1));
        assert!(!s.is_pure());
    }
}
