//! Quantum-control-assisted conditional variances and multiparticle
//! entanglement resolution lines (MERLs) for small multi-qudit systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex matrices over composite registers (Kronecker
//!   products, site embedding, partial traces, grouped Hermitian spectra).
//! * [`state`]: pure and mixed states, observables, variances and projective
//!   measurement with the Lüders update.
//! * [`conditional`]: outcome-conditioned and expected conditional variances,
//!   sequential control chains and the nested correction terms.
//! * [`merl`]: the MERL spectrum, split detection, separability verdicts and
//!   control-order search.
//! * [`scenarios`]: canonical states, observable sets and ready-made
//!   four-qubit / three-qutrit configurations.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

pub mod conditional;
pub mod error;
pub mod linalg;
pub mod merl;
pub mod par;
pub mod random;
pub mod scenarios;
pub mod state;

pub use conditional::{ControlChain, ObservablePair};
pub use error::{MerlError, MerlResult};
pub use linalg::{CMatrix, CVector, Register, SpectralEntry, C64};
pub use merl::{
    classify, merl_spectrum, LTraMode, MerlScenario, MerlSpectrum, SeparabilityClass,
    SeparabilityVerdict, Tolerances,
};
pub use state::{Observable, OutcomeBranch, QuantumState};
