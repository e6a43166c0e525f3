//! Canonical states, observable sets and ready-made scenarios.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::conditional::{ControlChain, ObservablePair};
use crate::error::{MerlError, MerlResult};
use crate::linalg::{CMatrix, CVector, Register, C64};
use crate::merl::{LTraMode, MerlScenario, Tolerances};
use crate::state::{Observable, QuantumState};

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn im(x: f64) -> C64 {
    C64::new(0.0, x)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[re(0.), re(1.), re(1.), re(0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[re(0.), im(-1.), im(1.), re(0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[re(1.), re(0.), re(0.), re(-1.)])
}

/// `σ_x + σ_y + σ_z`
pub fn pauli_sum() -> CMatrix {
    pauli_x() + pauli_y() + pauli_z()
}

// Spin-1 matrices with ħ = 1 in the basis order m = +1, 0, −1.

pub fn spin1_x() -> CMatrix {
    let s = re(FRAC_1_SQRT_2);
    let z = re(0.);
    CMatrix::from_row_slice(3, 3, &[z, s, z, s, z, s, z, s, z])
}

pub fn spin1_y() -> CMatrix {
    let p = im(FRAC_1_SQRT_2);
    let z = re(0.);
    CMatrix::from_row_slice(3, 3, &[z, -p, z, p, z, -p, z, p, z])
}

pub fn spin1_z() -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_row_slice(&[re(1.), re(0.), re(-1.)]))
}

/// `J_x + J_y + J_z`
pub fn spin1_sum() -> CMatrix {
    spin1_x() + spin1_y() + spin1_z()
}

/// `(Q_k, O_k)` for the qubit set `σ_x, σ_y, σ_z, σ_x+σ_y+σ_z`, with `Q_k = O_k`.
pub fn pauli_set() -> Vec<(CMatrix, CMatrix)> {
    [pauli_x(), pauli_y(), pauli_z(), pauli_sum()].into_iter().map(|m| (m.clone(), m)).collect()
}

/// `(Q_k, O_k)` for the spin-1 set `J_x, J_y, J_z, J_x+J_y+J_z`, with `Q_k = O_k`.
pub fn spin1_set() -> Vec<(CMatrix, CMatrix)> {
    [spin1_x(), spin1_y(), spin1_z(), spin1_sum()].into_iter().map(|m| (m.clone(), m)).collect()
}

/// `(|0…0⟩ + |d−1 … d−1⟩)/√2` on `n` sites of dimension `d`.
pub fn ghz(n: usize, d: usize) -> MerlResult<QuantumState> {
    if n < 2 {
        return Err(MerlError::InvalidParameter(format!("GHZ state needs n >= 2 sites, got {n}")));
    }
    let reg = Register::uniform(n, d)?;
    let mut v = CVector::zeros(reg.total_dim());
    v[0] = re(FRAC_1_SQRT_2);
    v[reg.total_dim() - 1] = re(FRAC_1_SQRT_2);
    QuantumState::pure(reg, v)
}

/// Equal superposition of the `n` single-excitation qubit basis states.
pub fn w_state(n: usize) -> MerlResult<QuantumState> {
    if n < 2 {
        return Err(MerlError::InvalidParameter(format!("W state needs n >= 2 sites, got {n}")));
    }
    let reg = Register::uniform(n, 2)?;
    let mut v = CVector::zeros(reg.total_dim());
    let a = re(1.0 / (n as f64).sqrt());
    for k in 0..n {
        v[1 << k] = a;
    }
    QuantumState::pure(reg, v)
}

/// Singlet `(|01⟩ − |10⟩)/√2`; every `n·σ` measurement on one half leaves the
/// other in an eigenstate of `n·σ`.
pub fn bell_singlet() -> QuantumState {
    let reg = Register::uniform(2, 2).expect("valid");
    let v = CVector::from_row_slice(&[re(0.), re(FRAC_1_SQRT_2), re(-FRAC_1_SQRT_2), re(0.)]);
    QuantumState::pure(reg, v).expect("normalized")
}

/// Tensor product of the blocks in listed order.
pub fn separable_composite(blocks: &[QuantumState]) -> MerlResult<QuantumState> {
    let (first, rest) = blocks
        .split_first()
        .ok_or_else(|| MerlError::InvalidParameter("composite needs at least one block".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, b| acc.tensor(b)))
}

/// Single-qubit `|0⟩`.
pub fn ket0() -> QuantumState {
    QuantumState::basis(Register::new(vec![2]).expect("valid"), &[0]).expect("valid")
}

/// How orbital-angular-momentum labels map onto local qutrit indices `0,1,2`
/// (which the spin-1 operators read as `m = +1, 0, −1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OamBasisMap {
    /// Labels in the listed order `{2, −1, 3}` and `{0, −1, 1}`.
    Positional,
    /// Labels sorted descending, `{3, 2, −1}` and `{1, 0, −1}`, so the label
    /// of photons 2 and 3 coincides with `m`.
    MValue,
}

impl OamBasisMap {
    pub fn labels(self) -> [[i32; 3]; 3] {
        match self {
            Self::Positional => [[2, -1, 3], [0, -1, 1], [0, -1, 1]],
            Self::MValue => [[3, 2, -1], [1, 0, -1], [1, 0, -1]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Positional => "positional",
            Self::MValue => "m_value",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "positional" => Some(Self::Positional),
            "m_value" => Some(Self::MValue),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OamGhzParams {
    pub mu: f64,
    /// Per-photon label lists; position in a list is the local basis index.
    pub labels: [[i32; 3]; 3],
}

impl OamGhzParams {
    pub fn new(mu: f64, map: OamBasisMap) -> Self {
        Self { mu, labels: map.labels() }
    }

    fn index(&self, photon: usize, label: i32) -> MerlResult<usize> {
        self.labels[photon].iter().position(|&l| l == label).ok_or_else(|| {
            MerlError::InvalidParameter(format!("photon {} has no basis label {label}", photon + 1))
        })
    }
}

/// Largest admissible `μ`.
pub const OAM_MU_MAX: f64 = FRAC_1_SQRT_2;

/// `√(1−2μ²)|2,0,0⟩ + μ|−1,−1,−1⟩ − μ|3,1,1⟩` on three qutrits.
pub fn oam_ghz(p: &OamGhzParams) -> MerlResult<QuantumState> {
    let w = 1.0 - 2.0 * p.mu * p.mu;
    if !(p.mu >= 0.0 && w >= -1e-15) {
        return Err(MerlError::InvalidParameter(format!(
            "mu = {} outside [0, 1/sqrt(2)]",
            p.mu
        )));
    }
    let reg = Register::uniform(3, 3)?;
    let terms = [(w.max(0.0).sqrt(), [2, 0, 0]), (p.mu, [-1, -1, -1]), (-p.mu, [3, 1, 1])];
    let mut v = CVector::zeros(reg.total_dim());
    for (amp, labels) in terms {
        let digits = [p.index(0, labels[0])?, p.index(1, labels[1])?, p.index(2, labels[2])?];
        v[reg.index_of(&digits)?] += re(amp);
    }
    QuantumState::pure_normalized(reg, v)
}

/// Scenario with the given `(Q_k, O_k)` matrices reused on every control site
/// and `L_tra = Σ_k V(Q_k)`.
pub fn scenario_with_set(
    state: QuantumState,
    measured: usize,
    controls: Vec<usize>,
    set: &[(CMatrix, CMatrix)],
) -> MerlResult<MerlScenario> {
    let reg = state.register().clone();
    let chain = ControlChain::new(measured, controls, reg.num_sites())?;
    let pairs = set
        .iter()
        .map(|(q, o)| {
            let q = Observable::new(&reg, measured, q.clone())?;
            let first = *chain.controls().first().ok_or_else(|| {
                MerlError::InvalidParameter("scenario needs at least one control".into())
            })?;
            let o = Observable::new(&reg, first, o.clone())?;
            ObservablePair::uniform(q, &o, &chain)
        })
        .collect::<MerlResult<Vec<_>>>()?;
    MerlScenario::new(state, chain, pairs, LTraMode::SumOfVariances, Tolerances::default())
}

/// Qubit scenario with the Pauli set.
pub fn pauli_scenario(state: QuantumState, measured: usize, controls: Vec<usize>) -> MerlResult<MerlScenario> {
    scenario_with_set(state, measured, controls, &pauli_set())
}

/// The four-qubit states `GHZ₄`, `GHZ₃⊗|0⟩`, `Bell⊗|0⟩⊗|0⟩`, `|0000⟩`, with
/// site 0 measured and sites 1,2,3 as controls, Pauli set.
pub fn fig2_states() -> MerlResult<Vec<(&'static str, QuantumState)>> {
    let z = ket0();
    Ok(vec![
        ("ghz4", ghz(4, 2)?),
        ("ghz3_x_0", separable_composite(&[ghz(3, 2)?, z.clone()])?),
        ("bell_x_00", separable_composite(&[ghz(2, 2)?, z.clone(), z.clone()])?),
        ("zero4", separable_composite(&[z.clone(), z.clone(), z.clone(), z])?),
    ])
}

pub fn fig2_scenarios() -> MerlResult<Vec<(&'static str, MerlScenario)>> {
    fig2_states()?
        .into_iter()
        .map(|(name, st)| Ok((name, pauli_scenario(st, 0, vec![1, 2, 3])?)))
        .collect()
}

/// OAM GHZ family with the spin-1 set, photon 1 measured, photons 2, 3 as
/// controls, positional basis map.
pub fn fig3_scenario(mu: f64) -> MerlResult<MerlScenario> {
    fig3_scenario_with(&OamGhzParams::new(mu, OamBasisMap::Positional))
}

pub fn fig3_scenario_with(params: &OamGhzParams) -> MerlResult<MerlScenario> {
    scenario_with_set(oam_ghz(params)?, 0, vec![1, 2], &spin1_set())
}
