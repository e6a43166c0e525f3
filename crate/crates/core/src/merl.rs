//! Multiparticle entanglement resolution lines.
//!
//! For a measured site `A` and ordered controls `C_1 … C_N` the lines are
//!
//! ```text
//! 𝓛_0 = L_tra
//! 𝓛_1 = 𝓛_0 − Σ_k V[E(Q_k | O_k^{C_1})]
//! 𝓛_m = 𝓛_{m−1} − Σ_k E[V(E[Q_k | O_k^{C_m}] | O_k^{C_1}, …, O_k^{C_{m−1}})]
//! ```
//!
//! With `L_tra = Σ_k V(Q_k)` the same lines equal
//! `Σ_k E[V(Q_k | O_k^{C_1}, …, O_k^{C_m})]`, which is checked on every
//! evaluation. A strict drop between consecutive lines is a split; for pure
//! states the split count bounds the separability class.

use std::fmt;

use itertools::Itertools;
use serde::Serialize;

use crate::conditional::{Conditioner, ControlChain, ObservablePair};
use crate::error::{MerlError, MerlResult};
use crate::par;
use crate::state::{variance, QuantumState, DEFAULT_PRUNE_TOL};

/// Relative split tolerance used when none is configured: the absolute
/// threshold is this times `max(1, 𝓛_0)`.
pub const DEFAULT_SPLIT_REL_TOL: f64 = 1e-7;

/// Largest control count accepted by [`best_order_search`].
pub const MAX_SEARCH_CONTROLS: usize = 8;

const CROSS_CHECK_TOL: f64 = 1e-8;
const L_TRA_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LTraMode {
    SumOfVariances,
    Explicit(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Absolute split threshold; `None` selects `1e-7 · max(1, 𝓛_0)`.
    pub split_tol: Option<f64>,
    pub prune_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { split_tol: None, prune_tol: DEFAULT_PRUNE_TOL }
    }
}

#[derive(Clone, Debug)]
pub struct MerlScenario {
    pub state: QuantumState,
    pub chain: ControlChain,
    pub pairs: Vec<ObservablePair>,
    pub l_tra: LTraMode,
    pub tolerances: Tolerances,
}

impl MerlScenario {
    pub fn new(
        state: QuantumState,
        chain: ControlChain,
        pairs: Vec<ObservablePair>,
        l_tra: LTraMode,
        tolerances: Tolerances,
    ) -> MerlResult<Self> {
        let sc = Self { state, chain, pairs, l_tra, tolerances };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> MerlResult<()> {
        if self.pairs.is_empty() {
            return Err(MerlError::InvalidParameter("scenario needs at least one observable pair".into()));
        }
        if self.chain.is_empty() {
            return Err(MerlError::InvalidParameter("scenario needs at least one control".into()));
        }
        if let Some(t) = self.tolerances.split_tol {
            if !(t > 0.0) {
                return Err(MerlError::InvalidParameter(format!("split tolerance must be > 0, got {t}")));
            }
        }
        Conditioner::new(self.tolerances.prune_tol)?;
        let reg = self.state.register();
        ControlChain::new(self.chain.measured(), self.chain.controls().to_vec(), reg.num_sites())?;
        for pair in &self.pairs {
            if pair.q().register() != reg {
                return Err(MerlError::RegisterMismatch {
                    left: reg.dims().to_vec(),
                    right: pair.q().register().dims().to_vec(),
                });
            }
            pair.controls_for(&self.chain)?;
        }
        Ok(())
    }

    /// Number of controls `N`.
    pub fn control_count(&self) -> usize {
        self.chain.len()
    }

    /// Same scenario with the controls measured in a different order.
    pub fn with_order(&self, controls: Vec<usize>) -> MerlResult<Self> {
        Ok(Self { chain: self.chain.reordered(controls)?, ..self.clone() })
    }

    fn conditioner(&self) -> Conditioner {
        Conditioner::new(self.tolerances.prune_tol).expect("validated")
    }
}

/// One admissible separability class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "class", content = "parts", rename_all = "snake_case")]
pub enum SeparabilityClass {
    GenuinelyEntangled,
    /// `L`-separable with `2 ≤ L < M`.
    Separable(usize),
    /// `M`-separable: a product of all single-particle states.
    FullySeparable,
}

impl fmt::Display for SeparabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GenuinelyEntangled => write!(f, "genuinely multiparticle entangled"),
            Self::Separable(l) => write!(f, "{l}-separable"),
            Self::FullySeparable => write!(f, "fully separable"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparabilityVerdict {
    /// `M = N + 1`.
    pub particle_count: usize,
    pub admissible: Vec<SeparabilityClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SeparabilityVerdict {
    pub fn is_genuinely_entangled(&self) -> bool {
        self.admissible == [SeparabilityClass::GenuinelyEntangled]
    }
}

impl fmt::Display for SeparabilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.admissible.iter().join(" | "))
    }
}

/// Admissible classes after `split_count` splits among `control_count`
/// controls.
///
/// All splits certify genuine multiparticle entanglement. With `0 < m < N`
/// splits the state is `(N+2−m)`-, …, or 2-separable; no splits means no
/// entanglement with the measured particle was seen.
pub fn classify(split_count: usize, control_count: usize) -> MerlResult<SeparabilityVerdict> {
    if split_count > control_count {
        return Err(MerlError::InvalidParameter(format!(
            "split count {split_count} exceeds control count {control_count}"
        )));
    }
    if control_count == 0 {
        return Err(MerlError::InvalidParameter("classification needs at least one control".into()));
    }
    let particles = control_count + 1;
    let class_for = |l: usize| {
        if l == particles {
            SeparabilityClass::FullySeparable
        } else {
            SeparabilityClass::Separable(l)
        }
    };
    let (admissible, note) = match split_count {
        m if m == control_count => (vec![SeparabilityClass::GenuinelyEntangled], None),
        0 => (
            (2..=particles).rev().map(class_for).collect(),
            Some("no entanglement with the measured particle detected".to_string()),
        ),
        m => ((2..=(control_count + 2 - m)).rev().map(class_for).collect(), None),
    };
    Ok(SeparabilityVerdict { particle_count: particles, admissible, note })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MerlSpectrum {
    /// `𝓛_0 … 𝓛_N`
    pub lines: Vec<f64>,
    /// `splits[m−1]` is true iff `𝓛_{m−1} − 𝓛_m > split_tol`.
    pub splits: Vec<bool>,
    pub split_count: usize,
    pub split_tol: f64,
    /// `None` for mixed input states.
    pub verdict: Option<SeparabilityVerdict>,
    /// Largest probability mass pruned while evaluating any term.
    pub pruned_mass: f64,
    pub notes: Vec<String>,
}

/// `L_tra`: either `Σ_k V(Q_k)` or the configured constant.
pub fn traditional_bound(scenario: &MerlScenario) -> MerlResult<f64> {
    match scenario.l_tra {
        LTraMode::SumOfVariances => sum_of_variances(scenario),
        LTraMode::Explicit(v) => Ok(v),
    }
}

fn sum_of_variances(scenario: &MerlScenario) -> MerlResult<f64> {
    scenario.pairs.iter().map(|p| variance(p.q(), &scenario.state)).sum()
}

/// Evaluates the MERL spectrum of a scenario in its given control order.
pub fn merl_spectrum(scenario: &MerlScenario) -> MerlResult<MerlSpectrum> {
    scenario.validate()?;
    let cond = scenario.conditioner();
    let state = &scenario.state;
    let chain = &scenario.chain;
    let n = chain.len();
    let mut notes = Vec::new();

    let sum_v = sum_of_variances(scenario)?;
    let l0 = match scenario.l_tra {
        LTraMode::SumOfVariances => sum_v,
        LTraMode::Explicit(v) => {
            if v > sum_v + L_TRA_SLACK {
                notes.push(format!(
                    "explicit L_tra = {v} exceeds the sum of variances {sum_v}; the relation is not a valid bound"
                ));
            }
            v
        }
    };

    // decrements[k][m-1]: correction for pair k at step m; seq[k][m-1]: equality form
    let per_pair = par::try_map(&scenario.pairs, |pair| {
        let controls = pair.controls_for(chain)?;
        let q = pair.q();
        let mut decrements = Vec::with_capacity(n);
        let mut seq = Vec::with_capacity(n);
        let mut pruned = 0.0f64;
        let first = cond.variance_of_cond_expectation(q, &controls[0], state)?;
        pruned = pruned.max(first.pruned_mass);
        decrements.push(first.value);
        for m in 1..n {
            let w = cond.nested_correction_term(q, &controls[m], &controls[..m], state)?;
            pruned = pruned.max(w.pruned_mass);
            decrements.push(w.value);
        }
        if scenario.l_tra == LTraMode::SumOfVariances {
            for m in 1..=n {
                let w = cond.sequential_expected_cond_variance(q, &controls[..m], state)?;
                pruned = pruned.max(w.pruned_mass);
                seq.push(w.value);
            }
        }
        Ok::<_, MerlError>((decrements, seq, pruned))
    })?;

    let mut lines = Vec::with_capacity(n + 1);
    lines.push(l0);
    for m in 0..n {
        let dec: f64 = per_pair.iter().map(|p| p.0[m]).sum();
        lines.push(lines[m] - dec);
    }
    let pruned_mass = per_pair.iter().map(|p| p.2).fold(0.0, f64::max);

    if scenario.l_tra == LTraMode::SumOfVariances {
        let tol = CROSS_CHECK_TOL * l0.abs().max(1.0);
        for m in 1..=n {
            let direct: f64 = per_pair.iter().map(|p| p.1[m - 1]).sum();
            if (lines[m] - direct).abs() > tol {
                return Err(MerlError::Consistency(format!(
                    "line {m}: recursion gives {} but the conditional-variance form gives {direct}",
                    lines[m]
                )));
            }
        }
    }

    let split_tol = scenario.tolerances.split_tol.unwrap_or(DEFAULT_SPLIT_REL_TOL * l0.max(1.0));
    let splits: Vec<bool> = lines.windows(2).map(|w| w[0] - w[1] > split_tol).collect();
    let split_count = splits.iter().filter(|&&s| s).count();

    let verdict = if state.is_pure() {
        Some(classify(split_count, n)?)
    } else {
        notes.push("classification not supported for mixed states".to_string());
        None
    };

    Ok(MerlSpectrum { lines, splits, split_count, split_tol, verdict, pruned_mass, notes })
}

/// Result of searching over control orders.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderSearch {
    pub ordering: Vec<usize>,
    pub spectrum: MerlSpectrum,
}

/// Evaluates every permutation of the controls and returns the one with the
/// most splits, ties going to the lexicographically smallest ordering.
pub fn best_order_search(scenario: &MerlScenario) -> MerlResult<OrderSearch> {
    let n = scenario.control_count();
    if n > MAX_SEARCH_CONTROLS {
        return Err(MerlError::TooManyControls { controls: n, max: MAX_SEARCH_CONTROLS });
    }
    let mut sites = scenario.chain.controls().to_vec();
    sites.sort_unstable();
    let orders: Vec<Vec<usize>> = sites.iter().copied().permutations(n).collect();
    let spectra = par::try_map(&orders, |order| merl_spectrum(&scenario.with_order(order.clone())?))?;
    // orders are generated in lexicographic order, so the first maximum wins ties
    let mut best = 0;
    for (i, s) in spectra.iter().enumerate() {
        if s.split_count > spectra[best].split_count {
            best = i;
        }
    }
    Ok(OrderSearch { ordering: orders[best].clone(), spectrum: spectra[best].clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{fig2_scenarios, pauli_scenario};
    use crate::linalg::Register;
    use approx::assert_abs_diff_eq;

    #[test]
    fn classify_rule() {
        let g = classify(3, 3).unwrap();
        assert!(g.is_genuinely_entangled());
        assert_eq!(g.particle_count, 4);

        let none = classify(0, 3).unwrap();
        assert!(none.note.is_some());
        assert!(none.admissible.contains(&SeparabilityClass::FullySeparable));
        assert!(!none.admissible.contains(&SeparabilityClass::GenuinelyEntangled));

        assert_eq!(
            classify(2, 3).unwrap().admissible,
            vec![SeparabilityClass::Separable(3), SeparabilityClass::Separable(2)]
        );
        assert_eq!(
            classify(1, 3).unwrap().admissible,
            vec![
                SeparabilityClass::FullySeparable,
                SeparabilityClass::Separable(3),
                SeparabilityClass::Separable(2)
            ]
        );
        assert!(classify(4, 3).is_err());
    }

    #[test]
    fn genuine_iff_all_split() {
        for n in 1..7 {
            for m in 0..=n {
                let v = classify(m, n).unwrap();
                assert!(!v.admissible.is_empty());
                assert_eq!(v.admissible.contains(&SeparabilityClass::GenuinelyEntangled), m == n);
            }
        }
    }

    #[test]
    fn fig2_lines() {
        // lines frozen from the brute-force density-matrix enumeration
        let want = [
            [6.0, 14.0 / 3.0, 4.5, 4.0 / 3.0],
            [6.0, 14.0 / 3.0, 3.0, 3.0],
            [6.0, 8.0 / 3.0, 8.0 / 3.0, 8.0 / 3.0],
            [4.0, 4.0, 4.0, 4.0],
        ];
        for ((_, sc), w) in fig2_scenarios().unwrap().iter().zip(want) {
            let s = merl_spectrum(sc).unwrap();
            for (a, b) in s.lines.iter().zip(w) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn explicit_bound_shifts_lines_and_warns() {
        let (_, sc) = fig2_scenarios().unwrap().remove(0);
        let base = merl_spectrum(&sc).unwrap();
        let low = merl_spectrum(&MerlScenario { l_tra: LTraMode::Explicit(1.0), ..sc.clone() }).unwrap();
        assert!(low.notes.is_empty());
        for (a, b) in base.lines.iter().zip(&low.lines) {
            assert_abs_diff_eq!(a - b, 5.0, epsilon = 1e-12);
        }
        let high = merl_spectrum(&MerlScenario { l_tra: LTraMode::Explicit(7.0), ..sc }).unwrap();
        assert_eq!(high.notes.len(), 1);
        assert_eq!(traditional_bound(&MerlScenario { l_tra: LTraMode::Explicit(0.0), ..high_scenario() }).unwrap(), 0.0);
    }

    fn high_scenario() -> MerlScenario {
        fig2_scenarios().unwrap().remove(3).1
    }

    #[test]
    fn mixed_input_gets_no_verdict() {
        let mut sc = high_scenario();
        sc.state = sc.state.to_mixed();
        let s = merl_spectrum(&sc).unwrap();
        assert!(s.verdict.is_none());
        assert_eq!(s.notes.len(), 1);
        assert_eq!(s.split_count, 0);
    }

    #[test]
    fn order_search_rejects_large_chains() {
        let reg = Register::uniform(10, 2).unwrap();
        let st = crate::state::QuantumState::basis(reg, &[0; 10]).unwrap();
        let sc = pauli_scenario(st, 0, (1..10).collect()).unwrap();
        assert!(matches!(best_order_search(&sc), Err(MerlError::TooManyControls { controls: 9, .. })));
    }

    #[test]
    fn invalid_split_tol_rejected() {
        let mut sc = high_scenario();
        sc.tolerances.split_tol = Some(0.0);
        assert!(merl_spectrum(&sc).is_err());
    }
}
