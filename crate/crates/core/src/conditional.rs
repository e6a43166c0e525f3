//! Conditional variances under projective control measurements.
//!
//! Conditioning always follows the Lüders update. Sequences of control
//! outcomes are enumerated exhaustively; a sequence whose joint probability
//! drops below the pruning threshold contributes nothing and its mass is
//! reported separately.

use crate::error::{MerlError, MerlResult};
use crate::par;
use crate::state::{
    expectation, measure_branches_with, variance, Observable, OutcomeBranch, QuantumState,
    DEFAULT_PRUNE_TOL,
};

/// Measured site plus the ordered control sites `C_1 … C_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlChain {
    measured: usize,
    controls: Vec<usize>,
}

impl ControlChain {
    pub fn new(measured: usize, controls: Vec<usize>, num_sites: usize) -> MerlResult<Self> {
        for &s in std::iter::once(&measured).chain(&controls) {
            if s >= num_sites {
                return Err(MerlError::SiteOutOfRange { site: s, sites: num_sites });
            }
        }
        if controls.contains(&measured) {
            return Err(MerlError::SiteCollision(format!(
                "measured site {measured} is also listed as a control"
            )));
        }
        let mut seen = controls.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(MerlError::SiteCollision(format!("control site {} listed twice", w[0])));
        }
        Ok(Self { measured, controls })
    }

    pub fn measured(&self) -> usize {
        self.measured
    }

    pub fn controls(&self) -> &[usize] {
        &self.controls
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Same measured site, controls reordered.
    pub fn reordered(&self, controls: Vec<usize>) -> MerlResult<Self> {
        let mut a = controls.clone();
        let mut b = self.controls.clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(MerlError::InvalidParameter(format!(
                "{controls:?} is not a permutation of {:?}",
                self.controls
            )));
        }
        Ok(Self { measured: self.measured, controls })
    }
}

/// One `(Q_k, O_k)` pair: `Q_k` on the measured site and one `O_k` per
/// control site.
#[derive(Clone, Debug)]
pub struct ObservablePair {
    q: Observable,
    o: Vec<Observable>,
}

impl ObservablePair {
    pub fn new(q: Observable, o: Vec<Observable>) -> MerlResult<Self> {
        let mut sites: Vec<usize> = o.iter().map(Observable::site).collect();
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(MerlError::SiteCollision("two control operators on one site".into()));
        }
        if sites.contains(&q.site()) {
            return Err(MerlError::SiteCollision(format!(
                "control operator placed on the measured site {}",
                q.site()
            )));
        }
        if o.iter().any(|x| x.register() != q.register()) {
            return Err(MerlError::RegisterMismatch {
                left: q.register().dims().to_vec(),
                right: o.iter().find(|x| x.register() != q.register()).unwrap().register().dims().to_vec(),
            });
        }
        Ok(Self { q, o })
    }

    /// `O` reused on every control site of `chain`; all those sites must share
    /// the dimension of `o`.
    pub fn uniform(q: Observable, o: &Observable, chain: &ControlChain) -> MerlResult<Self> {
        let controls = chain
            .controls()
            .iter()
            .map(|&s| o.at_site(s))
            .collect::<MerlResult<Vec<_>>>()?;
        Self::new(q, controls)
    }

    pub fn q(&self) -> &Observable {
        &self.q
    }

    pub fn control_observables(&self) -> &[Observable] {
        &self.o
    }

    pub fn control(&self, site: usize) -> Option<&Observable> {
        self.o.iter().find(|x| x.site() == site)
    }

    /// Control operators in the order of `chain`.
    pub fn controls_for(&self, chain: &ControlChain) -> MerlResult<Vec<Observable>> {
        if self.q.site() != chain.measured() {
            return Err(MerlError::SiteCollision(format!(
                "Q acts on site {} but the chain measures site {}",
                self.q.site(),
                chain.measured()
            )));
        }
        chain
            .controls()
            .iter()
            .map(|&s| {
                self.control(s).cloned().ok_or_else(|| {
                    MerlError::InvalidParameter(format!("no control operator for site {s}"))
                })
            })
            .collect()
    }
}

/// A surviving outcome sequence.
#[derive(Clone, Debug)]
pub struct Leaf {
    pub probability: f64,
    pub state: QuantumState,
}

/// Value together with the probability mass that was pruned to get it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weighted {
    pub value: f64,
    pub pruned_mass: f64,
}

/// Computes every conditional quantity at a fixed pruning threshold.
#[derive(Clone, Copy, Debug)]
pub struct Conditioner {
    prune_tol: f64,
}

impl Default for Conditioner {
    fn default() -> Self {
        Self { prune_tol: DEFAULT_PRUNE_TOL }
    }
}

fn check_distinct(q: &Observable, controls: &[Observable]) -> MerlResult<()> {
    let mut sites: Vec<usize> = controls.iter().map(Observable::site).collect();
    if sites.contains(&q.site()) {
        return Err(MerlError::SiteCollision(format!(
            "condition measured on the same site {} as Q",
            q.site()
        )));
    }
    sites.sort_unstable();
    if sites.windows(2).any(|w| w[0] == w[1]) {
        return Err(MerlError::SiteCollision("control site measured twice".into()));
    }
    Ok(())
}

impl Conditioner {
    pub fn new(prune_tol: f64) -> MerlResult<Self> {
        if !(0.0..1.0).contains(&prune_tol) {
            return Err(MerlError::InvalidParameter(format!("prune tolerance {prune_tol} not in [0, 1)")));
        }
        Ok(Self { prune_tol })
    }

    pub fn prune_tol(&self) -> f64 {
        self.prune_tol
    }

    /// Measures `controls` in order, returning the surviving outcome
    /// sequences in lexicographic outcome order.
    pub fn enumerate(&self, controls: &[Observable], s: &QuantumState) -> MerlResult<(Vec<Leaf>, f64)> {
        let mut leaves = vec![Leaf { probability: 1.0, state: s.clone() }];
        let mut pruned = 0.0;
        for o in controls {
            let expanded = par::try_map(&leaves, |leaf| {
                let branches = measure_branches_with(o, &leaf.state, self.prune_tol)?;
                let mut keep = Vec::with_capacity(branches.len());
                let mut lost = 0.0;
                for b in branches {
                    let joint = leaf.probability * b.probability;
                    match b.post_state {
                        Some(state) if joint >= self.prune_tol => {
                            keep.push(Leaf { probability: joint, state })
                        }
                        _ => lost += joint,
                    }
                }
                Ok::<_, MerlError>((keep, lost))
            })?;
            leaves = Vec::with_capacity(expanded.len() * 2);
            for (keep, lost) in expanded {
                leaves.extend(keep);
                pruned += lost;
            }
        }
        Ok((leaves, pruned))
    }

    /// `V(Q | O := λ_j)` for a single, non-pruned branch.
    pub fn cond_variance_given_outcome(&self, q: &Observable, branch: &OutcomeBranch) -> MerlResult<f64> {
        match &branch.post_state {
            Some(st) if branch.probability >= self.prune_tol => variance(q, st),
            _ => Err(MerlError::ZeroProbabilityCondition { probability: branch.probability }),
        }
    }

    /// `E[V(Q | O)] = Σ_j P(O := λ_j) V(Q | O := λ_j)`.
    pub fn expected_cond_variance(&self, q: &Observable, o: &Observable, s: &QuantumState) -> MerlResult<Weighted> {
        self.sequential_expected_cond_variance(q, std::slice::from_ref(o), s)
    }

    /// `E[V(Q | O^{C_1}, …, O^{C_m})]` over all outcome sequences of the given
    /// controls, measured in order.
    pub fn sequential_expected_cond_variance(
        &self,
        q: &Observable,
        controls: &[Observable],
        s: &QuantumState,
    ) -> MerlResult<Weighted> {
        check_distinct(q, controls)?;
        let (leaves, pruned_mass) = self.enumerate(controls, s)?;
        let terms = par::try_map(&leaves, |l| variance(q, &l.state).map(|v| l.probability * v))?;
        Ok(Weighted { value: terms.iter().sum(), pruned_mass })
    }

    /// `V[E(Q | O)]`: variance over outcomes of `O` of the branch expectations
    /// of `Q`.
    pub fn variance_of_cond_expectation(
        &self,
        q: &Observable,
        o: &Observable,
        s: &QuantumState,
    ) -> MerlResult<Weighted> {
        check_distinct(q, std::slice::from_ref(o))?;
        self.variance_of_cond_expectation_unchecked(q, o, s)
    }

    fn variance_of_cond_expectation_unchecked(
        &self,
        q: &Observable,
        o: &Observable,
        s: &QuantumState,
    ) -> MerlResult<Weighted> {
        let branches = measure_branches_with(o, s, self.prune_tol)?;
        let mut first = 0.0;
        let mut second = 0.0;
        let mut pruned_mass = 0.0;
        for b in &branches {
            match &b.post_state {
                Some(st) => {
                    let e = expectation(q, st)?;
                    first += b.probability * e;
                    second += b.probability * e * e;
                }
                None => pruned_mass += b.probability,
            }
        }
        Ok(Weighted { value: (second - first * first).max(0.0), pruned_mass })
    }

    /// `E[V(E[Q | O^{C_n}] | O^{C_1}, …, O^{C_{n−1}})]`: within every surviving
    /// outcome sequence of the priors, the variance of `Q`'s conditional
    /// expectation over the target's outcomes, weighted by the sequence
    /// probability.
    pub fn nested_correction_term(
        &self,
        q: &Observable,
        target: &Observable,
        priors: &[Observable],
        s: &QuantumState,
    ) -> MerlResult<Weighted> {
        let mut all = priors.to_vec();
        all.push(target.clone());
        check_distinct(q, &all)?;
        let (leaves, prior_pruned) = self.enumerate(priors, s)?;
        let terms = par::try_map(&leaves, |l| {
            self.variance_of_cond_expectation_unchecked(q, target, &l.state)
                .map(|w| (l.probability * w.value, l.probability * w.pruned_mass))
        })?;
        Ok(Weighted {
            value: terms.iter().map(|t| t.0).sum(),
            pruned_mass: prior_pruned + terms.iter().map(|t| t.1).sum::<f64>(),
        })
    }

    /// Both sides of the N-control relation
    /// `Σ_k E[V(Q_k|O_k^{C_1..C_N})] ≥ L_tra − Σ_k V[E(Q_k|O_k^{C_1})] − Σ_k Σ_{n≥2} nested_n`.
    pub fn relation_terms(
        &self,
        pairs: &[ObservablePair],
        chain: &ControlChain,
        s: &QuantumState,
        l_tra: f64,
    ) -> MerlResult<RelationTerms> {
        if pairs.is_empty() {
            return Err(MerlError::InvalidParameter("need at least one observable pair".into()));
        }
        if chain.is_empty() {
            return Err(MerlError::InvalidParameter("need at least one control".into()));
        }
        let per_k = par::try_map(pairs, |pair| {
            let controls = pair.controls_for(chain)?;
            let q = pair.q();
            let lhs = self.sequential_expected_cond_variance(q, &controls, s)?.value;
            let mut correction = self.variance_of_cond_expectation(q, &controls[0], s)?.value;
            for n in 1..controls.len() {
                correction += self.nested_correction_term(q, &controls[n], &controls[..n], s)?.value;
            }
            Ok::<_, MerlError>((lhs, correction))
        })?;
        let lhs: f64 = per_k.iter().map(|t| t.0).sum();
        let rhs = l_tra - per_k.iter().map(|t| t.1).sum::<f64>();
        Ok(RelationTerms { lhs, rhs })
    }

    /// `LHS − RHS` of the N-control relation; nonnegative up to round-off.
    pub fn relation_residual(
        &self,
        pairs: &[ObservablePair],
        chain: &ControlChain,
        s: &QuantumState,
        l_tra: f64,
    ) -> MerlResult<f64> {
        self.relation_terms(pairs, chain, s, l_tra).map(|t| t.lhs - t.rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelationTerms {
    pub lhs: f64,
    pub rhs: f64,
}

/// [`Conditioner::cond_variance_given_outcome`] at the default threshold.
pub fn cond_variance_given_outcome(q: &Observable, branch: &OutcomeBranch) -> MerlResult<f64> {
    Conditioner::default().cond_variance_given_outcome(q, branch)
}

pub fn expected_cond_variance(q: &Observable, o: &Observable, s: &QuantumState) -> MerlResult<f64> {
    Conditioner::default().expected_cond_variance(q, o, s).map(|w| w.value)
}

pub fn sequential_expected_cond_variance(
    q: &Observable,
    controls: &[Observable],
    s: &QuantumState,
) -> MerlResult<f64> {
    if controls.is_empty() {
        return Err(MerlError::InvalidParameter("need at least one control".into()));
    }
    Conditioner::default().sequential_expected_cond_variance(q, controls, s).map(|w| w.value)
}

pub fn variance_of_cond_expectation(q: &Observable, o: &Observable, s: &QuantumState) -> MerlResult<f64> {
    Conditioner::default().variance_of_cond_expectation(q, o, s).map(|w| w.value)
}

pub fn nested_correction_term(
    q: &Observable,
    target: &Observable,
    priors: &[Observable],
    s: &QuantumState,
) -> MerlResult<f64> {
    if priors.is_empty() {
        return Err(MerlError::InvalidParameter("nested term needs at least one prior control".into()));
    }
    Conditioner::default().nested_correction_term(q, target, priors, s).map(|w| w.value)
}

/// `LHS − RHS` of the N-control relation at the default threshold.
pub fn relation_residual(
    pairs: &[ObservablePair],
    chain: &ControlChain,
    s: &QuantumState,
    l_tra: f64,
) -> MerlResult<f64> {
    Conditioner::default().relation_residual(pairs, chain, s, l_tra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMatrix, CVector, Register, C64};
    use crate::scenarios::{bell_singlet, ghz, pauli_set, pauli_sum, pauli_x, pauli_z};
    use crate::state::{measure_branches, variance};
    use approx::assert_abs_diff_eq;

    fn on(s: &QuantumState, site: usize, m: CMatrix) -> Observable {
        Observable::new(s.register(), site, m).unwrap()
    }

    fn counterexample() -> QuantumState {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [0.5, 0.0, 0.5, r].map(|x| C64::new(x, 0.0));
        QuantumState::pure(Register::uniform(2, 2).unwrap(), CVector::from_row_slice(&amps)).unwrap()
    }

    #[test]
    fn conditioning_can_raise_single_outcome_variance() {
        let s = counterexample();
        let q = on(&s, 0, pauli_z());
        let o = on(&s, 1, pauli_z());
        let br = measure_branches(&o, &s).unwrap();
        assert_abs_diff_eq!(cond_variance_given_outcome(&q, &br[0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(variance(&q, &s).unwrap(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_cond_variance(&q, &o, &s).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn pruned_branch_is_rejected() {
        let s = QuantumState::basis(Register::uniform(2, 2).unwrap(), &[0, 0]).unwrap();
        let q = on(&s, 0, pauli_z());
        let br = measure_branches(&on(&s, 1, pauli_z()), &s).unwrap();
        assert!(matches!(
            cond_variance_given_outcome(&q, &br[1]),
            Err(MerlError::ZeroProbabilityCondition { .. })
        ));
    }

    #[test]
    fn bell_branches() {
        let s = ghz(2, 2).unwrap();
        let q = on(&s, 0, pauli_z());
        let o = on(&s, 1, pauli_z());
        for b in measure_branches(&o, &s).unwrap() {
            assert_abs_diff_eq!(cond_variance_given_outcome(&q, &b).unwrap(), 0.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(expected_cond_variance(&q, &o, &s).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(variance_of_cond_expectation(&q, &o, &s).unwrap(), 1.0, epsilon = 1e-14);
        let p = pauli_sum();
        let v = variance_of_cond_expectation(&on(&s, 0, p.clone()), &on(&s, 1, p), &s).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn product_state_has_no_reduction() {
        let a = QuantumState::pure_normalized(
            Register::new(vec![2]).unwrap(),
            CVector::from_row_slice(&[C64::new(0.6, 0.1), C64::new(0.3, -0.7)]),
        )
        .unwrap();
        let c = QuantumState::pure_normalized(
            Register::new(vec![2]).unwrap(),
            CVector::from_row_slice(&[C64::new(0.2, 0.0), C64::new(0.9, 0.4)]),
        )
        .unwrap();
        let s = a.tensor(&c);
        let q = on(&s, 0, pauli_x());
        let o = on(&s, 1, pauli_x());
        let v = variance(&Observable::new(a.register(), 0, pauli_x()).unwrap(), &a).unwrap();
        for b in measure_branches(&o, &s).unwrap() {
            assert_abs_diff_eq!(cond_variance_given_outcome(&q, &b).unwrap(), v, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(expected_cond_variance(&q, &o, &s).unwrap(), v, epsilon = 1e-12);
        assert_abs_diff_eq!(variance_of_cond_expectation(&q, &o, &s).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ghz4_full_chain_collapses() {
        let s = ghz(4, 2).unwrap();
        for m in [pauli_z(), pauli_x()] {
            let q = on(&s, 0, m.clone());
            let controls: Vec<_> = (1..4).map(|c| on(&s, c, m.clone())).collect();
            let v = sequential_expected_cond_variance(&q, &controls, &s).unwrap();
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn order_one_sequence_matches_single_condition() {
        let s = crate::random::haar_random_pure(&Register::new(vec![2, 3]).unwrap(), 5);
        let q = on(&s, 0, pauli_sum());
        let o = on(&s, 1, crate::scenarios::spin1_y());
        let a = sequential_expected_cond_variance(&q, std::slice::from_ref(&o), &s).unwrap();
        let b = expected_cond_variance(&q, &o, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nested_terms_on_ghz3() {
        let s = ghz(3, 2).unwrap();
        let z = |site| on(&s, site, pauli_z());
        let x = |site| on(&s, site, pauli_x());
        assert_abs_diff_eq!(nested_correction_term(&z(0), &z(2), &[z(1)], &s).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nested_correction_term(&x(0), &x(2), &[x(1)], &s).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nested_term_uncorrelated_target() {
        let bell = ghz(2, 2).unwrap();
        let zero = QuantumState::basis(Register::new(vec![2]).unwrap(), &[0]).unwrap();
        let s = bell.tensor(&zero).tensor(&zero);
        for m in [pauli_x(), pauli_z(), pauli_sum()] {
            let t = nested_correction_term(&on(&s, 0, m.clone()), &on(&s, 2, m.clone()), &[on(&s, 1, m.clone())], &s);
            assert_abs_diff_eq!(t.unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn site_collisions() {
        let s = ghz(3, 2).unwrap();
        let q = on(&s, 0, pauli_z());
        assert!(matches!(expected_cond_variance(&q, &q, &s), Err(MerlError::SiteCollision(_))));
        assert!(matches!(
            variance_of_cond_expectation(&q, &on(&s, 0, pauli_x()), &s),
            Err(MerlError::SiteCollision(_))
        ));
        assert!(matches!(
            nested_correction_term(&q, &on(&s, 1, pauli_x()), &[on(&s, 1, pauli_z())], &s),
            Err(MerlError::SiteCollision(_))
        ));
        assert!(ControlChain::new(0, vec![1, 0], 3).is_err());
        assert!(ControlChain::new(0, vec![1, 1], 3).is_err());
        assert!(ControlChain::new(0, vec![1, 3], 3).is_err());
    }

    fn pairs_for(s: &QuantumState, chain: &ControlChain) -> Vec<ObservablePair> {
        pauli_set()
            .into_iter()
            .map(|(q, o)| {
                let q = on(s, chain.measured(), q);
                let o = on(s, chain.controls()[0], o);
                ObservablePair::uniform(q, &o, chain).unwrap()
            })
            .collect()
    }

    #[test]
    fn relation_is_tight_with_sum_of_variances() {
        let s = crate::random::haar_random_pure(&Register::uniform(4, 2).unwrap(), 11);
        let chain = ControlChain::new(0, vec![1, 2, 3], 4).unwrap();
        let pairs = pairs_for(&s, &chain);
        let l_tra: f64 = pairs.iter().map(|p| variance(p.q(), &s).unwrap()).sum();
        assert_abs_diff_eq!(relation_residual(&pairs, &chain, &s, l_tra).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn relation_bound_broken_by_singlet() {
        let s = bell_singlet();
        let chain = ControlChain::new(0, vec![1], 2).unwrap();
        let pairs = pairs_for(&s, &chain);
        let terms = Conditioner::default().relation_terms(&pairs, &chain, &s, 6.0).unwrap();
        assert_abs_diff_eq!(terms.lhs, 0.0, epsilon = 1e-12);
        assert!(terms.rhs <= 1e-12);
    }

    #[test]
    fn relation_on_product_is_traditional() {
        let s = QuantumState::basis(Register::uniform(3, 2).unwrap(), &[0, 1, 0]).unwrap();
        let chain = ControlChain::new(0, vec![1, 2], 3).unwrap();
        let pairs = pairs_for(&s, &chain);
        let sum_v: f64 = pairs.iter().map(|p| variance(p.q(), &s).unwrap()).sum();
        assert_abs_diff_eq!(sum_v, 4.0, epsilon = 1e-12);
        let r = relation_residual(&pairs, &chain, &s, 1.5).unwrap();
        assert_abs_diff_eq!(r, sum_v - 1.5, epsilon = 1e-12);
    }

    #[test]
    fn pruned_mass_is_reported() {
        let s = QuantumState::basis(Register::uniform(3, 2).unwrap(), &[0, 0, 0]).unwrap();
        let c = Conditioner::default();
        let q = on(&s, 0, pauli_x());
        // σ_x outcomes on a σ_z eigenstate both survive; σ_z outcomes prune
        let w = c.sequential_expected_cond_variance(&q, &[on(&s, 1, pauli_z()), on(&s, 2, pauli_z())], &s).unwrap();
        assert_eq!(w.pruned_mass, 0.0);
        assert_abs_diff_eq!(w.value, 1.0, epsilon = 1e-14);
        let strict = Conditioner::new(0.3).unwrap();
        let w = strict
            .sequential_expected_cond_variance(&q, &[on(&s, 1, pauli_x()), on(&s, 2, pauli_x())], &s)
            .unwrap();
        assert_abs_diff_eq!(w.pruned_mass, 1.0, epsilon = 1e-14);
        assert_eq!(w.value, 0.0);
    }
}
