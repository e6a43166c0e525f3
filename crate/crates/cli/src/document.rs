//! Scenario documents: the TOML file format read by `merl analyze` and
//! `merl sweep`.
//!
//! ```toml
//! version = 1
//! register = [2, 2, 2, 2]
//! measured_site = 0
//! control_order = [1, 2, 3]
//! l_tra = "sum"            # or a number
//!
//! [state]
//! builder = "ghz"          # ghz | w | basis | singlet | product | oam_ghz | amplitudes
//! n = 4
//!
//! [tolerances]             # optional
//! split = 1e-7
//!
//! [[observables]]
//! q = "sigma_x"
//! o = "same"               # "same" | matrix | { per_site = [matrix, ...] }
//! ```
//!
//! A matrix is either a name (`sigma_x`, `sigma_y`, `sigma_z`, `pauli_sum`,
//! `j_x`, `j_y`, `j_z`, `spin1_sum`) or `{ rows = [[[re, im], ...], ...] }`.

use serde::{Deserialize, Serialize};

use merl_core::conditional::{ControlChain, ObservablePair};
use merl_core::linalg::{cmatrix_from_rows, CMatrix, CVector, Register, C64};
use merl_core::merl::{LTraMode, MerlScenario, Tolerances};
use merl_core::scenarios::{
    bell_singlet, ghz, oam_ghz, pauli_sum, pauli_x, pauli_y, pauli_z, separable_composite, spin1_sum,
    spin1_x, spin1_y, spin1_z, w_state, OamBasisMap, OamGhzParams,
};
use merl_core::state::{Observable, QuantumState, DEFAULT_PRUNE_TOL};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub version: u32,
    pub register: Vec<usize>,
    pub measured_site: usize,
    pub control_order: Vec<usize>,
    #[serde(default)]
    pub l_tra: LTraSpec,
    pub state: StateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
    pub observables: Vec<ObservableSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LTraSpec {
    /// Only `"sum"` is accepted.
    Keyword(String),
    Value(f64),
}

impl Default for LTraSpec {
    fn default() -> Self {
        Self::Keyword("sum".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Ghz {
        n: usize,
        #[serde(default = "two")]
        d: usize,
    },
    W {
        n: usize,
    },
    /// Computational basis state; `dims` defaults to qubits.
    Basis {
        digits: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dims: Option<Vec<usize>>,
    },
    Singlet,
    Product {
        blocks: Vec<StateSpec>,
    },
    OamGhz {
        mu: f64,
        #[serde(default = "positional")]
        basis_map: String,
    },
    /// Explicit amplitudes as `[re, im]` pairs, normalized on load. The
    /// register comes from the document.
    Amplitudes {
        amplitudes: Vec<[f64; 2]>,
    },
}

fn two() -> usize {
    2
}

fn positional() -> String {
    OamBasisMap::Positional.name().into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Explicit { rows: Vec<Vec<[f64; 2]>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlSpec {
    /// `"same"` or a named matrix.
    Named(String),
    Explicit { rows: Vec<Vec<[f64; 2]>> },
    PerSite { per_site: Vec<MatrixSpec> },
}

impl Default for ControlSpec {
    fn default() -> Self {
        Self::Named("same".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub q: MatrixSpec,
    #[serde(default)]
    pub o: ControlSpec,
}

fn field(path: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{}: {msg}", path.into()))
}

pub fn named_matrix(name: &str) -> Option<CMatrix> {
    Some(match name {
        "sigma_x" => pauli_x(),
        "sigma_y" => pauli_y(),
        "sigma_z" => pauli_z(),
        "pauli_sum" => pauli_sum(),
        "j_x" => spin1_x(),
        "j_y" => spin1_y(),
        "j_z" => spin1_z(),
        "spin1_sum" => spin1_sum(),
        _ => return None,
    })
}

fn explicit_matrix(rows: &[Vec<[f64; 2]>], path: &str) -> Result<CMatrix, CliError> {
    let rows: Vec<Vec<(f64, f64)>> = rows.iter().map(|r| r.iter().map(|&[a, b]| (a, b)).collect()).collect();
    cmatrix_from_rows(&rows).map_err(|e| field(path, e))
}

impl MatrixSpec {
    fn build(&self, path: &str) -> Result<CMatrix, CliError> {
        match self {
            Self::Named(name) => named_matrix(name).ok_or_else(|| field(path, format!("unknown matrix name {name:?}"))),
            Self::Explicit { rows } => explicit_matrix(rows, path),
        }
    }
}

impl StateSpec {
    fn build(&self, reg: &Register, path: &str) -> Result<QuantumState, CliError> {
        let wrap = |e: merl_core::MerlError| field(path, e);
        match self {
            Self::Ghz { n, d } => ghz(*n, *d).map_err(wrap),
            Self::W { n } => w_state(*n).map_err(wrap),
            Self::Basis { digits, dims } => {
                let dims = dims.clone().unwrap_or_else(|| vec![2; digits.len()]);
                let reg = Register::new(dims).map_err(wrap)?;
                QuantumState::basis(reg, digits).map_err(wrap)
            }
            Self::Singlet => Ok(bell_singlet()),
            Self::Product { blocks } => {
                let built = blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.build_standalone(&format!("{path}.blocks[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                separable_composite(&built).map_err(wrap)
            }
            Self::OamGhz { mu, basis_map } => {
                let map = OamBasisMap::from_name(basis_map).ok_or_else(|| {
                    field(format!("{path}.basis_map"), format!("expected \"positional\" or \"m_value\", got {basis_map:?}"))
                })?;
                oam_ghz(&OamGhzParams::new(*mu, map)).map_err(|e| field(format!("{path}.mu"), e))
            }
            Self::Amplitudes { amplitudes } => {
                if amplitudes.len() != reg.total_dim() {
                    return Err(field(
                        format!("{path}.amplitudes"),
                        format!("{} amplitudes for register dimension {}", amplitudes.len(), reg.total_dim()),
                    ));
                }
                let v = CVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|&[a, b]| C64::new(a, b)));
                QuantumState::pure_normalized(reg.clone(), v).map_err(|e| field(format!("{path}.amplitudes"), e))
            }
        }
    }

    /// Blocks inside `product` carry their own register.
    fn build_standalone(&self, path: &str) -> Result<QuantumState, CliError> {
        match self {
            Self::Amplitudes { .. } => Err(field(path, "explicit amplitudes are not allowed inside a product")),
            _ => {
                let placeholder = Register::new(vec![2]).expect("valid");
                self.build(&placeholder, path)
            }
        }
    }
}

impl ScenarioDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Numeric(format!("cannot serialize scenario: {e}")))
    }

    pub fn build(&self) -> Result<MerlScenario, CliError> {
        if self.version != FORMAT_VERSION {
            return Err(field("version", format!("unsupported format version {} (expected {FORMAT_VERSION})", self.version)));
        }
        if let Some((i, d)) = self.register.iter().enumerate().find(|(_, &d)| d < 2) {
            return Err(field(format!("register[{i}]"), format!("dimension {d} < 2")));
        }
        let reg = Register::new(self.register.clone()).map_err(|e| field("register", e))?;
        let state = self.state.build(&reg, "state")?;
        if state.register() != &reg {
            return Err(field(
                "state",
                format!("state lives on register {:?} but the document declares {:?}", state.register().dims(), reg.dims()),
            ));
        }
        let chain = ControlChain::new(self.measured_site, self.control_order.clone(), reg.num_sites())
            .map_err(|e| field("control_order", e))?;
        if self.observables.is_empty() {
            return Err(field("observables", "at least one observable pair is required"));
        }
        let pairs = self
            .observables
            .iter()
            .enumerate()
            .map(|(k, spec)| self.build_pair(k, spec, &reg, &chain))
            .collect::<Result<Vec<_>, _>>()?;
        let l_tra = match &self.l_tra {
            LTraSpec::Keyword(k) if k == "sum" => LTraMode::SumOfVariances,
            LTraSpec::Keyword(k) => return Err(field("l_tra", format!("expected \"sum\" or a number, got {k:?}"))),
            LTraSpec::Value(v) => LTraMode::Explicit(*v),
        };
        let tol = self.tolerances.clone().unwrap_or_default();
        let tolerances = Tolerances { split_tol: tol.split, prune_tol: tol.prune.unwrap_or(DEFAULT_PRUNE_TOL) };
        MerlScenario::new(state, chain, pairs, l_tra, tolerances).map_err(|e| field("tolerances", e))
    }

    fn build_pair(
        &self,
        k: usize,
        spec: &ObservableSpec,
        reg: &Register,
        chain: &ControlChain,
    ) -> Result<ObservablePair, CliError> {
        let qpath = format!("observables[{k}].q");
        let opath = format!("observables[{k}].o");
        let qm = spec.q.build(&qpath)?;
        let q = Observable::new(reg, chain.measured(), qm.clone()).map_err(|e| field(&qpath, e))?;
        let per_site: Vec<CMatrix> = match &spec.o {
            ControlSpec::Named(n) if n == "same" => vec![qm; chain.len()],
            ControlSpec::Named(n) => vec![MatrixSpec::Named(n.clone()).build(&opath)?; chain.len()],
            ControlSpec::Explicit { rows } => vec![explicit_matrix(rows, &opath)?; chain.len()],
            ControlSpec::PerSite { per_site } => {
                if per_site.len() != chain.len() {
                    return Err(field(
                        format!("{opath}.per_site"),
                        format!("{} operators for {} controls", per_site.len(), chain.len()),
                    ));
                }
                per_site
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.build(&format!("{opath}.per_site[{i}]")))
                    .collect::<Result<_, _>>()?
            }
        };
        let os = chain
            .controls()
            .iter()
            .zip(per_site)
            .map(|(&site, m)| Observable::new(reg, site, m).map_err(|e| field(&opath, e)))
            .collect::<Result<Vec<_>, _>>()?;
        ObservablePair::new(q, os).map_err(|e| field(&opath, e))
    }

    /// Qubit Pauli set `σ_x, σ_y, σ_z, σ_x+σ_y+σ_z` with `O = Q`.
    pub fn pauli_observables() -> Vec<ObservableSpec> {
        ["sigma_x", "sigma_y", "sigma_z", "pauli_sum"]
            .into_iter()
            .map(|n| ObservableSpec { q: MatrixSpec::Named(n.into()), o: ControlSpec::default() })
            .collect()
    }

    /// Spin-1 set `J_x, J_y, J_z, J_x+J_y+J_z` with `O = Q`.
    pub fn spin1_observables() -> Vec<ObservableSpec> {
        ["j_x", "j_y", "j_z", "spin1_sum"]
            .into_iter()
            .map(|n| ObservableSpec { q: MatrixSpec::Named(n.into()), o: ControlSpec::default() })
            .collect()
    }

    /// Built-in four-qubit documents, in the order GHZ₄, GHZ₃⊗|0⟩,
    /// Bell⊗|00⟩, |0000⟩.
    pub fn fig2() -> Vec<(&'static str, ScenarioDocument)> {
        let zero = || StateSpec::Basis { digits: vec![0], dims: None };
        let states = [
            ("ghz4", StateSpec::Ghz { n: 4, d: 2 }),
            ("ghz3_x_0", StateSpec::Product { blocks: vec![StateSpec::Ghz { n: 3, d: 2 }, zero()] }),
            ("bell_x_00", StateSpec::Product { blocks: vec![StateSpec::Ghz { n: 2, d: 2 }, zero(), zero()] }),
            ("zero4", StateSpec::Basis { digits: vec![0; 4], dims: None }),
        ];
        states
            .into_iter()
            .map(|(name, state)| {
                let doc = ScenarioDocument {
                    version: FORMAT_VERSION,
                    register: vec![2; 4],
                    measured_site: 0,
                    control_order: vec![1, 2, 3],
                    l_tra: LTraSpec::default(),
                    state,
                    tolerances: None,
                    observables: Self::pauli_observables(),
                };
                (name, doc)
            })
            .collect()
    }

    /// Three-qutrit OAM GHZ document.
    pub fn fig3(mu: f64, map: OamBasisMap) -> ScenarioDocument {
        ScenarioDocument {
            version: FORMAT_VERSION,
            register: vec![3; 3],
            measured_site: 0,
            control_order: vec![1, 2],
            l_tra: LTraSpec::default(),
            state: StateSpec::OamGhz { mu, basis_map: map.name().into() },
            tolerances: None,
            observables: Self::spin1_observables(),
        }
    }

    /// Document carrying explicit amplitudes for a pure state.
    pub fn with_amplitudes(state: &QuantumState, measured_site: usize, control_order: Vec<usize>, observables: Vec<ObservableSpec>) -> Option<Self> {
        let amps = state.amplitudes()?;
        Some(ScenarioDocument {
            version: FORMAT_VERSION,
            register: state.register().dims().to_vec(),
            measured_site,
            control_order,
            l_tra: LTraSpec::default(),
            state: StateSpec::Amplitudes { amplitudes: amps.iter().map(|z| [z.re, z.im]).collect() },
            tolerances: None,
            observables,
        })
    }
}
