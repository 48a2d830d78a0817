//! Weak values evaluated directly as inner products of truncated state vectors.

use std::sync::Arc;

use num_complex::Complex64;

use super::basis::{FockBasis, DEFAULT_SIZE_LIMIT};
use super::state::{prepare_coherent, FockStateVector, DEFAULT_TAIL_TOLERANCE};
use crate::error::{Error, Result};
use crate::optics::{Circuit, CoherentVector};
use crate::weak_value::{InputState, PostSelection, WeakValue, DEFAULT_P_MIN};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub p_min: f64,
    pub tail_tolerance: f64,
    pub size_limit: usize,
    /// Relative residual of the best product approximation above which a
    /// final state counts as entangled across detector and rest.
    pub factorization_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            p_min: DEFAULT_P_MIN,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            size_limit: DEFAULT_SIZE_LIMIT,
            factorization_tol: 1e-6,
        }
    }
}

/// Photon cutoff for a coherent input of total mean photon number `mean`:
/// `ceil(mean + 10·√(mean + 1))`, at least 4.
pub fn cutoff_for_mean(mean: f64) -> usize {
    ((mean + 10.0 * (mean + 1.0).sqrt()).ceil() as usize).max(4)
}

pub fn cutoff_for_input(input: &InputState) -> usize {
    match input {
        InputState::Coherent(alpha) => cutoff_for_mean(alpha.norm_sqr()),
        // Evolution conserves photon number, so one photon never needs more.
        InputState::SinglePhoton => 4,
    }
}

/// The circuit's input state on a basis sized by [`cutoff_for_input`].
pub fn prepare_input(circuit: &Circuit, input: &InputState, cfg: &OracleConfig) -> Result<FockStateVector> {
    let basis = Arc::new(FockBasis::with_limit(
        circuit.n_modes,
        cutoff_for_input(input),
        cfg.size_limit,
    )?);
    match *input {
        InputState::Coherent(alpha) => prepare_coherent(
            basis,
            &CoherentVector::single_mode(circuit.n_modes, circuit.input_mode, alpha),
            cfg.tail_tolerance,
        ),
        InputState::SinglePhoton => FockStateVector::single_photon(basis, circuit.input_mode),
    }
}

/// Observable coupled to the probe.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// Total photon number of a set of modes.
    PhotonNumber(Vec<usize>),
    Identity,
}

impl Observable {
    pub fn eigenvalue(&self, occupation: &[u16]) -> f64 {
        match self {
            Observable::PhotonNumber(modes) => modes.iter().map(|&m| occupation[m] as f64).sum(),
            Observable::Identity => 1.0,
        }
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        if let Observable::PhotonNumber(modes) = self {
            if modes.is_empty() {
                return Err(Error::InvalidParameter("observable mode set is empty".into()));
            }
            if let Some(&m) = modes.iter().find(|&&m| m >= n_modes) {
                return Err(Error::InvalidModeIndex { index: m, n_modes });
            }
        }
        Ok(())
    }
}

/// Positive operator describing the final measurement.
#[derive(Clone, Debug)]
pub enum PostSelectionOperator {
    NoneOp,
    /// `|m⟩⟨m|` on `mode`, identity elsewhere.
    FockProjector { mode: usize, m: u32 },
    /// `I − |0⟩⟨0|` on `mode`, identity elsewhere.
    ClickOperator { mode: usize },
    /// Projector onto a full final state.
    Full(FockStateVector),
}

impl PostSelectionOperator {
    pub fn from_post_selection(ps: PostSelection, detect_mode: usize) -> Self {
        match ps {
            PostSelection::None => PostSelectionOperator::NoneOp,
            PostSelection::Fock(m) => PostSelectionOperator::FockProjector { mode: detect_mode, m },
            PostSelection::NoClick => PostSelectionOperator::FockProjector { mode: detect_mode, m: 0 },
            PostSelection::Click => PostSelectionOperator::ClickOperator { mode: detect_mode },
        }
    }

    /// Weight of a basis state for operators diagonal in the Fock basis.
    fn diagonal(&self, occupation: &[u16]) -> Option<f64> {
        match *self {
            PostSelectionOperator::NoneOp => Some(1.0),
            PostSelectionOperator::FockProjector { mode, m } => {
                Some(if occupation[mode] as u32 == m { 1.0 } else { 0.0 })
            }
            PostSelectionOperator::ClickOperator { mode } => {
                Some(if occupation[mode] > 0 { 1.0 } else { 0.0 })
            }
            PostSelectionOperator::Full(_) => None,
        }
    }

    /// Weight as a function of the detected mode's occupation only.
    fn detect_filter(&self, detect_mode: usize) -> Result<Box<dyn Fn(u16) -> f64>> {
        match *self {
            PostSelectionOperator::NoneOp => Ok(Box::new(|_| 1.0)),
            PostSelectionOperator::FockProjector { mode, m } if mode == detect_mode => {
                Ok(Box::new(move |n| if n as u32 == m { 1.0 } else { 0.0 }))
            }
            PostSelectionOperator::ClickOperator { mode } if mode == detect_mode => {
                Ok(Box::new(|n| if n > 0 { 1.0 } else { 0.0 }))
            }
            _ => Err(Error::InvalidParameter(
                "post-selection must act on the detected mode only".into(),
            )),
        }
    }

    fn describe(&self) -> String {
        match self {
            PostSelectionOperator::NoneOp => "none".into(),
            PostSelectionOperator::FockProjector { mode, m } => format!("|{m}><{m}| on mode {mode}"),
            PostSelectionOperator::ClickOperator { mode } => format!("click on mode {mode}"),
            PostSelectionOperator::Full(_) => "projector onto final state".into(),
        }
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        match self {
            PostSelectionOperator::FockProjector { mode, .. } | PostSelectionOperator::ClickOperator { mode }
                if *mode >= n_modes =>
            {
                Err(Error::InvalidModeIndex { index: *mode, n_modes })
            }
            _ => Ok(()),
        }
    }
}

/// `⟨bra| E |ket⟩`.
fn sandwich(bra: &FockStateVector, op: &PostSelectionOperator, ket: &FockStateVector) -> Result<Complex64> {
    bra.check_same_basis(ket)?;
    if let PostSelectionOperator::Full(target) = op {
        return Ok(bra.inner(target)? * target.inner(ket)?);
    }
    Ok(bra
        .basis()
        .iter()
        .zip(bra.amplitudes.iter().zip(&ket.amplitudes))
        .map(|(occ, (b, k))| {
            let w = op.diagonal(occ).expect("diagonal operator");
            if w == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                b.conj() * k * w
            }
        })
        .sum())
}

fn check_circuit(circuit: &Circuit, state: &FockStateVector) -> Result<()> {
    circuit.validate()?;
    if !circuit.is_loss_free() {
        return Err(Error::LossNotExpanded);
    }
    if state.basis().n_modes() != circuit.n_modes {
        return Err(Error::DimensionMismatch {
            expected: circuit.n_modes,
            found: state.basis().n_modes(),
        });
    }
    Ok(())
}

/// The two evolved states a weak value is contracted from.
#[derive(Clone, Debug)]
pub struct OracleRun {
    /// `U(t_f, t_i)|ψ⟩`.
    pub plain: FockStateVector,
    /// `U(t_f, t_p) Λ U(t_p, t_i)|ψ⟩`.
    pub numerator: FockStateVector,
}

impl OracleRun {
    pub fn new(circuit: &Circuit, input: &FockStateVector, obs: &Observable) -> Result<Self> {
        check_circuit(circuit, input)?;
        obs.validate(circuit.n_modes)?;
        let mut at_probe = input.clone();
        at_probe.apply_elements(&circuit.pre_probe)?;
        let mut numerator = at_probe.clone();
        numerator.scale_by(|occ| obs.eigenvalue(occ));
        numerator.apply_elements(&circuit.post_probe)?;
        let mut plain = at_probe;
        plain.apply_elements(&circuit.post_probe)?;
        Ok(Self { plain, numerator })
    }

    /// `⟨ψ|U† E U|ψ⟩` (excluding the truncated tail).
    pub fn probability(&self, ps: &PostSelectionOperator) -> Result<f64> {
        ps.validate(self.plain.basis().n_modes())?;
        Ok(sandwich(&self.plain, ps, &self.plain)?.re)
    }

    pub fn weak_value(&self, ps: &PostSelectionOperator, p_min: f64) -> Result<WeakValue> {
        let denominator = self.probability(ps)?;
        if denominator.is_nan() || denominator < p_min {
            return Err(Error::PostSelectionTooRare {
                event: ps.describe(),
                probability: denominator,
                p_min,
            });
        }
        Ok((sandwich(&self.plain, ps, &self.numerator)? / denominator).into())
    }
}

/// `⟨ψ|U(t_f,t_i)† E U(t_f,t_p) Λ U(t_p,t_i)|ψ⟩ / ⟨ψ|U(t_f,t_i)† E U(t_f,t_i)|ψ⟩`.
pub fn generalized_weak_value(
    circuit: &Circuit,
    input: &FockStateVector,
    obs: &Observable,
    ps: &PostSelectionOperator,
    cfg: &OracleConfig,
) -> Result<WeakValue> {
    OracleRun::new(circuit, input, obs)?.weak_value(ps, cfg.p_min)
}

/// Photon-number weak value of the circuit's probe modes, computed by brute force.
pub fn oracle_weak_value(
    circuit: &Circuit,
    input: &InputState,
    ps: PostSelection,
    cfg: &OracleConfig,
) -> Result<WeakValue> {
    let state = prepare_input(circuit, input, cfg)?;
    generalized_weak_value(
        circuit,
        &state,
        &Observable::PhotonNumber(circuit.probe_modes.clone()),
        &PostSelectionOperator::from_post_selection(ps, circuit.detect_mode),
        cfg,
    )
}

/// Both sides of the product-state post-selection identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaCheck {
    /// Weak value with the undetected modes ignored, `E_A ⊗ I`.
    pub ignored: WeakValue,
    /// Weak value with the undetected modes projected onto their final state.
    pub projected: WeakValue,
    pub difference: f64,
    /// Relative residual of the product approximation of the final state.
    pub factorization_residual: f64,
}

/// Rows are detected-mode occupations, columns the configurations of the
/// remaining modes.
struct Split {
    rows: Vec<Vec<Complex64>>,
}

fn split_detected(state: &FockStateVector, detect: usize) -> Result<Split> {
    let basis = state.basis();
    let n_modes = basis.n_modes();
    let cutoff = basis.cutoff();
    let rest_basis = if n_modes > 1 {
        Some(FockBasis::new(n_modes - 1, cutoff)?)
    } else {
        None
    };
    let width = rest_basis.as_ref().map_or(1, |b| b.len());
    let mut rows = vec![vec![Complex64::new(0.0, 0.0); width]; cutoff + 1];
    let mut rest = Vec::with_capacity(n_modes.saturating_sub(1));
    for (occ, a) in basis.iter().zip(&state.amplitudes) {
        let col = match &rest_basis {
            Some(rb) => {
                rest.clear();
                rest.extend(occ.iter().enumerate().filter(|(k, _)| *k != detect).map(|(_, &n)| n));
                rb.index_of(&rest).expect("rest occupation fits the cutoff")
            }
            None => 0,
        };
        rows[occ[detect] as usize][col] = *a;
    }
    Ok(Split { rows })
}

fn dot_conj(v: &[Complex64], w: &[Complex64]) -> Complex64 {
    v.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

/// Compares post-selecting `E_A` on the detected mode while ignoring the rest
/// against additionally projecting the rest onto its actual final state.
///
/// The final state must factorize across the detected mode and the rest; a
/// single photon split between them does not, and yields
/// [`Error::NotFactorizable`].
pub fn lemma_check(
    circuit: &Circuit,
    input: &FockStateVector,
    obs: &Observable,
    e_a: &PostSelectionOperator,
    cfg: &OracleConfig,
) -> Result<LemmaCheck> {
    let run = OracleRun::new(circuit, input, obs)?;
    let detect = circuit.detect_mode;
    let filter = e_a.detect_filter(detect)?;

    let plain = split_detected(&run.plain, detect)?;
    let numer = split_detected(&run.numerator, detect)?;

    // Best product approximation plain ≈ u ⊗ v, v taken from the heaviest row.
    let norms: Vec<f64> = plain.rows.iter().map(|r| r.iter().map(|a| a.norm_sqr()).sum()).collect();
    let total: f64 = norms.iter().sum();
    let (heavy, &heavy_norm) = norms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one row");
    if heavy_norm == 0.0 {
        return Err(Error::InvalidParameter("input state is zero".into()));
    }
    let scale = heavy_norm.sqrt();
    let rest_state: Vec<Complex64> = plain.rows[heavy].iter().map(|a| a / scale).collect();
    let plain_proj: Vec<Complex64> = plain.rows.iter().map(|r| dot_conj(&rest_state, r)).collect();
    let residual_sqr: f64 = plain
        .rows
        .iter()
        .zip(&plain_proj)
        .map(|(row, &u)| {
            row.iter()
                .zip(&rest_state)
                .map(|(a, v)| (a - u * v).norm_sqr())
                .sum::<f64>()
        })
        .sum();
    let residual = (residual_sqr / total).sqrt();
    if residual > cfg.factorization_tol {
        return Err(Error::NotFactorizable { residual });
    }
    let numer_proj: Vec<Complex64> = numer.rows.iter().map(|r| dot_conj(&rest_state, r)).collect();

    let ignored = run.weak_value(e_a, cfg.p_min)?;

    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (n, (p, q)) in plain_proj.iter().zip(&numer_proj).enumerate() {
        let w = filter(n as u16);
        num += p.conj() * q * w;
        den += p.norm_sqr() * w;
    }
    if den.is_nan() || den < cfg.p_min {
        return Err(Error::PostSelectionTooRare {
            event: format!("{} with rest projected", e_a.describe()),
            probability: den,
            p_min: cfg.p_min,
        });
    }
    let projected: WeakValue = (num / den).into();
    Ok(LemmaCheck {
        ignored,
        projected,
        difference: ignored.distance(projected),
        factorization_residual: residual,
    })
}
