use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{prepare_input, FockStateVector, OracleConfig, PostSelectionOperator};
use crate::optics::Circuit;
use crate::weak_value::{InputState, PostSelection, WeakValue};

/// Post-selected transition amplitudes resolved by the probe eigenvalue `n`.
///
/// For a projective post-selection onto one final state these are amplitudes
/// `A_n`. A detector that leaves other modes unobserved sums over final basis
/// states, so the general object is the coherence matrix
/// `ρ[n][n'] = Σ_s A_n(s) conj(A_n'(s))`, which is what is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorAmplitudes {
    dim: usize,
    rho: Vec<Complex64>,
}

impl SectorAmplitudes {
    /// A single branch of amplitudes `A_n`.
    pub fn pure(amplitudes: &[Complex64]) -> Self {
        let dim = amplitudes.len();
        let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, a) in amplitudes.iter().enumerate() {
            for (j, b) in amplitudes.iter().enumerate() {
                rho[i * dim + j] = a * b.conj();
            }
        }
        Self { dim, rho }
    }

    /// Builds the coherence matrix from a row-major `dim × dim` buffer.
    pub fn from_coherences(dim: usize, rho: Vec<Complex64>) -> Result<Self> {
        if rho.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: rho.len() });
        }
        Ok(Self { dim, rho })
    }

    /// Number of eigenvalue sectors, `0..dim`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coherence(&self, n: usize, m: usize) -> Complex64 {
        self.rho[n * self.dim + m]
    }

    /// Post-selection probability without any pointer coupling, `Σ ρ[n][n']`.
    pub fn probability(&self) -> f64 {
        self.rho.iter().map(|z| z.re).sum()
    }

    /// `Σ n ρ[n][n'] / Σ ρ[n][n']`.
    pub fn weak_value(&self) -> Option<WeakValue> {
        let den = self.probability();
        if den <= 0.0 {
            return None;
        }
        let mut num = Complex64::new(0.0, 0.0);
        for n in 0..self.dim {
            for m in 0..self.dim {
                num += self.coherence(n, m) * n as f64;
            }
        }
        Some((num / den).into())
    }

    /// Largest sector index with a nonzero diagonal entry.
    pub fn max_sector(&self) -> usize {
        (0..self.dim).rev().find(|&n| self.coherence(n, n).re > 0.0).unwrap_or(0)
    }
}

/// States `U(t_f,t_p) Π_n U(t_p,t_i)|ψ⟩` for every occupied probe eigenvalue `n`.
pub(crate) struct SectorStates {
    states: Vec<Option<FockStateVector>>,
}

impl SectorStates {
    pub(crate) fn new(circuit: &Circuit, input: &FockStateVector) -> Result<Self> {
        circuit.validate()?;
        if !circuit.is_loss_free() {
            return Err(Error::LossNotExpanded);
        }
        let mut at_probe = input.clone();
        at_probe.apply_elements(&circuit.pre_probe)?;
        let probe_number =
            |occ: &[u16]| -> usize { circuit.probe_modes.iter().map(|&p| occ[p] as usize).sum() };
        let cutoff = input.basis().cutoff();
        let states = (0..=cutoff)
            .map(|n| -> Result<Option<FockStateVector>> {
                let mut projected = at_probe.clone();
                projected.scale_by(|occ| if probe_number(occ) == n { 1.0 } else { 0.0 });
                if projected.norm_sqr() == 0.0 {
                    return Ok(None);
                }
                projected.apply_elements(&circuit.post_probe)?;
                Ok(Some(projected))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { states })
    }

    pub(crate) fn contract(&self, ps: &PostSelectionOperator) -> Result<SectorAmplitudes> {
        let dim = self.states.len();
        let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
        match ps {
            PostSelectionOperator::Full(target) => {
                let amps = self
                    .states
                    .iter()
                    .map(|s| s.as_ref().map_or(Ok(Complex64::new(0.0, 0.0)), |s| target.inner(s)))
                    .collect::<Result<Vec<_>>>()?;
                return Ok(SectorAmplitudes::pure(&amps));
            }
            _ => {
                let weights = self.diagonal_weights(ps);
                for (n, sn) in self.states.iter().enumerate() {
                    let Some(sn) = sn else { continue };
                    for (m, sm) in self.states.iter().enumerate().skip(n) {
                        let Some(sm) = sm else { continue };
                        let z: Complex64 = sn
                            .amplitudes
                            .iter()
                            .zip(&sm.amplitudes)
                            .zip(&weights)
                            .filter(|(_, &w)| w != 0.0)
                            .map(|((a, b), w)| a * b.conj() * w)
                            .sum();
                        rho[n * dim + m] = z;
                        rho[m * dim + n] = z.conj();
                    }
                }
            }
        }
        Ok(SectorAmplitudes { dim, rho })
    }

    fn diagonal_weights(&self, ps: &PostSelectionOperator) -> Vec<f64> {
        let Some(basis) = self.states.iter().flatten().next().map(|s| s.basis().clone()) else {
            return Vec::new();
        };
        basis
            .iter()
            .map(|occ| match *ps {
                PostSelectionOperator::NoneOp => 1.0,
                PostSelectionOperator::FockProjector { mode, m } => f64::from(u8::from(occ[mode] as u32 == m)),
                PostSelectionOperator::ClickOperator { mode } => f64::from(u8::from(occ[mode] > 0)),
                PostSelectionOperator::Full(_) => unreachable!("handled by caller"),
            })
            .collect()
    }
}

/// Sector-resolved post-selected amplitudes of the circuit's probe photon number.
pub fn sector_amplitudes(
    circuit: &Circuit,
    input: &InputState,
    ps: PostSelection,
    cfg: &OracleConfig,
) -> Result<SectorAmplitudes> {
    let state = prepare_input(circuit, input, cfg)?;
    let sectors = SectorStates::new(circuit, &state)?.contract(
        &PostSelectionOperator::from_post_selection(ps, circuit.detect_mode),
    )?;
    let p = sectors.probability();
    if p.is_nan() || p < cfg.p_min {
        return Err(Error::PostSelectionTooRare { event: ps.to_string(), probability: p, p_min: cfg.p_min });
    }
    Ok(sectors)
}

/// Click and no-click sector coherences from one set of evolved states.
pub fn click_sectors(
    circuit: &Circuit,
    input: &InputState,
    cfg: &OracleConfig,
) -> Result<(SectorAmplitudes, SectorAmplitudes)> {
    let state = prepare_input(circuit, input, cfg)?;
    let sectors = SectorStates::new(circuit, &state)?;
    let click = sectors.contract(&PostSelectionOperator::ClickOperator { mode: circuit.detect_mode })?;
    let noclick =
        sectors.contract(&PostSelectionOperator::FockProjector { mode: circuit.detect_mode, m: 0 })?;
    Ok((click, noclick))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::oracle_weak_value;
    use crate::optics::CircuitElement;

    fn two_mode() -> Circuit {
        Circuit {
            n_modes: 2,
            pre_probe: vec![CircuitElement::beam_splitter(0, 1, 0.6, 0.2)],
            post_probe: vec![CircuitElement::phase(0, 2.5), CircuitElement::beam_splitter(0, 1, 0.8, 0.0)],
            input_mode: 0,
            probe_modes: vec![0],
            detect_mode: 1,
        }
    }

    #[test]
    fn single_photon_identity() {
        let c = Circuit::identity(1, 0);
        let s = sector_amplitudes(&c, &InputState::SinglePhoton, PostSelection::Fock(1), &OracleConfig::default())
            .unwrap();
        for n in 0..s.dim() {
            for m in 0..s.dim() {
                let expected = if n == 1 && m == 1 { 1.0 } else { 0.0 };
                assert!((s.coherence(n, m) - expected).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn vacuum_sits_in_sector_zero() {
        let c = two_mode();
        let s = sector_amplitudes(
            &c,
            &InputState::Coherent(Complex64::new(0.0, 0.0)),
            PostSelection::None,
            &OracleConfig::default(),
        )
        .unwrap();
        assert!((s.coherence(0, 0).re - 1.0).abs() < 1e-15);
        assert!((s.probability() - 1.0).abs() < 1e-15);
        assert_eq!(s.max_sector(), 0);
    }

    #[test]
    fn sector_decomposition_reproduces_weak_value() {
        let c = two_mode();
        let cfg = OracleConfig::default();
        let input = InputState::Coherent(Complex64::new(1.1, 0.4));
        for ps in [PostSelection::Click, PostSelection::NoClick, PostSelection::Fock(2), PostSelection::None] {
            let s = sector_amplitudes(&c, &input, ps, &cfg).unwrap();
            let direct = oracle_weak_value(&c, &input, ps, &cfg).unwrap();
            assert!(s.weak_value().unwrap().distance(direct) < 1e-10, "{ps}");
        }
    }

    #[test]
    fn click_and_noclick_partition_probability() {
        let c = two_mode();
        let (click, noclick) =
            click_sectors(&c, &InputState::Coherent(Complex64::new(0.7, 0.0)), &OracleConfig::default()).unwrap();
        assert!((click.probability() + noclick.probability() - 1.0).abs() < 1e-12);
    }
}
