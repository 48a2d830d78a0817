use std::sync::Arc;

use num_complex::Complex64;

use super::basis::FockBasis;
use crate::error::{Error, Result};
use crate::optics::{beam_splitter_block, decompose_unitary, CircuitElement, CoherentVector, ModeMatrix};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Default bound on the probability mass a coherent state may lose to the cutoff.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

/// Amplitudes over a truncated Fock basis.
///
/// The probability mass discarded by the cutoff is kept in `truncation_tail`;
/// amplitudes are never renormalized to hide it.
#[derive(Clone, Debug)]
pub struct FockStateVector {
    basis: Arc<FockBasis>,
    pub amplitudes: Vec<Complex64>,
    pub truncation_tail: f64,
}

impl FockStateVector {
    pub fn zeros(basis: Arc<FockBasis>) -> Self {
        let n = basis.len();
        Self { basis, amplitudes: vec![ZERO; n], truncation_tail: 0.0 }
    }

    pub fn vacuum(basis: Arc<FockBasis>) -> Self {
        let mut s = Self::zeros(basis);
        s.amplitudes[0] = Complex64::new(1.0, 0.0);
        s
    }

    /// One photon in `mode`, vacuum elsewhere.
    pub fn single_photon(basis: Arc<FockBasis>, mode: usize) -> Result<Self> {
        let n_modes = basis.n_modes();
        if mode >= n_modes {
            return Err(Error::InvalidModeIndex { index: mode, n_modes });
        }
        if basis.cutoff() < 1 {
            return Err(Error::InvalidParameter("cutoff 0 cannot hold a photon".into()));
        }
        let mut occ = vec![0u16; n_modes];
        occ[mode] = 1;
        let idx = basis.index_of(&occ).expect("single photon lies inside the basis");
        let mut s = Self::zeros(basis);
        s.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockStateVector) -> Result<Complex64> {
        self.check_same_basis(other)?;
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    pub(crate) fn check_same_basis(&self, other: &FockStateVector) -> Result<()> {
        if !Arc::ptr_eq(&self.basis, &other.basis) && *self.basis != *other.basis {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                found: other.basis.len(),
            });
        }
        Ok(())
    }

    /// Probability in each total-photon-number sector.
    pub fn sector_weights(&self) -> Vec<f64> {
        (0..=self.basis.cutoff())
            .map(|n| self.amplitudes[self.basis.sector(n)].iter().map(|a| a.norm_sqr()).sum())
            .collect()
    }

    /// Mean occupation of `mode` computed from the amplitudes.
    pub fn mean_occupation(&self, mode: usize) -> f64 {
        self.basis
            .iter()
            .zip(&self.amplitudes)
            .map(|(occ, a)| occ[mode] as f64 * a.norm_sqr())
            .sum()
    }

    /// Multiplies every basis amplitude by `weight(occupation)`.
    pub fn scale_by(&mut self, weight: impl Fn(&[u16]) -> f64) {
        for (occ, a) in self.basis.iter().zip(self.amplitudes.iter_mut()) {
            *a *= weight(occ);
        }
    }

    /// Applies one passive element exactly within every photon-number sector.
    pub fn apply_element(&mut self, element: &CircuitElement) -> Result<()> {
        let n_modes = self.basis.n_modes();
        element.validate(n_modes)?;
        match *element {
            CircuitElement::PhaseShifter { mode, phi } => {
                let phases: Vec<Complex64> = (0..=self.basis.cutoff())
                    .map(|n| Complex64::from_polar(1.0, phi * n as f64))
                    .collect();
                for (occ, a) in self.basis.iter().zip(self.amplitudes.iter_mut()) {
                    *a *= phases[occ[mode] as usize];
                }
            }
            CircuitElement::BeamSplitter { mode_a, mode_b, theta, phi } => {
                self.apply_two_mode(mode_a, mode_b, beam_splitter_block(theta, phi));
            }
            CircuitElement::Loss { .. } => return Err(Error::LossNotExpanded),
        }
        Ok(())
    }

    pub fn apply_elements(&mut self, elements: &[CircuitElement]) -> Result<()> {
        elements.iter().try_for_each(|e| self.apply_element(e))
    }

    /// Lifts a 2×2 unitary acting on modes `(a, b)` to the Fock space.
    fn apply_two_mode(&mut self, a: usize, b: usize, u: [[Complex64; 2]; 2]) {
        let sectors = two_mode_sector_matrices(u, self.basis.cutoff());
        let basis = Arc::clone(&self.basis);
        let mut occ = vec![0u16; basis.n_modes()];
        let mut idx = Vec::with_capacity(basis.cutoff() + 1);
        let mut input = Vec::with_capacity(basis.cutoff() + 1);
        // Each group shares the occupations of the other modes and n_a + n_b;
        // the representative has every photon of the pair in mode a.
        for rep in 0..basis.len() {
            let rep_occ = basis.occupation(rep);
            if rep_occ[b] != 0 {
                continue;
            }
            let pair = rep_occ[a] as usize;
            if pair == 0 {
                continue;
            }
            occ.copy_from_slice(rep_occ);
            let total: usize = occ.iter().map(|&n| n as usize).sum();
            idx.clear();
            input.clear();
            for k in 0..=pair {
                occ[a] = k as u16;
                occ[b] = (pair - k) as u16;
                let i = basis.index_unchecked(&occ, total);
                idx.push(i);
                input.push(self.amplitudes[i]);
            }
            let v = &sectors[pair];
            for (k, &i) in idx.iter().enumerate() {
                let row = &v[k * (pair + 1)..(k + 1) * (pair + 1)];
                self.amplitudes[i] = row.iter().zip(&input).map(|(m, x)| m * x).sum();
            }
        }
    }

    /// Applies a mode matrix by decomposing it into beam splitters and phases.
    pub fn apply_matrix(&mut self, m: &ModeMatrix) -> Result<()> {
        if m.dim() != self.basis.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.basis.n_modes(), found: m.dim() });
        }
        let elements = decompose_unitary(m)?;
        self.apply_elements(&elements)
    }
}

/// What a circuit can be lifted from.
pub enum Transformation<'a> {
    Elements(&'a [CircuitElement]),
    Matrix(&'a ModeMatrix),
}

/// Evolves `state` through a passive transformation.
pub fn lift_and_apply(transformation: Transformation<'_>, state: &FockStateVector) -> Result<FockStateVector> {
    let mut out = state.clone();
    match transformation {
        Transformation::Elements(elements) => out.apply_elements(elements)?,
        Transformation::Matrix(m) => out.apply_matrix(m)?,
    }
    Ok(out)
}

/// Per-sector matrices `V[N][k][j] = ⟨k, N−k| U |j, N−j⟩` of a two-mode
/// unitary, flattened row-major, built by the stable creation-operator
/// recursion.
pub(crate) fn two_mode_sector_matrices(u: [[Complex64; 2]; 2], cutoff: usize) -> Vec<Vec<Complex64>> {
    let [[uaa, uab], [uba, ubb]] = u;
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(cutoff + 1);
    out.push(vec![Complex64::new(1.0, 0.0)]);
    for n in 1..=cutoff {
        let prev = &out[n - 1];
        let dim = n + 1;
        let prev_dim = n;
        let at = |k: isize, j: usize| -> Complex64 {
            if k < 0 || k as usize >= prev_dim {
                ZERO
            } else {
                prev[k as usize * prev_dim + j]
            }
        };
        let mut v = vec![ZERO; dim * dim];
        for j in 0..dim {
            // |j, n−j⟩ is built from sector n−1 by adding a photon in a (j > 0)
            // or, for j = 0, in b.
            let (ca, cb, src, norm) = if j > 0 {
                (uaa, uba, j - 1, (j as f64).sqrt())
            } else {
                (uab, ubb, 0, (n as f64).sqrt())
            };
            for k in 0..dim {
                let up = at(k as isize - 1, src) * (k as f64).sqrt();
                let stay = at(k as isize, src) * ((n - k) as f64).sqrt();
                v[k * dim + j] = (ca * up + cb * stay) / norm;
            }
        }
        out.push(v);
    }
    out
}

/// Coherent product state truncated to the basis.
///
/// Fails with [`Error::TailTooLarge`] when the discarded probability exceeds
/// `tail_tolerance`.
pub fn prepare_coherent(
    basis: Arc<FockBasis>,
    coherent: &CoherentVector,
    tail_tolerance: f64,
) -> Result<FockStateVector> {
    if coherent.len() != basis.n_modes() {
        return Err(Error::DimensionMismatch { expected: basis.n_modes(), found: coherent.len() });
    }
    let cutoff = basis.cutoff();
    // Single-mode amplitudes e^{−|a|²/2} a^n / √n!.
    let per_mode: Vec<Vec<Complex64>> = coherent
        .amplitudes
        .iter()
        .map(|&alpha| {
            let mut amps = Vec::with_capacity(cutoff + 1);
            let mut current = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
            amps.push(current);
            for n in 1..=cutoff {
                current = current * alpha / (n as f64).sqrt();
                amps.push(current);
            }
            amps
        })
        .collect();
    let mut state = FockStateVector::zeros(Arc::clone(&basis));
    for (occ, a) in basis.iter().zip(state.amplitudes.iter_mut()) {
        *a = occ
            .iter()
            .zip(&per_mode)
            .fold(Complex64::new(1.0, 0.0), |acc, (&n, amps)| acc * amps[n as usize]);
    }
    let tail = (1.0 - state.norm_sqr()).max(0.0);
    state.truncation_tail = tail;
    if tail > tail_tolerance {
        return Err(Error::TailTooLarge { tail, tolerance: tail_tolerance });
    }
    Ok(state)
}
