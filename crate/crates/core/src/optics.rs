//! Passive linear optics on mode amplitudes.
//!
//! A circuit acts on the vector of coherent amplitudes by a unitary
//! [`ModeMatrix`]. The beam-splitter convention used everywhere in this crate
//! is the 2×2 block
//!
//! ```text
//! [ cosθ            −e^{−iφ} sinθ ]
//! [ e^{iφ} sinθ      cosθ         ]
//! ```
//!
//! acting on `(mode_a, mode_b)`; a phase shifter multiplies one amplitude by
//! `e^{iφ}`. In the Fock picture the same matrix transports creation
//! operators as `U a_j† U† = Σ_k M[k][j] a_k†`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `‖M†M − I‖_max` for a matrix to count as unitary.
pub const UNITARITY_TOL: f64 = 1e-12;

/// Complex amplitude of one mode (coherent amplitude or matrix entry).
pub type Amplitude = Complex64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Dense square matrix acting on mode amplitudes, stored row-major.
#[derive(Clone, PartialEq)]
pub struct ModeMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ModeMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self { dim, entries }
    }

    /// Builds a matrix from rows. Fails if the rows are ragged or empty.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            entries.extend(row);
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &ModeMatrix) -> Result<ModeMatrix> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rhs.dim });
        }
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * rhs.get(k, j);
                }
            }
        }
        Ok(ModeMatrix { dim: n, entries: out })
    }

    pub fn adjoint(&self) -> ModeMatrix {
        let n = self.dim;
        let mut out = ModeMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// `‖M†M − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.get(k, i).conj() * self.get(k, j);
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_defect() < UNITARITY_TOL
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &ModeMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix dimensions differ");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Left-multiplies by an elementary element, i.e. applies it after `self`.
    fn apply_element_left(&mut self, element: &CircuitElement) -> Result<()> {
        match *element {
            CircuitElement::BeamSplitter { mode_a, mode_b, theta, phi } => {
                let [[uaa, uab], [uba, ubb]] = beam_splitter_block(theta, phi);
                for col in 0..self.dim {
                    let a = self.get(mode_a, col);
                    let b = self.get(mode_b, col);
                    self.set(mode_a, col, uaa * a + uab * b);
                    self.set(mode_b, col, uba * a + ubb * b);
                }
            }
            CircuitElement::PhaseShifter { mode, phi } => {
                let ph = Complex64::from_polar(1.0, phi);
                for col in 0..self.dim {
                    let v = self.get(mode, col);
                    self.set(mode, col, ph * v);
                }
            }
            CircuitElement::Loss { .. } => return Err(Error::LossNotExpanded),
        }
        Ok(())
    }
}

impl fmt::Debug for ModeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ModeMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let cells: Vec<String> = self
                .row(r)
                .iter()
                .map(|z| format!("{:+.6}{:+.6}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// The 2×2 beam-splitter block `[[u_aa, u_ab], [u_ba, u_bb]]`.
pub fn beam_splitter_block(theta: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [
        [Complex64::new(c, 0.0), -Complex64::from_polar(s, -phi)],
        [Complex64::from_polar(s, phi), Complex64::new(c, 0.0)],
    ]
}

/// One element of a passive circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CircuitElement {
    BeamSplitter { mode_a: usize, mode_b: usize, theta: f64, phi: f64 },
    PhaseShifter { mode: usize, phi: f64 },
    /// Transmission `eta` towards a perfect detector or onward path.
    Loss { mode: usize, eta: f64 },
}

impl CircuitElement {
    pub fn beam_splitter(mode_a: usize, mode_b: usize, theta: f64, phi: f64) -> Self {
        CircuitElement::BeamSplitter { mode_a, mode_b, theta, phi }
    }

    pub fn phase(mode: usize, phi: f64) -> Self {
        CircuitElement::PhaseShifter { mode, phi }
    }

    pub fn loss(mode: usize, eta: f64) -> Self {
        CircuitElement::Loss { mode, eta }
    }

    fn modes(&self) -> ([usize; 2], usize) {
        match *self {
            CircuitElement::BeamSplitter { mode_a, mode_b, .. } => ([mode_a, mode_b], 2),
            CircuitElement::PhaseShifter { mode, .. } | CircuitElement::Loss { mode, .. } => {
                ([mode, 0], 1)
            }
        }
    }

    /// Checks mode indices and parameter ranges against `n_modes`.
    pub fn validate(&self, n_modes: usize) -> Result<()> {
        let (modes, count) = self.modes();
        for &m in &modes[..count] {
            if m >= n_modes {
                return Err(Error::InvalidModeIndex { index: m, n_modes });
            }
        }
        match *self {
            CircuitElement::BeamSplitter { mode_a, mode_b, theta, phi } => {
                if mode_a == mode_b {
                    return Err(Error::InvalidModeIndex { index: mode_b, n_modes });
                }
                if !(0.0..=FRAC_PI_2).contains(&theta) || !phi.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "beam splitter angles theta={theta}, phi={phi} (theta must lie in [0, pi/2])"
                    )));
                }
            }
            CircuitElement::PhaseShifter { phi, .. } => {
                if !phi.is_finite() {
                    return Err(Error::InvalidParameter(format!("phase {phi}")));
                }
            }
            CircuitElement::Loss { eta, .. } => {
                if !(0.0..=1.0).contains(&eta) {
                    return Err(Error::InvalidParameter(format!("loss eta={eta} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Ordered product of the elementary matrices; the first element acts first.
pub fn compile_stage(elements: &[CircuitElement], n_modes: usize) -> Result<ModeMatrix> {
    let mut m = ModeMatrix::identity(n_modes);
    for element in elements {
        if let CircuitElement::Loss { .. } = element {
            return Err(Error::LossNotExpanded);
        }
        element.validate(n_modes)?;
        m.apply_element_left(element)?;
    }
    Ok(m)
}

/// A passive circuit split by the probe into a pre-probe and a post-probe stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_modes: usize,
    pub pre_probe: Vec<CircuitElement>,
    pub post_probe: Vec<CircuitElement>,
    pub input_mode: usize,
    pub probe_modes: Vec<usize>,
    pub detect_mode: usize,
}

impl Circuit {
    /// A circuit with no elements: input, probe and detection all on `mode`.
    pub fn identity(n_modes: usize, mode: usize) -> Self {
        Circuit {
            n_modes,
            pre_probe: Vec::new(),
            post_probe: Vec::new(),
            input_mode: mode,
            probe_modes: vec![mode],
            detect_mode: mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::InvalidParameter("circuit needs at least one mode".into()));
        }
        if self.probe_modes.is_empty() {
            return Err(Error::InvalidParameter("probe mode set is empty".into()));
        }
        for &m in self
            .probe_modes
            .iter()
            .chain([&self.input_mode, &self.detect_mode])
        {
            if m >= self.n_modes {
                return Err(Error::InvalidModeIndex { index: m, n_modes: self.n_modes });
            }
        }
        for (i, p) in self.probe_modes.iter().enumerate() {
            if self.probe_modes[..i].contains(p) {
                return Err(Error::InvalidParameter(format!("probe mode {p} listed twice")));
            }
        }
        for element in self.pre_probe.iter().chain(&self.post_probe) {
            element.validate(self.n_modes)?;
        }
        Ok(())
    }

    pub fn loss_count(&self) -> usize {
        self.pre_probe
            .iter()
            .chain(&self.post_probe)
            .filter(|e| matches!(e, CircuitElement::Loss { .. }))
            .count()
    }

    pub fn is_loss_free(&self) -> bool {
        self.loss_count() == 0
    }

    pub fn is_probe_mode(&self, mode: usize) -> bool {
        self.probe_modes.contains(&mode)
    }

    /// Compiles both stages. The circuit must be loss-free.
    pub fn compile(&self) -> Result<CompiledCircuit> {
        self.validate()?;
        let pre = compile_stage(&self.pre_probe, self.n_modes)?;
        let post = compile_stage(&self.post_probe, self.n_modes)?;
        let total = post.mul(&pre)?;
        Ok(CompiledCircuit {
            pre,
            post,
            total,
            input_mode: self.input_mode,
            probe_modes: self.probe_modes.clone(),
            detect_mode: self.detect_mode,
        })
    }
}

/// Compiled stage matrices of a loss-free circuit.
#[derive(Clone, Debug)]
pub struct CompiledCircuit {
    /// Evolution from preparation to the probe.
    pub pre: ModeMatrix,
    /// Evolution from the probe to detection.
    pub post: ModeMatrix,
    /// `post · pre`.
    pub total: ModeMatrix,
    pub input_mode: usize,
    pub probe_modes: Vec<usize>,
    pub detect_mode: usize,
}

impl CompiledCircuit {
    pub fn n_modes(&self) -> usize {
        self.total.dim()
    }

    /// Input-to-detector amplitude of the whole circuit.
    pub fn detect_amplitude(&self) -> Complex64 {
        self.total.get(self.detect_mode, self.input_mode)
    }

    pub fn transmittance(&self) -> f64 {
        self.detect_amplitude().norm_sqr().min(1.0)
    }
}

/// Replaces every `Loss(mode, eta)` by a beam splitter coupling `mode` to a
/// fresh vacuum ancilla appended at the end of the mode list, with
/// `cos²θ = eta` and `φ = 0`.
pub fn expand_loss(circuit: &Circuit) -> Circuit {
    let mut next_ancilla = circuit.n_modes;
    let mut expand = |elements: &[CircuitElement]| -> Vec<CircuitElement> {
        elements
            .iter()
            .map(|e| match *e {
                CircuitElement::Loss { mode, eta } => {
                    let ancilla = next_ancilla;
                    next_ancilla += 1;
                    CircuitElement::BeamSplitter {
                        mode_a: mode,
                        mode_b: ancilla,
                        theta: eta.clamp(0.0, 1.0).sqrt().acos(),
                        phi: 0.0,
                    }
                }
                other => other,
            })
            .collect()
    };
    let pre_probe = expand(&circuit.pre_probe);
    let post_probe = expand(&circuit.post_probe);
    Circuit {
        n_modes: next_ancilla,
        pre_probe,
        post_probe,
        ..circuit.clone()
    }
}

/// Coherent amplitudes, one per mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentVector {
    pub amplitudes: Vec<Amplitude>,
}

impl CoherentVector {
    pub fn new(amplitudes: Vec<Amplitude>) -> Self {
        Self { amplitudes }
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self { amplitudes: vec![ZERO; n_modes] }
    }

    /// Amplitude `alpha` in `mode`, vacuum elsewhere.
    pub fn single_mode(n_modes: usize, mode: usize, alpha: Amplitude) -> Self {
        let mut v = Self::vacuum(n_modes);
        v.amplitudes[mode] = alpha;
        v
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// `M · a`.
pub fn apply_to_coherent(m: &ModeMatrix, a: &CoherentVector) -> Result<CoherentVector> {
    if m.dim() != a.len() {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: a.len() });
    }
    let out = (0..m.dim())
        .map(|r| m.row(r).iter().zip(&a.amplitudes).map(|(x, y)| x * y).sum())
        .collect();
    Ok(CoherentVector { amplitudes: out })
}

/// `|(M_post · M_pre)[detect][input]|²` of a loss-free circuit.
pub fn transmittance(circuit: &Circuit) -> Result<f64> {
    Ok(circuit.compile()?.transmittance())
}

/// Element list realizing a unitary as beam splitters followed by phases.
///
/// Returned in application order: `compile_stage(&elements, dim)` reproduces
/// `m` to within `1e-10`, otherwise [`Error::DecompositionFailed`].
pub fn decompose_unitary(m: &ModeMatrix) -> Result<Vec<CircuitElement>> {
    if !m.is_unitary() {
        let defect = m.unitarity_defect();
        if defect > 1e-9 {
            return Err(Error::DecompositionFailed(format!(
                "matrix is not unitary (defect {defect:.3e})"
            )));
        }
    }
    let n = m.dim();
    let mut work = m.clone();
    // Nulling rotations T_k so that T_L ⋯ T_1 · M = D.
    let mut nulling = Vec::new();
    for col in 0..n {
        for row in (col + 1..n).rev() {
            let top = work.get(col, col);
            let low = work.get(row, col);
            if low.norm() == 0.0 {
                continue;
            }
            let theta = low.norm().atan2(top.norm());
            let phi = if top.norm() == 0.0 { (-low).arg() } else { (-low / top).arg() };
            let t = CircuitElement::BeamSplitter { mode_a: col, mode_b: row, theta, phi };
            work.apply_element_left(&t)?;
            nulling.push((col, row, theta, phi));
        }
    }
    // M = T_1^{-1} ⋯ T_L^{-1} · D; BS(θ, φ)^{-1} = BS(θ, φ + π).
    let mut elements: Vec<CircuitElement> = (0..n)
        .map(|k| CircuitElement::PhaseShifter { mode: k, phi: work.get(k, k).arg() })
        .collect();
    for &(a, b, theta, phi) in nulling.iter().rev() {
        elements.push(CircuitElement::BeamSplitter {
            mode_a: a,
            mode_b: b,
            theta,
            phi: phi + std::f64::consts::PI,
        });
    }
    let recomposed = compile_stage(&elements, n)?;
    let err = recomposed.max_abs_diff(m);
    if err >= 1e-10 {
        return Err(Error::DecompositionFailed(format!("round-trip error {err:.3e}")));
    }
    Ok(elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn empty_stage_is_identity() {
        let m = compile_stage(&[], 3).unwrap();
        assert_eq!(m, ModeMatrix::identity(3));
    }

    #[test]
    fn balanced_beam_splitter_matrix() {
        let m = compile_stage(&[CircuitElement::beam_splitter(0, 1, FRAC_PI_4, 0.0)], 2).unwrap();
        let expected = ModeMatrix::from_rows(vec![
            vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
            vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
        ])
        .unwrap();
        assert!(m.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn two_balanced_splitters_swap_with_sign() {
        let bs = CircuitElement::beam_splitter(0, 1, FRAC_PI_4, 0.0);
        let m = compile_stage(&[bs, bs], 2).unwrap();
        let expected =
            ModeMatrix::from_rows(vec![vec![c(0.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]])
                .unwrap();
        assert!(m.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn phase_shifter_multiplies_one_amplitude() {
        let m = compile_stage(&[CircuitElement::phase(1, 0.3)], 2).unwrap();
        assert!((m.get(1, 1) - Complex64::from_polar(1.0, 0.3)).norm() < 1e-15);
        assert_eq!(m.get(0, 0), ONE);
    }

    #[test]
    fn compile_rejects_bad_index_and_loss() {
        assert!(matches!(
            compile_stage(&[CircuitElement::phase(3, 0.0)], 2),
            Err(Error::InvalidModeIndex { index: 3, .. })
        ));
        assert!(matches!(
            compile_stage(&[CircuitElement::loss(0, 0.5)], 2),
            Err(Error::LossNotExpanded)
        ));
    }

    #[test]
    fn expand_loss_without_loss_is_noop() {
        let mut c = Circuit::identity(2, 0);
        c.pre_probe.push(CircuitElement::beam_splitter(0, 1, 0.3, 0.1));
        assert_eq!(expand_loss(&c), c);
    }

    #[test]
    fn expand_unit_efficiency_is_identity_coupling() {
        let mut c = Circuit::identity(2, 0);
        c.post_probe.push(CircuitElement::loss(0, 1.0));
        let e = expand_loss(&c);
        assert_eq!(e.n_modes, 3);
        assert_eq!(e.post_probe, vec![CircuitElement::beam_splitter(0, 2, 0.0, 0.0)]);
    }

    #[test]
    fn expand_quarter_efficiency() {
        let mut c = Circuit::identity(2, 0);
        c.pre_probe.push(CircuitElement::loss(0, 0.25));
        let e = expand_loss(&c);
        match e.pre_probe[0] {
            CircuitElement::BeamSplitter { mode_a: 0, mode_b: 2, theta, phi } => {
                assert!((theta - PI / 3.0).abs() < 1e-12);
                assert_eq!(phi, 0.0);
            }
            other => panic!("unexpected element {other:?}"),
        }
        assert!((transmittance(&e).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ancillas_numbered_in_order() {
        let mut c = Circuit::identity(1, 0);
        c.pre_probe.push(CircuitElement::loss(0, 0.5));
        c.post_probe.push(CircuitElement::loss(0, 0.9));
        let e = expand_loss(&c);
        assert_eq!(e.n_modes, 3);
        assert!(matches!(e.pre_probe[0], CircuitElement::BeamSplitter { mode_b: 1, .. }));
        assert!(matches!(e.post_probe[0], CircuitElement::BeamSplitter { mode_b: 2, .. }));
        assert_eq!(expand_loss(&e), e);
    }

    #[test]
    fn coherent_through_identity_and_splitter() {
        let alpha = c(0.4, -1.1);
        let a = CoherentVector::new(vec![alpha, ZERO]);
        let out = apply_to_coherent(&ModeMatrix::identity(2), &a).unwrap();
        assert_eq!(out, a);

        let bs = compile_stage(&[CircuitElement::beam_splitter(0, 1, FRAC_PI_4, 0.0)], 2).unwrap();
        let out = apply_to_coherent(&bs, &CoherentVector::new(vec![ONE, ZERO])).unwrap();
        assert!((out.amplitudes[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((out.amplitudes[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coherent_dimension_mismatch() {
        let err = apply_to_coherent(&ModeMatrix::identity(3), &CoherentVector::vacuum(2));
        assert!(matches!(err, Err(Error::DimensionMismatch { expected: 3, found: 2 })));
    }

    #[test]
    fn transmittance_examples() {
        assert_eq!(transmittance(&Circuit::identity(2, 0)).unwrap(), 1.0);
        let mut c = Circuit::identity(2, 0);
        c.detect_mode = 1;
        assert_eq!(transmittance(&c).unwrap(), 0.0);
        c.pre_probe.push(CircuitElement::beam_splitter(0, 1, FRAC_PI_4, 0.0));
        assert!((transmittance(&c).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decomposition_round_trip() {
        let elements = [
            CircuitElement::beam_splitter(0, 2, 0.4, 1.3),
            CircuitElement::phase(1, -0.7),
            CircuitElement::beam_splitter(1, 2, 1.1, -0.2),
            CircuitElement::beam_splitter(0, 1, 0.9, 2.9),
            CircuitElement::phase(2, 2.0),
        ];
        let m = compile_stage(&elements, 3).unwrap();
        let dec = decompose_unitary(&m).unwrap();
        assert!(compile_stage(&dec, 3).unwrap().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn decomposition_rejects_non_unitary() {
        let m = ModeMatrix::from_rows(vec![vec![c(2.0, 0.0)]]).unwrap();
        assert!(matches!(decompose_unitary(&m), Err(Error::DecompositionFailed(_))));
    }
}
