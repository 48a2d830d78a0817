//! Closed-form weak values of the photon number of a probed mode set.
//!
//! Inputs are a coherent pulse or a single photon in the circuit's input mode;
//! post-selection is on the detected mode. Coherent-input weak values use the
//! fact that the final state factorizes, so the undetected modes can be
//! projected onto their final coherent state without changing the result.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{Amplitude, Circuit, CompiledCircuit};

/// Default lower bound on post-selection probabilities.
pub const DEFAULT_P_MIN: f64 = 1e-12;

/// Below this magnitude the scaling function switches to its Taylor series.
const SERIES_SWITCH: f64 = 1e-4;

/// A complex weak value. The real part is what a position pointer reads; the
/// imaginary part shows up in the conjugate pointer variable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeakValue {
    pub re: f64,
    pub im: f64,
}

impl WeakValue {
    pub const ZERO: WeakValue = WeakValue { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Modulus of the difference.
    pub fn distance(self, other: WeakValue) -> f64 {
        (self.as_complex() - other.as_complex()).norm()
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl From<Complex64> for WeakValue {
    fn from(z: Complex64) -> Self {
        WeakValue { re: z.re, im: z.im }
    }
}

impl fmt::Display for WeakValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}i", self.re, if self.im < 0.0 { '-' } else { '+' }, self.im.abs())
    }
}

/// Final measurement on the detected mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PostSelection {
    /// No post-selection: the plain expectation value.
    None,
    /// Exactly `m` photons detected.
    Fock(u32),
    /// A click detector fired (one or more photons).
    Click,
    /// The click detector stayed silent; identical to `Fock(0)`.
    NoClick,
}

impl fmt::Display for PostSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PostSelection::None => write!(f, "none"),
            PostSelection::Fock(m) => write!(f, "fock:{m}"),
            PostSelection::Click => write!(f, "click"),
            PostSelection::NoClick => write!(f, "noclick"),
        }
    }
}

impl std::str::FromStr for PostSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(PostSelection::None),
            "click" => Ok(PostSelection::Click),
            "noclick" => Ok(PostSelection::NoClick),
            _ => match s.strip_prefix("fock:") {
                Some(m) => m
                    .parse()
                    .map(PostSelection::Fock)
                    .map_err(|_| format!("bad photon number in `{s}`")),
                None => Err(format!("unknown post-selection `{s}` (none|fock:<m>|click|noclick)")),
            },
        }
    }
}

/// State prepared in the circuit's input mode; all other modes start in vacuum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InputState {
    Coherent(Amplitude),
    SinglePhoton,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineConfig {
    /// Post-selection events rarer than this are rejected.
    pub p_min: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { p_min: DEFAULT_P_MIN }
    }
}

/// `f(x) = x / ln(1 + x)`, continuous through its removable singularity at 0.
pub fn scaling_function(x: f64) -> Result<f64> {
    if x.is_nan() || x <= -1.0 {
        return Err(Error::Domain { function: "x/ln(1+x)", value: x });
    }
    if x.abs() < SERIES_SWITCH {
        return Ok(1.0 + x * (0.5 + x * (-1.0 / 12.0 + x / 24.0)));
    }
    Ok(x / x.ln_1p())
}

fn guard(event: impl fmt::Display, probability: f64, p_min: f64) -> Result<()> {
    if probability.is_nan() || probability < p_min {
        return Err(Error::PostSelectionTooRare {
            event: event.to_string(),
            probability,
            p_min,
        });
    }
    Ok(())
}

/// ln of the Poisson probability of `m` counts at mean `mean`.
fn ln_poisson(m: u32, mean: f64) -> f64 {
    if m == 0 {
        return -mean;
    }
    if mean == 0.0 {
        return f64::NEG_INFINITY;
    }
    let ln_fact: f64 = (1..=m).map(|k| (k as f64).ln()).sum();
    -mean + m as f64 * mean.ln() - ln_fact
}

impl CompiledCircuit {
    /// Probability that a click detector fires for coherent amplitude `alpha`.
    pub fn click_probability(&self, alpha: Amplitude) -> f64 {
        -(-self.transmittance() * alpha.norm_sqr()).exp_m1()
    }

    /// `Σ_p (M_post)[k][p] (M_pre)[p][input]`: amplitude to reach output `k`
    /// through the probed modes.
    fn probed_path(&self, k: usize) -> Complex64 {
        self.probe_modes
            .iter()
            .map(|&p| self.post.get(k, p) * self.pre.get(p, self.input_mode))
            .sum()
    }

    /// `Σ_{k≠detect} conj(T[k][in]) · probed_path(k)`, which is `(1−T)` times the
    /// single-photon no-click weak value and never divides.
    fn single_photon_noclick_numerator(&self) -> Complex64 {
        (0..self.n_modes())
            .filter(|&k| k != self.detect_mode)
            .map(|k| self.total.get(k, self.input_mode).conj() * self.probed_path(k))
            .sum()
    }

    fn single_photon_noclick_probability(&self) -> f64 {
        (0..self.n_modes())
            .filter(|&k| k != self.detect_mode)
            .map(|k| self.total.get(k, self.input_mode).norm_sqr())
            .sum()
    }

    fn coherent_mean_number(&self, alpha: Amplitude) -> f64 {
        self.probe_modes
            .iter()
            .map(|&p| (self.pre.get(p, self.input_mode) * alpha).norm_sqr())
            .sum()
    }

    /// Unguarded closed form for `Fock(m)` post-selection.
    fn coherent_fock_value(&self, alpha: Amplitude, m: u32) -> Complex64 {
        let d = self.detect_mode;
        let gamma: Vec<Complex64> =
            (0..self.n_modes()).map(|k| self.total.get(k, self.input_mode) * alpha).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for &p in &self.probe_modes {
            let beta = self.pre.get(p, self.input_mode) * alpha;
            // Transported creation operator U b_p† U† = Σ_k post[k][p] a_k†.
            let mut inner: Complex64 = (0..self.n_modes())
                .filter(|&k| k != d)
                .map(|k| self.post.get(k, p) * gamma[k].conj())
                .sum();
            if m > 0 {
                inner += self.post.get(d, p) * (m as f64) / gamma[d];
            }
            acc += beta * inner;
        }
        acc
    }

    pub fn coherent_weak_value(
        &self,
        alpha: Amplitude,
        ps: PostSelection,
        cfg: &EngineConfig,
    ) -> Result<WeakValue> {
        let detected_mean = self.transmittance() * alpha.norm_sqr();
        match ps {
            PostSelection::None => Ok(WeakValue::new(self.coherent_mean_number(alpha), 0.0)),
            PostSelection::Fock(m) => {
                guard(ps, ln_poisson(m, detected_mean).exp(), cfg.p_min)?;
                Ok(self.coherent_fock_value(alpha, m).into())
            }
            PostSelection::NoClick => {
                guard(ps, (-detected_mean).exp(), cfg.p_min)?;
                Ok(self.coherent_fock_value(alpha, 0).into())
            }
            PostSelection::Click => {
                let p_star = self.click_probability(alpha);
                guard(ps, p_star, cfg.p_min)?;
                let none = Complex64::new(self.coherent_mean_number(alpha), 0.0);
                let noclick = self.coherent_fock_value(alpha, 0);
                Ok(((none - (1.0 - p_star) * noclick) / p_star).into())
            }
        }
    }

    pub fn single_photon_weak_value(&self, ps: PostSelection, cfg: &EngineConfig) -> Result<WeakValue> {
        match ps {
            PostSelection::None => {
                let mean: f64 = self
                    .probe_modes
                    .iter()
                    .map(|&p| self.pre.get(p, self.input_mode).norm_sqr())
                    .sum();
                Ok(WeakValue::new(mean, 0.0))
            }
            PostSelection::Fock(1) | PostSelection::Click => {
                let amp = self.detect_amplitude();
                guard(ps, amp.norm_sqr(), cfg.p_min)?;
                Ok((self.probed_path(self.detect_mode) / amp).into())
            }
            PostSelection::Fock(0) | PostSelection::NoClick => {
                let prob = self.single_photon_noclick_probability();
                guard(ps, prob, cfg.p_min)?;
                Ok((self.single_photon_noclick_numerator() / prob).into())
            }
            PostSelection::Fock(_) => Err(Error::PostSelectionTooRare {
                event: ps.to_string(),
                probability: 0.0,
                p_min: cfg.p_min,
            }),
        }
    }

    pub fn reconstruct_single_photon(&self, alpha: Amplitude, cfg: &EngineConfig) -> Result<Reconstruction> {
        let p_star = self.click_probability(alpha);
        guard(PostSelection::Click, p_star, cfg.p_min)?;
        guard(PostSelection::NoClick, 1.0 - p_star, cfg.p_min)?;
        let click = self.coherent_weak_value(alpha, PostSelection::Click, cfg)?;
        let noclick = self.coherent_weak_value(alpha, PostSelection::NoClick, cfg)?;
        let scale = scaling_function(-p_star)?;
        let value = (click.as_complex() - noclick.as_complex()) * scale;
        Ok(Reconstruction { p_star, click, noclick, scale, value: value.into() })
    }

    pub fn proportionality_at(&self, alpha: Amplitude, cfg: &EngineConfig) -> Result<Proportionality> {
        let n2 = alpha.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::InvalidParameter("proportionality needs a nonzero amplitude".into()));
        }
        let mean = self.coherent_weak_value(alpha, PostSelection::None, cfg)?.re / n2;
        let noclick = self.coherent_weak_value(alpha, PostSelection::NoClick, cfg)?.as_complex() / n2;
        let residual = (noclick - self.single_photon_noclick_numerator()).norm();
        Ok(Proportionality {
            mean_number: mean,
            noclick: noclick.into(),
            single_photon_residual: residual,
        })
    }
}

/// The pieces of the subtract-and-scale reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Reconstruction {
    pub p_star: f64,
    pub click: WeakValue,
    pub noclick: WeakValue,
    /// `f(−p⋆)`.
    pub scale: f64,
    /// `(click − noclick) · f(−p⋆)`.
    pub value: WeakValue,
}

/// Photon-number weak values per unit of input mean photon number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportionality {
    /// `⟨n⟩_α / |α|²`.
    pub mean_number: f64,
    /// No-click weak value divided by `|α|²`.
    pub noclick: WeakValue,
    /// `|noclick − (1−T)·WV₀(single photon)|`.
    pub single_photon_residual: f64,
}

fn compiled(circuit: &Circuit) -> Result<CompiledCircuit> {
    if !circuit.is_loss_free() {
        return Err(Error::LossNotExpanded);
    }
    circuit.compile()
}

/// `p⋆ = 1 − exp(−T|α|²)`.
pub fn click_probability(circuit: &Circuit, alpha: Amplitude) -> Result<f64> {
    Ok(compiled(circuit)?.click_probability(alpha))
}

/// Weak value of the probed photon number for a coherent input.
pub fn wv_coherent(circuit: &Circuit, alpha: Amplitude, ps: PostSelection) -> Result<WeakValue> {
    wv_coherent_with(circuit, alpha, ps, &EngineConfig::default())
}

pub fn wv_coherent_with(
    circuit: &Circuit,
    alpha: Amplitude,
    ps: PostSelection,
    cfg: &EngineConfig,
) -> Result<WeakValue> {
    compiled(circuit)?.coherent_weak_value(alpha, ps, cfg)
}

/// Weak value of the probed photon number for a single-photon input.
///
/// `Click` and `NoClick` are accepted as `Fock(1)` and `Fock(0)`; `Fock(m ≥ 2)`
/// has zero probability and is rejected as too rare.
pub fn wv_single_photon(circuit: &Circuit, ps: PostSelection) -> Result<WeakValue> {
    wv_single_photon_with(circuit, ps, &EngineConfig::default())
}

pub fn wv_single_photon_with(circuit: &Circuit, ps: PostSelection, cfg: &EngineConfig) -> Result<WeakValue> {
    compiled(circuit)?.single_photon_weak_value(ps, cfg)
}

/// Single-photon click weak value recovered from coherent-state click and
/// no-click weak values: `(WV_click − WV_noclick) · f(−p⋆)`.
pub fn reconstruct_single_photon_wv(circuit: &Circuit, alpha: Amplitude) -> Result<WeakValue> {
    Ok(compiled(circuit)?.reconstruct_single_photon(alpha, &EngineConfig::default())?.value)
}

pub fn reconstruct_with(circuit: &Circuit, alpha: Amplitude, cfg: &EngineConfig) -> Result<Reconstruction> {
    compiled(circuit)?.reconstruct_single_photon(alpha, cfg)
}

/// [`Proportionality`] evaluated at unit amplitude.
pub fn proportionality_constants(circuit: &Circuit) -> Result<Proportionality> {
    proportionality_at(circuit, Complex64::new(1.0, 0.0))
}

pub fn proportionality_at(circuit: &Circuit, alpha: Amplitude) -> Result<Proportionality> {
    compiled(circuit)?.proportionality_at(alpha, &EngineConfig::default())
}
