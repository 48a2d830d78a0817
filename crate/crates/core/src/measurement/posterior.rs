use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::sectors::SectorAmplitudes;
use crate::error::{Error, Result};

/// Gaussian pointer coupled to the probe by a von Neumann shift `x → x + g·n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerConfig {
    /// Position spread of the initial pointer (standard deviation of `|φ(x)|²`).
    pub sigma_x: f64,
    /// Pointer shift per photon.
    pub g: f64,
}

impl Default for PointerConfig {
    fn default() -> Self {
        Self { sigma_x: 1.0, g: 0.02 }
    }
}

impl PointerConfig {
    pub fn new(sigma_x: f64, g: f64) -> Result<Self> {
        let cfg = Self { sigma_x, g };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x > 0.0 && self.sigma_x.is_finite() && self.g > 0.0 && self.g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pointer needs sigma_x > 0 and g > 0 (got sigma_x={}, g={})",
                self.sigma_x, self.g
            )));
        }
        Ok(())
    }

    /// Momentum spread of the initial pointer, `1/(2σ_x)`.
    pub fn sigma_p(&self) -> f64 {
        0.5 / self.sigma_x
    }

    /// Factor relating the momentum shift to the imaginary weak value:
    /// `⟨p⟩ ≈ κ·g·Im(WV)` with `κ = 2σ_p²`.
    pub fn momentum_gain(&self) -> f64 {
        2.0 * self.sigma_p() * self.sigma_p()
    }

    /// `g·n_max/σ_x`.
    pub fn weakness_ratio(&self, max_photons: usize) -> f64 {
        self.g * max_photons as f64 / self.sigma_x
    }

    pub fn is_weak(&self, max_photons: usize) -> bool {
        self.weakness_ratio(max_photons) < 0.1
    }
}

/// Pointer variable read out in a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variable {
    Position,
    Momentum,
}

impl std::str::FromStr for Variable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "position" | "x" => Ok(Variable::Position),
            "momentum" | "p" => Ok(Variable::Momentum),
            _ => Err(format!("unknown pointer variable `{s}` (position|momentum)")),
        }
    }
}

fn gaussian(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

#[derive(Clone, Debug)]
enum Kernel {
    /// `Σ w_k N(x; center_k, σ_x²)`.
    Position { terms: Vec<(f64, f64)> },
    /// `N(p; 0, σ_p²) · Σ_Δ Re(c_Δ e^{−i g Δ p})`, with `Δ ≥ 0` and the
    /// negative-Δ partners folded in.
    Momentum { terms: Vec<(f64, Complex64)> },
}

/// Post-selected pointer distribution of one readout variable.
#[derive(Clone, Debug)]
pub struct PointerPosterior {
    variable: Variable,
    cfg: PointerConfig,
    kernel: Kernel,
    /// Post-selection probability including the coupling, `∫ unnormalized`.
    weight: f64,
    mean: f64,
    table: TabulatedCdf,
}

const CELLS: usize = 4096;

impl PointerPosterior {
    pub fn new(sectors: &SectorAmplitudes, cfg: PointerConfig, variable: Variable) -> Result<Self> {
        cfg.validate()?;
        let dim = sectors.dim();
        let g = cfg.g;
        let sigma = cfg.sigma_x;
        let sp = cfg.sigma_p();
        let overlap = |delta: usize| (-(g * delta as f64).powi(2) / (8.0 * sigma * sigma)).exp();

        // Diagonal sums c_Δ = Σ_{n−n'=Δ} ρ[n][n'] and the centred sums used for
        // the position mixture.
        let mut weight = 0.0;
        let mut by_sum = vec![0.0; 2 * dim.max(1) - 1];
        let mut by_diff = vec![Complex64::new(0.0, 0.0); dim];
        for n in 0..dim {
            for m in 0..dim {
                let z = sectors.coherence(n, m);
                if z == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let delta = n.abs_diff(m);
                weight += z.re * overlap(delta);
                by_sum[n + m] += z.re * overlap(delta);
                if n >= m {
                    by_diff[n - m] += z;
                }
            }
        }
        if weight.is_nan() || weight <= 0.0 {
            return Err(Error::PostSelectionTooRare {
                event: "pointer post-selection".into(),
                probability: weight,
                p_min: 0.0,
            });
        }

        let top = sectors.max_sector() as f64;
        let (kernel, mean, lo, hi) = match variable {
            Variable::Position => {
                let terms: Vec<(f64, f64)> = by_sum
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(k, &w)| (g * k as f64 / 2.0, w / weight))
                    .collect();
                let mean = terms.iter().map(|(c, w)| c * w).sum();
                let reach = g * top + 8.0 * sigma;
                (Kernel::Position { terms }, mean, -reach, reach)
            }
            Variable::Momentum => {
                let terms: Vec<(f64, Complex64)> = by_diff
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm() != 0.0)
                    .map(|(d, &c)| (g * d as f64, c / weight))
                    .collect();
                // ∫ p N(p;0,s²) e^{−ikp} dp = −i k s² e^{−k²s²/2}; partners double it.
                let mean = terms
                    .iter()
                    .filter(|(k, _)| *k > 0.0)
                    .map(|&(k, c)| 2.0 * k * sp * sp * c.im * (-0.5 * k * k * sp * sp).exp())
                    .sum();
                let reach = 12.0 * sp;
                (Kernel::Momentum { terms }, mean, -reach, reach)
            }
        };
        let mut posterior = Self {
            variable,
            cfg,
            kernel,
            weight,
            mean,
            table: TabulatedCdf::empty(),
        };
        let table = TabulatedCdf::new(|x| posterior.density(x), lo, hi, CELLS);
        posterior.table = table;
        Ok(posterior)
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn config(&self) -> PointerConfig {
        self.cfg
    }

    /// Probability of the post-selection with the pointer coupled.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Normalized density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        match &self.kernel {
            Kernel::Position { terms } => {
                terms.iter().map(|&(c, w)| w * gaussian(x, c, self.cfg.sigma_x)).sum()
            }
            Kernel::Momentum { terms } => {
                let envelope = gaussian(x, 0.0, self.cfg.sigma_p());
                let h: f64 = terms
                    .iter()
                    .map(|&(k, c)| {
                        let v = (c * Complex64::from_polar(1.0, -k * x)).re;
                        if k == 0.0 {
                            v
                        } else {
                            2.0 * v
                        }
                    })
                    .sum();
                envelope * h
            }
        }
    }

    /// Exact posterior mean.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `mean / g` for position, `mean / (κ g)` for momentum: the weak-value
    /// component this readout estimates.
    pub fn weak_value_component(&self) -> f64 {
        match self.variable {
            Variable::Position => self.mean / self.cfg.g,
            Variable::Momentum => self.mean / (self.cfg.momentum_gain() * self.cfg.g),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.table.cdf(x)
    }

    /// Inverse-CDF sample for a uniform variate `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        self.table.quantile(u)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.table.lo, self.table.hi())
    }
}

/// Cumulative distribution tabulated on a uniform grid, with per-cell
/// Gauss–Legendre integrals and cubic Hermite interpolation inside cells.
#[derive(Clone, Debug)]
struct TabulatedCdf {
    lo: f64,
    step: f64,
    cum: Vec<f64>,
    dens: Vec<f64>,
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

impl TabulatedCdf {
    fn empty() -> Self {
        Self { lo: 0.0, step: 1.0, cum: vec![0.0, 1.0], dens: vec![0.0, 0.0] }
    }

    fn new(density: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Self {
        let step = (hi - lo) / cells as f64;
        let mut cum = Vec::with_capacity(cells + 1);
        let mut dens = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        dens.push(density(lo).max(0.0));
        for i in 0..cells {
            let a = lo + i as f64 * step;
            let mid = a + 0.5 * step;
            let integral: f64 = GL_NODES
                .iter()
                .zip(GL_WEIGHTS)
                .map(|(t, w)| w * density(mid + 0.5 * step * t))
                .sum::<f64>()
                * 0.5
                * step;
            acc += integral.max(0.0);
            cum.push(acc);
            dens.push(density(a + step).max(0.0));
        }
        let total = acc;
        for c in &mut cum {
            *c /= total;
        }
        for d in &mut dens {
            *d /= total;
        }
        Self { lo, step, cum, dens }
    }

    fn hi(&self) -> f64 {
        self.lo + self.step * (self.cum.len() - 1) as f64
    }

    /// Hermite cubic for the CDF on cell `i` at fraction `t`.
    fn cell_value(&self, i: usize, t: f64) -> f64 {
        let (f0, f1) = (self.cum[i], self.cum[i + 1]);
        let (d0, d1) = (self.dens[i] * self.step, self.dens[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * d1
    }

    fn cell_slope(&self, i: usize, t: f64) -> f64 {
        let (f0, f1) = (self.cum[i], self.cum[i + 1]);
        let (d0, d1) = (self.dens[i] * self.step, self.dens[i + 1] * self.step);
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * f0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * f1
            + (3.0 * t2 - 2.0 * t) * d1
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        let pos = (x - self.lo) / self.step;
        let cells = self.cum.len() - 1;
        if pos >= cells as f64 {
            return 1.0;
        }
        let i = pos.floor() as usize;
        self.cell_value(i, pos - i as f64).clamp(self.cum[i], self.cum[i + 1])
    }

    fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let cells = self.cum.len() - 1;
        // First cell whose upper edge reaches u.
        let i = self.cum[1..].partition_point(|&c| c < u).min(cells - 1);
        let (c0, c1) = (self.cum[i], self.cum[i + 1]);
        if c1 <= c0 {
            return self.lo + (i as f64 + 0.5) * self.step;
        }
        let (mut a, mut b) = (0.0, 1.0);
        let mut t = ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
        for _ in 0..50 {
            let f = self.cell_value(i, t) - u;
            if f.abs() < 1e-15 {
                break;
            }
            if f > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let slope = self.cell_slope(i, t);
            let newton = t - f / slope;
            t = if slope > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a < 1e-14 {
                break;
            }
        }
        self.lo + (i as f64 + t) * self.step
    }
}
