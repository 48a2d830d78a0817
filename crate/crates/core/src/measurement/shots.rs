use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::posterior::{PointerConfig, PointerPosterior, Variable};
use super::sectors::{click_sectors, SectorAmplitudes};
use crate::error::{Error, Result};
use crate::fock::OracleConfig;
use crate::optics::Circuit;
use crate::weak_value::{scaling_function, InputState, WeakValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Click,
    NoClick,
}

/// One simulated run: detector outcome and one pointer readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub outcome: Outcome,
    pub x_sample: Option<f64>,
    pub p_sample: Option<f64>,
    /// RNG stream the shot was drawn from.
    pub stream: u64,
}

/// Exact click/no-click pointer posteriors for one readout variable.
#[derive(Clone, Debug)]
pub struct ShotModel {
    pub click: Option<PointerPosterior>,
    pub noclick: Option<PointerPosterior>,
    /// Click probability with the pointer coupled.
    pub click_probability: f64,
    pub variable: Variable,
}

impl ShotModel {
    pub fn from_sectors(
        click: &SectorAmplitudes,
        noclick: &SectorAmplitudes,
        cfg: PointerConfig,
        variable: Variable,
    ) -> Result<Self> {
        let build = |s: &SectorAmplitudes| -> Result<Option<PointerPosterior>> {
            if s.probability() <= 0.0 {
                return Ok(None);
            }
            match PointerPosterior::new(s, cfg, variable) {
                Ok(p) => Ok(Some(p)),
                Err(Error::PostSelectionTooRare { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let click_post = build(click)?;
        let noclick_post = build(noclick)?;
        let wc = click_post.as_ref().map_or(0.0, |p| p.weight());
        let wn = noclick_post.as_ref().map_or(0.0, |p| p.weight());
        if wc + wn <= 0.0 {
            return Err(Error::InvalidParameter("state has no weight in either outcome".into()));
        }
        Ok(Self {
            click: click_post,
            noclick: noclick_post,
            click_probability: wc / (wc + wn),
            variable,
        })
    }

    pub fn new(
        circuit: &Circuit,
        input: &InputState,
        cfg: PointerConfig,
        variable: Variable,
        oracle: &OracleConfig,
    ) -> Result<Self> {
        let (click, noclick) = click_sectors(circuit, input, oracle)?;
        Self::from_sectors(&click, &noclick, cfg, variable)
    }

    fn shot(&self, seed: u64, stream: u64) -> ShotRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let outcome = if rng.random::<f64>() < self.click_probability {
            Outcome::Click
        } else {
            Outcome::NoClick
        };
        let posterior = match outcome {
            Outcome::Click => self.click.as_ref(),
            Outcome::NoClick => self.noclick.as_ref(),
        }
        .expect("outcome with zero probability was not drawn");
        let value = posterior.quantile(rng.random::<f64>());
        let (x_sample, p_sample) = match self.variable {
            Variable::Position => (Some(value), None),
            Variable::Momentum => (None, Some(value)),
        };
        ShotRecord { outcome, x_sample, p_sample, stream }
    }

    /// `n_shots` records; shot `i` uses stream `i` of the master seed, so the
    /// result does not depend on how the work is split across threads.
    pub fn sample(&self, n_shots: usize, seed: u64) -> Vec<ShotRecord> {
        (0..n_shots as u64).into_par_iter().map(|i| self.shot(seed, i)).collect()
    }
}

/// Simulates `n_shots` runs of the weakly coupled experiment.
pub fn run_shots(
    circuit: &Circuit,
    input: &InputState,
    cfg: PointerConfig,
    n_shots: usize,
    seed: u64,
    variable: Variable,
    oracle: &OracleConfig,
) -> Result<Vec<ShotRecord>> {
    if n_shots == 0 {
        return Err(Error::InvalidParameter("n_shots must be at least 1".into()));
    }
    Ok(ShotModel::new(circuit, input, cfg, variable, oracle)?.sample(n_shots, seed))
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl Estimate {
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in samples {
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        if n == 0 {
            return None;
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Some(Self { mean, std_error: (var / n as f64).sqrt(), n_samples: n })
    }

    fn scaled(self, factor: f64) -> Self {
        Self { mean: self.mean * factor, std_error: self.std_error * factor.abs(), ..self }
    }
}

/// How conditional pointer means are turned into a single-photon weak value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Coherent input: `(WV_click − WV_noclick) · f(−p̂⋆)`.
    SubtractAndScale,
    /// Single-photon input: the click weak value itself.
    SinglePhotonClick,
}

/// Estimate of one weak-value component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComponentEstimate {
    pub click: Estimate,
    pub noclick: Option<Estimate>,
    pub combined: Estimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolEstimate {
    pub protocol: Protocol,
    /// Click fraction.
    pub p_star: Estimate,
    pub scale: f64,
    pub re: Option<ComponentEstimate>,
    pub im: Option<ComponentEstimate>,
}

impl ProtocolEstimate {
    /// Point estimate; a component without readouts is NaN.
    pub fn value(&self) -> WeakValue {
        WeakValue::new(
            self.re.map_or(f64::NAN, |c| c.combined.mean),
            self.im.map_or(f64::NAN, |c| c.combined.mean),
        )
    }
}

/// `d/dp f(−p)` for `f(x) = x/ln(1+x)`.
fn scaling_slope(p: f64) -> f64 {
    if p.abs() < 1e-4 {
        return -0.5 - p / 6.0 - p * p / 8.0;
    }
    let l = (-p).ln_1p();
    -1.0 / l - p / ((1.0 - p) * l * l)
}

/// Turns shot records into the single-photon weak value estimate.
pub fn estimate_protocol(records: &[ShotRecord], cfg: PointerConfig, protocol: Protocol) -> Result<ProtocolEstimate> {
    cfg.validate()?;
    let n = records.len();
    let clicks = records.iter().filter(|r| r.outcome == Outcome::Click).count();
    if clicks == 0 {
        return Err(Error::EmptyPopulation("click"));
    }
    if protocol == Protocol::SubtractAndScale && clicks == n {
        return Err(Error::EmptyPopulation("no-click"));
    }
    let p_hat = clicks as f64 / n as f64;
    let p_star = Estimate { mean: p_hat, std_error: (p_hat * (1.0 - p_hat) / n as f64).sqrt(), n_samples: n };
    let scale = match protocol {
        Protocol::SubtractAndScale => scaling_function(-p_hat)?,
        Protocol::SinglePhotonClick => 1.0,
    };

    let component = |pick: fn(&ShotRecord) -> Option<f64>, gain: f64| -> Option<ComponentEstimate> {
        let conditional = |o: Outcome| {
            Estimate::from_samples(records.iter().filter(|r| r.outcome == o).filter_map(pick))
                .map(|e| e.scaled(1.0 / gain))
        };
        let click = conditional(Outcome::Click)?;
        match protocol {
            Protocol::SinglePhotonClick => Some(ComponentEstimate { click, noclick: None, combined: click }),
            Protocol::SubtractAndScale => {
                let noclick = conditional(Outcome::NoClick)?;
                let diff = click.mean - noclick.mean;
                let slope = scaling_slope(p_hat);
                let var = scale * scale * (click.std_error.powi(2) + noclick.std_error.powi(2))
                    + (diff * slope * p_star.std_error).powi(2);
                let combined = Estimate {
                    mean: diff * scale,
                    std_error: var.sqrt(),
                    n_samples: click.n_samples + noclick.n_samples,
                };
                Some(ComponentEstimate { click, noclick: Some(noclick), combined })
            }
        }
    };
    let re = component(|r| r.x_sample, cfg.g);
    let im = component(|r| r.p_sample, cfg.momentum_gain() * cfg.g);
    if re.is_none() && im.is_none() {
        return Err(Error::EmptyPopulation(if protocol == Protocol::SubtractAndScale {
            "click/no-click pointer readout"
        } else {
            "click pointer readout"
        }));
    }
    Ok(ProtocolEstimate { protocol, p_star, scale, re, im })
}
