use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::Value;
use wvlab_core::dsl::{parse, Experiment};
use wvlab_core::fock::{
    lemma_check, prepare_input, Observable, OracleConfig, OracleRun, PostSelectionOperator,
};
use wvlab_core::measurement::{
    estimate_protocol, ComponentEstimate, Estimate, Outcome, PointerConfig, Protocol, ShotModel, ShotRecord, Variable,
};
use wvlab_core::optics::{expand_loss, Circuit, CompiledCircuit};
use wvlab_core::weak_value::{EngineConfig, Reconstruction};
use wvlab_core::{Error, InputState, PostSelection, WeakValue};

use crate::report::{digest, num, Report};

/// Failures that end a command without a report, each with its exit code.
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Io(String),
    Domain(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Io(_) => 3,
            Failure::Domain(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Io(m) | Failure::Domain(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = match &e {
            Error::PostSelectionTooRare { event, probability, p_min } => format!(
                "post-selection `{event}` has probability {probability:e} < {p_min:e}: \
                 the detector sits at (or next to) a dark port, so the weak value is undefined"
            ),
            Error::EmptyPopulation(which) => {
                format!("no {which} shots were recorded; raise --shots or change the input intensity")
            }
            Error::NotFactorizable { residual } => format!(
                "the final state does not factorize across the detector and the other modes \
                 (relative residual {residual:e}), so the two post-selections are not comparable"
            ),
            other => other.to_string(),
        };
        Failure::Domain(message)
    }
}

pub type Outcomes = Result<Report, Failure>;

/// A parsed experiment, its loss-expanded circuit and its digest.
pub struct Loaded {
    pub experiment: Experiment,
    pub expanded: Circuit,
    pub digest: String,
}

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let experiment = parse(&text).map_err(|errors| {
        let lines: Vec<String> = errors
            .iter()
            .map(|e| format!("{}:{}:{}: {:?}: {}", path.display(), e.span.line, e.span.column, e.kind, e.message))
            .collect();
        Failure::Parse(lines.join("\n"))
    })?;
    experiment.circuit.validate().map_err(|e| Failure::Domain(e.to_string()))?;
    let expanded = expand_loss(&experiment.circuit);
    let digest = digest(&experiment.to_text());
    Ok(Loaded { experiment, expanded, digest })
}

fn wv_cells(wv: WeakValue) -> [Value; 2] {
    [num(wv.re), num(wv.im)]
}

fn coherent_alpha(loaded: &Loaded, command: &str) -> Result<Complex64, Failure> {
    match loaded.experiment.input {
        InputState::Coherent(a) => Ok(a),
        InputState::SinglePhoton => Err(Failure::Domain(format!(
            "`{command}` needs a coherent input; the file declares a single photon"
        ))),
    }
}

fn input_label(input: &InputState) -> Value {
    match input {
        InputState::Coherent(a) => format!("coherent {} {}", a.re, a.im).into(),
        InputState::SinglePhoton => "single-photon".into(),
    }
}

pub fn validate(file: &Path, unitarity_tol: f64) -> Outcomes {
    let loaded = load(file)?;
    let c = &loaded.experiment.circuit;
    let compiled = loaded.expanded.compile()?;
    let defect = [&compiled.pre, &compiled.post, &compiled.total]
        .iter()
        .map(|m| m.unitarity_defect())
        .fold(0.0, f64::max);
    let mut report = Report::new(
        "validate",
        loaded.digest.clone(),
        &["modes", "expanded_modes", "elements", "loss_elements", "transmittance", "unitarity_defect"],
    );
    report.param("input", input_label(&loaded.experiment.input));
    report.tolerance("unitarity", unitarity_tol);
    report.push(vec![
        c.n_modes.into(),
        loaded.expanded.n_modes.into(),
        (c.pre_probe.len() + c.post_probe.len()).into(),
        c.loss_count().into(),
        num(compiled.transmittance()),
        num(defect),
    ]);
    report.passed = defect <= unitarity_tol;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Engine {
    Analytic,
    Oracle,
    Both,
}

pub struct WvArgs {
    pub postselect: PostSelection,
    pub engine: Engine,
    pub tol: f64,
    pub p_min: f64,
    pub tail_tol: f64,
}

fn analytic_wv(compiled: &CompiledCircuit, input: &InputState, ps: PostSelection, cfg: &EngineConfig) -> Result<WeakValue, Error> {
    match input {
        InputState::Coherent(a) => compiled.coherent_weak_value(*a, ps, cfg),
        InputState::SinglePhoton => compiled.single_photon_weak_value(ps, cfg),
    }
}

pub fn wv(file: &Path, args: &WvArgs) -> Outcomes {
    let loaded = load(file)?;
    let c = &loaded.expanded;
    let input = loaded.experiment.input;
    let mut report = Report::new("wv", loaded.digest.clone(), &["engine", "re", "im"]);
    report
        .param("input", input_label(&input))
        .param("postselect", args.postselect.to_string())
        .param("engine", format!("{:?}", args.engine).to_lowercase());
    report.tolerance("p_min", args.p_min);

    let mut values = Vec::new();
    if args.engine != Engine::Oracle {
        let cfg = EngineConfig { p_min: args.p_min };
        let v = analytic_wv(&c.compile()?, &input, args.postselect, &cfg)?;
        values.push(v);
        let [re, im] = wv_cells(v);
        report.push(vec!["analytic".into(), re, im]);
    }
    if args.engine != Engine::Analytic {
        let cfg = OracleConfig { p_min: args.p_min, tail_tolerance: args.tail_tol, ..OracleConfig::default() };
        report.tolerance("truncation_tail", args.tail_tol);
        let state = prepare_input(c, &input, &cfg)?;
        report.note_tail(state.truncation_tail);
        let run = OracleRun::new(c, &state, &Observable::PhotonNumber(c.probe_modes.clone()))?;
        let v = run.weak_value(&PostSelectionOperator::from_post_selection(args.postselect, c.detect_mode), cfg.p_min)?;
        values.push(v);
        let [re, im] = wv_cells(v);
        report.push(vec!["oracle".into(), re, im]);
    }
    if let [a, o] = values[..] {
        let d = a.distance(o);
        report.tolerance("discrepancy", args.tol);
        report.push(vec!["discrepancy".into(), num(d), Value::Null]);
        report.passed = d <= args.tol;
    }
    Ok(report)
}

pub const THEOREM_COLUMNS: [&str; 12] = [
    "alpha_sq",
    "p_star",
    "wv_click_re",
    "wv_click_im",
    "wv_noclick_re",
    "wv_noclick_im",
    "f",
    "reconstructed_re",
    "reconstructed_im",
    "single_photon_re",
    "single_photon_im",
    "residual",
];

pub fn theorem(file: &Path, alpha_sq: Option<Vec<f64>>, tol: f64, p_min: f64) -> Outcomes {
    let loaded = load(file)?;
    let alpha = coherent_alpha(&loaded, "theorem")?;
    let mut points = alpha_sq.unwrap_or_else(|| vec![alpha.norm_sqr()]);
    if let Some(bad) = points.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Failure::Domain(format!(
            "|alpha|^2 = {bad} gives click probability p* = 0; the reconstruction needs |alpha|^2 > 0"
        )));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    // Sweep points keep the file's phase; only the magnitude changes.
    let phase = if alpha.norm() > 0.0 { alpha.arg() } else { 0.0 };
    let compiled = loaded.expanded.compile()?;
    let cfg = EngineConfig { p_min };
    let single = compiled.single_photon_weak_value(PostSelection::Fock(1), &cfg)?;
    let results: Vec<Reconstruction> = points
        .par_iter()
        .map(|&a2| compiled.reconstruct_single_photon(Complex64::from_polar(a2.sqrt(), phase), &cfg))
        .collect::<Result<_, _>>()?;

    let mut report = Report::new("theorem", loaded.digest.clone(), &THEOREM_COLUMNS);
    report
        .param("alpha_sq", points.iter().map(|&a| num(a)).collect::<Vec<_>>())
        .param("alpha_phase", num(phase))
        .param("transmittance", num(compiled.transmittance()));
    report.tolerance("residual", tol).tolerance("p_min", p_min);
    let mut worst = 0.0f64;
    for (a2, r) in points.iter().zip(&results) {
        let residual = r.value.distance(single);
        worst = worst.max(residual);
        let [cr, ci] = wv_cells(r.click);
        let [nr, ni] = wv_cells(r.noclick);
        let [rr, ri] = wv_cells(r.value);
        let [sr, si] = wv_cells(single);
        report.push(vec![num(*a2), num(r.p_star), cr, ci, nr, ni, num(r.scale), rr, ri, sr, si, num(residual)]);
    }
    report.passed = worst <= tol;
    Ok(report)
}

pub struct MonteCarloArgs {
    pub shots: usize,
    pub g: f64,
    pub sigma_x: f64,
    pub seed: u64,
    pub variable: Variable,
    pub bins: usize,
    pub hist_out: Option<PathBuf>,
    pub p_min: f64,
    pub tail_tol: f64,
}

fn variable_name(v: Variable) -> &'static str {
    match v {
        Variable::Position => "position",
        Variable::Momentum => "momentum",
    }
}

fn component(wv: WeakValue, v: Variable) -> f64 {
    match v {
        Variable::Position => wv.re,
        Variable::Momentum => wv.im,
    }
}

fn estimate_row(name: &str, e: Option<Estimate>, exact: f64) -> Vec<Value> {
    let (mean, se, n) = e.map_or((f64::NAN, f64::NAN, 0), |e| (e.mean, e.std_error, e.n_samples));
    vec![name.into(), num(mean), num(se), n.into(), num(exact), num((mean - exact) / se)]
}

pub fn montecarlo(file: &Path, args: &MonteCarloArgs) -> Outcomes {
    let loaded = load(file)?;
    let c = &loaded.expanded;
    let input = loaded.experiment.input;
    if args.shots == 0 {
        return Err(Failure::Domain("--shots must be at least 1".into()));
    }
    let pointer = PointerConfig::new(args.sigma_x, args.g)?;
    let oracle = OracleConfig { p_min: args.p_min, tail_tolerance: args.tail_tol, ..OracleConfig::default() };
    let ecfg = EngineConfig { p_min: args.p_min };
    let compiled = c.compile()?;
    let target = compiled.single_photon_weak_value(PostSelection::Fock(1), &ecfg)?;
    let (protocol, p_exact, click_exact, noclick_exact) = match input {
        InputState::Coherent(alpha) => {
            let r = compiled.reconstruct_single_photon(alpha, &ecfg)?;
            (Protocol::SubtractAndScale, r.p_star, r.click, Some(r.noclick))
        }
        InputState::SinglePhoton => (Protocol::SinglePhotonClick, compiled.transmittance(), target, None),
    };

    let state = prepare_input(c, &input, &oracle)?;
    let model = ShotModel::new(c, &input, pointer, args.variable, &oracle)?;
    let records = model.sample(args.shots, args.seed);
    let est = estimate_protocol(&records, pointer, protocol)?;
    let comp: Option<ComponentEstimate> = match args.variable {
        Variable::Position => est.re,
        Variable::Momentum => est.im,
    };
    let comp = comp.ok_or(Error::EmptyPopulation("pointer readout"))?;

    let mut report = Report::new(
        "montecarlo",
        loaded.digest.clone(),
        &["quantity", "estimate", "std_error", "n_samples", "exact", "z"],
    );
    report
        .param("input", input_label(&input))
        .param("shots", args.shots)
        .param("g", num(args.g))
        .param("sigma_x", num(args.sigma_x))
        .param("seed", args.seed)
        .param("variable", variable_name(args.variable))
        .param("protocol", serde_json::to_value(protocol).expect("enum serializes"))
        .param("weak_regime", pointer.is_weak(relevant_photons(&input)));
    report.tolerance("p_min", args.p_min).tolerance("truncation_tail", args.tail_tol);
    report.note_tail(state.truncation_tail);
    report.push(estimate_row("p_star", Some(est.p_star), p_exact));
    report.push(estimate_row("wv_click", Some(comp.click), component(click_exact, args.variable)));
    if let Some(n) = noclick_exact {
        report.push(estimate_row("wv_noclick", comp.noclick, component(n, args.variable)));
    }
    report.push(estimate_row("reconstructed", Some(comp.combined), component(target, args.variable)));

    if let Some(path) = &args.hist_out {
        fs::write(path, histogram_csv(&records, args.variable, args.bins))
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(report)
}

/// Photon numbers beyond this carry negligible weight: mean plus three
/// standard deviations.
fn relevant_photons(input: &InputState) -> usize {
    let mean = match input {
        InputState::Coherent(a) => a.norm_sqr(),
        InputState::SinglePhoton => 1.0,
    };
    (mean + 3.0 * mean.sqrt()).ceil().max(1.0) as usize
}

/// Per-outcome histograms of the pointer readout on a shared grid.
pub fn histogram_csv(records: &[ShotRecord], variable: Variable, bins: usize) -> String {
    let value = |r: &ShotRecord| match variable {
        Variable::Position => r.x_sample,
        Variable::Momentum => r.p_sample,
    };
    let samples: Vec<(Outcome, f64)> = records.iter().filter_map(|r| value(r).map(|v| (r.outcome, v))).collect();
    let bins = bins.max(1);
    let lo = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = [vec![0usize; bins], vec![0usize; bins]];
    for &(o, v) in &samples {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[(o == Outcome::NoClick) as usize][k] += 1;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["outcome", "bin_lo", "bin_hi", "count", "density"]).expect("in-memory write");
    for (label, row) in ["click", "no_click"].iter().zip(&counts) {
        let total: usize = row.iter().sum();
        for (k, &n) in row.iter().enumerate() {
            let b_lo = lo + k as f64 * width;
            let density = if total > 0 { n as f64 / (total as f64 * width) } else { 0.0 };
            w.write_record([
                label.to_string(),
                b_lo.to_string(),
                (b_lo + width).to_string(),
                n.to_string(),
                density.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn lemma(file: &Path, m: u32, tol: f64, p_min: f64, tail_tol: f64) -> Outcomes {
    let loaded = load(file)?;
    if loaded.experiment.input == InputState::SinglePhoton {
        return Err(Failure::Domain(
            "a single photon leaves the detected mode entangled with the others, so the final \
             state is not a product and projecting the undetected modes changes the weak value; \
             the comparison needs a coherent input"
                .into(),
        ));
    }
    let c = &loaded.expanded;
    let cfg = OracleConfig { p_min, tail_tolerance: tail_tol, ..OracleConfig::default() };
    let state = prepare_input(c, &loaded.experiment.input, &cfg)?;
    let check = lemma_check(
        c,
        &state,
        &Observable::PhotonNumber(c.probe_modes.clone()),
        &PostSelectionOperator::FockProjector { mode: c.detect_mode, m },
        &cfg,
    )?;
    let mut report = Report::new("lemma", loaded.digest.clone(), &["variant", "re", "im"]);
    report
        .param("input", input_label(&loaded.experiment.input))
        .param("m", m)
        .param("factorization_residual", num(check.factorization_residual));
    report
        .tolerance("difference", tol)
        .tolerance("p_min", p_min)
        .tolerance("truncation_tail", tail_tol)
        .tolerance("factorization", cfg.factorization_tol);
    report.note_tail(state.truncation_tail);
    let [a, b] = wv_cells(check.ignored);
    report.push(vec!["others_ignored".into(), a, b]);
    let [a, b] = wv_cells(check.projected);
    report.push(vec!["others_projected".into(), a, b]);
    report.push(vec!["difference".into(), num(check.difference), Value::Null]);
    report.passed = check.difference <= tol;
    Ok(report)
}
