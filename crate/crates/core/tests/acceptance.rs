//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::f64::consts::{LN_2, PI};
use std::panic;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use wvlab_core::dsl::{parse, serialize};
use wvlab_core::fock::{
    lemma_check, prepare_input, generalized_weak_value, Observable, OracleConfig, OracleRun, PostSelectionOperator,
};
use wvlab_core::measurement::{
    estimate_protocol, run_shots, sector_amplitudes, PointerConfig, PointerPosterior, Protocol, Variable,
};
use wvlab_core::optics::{expand_loss, Circuit};
use wvlab_core::weak_value::{scaling_function, EngineConfig};
use wvlab_core::{InputState, PostSelection, WeakValue};

use common::{random_expanded, random_lossy, rng};

const ALPHA_SQ: [f64; 5] = [0.01, 0.5, 1.0, 4.0, 9.0];
const SWEEP_CIRCUITS: usize = 500;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn alpha_for(rng: &mut impl Rng, alpha_sq: f64) -> Complex64 {
    Complex64::from_polar(alpha_sq.sqrt(), rng.random_range(-PI..PI))
}

fn sweep_circuits(seed: u64, probes: usize) -> Vec<Circuit> {
    let mut r = rng(seed);
    (0..SWEEP_CIRCUITS).map(|_| random_expanded(&mut r, probes)).collect()
}

fn reconstruction_exactness(seed: u64, probes: usize, limit_s: f64) -> Outcome {
    let circuits = sweep_circuits(seed, probes);
    let mut r = rng(seed ^ 0xa1fa);
    let cfg = EngineConfig::default();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut errors = 0;
    for c in &circuits {
        let compiled = c.compile().expect("random circuits are valid");
        let target = compiled.single_photon_weak_value(PostSelection::Fock(1), &cfg);
        for &a2 in &ALPHA_SQ {
            let alpha = alpha_for(&mut r, a2);
            match (compiled.reconstruct_single_photon(alpha, &cfg), &target) {
                (Ok(rec), Ok(t)) => worst = worst.max(rec.value.distance(*t)),
                _ => errors += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-10 && errors == 0 && within(elapsed, limit_s),
        format!(
            "{} circuits x {} |alpha|^2, max |reconstructed - single photon| = {worst:.2e}, errors {errors}, {:.2}s",
            circuits.len(),
            ALPHA_SQ.len(),
            elapsed.as_secs_f64()
        ),
    )
}

const COHERENT_VARIANTS: [PostSelection; 6] = [
    PostSelection::None,
    PostSelection::Fock(0),
    PostSelection::Fock(1),
    PostSelection::Fock(2),
    PostSelection::Click,
    PostSelection::NoClick,
];
const PHOTON_VARIANTS: [PostSelection; 5] = [
    PostSelection::None,
    PostSelection::Fock(0),
    PostSelection::Fock(1),
    PostSelection::Click,
    PostSelection::NoClick,
];

/// Compares the analytic and oracle weak values of one circuit/input for
/// every post-selection; returns the largest discrepancy.
fn oracle_discrepancy(c: &Circuit, input: &InputState, variants: &[PostSelection]) -> Result<f64, String> {
    let ocfg = OracleConfig::default();
    let ecfg = EngineConfig::default();
    let compiled = c.compile().map_err(|e| e.to_string())?;
    let state = prepare_input(c, input, &ocfg).map_err(|e| e.to_string())?;
    if state.truncation_tail >= 1e-12 {
        return Err(format!("truncation tail {:.1e}", state.truncation_tail));
    }
    let run = OracleRun::new(c, &state, &Observable::PhotonNumber(c.probe_modes.clone())).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for &ps in variants {
        let analytic = match input {
            InputState::Coherent(alpha) => compiled.coherent_weak_value(*alpha, ps, &ecfg),
            InputState::SinglePhoton => compiled.single_photon_weak_value(ps, &ecfg),
        };
        let oracle = run.weak_value(&PostSelectionOperator::from_post_selection(ps, c.detect_mode), ocfg.p_min);
        match (analytic, oracle) {
            (Ok(a), Ok(o)) => worst = worst.max(a.distance(o)),
            (Err(_), Err(_)) => {}
            (a, o) => return Err(format!("{ps}: analytic {a:?} vs oracle {o:?}")),
        }
    }
    Ok(worst)
}

fn oracle_equivalence(seed: u64, probes: usize, limit_s: f64) -> Outcome {
    let circuits = sweep_circuits(seed, probes);
    let mut r = rng(seed ^ 0xa1fa);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (i, c) in circuits.iter().enumerate() {
        let mut inputs = vec![InputState::SinglePhoton];
        inputs.extend(ALPHA_SQ.iter().map(|&a2| InputState::Coherent(alpha_for(&mut r, a2))));
        for input in &inputs {
            let variants: &[PostSelection] = match input {
                InputState::Coherent(_) => &COHERENT_VARIANTS,
                InputState::SinglePhoton => &PHOTON_VARIANTS,
            };
            match oracle_discrepancy(c, input, variants) {
                Ok(d) => worst = worst.max(d),
                Err(e) => failures.push(format!("circuit {i}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-8 && failures.is_empty() && within(elapsed, limit_s),
        format!(
            "{} circuits, single photon + {} coherent amplitudes, all post-selections, max |analytic - oracle| = {worst:.2e}, {} failures{}, {:.1}s",
            circuits.len(),
            ALPHA_SQ.len(),
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default(),
            elapsed.as_secs_f64()
        ),
    )
}

fn lemma() -> Outcome {
    let mut r = rng(3);
    let cfg = OracleConfig::default();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for i in 0..100 {
        let c = random_expanded(&mut r, 1);
        let a2 = r.random_range(0.05..4.0);
        let input = InputState::Coherent(alpha_for(&mut r, a2));
        let m = (i % 3) as u32;
        let state = prepare_input(&c, &input, &cfg).expect("input fits");
        match lemma_check(
            &c,
            &state,
            &Observable::PhotonNumber(c.probe_modes.clone()),
            &PostSelectionOperator::FockProjector { mode: c.detect_mode, m },
            &cfg,
        ) {
            Ok(check) => worst = worst.max(check.difference),
            Err(e) => failures.push(format!("case {i} (m={m}): {e}")),
        }
    }
    outcome(
        worst < 1e-9 && failures.is_empty(),
        format!(
            "100 coherent cases, m in {{0,1,2}}, max |ignored - projected| = {worst:.2e}, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn proportionality() -> Outcome {
    let mut r = rng(4);
    let cfg = EngineConfig::default();
    let grid = log_grid(1e-4, 9.0, 25);
    let (mut mean_dev, mut noclick_dev, mut sp_residual) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let c = random_expanded(&mut r, 1).compile().expect("valid");
        let phase = r.random_range(-PI..PI);
        let at = |a2: f64| c.proportionality_at(Complex64::from_polar(a2.sqrt(), phase), &cfg).expect("nonzero alpha");
        let reference = at(1.0);
        for &a2 in &grid {
            let p = at(a2);
            mean_dev = mean_dev.max((p.mean_number - reference.mean_number).abs() / reference.mean_number.abs().max(1e-300));
            let scale = reference.noclick.as_complex().norm().max(1e-300);
            noclick_dev = noclick_dev.max(p.noclick.distance(reference.noclick) / scale);
            sp_residual = sp_residual.max(p.single_photon_residual);
        }
    }
    outcome(
        mean_dev < 1e-12 && noclick_dev < 1e-12 && sp_residual < 1e-10,
        format!(
            "100 circuits, |alpha|^2 in [1e-4, 9]: <n>/|alpha|^2 rel. spread {mean_dev:.1e}, noclick/|alpha|^2 rel. spread {noclick_dev:.1e}, |noclick/|alpha|^2 - (1-T) WV0| = {sp_residual:.1e}"
        ),
    )
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn small_alpha() -> Outcome {
    let mut r = rng(5);
    let cfg = EngineConfig::default();
    let grid = log_grid(1e-4, 1e-1, 13);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut remark_worst = 0.0f64;
    for _ in 0..50 {
        let c = random_expanded(&mut r, 1).compile().expect("valid");
        let phase = r.random_range(-PI..PI);
        let target = c.single_photon_weak_value(PostSelection::Fock(1), &cfg).expect("bright enough");
        let gaps: Vec<f64> = grid
            .iter()
            .map(|&a2| {
                let wv = c
                    .coherent_weak_value(Complex64::from_polar(a2.sqrt(), phase), PostSelection::Click, &cfg)
                    .expect("click possible");
                wv.distance(target)
            })
            .collect();
        let slope = log_slope(&grid, &gaps);
        lo = lo.min(slope);
        hi = hi.max(slope);
        // x = T|alpha|^2 below 1e-3.
        let t = c.transmittance();
        for x in log_grid(1e-7, 9.99e-4, 8) {
            let p_star = c.click_probability(Complex64::new((x / t).sqrt(), 0.0));
            let f = scaling_function(-p_star).expect("in domain");
            remark_worst = remark_worst.max((f - 1.0).abs());
        }
    }
    outcome(
        lo >= 0.9 && hi <= 1.1 && remark_worst < 1e-3,
        format!(
            "50 circuits: log-log slope of |WV_click - WV_1| over |alpha|^2 in [1e-4, 1e-1] in [{lo:.4}, {hi:.4}]; max |f(-p*) - 1| at T|alpha|^2 < 1e-3 = {remark_worst:.2e}"
        ),
    )
}

fn identity_counterexample() -> Outcome {
    let mut r = rng(6);
    let cfg = OracleConfig::default();
    let mut worst_one = 0.0f64;
    let mut worst_reconstruction = f64::INFINITY;
    for _ in 0..20 {
        let c = random_expanded(&mut r, 1);
        let a2 = r.random_range(0.1..4.0);
        let alpha = alpha_for(&mut r, a2);
        let coherent = prepare_input(&c, &InputState::Coherent(alpha), &cfg).expect("fits");
        let photon = prepare_input(&c, &InputState::SinglePhoton, &cfg).expect("fits");
        let wv = |state, ps| {
            generalized_weak_value(
                &c,
                state,
                &Observable::Identity,
                &PostSelectionOperator::from_post_selection(ps, c.detect_mode),
                &cfg,
            )
            .expect("post-selection possible")
        };
        let mut values: Vec<WeakValue> = COHERENT_VARIANTS.iter().map(|&ps| wv(&coherent, ps)).collect();
        values.extend(PHOTON_VARIANTS.iter().map(|&ps| wv(&photon, ps)));
        for v in &values {
            worst_one = worst_one.max(v.distance(WeakValue::new(1.0, 0.0)));
        }
        let p_star = c.compile().expect("valid").click_probability(alpha);
        let click = wv(&coherent, PostSelection::Click);
        let noclick = wv(&coherent, PostSelection::NoClick);
        let reconstructed = (click.as_complex() - noclick.as_complex()) * scaling_function(-p_star).expect("domain");
        let single = wv(&photon, PostSelection::Click);
        worst_reconstruction = worst_reconstruction.min(single.distance(reconstructed.into()));
    }
    // Expected failure: the reconstruction gives 0 where the truth is 1.
    outcome(
        worst_one < 1e-12 && worst_reconstruction > 0.5,
        format!(
            "Identity observable: max |WV - 1| = {worst_one:.1e}; reconstruction misses the single-photon value by at least {worst_reconstruction:.3} (expected failure of the formula)"
        ),
    )
}

fn pointer() -> Outcome {
    let ocfg = OracleConfig::default();
    let mut r = rng(8);
    let mut cases: Vec<(Circuit, InputState, PostSelection)> = vec![(
        Circuit::identity(1, 0),
        InputState::Coherent(Complex64::new(LN_2.sqrt(), 0.0)),
        PostSelection::Click,
    )];
    for i in 0..6 {
        let c = random_expanded(&mut r, 1);
        let input = if i % 2 == 0 { InputState::SinglePhoton } else { InputState::Coherent(alpha_for(&mut r, 1.0)) };
        let ps = [PostSelection::Click, PostSelection::NoClick, PostSelection::Fock(1)][i % 3];
        cases.push((c, input, ps));
    }
    let gs = [0.08, 0.04, 0.02, 0.01];
    let (mut ratio_lo, mut ratio_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut im_worst = 0.0f64;
    let mut skipped = 0;
    for (c, input, ps) in &cases {
        let Ok(sectors) = sector_amplitudes(c, input, *ps, &ocfg) else {
            skipped += 1;
            continue;
        };
        let truth = wvlab_core::fock::oracle_weak_value(c, input, *ps, &ocfg).expect("oracle");
        let component = |g: f64, v: Variable| {
            PointerPosterior::new(&sectors, PointerConfig::new(1.0, g).expect("valid"), v)
                .expect("posterior")
                .weak_value_component()
        };
        for (variable, exact) in [(Variable::Position, truth.re), (Variable::Momentum, truth.im)] {
            let errs: Vec<f64> = gs.iter().map(|&g| (component(g, variable) - exact).abs()).collect();
            if variable == Variable::Momentum {
                im_worst = im_worst.max(errs[2] / (1.0 + exact.abs()));
            }
            // Skip order checks where the O(g²) error is at rounding level.
            if errs[3] < 1e-11 {
                continue;
            }
            for w in errs.windows(2) {
                let ratio = w[0] / w[1];
                ratio_lo = ratio_lo.min(ratio);
                ratio_hi = ratio_hi.max(ratio);
            }
        }
    }
    // At g = 0.02 the relative O(g²) error is a few 1e-3 for these states.
    let im_ok = im_worst < 0.02;
    outcome(
        ratio_lo >= 3.0 && ratio_hi <= 5.0 && im_ok && skipped == 0,
        format!(
            "{} cases, g = 0.08..0.01: error ratio per halving in [{ratio_lo:.3}, {ratio_hi:.3}]; Im via momentum at g=0.02 off by {im_worst:.1e} (relative); skipped {skipped}",
            cases.len()
        ),
    )
}

fn monte_carlo() -> Outcome {
    let c = Circuit::identity(1, 0);
    let input = InputState::Coherent(Complex64::new(LN_2.sqrt(), 0.0));
    let cfg = PointerConfig::new(1.0, 0.02).expect("valid");
    let ocfg = OracleConfig::default();
    let start = Instant::now();
    let estimate = |n: usize, seed: u64| {
        let shots = run_shots(&c, &input, cfg, n, seed, Variable::Position, &ocfg).expect("shots");
        estimate_protocol(&shots, cfg, Protocol::SubtractAndScale).expect("both populations").re.expect("position")
    };
    let small = estimate(250_000, 11);
    let large = estimate(1_000_000, 12);
    let elapsed = start.elapsed();
    let z = (large.combined.mean - 1.0) / large.combined.std_error;
    let ratio = small.combined.std_error / large.combined.std_error;
    outcome(
        z.abs() < 4.0 && (ratio / 2.0 - 1.0).abs() < 0.2 && within(elapsed, 60.0),
        format!(
            "1e6 shots: Re = {:.4} +- {:.4} (z = {z:.2}); std error ratio 2.5e5/1e6 = {ratio:.3} (expect 2); {:.1}s",
            large.combined.mean,
            large.combined.std_error,
            elapsed.as_secs_f64()
        ),
    )
}

fn random_text(r: &mut impl Rng) -> String {
    const WORDS: [&str; 16] = [
        "modes", "input", "bs", "phase", "loss", "probe", "detect", "coherent", "single-photon", "theta=", "phi=",
        "eta=", "#", "\n", " ", "=",
    ];
    if r.random_bool(0.3) {
        let len = r.random_range(0..200);
        let bytes: Vec<u8> = (0..len).map(|_| r.random()).collect();
        return String::from_utf8_lossy(&bytes).into_owned();
    }
    let mut s = String::new();
    for _ in 0..r.random_range(0..60) {
        match r.random_range(0..4) {
            0 | 1 => s.push_str(WORDS[r.random_range(0..WORDS.len())]),
            2 => s.push_str(&format!("{}", r.random_range(-3i64..8))),
            _ => s.push(r.random_range('\0'..='\u{2fff}')),
        }
        if r.random_bool(0.5) {
            s.push(' ');
        }
    }
    s
}

fn random_input(r: &mut impl Rng) -> InputState {
    if r.random_bool(0.3) {
        InputState::SinglePhoton
    } else {
        InputState::Coherent(Complex64::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)))
    }
}

fn parser() -> Outcome {
    let mut r = rng(10);
    let mut crashes = 0;
    let mut accepted = 0;
    let previous_hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    for _ in 0..100_000 {
        let text = random_text(&mut r);
        match panic::catch_unwind(|| parse(&text)) {
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(errors)) => {
                if errors.is_empty() {
                    crashes += 1;
                }
            }
            Err(_) => crashes += 1,
        }
    }
    panic::set_hook(previous_hook);

    let mut mismatches = 0;
    for _ in 0..1000 {
        let probes = r.random_range(1..=2);
        let c = random_lossy(&mut r, probes);
        let input = random_input(&mut r);
        match parse(&serialize(&c, &input)) {
            Ok(x) if x.circuit == c && x.input == input => {}
            _ => mismatches += 1,
        }
        // Expansion keeps the format closed too.
        let e = expand_loss(&c);
        if parse(&serialize(&e, &input)).map(|x| x.circuit) != Ok(e) {
            mismatches += 1;
        }
    }
    outcome(
        crashes == 0 && mismatches == 0,
        format!("1e5 fuzz inputs: {crashes} crashes ({accepted} happened to parse); 1e3 random circuits: {mismatches} round-trip mismatches"),
    )
}

type Criterion = Box<dyn Fn() -> Outcome>;

fn main() {
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 reconstruction exactness", Box::new(|| reconstruction_exactness(1, 1, 10.0))),
        ("2 oracle equivalence", Box::new(|| oracle_equivalence(1, 1, 300.0))),
        ("3 lemma", Box::new(lemma)),
        ("4 proportionality", Box::new(proportionality)),
        ("5 small-alpha limit", Box::new(small_alpha)),
        ("6 identity counter-example", Box::new(identity_counterexample)),
        (
            "7 two-mode probe",
            Box::new(|| {
                let a = reconstruction_exactness(7, 2, 10.0);
                let b = oracle_equivalence(7, 2, 300.0);
                outcome(a.pass && b.pass, format!("reconstruction: {}; oracle: {}", a.detail, b.detail))
            }),
        ),
        ("8 operational pointer", Box::new(pointer)),
        ("9 monte-carlo protocol", Box::new(monte_carlo)),
        ("10 parser totality and round-trip", Box::new(parser)),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in &criteria {
        let number = name.split(' ').next().unwrap_or_default();
        if !only.is_empty() && !only.iter().any(|o| o == number) {
            continue;
        }
        let result = run();
        println!("criterion {name}: {} - {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
