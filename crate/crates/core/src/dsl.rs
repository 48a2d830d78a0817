//! Line-oriented circuit description format (`.wvc`).
//!
//! ```text
//! # Mach-Zehnder with the probe on one arm
//! modes 2
//! input 0 single-photon
//! bs 0 1 theta=0.7853981633974483 phi=0
//! probe 0
//! bs 0 1 theta=0.7853981633974483 phi=0
//! detect 1
//! ```
//!
//! Elements listed before `probe` act before the probe, the rest after it.
//! Angles are in radians. Parsing collects every error instead of stopping
//! at the first one.

use std::f64::consts::FRAC_PI_2;
use std::fmt::{self, Write as _};

use num_complex::Complex64;
use serde::Serialize;

use crate::optics::{Circuit, CircuitElement};
use crate::weak_value::InputState;

/// 1-based position of a token in the source text; columns count characters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ParseErrorKind {
    UnknownDirective,
    BadArity,
    BadNumber,
    IndexOutOfRange,
    DuplicateDirective,
    MissingDirective,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.span, self.kind, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A parsed circuit together with its input state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Experiment {
    pub circuit: Circuit,
    pub input: InputState,
}

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    span: SourceSpan,
}

fn tokenize(line_no: usize, line: &str) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (column, (byte, ch)) in code.char_indices().enumerate() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((byte, column + 1)),
            (true, Some((s, col))) => {
                tokens.push(Token { text: &code[s..byte], span: SourceSpan { line: line_no, column: col } });
                start = None;
            }
            _ => {}
        }
    }
    if let Some((s, col)) = start {
        tokens.push(Token { text: &code[s..], span: SourceSpan { line: line_no, column: col } });
    }
    tokens
}

struct Parser {
    n_modes: Option<usize>,
    errors: Vec<ParseError>,
}

impl Parser {
    fn error(&mut self, span: SourceSpan, kind: ParseErrorKind, message: impl Into<String>) {
        self.errors.push(ParseError { span, kind, message: message.into() });
    }

    fn number(&mut self, tok: Token<'_>, text: &str) -> Option<f64> {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.error(tok.span, ParseErrorKind::BadNumber, format!("expected a finite number, found `{text}`"));
                None
            }
        }
    }

    fn keyed(&mut self, tok: Token<'_>, key: &str) -> Option<f64> {
        match tok.text.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')) {
            Some(value) => self.number(tok, value),
            None => {
                self.error(tok.span, ParseErrorKind::BadNumber, format!("expected `{key}=<value>`, found `{}`", tok.text));
                None
            }
        }
    }

    fn mode(&mut self, tok: Token<'_>) -> Option<usize> {
        let Ok(index) = tok.text.parse::<usize>() else {
            self.error(tok.span, ParseErrorKind::BadNumber, format!("expected a mode index, found `{}`", tok.text));
            return None;
        };
        match self.n_modes {
            Some(n) if index >= n => {
                self.error(
                    tok.span,
                    ParseErrorKind::IndexOutOfRange,
                    format!("mode {index} out of range for {n} modes"),
                );
                None
            }
            _ => Some(index),
        }
    }

    /// Checks the argument count; on mismatch reports at the first surplus
    /// token, or at the directive when arguments are missing.
    fn arity(&mut self, tokens: &[Token<'_>], expected: usize, usage: &str) -> bool {
        let found = tokens.len() - 1;
        if found == expected {
            return true;
        }
        let span = if found > expected { tokens[expected + 1].span } else { tokens[0].span };
        self.error(span, ParseErrorKind::BadArity, format!("usage: {usage}"));
        false
    }
}

#[derive(Default)]
struct Seen {
    modes: Option<SourceSpan>,
    input: Option<SourceSpan>,
    probe: Option<SourceSpan>,
    detect: Option<SourceSpan>,
}

/// Parses a circuit description, returning every error found.
pub fn parse(text: &str) -> Result<Experiment, Vec<ParseError>> {
    let lines: Vec<Vec<Token<'_>>> = text
        .split('\n')
        .enumerate()
        .map(|(i, line)| tokenize(i + 1, line))
        .collect();

    let mut p = Parser { n_modes: None, errors: Vec::new() };
    // The mode count bounds every index, wherever it appears in the file.
    let mut seen = Seen::default();
    for tokens in &lines {
        if tokens.first().map(|t| t.text) != Some("modes") {
            continue;
        }
        if let Some(first) = seen.modes {
            p.error(tokens[0].span, ParseErrorKind::DuplicateDirective, format!("`modes` already given at {first}"));
            continue;
        }
        seen.modes = Some(tokens[0].span);
        if !p.arity(tokens, 1, "modes <N>") {
            continue;
        }
        match tokens[1].text.parse::<usize>() {
            Ok(n) if n >= 1 => p.n_modes = Some(n),
            _ => p.error(
                tokens[1].span,
                ParseErrorKind::BadNumber,
                format!("expected a positive mode count, found `{}`", tokens[1].text),
            ),
        }
    }

    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut input: Option<(usize, InputState)> = None;
    let mut probe_modes: Option<Vec<usize>> = None;
    let mut detect: Option<usize> = None;

    for tokens in &lines {
        let Some(&head) = tokens.first() else { continue };
        let slot = match head.text {
            "modes" => continue,
            "input" => &mut seen.input,
            "probe" => &mut seen.probe,
            "detect" => &mut seen.detect,
            "bs" | "phase" | "loss" => {
                let element = parse_element(&mut p, tokens);
                if let Some(e) = element {
                    if seen.probe.is_some() { post.push(e) } else { pre.push(e) }
                }
                continue;
            }
            other => {
                p.error(head.span, ParseErrorKind::UnknownDirective, format!("unknown directive `{other}`"));
                continue;
            }
        };
        if let Some(first) = *slot {
            p.error(head.span, ParseErrorKind::DuplicateDirective, format!("`{}` already given at {first}", head.text));
            continue;
        }
        *slot = Some(head.span);
        match head.text {
            "input" => input = parse_input(&mut p, tokens),
            "probe" => {
                if tokens.len() < 2 {
                    p.error(head.span, ParseErrorKind::BadArity, "usage: probe <mode> [<mode> ...]");
                    continue;
                }
                let mut modes = Vec::new();
                let mut ok = true;
                for &tok in &tokens[1..] {
                    match p.mode(tok) {
                        Some(m) if modes.contains(&m) => {
                            p.error(tok.span, ParseErrorKind::IndexOutOfRange, format!("probe mode {m} listed twice"));
                            ok = false;
                        }
                        Some(m) => modes.push(m),
                        None => ok = false,
                    }
                }
                if ok {
                    probe_modes = Some(modes);
                }
            }
            "detect" => {
                if p.arity(tokens, 1, "detect <mode>") {
                    detect = p.mode(tokens[1]);
                }
            }
            _ => unreachable!(),
        }
    }

    let end = SourceSpan { line: 1, column: 1 };
    for (name, span) in [("modes", seen.modes), ("input", seen.input), ("probe", seen.probe), ("detect", seen.detect)] {
        if span.is_none() {
            p.error(end, ParseErrorKind::MissingDirective, format!("missing `{name}` directive"));
        }
    }

    if !p.errors.is_empty() {
        p.errors.sort_by_key(|e| e.span);
        return Err(p.errors);
    }
    let (Some(n_modes), Some((input_mode, input)), Some(probe_modes), Some(detect_mode)) =
        (p.n_modes, input, probe_modes, detect)
    else {
        unreachable!("all directives present and error-free");
    };
    Ok(Experiment {
        circuit: Circuit { n_modes, pre_probe: pre, post_probe: post, input_mode, probe_modes, detect_mode },
        input,
    })
}

fn parse_input(p: &mut Parser, tokens: &[Token<'_>]) -> Option<(usize, InputState)> {
    const USAGE: &str = "input <mode> coherent <re> <im> | input <mode> single-photon";
    if tokens.len() < 3 {
        p.error(tokens[0].span, ParseErrorKind::BadArity, format!("usage: {USAGE}"));
        return None;
    }
    match tokens[2].text {
        "coherent" => {
            if !p.arity(tokens, 4, USAGE) {
                return None;
            }
            let mode = p.mode(tokens[1]);
            let re = p.number(tokens[3], tokens[3].text);
            let im = p.number(tokens[4], tokens[4].text);
            Some((mode?, InputState::Coherent(Complex64::new(re?, im?))))
        }
        "single-photon" => {
            if !p.arity(tokens, 2, USAGE) {
                return None;
            }
            Some((p.mode(tokens[1])?, InputState::SinglePhoton))
        }
        other => {
            p.error(
                tokens[2].span,
                ParseErrorKind::UnknownDirective,
                format!("unknown input kind `{other}` (expected `coherent` or `single-photon`)"),
            );
            None
        }
    }
}

fn parse_element(p: &mut Parser, tokens: &[Token<'_>]) -> Option<CircuitElement> {
    match tokens[0].text {
        "bs" => {
            if !p.arity(tokens, 4, "bs <a> <b> theta=<rad> phi=<rad>") {
                return None;
            }
            let a = p.mode(tokens[1]);
            let b = p.mode(tokens[2]);
            let theta = p.keyed(tokens[3], "theta");
            let phi = p.keyed(tokens[4], "phi");
            if let (Some(a), Some(b)) = (a, b) {
                if a == b {
                    p.error(tokens[2].span, ParseErrorKind::IndexOutOfRange, "beam splitter needs two distinct modes");
                    return None;
                }
            }
            if let Some(t) = theta {
                if !(0.0..=FRAC_PI_2).contains(&t) {
                    p.error(tokens[3].span, ParseErrorKind::BadNumber, format!("theta={t} outside [0, pi/2]"));
                    return None;
                }
            }
            Some(CircuitElement::beam_splitter(a?, b?, theta?, phi?))
        }
        "phase" => {
            if !p.arity(tokens, 2, "phase <mode> <rad>") {
                return None;
            }
            let mode = p.mode(tokens[1]);
            let phi = p.number(tokens[2], tokens[2].text);
            Some(CircuitElement::phase(mode?, phi?))
        }
        "loss" => {
            if !p.arity(tokens, 2, "loss <mode> eta=<val>") {
                return None;
            }
            let mode = p.mode(tokens[1]);
            let eta = p.keyed(tokens[2], "eta");
            if let Some(e) = eta {
                if !(0.0..=1.0).contains(&e) {
                    p.error(tokens[2].span, ParseErrorKind::BadNumber, format!("eta={e} outside [0, 1]"));
                    return None;
                }
            }
            Some(CircuitElement::loss(mode?, eta?))
        }
        _ => unreachable!(),
    }
}

/// 17 significant digits: re-parsing gives back the same bits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_element(out: &mut String, e: &CircuitElement) {
    let _ = match *e {
        CircuitElement::BeamSplitter { mode_a, mode_b, theta, phi } => {
            writeln!(out, "bs {mode_a} {mode_b} theta={} phi={}", num(theta), num(phi))
        }
        CircuitElement::PhaseShifter { mode, phi } => writeln!(out, "phase {mode} {}", num(phi)),
        CircuitElement::Loss { mode, eta } => writeln!(out, "loss {mode} eta={}", num(eta)),
    };
}

/// Canonical text form; `parse(&serialize(c, i))` gives back `(c, i)`.
pub fn serialize(circuit: &Circuit, input: &InputState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "modes {}", circuit.n_modes);
    let _ = match input {
        InputState::Coherent(a) => writeln!(out, "input {} coherent {} {}", circuit.input_mode, num(a.re), num(a.im)),
        InputState::SinglePhoton => writeln!(out, "input {} single-photon", circuit.input_mode),
    };
    for e in &circuit.pre_probe {
        write_element(&mut out, e);
    }
    let probes: Vec<String> = circuit.probe_modes.iter().map(|m| m.to_string()).collect();
    let _ = writeln!(out, "probe {}", probes.join(" "));
    for e in &circuit.post_probe {
        write_element(&mut out, e);
    }
    let _ = writeln!(out, "detect {}", circuit.detect_mode);
    out
}

impl Experiment {
    pub fn to_text(&self) -> String {
        serialize(&self.circuit, &self.input)
    }
}
