#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wvlab_core::optics::{expand_loss, Circuit, CircuitElement};

/// Shortest detect/no-detect branch allowed for a random circuit; below this
/// single-photon weak values are dominated by the dark-port singularity.
pub const MIN_BRANCH: f64 = 0.01;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random lossy circuit: 1–3 physical modes plus one ancilla per loss
/// element, 2–4 modes after expansion, at most 12 elements, and `probes`
/// distinct probe modes among the physical ones.
pub fn random_lossy(rng: &mut impl Rng, probes: usize) -> Circuit {
    loop {
        let base = rng.random_range(probes.max(1)..=3);
        let max_loss = 4 - base;
        let min_loss = 2usize.saturating_sub(base);
        let losses = rng.random_range(min_loss..=max_loss);
        let n_elements = rng.random_range(losses.max(1)..=12);
        let mut kinds = vec![2u8; losses];
        while kinds.len() < n_elements {
            kinds.push(if base >= 2 && rng.random_bool(0.7) { 0 } else { 1 });
        }
        kinds.shuffle(rng);
        let elements: Vec<CircuitElement> = kinds
            .iter()
            .map(|&k| match k {
                0 => {
                    let a = rng.random_range(0..base);
                    let b = (a + rng.random_range(1..base)) % base;
                    CircuitElement::beam_splitter(a, b, rng.random_range(0.0..FRAC_PI_2), rng.random_range(-PI..PI))
                }
                1 => CircuitElement::phase(rng.random_range(0..base), rng.random_range(-PI..PI)),
                _ => CircuitElement::loss(rng.random_range(0..base), rng.random_range(0.05..0.95)),
            })
            .collect();
        let split = rng.random_range(0..=elements.len());
        let mut probe_modes: Vec<usize> = Vec::new();
        while probe_modes.len() < probes {
            let m = rng.random_range(0..base);
            if !probe_modes.contains(&m) {
                probe_modes.push(m);
            }
        }
        let circuit = Circuit {
            n_modes: base,
            pre_probe: elements[..split].to_vec(),
            post_probe: elements[split..].to_vec(),
            input_mode: rng.random_range(0..base),
            probe_modes,
            detect_mode: rng.random_range(0..base),
        };
        let t = wvlab_core::optics::transmittance(&expand_loss(&circuit)).expect("valid circuit");
        if (MIN_BRANCH..=1.0 - MIN_BRANCH).contains(&t) {
            return circuit;
        }
    }
}

/// [`random_lossy`] with its loss elements expanded into beam splitters.
pub fn random_expanded(rng: &mut impl Rng, probes: usize) -> Circuit {
    expand_loss(&random_lossy(rng, probes))
}
