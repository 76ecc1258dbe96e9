//! Statevector simulation. Qubit 0 is the most significant bit of an outcome
//! index and the leftmost character of its bitstring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{BoundCircuit, CircuitError, GateKind};

pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{n} qubits exceeds the simulator budget of {max}")]
    Capacity { n: usize, max: usize },
    #[error("post-selection left no probability mass")]
    PostselectEmpty,
    #[error("shots must be at least 1")]
    NoShots,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    pub n_qubits: usize,
    pub amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn zero(n_qubits: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// Applies the 2×2 matrix `[[a, b], [c, d]]` to qubit `q`, only on basis
    /// states where every bit in `controls` is set.
    fn apply_1q(&mut self, q: usize, m: [Complex64; 4], controls: usize) {
        let bit = self.mask(q);
        for i in 0..self.amplitudes.len() {
            if i & bit != 0 || i & controls != controls {
                continue;
            }
            let j = i | bit;
            let (x, y) = (self.amplitudes[i], self.amplitudes[j]);
            self.amplitudes[i] = m[0] * x + m[1] * y;
            self.amplitudes[j] = m[2] * x + m[3] * y;
        }
    }

    pub fn apply(&mut self, kind: GateKind, qubits: &[usize], theta: Option<f64>) {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let t = theta.unwrap_or(0.0) / 2.0;
        match kind {
            GateKind::H => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                self.apply_1q(qubits[0], [c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)], 0);
            }
            GateKind::Rx => {
                let m = [c(t.cos(), 0.0), c(0.0, -t.sin()), c(0.0, -t.sin()), c(t.cos(), 0.0)];
                self.apply_1q(qubits[0], m, 0);
            }
            GateKind::Rz => {
                let m = [Complex64::from_polar(1.0, -t), c(0.0, 0.0), c(0.0, 0.0), Complex64::from_polar(1.0, t)];
                self.apply_1q(qubits[0], m, 0);
            }
            GateKind::Crz => {
                let m = [Complex64::from_polar(1.0, -t), c(0.0, 0.0), c(0.0, 0.0), Complex64::from_polar(1.0, t)];
                self.apply_1q(qubits[1], m, self.mask(qubits[0]));
            }
            GateKind::Cnot => {
                let m = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
                self.apply_1q(qubits[1], m, self.mask(qubits[0]));
            }
        }
    }
}

pub fn statevector(c: &BoundCircuit) -> Result<Statevector, SimError> {
    if c.n_qubits > MAX_QUBITS {
        return Err(SimError::Capacity {
            n: c.n_qubits,
            max: MAX_QUBITS,
        });
    }
    c.validate()?;
    let mut psi = Statevector::zero(c.n_qubits);
    for g in &c.gates {
        psi.apply(g.kind, &g.qubits, g.param);
    }
    Ok(psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shots {
    Exact,
    Count(u64),
}

/// Probability mass keyed by outcome index; absent outcomes have mass 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub n_qubits: usize,
    pub mass: BTreeMap<usize, f64>,
    pub shots: Shots,
}

impl OutcomeDistribution {
    pub fn point(n_qubits: usize, outcome: usize) -> Self {
        Self {
            n_qubits,
            mass: BTreeMap::from([(outcome, 1.0)]),
            shots: Shots::Exact,
        }
    }

    pub fn uniform(n_qubits: usize) -> Self {
        let size = 1usize << n_qubits;
        Self {
            n_qubits,
            mass: (0..size).map(|i| (i, 1.0 / size as f64)).collect(),
            shots: Shots::Exact,
        }
    }

    pub fn p(&self, outcome: usize) -> f64 {
        self.mass.get(&outcome).copied().unwrap_or(0.0)
    }

    pub fn bitstring(&self, outcome: usize) -> String {
        format!("{outcome:0width$b}", width = self.n_qubits)
    }

    /// Probability of a bitstring such as `"011"`.
    pub fn p_bits(&self, bits: &str) -> f64 {
        usize::from_str_radix(bits, 2).map(|i| self.p(i)).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    /// `outcome,p` rows in bitstring order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("outcome,p\n");
        for (&k, &v) in &self.mass {
            let _ = writeln!(s, "{},{v:.16e}", self.bitstring(k));
        }
        s
    }
}

pub fn exact_distribution(c: &BoundCircuit) -> Result<OutcomeDistribution, SimError> {
    let psi = statevector(c)?;
    let mass = psi
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(i, a)| (i, a.norm_sqr()))
        .collect();
    Ok(OutcomeDistribution {
        n_qubits: c.n_qubits,
        mass,
        shots: Shots::Exact,
    })
}

pub fn sample(c: &BoundCircuit, shots: u64, seed: u64) -> Result<OutcomeDistribution, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    let exact = exact_distribution(c)?;
    let (outcomes, weights): (Vec<usize>, Vec<f64>) = exact.mass.iter().map(|(&k, &v)| (k, v)).unzip();
    let dist = WeightedIndex::new(&weights).expect("distribution has positive mass");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..shots {
        *counts.entry(outcomes[dist.sample(&mut rng)]).or_default() += 1;
    }
    Ok(OutcomeDistribution {
        n_qubits: c.n_qubits,
        mass: counts
            .into_iter()
            .map(|(k, n)| (k, n as f64 / shots as f64))
            .collect(),
        shots: Shots::Count(shots),
    })
}

/// Conditions on every qubit in `zeros` reading 0 and marginalizes onto the
/// remaining qubits, keeping their relative order.
pub fn postselect(d: &OutcomeDistribution, zeros: &BTreeSet<usize>) -> Result<OutcomeDistribution, SimError> {
    let n = d.n_qubits;
    if zeros.iter().all(|&q| q >= n) {
        return Ok(d.clone());
    }
    let keep: Vec<usize> = (0..n).filter(|q| !zeros.contains(q)).collect();
    let zero_mask: usize = zeros.iter().filter(|&&q| q < n).map(|&q| 1 << (n - 1 - q)).sum();
    let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
    for (&k, &v) in &d.mass {
        if k & zero_mask != 0 {
            continue;
        }
        let reduced = keep
            .iter()
            .fold(0usize, |acc, &q| (acc << 1) | ((k >> (n - 1 - q)) & 1));
        *mass.entry(reduced).or_default() += v;
    }
    let total: f64 = mass.values().sum();
    if total <= 0.0 {
        return Err(SimError::PostselectEmpty);
    }
    for v in mass.values_mut() {
        *v /= total;
    }
    Ok(OutcomeDistribution {
        n_qubits: keep.len(),
        mass,
        shots: d.shots,
    })
}

/// Total-variation distance ½ Σ |p − q|.
pub fn tv_distance(a: &OutcomeDistribution, b: &OutcomeDistribution) -> f64 {
    let keys: BTreeSet<usize> = a.mass.keys().chain(b.mass.keys()).copied().collect();
    keys.iter().map(|&k| (a.p(k) - b.p(k)).abs()).sum::<f64>() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bell() -> BoundCircuit {
        let mut c = BoundCircuit::empty(2);
        c.h(0).cnot(0, 1);
        c
    }

    #[test]
    fn empty_circuit_is_ground_state() {
        let d = exact_distribution(&BoundCircuit::empty(2)).unwrap();
        assert_eq!(d.p_bits("00"), 1.0);
        assert_eq!(d.mass.len(), 1);
    }

    #[test]
    fn hadamard_amplitudes() {
        let mut c = BoundCircuit::empty(1);
        c.h(0);
        let psi = statevector(&c).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((psi.amplitudes[0].re - h).abs() < 1e-15);
        assert!((psi.amplitudes[1].re - h).abs() < 1e-15);
    }

    #[test]
    fn bell_state() {
        let d = exact_distribution(&bell()).unwrap();
        assert!((d.p_bits("00") - 0.5).abs() < 1e-15);
        assert!((d.p_bits("11") - 0.5).abs() < 1e-15);
        assert_eq!(d.p_bits("01"), 0.0);
    }

    #[test]
    fn rx_pi_flips() {
        let mut c = BoundCircuit::empty(1);
        c.rx(0, PI);
        let d = exact_distribution(&c).unwrap();
        assert!((d.p_bits("1") - 1.0).abs() < 1e-15);
        assert!(d.p_bits("0") < 1e-30);
    }

    #[test]
    fn qubit_zero_is_leftmost() {
        let mut c = BoundCircuit::empty(3);
        c.rx(0, PI);
        let d = exact_distribution(&c).unwrap();
        assert!((d.p_bits("100") - 1.0).abs() < 1e-15);
    }

    #[test]
    fn crz_phases_only_when_control_set() {
        // H·CRZ·H on the target of |1,0⟩ rotates into |1,1⟩ with prob sin²(θ/2)
        let theta: f64 = 1.1;
        let mut c = BoundCircuit::empty(2);
        c.rx(0, PI).h(1).crz(0, 1, theta).h(1);
        let d = exact_distribution(&c).unwrap();
        assert!((d.p_bits("11") - (theta / 2.0).sin().powi(2)).abs() < 1e-12);
        let mut c = BoundCircuit::empty(2);
        c.h(1).crz(0, 1, theta).h(1);
        assert!((exact_distribution(&c).unwrap().p_bits("00") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_guard() {
        let c = BoundCircuit::empty(MAX_QUBITS + 1);
        assert!(matches!(statevector(&c), Err(SimError::Capacity { .. })));
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample(&bell(), 20_000, 3).unwrap();
        assert_eq!(a, sample(&bell(), 20_000, 3).unwrap());
        assert_eq!(a.shots, Shots::Count(20_000));
        assert!(tv_distance(&a, &exact_distribution(&bell()).unwrap()) <= 0.02);
        let d = sample(&BoundCircuit::empty(3), 17, 0).unwrap();
        assert_eq!(d.p_bits("000"), 1.0);
        assert_eq!(sample(&bell(), 0, 0), Err(SimError::NoShots));
    }

    #[test]
    fn postselect_cases() {
        let bell = exact_distribution(&bell()).unwrap();
        let d = postselect(&bell, &BTreeSet::from([0])).unwrap();
        assert_eq!(d.n_qubits, 1);
        assert!((d.p_bits("0") - 1.0).abs() < 1e-15);
        assert_eq!(postselect(&bell, &BTreeSet::new()).unwrap(), bell);
        let u = postselect(&OutcomeDistribution::uniform(2), &BTreeSet::from([0])).unwrap();
        assert!((u.p_bits("0") - 0.5).abs() < 1e-15 && (u.p_bits("1") - 0.5).abs() < 1e-15);
        let one = OutcomeDistribution::point(2, 0b10);
        assert_eq!(postselect(&one, &BTreeSet::from([0])), Err(SimError::PostselectEmpty));
    }

    #[test]
    fn postselect_keeps_qubit_order() {
        // outcome "011" kept on qubits {0, 2} reads "01"
        let d = OutcomeDistribution::point(3, 0b011);
        let p = postselect(&d, &BTreeSet::new()).unwrap();
        assert_eq!(p.p_bits("011"), 1.0);
        let mut d = OutcomeDistribution::point(3, 0b001);
        d.mass.insert(0b100, 1.0);
        let p = postselect(&d, &BTreeSet::from([1])).unwrap();
        assert_eq!((p.p_bits("01"), p.p_bits("10")), (0.5, 0.5));
    }

    #[test]
    fn csv_export() {
        let d = exact_distribution(&bell()).unwrap();
        let csv = d.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "outcome,p");
        assert!(lines[1].starts_with("00,5.0000000000000"));
        assert!(lines[2].starts_with("11,"));
    }
}
