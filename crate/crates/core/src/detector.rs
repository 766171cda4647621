//! Free-running SPAD model: Poissonian threshold detection, dark counts,
//! dead time and afterpulsing, both as closed-form rates and as a seeded
//! slot-by-slot Monte-Carlo.
//!
//! Afterpulsing follows a trap-occupancy picture. Every avalanche leaves a
//! unit of trapped charge that decays with `detrap_time_s`; a new avalanche
//! spawns one delayed afterpulse with probability
//! `afterpulse_prob · Σ_j exp(-Δt_j / detrap_time_s)`, summed over earlier
//! clicks `j`. The delay is the dead time plus an exponential release time.
//! In steady state this gives `R_ap = afterpulse_prob · τ · e^{-d/τ} · R²`,
//! so afterpulsing grows faster than the click rate (the saturation that
//! produces a loss optimum).

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SlotEnergies;
use crate::rng::{stream, Purpose};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpadModel<T> {
    pub eta: T,
    pub dark_cps: T,
    pub afterpulse_prob: T,
    pub detrap_time_s: T,
    pub dead_time_s: T,
}

impl<T: Real> Default for SpadModel<T> {
    fn default() -> Self {
        Self {
            eta: T::lit(0.1),
            dark_cps: T::lit(550.0),
            afterpulse_prob: T::lit(0.02),
            detrap_time_s: T::lit(5e-6),
            dead_time_s: T::lit(1e-6),
        }
    }
}

impl<T: Real> SpadModel<T> {
    /// Default detector with no dark counts, afterpulsing or dead time.
    pub fn ideal(eta: T) -> Self {
        Self {
            eta,
            dark_cps: T::zero(),
            afterpulse_prob: T::zero(),
            dead_time_s: T::zero(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite();
        if !(ok(self.eta) && self.eta >= T::zero() && self.eta <= T::one()) {
            return Err(Error::invariant("spad.eta", "must lie in [0, 1]"));
        }
        if !(ok(self.dark_cps) && self.dark_cps >= T::zero()) {
            return Err(Error::invariant("spad.dark_cps", "must be finite and >= 0"));
        }
        if !(ok(self.afterpulse_prob) && self.afterpulse_prob >= T::zero() && self.afterpulse_prob < T::one()) {
            return Err(Error::invariant("spad.afterpulse_prob", "must lie in [0, 1)"));
        }
        if !(ok(self.detrap_time_s) && self.detrap_time_s > T::zero()) {
            return Err(Error::invariant("spad.detrap_time_s", "must be finite and > 0"));
        }
        if !(ok(self.dead_time_s) && self.dead_time_s >= T::zero()) {
            return Err(Error::invariant("spad.dead_time_s", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Afterpulses per second per (click/s)², `afterpulse_prob·τ·e^{-d/τ}`.
    pub fn afterpulse_coefficient(&self) -> T {
        self.afterpulse_prob * self.detrap_time_s * (-self.dead_time_s / self.detrap_time_s).exp()
    }

    /// Steady-state afterpulse rate at a registered click rate.
    pub fn afterpulse_rate(&self, click_rate_cps: T) -> T {
        let per_click = (self.afterpulse_coefficient() * click_rate_cps).min(T::one());
        per_click * click_rate_cps
    }

    /// Registered rate for a Poissonian incident rate under non-paralyzable
    /// dead time.
    pub fn dead_time_compressed(&self, incident_cps: T) -> T {
        incident_cps / (T::one() + incident_cps * self.dead_time_s)
    }

    /// Dead time rounded up to whole slots, at least one.
    pub fn hold_slots(&self, slot_s: T) -> u64 {
        (self.dead_time_s / slot_s).ceil().to_u64().unwrap_or(u64::MAX).max(1)
    }
}

/// `1 - exp(-(eta·mean_photons + dark_cps·slot_s))`.
pub fn click_probability<T: Real>(mean_photons: T, spad: &SpadModel<T>, slot_s: T) -> T {
    -(-(spad.eta * mean_photons + spad.dark_cps * slot_s)).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickCause {
    Signal,
    Dark,
    Afterpulse,
}

impl ClickCause {
    pub fn as_str(self) -> &'static str {
        match self {
            ClickCause::Signal => "signal",
            ClickCause::Dark => "dark",
            ClickCause::Afterpulse => "afterpulse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Click {
    pub slot: u64,
    /// Diagnostic only.
    pub cause: ClickCause,
}

/// Registered clicks over a run of slots, stored sparsely in slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickTrain<T> {
    pub clicks: Vec<Click>,
    pub slot_count: u64,
    pub slot_duration_s: T,
    pub seed: u64,
}

impl<T: Real> ClickTrain<T> {
    pub fn count(&self) -> usize {
        self.clicks.len()
    }

    pub fn is_click(&self, slot: u64) -> bool {
        self.clicks.binary_search_by_key(&slot, |c| c.slot).is_ok()
    }

    pub fn rate_cps(&self) -> T {
        T::from_count(self.clicks.len()) / (T::from_count(self.slot_count as usize) * self.slot_duration_s)
    }

    pub fn count_by(&self, cause: ClickCause) -> usize {
        self.clicks.iter().filter(|c| c.cause == cause).count()
    }

    /// Writes `slot_index,click,cause`, one row per slot.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "slot_index,click,cause")?;
        let mut it = self.clicks.iter().peekable();
        for slot in 0..self.slot_count {
            match it.next_if(|c| c.slot == slot) {
                Some(c) => writeln!(w, "{slot},1,{}", c.cause.as_str())?,
                None => writeln!(w, "{slot},0,")?,
            }
        }
        Ok(())
    }
}

/// Stateful click generator that can be fed slot energies in consecutive
/// chunks; the result is independent of how the slots are chunked.
///
/// Primary decisions take one uniform per slot from a single sequential
/// stream, drawn whether or not the detector is live. Afterpulse decisions
/// use a stream keyed by the slot of the parent click, so runs that differ
/// only in `afterpulse_prob` share every primary draw.
pub struct SpadSimulator<T: Real> {
    spad: SpadModel<T>,
    slot_s: T,
    seed: u64,
    primary: ChaCha8Rng,
    dark_mean: T,
    hold: u64,
    next_slot: u64,
    live_from: u64,
    trap: T,
    last_click: Option<u64>,
    pending: BinaryHeap<Reverse<u64>>,
    clicks: Vec<Click>,
}

impl<T: Real> SpadSimulator<T> {
    pub fn new(spad: SpadModel<T>, slot_s: T, seed: u64) -> Result<Self> {
        spad.validate()?;
        if !(slot_s > T::zero() && slot_s.is_finite()) {
            return Err(Error::Input("slot duration must be finite and > 0".into()));
        }
        Ok(Self {
            dark_mean: spad.dark_cps * slot_s,
            hold: spad.hold_slots(slot_s),
            spad,
            slot_s,
            seed,
            primary: stream(seed, Purpose::PrimaryClicks, 0),
            next_slot: 0,
            live_from: 0,
            trap: T::zero(),
            last_click: None,
            pending: BinaryHeap::new(),
            clicks: Vec::new(),
        })
    }

    /// Processes the next `energies.len()` slots (mean photons at the SPAD).
    pub fn feed(&mut self, energies: &[T]) {
        for &n in energies {
            let k = self.next_slot;
            self.next_slot += 1;
            let u = T::lit(self.primary.gen::<f64>());

            let mut afterpulse_due = false;
            while let Some(&Reverse(due)) = self.pending.peek() {
                if due > k {
                    break;
                }
                self.pending.pop();
                afterpulse_due |= due == k;
            }
            if k < self.live_from {
                continue;
            }

            let signal = self.spad.eta * n;
            let p_signal = -(-signal).exp_m1();
            let p_any = -(-(signal + self.dark_mean)).exp_m1();
            let cause = if u < p_signal {
                ClickCause::Signal
            } else if u < p_any {
                ClickCause::Dark
            } else if afterpulse_due {
                ClickCause::Afterpulse
            } else {
                continue;
            };
            self.register(k, cause);
        }
    }

    fn register(&mut self, k: u64, cause: ClickCause) {
        if let Some(last) = self.last_click {
            let dt = T::from_count((k - last) as usize) * self.slot_s;
            self.trap = self.trap * (-dt / self.spad.detrap_time_s).exp();
        }
        let p = (self.spad.afterpulse_prob * self.trap).min(T::one());
        if p > T::zero() {
            let mut rng = stream(self.seed, Purpose::Afterpulse, k);
            if T::lit(rng.gen::<f64>()) < p {
                let release = -self.spad.detrap_time_s * T::lit(1.0 - rng.gen::<f64>()).ln();
                let delay = (release / self.slot_s).ceil().to_u64().unwrap_or(u64::MAX / 4);
                self.pending.push(Reverse(k.saturating_add(self.hold).saturating_add(delay)));
            }
        }
        self.trap = self.trap + T::one();
        self.last_click = Some(k);
        self.live_from = k + self.hold;
        self.clicks.push(Click { slot: k, cause });
    }

    /// Clicks registered so far, removing them from the simulator.
    pub fn drain_clicks(&mut self) -> Vec<Click> {
        std::mem::take(&mut self.clicks)
    }

    pub fn slots_processed(&self) -> u64 {
        self.next_slot
    }

    pub fn finish(self) -> ClickTrain<T> {
        ClickTrain {
            clicks: self.clicks,
            slot_count: self.next_slot,
            slot_duration_s: self.slot_s,
            seed: self.seed,
        }
    }
}

/// Runs the detector over `slots` from a fresh state.
pub fn simulate_clicks<T: Real>(slots: &SlotEnergies<T>, spad: &SpadModel<T>, seed: u64) -> Result<ClickTrain<T>> {
    let mut sim = SpadSimulator::new(*spad, slots.slot_duration_s, seed)?;
    sim.feed(&slots.energies);
    Ok(sim.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SLOT: f64 = 1e-9;

    fn no_afterpulse() -> SpadModel<f64> {
        SpadModel {
            afterpulse_prob: 0.0,
            dead_time_s: 0.0,
            ..SpadModel::default()
        }
    }

    #[test]
    fn click_probability_examples() {
        let spad = SpadModel::default();
        let p = click_probability(0.0, &spad, SLOT);
        assert!((p - 5.5e-7).abs() < 1e-12);
        let ideal = SpadModel::ideal(0.1);
        assert!((click_probability(1.0, &ideal, SLOT) - 0.0951625819640404).abs() < 1e-12);
        assert!((click_probability(1e4, &spad, SLOT) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_names_keys() {
        let bad = SpadModel { eta: 1.5, ..SpadModel::<f64>::default() };
        match bad.validate() {
            Err(Error::Invariant { key, .. }) => assert_eq!(key, "spad.eta"),
            other => panic!("{other:?}"),
        }
        assert!(SpadModel { afterpulse_prob: 1.0, ..SpadModel::<f64>::default() }.validate().is_err());
        assert!(SpadModel { detrap_time_s: 0.0, ..SpadModel::<f64>::default() }.validate().is_err());
        assert!(SpadModel { dead_time_s: -1e-9, ..SpadModel::<f64>::default() }.validate().is_err());
    }

    #[test]
    fn afterpulse_closed_form() {
        let spad = SpadModel::<f64>::default();
        let k = 0.02 * 5e-6 * (-0.2f64).exp();
        assert!((spad.afterpulse_coefficient() - k).abs() < 1e-20);
        assert!((spad.afterpulse_rate(1e4) - k * 1e8).abs() < 1e-9);
        assert_eq!(spad.hold_slots(SLOT), 1000);
        assert_eq!(SpadModel::ideal(0.1f64).hold_slots(SLOT), 1);
    }

    #[test]
    fn deterministic_for_seed() {
        let slots = SlotEnergies::uniform(200_000, 0.01, SLOT).unwrap();
        let spad = SpadModel::default();
        let a = simulate_clicks(&slots, &spad, 42).unwrap();
        let b = simulate_clicks(&slots, &spad, 42).unwrap();
        let c = simulate_clicks(&slots, &spad, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.clicks, c.clicks);
    }

    #[test]
    fn chunking_does_not_matter() {
        let slots = SlotEnergies::uniform(50_000, 0.05, SLOT).unwrap();
        let spad = SpadModel { dead_time_s: 20e-9, detrap_time_s: 100e-9, afterpulse_prob: 0.5, ..SpadModel::default() };
        let whole = simulate_clicks(&slots, &spad, 7).unwrap();
        let mut sim = SpadSimulator::new(spad, SLOT, 7).unwrap();
        for chunk in slots.energies.chunks(777) {
            sim.feed(chunk);
        }
        assert_eq!(sim.finish(), whole);
    }

    #[test]
    fn long_dead_time_allows_one_click() {
        let slots = SlotEnergies::uniform(10_000, 5.0, SLOT).unwrap();
        let spad = SpadModel { dead_time_s: 1e-3, ..SpadModel::default() };
        let train = simulate_clicks(&slots, &spad, 1).unwrap();
        assert_eq!(train.count(), 1);
    }

    #[test]
    fn empirical_rate_matches_probability() {
        let n = 10_000_000;
        let mean = 0.02;
        let slots = SlotEnergies::uniform(n, mean, SLOT).unwrap();
        let spad = no_afterpulse();
        let train = simulate_clicks(&slots, &spad, 2024).unwrap();
        let p = click_probability(mean, &spad, SLOT);
        let expected = p * n as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((train.count() as f64 - expected).abs() < 3.0 * sigma);
    }

    #[test]
    fn afterpulses_appear_with_trap_history() {
        let slots = SlotEnergies::uniform(2_000_000, 0.05, SLOT).unwrap();
        let spad = SpadModel { dead_time_s: 10e-9, detrap_time_s: 1e-6, afterpulse_prob: 0.05, ..SpadModel::default() };
        let train = simulate_clicks(&slots, &spad, 3).unwrap();
        assert!(train.count_by(ClickCause::Afterpulse) > 0);
    }

    #[test]
    fn dump_format() {
        let slots = SlotEnergies::uniform(5, 1e3, SLOT).unwrap();
        let spad = SpadModel { dead_time_s: 2e-9, ..SpadModel::ideal(1.0) };
        let train = simulate_clicks(&slots, &spad, 0).unwrap();
        let mut out = Vec::new();
        train.write_dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "slot_index,click,cause\n0,1,signal\n1,0,\n2,1,signal\n3,0,\n4,1,signal\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spacing_respects_dead_time(dead_ns in 0u32..50, mean in 0.0f64..3.0, ap in 0.0f64..0.9, seed in 0u64..1000) {
            let spad = SpadModel { dead_time_s: dead_ns as f64 * 1e-9, detrap_time_s: 50e-9, afterpulse_prob: ap, ..SpadModel::default() };
            let slots = SlotEnergies::uniform(20_000, mean, SLOT).unwrap();
            let train = simulate_clicks(&slots, &spad, seed).unwrap();
            let hold = spad.hold_slots(SLOT);
            for w in train.clicks.windows(2) {
                prop_assert!(w[1].slot - w[0].slot >= hold);
                prop_assert!((w[1].slot - w[0].slot) as f64 * SLOT >= spad.dead_time_s - 1e-18);
            }
        }

        #[test]
        fn clicks_nondecreasing_in_afterpulse_prob(p1 in 0.0f64..0.9, p2 in 0.0f64..0.9, mean in 0.001f64..0.5, seed in 0u64..1000) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let base = SpadModel { dead_time_s: 0.0, detrap_time_s: 30e-9, ..SpadModel::default() };
            let slots = SlotEnergies::uniform(20_000, mean, SLOT).unwrap();
            let a = simulate_clicks(&slots, &SpadModel { afterpulse_prob: lo, ..base }, seed).unwrap();
            let b = simulate_clicks(&slots, &SpadModel { afterpulse_prob: hi, ..base }, seed).unwrap();
            prop_assert!(b.count() >= a.count());
        }

        #[test]
        fn rate_consistency_for_arbitrary_patterns(levels in proptest::collection::vec(0.0f64..0.2, 1..8), seed in 0u64..1000) {
            let n = 400_000;
            let energies: Vec<f64> = (0..n).map(|k| levels[k % levels.len()]).collect();
            let spad = no_afterpulse();
            let slots = SlotEnergies::new(energies.clone(), SLOT).unwrap();
            let train = simulate_clicks(&slots, &spad, seed).unwrap();
            let (mean, var) = energies.iter().fold((0.0, 0.0), |(m, v), &e| {
                let p = click_probability(e, &spad, SLOT);
                (m + p, v + p * (1.0 - p))
            });
            prop_assert!((train.count() as f64 - mean).abs() <= 4.0 * var.sqrt() + 1.0);
        }
    }
}
