//! Scenario runner and sweep engine.
//!
//! A scenario is one demodulator + link + detector operating point. The
//! analytic path measures demodulation extinction on a simulated frame (or
//! takes it from the config) and evaluates the closed-form QBER; the
//! Monte-Carlo path pushes random frames through field synthesis, filtering,
//! slot integration, channel attenuation and the SPAD simulator, then scores
//! clicks against the transmitted differential bits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{SpadModel, SpadSimulator};
use crate::error::{Error, Result};
use crate::field::{
    counted_slots, demod_extinction, integrate_slots, synthesize_field, DemodExtinction, FieldSettings, FilterPlan,
    SymbolFrame, MIN_OVERSAMPLING,
};
use crate::optics::{fit_ring_params, Demodulator, MziModel, MziPort, RingModel, TransferFunction};
use crate::qkd::{key_rate_from_sifted, qber_analytic, LinkParams, DEFAULT_F_EC};
use crate::rng::{stream, sub_seed, Purpose};
use crate::scalar::db_to_linear;

/// Smallest frame accepted for Monte-Carlo runs.
pub const MIN_MC_FRAME: usize = 10_000;
/// Below this many clicks a Monte-Carlo row carries a warning and
/// Agresti–Coull error bars.
pub const MIN_CLICKS: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemodKind {
    #[default]
    Mrr,
    Mzi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RingConfig {
    pub fsr_hz: f64,
    /// Notch width and depth used to derive `t_self`/`a_rt` when those are
    /// not given.
    pub fwhm_hz: f64,
    pub notch_extinction_db: f64,
    pub t_self: Option<f64>,
    pub a_rt: Option<f64>,
    pub resonance_offset_hz: f64,
    pub excess_loss_db: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self {
            fsr_hz: 120.1e9,
            fwhm_hz: 0.27e9,
            notch_extinction_db: 23.7,
            t_self: None,
            a_rt: None,
            resonance_offset_hz: 0.0,
            excess_loss_db: 0.0,
        }
    }
}

impl RingConfig {
    pub fn build(&self) -> Result<RingModel<f64>> {
        let base = match (self.t_self, self.a_rt) {
            (Some(t), Some(a)) => RingModel::new(self.fsr_hz, t, a)?,
            (None, None) => fit_ring_params(self.fsr_hz, self.fwhm_hz, self.notch_extinction_db)?,
            _ => {
                return Err(Error::invariant(
                    "demodulator.mrr.t_self",
                    "t_self and a_rt must be given together",
                ))
            }
        };
        base.with_resonance_offset(self.resonance_offset_hz)
            .with_excess_loss(self.excess_loss_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MziConfig {
    pub delay_s: f64,
    pub port: MziPort,
    pub phase_trim_rad: f64,
    pub excess_loss_db: f64,
}

impl Default for MziConfig {
    fn default() -> Self {
        Self {
            delay_s: 1e-9,
            port: MziPort::Destructive,
            phase_trim_rad: 0.0,
            excess_loss_db: 0.0,
        }
    }
}

impl MziConfig {
    pub fn build(&self) -> Result<MziModel<f64>> {
        MziModel::new(self.delay_s, self.port)?
            .with_phase_trim(self.phase_trim_rad)
            .with_excess_loss(self.excess_loss_db)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DemodulatorConfig {
    pub kind: DemodKind,
    pub mrr: RingConfig,
    pub mzi: MziConfig,
}

impl DemodulatorConfig {
    pub fn build(&self) -> Result<Demodulator<f64>> {
        match self.kind {
            DemodKind::Mrr => Ok(Demodulator::Ring(self.mrr.build()?)),
            DemodKind::Mzi => Ok(Demodulator::Mzi(self.mzi.build()?)),
        }
    }
}

/// Link parameters as configured. Without `extinction_db` the extinction is
/// measured on the simulated demodulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub mu: f64,
    pub symbol_rate_hz: f64,
    pub total_loss_db: f64,
    pub demod_insertion_db: f64,
    pub extinction_db: Option<f64>,
    pub carrier_detuning_hz: f64,
    /// Carrier placed this many demodulator periods away from
    /// `carrier_detuning_hz`.
    pub channel_index: i64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        let l = LinkParams::<f64>::default();
        Self {
            mu: l.mu,
            symbol_rate_hz: l.symbol_rate_hz,
            total_loss_db: l.total_loss_db,
            demod_insertion_db: l.demod_insertion_db,
            extinction_db: None,
            carrier_detuning_hz: 0.0,
            channel_index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Analytic,
    #[serde(alias = "mc")]
    MonteCarlo,
    Both,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "analytic" => Some(Mode::Analytic),
            "mc" | "monte_carlo" => Some(Mode::MonteCarlo),
            "both" => Some(Mode::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Symbols simulated in Monte-Carlo mode.
    pub frame_length: usize,
    pub f_ec: f64,
    pub demodulator: DemodulatorConfig,
    pub link: LinkConfig,
    pub spad: SpadModel<f64>,
    pub field: FieldSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Analytic,
            seed: 1,
            frame_length: 1_000_000,
            f_ec: DEFAULT_F_EC,
            demodulator: DemodulatorConfig::default(),
            link: LinkConfig::default(),
            spad: SpadModel::default(),
            field: FieldSettings::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.demodulator.build()?;
        self.spad.validate()?;
        let l = &self.link;
        let probe = LinkParams {
            mu: l.mu,
            symbol_rate_hz: l.symbol_rate_hz,
            total_loss_db: l.total_loss_db,
            demod_insertion_db: l.demod_insertion_db,
            extinction_db: l.extinction_db.unwrap_or(1.0),
        };
        probe.validate()?;
        if !l.carrier_detuning_hz.is_finite() {
            return Err(Error::invariant("link.carrier_detuning_hz", "must be finite"));
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::invariant("f_ec", "must be finite and >= 1"));
        }
        let f = &self.field;
        if f.oversampling < MIN_OVERSAMPLING {
            return Err(Error::invariant("field.oversampling", format!("must be at least {MIN_OVERSAMPLING}")));
        }
        if !(f.window_fraction > 0.0 && f.window_fraction <= 1.0) {
            return Err(Error::invariant("field.window_fraction", "must lie in (0, 1]"));
        }
        if !(f.extinction_ceiling_db > 0.0 && f.extinction_ceiling_db.is_finite()) {
            return Err(Error::invariant("field.extinction_ceiling_db", "must be finite and > 0"));
        }
        if f.block_symbols < 1024 {
            return Err(Error::invariant("field.block_symbols", "must be at least 1024"));
        }
        if f.extinction_frame < 1024 {
            return Err(Error::invariant("field.extinction_frame", "must be at least 1024"));
        }
        if self.mode != Mode::Analytic && self.frame_length < MIN_MC_FRAME {
            return Err(Error::invariant(
                "frame_length",
                format!("must be at least {MIN_MC_FRAME} in Monte-Carlo mode"),
            ));
        }
        Ok(())
    }

    /// Carrier offset from the demodulator reference, channel index applied.
    pub fn carrier_detuning_hz(&self, demod: &Demodulator<f64>) -> f64 {
        self.link.carrier_detuning_hz + self.link.channel_index as f64 * demod.period_hz()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    ExtinctionDb,
    TotalLossDb,
    CarrierDetuningHz,
    ChannelIndex,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::ExtinctionDb => "extinction_db",
            SweepVariable::TotalLossDb => "total_loss_db",
            SweepVariable::CarrierDetuningHz => "carrier_detuning_hz",
            SweepVariable::ChannelIndex => "channel_index",
        }
    }

    /// Returns `base` with the variable set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        match self {
            SweepVariable::ExtinctionDb => c.link.extinction_db = Some(value),
            SweepVariable::TotalLossDb => c.link.total_loss_db = value,
            SweepVariable::CarrierDetuningHz => c.link.carrier_detuning_hz = value,
            SweepVariable::ChannelIndex => {
                if value.fract() != 0.0 || value.abs() > 1e12 {
                    return Err(Error::invariant("sweep.values", "channel_index values must be integers"));
                }
                c.link.channel_index = value as i64;
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Reuse the base seed at every point instead of per-point sub-seeds.
    #[serde(default)]
    pub common_random_numbers: bool,
}

impl SweepSpec {
    pub fn validate(&self, base: &ScenarioConfig) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invariant("sweep.values", "must not be empty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant("sweep.values", "must be finite"));
        }
        if self.variable == SweepVariable::ChannelIndex {
            self.variable.apply(base, self.values[0])?;
            for &v in &self.values {
                self.variable.apply(base, v)?;
            }
        }
        Ok(())
    }

    pub fn point_seed(&self, base_seed: u64, index: usize) -> u64 {
        if self.common_random_numbers {
            base_seed
        } else {
            sub_seed(base_seed, index as u64)
        }
    }
}

/// Fixed, versioned column set of result tables.
pub const SCHEMA_VERSION: u32 = 1;
pub const COLUMNS: [&str; 13] = [
    "index",
    "variable",
    "value",
    "mode",
    "seed",
    "extinction_db",
    "qber",
    "qber_stderr",
    "raw_rate_cps",
    "secure_bits_per_symbol",
    "clicks",
    "slots",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub index: usize,
    pub variable: String,
    pub value: f64,
    /// `analytic` or `monte_carlo`.
    pub mode: &'static str,
    pub seed: u64,
    pub extinction_db: f64,
    pub qber: f64,
    /// Binomial standard error; NaN for analytic rows.
    pub qber_stderr: f64,
    pub raw_rate_cps: f64,
    pub secure_bits_per_symbol: f64,
    pub clicks: Option<u64>,
    pub slots: Option<u64>,
    /// `ok`, `warning: ...` or `error: ...`.
    pub status: String,
}

impl ResultRow {
    fn failed(index: usize, variable: &str, value: f64, mode: &'static str, seed: u64, err: &Error) -> Self {
        Self {
            index,
            variable: variable.to_string(),
            value,
            mode,
            seed,
            extinction_db: f64::NAN,
            qber: f64::NAN,
            qber_stderr: f64::NAN,
            raw_rate_cps: f64::NAN,
            secure_bits_per_symbol: f64::NAN,
            clicks: None,
            slots: None,
            status: format!("error: {err}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        !self.status.starts_with("error")
    }

    fn cells(&self) -> [String; 13] {
        let num = |v: f64| if v.is_nan() { String::new() } else { format!("{v}") };
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.index.to_string(),
            self.variable.clone(),
            num(self.value),
            self.mode.to_string(),
            self.seed.to_string(),
            num(self.extinction_db),
            num(self.qber),
            num(self.qber_stderr),
            num(self.raw_rate_cps),
            num(self.secure_bits_per_symbol),
            opt(self.clicks),
            opt(self.slots),
            self.status.replace(',', ";"),
        ]
    }
}

/// Rows in sweep order; scenarios run in `both` mode contribute two rows per
/// point (analytic first).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Comma-delimited text: column header then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.cells().join(","));
            out.push('\n');
        }
        out
    }

    pub fn rows_for(&self, mode: &str) -> impl Iterator<Item = &ResultRow> {
        let mode = mode.to_string();
        self.rows.iter().filter(move |r| r.mode == mode)
    }
}

/// Extinction to use for a scenario, and the demodulator throughput when it
/// was measured on the field.
fn scenario_extinction(cfg: &ScenarioConfig, demod: &Demodulator<f64>, seed: u64) -> Result<(f64, Option<DemodExtinction<f64>>)> {
    if let Some(e) = cfg.link.extinction_db {
        return Ok((e, None));
    }
    let m = demod_extinction(
        demod,
        cfg.link.symbol_rate_hz,
        cfg.carrier_detuning_hz(demod),
        cfg.link.mu,
        cfg.field.extinction_frame,
        seed,
        &cfg.field,
    )?;
    Ok((m.extinction_db, Some(m)))
}

/// Runs one operating point. Returns one row per evaluated mode.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>> {
    run_point(cfg, 0, "", f64::NAN, cfg.seed)
}

fn run_point(cfg: &ScenarioConfig, index: usize, variable: &str, value: f64, seed: u64) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let demod = cfg.demodulator.build()?;
    let (extinction_db, measured) = scenario_extinction(cfg, &demod, seed)?;
    let mut rows = Vec::new();
    if matches!(cfg.mode, Mode::Analytic | Mode::Both) {
        rows.push(analytic_row(cfg, extinction_db, index, variable, value, seed)?);
    }
    if matches!(cfg.mode, Mode::MonteCarlo | Mode::Both) {
        let mc = monte_carlo(cfg, &demod, measured.as_ref(), extinction_db, seed)?;
        let raw_rate = mc.clicks as f64 / (mc.slots as f64 / cfg.link.symbol_rate_hz);
        let secure = if mc.clicks > 0 && mc.qber < 0.5 {
            key_rate_from_sifted(raw_rate, cfg.link.symbol_rate_hz, mc.qber, cfg.f_ec).secure_bits_per_symbol
        } else {
            0.0
        };
        let status = if mc.clicks < MIN_CLICKS {
            format!("warning: only {} clicks; error bar widened", mc.clicks)
        } else {
            "ok".to_string()
        };
        rows.push(ResultRow {
            index,
            variable: variable.to_string(),
            value,
            mode: "monte_carlo",
            seed,
            extinction_db,
            qber: mc.qber,
            qber_stderr: mc.stderr,
            raw_rate_cps: raw_rate,
            secure_bits_per_symbol: secure,
            clicks: Some(mc.clicks),
            slots: Some(mc.slots),
            status,
        });
    }
    Ok(rows)
}

fn analytic_row(cfg: &ScenarioConfig, extinction_db: f64, index: usize, variable: &str, value: f64, seed: u64) -> Result<ResultRow> {
    let link = LinkParams {
        mu: cfg.link.mu,
        symbol_rate_hz: cfg.link.symbol_rate_hz,
        total_loss_db: cfg.link.total_loss_db,
        demod_insertion_db: cfg.link.demod_insertion_db,
        extinction_db,
    };
    let q = qber_analytic(&link, &cfg.spad)?;
    let key = key_rate_from_sifted(q.raw_rate_cps, link.symbol_rate_hz, q.qber, cfg.f_ec);
    Ok(ResultRow {
        index,
        variable: variable.to_string(),
        value,
        mode: "analytic",
        seed,
        extinction_db,
        qber: q.qber,
        qber_stderr: f64::NAN,
        raw_rate_cps: q.raw_rate_cps,
        secure_bits_per_symbol: key.secure_bits_per_symbol,
        clicks: None,
        slots: None,
        status: "ok".into(),
    })
}

/// Raw Monte-Carlo tallies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McTally {
    pub clicks: u64,
    pub errors: u64,
    pub slots: u64,
    pub qber: f64,
    pub stderr: f64,
}

impl McTally {
    fn new(clicks: u64, errors: u64, slots: u64) -> Self {
        let (qber, stderr) = if clicks == 0 {
            (f64::NAN, f64::NAN)
        } else if clicks < MIN_CLICKS {
            let n = clicks as f64 + 4.0;
            let p = (errors as f64 + 2.0) / n;
            (errors as f64 / clicks as f64, (p * (1.0 - p) / n).sqrt())
        } else {
            let q = errors as f64 / clicks as f64;
            (q, (q * (1.0 - q) / clicks as f64).sqrt())
        };
        Self {
            clicks,
            errors,
            slots,
            qber,
            stderr,
        }
    }
}

/// Labels (`true` = mark) and detected mean photons of the counted slots of
/// one block.
struct BlockSlots {
    labels: Vec<bool>,
    energies: Vec<f64>,
}

/// End-to-end Monte-Carlo QBER.
///
/// Frames are processed in independent blocks of `field.block_symbols`
/// symbols (circular filtering per block, edge slots dropped). Channel
/// attenuation is a scalar on slot energies, chosen so the mean detected
/// photon number per slot is `μ·10^(-L/10)`. With a configured extinction
/// the demodulator is not simulated: mark and space slots receive energies in
/// the ratio ε with the same mean.
pub fn monte_carlo(
    cfg: &ScenarioConfig,
    demod: &Demodulator<f64>,
    measured: Option<&DemodExtinction<f64>>,
    extinction_db: f64,
    seed: u64,
) -> Result<McTally> {
    let n_blocks = cfg.frame_length.div_ceil(cfg.field.block_symbols).max(1);
    let block_len = cfg.frame_length.div_ceil(n_blocks);
    let rs = cfg.link.symbol_rate_hz;
    let mean_detected = cfg.link.mu * db_to_linear(-cfg.link.total_loss_db);
    let carrier = cfg.carrier_detuning_hz(demod);

    let make_block: Box<dyn Fn(usize) -> Result<BlockSlots> + Sync> = match measured {
        Some(m) => {
            if !(m.throughput > 0.0) {
                return Err(Error::Input("demodulator passes no light".into()));
            }
            let gain = mean_detected / (cfg.link.mu * m.throughput);
            let plan = FilterPlan::new(demod, block_len * cfg.field.oversampling, rs * cfg.field.oversampling as f64, carrier);
            let range = counted_slots(block_len, demod.memory_s(), rs);
            if range.is_empty() {
                return Err(Error::invariant("field.block_symbols", "block shorter than the demodulator memory"));
            }
            let field = cfg.field;
            let mu = cfg.link.mu;
            Box::new(move |b| {
                let frame = SymbolFrame::<f64>::random(block_len, seed, b as u64)?;
                let mut f = synthesize_field(&frame, field.pulse_shape, mu, rs, field.oversampling, carrier)?;
                plan.apply_in_place(&mut f.samples);
                let slots = integrate_slots(&f, field.window_fraction)?;
                Ok(BlockSlots {
                    labels: frame.diff_bits()[range.clone()].to_vec(),
                    energies: slots.energies[range.clone()].iter().map(|e| e * gain).collect(),
                })
            })
        }
        None => {
            let eps = db_to_linear(extinction_db);
            let (mark, space) = if eps.is_infinite() {
                (2.0 * mean_detected, 0.0)
            } else {
                (2.0 * mean_detected * eps / (1.0 + eps), 2.0 * mean_detected / (1.0 + eps))
            };
            Box::new(move |b| {
                let frame = SymbolFrame::<f64>::random(block_len, seed, b as u64)?;
                let labels = frame.diff_bits()[1..].to_vec();
                let energies = labels.iter().map(|&m| if m { mark } else { space }).collect();
                Ok(BlockSlots { labels, energies })
            })
        }
    };

    let mut sim = SpadSimulator::new(cfg.spad, 1.0 / rs, seed)?;
    let batch = rayon::current_num_threads().max(1) * 2;
    let (mut clicks, mut errors, mut slots) = (0u64, 0u64, 0u64);
    for start in (0..n_blocks).step_by(batch) {
        let end = (start + batch).min(n_blocks);
        let blocks: Vec<BlockSlots> = (start..end).into_par_iter().map(&make_block).collect::<Result<_>>()?;
        for block in blocks {
            let offset = sim.slots_processed();
            sim.feed(&block.energies);
            for c in sim.drain_clicks() {
                clicks += 1;
                if !block.labels[(c.slot - offset) as usize] {
                    errors += 1;
                }
            }
            slots += block.energies.len() as u64;
        }
    }
    Ok(McTally::new(clicks, errors, slots))
}

/// Evaluates every sweep point (concurrently) and returns rows in sweep
/// order. A failing point yields an error row and the sweep continues.
pub fn sweep(spec: &SweepSpec, base: &ScenarioConfig) -> Result<ResultTable> {
    spec.validate(base)?;
    base.validate()?;
    let name = spec.variable.name();
    let per_point: Vec<Vec<ResultRow>> = spec
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let seed = spec.point_seed(base.seed, i);
            let outcome = spec
                .variable
                .apply(base, v)
                .and_then(|cfg| run_point(&cfg, i, name, v, seed));
            match outcome {
                Ok(rows) => rows,
                Err(e) => {
                    let modes: &[&'static str] = match base.mode {
                        Mode::Analytic => &["analytic"],
                        Mode::MonteCarlo => &["monte_carlo"],
                        Mode::Both => &["analytic", "monte_carlo"],
                    };
                    modes.iter().map(|m| ResultRow::failed(i, name, v, m, seed, &e)).collect()
                }
            }
        })
        .collect();
    Ok(ResultTable {
        rows: per_point.into_iter().flatten().collect(),
    })
}

/// Draws a scenario parameter uniformly from `[lo, hi)` on the
/// `ParameterDraw` stream; used for randomized cross-checks.
pub fn draw_parameter(seed: u64, index: u64, lo: f64, hi: f64) -> f64 {
    use rand::Rng;
    stream(seed, Purpose::ParameterDraw, index).gen_range(lo..hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic(eps: Option<f64>) -> ScenarioConfig {
        ScenarioConfig {
            link: LinkConfig { extinction_db: eps, ..LinkConfig::default() },
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn leakage_only_reduction() {
        let cfg = ScenarioConfig {
            spad: SpadModel::ideal(0.1),
            ..analytic(Some(18.0))
        };
        let rows = run_scenario(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].qber - 1.0 / (1.0 + 10f64.powf(1.8))).abs() < 1e-15);
    }

    #[test]
    fn extinction_sweep_is_strictly_decreasing() {
        let spec = SweepSpec {
            variable: SweepVariable::ExtinctionDb,
            values: (0..=20).map(|i| 10.0 + i as f64).collect(),
            common_random_numbers: false,
        };
        let t = sweep(&spec, &analytic(None)).unwrap();
        assert_eq!(t.rows.len(), 21);
        for w in t.rows.windows(2) {
            assert!(w[1].qber < w[0].qber);
            assert!(w[1].index == w[0].index + 1);
        }
    }

    #[test]
    fn loss_sweep_is_u_shaped_with_falling_rate() {
        let spec = SweepSpec {
            variable: SweepVariable::TotalLossDb,
            values: (0..=40).map(|i| 5.0 + i as f64).collect(),
            common_random_numbers: false,
        };
        let t = sweep(&spec, &analytic(Some(18.0))).unwrap();
        let q: Vec<f64> = t.rows.iter().map(|r| r.qber).collect();
        let (imin, _) = q.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!(imin > 0 && imin < q.len() - 1);
        for w in t.rows.windows(2) {
            assert!(w[1].raw_rate_cps < w[0].raw_rate_cps);
        }
    }

    #[test]
    fn bad_points_become_error_rows() {
        let spec = SweepSpec {
            variable: SweepVariable::ExtinctionDb,
            values: vec![18.0, -3.0, 20.0],
            common_random_numbers: false,
        };
        let t = sweep(&spec, &analytic(None)).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows[0].is_ok() && !t.rows[1].is_ok() && t.rows[2].is_ok());
        assert!(t.rows[1].status.contains("link.extinction_db"));
    }

    #[test]
    fn channel_index_must_be_integer() {
        let spec = SweepSpec {
            variable: SweepVariable::ChannelIndex,
            values: vec![0.0, 0.5],
            common_random_numbers: true,
        };
        assert!(sweep(&spec, &analytic(None)).is_err());
    }

    #[test]
    fn mc_requires_long_frame() {
        let cfg = ScenarioConfig {
            mode: Mode::MonteCarlo,
            frame_length: 5_000,
            ..analytic(Some(18.0))
        };
        match run_scenario(&cfg) {
            Err(Error::Invariant { key, .. }) => assert_eq!(key, "frame_length"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let cfg = ScenarioConfig {
            mode: Mode::Both,
            frame_length: 40_000,
            link: LinkConfig { total_loss_db: 5.0, ..LinkConfig::default() },
            ..ScenarioConfig::default()
        };
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        let csv = |rows: &[ResultRow]| ResultTable { rows: rows.to_vec() }.to_csv();
        assert_eq!(csv(&a), csv(&b));
        assert_eq!(a.len(), 2);
        assert_eq!(a[1].mode, "monte_carlo");
        assert!(a[1].clicks.unwrap() > 0);
    }

    #[test]
    fn few_clicks_are_flagged() {
        let cfg = ScenarioConfig {
            mode: Mode::MonteCarlo,
            frame_length: 20_000,
            link: LinkConfig { total_loss_db: 40.0, extinction_db: Some(20.0), ..LinkConfig::default() },
            ..ScenarioConfig::default()
        };
        let row = &run_scenario(&cfg).unwrap()[0];
        assert!(row.status.starts_with("warning"));
    }

    #[test]
    fn csv_has_fixed_header() {
        let t = ResultTable::default();
        assert_eq!(t.to_csv(), format!("{}\n", COLUMNS.join(",")));
    }
}
