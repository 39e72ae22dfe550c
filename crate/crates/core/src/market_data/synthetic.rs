//! Seeded synthetic tick streams with a planted, measurable signal.
//!
//! The stream is a sequence of scripted episodes. Each episode
//!
//! 1. random-walks for `drift_ticks` ticks (none by default),
//! 2. jumps `gap_ticks` away, which drops every open range buffer,
//! 3. sweeps monotonically through a price `X` with a volume peak at `X`
//!    (`X-5 .. X+5` on the far-to-approach axis), which completes one
//!    volume-centred buffer at `X` for every odd range up to 11,
//! 4. runs out to a random distance on the approach side and walks straight
//!    back to touch `X`,
//! 5. resolves: a 15-tick reversal, a 3-tick crossing, or (optionally) a
//!    shallow 1-2 tick crossing followed by a reversal.
//!
//! Ordinary ticks carry a fixed volume per side, so a level visited once ties
//! with its neighbours and the monotone runs produce no background events.
//! Every tick of an episode carries an order-flow regime. In the "high"
//! regime aggressive selling (bid volume) outweighs buying by
//! `flow_imbalance`; in the "low" regime the reverse. The reversal
//! probability at the touch is `base_reversal_prob + signal_delta / 2` in the
//! high regime and `base_reversal_prob - signal_delta / 2` in the low one.
//! Outcomes are drawn from per-regime urns refilled in blocks of
//! [`URN_BLOCK`], so empirical rates track the configured probabilities
//! closely even on short streams.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TickRecord;
use crate::error::{Error, Result};

pub const URN_BLOCK: usize = 20;
const SWEEP_AMPLITUDE: i64 = 5;
const REVERSAL_TICKS: i64 = 15;
const CROSSING_TICKS: i64 = 3;

/// Per-tick step probabilities of the free random walk; the remainder
/// `1 - up - down` is a flat step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepLaw {
    pub p_up: f64,
    pub p_down: f64,
}

impl Default for StepLaw {
    fn default() -> Self {
        StepLaw { p_up: 0.4, p_down: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_ticks: usize,
    pub start_ts_ms: i64,
    pub tick_interval_ms: i64,
    pub start_price_idx: i64,
    pub step_law: StepLaw,
    /// Mean per-side volume of an ordinary tick.
    pub base_volume: u64,
    /// Volume multiplier of the planted peak tick.
    pub peak_volume_multiplier: u64,
    /// Ratio between the dominant and the weaker side's mean volume.
    pub flow_imbalance: f64,
    pub base_reversal_prob: f64,
    pub signal_delta: f64,
    /// Fraction of reversals that first cross the target by 1-2 ticks.
    pub excluded_prob: f64,
    pub drift_ticks: usize,
    /// Size of the jump that opens an episode.
    pub gap_ticks: i64,
    /// Furthest distance from `X` reached before the final approach.
    pub max_excursion: i64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_ticks: 50_000,
            start_ts_ms: 1_488_326_400_000, // 2017-03-01T00:00Z
            tick_interval_ms: 1_000,
            start_price_idx: 10_000,
            step_law: StepLaw::default(),
            base_volume: 6,
            peak_volume_multiplier: 8,
            flow_imbalance: 1.5,
            base_reversal_prob: 0.5,
            signal_delta: 0.2,
            excluded_prob: 0.0,
            drift_ticks: 0,
            gap_ticks: 20,
            max_excursion: 30,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if self.n_ticks == 0 {
            return bad("n_ticks must be positive".into());
        }
        if self.tick_interval_ms <= 0 {
            return bad("tick_interval_ms must be positive".into());
        }
        if self.base_volume == 0 || self.peak_volume_multiplier == 0 {
            return bad("base_volume and peak_volume_multiplier must be positive".into());
        }
        if self.gap_ticks <= 2 * SWEEP_AMPLITUDE {
            return bad(format!("gap_ticks must be > {}", 2 * SWEEP_AMPLITUDE));
        }
        if self.max_excursion <= SWEEP_AMPLITUDE {
            return bad(format!("max_excursion must be > {SWEEP_AMPLITUDE}"));
        }
        if !(self.flow_imbalance.is_finite() && self.flow_imbalance >= 1.0) {
            return bad("flow_imbalance must be >= 1".into());
        }
        let StepLaw { p_up, p_down } = self.step_law;
        if !prob(p_up) || !prob(p_down) || p_up + p_down > 1.0 {
            return bad("step_law probabilities must lie in [0,1] and sum to <= 1".into());
        }
        if !prob(self.base_reversal_prob) || !prob(self.excluded_prob) {
            return bad("probabilities must lie in [0,1]".into());
        }
        let (hi, lo) = self.regime_probs();
        if !prob(hi) || !prob(lo) {
            return bad(format!(
                "base_reversal_prob +/- signal_delta/2 must lie in [0,1], got {lo}..{hi}"
            ));
        }
        Ok(())
    }

    /// Reversal probabilities in the (high, low) flow regimes.
    pub fn regime_probs(&self) -> (f64, f64) {
        let half = self.signal_delta / 2.0;
        (self.base_reversal_prob + half, self.base_reversal_prob - half)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlantedOutcome {
    Reversal,
    Crossing,
    ShallowCrossThenReversal,
}

/// Ground-truth annotation of one completed episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEpisode {
    pub target_price_idx: i64,
    /// +1 when price approaches the target from above, -1 from below.
    pub approach_sign: i64,
    pub peak_tick_index: usize,
    /// First tick within 2 ticks of the target on the final approach.
    pub trigger_tick_index: usize,
    pub touch_tick_index: usize,
    pub high_regime: bool,
    pub outcome: PlantedOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStream {
    pub ticks: Vec<TickRecord>,
    /// Episodes that completed before the stream was cut at `n_ticks`.
    pub episodes: Vec<PlantedEpisode>,
}

struct Urn {
    p: f64,
    balls: Vec<bool>,
}

impl Urn {
    fn new(p: f64) -> Self {
        Urn { p, balls: Vec::new() }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> bool {
        if self.balls.is_empty() {
            let exact = self.p * URN_BLOCK as f64;
            let mut hits = exact.floor() as usize;
            if rng.gen::<f64>() < exact - exact.floor() {
                hits += 1;
            }
            self.balls = (0..URN_BLOCK).map(|i| i < hits).collect();
            self.balls.shuffle(rng);
        }
        self.balls.pop().expect("refilled")
    }
}

struct Emitter<'a> {
    cfg: &'a SyntheticConfig,
    rng: ChaCha8Rng,
    ticks: Vec<TickRecord>,
    price: i64,
    high_regime: bool,
}

impl Emitter<'_> {
    fn side_volume(&mut self, mean: f64) -> (u64, u64) {
        let vol = mean.round().max(1.0) as u64;
        let trades = self.rng.gen_range(1..=vol.min(3));
        (vol, trades)
    }

    fn emit(&mut self, price: i64, multiplier: u64) {
        let base = self.cfg.base_volume as f64 * multiplier as f64;
        let (bid_mean, ask_mean) = if self.high_regime {
            (base * self.cfg.flow_imbalance, base)
        } else {
            (base, base * self.cfg.flow_imbalance)
        };
        let (bid_volume, bid_trades) = self.side_volume(bid_mean);
        let (ask_volume, ask_trades) = self.side_volume(ask_mean);
        let idx = self.ticks.len() as i64;
        let start = self.cfg.start_ts_ms + idx * self.cfg.tick_interval_ms;
        self.ticks.push(TickRecord {
            start_ts_ms: start,
            end_ts_ms: start + self.cfg.tick_interval_ms / 2,
            price_idx: price,
            bid_volume,
            ask_volume,
            bid_trades,
            ask_trades,
        });
        self.price = price;
    }

    fn step(&mut self) -> i64 {
        let u: f64 = self.rng.gen();
        let law = self.cfg.step_law;
        if u < law.p_up {
            1
        } else if u < law.p_up + law.p_down {
            -1
        } else {
            0
        }
    }

    fn last_index(&self) -> usize {
        self.ticks.len() - 1
    }
}

/// Generates a deterministic stream for `(seed, config)`.
pub fn generate_synthetic(seed: u64, config: &SyntheticConfig) -> Result<SyntheticStream> {
    config.validate()?;
    let (p_high, p_low) = config.regime_probs();
    let mut urn_high = Urn::new(p_high);
    let mut urn_low = Urn::new(p_low);
    let mut em = Emitter {
        cfg: config,
        rng: ChaCha8Rng::seed_from_u64(seed),
        ticks: Vec::with_capacity(config.n_ticks + 512),
        price: config.start_price_idx,
        high_regime: false,
    };
    let mut episodes = Vec::new();

    while em.ticks.len() < config.n_ticks {
        em.high_regime = em.rng.gen_bool(0.5);
        let sign: i64 = if em.rng.gen_bool(0.5) { 1 } else { -1 };

        for _ in 0..config.drift_ticks {
            let p = em.price + em.step();
            em.emit(p, 1);
        }

        let jump: i64 = if em.rng.gen_bool(0.5) { 1 } else { -1 };
        let x = em.price + jump * config.gap_ticks + sign * SWEEP_AMPLITUDE;
        let mut peak = 0;
        for k in -SWEEP_AMPLITUDE..=SWEEP_AMPLITUDE {
            if k == 0 {
                em.emit(x, config.peak_volume_multiplier);
                peak = em.last_index();
            } else {
                em.emit(x + sign * k, 1);
            }
        }

        let far = em.rng.gen_range(SWEEP_AMPLITUDE + 1..=config.max_excursion);
        for d in SWEEP_AMPLITUDE + 1..=far {
            em.emit(x + sign * d, 1);
        }
        let mut trigger = None;
        for d in (1..far).rev() {
            em.emit(x + sign * d, 1);
            if d == 2 {
                trigger = Some(em.last_index());
            }
        }
        let trigger = trigger.unwrap_or_else(|| em.last_index());
        em.emit(x, 1);
        let touch = em.last_index();

        let high = em.high_regime;
        let reverses = if high {
            urn_high.draw(&mut em.rng)
        } else {
            urn_low.draw(&mut em.rng)
        };
        let outcome = if !reverses {
            PlantedOutcome::Crossing
        } else if em.rng.gen::<f64>() < config.excluded_prob {
            PlantedOutcome::ShallowCrossThenReversal
        } else {
            PlantedOutcome::Reversal
        };
        match outcome {
            PlantedOutcome::Crossing => {
                for d in 1..=CROSSING_TICKS {
                    em.emit(x - sign * d, 1);
                }
            }
            PlantedOutcome::Reversal | PlantedOutcome::ShallowCrossThenReversal => {
                if outcome == PlantedOutcome::ShallowCrossThenReversal {
                    let depth = em.rng.gen_range(1..CROSSING_TICKS);
                    for d in 1..=depth {
                        em.emit(x - sign * d, 1);
                    }
                    for d in (0..depth).rev() {
                        em.emit(x - sign * d, 1);
                    }
                }
                for d in 1..=REVERSAL_TICKS {
                    em.emit(x + sign * d, 1);
                }
            }
        }

        if em.ticks.len() <= config.n_ticks {
            episodes.push(PlantedEpisode {
                target_price_idx: x,
                approach_sign: sign,
                peak_tick_index: peak,
                trigger_tick_index: trigger,
                touch_tick_index: touch,
                high_regime: high,
                outcome,
            });
        }
    }
    em.ticks.truncate(config.n_ticks);
    Ok(SyntheticStream {
        ticks: em.ticks,
        episodes,
    })
}
