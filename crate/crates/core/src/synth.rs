//! Deterministic synthetic multimodal events.
//!
//! Each channel carries a smooth baseline (a level plus two slow sinusoids
//! and white noise). During `[tau1, tau2]` an anomaly is added to a random
//! subset of channels. Amplitudes are expressed in baseline units: one unit is
//! `unit_fraction * modality_scale`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::EventSeries;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyShape {
    /// Constant offset of `magnitude` units.
    Step,
    /// Oscillation starting at `magnitude` units, decaying over the event.
    DampedOscillation,
    /// Intermittent drops of `magnitude` units on half the in-event samples.
    Dropout,
}

/// Where events fall inside a series, as fractions of its length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventPlacement {
    pub start_min: f64,
    pub start_max: f64,
    pub duration_min: f64,
    pub duration_max: f64,
}

impl Default for EventPlacement {
    fn default() -> Self {
        Self {
            start_min: 0.25,
            start_max: 0.5,
            duration_min: 0.15,
            duration_max: 0.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_events: usize,
    pub channels_per_modality: Vec<usize>,
    pub n_timesteps: usize,
    pub dt: f64,
    pub anomaly: AnomalyShape,
    /// Anomaly amplitude in baseline units.
    pub magnitude: f64,
    /// Per-event severity is drawn from `magnitude * [1 - spread, 1 + spread]`.
    pub magnitude_spread: f64,
    /// Probability that a channel is affected by an event.
    pub affected_fraction: f64,
    pub placement: EventPlacement,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_events: 60,
            channels_per_modality: vec![23, 34, 34],
            n_timesteps: 160,
            dt: 0.025,
            anomaly: AnomalyShape::Step,
            magnitude: 10.0,
            magnitude_spread: 0.4,
            affected_fraction: 0.8,
            placement: EventPlacement::default(),
            seed: 0,
        }
    }
}

/// Per-modality scale of the raw measurements.
const MODALITY_SCALES: [f64; 3] = [1.0, 100.0, 100.0];
const UNIT_FRACTION: f64 = 0.05;
const SINE_AMPLITUDE: f64 = 1.0;
const WHITE_NOISE: f64 = 0.3;

/// Fixed per-channel traits shared by all events of one generator run.
struct ChannelTraits {
    modality: usize,
    level: f64,
    unit: f64,
    /// Direction in which the channel responds to an event.
    response: f64,
    freqs: [f64; 2],
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_events == 0 || self.n_timesteps < 2 {
            return invalid("need at least one event and two timesteps");
        }
        if self.channels_per_modality.is_empty() || self.channels_per_modality.contains(&0) {
            return invalid("every modality needs at least one channel");
        }
        if !(self.dt > 0.0) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.magnitude >= 0.0) {
            return invalid(format!("magnitude must be >= 0, got {}", self.magnitude));
        }
        if !(0.0..=1.0).contains(&self.magnitude_spread) {
            return invalid("magnitude_spread must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.affected_fraction) {
            return invalid("affected_fraction must be in [0, 1]");
        }
        let p = &self.placement;
        let ok = 0.0 <= p.start_min
            && p.start_min <= p.start_max
            && p.start_max <= 1.0
            && 0.0 <= p.duration_min
            && p.duration_min <= p.duration_max;
        if !ok {
            return invalid("event placement fractions are inconsistent");
        }
        Ok(())
    }

    /// Number of baseline units per raw unit, per channel.
    pub fn channel_units(&self) -> Vec<f64> {
        self.channels_per_modality
            .iter()
            .enumerate()
            .flat_map(|(m, &nc)| std::iter::repeat_n(modality_scale(m) * UNIT_FRACTION, nc))
            .collect()
    }
}

fn modality_scale(m: usize) -> f64 {
    MODALITY_SCALES.get(m).copied().unwrap_or(1.0)
}

fn channel_traits(cfg: &SynthConfig) -> Vec<ChannelTraits> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_CAFE_F00D_0001);
    let mut out = Vec::new();
    for (m, &nc) in cfg.channels_per_modality.iter().enumerate() {
        let scale = modality_scale(m);
        for _ in 0..nc {
            out.push(ChannelTraits {
                modality: m,
                level: scale * rng.random_range(-1.0..1.0),
                unit: scale * UNIT_FRACTION,
                response: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                freqs: [rng.random_range(0.2..0.6), rng.random_range(0.6..1.5)],
            });
        }
    }
    out
}

/// Generate `n_events` annotated series.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<EventSeries>> {
    cfg.validate()?;
    let traits = channel_traits(cfg);
    let modality_of_channel: Vec<usize> = traits.iter().map(|t| t.modality).collect();
    let n = cfg.n_timesteps;
    let timestamps: Vec<f64> = (0..n).map(|i| i as f64 * cfg.dt).collect();
    let width = (cfg.n_events.max(1) as f64).log10().floor() as usize + 1;

    (0..cfg.n_events)
        .map(|e| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(e as u64));
            let p = &cfg.placement;
            let start_frac = rng.random_range(p.start_min..=p.start_max);
            let dur_frac = rng.random_range(p.duration_min..=p.duration_max);
            let i1 = ((start_frac * (n - 1) as f64).round() as usize).min(n - 1);
            let i2 = (i1 + (dur_frac * (n - 1) as f64).round() as usize).min(n - 1);

            let draws: Vec<f64> = (0..traits.len()).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut affected: Vec<bool> = draws.iter().map(|&u| u < cfg.affected_fraction).collect();
            if cfg.affected_fraction > 0.0 && !affected.iter().any(|&x| x) {
                let lowest = (0..draws.len())
                    .min_by(|&a, &b| draws[a].total_cmp(&draws[b]))
                    .unwrap_or(0);
                affected[lowest] = true;
            }
            let osc_freq = rng.random_range(2.0..5.0);
            // decay time relative to the event length, so the oscillation is
            // still visible mid-event
            let duration = (timestamps[i2] - timestamps[i1]).max(cfg.dt);
            let decay = duration * rng.random_range(0.5..1.0);
            let severity = 1.0 + cfg.magnitude_spread * rng.random_range(-1.0..=1.0);
            let dropped: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();

            let mut channels = DMatrix::zeros(traits.len(), n);
            for (c, tr) in traits.iter().enumerate() {
                let phases = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
                for (i, &t) in timestamps.iter().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let mut v = tr.level
                        + tr.unit
                            * (SINE_AMPLITUDE * (2.0 * PI * tr.freqs[0] * t + phases[0]).sin()
                                + SINE_AMPLITUDE * (2.0 * PI * tr.freqs[1] * t + phases[1]).sin()
                                + WHITE_NOISE * z);
                    if affected[c] && i1 <= i && i <= i2 {
                        let amp = cfg.magnitude * severity * tr.unit;
                        let since = t - timestamps[i1];
                        v += match cfg.anomaly {
                            AnomalyShape::Step => tr.response * amp,
                            AnomalyShape::DampedOscillation => {
                                tr.response * amp * (-since / decay).exp() * (2.0 * PI * osc_freq * since).cos()
                            }
                            AnomalyShape::Dropout => {
                                if dropped[i] {
                                    -amp
                                } else {
                                    0.0
                                }
                            }
                        };
                    }
                    channels[(c, i)] = v;
                }
            }
            let class = match cfg.anomaly {
                AnomalyShape::Step => "step",
                AnomalyShape::DampedOscillation => "damped_oscillation",
                AnomalyShape::Dropout => "dropout",
            };
            EventSeries::new(
                format!("event_{e:0width$}"),
                timestamps.clone(),
                channels,
                modality_of_channel.clone(),
                timestamps[i1],
                timestamps[i2],
                Some(class.to_string()),
            )
        })
        .collect()
}
