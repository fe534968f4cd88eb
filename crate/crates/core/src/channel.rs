//! Per-interval channel conditions and the stochastic packet service model.
//!
//! Each RSU has a per-attempt drop rate `beta` and a delay rate `lambda`
//! (mean per-attempt delay `1/lambda`, in timeslots). A packet is retried
//! until it gets through, so the attempt count is geometric with success
//! probability `1 - beta`, and the end-to-end delay is the sum of one
//! exponential draw per attempt.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp margin keeping drop rates inside (0, 1) and delay rates positive.
pub const EPS: f64 = 1e-6;

fn default_channel_rate() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Beta distribution shape `a` for drop rates.
    pub beta_shape_a: f64,
    /// Beta distribution shape `b` for drop rates.
    pub beta_shape_b: f64,
    /// Gamma shape for delay rates.
    pub gamma_shape: f64,
    /// Gamma scale for delay rates.
    pub gamma_scale: f64,
    /// Packets per timeslot on one channel.
    #[serde(default = "default_channel_rate")]
    pub channel_rate: f64,
    /// Constant per-attempt transmission delay `L / b_w`, in timeslots.
    #[serde(default)]
    pub fixed_tx_delay: f64,
    /// Packet length in bits (informational).
    #[serde(default)]
    pub packet_length_bits: Option<f64>,
    /// Channel bandwidth in Hz (informational).
    #[serde(default)]
    pub bandwidth_hz: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            beta_shape_a: 2.0,
            beta_shape_b: 8.0,
            gamma_shape: 4.0,
            gamma_scale: 0.3,
            channel_rate: 1.0,
            fixed_tx_delay: 0.0,
            packet_length_bits: None,
            bandwidth_hz: None,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta_shape_a", self.beta_shape_a),
            ("beta_shape_b", self.beta_shape_b),
            ("gamma_shape", self.gamma_shape),
            ("gamma_scale", self.gamma_scale),
            ("channel_rate", self.channel_rate),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(format!("channel.{name} must be > 0 (got {value})")));
            }
        }
        if !(self.fixed_tx_delay.is_finite() && self.fixed_tx_delay >= 0.0) {
            return Err(Error::config(format!(
                "channel.fixed_tx_delay must be >= 0 (got {})",
                self.fixed_tx_delay
            )));
        }
        Ok(())
    }

    /// Mean drop rate `a / (a + b)` of the Beta distribution.
    pub fn mean_drop_rate(&self) -> f64 {
        self.beta_shape_a / (self.beta_shape_a + self.beta_shape_b)
    }

    /// Returns a copy whose Beta mean is `mean`, keeping `a + b` fixed.
    pub fn with_mean_drop_rate(&self, mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean < 1.0) {
            return Err(Error::config(format!("drop-rate mean must lie in (0, 1), got {mean}")));
        }
        let concentration = self.beta_shape_a + self.beta_shape_b;
        Ok(Self {
            beta_shape_a: mean * concentration,
            beta_shape_b: (1.0 - mean) * concentration,
            ..self.clone()
        })
    }

    /// Expected end-to-end delay including the fixed per-attempt term.
    pub fn expected_delay(&self, beta: f64, lambda: f64) -> Result<f64> {
        expected_delay_with_tx(beta, lambda, self.fixed_tx_delay)
    }
}

/// Channel draws for every RSU in one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub drop_rates: Vec<f64>,
    pub delay_rates: Vec<f64>,
    pub interval: usize,
}

impl ChannelState {
    /// Builds a state from explicit values, clamping them into range.
    pub fn new(drop_rates: Vec<f64>, delay_rates: Vec<f64>, interval: usize) -> Result<Self> {
        if drop_rates.len() != delay_rates.len() {
            return Err(Error::config(format!(
                "{} drop rates but {} delay rates",
                drop_rates.len(),
                delay_rates.len()
            )));
        }
        if drop_rates.is_empty() {
            return Err(Error::config("channel state needs at least one RSU"));
        }
        for (&b, &l) in drop_rates.iter().zip(&delay_rates) {
            if !(b.is_finite() && (0.0..=1.0).contains(&b)) || !(l.is_finite() && l >= 0.0) {
                return Err(Error::domain(format!("invalid channel (beta={b}, lambda={l})")));
            }
        }
        Ok(Self {
            drop_rates: drop_rates.into_iter().map(clamp_drop_rate).collect(),
            delay_rates: delay_rates.into_iter().map(clamp_delay_rate).collect(),
            interval,
        })
    }

    pub fn len(&self) -> usize {
        self.drop_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drop_rates.is_empty()
    }

    /// Expected end-to-end delay of RSU `i` (no fixed transmission term).
    pub fn expected_delay(&self, i: usize) -> f64 {
        1.0 / (self.delay_rates[i] * (1.0 - self.drop_rates[i]))
    }
}

fn clamp_drop_rate(beta: f64) -> f64 {
    beta.clamp(EPS, 1.0 - EPS)
}

fn clamp_delay_rate(lambda: f64) -> f64 {
    lambda.max(EPS)
}

/// Draws `n` independent `(beta, lambda)` pairs.
pub fn sample_channel_conditions<R: Rng + ?Sized>(
    rng: &mut R,
    config: &ChannelConfig,
    n: usize,
    interval: usize,
) -> Result<ChannelState> {
    config.validate()?;
    if n == 0 {
        return Err(Error::config("need at least one RSU to sample channels for"));
    }
    let beta = Beta::new(config.beta_shape_a, config.beta_shape_b)
        .map_err(|e| Error::config(format!("beta distribution: {e}")))?;
    let gamma = Gamma::new(config.gamma_shape, config.gamma_scale)
        .map_err(|e| Error::config(format!("gamma distribution: {e}")))?;
    let mut drop_rates = Vec::with_capacity(n);
    let mut delay_rates = Vec::with_capacity(n);
    for _ in 0..n {
        drop_rates.push(clamp_drop_rate(beta.sample(rng)));
        delay_rates.push(clamp_delay_rate(gamma.sample(rng)));
    }
    Ok(ChannelState {
        drop_rates,
        delay_rates,
        interval,
    })
}

fn check_domain(beta: f64, lambda: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("drop rate must lie in (0, 1), got {beta}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("delay rate must be > 0, got {lambda}")));
    }
    Ok(())
}

/// Expected end-to-end delay `(1/lambda) * 1/(1 - beta)`.
pub fn expected_delay(beta: f64, lambda: f64) -> Result<f64> {
    expected_delay_with_tx(beta, lambda, 0.0)
}

/// Expected delay when every attempt also pays `fixed_tx_delay`.
pub fn expected_delay_with_tx(beta: f64, lambda: f64, fixed_tx_delay: f64) -> Result<f64> {
    check_domain(beta, lambda)?;
    let attempts = 1.0 / (1.0 - beta);
    Ok(attempts / lambda + fixed_tx_delay * attempts)
}

/// Outcome of serving one packet until it is delivered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketService {
    pub attempts: u64,
    pub delay: f64,
}

/// Samples the attempt count and the total delay of one packet.
///
/// `P(R = r) = beta^(r-1) (1 - beta)`.
pub fn sample_packet_service<R: Rng + ?Sized>(
    rng: &mut R,
    beta: f64,
    lambda: f64,
    fixed_tx_delay: f64,
) -> Result<PacketService> {
    check_domain(beta, lambda)?;
    let failures = Geometric::new(1.0 - beta)
        .map_err(|e| Error::domain(format!("geometric distribution: {e}")))?
        .sample(rng);
    let attempts = failures + 1;
    let exp = Exp::new(lambda).map_err(|e| Error::domain(format!("exponential: {e}")))?;
    let mut delay = 0.0;
    for _ in 0..attempts {
        delay += exp.sample(rng) + fixed_tx_delay;
    }
    Ok(PacketService { attempts, delay })
}

/// Retransmission-discounted delivery rate `alpha * R_ch * (1 - beta)`.
pub fn effective_throughput(alpha: f64, beta: f64, channel_rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("attempt probability must lie in [0, 1], got {alpha}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("drop rate must lie in (0, 1), got {beta}")));
    }
    Ok(alpha * channel_rate * (1.0 - beta))
}

/// One delivered packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub rsu: usize,
    pub attempts: u64,
    pub delay: f64,
    pub label: usize,
    pub first_interval: usize,
}
