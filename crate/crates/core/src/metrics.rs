//! Link-quality estimation and link costs.
//!
//! Receiving ratios are exponential moving averages of Hello reception
//! indicators. The relative speed between two nodes is the smoothed rate of
//! change of their distance, sampled at Hello arrivals. Link cost is ETX,
//! optionally multiplied by `exp(v * beta)` so that links whose endpoints are
//! separating look more expensive than links whose endpoints are closing in.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use thiserror::Error;

use crate::model::{MetricKind, NodeId, ProtocolConfig, SimTime};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("{name} = {value} is outside [0, 1]")]
    NotUnitInterval { name: &'static str, value: f64 },
    #[error("beta = {0} must be non-negative")]
    NegativeBeta(f64),
    #[error("relative speed {0} is not finite")]
    NonFiniteSpeed(f64),
    #[error("route cost of an empty link sequence")]
    EmptyRoute,
    #[error("Hello arrival at {now} is not after the previous one at {prev}")]
    NonIncreasingTime { prev: SimTime, now: SimTime },
    #[error("speed-weighted ETX needs the neighbor position on every received Hello")]
    MissingDistance,
}

fn unit(name: &'static str, value: f64) -> Result<f64, MetricError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(MetricError::NotUnitInterval { name, value })
    }
}

/// Probability estimate in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct ReceivingRatio(f64);

impl ReceivingRatio {
    pub const ZERO: ReceivingRatio = ReceivingRatio(0.0);
    pub const ONE: ReceivingRatio = ReceivingRatio(1.0);

    pub fn new(value: f64) -> Result<Self, MetricError> {
        unit("receiving ratio", value).map(ReceivingRatio)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Additive route metric. `+inf` marks an unusable link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCost(f64);

impl LinkCost {
    pub const INFINITE: LinkCost = LinkCost(f64::INFINITY);

    /// Wraps a raw cost. NaN and negative values are not costs.
    pub fn new(value: f64) -> Option<Self> {
        (value >= 0.0).then_some(LinkCost(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl Add for LinkCost {
    type Output = LinkCost;
    fn add(self, rhs: LinkCost) -> LinkCost {
        LinkCost(self.0 + rhs.0)
    }
}

impl Eq for LinkCost {}

impl PartialOrd for LinkCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LinkCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for LinkCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One step of the receiving-ratio average: `alpha * h + (1 - alpha) * r_prev`.
pub fn update_receiving_ratio(
    r_prev: ReceivingRatio,
    received: bool,
    alpha: f64,
) -> Result<ReceivingRatio, MetricError> {
    let alpha = unit("alpha", alpha)?;
    let h = if received { 1.0 } else { 0.0 };
    let next = alpha * h + (1.0 - alpha) * r_prev.0;
    // a convex combination of two values in [0, 1]; clamp only guards rounding
    Ok(ReceivingRatio(next.clamp(0.0, 1.0)))
}

/// `1 / (r_f * r_r)`, infinite when either ratio is zero.
pub fn link_etx(r_f: ReceivingRatio, r_r: ReceivingRatio) -> LinkCost {
    let product = r_f.0 * r_r.0;
    if product == 0.0 {
        LinkCost::INFINITE
    } else {
        LinkCost(1.0 / product)
    }
}

/// Cost under the configured metric; `v` is ignored for plain ETX.
pub fn link_cost(
    r_f: ReceivingRatio,
    r_r: ReceivingRatio,
    v: f64,
    config: &ProtocolConfig,
) -> LinkCost {
    match config.metric_kind {
        MetricKind::PlainEtx => link_etx(r_f, r_r),
        MetricKind::SpeedWeightedEtx => {
            speed_weighted_etx(r_f, r_r, v, config.beta).unwrap_or(LinkCost::INFINITE)
        }
    }
}

/// `exp(v * beta) / (r_f * r_r)`.
pub fn speed_weighted_etx(
    r_f: ReceivingRatio,
    r_r: ReceivingRatio,
    v: f64,
    beta: f64,
) -> Result<LinkCost, MetricError> {
    if beta.is_nan() || beta < 0.0 {
        return Err(MetricError::NegativeBeta(beta));
    }
    if !v.is_finite() {
        return Err(MetricError::NonFiniteSpeed(v));
    }
    let product = r_f.0 * r_r.0;
    if product == 0.0 {
        return Ok(LinkCost::INFINITE);
    }
    Ok(LinkCost((v * beta).exp() / product))
}

/// Sum of link costs along a route.
pub fn route_etx(links: &[LinkCost]) -> Result<LinkCost, MetricError> {
    if links.is_empty() {
        return Err(MetricError::EmptyRoute);
    }
    Ok(links.iter().fold(LinkCost(0.0), |acc, c| acc + *c))
}

/// Rate of change of distance in m/s. Positive when the nodes separate.
pub fn instantaneous_speed(
    d_now: f64,
    d_prev: f64,
    t_now: SimTime,
    t_prev: SimTime,
) -> Result<f64, MetricError> {
    if t_now <= t_prev {
        return Err(MetricError::NonIncreasingTime {
            prev: t_prev,
            now: t_now,
        });
    }
    let dt = (t_now.as_millis() - t_prev.as_millis()) as f64 / 1000.0;
    Ok((d_now - d_prev) / dt)
}

/// One step of the speed average: `gamma * v_inst + (1 - gamma) * v_prev`.
pub fn update_speed_ema(v_prev: f64, v_inst: f64, gamma: f64) -> Result<f64, MetricError> {
    let gamma = unit("gamma", gamma)?;
    Ok(gamma * v_inst + (1.0 - gamma) * v_prev)
}

/// Smoothed relative speed towards one neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpeedEstimate {
    pub v: f64,
    pub last_distance: f64,
    pub last_time: SimTime,
    pub initialized: bool,
}

impl SpeedEstimate {
    /// Feeds one distance sample taken at a Hello arrival. The first sample
    /// only sets the baseline.
    pub fn observe(&mut self, distance: f64, now: SimTime, gamma: f64) -> Result<(), MetricError> {
        if self.initialized {
            let v_inst = instantaneous_speed(distance, self.last_distance, now, self.last_time)?;
            self.v = update_speed_ema(self.v, v_inst, gamma)?;
        } else {
            unit("gamma", gamma)?;
            self.v = 0.0;
            self.initialized = true;
        }
        self.last_distance = distance;
        self.last_time = now;
        Ok(())
    }
}

/// What the per-neighbor sampler saw during one Hello interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HelloObservation {
    /// No Hello arrived in the interval.
    Missed,
    Received {
        seq: u32,
        /// The neighbor's forward ratio for us, if its Hello listed us.
        reported_reverse: Option<ReceivingRatio>,
        /// Distance derived from the position advertised in the Hello.
        distance: Option<f64>,
    },
}

/// Everything a node knows about the link to one neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkQualityState {
    pub neighbor: NodeId,
    pub r_forward: ReceivingRatio,
    pub r_reverse: ReceivingRatio,
    pub speed: SpeedEstimate,
    pub last_hello_seq: u32,
    pub expiry: SimTime,
}

impl LinkQualityState {
    pub fn new(neighbor: NodeId) -> Self {
        LinkQualityState {
            neighbor,
            r_forward: ReceivingRatio::ZERO,
            r_reverse: ReceivingRatio::ZERO,
            speed: SpeedEstimate::default(),
            last_hello_seq: 0,
            expiry: SimTime::ZERO,
        }
    }

    /// Applies one sampler outcome. A missed probe decays the forward ratio
    /// and leaves everything else alone; a received Hello also refreshes the
    /// reverse ratio, the speed estimate and the expiry.
    pub fn observe(
        &mut self,
        obs: HelloObservation,
        now: SimTime,
        config: &ProtocolConfig,
    ) -> Result<(), MetricError> {
        match obs {
            HelloObservation::Missed => {
                self.r_forward = update_receiving_ratio(self.r_forward, false, config.alpha)?;
            }
            HelloObservation::Received {
                seq,
                reported_reverse,
                distance,
            } => {
                if distance.is_none() && config.metric_kind == MetricKind::SpeedWeightedEtx {
                    return Err(MetricError::MissingDistance);
                }
                let r_forward = update_receiving_ratio(self.r_forward, true, config.alpha)?;
                if let Some(d) = distance {
                    self.speed.observe(d, now, config.gamma)?;
                }
                self.r_forward = r_forward;
                if let Some(r) = reported_reverse {
                    self.r_reverse = r;
                }
                self.last_hello_seq = seq;
                self.expiry = now.add_millis(config.link_hold_ms());
            }
        }
        Ok(())
    }

    /// Both directions have been heard.
    pub fn is_symmetric(&self) -> bool {
        self.r_forward.value() > 0.0 && self.r_reverse.value() > 0.0
    }

    pub fn cost(&self, config: &ProtocolConfig) -> LinkCost {
        link_cost(self.r_forward, self.r_reverse, self.speed.v, config)
    }
}
