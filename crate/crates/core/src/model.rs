//! Identities, simulation time, positions and protocol configuration.

use std::fmt;

use thiserror::Error;

/// Node identifier. Always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn new(id: u32) -> Result<Self, ConfigError> {
        if id == 0 {
            return Err(ConfigError::ZeroNodeId);
        }
        Ok(NodeId(id))
    }

    /// Panics on 0; intended for literals in builders and tests.
    pub const fn of(id: u32) -> Self {
        assert!(id != 0, "node ids start at 1");
        NodeId(id)
    }

    pub const fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Milliseconds since scenario start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1000)
    }

    pub const fn as_millis(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub const fn add_millis(self, ms: u64) -> Self {
        SimTime(self.0 + ms)
    }

    pub const fn saturating_sub(self, other: SimTime) -> u64 {
        self.0.saturating_sub(other.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Local Cartesian coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        euclidean_distance(*self, *other)
    }

    /// Point at fraction `t` of the segment `self -> other`.
    pub fn lerp(&self, other: &Position, t: f64) -> Position {
        Position {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
            z: self.z + (other.z - self.z) * t,
        }
    }
}

/// 3-D Euclidean distance between two positions.
pub fn euclidean_distance(a: Position, b: Position) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Which link cost the route computation uses for local links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    /// `1 / (r_f * r_r)`
    PlainEtx,
    /// `exp(v * beta) / (r_f * r_r)`
    SpeedWeightedEtx,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::PlainEtx => "plain_etx",
            MetricKind::SpeedWeightedEtx => "speed_weighted_etx",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("node ids start at 1")]
    ZeroNodeId,
    #[error("{name} = {value} is outside the valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("link_hold_time ({hold}s) must be at least hello_interval ({hello}s)")]
    HoldShorterThanHello { hold: f64, hello: f64 },
}

/// Protocol parameters shared by every node of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Seconds between Hello broadcasts.
    pub hello_interval: f64,
    /// Seconds between TC broadcasts.
    pub tc_interval: f64,
    /// Seconds a neighbor entry survives without a Hello.
    pub link_hold_time: f64,
    /// Link-quality aging of the receiving-ratio average.
    pub alpha: f64,
    /// Speed weight in s/m.
    pub beta: f64,
    /// Smoothing of the relative-speed average.
    pub gamma: f64,
    pub metric_kind: MetricKind,
}

impl ProtocolConfig {
    /// Baseline OLSR with the link-quality extension: alpha 0.2, plain ETX.
    pub fn olsr_etx() -> Self {
        ProtocolConfig {
            hello_interval: 0.5,
            tc_interval: 1.0,
            link_hold_time: 1.5,
            alpha: 0.2,
            beta: 0.0,
            gamma: 0.04,
            metric_kind: MetricKind::PlainEtx,
        }
    }

    /// Speed-weighted ETX: alpha 0.05, beta 0.2, gamma 0.04.
    pub fn predictive_olsr() -> Self {
        ProtocolConfig {
            hello_interval: 0.5,
            tc_interval: 1.0,
            link_hold_time: 1.5,
            alpha: 0.05,
            beta: 0.2,
            gamma: 0.04,
            metric_kind: MetricKind::SpeedWeightedEtx,
        }
    }

    /// Sets the Hello interval and keeps the hold time at three intervals.
    pub fn with_hello_interval(mut self, secs: f64) -> Self {
        self.hello_interval = secs;
        self.link_hold_time = 3.0 * secs;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_unit("alpha", self.alpha)?;
        check_unit("gamma", self.gamma)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ConfigError::OutOfRange {
                name: "beta",
                value: self.beta,
                range: "[0, inf)",
            });
        }
        check_interval("hello_interval", self.hello_interval)?;
        check_interval("tc_interval", self.tc_interval)?;
        check_interval("link_hold_time", self.link_hold_time)?;
        if self.link_hold_time < self.hello_interval {
            return Err(ConfigError::HoldShorterThanHello {
                hold: self.link_hold_time,
                hello: self.hello_interval,
            });
        }
        Ok(())
    }

    pub fn hello_interval_ms(&self) -> u64 {
        secs_to_ms(self.hello_interval)
    }

    pub fn tc_interval_ms(&self) -> u64 {
        secs_to_ms(self.tc_interval)
    }

    pub fn link_hold_ms(&self) -> u64 {
        secs_to_ms(self.link_hold_time)
    }

    /// Topology entries live for three TC intervals.
    pub fn topology_hold_ms(&self) -> u64 {
        3 * self.tc_interval_ms()
    }
}

fn secs_to_ms(s: f64) -> u64 {
    (s * 1000.0).round() as u64
}

fn check_unit(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

fn check_interval(name: &'static str, value: f64) -> Result<(), ConfigError> {
    // must survive conversion to whole milliseconds
    if value.is_finite() && value >= 0.001 {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            name,
            value,
            range: "[0.001, inf) seconds",
        })
    }
}
