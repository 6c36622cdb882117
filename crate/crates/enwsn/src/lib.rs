//! Energy simulator for low-power wireless sensor networks.
//!
//! The library models a periodic data-collection network end to end:
//!
//! - [`trace`] ingests, synthesizes and calibrates sensor time series;
//! - [`dbp`] runs derivative-based prediction over a trace and reports how
//!   many samples were suppressed;
//! - [`topology`] builds communication graphs and collection trees and
//!   derives per-node traffic loads;
//! - [`hw`] holds the hardware catalog (MCU, transceiver, wake-up receivers,
//!   sensing peripheral, MAC timing) and the 23-row configuration matrix;
//! - [`power`] turns traffic loads into per-node average power via a
//!   weighted sum over the five operating conditions, and sweeps all
//!   configuration/software combinations;
//! - [`harvest`] converts illuminance into harvested power and decides
//!   energy neutrality per node.
//!
//! All computations are pure functions over immutable inputs and are
//! deterministic for a fixed seed.

pub mod dbp;
pub mod fixtures;
pub mod harvest;
pub mod hw;
pub mod power;
pub mod topology;
pub mod trace;

/// Identifier of a network node. The sink is a regular node id singled out
/// by [`topology::Topology::sink`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for NodeId {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(NodeId)
    }
}

/// Formats a float with `sig` significant digits as a plain decimal string.
///
/// Used by the CSV emitters so that serialized values are stable across
/// runs; parsing a rendered value and rendering it again yields the same
/// bytes.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mut exp = x.abs().log10().floor() as i32;
    loop {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        // rounding can push the value across a power of ten (99.9999995 ->
        // "100.0000"); reformat with the exponent of the rounded value so
        // parse-then-render is a fixed point
        let back: f64 = s.parse().expect("fixed-point decimal parses");
        let new_exp = if back == 0.0 {
            exp
        } else {
            back.abs().log10().floor() as i32
        };
        if new_exp == exp {
            return s;
        }
        exp = new_exp;
    }
}

/// Shortest-roundtrip rendering for timestamps and other exact fields.
pub fn fmt_exact(x: f64) -> String {
    format!("{x}")
}
