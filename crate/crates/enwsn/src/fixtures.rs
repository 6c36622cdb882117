//! Built-in scenario fixtures.
//!
//! The tunnel layout ships as a CSV fixture embedded here (and available
//! under `fixtures/` for the CLI): 40 sensing nodes in two rows along a
//! 260 m tunnel plus a gateway at the entrance. At the 15 m communication
//! range the collection tree is 15 hops deep. Node ids 1-3 and 21-23 sit at
//! the sunlit entrance; the rest only see the tunnel lighting.
//!
//! The office-testbed fixture pairs a 54-node floor plan with aggregate
//! link qualities whose expected-transmission tree is 4 hops deep.

use std::collections::BTreeMap;

use rand_core::SeedableRng;

use crate::harvest::HarvestCurve;
use crate::topology::{parse_link_quality, parse_topology, Topology};
use crate::trace::{gaussian, synth_trace, Sample, SensorKind, SensorTrace, SynthSpec, Unit};
use crate::NodeId;

pub const TUNNEL_TOPOLOGY_CSV: &str = include_str!("../fixtures/tunnel_topology.csv");
pub const INTEL_TOPOLOGY_CSV: &str = include_str!("../fixtures/intel_topology.csv");
pub const INTEL_LINKS_CSV: &str = include_str!("../fixtures/intel_links.csv");
pub const HARVEST_CURVE_CSV: &str = include_str!("../fixtures/harvest_curve.csv");

/// Node ids exposed to sunlight at the tunnel entrance.
pub const TUNNEL_ENTRANCE_IDS: [u32; 6] = [1, 2, 3, 21, 22, 23];

pub fn tunnel_topology() -> Topology {
    parse_topology(TUNNEL_TOPOLOGY_CSV).expect("embedded tunnel fixture parses")
}

pub fn intel_topology() -> Topology {
    let topo = parse_topology(INTEL_TOPOLOGY_CSV).expect("embedded testbed fixture parses");
    let links = parse_link_quality(INTEL_LINKS_CSV).expect("embedded link fixture parses");
    topo.with_link_quality(links)
        .expect("embedded link qualities are valid")
}

pub fn default_harvest_curve() -> HarvestCurve {
    HarvestCurve::parse(HARVEST_CURVE_CSV).expect("embedded curve fixture parses")
}

/// Per-node synthesis profile for the tunnel: sunlit entrance nodes see a
/// strong diurnal swing, interior nodes see steady artificial light with
/// occasional lamp adjustments.
pub fn tunnel_synth_spec(node: NodeId, days: u32, seed: u64) -> SynthSpec {
    let node_seed = seed ^ (node.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    if TUNNEL_ENTRANCE_IDS.contains(&node.0) {
        SynthSpec {
            days,
            period_s: 30.0,
            base: 2500.0,
            diurnal_amplitude: 1800.0,
            noise_sigma: 3.0,
            step_events_per_day: 1.0,
            step_magnitude: 400.0,
            seed: node_seed,
        }
    } else {
        SynthSpec {
            days,
            period_s: 30.0,
            base: 400.0,
            diurnal_amplitude: 0.0,
            noise_sigma: 1.2,
            step_events_per_day: 0.3,
            step_magnitude: 60.0,
            seed: node_seed,
        }
    }
}

/// Synthesizes light traces for every non-sink tunnel node.
pub fn tunnel_traces(days: u32, seed: u64) -> BTreeMap<NodeId, SensorTrace> {
    let topo = tunnel_topology();
    topo.node_ids()
        .filter(|&n| n != topo.sink)
        .map(|n| {
            let spec = tunnel_synth_spec(n, days, seed);
            let trace = synth_trace(&spec, n, SensorKind::Light).expect("tunnel spec is valid");
            (n, trace)
        })
        .collect()
}

/// Seeded Gaussian random walk, 30 s period. Shared test input for oracle
/// comparisons.
pub fn random_walk_trace(seed: u64, n: usize, sigma: f64) -> SensorTrace {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v = 100.0;
    let samples = (0..n)
        .map(|i| {
            v += sigma * gaussian(&mut rng);
            Sample {
                t: i as f64 * 30.0,
                v,
            }
        })
        .collect();
    SensorTrace::new(NodeId(1), SensorKind::Light, Unit::Lux, 30.0, samples)
        .expect("walk samples are valid")
}
