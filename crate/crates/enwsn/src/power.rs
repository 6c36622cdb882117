//! Per-node average power as a weighted sum over operating conditions.
//!
//! A node is either waiting in its configured low-power floor or servicing
//! one of four event classes: overhearing an unintended packet, receiving
//! and routing a packet, waking to sample and transmit, or waking to sample
//! and suppress. Average power is the floor plus `rate x energy` summed
//! over the event classes, with the occurrence rates taken from the actual
//! traffic the prediction layer leaves over.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dbp::{run_dbp, DbpError, DbpParams, DbpResult};
use crate::hw::{
    feasible, Feasibility, HwCatalog, HwConfig, RadioIdle, Software, Wakeup, Workload,
    WorkloadEvent, WurKind,
};
use crate::topology::{
    build_tree, node_loads, CollectionTree, NodeLoads, Topology, TopologyError,
};
use crate::trace::SensorTrace;
use crate::{fmt_sig, NodeId};

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("configuration infeasible: {reason}")]
    Infeasible { reason: String },
    #[error("software mode {0} needs a prediction result")]
    MissingDbpResult(Software),
    #[error("sampling period must be positive, got {0}")]
    BadPeriod(f64),
    #[error("no trace for node {0}")]
    MissingTrace(NodeId),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Dbp(#[from] DbpError),
}

/// Occurrence rates of the active operating conditions; waiting fills the
/// residual time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingConditionRates {
    pub overhear_per_s: f64,
    pub route_per_s: f64,
    pub sample_tx_per_s: f64,
    pub sample_only_per_s: f64,
    pub sampling_period_s: f64,
}

/// Event classes the node leaves the floor for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Overhear,
    Route,
    SampleTx,
    SampleOnly,
}

pub const EVENT_KINDS: [EventKind; 4] = [
    EventKind::Overhear,
    EventKind::Route,
    EventKind::SampleTx,
    EventKind::SampleOnly,
];

/// Energy and wall-clock cost of servicing one event.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EventEnergy {
    pub energy_j: f64,
    pub busy_s: f64,
}

impl EventEnergy {
    fn add(&mut self, power_w: f64, duration_s: f64) {
        self.energy_j += power_w * duration_s;
        self.busy_s += duration_s;
    }
}

/// Continuous power of the waiting state for a configuration.
///
/// Sums the MCU idle mode, the transceiver idle contribution (duty-cycled
/// channel checks without a wake-up receiver, power-gated floor with one),
/// the wake-up receiver's listen and transmitter-standby power, and the
/// sensing peripheral's sleep power when present.
pub fn floor_power(config: &HwConfig, catalog: &HwCatalog) -> f64 {
    let mcu = catalog.mcu.idle_power(config.mcu_mode);
    let radio = match config.wakeup {
        Wakeup::None => {
            let idle = match config.radio_idle {
                RadioIdle::Lpm1 => catalog.radio.lpm1_w,
                RadioIdle::Lpm2 | RadioIdle::Lpm2Ff => catalog.radio.lpm2_w,
            };
            let duty = catalog.mac.channel_check_s / catalog.mac.contikimac_interval_s;
            idle + catalog.radio.rx_w * duty
        }
        _ => catalog.radio.deep_off_w,
    };
    let wur = match config.wakeup.kind() {
        Some(kind) => {
            let w = catalog.wur(kind);
            w.listen_w + w.tx_standby_w
        }
        None => 0.0,
    };
    let mbs = if config.software == Software::Mbs {
        catalog.mbs.sleep_w
    } else {
        0.0
    };
    mcu + radio + wur + mbs
}

/// On-air duration of one data frame.
pub fn packet_airtime(catalog: &HwCatalog) -> f64 {
    8.0 * catalog.radio.frame_bytes as f64 / catalog.radio.phy_rate_bps
}

/// Energy for one event of `kind` under a configuration.
///
/// `link_tx_multiplier` scales the data transmission airtime by the expected
/// link-level transmissions of the node's uplink (1 without link qualities).
pub fn event_energy(
    config: &HwConfig,
    kind: EventKind,
    catalog: &HwCatalog,
    link_tx_multiplier: f64,
) -> EventEnergy {
    let mut e = EventEnergy::default();
    let airtime = packet_airtime(catalog);
    let wur = config.wakeup.kind().map(|k| catalog.wur(k));
    let addressed = config.wakeup.addressed();
    let ff = config.radio_idle == RadioIdle::Lpm2Ff;
    let tx_node_w = catalog.radio.tx_w() + catalog.mcu.active_tx_context_w;

    let mcu_wake = |e: &mut EventEnergy| {
        e.add(
            catalog.mcu.active_processing_w,
            catalog.mcu.wake_s(config.mcu_mode),
        );
    };
    let tx_chain = |e: &mut EventEnergy| {
        match wur {
            // trigger the next hop's wake-up receiver
            Some(w) => e.add(w.tx_active_w, w.trigger_s(addressed)),
            // strobe until the receiver's periodic channel check
            None => e.add(tx_node_w, catalog.mac.strobe_expected_s),
        }
        e.add(tx_node_w, link_tx_multiplier * airtime);
    };

    match kind {
        EventKind::SampleOnly => {
            if config.software == Software::Mbs {
                e.add(catalog.mbs.active_w, catalog.mbs.sample_active_s);
            } else {
                mcu_wake(&mut e);
                e.add(catalog.mcu.active_processing_w, catalog.timing.sample_s);
            }
        }
        EventKind::SampleTx => {
            if config.software == Software::Mbs {
                // the peripheral samples; the MCU boots only to transmit
                e.add(catalog.mbs.active_w, catalog.mbs.sample_active_s);
                mcu_wake(&mut e);
            } else {
                mcu_wake(&mut e);
                e.add(catalog.mcu.active_processing_w, catalog.timing.sample_s);
            }
            tx_chain(&mut e);
        }
        EventKind::Route => {
            if let Some(w) = wur {
                e.add(w.decode_w, w.trigger_s(addressed));
            }
            mcu_wake(&mut e);
            e.add(catalog.radio.rx_w, airtime);
            tx_chain(&mut e);
        }
        EventKind::Overhear => {
            if addressed {
                // the wake-up receiver decodes a foreign address; nothing wakes
                let w = wur.expect("addressed wake-up implies a receiver");
                e.add(w.decode_w, w.trigger_s(true));
            } else {
                if let Some(w) = wur {
                    e.add(w.decode_w, w.trigger_s(false));
                }
                if ff {
                    // frame filtering aborts after the header, MCU stays down
                    e.add(catalog.radio.rx_w, catalog.timing.header_s);
                } else {
                    mcu_wake(&mut e);
                    e.add(catalog.radio.rx_w, airtime);
                }
            }
        }
    }
    e
}

/// Derives per-condition occurrence rates for one node.
///
/// Without prediction every period transmits; with prediction (on the MCU
/// or on the sensing peripheral) the transmission rate is the model-update
/// rate over the observation horizon and the remainder of the periods
/// sample-and-suppress.
pub fn condition_rates(
    loads: &NodeLoads,
    dbp: Option<&DbpResult>,
    sampling_period_s: f64,
    software: Software,
) -> Result<OperatingConditionRates, PowerError> {
    if sampling_period_s <= 0.0 || sampling_period_s.is_nan() {
        return Err(PowerError::BadPeriod(sampling_period_s));
    }
    let sample_rate = 1.0 / sampling_period_s;
    let (sample_tx, sample_only) = match software {
        Software::NoDbp => (sample_rate, 0.0),
        Software::Dbp | Software::Mbs => {
            let result = dbp.ok_or(PowerError::MissingDbpResult(software))?;
            let horizon = result.samples_total as f64 * sampling_period_s;
            let tx = result.transmissions as f64 / horizon;
            (tx, sample_rate - tx)
        }
    };
    Ok(OperatingConditionRates {
        overhear_per_s: loads.overheard_per_s,
        route_per_s: loads.intended_rx_per_s,
        sample_tx_per_s: sample_tx,
        sample_only_per_s: sample_only,
        sampling_period_s,
    })
}

/// Average power split by operating condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    pub floor_w: f64,
    pub overhear_w: f64,
    pub route_w: f64,
    pub sample_tx_w: f64,
    pub sample_only_w: f64,
    pub total_w: f64,
    /// Baseline total over this total; filled by the sweep.
    pub ratio: Option<f64>,
}

impl PowerBreakdown {
    pub fn contribution(&self, kind: EventKind) -> f64 {
        match kind {
            EventKind::Overhear => self.overhear_w,
            EventKind::Route => self.route_w,
            EventKind::SampleTx => self.sample_tx_w,
            EventKind::SampleOnly => self.sample_only_w,
        }
    }
}

/// Builds the utilization workload from the same event durations the energy
/// model bills, so feasibility and energy accounting cannot drift apart.
pub fn workload_for(
    config: &HwConfig,
    rates: &OperatingConditionRates,
    catalog: &HwCatalog,
    link_tx_multiplier: f64,
) -> Workload {
    let events = EVENT_KINDS
        .iter()
        .map(|&kind| WorkloadEvent {
            rate_per_s: rate_of(rates, kind),
            busy_s: event_energy(config, kind, catalog, link_tx_multiplier).busy_s,
        })
        .collect();
    Workload {
        sampling_period_s: rates.sampling_period_s,
        events,
    }
}

fn rate_of(rates: &OperatingConditionRates, kind: EventKind) -> f64 {
    match kind {
        EventKind::Overhear => rates.overhear_per_s,
        EventKind::Route => rates.route_per_s,
        EventKind::SampleTx => rates.sample_tx_per_s,
        EventKind::SampleOnly => rates.sample_only_per_s,
    }
}

/// Average node power for a feasible configuration.
pub fn node_power(
    config: &HwConfig,
    rates: &OperatingConditionRates,
    catalog: &HwCatalog,
    link_tx_multiplier: f64,
) -> Result<PowerBreakdown, PowerError> {
    let workload = workload_for(config, rates, catalog, link_tx_multiplier);
    if let Feasibility::Infeasible { reason } = feasible(config, &workload, catalog) {
        return Err(PowerError::Infeasible { reason });
    }
    let floor = floor_power(config, catalog);
    let part = |kind| {
        rate_of(rates, kind) * event_energy(config, kind, catalog, link_tx_multiplier).energy_j
    };
    let overhear = part(EventKind::Overhear);
    let route = part(EventKind::Route);
    let sample_tx = part(EventKind::SampleTx);
    let sample_only = part(EventKind::SampleOnly);
    Ok(PowerBreakdown {
        floor_w: floor,
        overhear_w: overhear,
        route_w: route,
        sample_tx_w: sample_tx,
        sample_only_w: sample_only,
        total_w: floor + overhear + route + sample_tx + sample_only,
        ratio: None,
    })
}

/// Per-node traffic summary after running prediction over its trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTraffic {
    pub period_s: f64,
    pub samples_total: usize,
    pub transmissions: usize,
}

impl NodeTraffic {
    pub fn horizon_s(&self) -> f64 {
        self.samples_total as f64 * self.period_s
    }
}

/// A network plus the per-node prediction outcomes: everything the sweep
/// needs that does not depend on the hardware configuration.
#[derive(Debug, Clone)]
pub struct NetworkScenario {
    pub topology: Topology,
    pub tree: CollectionTree,
    pub traffic: BTreeMap<NodeId, NodeTraffic>,
    /// Prediction window length; the sensing peripheral must be able to
    /// buffer it.
    pub window_m: usize,
}

impl NetworkScenario {
    /// Runs prediction over every non-sink node's trace and builds the
    /// collection tree.
    pub fn new(
        topology: Topology,
        traces: &BTreeMap<NodeId, SensorTrace>,
        params: &DbpParams,
    ) -> Result<Self, PowerError> {
        let tree = build_tree(&topology)?;
        let mut traffic = BTreeMap::new();
        for n in topology.node_ids() {
            if n == topology.sink {
                continue;
            }
            let trace = traces.get(&n).ok_or(PowerError::MissingTrace(n))?;
            let result = run_dbp(trace, params)?;
            traffic.insert(
                n,
                NodeTraffic {
                    period_s: trace.period_s,
                    samples_total: result.samples_total,
                    transmissions: result.transmissions,
                },
            );
        }
        Ok(NetworkScenario {
            topology,
            tree,
            traffic,
            window_m: params.m,
        })
    }

    /// Per-node packet rates under a software mode. All nodes' own rates are
    /// fixed before loads are derived, so overhearing sees a consistent
    /// network state.
    pub fn tx_rates(&self, software: Software) -> BTreeMap<NodeId, f64> {
        self.traffic
            .iter()
            .map(|(&n, t)| {
                let rate = match software {
                    Software::NoDbp => 1.0 / t.period_s,
                    Software::Dbp | Software::Mbs => t.transmissions as f64 / t.horizon_s(),
                };
                (n, rate)
            })
            .collect()
    }

    pub fn loads(&self, software: Software) -> Result<BTreeMap<NodeId, NodeLoads>, PowerError> {
        Ok(node_loads(
            &self.tree,
            &self.topology,
            &self.tx_rates(software),
        )?)
    }

    fn rates_for(
        &self,
        node: NodeId,
        loads: &NodeLoads,
        software: Software,
    ) -> Result<OperatingConditionRates, PowerError> {
        let t = &self.traffic[&node];
        let summary = DbpResult::from_counts(t.samples_total, t.transmissions);
        let dbp = match software {
            Software::NoDbp => None,
            _ => Some(&summary),
        };
        condition_rates(loads, dbp, t.period_s, software)
    }

    /// Network model-update rate in transmissions per hour, aggregated over
    /// all nodes.
    pub fn aggregate_model_rate_per_hour(&self) -> f64 {
        self.traffic
            .values()
            .map(|t| t.transmissions as f64 * 3600.0 / t.horizon_s())
            .sum()
    }

    /// Mean suppression across nodes, weighted by sample count.
    pub fn aggregate_suppression(&self) -> f64 {
        let samples: usize = self.traffic.values().map(|t| t.samples_total).sum();
        let tx: usize = self.traffic.values().map(|t| t.transmissions).sum();
        1.0 - tx as f64 / samples as f64
    }
}

/// One evaluated sweep cell.
#[derive(Debug, Clone)]
pub enum CellOutcome {
    Ok {
        avg_w: f64,
        ratio: Option<f64>,
        per_node: Vec<(NodeId, PowerBreakdown)>,
    },
    Infeasible {
        reason: String,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub config: HwConfig,
    pub outcome: CellOutcome,
}

/// The full configuration/software matrix evaluation.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub modes: Vec<Software>,
    pub cells: Vec<SweepCell>,
    /// Network-average power of the ratio baseline (ID 1, periodic
    /// reporting), evaluated regardless of the selected modes.
    pub baseline_w: Option<f64>,
}

fn evaluate_cell(
    scenario: &NetworkScenario,
    loads: &BTreeMap<NodeId, NodeLoads>,
    config: &HwConfig,
    catalog: &HwCatalog,
) -> CellOutcome {
    let mut per_node = Vec::new();
    for (&n, load) in loads {
        let rates = match scenario.rates_for(n, load, config.software) {
            Ok(r) => r,
            Err(e) => {
                return CellOutcome::Error {
                    message: e.to_string(),
                }
            }
        };
        match node_power(config, &rates, catalog, load.link_tx_multiplier) {
            Ok(breakdown) => per_node.push((n, breakdown)),
            Err(PowerError::Infeasible { reason }) => {
                return CellOutcome::Infeasible { reason }
            }
            Err(e) => {
                return CellOutcome::Error {
                    message: e.to_string(),
                }
            }
        }
    }
    if per_node.is_empty() {
        return CellOutcome::Error {
            message: "no non-sink nodes".into(),
        };
    }
    let avg_w = per_node.iter().map(|(_, b)| b.total_w).sum::<f64>() / per_node.len() as f64;
    CellOutcome::Ok {
        avg_w,
        ratio: None,
        per_node,
    }
}

/// Evaluates every configuration row under every requested software mode.
/// Per-cell failures land in the cell; other cells are unaffected.
pub fn sweep(scenario: &NetworkScenario, modes: &[Software], catalog: &HwCatalog) -> SweepTable {
    let mut loads_by_mode: BTreeMap<Software, BTreeMap<NodeId, NodeLoads>> = BTreeMap::new();
    let mut loads_err: BTreeMap<Software, String> = BTreeMap::new();
    let all_modes: Vec<Software> = {
        let mut m = modes.to_vec();
        if !m.contains(&Software::NoDbp) {
            m.push(Software::NoDbp); // always needed for the baseline
        }
        m
    };
    for &mode in &all_modes {
        match scenario.loads(mode) {
            Ok(l) => {
                loads_by_mode.insert(mode, l);
            }
            Err(e) => {
                loads_err.insert(mode, e.to_string());
            }
        }
    }

    let configs = crate::hw::enumerate_configs();
    let baseline_w = loads_by_mode.get(&Software::NoDbp).and_then(|loads| {
        match evaluate_cell(scenario, loads, &configs[0], catalog) {
            CellOutcome::Ok { avg_w, .. } => Some(avg_w),
            _ => None,
        }
    });

    let mut cells = Vec::with_capacity(configs.len() * modes.len());
    for row in &configs {
        for &mode in modes {
            let config = row.with_software(mode);
            if mode == Software::Mbs && scenario.window_m > catalog.mbs.max_buffered_samples as usize
            {
                cells.push(SweepCell {
                    config,
                    outcome: CellOutcome::Error {
                        message: format!(
                            "prediction window of {} samples exceeds the peripheral buffer of {}",
                            scenario.window_m, catalog.mbs.max_buffered_samples
                        ),
                    },
                });
                continue;
            }
            let outcome = match loads_by_mode.get(&mode) {
                Some(loads) => {
                    let mut outcome = evaluate_cell(scenario, loads, &config, catalog);
                    if let (CellOutcome::Ok { avg_w, ratio, .. }, Some(base)) =
                        (&mut outcome, baseline_w)
                    {
                        *ratio = Some(base / *avg_w);
                    }
                    outcome
                }
                None => CellOutcome::Error {
                    message: loads_err[&mode].clone(),
                },
            };
            cells.push(SweepCell { config, outcome });
        }
    }
    SweepTable {
        modes: modes.to_vec(),
        cells,
        baseline_w,
    }
}

impl SweepTable {
    pub fn cell(&self, id: u8, software: Software) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.config.id == id && c.config.software == software)
    }

    /// Keeps only the rows with the given id (for `--only-id`).
    pub fn filter_id(&self, id: u8) -> SweepTable {
        SweepTable {
            modes: self.modes.clone(),
            cells: self
                .cells
                .iter()
                .filter(|c| c.config.id == id)
                .cloned()
                .collect(),
            baseline_w: self.baseline_w,
        }
    }

    /// `id,mcu,radio,wakeup,software,avg_uw,ratio,status` per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,mcu,radio,wakeup,software,avg_uw,ratio,status\n");
        for cell in &self.cells {
            let c = &cell.config;
            let (avg, ratio, status) = match &cell.outcome {
                CellOutcome::Ok { avg_w, ratio, .. } => (
                    fmt_sig(avg_w * 1e6, 6),
                    ratio.map_or(String::new(), |r| fmt_sig(r, 6)),
                    "ok".to_string(),
                ),
                CellOutcome::Infeasible { reason } => {
                    (String::new(), String::new(), format!("infeasible: {reason}"))
                }
                CellOutcome::Error { message } => {
                    (String::new(), String::new(), format!("error: {message}"))
                }
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.id, c.mcu_mode, c.radio_idle, c.wakeup, c.software, avg, ratio, status
            ));
        }
        out
    }

    /// Aligned text table shaped like the published results tables, one row
    /// per hardware configuration with a `[uW] / ratio` column pair per
    /// software mode. Infeasible cells print `-` and are footnoted.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>2}  {:<8} {:<16} {:<7}",
            "ID", "MCU", "Data Transceiver", "Wake-Up"
        ));
        for mode in &self.modes {
            out.push_str(&format!(" | {:>10} {:>7}", format!("{mode} [uW]"), "Ratio"));
        }
        out.push('\n');
        let mut footnotes = Vec::new();
        for row_id in self.cells.iter().map(|c| c.config.id).collect::<std::collections::BTreeSet<_>>() {
            let first = self
                .cells
                .iter()
                .find(|c| c.config.id == row_id)
                .expect("row exists");
            let c = &first.config;
            out.push_str(&format!(
                "{:>2}  {:<8} {:<16} {:<7}",
                c.id,
                c.mcu_mode.to_string(),
                c.radio_idle.to_string(),
                c.wakeup.to_string()
            ));
            for &mode in &self.modes {
                match self.cell(row_id, mode).map(|cell| &cell.outcome) {
                    Some(CellOutcome::Ok { avg_w, ratio, .. }) => {
                        let ratio_s = ratio.map_or("-".to_string(), format_ratio);
                        out.push_str(&format!(
                            " | {:>10} {:>7}",
                            format_uw(avg_w * 1e6),
                            ratio_s
                        ));
                    }
                    Some(CellOutcome::Infeasible { reason }) => {
                        footnotes.push(format!("ID {row_id} {mode} infeasible: {reason}"));
                        out.push_str(&format!(" | {:>10} {:>7}", "-", "-"));
                    }
                    Some(CellOutcome::Error { message }) => {
                        footnotes.push(format!("ID {row_id} {mode} error: {message}"));
                        out.push_str(&format!(" | {:>10} {:>7}", "!", "!"));
                    }
                    None => out.push_str(&format!(" | {:>10} {:>7}", "?", "?")),
                }
            }
            out.push('\n');
        }
        for note in footnotes {
            out.push_str(&format!("# {note}\n"));
        }
        out
    }
}

fn format_uw(uw: f64) -> String {
    if uw >= 100.0 {
        format!("{uw:.0}")
    } else if uw >= 10.0 {
        format!("{uw:.1}")
    } else {
        format!("{uw:.2}")
    }
}

fn format_ratio(r: f64) -> String {
    if r >= 10.0 {
        format!("{r:.0}x")
    } else {
        format!("{r:.1}x")
    }
}

/// Min/avg/max percentage power reduction of peripheral sensing over
/// MCU-side prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavingsSummary {
    pub min_pct: f64,
    pub avg_pct: f64,
    pub max_pct: f64,
}

/// Per-node savings of the sensing peripheral vs MCU-side prediction,
/// aggregated over the configuration rows using the given wake-up kind.
/// Returns `None` when no row has both software columns feasible.
pub fn mbs_savings(table: &SweepTable, kind: WurKind) -> Option<SavingsSummary> {
    let mut savings = Vec::new();
    let ids: std::collections::BTreeSet<u8> = table
        .cells
        .iter()
        .filter(|c| c.config.wakeup.kind() == Some(kind))
        .map(|c| c.config.id)
        .collect();
    for id in ids {
        let dbp = table.cell(id, Software::Dbp);
        let mbs = table.cell(id, Software::Mbs);
        if let (
            Some(SweepCell {
                outcome: CellOutcome::Ok { per_node: pd, .. },
                ..
            }),
            Some(SweepCell {
                outcome: CellOutcome::Ok { per_node: pm, .. },
                ..
            }),
        ) = (dbp, mbs)
        {
            for ((_, d), (_, m)) in pd.iter().zip(pm) {
                savings.push(100.0 * (1.0 - m.total_w / d.total_w));
            }
        }
    }
    if savings.is_empty() {
        return None;
    }
    let min = savings.iter().copied().fold(f64::MAX, f64::min);
    let max = savings.iter().copied().fold(f64::MIN, f64::max);
    let avg = savings.iter().sum::<f64>() / savings.len() as f64;
    Some(SavingsSummary {
        min_pct: min,
        avg_pct: avg,
        max_pct: max,
    })
}
