//! Hardware catalog and the 23-row configuration matrix.
//!
//! Every power and timing constant the energy model uses lives here, so a
//! single override file can retarget the whole simulator. Values not
//! supplied by component datasheets (sampling duration, header reception,
//! MAC check burst) carry documented defaults and are equally overridable.

use thiserror::Error;

/// MCU power modes ordered from most to least retentive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McuMode {
    Standby,
    Sleep,
    Hibernation,
    /// Memory-less hibernation: nothing survives the wake-up.
    MlHibernation,
}

impl std::fmt::Display for McuMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            McuMode::Standby => "Standby",
            McuMode::Sleep => "Sleep",
            McuMode::Hibernation => "Hib.",
            McuMode::MlHibernation => "ML Hib.",
        })
    }
}

/// Idle mode of the data transceiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadioIdle {
    Lpm1,
    Lpm2,
    /// LPM2 plus hardware frame filtering.
    Lpm2Ff,
}

impl std::fmt::Display for RadioIdle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RadioIdle::Lpm1 => "LPM1",
            RadioIdle::Lpm2 => "LPM2",
            RadioIdle::Lpm2Ff => "LPM2+FF",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WurKind {
    Ultrasonic,
    Radio,
}

/// Wake-up receiver configuration of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wakeup {
    None,
    Us,
    UsAddressed,
    Radio,
    RadioAddressed,
}

impl Wakeup {
    pub fn kind(self) -> Option<WurKind> {
        match self {
            Wakeup::None => None,
            Wakeup::Us | Wakeup::UsAddressed => Some(WurKind::Ultrasonic),
            Wakeup::Radio | Wakeup::RadioAddressed => Some(WurKind::Radio),
        }
    }

    pub fn addressed(self) -> bool {
        matches!(self, Wakeup::UsAddressed | Wakeup::RadioAddressed)
    }
}

impl std::fmt::Display for Wakeup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Wakeup::None => "none",
            Wakeup::Us => "US",
            Wakeup::UsAddressed => "USa",
            Wakeup::Radio => "Radio",
            Wakeup::RadioAddressed => "Radioa",
        })
    }
}

/// Software running the prediction scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Software {
    /// Every sample is transmitted.
    NoDbp,
    /// Prediction runs on the main MCU.
    Dbp,
    /// Prediction runs on the dedicated sensing peripheral.
    Mbs,
}

impl std::fmt::Display for Software {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Software::NoDbp => "no-DBP",
            Software::Dbp => "DBP",
            Software::Mbs => "MBS",
        })
    }
}

/// MCU power/timing constants.
#[derive(Debug, Clone, PartialEq)]
pub struct McuSpec {
    pub active_processing_w: f64,
    /// MCU-side power while the node is transmitting.
    pub active_tx_context_w: f64,
    pub standby_w: f64,
    pub sleep_w: f64,
    pub hibernation_w: f64,
    pub wake_standby_s: f64,
    pub wake_sleep_s: f64,
    pub wake_hibernation_s: f64,
    pub wake_ml_hibernation_s: f64,
}

impl McuSpec {
    pub fn idle_power(&self, mode: McuMode) -> f64 {
        match mode {
            McuMode::Standby => self.standby_w,
            McuMode::Sleep => self.sleep_w,
            McuMode::Hibernation | McuMode::MlHibernation => self.hibernation_w,
        }
    }

    pub fn wake_s(&self, mode: McuMode) -> f64 {
        match mode {
            McuMode::Standby => self.wake_standby_s,
            McuMode::Sleep => self.wake_sleep_s,
            McuMode::Hibernation => self.wake_hibernation_s,
            McuMode::MlHibernation => self.wake_ml_hibernation_s,
        }
    }

    /// Whether the mode preserves (or restores) program state across a wake.
    pub fn retains_data(&self, mode: McuMode) -> bool {
        !matches!(mode, McuMode::MlHibernation)
    }
}

/// Data transceiver constants.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioSpec {
    pub lpm1_w: f64,
    pub lpm2_w: f64,
    pub rx_w: f64,
    /// TX power endpoints for linear interpolation in dBm.
    pub tx_min_dbm: f64,
    pub tx_min_w: f64,
    pub tx_max_dbm: f64,
    pub tx_max_w: f64,
    pub default_tx_dbm: f64,
    pub phy_rate_bps: f64,
    pub frame_bytes: u32,
    /// Floor when the transceiver is power-gated behind a wake-up receiver.
    pub deep_off_w: f64,
}

impl RadioSpec {
    /// TX power at an output level, linear between the published endpoints.
    pub fn tx_w_at_dbm(&self, dbm: f64) -> f64 {
        if self.tx_max_dbm == self.tx_min_dbm {
            return self.tx_min_w;
        }
        let frac = (dbm - self.tx_min_dbm) / (self.tx_max_dbm - self.tx_min_dbm);
        self.tx_min_w + frac * (self.tx_max_w - self.tx_min_w)
    }

    pub fn tx_w(&self) -> f64 {
        self.tx_w_at_dbm(self.default_tx_dbm)
    }
}

/// Wake-up receiver module constants.
#[derive(Debug, Clone, PartialEq)]
pub struct WurSpec {
    pub kind: WurKind,
    pub listen_w: f64,
    pub decode_w: f64,
    pub tx_standby_w: f64,
    pub tx_active_w: f64,
    pub trigger_s_broadcast: f64,
    pub trigger_s_addressed: f64,
    pub range_m: f64,
    pub throughput_bps: f64,
    pub radiation_pattern: &'static str,
    pub sensitivity_dbm: Option<f64>,
}

impl WurSpec {
    pub fn trigger_s(&self, addressed: bool) -> f64 {
        if addressed {
            self.trigger_s_addressed
        } else {
            self.trigger_s_broadcast
        }
    }
}

/// Dedicated sensing peripheral constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MbsSpec {
    pub sleep_w: f64,
    pub active_w: f64,
    /// Active duration per sample (digitize + model check).
    pub sample_active_s: f64,
    pub ram_bytes: u32,
    pub max_buffered_samples: u32,
}

/// Duty-cycled MAC timing used when no wake-up receiver is present.
#[derive(Debug, Clone, PartialEq)]
pub struct MacSpec {
    pub contikimac_interval_s: f64,
    /// RX burst per periodic channel check.
    pub channel_check_s: f64,
    /// Expected sender strobe duration before rendezvous.
    pub strobe_expected_s: f64,
}

/// Event durations that no datasheet pins down.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingSpec {
    /// MCU-side sampling duration.
    pub sample_s: f64,
    /// Partial reception length when frame filtering rejects a frame.
    pub header_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityUnit {
    PerCm2,
    PerCm3,
}

/// Indoor harvesting technology entry; catalog metadata only.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvesterCatalogEntry {
    pub technology: &'static str,
    pub density_low_uw: f64,
    pub density_high_uw: f64,
    pub unit: DensityUnit,
}

/// The full constants catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct HwCatalog {
    pub mcu: McuSpec,
    pub radio: RadioSpec,
    pub wur_us: WurSpec,
    pub wur_radio: WurSpec,
    pub mbs: MbsSpec,
    pub mac: MacSpec,
    pub timing: TimingSpec,
    pub harvesters: Vec<HarvesterCatalogEntry>,
}

impl HwCatalog {
    pub fn wur(&self, kind: WurKind) -> &WurSpec {
        match kind {
            WurKind::Ultrasonic => &self.wur_us,
            WurKind::Radio => &self.wur_radio,
        }
    }
}

/// The default catalog.
pub fn default_catalog() -> HwCatalog {
    HwCatalog {
        mcu: McuSpec {
            active_processing_w: 13e-3,
            active_tx_context_w: 66e-3,
            standby_w: 14.67e-6,
            sleep_w: 1.32e-6,
            hibernation_w: 0.36e-6,
            wake_standby_s: 25e-3,
            wake_sleep_s: 25e-3,
            wake_hibernation_s: 500e-3,
            wake_ml_hibernation_s: 27e-3,
        },
        radio: RadioSpec {
            lpm1_w: 3e-3,
            lpm2_w: 13.5e-6,
            rx_w: 69.9e-3,
            tx_min_dbm: -18.0,
            tx_min_w: 48.6e-3,
            tx_max_dbm: 5.0,
            tx_max_w: 100.8e-3,
            default_tx_dbm: 0.0,
            phy_rate_bps: 250_000.0,
            frame_bytes: 128,
            deep_off_w: 0.0,
        },
        wur_us: WurSpec {
            kind: WurKind::Ultrasonic,
            listen_w: 1640e-9,
            decode_w: 14e-6,
            tx_standby_w: 40e-9,
            tx_active_w: 37e-3,
            trigger_s_broadcast: 50e-3,
            trigger_s_addressed: 450e-3,
            range_m: 15.0,
            throughput_bps: 20.0,
            radiation_pattern: "55deg at -6dB",
            sensitivity_dbm: None,
        },
        wur_radio: WurSpec {
            kind: WurKind::Radio,
            listen_w: 462e-9,
            decode_w: 49e-6,
            tx_standby_w: 690e-9,
            tx_active_w: 78e-3,
            trigger_s_broadcast: 130e-6,
            trigger_s_addressed: 0.8e-3,
            range_m: 20.0,
            throughput_bps: 10_000.0,
            radiation_pattern: "omnidirectional",
            sensitivity_dbm: Some(-42.0),
        },
        mbs: MbsSpec {
            sleep_w: 36e-9,
            active_w: 10.8e-6,
            sample_active_s: 10e-3,
            ram_bytes: 1024,
            max_buffered_samples: 512,
        },
        mac: MacSpec {
            contikimac_interval_s: 0.1,
            channel_check_s: 1e-3,
            strobe_expected_s: 0.05,
        },
        timing: TimingSpec {
            sample_s: 5e-3,
            header_s: 0.5e-3,
        },
        harvesters: vec![
            HarvesterCatalogEntry {
                technology: "photovoltaic",
                density_low_uw: 0.0,
                density_high_uw: 10.0,
                unit: DensityUnit::PerCm2,
            },
            HarvesterCatalogEntry {
                technology: "electromagnetic",
                density_low_uw: 1.0,
                density_high_uw: 4.0,
                unit: DensityUnit::PerCm3,
            },
            HarvesterCatalogEntry {
                technology: "vibration (electrostatic)",
                density_low_uw: 3.8,
                density_high_uw: 3.8,
                unit: DensityUnit::PerCm2,
            },
            HarvesterCatalogEntry {
                technology: "radio frequency",
                density_low_uw: 0.1,
                density_high_uw: 0.1,
                unit: DensityUnit::PerCm2,
            },
            HarvesterCatalogEntry {
                technology: "acoustic noise",
                density_low_uw: 0.003,
                density_high_uw: 0.096,
                unit: DensityUnit::PerCm3,
            },
        ],
    }
}

/// One row of the configuration matrix plus the software mode evaluated on
/// it. Rows come from [`enumerate_configs`]; the sweep crosses each row with
/// every software mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HwConfig {
    pub id: u8,
    pub mcu_mode: McuMode,
    pub radio_idle: RadioIdle,
    pub wakeup: Wakeup,
    pub software: Software,
}

impl HwConfig {
    pub fn with_software(mut self, software: Software) -> Self {
        self.software = software;
        self
    }
}

/// The 23 hardware rows, in table order, with software defaulting to
/// [`Software::NoDbp`].
pub fn enumerate_configs() -> Vec<HwConfig> {
    use McuMode::*;
    use RadioIdle::*;
    use Wakeup::*;
    let rows: [(McuMode, RadioIdle, Wakeup); 23] = [
        (Standby, Lpm1, None),
        (Standby, Lpm2, None),
        (Standby, Lpm2Ff, None),
        (Sleep, Lpm2, None),
        (Sleep, Lpm2Ff, None),
        (Sleep, Lpm2, Us),
        (Sleep, Lpm2Ff, Us),
        (Sleep, Lpm2, UsAddressed),
        (Sleep, Lpm2, Radio),
        (Sleep, Lpm2Ff, Radio),
        (Sleep, Lpm2, RadioAddressed),
        (Hibernation, Lpm2, Us),
        (Hibernation, Lpm2Ff, Us),
        (Hibernation, Lpm2, UsAddressed),
        (Hibernation, Lpm2, Radio),
        (Hibernation, Lpm2Ff, Radio),
        (Hibernation, Lpm2, RadioAddressed),
        (MlHibernation, Lpm2, Us),
        (MlHibernation, Lpm2Ff, Us),
        (MlHibernation, Lpm2, UsAddressed),
        (MlHibernation, Lpm2, Radio),
        (MlHibernation, Lpm2Ff, Radio),
        (MlHibernation, Lpm2, RadioAddressed),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, &(mcu_mode, radio_idle, wakeup))| HwConfig {
            id: i as u8 + 1,
            mcu_mode,
            radio_idle,
            wakeup,
            software: Software::NoDbp,
        })
        .collect()
}

/// One event class the node must service, for utilization accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadEvent {
    pub rate_per_s: f64,
    /// Wall-clock unavailability per event, wake transition included.
    pub busy_s: f64,
}

/// Summary of what a node must sustain under a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub sampling_period_s: f64,
    pub events: Vec<WorkloadEvent>,
}

impl Workload {
    pub fn utilization(&self) -> f64 {
        self.events.iter().map(|e| e.rate_per_s * e.busy_s).sum()
    }
}

/// Feasibility verdict for a configuration under a workload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Ok,
    Infeasible { reason: String },
}

impl Feasibility {
    pub fn is_ok(&self) -> bool {
        matches!(self, Feasibility::Ok)
    }
}

/// Applies the feasibility rules:
///
/// 1. prediction software on the main MCU needs data retention, which
///    memory-less hibernation lacks;
/// 2. periodic reporting from hibernation must fit the event budget
///    (utilization below 1);
/// 3. without the sensing peripheral the MCU must wake faster than the
///    sampling period.
///
/// With the sensing peripheral every configuration is feasible: it buffers
/// samples, checks the model, and provides the auxiliary memory that makes
/// even memory-less hibernation workable.
pub fn feasible(config: &HwConfig, workload: &Workload, catalog: &HwCatalog) -> Feasibility {
    if config.software == Software::Mbs {
        return Feasibility::Ok;
    }
    if config.software == Software::Dbp && config.mcu_mode == McuMode::MlHibernation {
        return Feasibility::Infeasible {
            reason: "no data retention".into(),
        };
    }
    if config.software == Software::NoDbp
        && config.mcu_mode == McuMode::Hibernation
        && workload.utilization() >= 1.0
    {
        return Feasibility::Infeasible {
            reason: "utilization overrun".into(),
        };
    }
    if workload.sampling_period_s < catalog.mcu.wake_s(config.mcu_mode) {
        return Feasibility::Infeasible {
            reason: "wake-up slower than sampling period".into(),
        };
    }
    Feasibility::Ok
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown catalog key `{0}`")]
    UnknownKey(String),
}

impl HwCatalog {
    /// Applies `key = value` overrides. Keys are dotted paths with unit
    /// suffixes (`_w`, `_s`, `_bps`, `_dbm`), e.g. `mcu.sleep_w = 1.32e-6`
    /// or `radio.frame_bytes = 128`. Lines starting with `#` are comments.
    pub fn with_overrides(mut self, text: &str) -> Result<Self, CatalogError> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| CatalogError::Parse {
                line: lineno,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|e| CatalogError::Parse {
                line: lineno,
                message: format!("bad value for `{key}`: {e}"),
            })?;
            self.set(key, value)?;
        }
        Ok(self)
    }

    fn set(&mut self, key: &str, v: f64) -> Result<(), CatalogError> {
        let slot: &mut f64 = match key {
            "mcu.active_processing_w" => &mut self.mcu.active_processing_w,
            "mcu.active_tx_context_w" => &mut self.mcu.active_tx_context_w,
            "mcu.standby_w" => &mut self.mcu.standby_w,
            "mcu.sleep_w" => &mut self.mcu.sleep_w,
            "mcu.hibernation_w" => &mut self.mcu.hibernation_w,
            "mcu.wake_standby_s" => &mut self.mcu.wake_standby_s,
            "mcu.wake_sleep_s" => &mut self.mcu.wake_sleep_s,
            "mcu.wake_hibernation_s" => &mut self.mcu.wake_hibernation_s,
            "mcu.wake_ml_hibernation_s" => &mut self.mcu.wake_ml_hibernation_s,
            "radio.lpm1_w" => &mut self.radio.lpm1_w,
            "radio.lpm2_w" => &mut self.radio.lpm2_w,
            "radio.rx_w" => &mut self.radio.rx_w,
            "radio.tx_min_dbm" => &mut self.radio.tx_min_dbm,
            "radio.tx_min_w" => &mut self.radio.tx_min_w,
            "radio.tx_max_dbm" => &mut self.radio.tx_max_dbm,
            "radio.tx_max_w" => &mut self.radio.tx_max_w,
            "radio.default_tx_dbm" => &mut self.radio.default_tx_dbm,
            "radio.phy_rate_bps" => &mut self.radio.phy_rate_bps,
            "radio.frame_bytes" => {
                self.radio.frame_bytes = v as u32;
                return Ok(());
            }
            "radio.deep_off_w" => &mut self.radio.deep_off_w,
            "wur_us.listen_w" => &mut self.wur_us.listen_w,
            "wur_us.decode_w" => &mut self.wur_us.decode_w,
            "wur_us.tx_standby_w" => &mut self.wur_us.tx_standby_w,
            "wur_us.tx_active_w" => &mut self.wur_us.tx_active_w,
            "wur_us.trigger_s_broadcast" => &mut self.wur_us.trigger_s_broadcast,
            "wur_us.trigger_s_addressed" => &mut self.wur_us.trigger_s_addressed,
            "wur_radio.listen_w" => &mut self.wur_radio.listen_w,
            "wur_radio.decode_w" => &mut self.wur_radio.decode_w,
            "wur_radio.tx_standby_w" => &mut self.wur_radio.tx_standby_w,
            "wur_radio.tx_active_w" => &mut self.wur_radio.tx_active_w,
            "wur_radio.trigger_s_broadcast" => &mut self.wur_radio.trigger_s_broadcast,
            "wur_radio.trigger_s_addressed" => &mut self.wur_radio.trigger_s_addressed,
            "mbs.sleep_w" => &mut self.mbs.sleep_w,
            "mbs.active_w" => &mut self.mbs.active_w,
            "mbs.sample_active_s" => &mut self.mbs.sample_active_s,
            "mac.contikimac_interval_s" => &mut self.mac.contikimac_interval_s,
            "mac.channel_check_s" => &mut self.mac.channel_check_s,
            "mac.strobe_expected_s" => &mut self.mac.strobe_expected_s,
            "timing.sample_s" => &mut self.timing.sample_s,
            "timing.header_s" => &mut self.timing.header_s,
            other => return Err(CatalogError::UnknownKey(other.to_string())),
        };
        *slot = v;
        Ok(())
    }
}

/// Golden transcription of the configuration tables, used to pin
/// [`enumerate_configs`] against drift.
#[cfg(test)]
const CONFIG_FIXTURE: &str = "\
1,Standby,LPM1,none
2,Standby,LPM2,none
3,Standby,LPM2+FF,none
4,Sleep,LPM2,none
5,Sleep,LPM2+FF,none
6,Sleep,LPM2,US
7,Sleep,LPM2+FF,US
8,Sleep,LPM2,USa
9,Sleep,LPM2,Radio
10,Sleep,LPM2+FF,Radio
11,Sleep,LPM2,Radioa
12,Hib.,LPM2,US
13,Hib.,LPM2+FF,US
14,Hib.,LPM2,USa
15,Hib.,LPM2,Radio
16,Hib.,LPM2+FF,Radio
17,Hib.,LPM2,Radioa
18,ML Hib.,LPM2,US
19,ML Hib.,LPM2+FF,US
20,ML Hib.,LPM2,USa
21,ML Hib.,LPM2,Radio
22,ML Hib.,LPM2+FF,Radio
23,ML Hib.,LPM2,Radioa
";
