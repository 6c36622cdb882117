//! Sensor time-series ingestion, synthesis and calibration.
//!
//! Traces are ordered `(t, v)` samples with timestamps in seconds from a
//! dataset-local epoch. Gaps larger than the jitter tolerance are recorded
//! as holes, never interpolated; downstream consumers see the sample stream
//! as-is.

use std::collections::BTreeMap;

use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::{fmt_exact, fmt_sig, NodeId};

/// Physical quantity a trace measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorKind {
    Light,
    Temperature,
    Humidity,
}

/// Engineering unit of the sample values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Lux,
    Celsius,
    RhPercent,
    Raw,
}

impl SensorKind {
    /// The calibrated unit for this kind; `Raw` is accepted for any kind.
    pub fn engineering_unit(self) -> Unit {
        match self {
            SensorKind::Light => Unit::Lux,
            SensorKind::Temperature => Unit::Celsius,
            SensorKind::Humidity => Unit::RhPercent,
        }
    }

    pub fn accepts(self, unit: Unit) -> bool {
        unit == Unit::Raw || unit == self.engineering_unit()
    }
}

/// One timestamped measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Seconds since the dataset-local epoch.
    pub t: f64,
    /// Measured value in the trace unit.
    pub v: f64,
}

/// A sampling gap wider than the jitter tolerance, located after
/// `samples[after_index]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hole {
    pub after_index: usize,
    pub gap_s: f64,
}

/// Validated sensor time series for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    pub node_id: NodeId,
    pub kind: SensorKind,
    pub unit: Unit,
    /// Nominal sampling period in seconds.
    pub period_s: f64,
    pub samples: Vec<Sample>,
    /// Gaps exceeding the jitter tolerance, in sample order.
    pub holes: Vec<Hole>,
    /// Input records discarded during parsing (missing fields, NaN values,
    /// repeated timestamps in the raw dataset).
    pub dropped_records: usize,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate timestamp {t}")]
    DuplicateTimestamp { t: f64 },
    #[error("trace has no samples")]
    Empty,
    #[error("unit {unit:?} is not valid for sensor kind {kind:?}")]
    UnitMismatch { kind: SensorKind, unit: Unit },
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("calibration error: {0}")]
    Calibration(#[from] CalibrationError),
    #[error("calibration input must have unit raw, got {0:?}")]
    NotRaw(Unit),
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration needs at least 2 breakpoints, got {0}")]
    TooFewBreakpoints(usize),
    #[error("calibration raw values must be strictly increasing at index {0}")]
    RawNotIncreasing(usize),
    #[error("calibration map must be monotone non-decreasing at index {0}")]
    NotMonotone(usize),
}

/// Fraction of the nominal period that adjacent timestamps may deviate by
/// before the gap counts as a hole.
pub const DEFAULT_JITTER_FRACTION: f64 = 0.5;

impl SensorTrace {
    /// Validates raw samples into a trace: sorts by timestamp (stable),
    /// rejects duplicates and empty input, and records holes against the
    /// nominal period with the default jitter tolerance.
    pub fn new(
        node_id: NodeId,
        kind: SensorKind,
        unit: Unit,
        period_s: f64,
        mut samples: Vec<Sample>,
    ) -> Result<Self, TraceError> {
        if !kind.accepts(unit) {
            return Err(TraceError::UnitMismatch { kind, unit });
        }
        if samples.is_empty() {
            return Err(TraceError::Empty);
        }
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        for pair in samples.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(TraceError::DuplicateTimestamp { t: pair[1].t });
            }
        }
        let holes = find_holes(&samples, period_s, DEFAULT_JITTER_FRACTION);
        Ok(SensorTrace {
            node_id,
            kind,
            unit,
            period_s,
            samples,
            holes,
            dropped_records: 0,
        })
    }

    pub fn first_t(&self) -> f64 {
        self.samples[0].t
    }

    pub fn last_t(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Observation horizon: one nominal period per sample.
    pub fn horizon_s(&self) -> f64 {
        self.samples.len() as f64 * self.period_s
    }

    /// Renders the trace in the `t,v` CSV format. Timestamps keep full
    /// precision; values are rounded to 6 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v\n");
        for s in &self.samples {
            out.push_str(&fmt_exact(s.t));
            out.push(',');
            out.push_str(&fmt_sig(s.v, 6));
            out.push('\n');
        }
        out
    }
}

fn find_holes(samples: &[Sample], period_s: f64, jitter_fraction: f64) -> Vec<Hole> {
    let tol = jitter_fraction * period_s;
    samples
        .windows(2)
        .enumerate()
        .filter_map(|(i, pair)| {
            let gap = pair[1].t - pair[0].t;
            if (gap - period_s).abs() > tol {
                Some(Hole {
                    after_index: i,
                    gap_s: gap,
                })
            } else {
                None
            }
        })
        .collect()
}

/// Median of adjacent timestamp deltas; nominal period for parsed traces.
fn infer_period(samples: &[Sample]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let mut deltas: Vec<f64> = samples.windows(2).map(|p| p[1].t - p[0].t).collect();
    deltas.sort_by(f64::total_cmp);
    deltas[deltas.len() / 2]
}

/// Parses the `t,v` CSV trace format.
///
/// The header line must be exactly `t,v`. The nominal period is inferred as
/// the median timestamp delta.
pub fn parse_trace(
    text: &str,
    node_id: NodeId,
    kind: SensorKind,
    unit: Unit,
) -> Result<SensorTrace, TraceError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "t,v" => {}
        Some((_, h)) => {
            return Err(TraceError::Parse {
                line: 1,
                message: format!("expected header `t,v`, got `{h}`"),
            })
        }
        None => return Err(TraceError::Empty),
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let (t_str, v_str) = line.split_once(',').ok_or_else(|| TraceError::Parse {
            line: lineno,
            message: format!("expected `t,v` record, got `{line}`"),
        })?;
        let t: f64 = t_str.trim().parse().map_err(|e| TraceError::Parse {
            line: lineno,
            message: format!("bad timestamp `{t_str}`: {e}"),
        })?;
        let v: f64 = v_str.trim().parse().map_err(|e| TraceError::Parse {
            line: lineno,
            message: format!("bad value `{v_str}`: {e}"),
        })?;
        samples.push(Sample { t, v });
    }
    if samples.is_empty() {
        return Err(TraceError::Empty);
    }
    let period = infer_period(&samples);
    SensorTrace::new(node_id, kind, unit, period, samples)
}

/// Result of parsing an Intel-lab style raw dataset.
#[derive(Debug)]
pub struct IntelLabData {
    pub traces: BTreeMap<NodeId, SensorTrace>,
    /// Records dropped because the selected column was missing or NaN, or
    /// because a mote repeated a timestamp.
    pub dropped_records: usize,
}

/// Parses the Intel Berkeley lab raw format: whitespace-separated records
/// `date time epoch moteid temperature humidity light voltage`.
///
/// `kind` selects which column becomes the sample value. Timestamps are
/// converted to seconds from the first timestamp in the file. Records whose
/// selected column is missing or NaN are dropped and counted; repeated
/// timestamps within a mote keep the first record.
pub fn parse_intel_lab(text: &str, kind: SensorKind) -> Result<IntelLabData, TraceError> {
    let column = match kind {
        SensorKind::Temperature => 4,
        SensorKind::Humidity => 5,
        SensorKind::Light => 6,
    };
    let mut dropped = 0usize;
    let mut per_mote: BTreeMap<NodeId, Vec<Sample>> = BTreeMap::new();
    let mut epoch0: Option<f64> = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 4 {
            dropped += 1;
            continue;
        }
        let mote: u32 = fields[3].parse().map_err(|_| TraceError::Parse {
            line: lineno,
            message: format!("bad mote id `{}`", fields[3]),
        })?;
        let stamp = parse_datetime(fields[0], fields[1]).ok_or_else(|| TraceError::Parse {
            line: lineno,
            message: format!("bad timestamp `{} {}`", fields[0], fields[1]),
        })?;
        let t0 = *epoch0.get_or_insert(stamp);
        let v = fields
            .get(column)
            .and_then(|f| f.parse::<f64>().ok())
            .filter(|v| v.is_finite());
        match v {
            Some(v) => per_mote
                .entry(NodeId(mote))
                .or_default()
                .push(Sample { t: stamp - t0, v }),
            None => dropped += 1,
        }
    }
    let mut traces = BTreeMap::new();
    for (mote, mut samples) in per_mote {
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut mote_drops = 0usize;
        samples.dedup_by(|next, prev| {
            let dup = next.t == prev.t;
            if dup {
                mote_drops += 1;
            }
            dup
        });
        dropped += mote_drops;
        let period = infer_period(&samples);
        let mut trace = SensorTrace::new(mote, kind, kind.engineering_unit(), period, samples)?;
        trace.dropped_records = mote_drops;
        traces.insert(mote, trace);
    }
    if traces.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(IntelLabData {
        traces,
        dropped_records: dropped,
    })
}

fn parse_datetime(date: &str, time: &str) -> Option<f64> {
    use chrono::{NaiveDate, NaiveTime};
    let d = NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?;
    let t = NaiveTime::parse_from_str(time, "%H:%M:%S%.f").ok()?;
    let dt = d.and_time(t);
    let base = NaiveDate::from_ymd_opt(2000, 1, 1)?.and_hms_opt(0, 0, 0)?;
    let delta = dt - base;
    Some(delta.num_nanoseconds()? as f64 / 1e9)
}

/// Specification of a synthetic trace: diurnal sinusoid plus Gaussian noise
/// plus Poisson-scheduled level shifts.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub days: u32,
    pub period_s: f64,
    pub base: f64,
    pub diurnal_amplitude: f64,
    pub noise_sigma: f64,
    /// Expected number of abrupt level shifts per day.
    pub step_events_per_day: f64,
    pub step_magnitude: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<(), TraceError> {
        if self.days < 1 {
            return Err(TraceError::InvalidSpec("days must be >= 1".into()));
        }
        if self.period_s <= 0.0 || self.period_s.is_nan() {
            return Err(TraceError::InvalidSpec("period_s must be > 0".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(TraceError::InvalidSpec("noise_sigma must be >= 0".into()));
        }
        if self.step_events_per_day < 0.0 {
            return Err(TraceError::InvalidSpec(
                "step_events_per_day must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Deterministic uniform in [0, 1) from the top 53 bits of a ChaCha8 word.
pub(crate) fn uniform(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Uniform in (0, 1] — safe as a log argument.
pub(crate) fn uniform_open(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
}

/// One standard Gaussian draw (Box-Muller, cosine branch).
pub(crate) fn gaussian(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let u1 = uniform_open(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Synthesizes a trace from `spec`.
///
/// The generator is pinned for reproducibility across ports: ChaCha8 keyed
/// by the 64-bit seed; first the step schedule is drawn (exponential
/// inter-arrival times by inverse CDF, then one uniform per event for the
/// sign), then one Gaussian per sample via Box-Muller (two 53-bit uniforms,
/// cosine branch).
pub fn synth_trace(spec: &SynthSpec, node_id: NodeId, kind: SensorKind) -> Result<SensorTrace, TraceError> {
    spec.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let horizon = spec.days as f64 * SECONDS_PER_DAY;

    let mut steps: Vec<(f64, f64)> = Vec::new();
    if spec.step_events_per_day > 0.0 {
        let rate = spec.step_events_per_day / SECONDS_PER_DAY;
        let mut t = 0.0;
        loop {
            t += -uniform_open(&mut rng).ln() / rate;
            if t > horizon {
                break;
            }
            let sign = if uniform(&mut rng) < 0.5 { 1.0 } else { -1.0 };
            steps.push((t, sign * spec.step_magnitude));
        }
    }

    let n = (horizon / spec.period_s).round() as usize;
    let mut samples = Vec::with_capacity(n);
    let mut offset = 0.0;
    let mut next_step = 0usize;
    for i in 0..n {
        let t = i as f64 * spec.period_s;
        while next_step < steps.len() && steps[next_step].0 <= t {
            offset += steps[next_step].1;
            next_step += 1;
        }
        let noise = if spec.noise_sigma > 0.0 {
            spec.noise_sigma * gaussian(&mut rng)
        } else {
            0.0
        };
        let v = spec.base
            + spec.diurnal_amplitude * (2.0 * std::f64::consts::PI * t / SECONDS_PER_DAY).sin()
            + noise
            + offset;
        samples.push(Sample { t, v });
    }
    SensorTrace::new(node_id, kind, kind.engineering_unit(), spec.period_s, samples)
}

/// Monotone piecewise-linear map from raw sensor readings to an engineering
/// unit, clamped at both ends.
#[derive(Debug, Clone)]
pub struct Calibration {
    breakpoints: Vec<(f64, f64)>,
}

impl Calibration {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, CalibrationError> {
        if breakpoints.len() < 2 {
            return Err(CalibrationError::TooFewBreakpoints(breakpoints.len()));
        }
        for (i, pair) in breakpoints.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(CalibrationError::RawNotIncreasing(i + 1));
            }
            if pair[1].1 < pair[0].1 {
                return Err(CalibrationError::NotMonotone(i + 1));
            }
        }
        Ok(Calibration { breakpoints })
    }

    /// Parses the `raw,value` CSV calibration format (optional header).
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "raw,value" {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| TraceError::Parse {
                line: idx + 1,
                message: format!("expected `raw,value`, got `{line}`"),
            })?;
            let raw: f64 = a.trim().parse().map_err(|e| TraceError::Parse {
                line: idx + 1,
                message: format!("bad raw value: {e}"),
            })?;
            let val: f64 = b.trim().parse().map_err(|e| TraceError::Parse {
                line: idx + 1,
                message: format!("bad engineering value: {e}"),
            })?;
            points.push((raw, val));
        }
        Ok(Calibration::new(points)?)
    }

    /// Piecewise-linear interpolation, clamped at both ends.
    pub fn map(&self, raw: f64) -> f64 {
        let bp = &self.breakpoints;
        if raw <= bp[0].0 {
            return bp[0].1;
        }
        if raw >= bp[bp.len() - 1].0 {
            return bp[bp.len() - 1].1;
        }
        let i = bp.partition_point(|p| p.0 <= raw);
        let (x0, y0) = bp[i - 1];
        let (x1, y1) = bp[i];
        y0 + (y1 - y0) * (raw - x0) / (x1 - x0)
    }
}

/// Maps a raw trace through `cal`; the unit becomes the kind's engineering
/// unit.
pub fn apply_calibration(trace: &SensorTrace, cal: &Calibration) -> Result<SensorTrace, TraceError> {
    if trace.unit != Unit::Raw {
        return Err(TraceError::NotRaw(trace.unit));
    }
    let samples = trace
        .samples
        .iter()
        .map(|s| Sample {
            t: s.t,
            v: cal.map(s.v),
        })
        .collect();
    Ok(SensorTrace {
        node_id: trace.node_id,
        kind: trace.kind,
        unit: trace.kind.engineering_unit(),
        period_s: trace.period_s,
        samples,
        holes: trace.holes.clone(),
        dropped_records: trace.dropped_records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn light(text: &str) -> Result<SensorTrace, TraceError> {
        parse_trace(text, NodeId(1), SensorKind::Light, Unit::Lux)
    }

    #[test]
    fn parses_two_sample_trace_and_infers_period() {
        let tr = light("t,v\n0,100\n30,100").unwrap();
        assert_eq!(tr.samples.len(), 2);
        assert_eq!(tr.period_s, 30.0);
        assert!(tr.holes.is_empty());
    }

    #[test]
    fn duplicate_timestamp_is_a_validation_error() {
        let err = light("t,v\n0,100\n0,101").unwrap_err();
        assert!(matches!(err, TraceError::DuplicateTimestamp { t } if t == 0.0));
    }

    #[test]
    fn empty_body_is_an_error() {
        assert!(matches!(light("t,v\n"), Err(TraceError::Empty)));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = light("t,v\n0,1\nbogus\n60,2").unwrap_err();
        match err {
            TraceError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn header_is_required() {
        assert!(matches!(
            light("time,value\n0,1"),
            Err(TraceError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn out_of_order_input_is_sorted() {
        let tr = light("t,v\n60,2\n0,1\n30,3").unwrap();
        let ts: Vec<f64> = tr.samples.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 30.0, 60.0]);
    }

    #[test]
    fn gaps_beyond_jitter_tolerance_become_holes() {
        // period 30, tolerance 15: the 90 s and 50 s gaps are holes, 40 s is not.
        let tr = light("t,v\n0,1\n30,1\n60,1\n90,1\n120,1\n210,1\n240,1\n270,1\n320,1\n360,1").unwrap();
        assert_eq!(tr.period_s, 30.0);
        assert_eq!(tr.holes.len(), 2);
        assert_eq!(tr.holes[0].after_index, 4);
        assert_eq!(tr.holes[0].gap_s, 90.0);
        assert_eq!(tr.holes[1].after_index, 7);
        assert_eq!(tr.holes[1].gap_s, 50.0);
    }

    #[test]
    fn unit_must_match_kind() {
        let err = parse_trace("t,v\n0,1", NodeId(1), SensorKind::Light, Unit::Celsius)
            .unwrap_err();
        assert!(matches!(err, TraceError::UnitMismatch { .. }));
    }

    #[test]
    fn csv_round_trip_is_identity_on_parsed_traces() {
        let text = "t,v\n0,100\n30,101.5\n60,99.25\n90,250000\n120,0.00123457\n";
        let tr = light(text).unwrap();
        let rendered = tr.to_csv();
        let back = light(&rendered).unwrap();
        assert_eq!(back, tr);
        assert_eq!(back.to_csv(), rendered);
    }

    #[test]
    fn intel_parser_splits_by_mote_and_drops_nan() {
        let text = "\
2004-02-28 00:59:16.02785 1 1 19.98 37.09 45.08 2.69
2004-02-28 00:59:47.02 2 1 19.99 37.10 45.08 2.69
2004-02-28 00:59:16.5 1 2 18.00 40.00 NaN 2.67
2004-02-28 00:59:47.5 2 2 18.01 40.02 100.5 2.67
";
        let data = parse_intel_lab(text, SensorKind::Light).unwrap();
        assert_eq!(
            data.traces.keys().copied().collect::<Vec<_>>(),
            vec![NodeId(1), NodeId(2)]
        );
        assert_eq!(data.dropped_records, 1);
        assert_eq!(data.traces[&NodeId(1)].samples.len(), 2);
        assert_eq!(data.traces[&NodeId(2)].samples.len(), 1);
        // timestamps are seconds from the first timestamp in the file
        assert_eq!(data.traces[&NodeId(1)].samples[0].t, 0.0);
        let dt = data.traces[&NodeId(1)].samples[1].t;
        assert!((dt - 30.99215).abs() < 1e-6, "dt = {dt}");
    }

    #[test]
    fn intel_parser_rejects_bad_mote_id() {
        let err = parse_intel_lab("2004-02-28 00:59:16 1 xyz 19 37 45 2.6", SensorKind::Light)
            .unwrap_err();
        assert!(matches!(err, TraceError::Parse { .. }));
    }

    #[test]
    fn intel_parser_errors_on_zero_valid_records() {
        let err = parse_intel_lab("2004-02-28 00:59:16 1 4 19 37 NaN 2.6", SensorKind::Light)
            .unwrap_err();
        assert!(matches!(err, TraceError::Empty));
    }

    #[test]
    fn constant_synth_spec_yields_constant_trace() {
        let spec = SynthSpec {
            days: 1,
            period_s: 30.0,
            base: 50.0,
            diurnal_amplitude: 0.0,
            noise_sigma: 0.0,
            step_events_per_day: 0.0,
            step_magnitude: 0.0,
            seed: 7,
        };
        let tr = synth_trace(&spec, NodeId(1), SensorKind::Light).unwrap();
        assert_eq!(tr.samples.len(), 2880);
        assert!(tr.samples.iter().all(|s| s.v == 50.0));
    }

    #[test]
    fn synth_is_deterministic_per_seed() {
        let spec = SynthSpec {
            days: 1,
            period_s: 30.0,
            base: 100.0,
            diurnal_amplitude: 20.0,
            noise_sigma: 3.0,
            step_events_per_day: 2.0,
            step_magnitude: 40.0,
            seed: 42,
        };
        let a = synth_trace(&spec, NodeId(1), SensorKind::Light).unwrap();
        let b = synth_trace(&spec, NodeId(1), SensorKind::Light).unwrap();
        assert_eq!(a, b);
        let other = synth_trace(
            &SynthSpec { seed: 43, ..spec },
            NodeId(1),
            SensorKind::Light,
        )
        .unwrap();
        assert!(a.samples.iter().zip(&other.samples).any(|(x, y)| x.v != y.v));
    }

    #[test]
    fn sinusoid_extrema_match_closed_form() {
        let spec = SynthSpec {
            days: 1,
            period_s: 30.0,
            base: 50.0,
            diurnal_amplitude: 10.0,
            noise_sigma: 0.0,
            step_events_per_day: 0.0,
            step_magnitude: 0.0,
            seed: 0,
        };
        let tr = synth_trace(&spec, NodeId(1), SensorKind::Light).unwrap();
        let max = tr.samples.iter().map(|s| s.v).fold(f64::MIN, f64::max);
        let min = tr.samples.iter().map(|s| s.v).fold(f64::MAX, f64::min);
        assert!((max - min - 20.0).abs() <= 1e-9, "range = {}", max - min);
    }

    #[test]
    fn calibration_interpolates_and_clamps() {
        let cal = Calibration::new(vec![(0.0, 0.0), (100.0, 1000.0)]).unwrap();
        assert_eq!(cal.map(50.0), 500.0);
        assert_eq!(cal.map(-10.0), 0.0);
        assert_eq!(cal.map(150.0), 1000.0);
    }

    #[test]
    fn identity_calibration_is_identity_inside_range() {
        let cal = Calibration::new(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        for v in [0.0, 0.125, 0.5, 0.75, 1.0] {
            assert_eq!(cal.map(v), v);
        }
    }

    #[test]
    fn calibration_requires_two_breakpoints() {
        assert!(matches!(
            Calibration::new(vec![(0.0, 0.0)]),
            Err(CalibrationError::TooFewBreakpoints(1))
        ));
    }

    #[test]
    fn apply_calibration_requires_raw_unit() {
        let tr = light("t,v\n0,1\n30,2").unwrap();
        let cal = Calibration::new(vec![(0.0, 0.0), (10.0, 100.0)]).unwrap();
        assert!(matches!(
            apply_calibration(&tr, &cal),
            Err(TraceError::NotRaw(Unit::Lux))
        ));
    }

    #[test]
    fn apply_calibration_maps_values_and_switches_unit() {
        let tr = parse_trace("t,v\n0,25\n30,50", NodeId(3), SensorKind::Light, Unit::Raw)
            .unwrap();
        let cal = Calibration::new(vec![(0.0, 0.0), (100.0, 1000.0)]).unwrap();
        let out = apply_calibration(&tr, &cal).unwrap();
        assert_eq!(out.unit, Unit::Lux);
        assert_eq!(out.samples[0].v, 250.0);
        assert_eq!(out.samples[1].v, 500.0);
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_stable(values in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let samples: Vec<Sample> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| Sample { t: i as f64 * 30.0, v })
                .collect();
            let tr = SensorTrace::new(NodeId(1), SensorKind::Light, Unit::Lux, 30.0, samples).unwrap();
            let once = tr.to_csv();
            let back = parse_trace(&once, NodeId(1), SensorKind::Light, Unit::Lux).unwrap();
            prop_assert_eq!(back.to_csv(), once);
        }

        #[test]
        fn monotone_calibration_preserves_extrema_indices(
            values in proptest::collection::vec(0f64..100.0, 2..60),
        ) {
            let samples: Vec<Sample> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| Sample { t: i as f64, v })
                .collect();
            let tr = SensorTrace::new(NodeId(1), SensorKind::Light, Unit::Raw, 1.0, samples).unwrap();
            let cal = Calibration::new(vec![(0.0, 0.0), (25.0, 10.0), (100.0, 400.0)]).unwrap();
            let out = apply_calibration(&tr, &cal).unwrap();
            let argmax = |s: &[Sample]| {
                s.iter().enumerate().max_by(|a, b| a.1.v.total_cmp(&b.1.v)).map(|(i, _)| i)
            };
            let argmin = |s: &[Sample]| {
                s.iter().enumerate().min_by(|a, b| a.1.v.total_cmp(&b.1.v)).map(|(i, _)| i)
            };
            prop_assert_eq!(argmax(&out.samples), argmax(&tr.samples));
            prop_assert_eq!(argmin(&out.samples), argmin(&tr.samples));
        }
    }
}
