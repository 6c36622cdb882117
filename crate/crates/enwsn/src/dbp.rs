//! Derivative-based prediction over a sample stream.
//!
//! A linear model is fitted from an `m`-sample window: its slope connects
//! the average of the first `l` values (at the centroid of their
//! timestamps) with the average of the last `l` values. The sink replays
//! the latest model, so a sample only needs to be transmitted when the
//! prediction drifts out of tolerance for more than `w_consec` consecutive
//! samples.

use std::collections::VecDeque;

use thiserror::Error;

use crate::trace::{Sample, SensorTrace};
use crate::{fmt_exact, fmt_sig};

/// How the absolute and relative tolerances combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ToleranceMode {
    /// Either bound suffices: the allowance is `max(eps_abs, eps_rel·|actual|)`.
    #[default]
    Any,
    /// Both bounds must hold: the allowance is `min(eps_abs, eps_rel·|actual|)`.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbpParams {
    /// Window length in samples.
    pub m: usize,
    /// Edge-point count at each end of the window.
    pub l: usize,
    /// Absolute tolerance in trace units.
    pub eps_abs: f64,
    /// Relative tolerance as a fraction of the actual value.
    pub eps_rel: f64,
    /// Tolerated consecutive out-of-bound samples; the next one triggers.
    pub w_consec: u32,
    pub tolerance_mode: ToleranceMode,
}

impl Default for DbpParams {
    fn default() -> Self {
        DbpParams {
            m: 16,
            l: 4,
            eps_abs: 15.0,
            eps_rel: 0.05,
            w_consec: 2,
            tolerance_mode: ToleranceMode::Any,
        }
    }
}

impl DbpParams {
    pub fn validate(&self) -> Result<(), DbpError> {
        if self.l < 1 || 2 * self.l > self.m {
            return Err(DbpError::InvalidParams(format!(
                "edge count l={} must satisfy 1 <= l <= m/2 (m={})",
                self.l, self.m
            )));
        }
        if self.eps_abs < 0.0 || self.eps_rel < 0.0 {
            return Err(DbpError::InvalidParams(
                "tolerances must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One fitted linear segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbpModel {
    /// Trace units per second.
    pub slope: f64,
    /// Centroid time of the last edge window.
    pub anchor_t: f64,
    /// Mean of the last `l` edge values.
    pub anchor_v: f64,
    /// Timestamp of the sample whose arrival fitted this model.
    pub fitted_at: f64,
}

impl DbpModel {
    pub fn predict(&self, t: f64) -> f64 {
        self.anchor_v + self.slope * (t - self.anchor_t)
    }
}

/// A model transmission: the fitting time and the model sent to the sink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelEvent {
    pub t: f64,
    pub model: DbpModel,
}

/// Outcome of running prediction over a whole trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DbpResult {
    pub model_events: Vec<ModelEvent>,
    pub samples_total: usize,
    /// Number of model transmissions, including the initial one.
    pub transmissions: usize,
    /// `1 - transmissions / samples_total`.
    pub suppression: f64,
    /// Largest |predicted - actual| among suppressed samples, counting the
    /// out-of-tolerance grace samples that precede each refit.
    pub max_abs_error_incl_grace: f64,
    /// Same, counting only suppressed samples that were within tolerance.
    pub max_abs_error_excl_grace: f64,
}

#[derive(Debug, Error)]
pub enum DbpError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("trace has {have} samples but the window needs {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("degenerate fit: edge centroids coincide at t={0}")]
    DegenerateFit(f64),
    #[error("non-increasing timestamp {t} pushed into evaluator")]
    NonIncreasingTimestamp { t: f64 },
}

/// Fits a model from a full window. The window must hold at least `2*l`
/// samples with strictly increasing timestamps; callers pass the latest
/// `m`-sample buffer.
pub fn fit_model(window: &[Sample], l: usize) -> Result<DbpModel, DbpError> {
    if l < 1 || window.len() < 2 * l {
        return Err(DbpError::InvalidParams(format!(
            "window of {} samples cannot take {} edge points per side",
            window.len(),
            l
        )));
    }
    let mean = |s: &[Sample]| {
        let n = s.len() as f64;
        let t = s.iter().map(|x| x.t).sum::<f64>() / n;
        let v = s.iter().map(|x| x.v).sum::<f64>() / n;
        (t, v)
    };
    let (c_first, v_first) = mean(&window[..l]);
    let (c_last, v_last) = mean(&window[window.len() - l..]);
    if c_last == c_first {
        return Err(DbpError::DegenerateFit(c_first));
    }
    Ok(DbpModel {
        slope: (v_last - v_first) / (c_last - c_first),
        anchor_t: c_last,
        anchor_v: v_last,
        fitted_at: window[window.len() - 1].t,
    })
}

/// True when `actual` is acceptably predicted by `predicted` under the
/// configured tolerances.
pub fn within_tolerance(predicted: f64, actual: f64, params: &DbpParams) -> bool {
    let abs = params.eps_abs;
    let rel = params.eps_rel * actual.abs();
    let allowance = match params.tolerance_mode {
        ToleranceMode::Any => abs.max(rel),
        ToleranceMode::All => abs.min(rel),
    };
    (predicted - actual).abs() <= allowance
}

/// Streaming evaluator: keeps the sliding window, the active model and the
/// consecutive-violation counter. Single-owner; feed samples in timestamp
/// order.
#[derive(Debug, Clone)]
pub struct DbpEvaluator {
    params: DbpParams,
    buf: VecDeque<Sample>,
    model: Option<DbpModel>,
    consecutive_violations: u32,
    last_t: Option<f64>,
    samples_total: usize,
    events: Vec<ModelEvent>,
    max_err_incl: f64,
    max_err_excl: f64,
}

impl DbpEvaluator {
    pub fn new(params: DbpParams) -> Result<Self, DbpError> {
        params.validate()?;
        Ok(DbpEvaluator {
            buf: VecDeque::with_capacity(params.m),
            params,
            model: None,
            consecutive_violations: 0,
            last_t: None,
            samples_total: 0,
            events: Vec::new(),
            max_err_incl: 0.0,
            max_err_excl: 0.0,
        })
    }

    pub fn params(&self) -> &DbpParams {
        &self.params
    }

    /// Feeds one sample; returns the model event it triggered, if any.
    pub fn push(&mut self, t: f64, v: f64) -> Result<Option<ModelEvent>, DbpError> {
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(DbpError::NonIncreasingTimestamp { t });
            }
        }
        self.last_t = Some(t);
        self.samples_total += 1;
        if self.buf.len() == self.params.m {
            self.buf.pop_front();
        }
        self.buf.push_back(Sample { t, v });

        let Some(model) = self.model else {
            // warm-up: the first model is fitted once m samples are in
            if self.buf.len() == self.params.m {
                return self.refit(t).map(Some);
            }
            return Ok(None);
        };

        let err = (model.predict(t) - v).abs();
        if within_tolerance(model.predict(t), v, &self.params) {
            self.consecutive_violations = 0;
            self.max_err_incl = self.max_err_incl.max(err);
            self.max_err_excl = self.max_err_excl.max(err);
            Ok(None)
        } else {
            self.consecutive_violations += 1;
            if self.consecutive_violations > self.params.w_consec {
                self.consecutive_violations = 0;
                self.refit(t).map(Some)
            } else {
                // tolerated violation: the sample stays suppressed
                self.max_err_incl = self.max_err_incl.max(err);
                Ok(None)
            }
        }
    }

    fn refit(&mut self, t: f64) -> Result<ModelEvent, DbpError> {
        let window: Vec<Sample> = self.buf.iter().copied().collect();
        let model = fit_model(&window, self.params.l)?;
        let event = ModelEvent { t, model };
        self.events.push(event);
        self.model = Some(model);
        Ok(event)
    }

    /// Finalizes the statistics.
    pub fn finish(self) -> Result<DbpResult, DbpError> {
        if self.samples_total < self.params.m {
            return Err(DbpError::InsufficientData {
                have: self.samples_total,
                need: self.params.m,
            });
        }
        let transmissions = self.events.len();
        Ok(DbpResult {
            suppression: 1.0 - transmissions as f64 / self.samples_total as f64,
            model_events: self.events,
            samples_total: self.samples_total,
            transmissions,
            max_abs_error_incl_grace: self.max_err_incl,
            max_abs_error_excl_grace: self.max_err_excl,
        })
    }
}

/// Runs prediction over a whole trace.
pub fn run_dbp(trace: &SensorTrace, params: &DbpParams) -> Result<DbpResult, DbpError> {
    params.validate()?;
    if trace.samples.len() < params.m {
        return Err(DbpError::InsufficientData {
            have: trace.samples.len(),
            need: params.m,
        });
    }
    let mut eval = DbpEvaluator::new(params.clone())?;
    for s in &trace.samples {
        eval.push(s.t, s.v)?;
    }
    eval.finish()
}

/// Model transmissions per hour over the given horizon.
pub fn traffic_rate(result: &DbpResult, horizon_s: f64) -> f64 {
    result.transmissions as f64 * 3600.0 / horizon_s
}

impl DbpResult {
    /// Statistics-only result for rate computations where the event stream
    /// itself is not needed (e.g. replaying recorded transmission counts).
    pub fn from_counts(samples_total: usize, transmissions: usize) -> Self {
        DbpResult {
            model_events: Vec::new(),
            samples_total,
            transmissions,
            suppression: 1.0 - transmissions as f64 / samples_total as f64,
            max_abs_error_incl_grace: 0.0,
            max_abs_error_excl_grace: 0.0,
        }
    }

    /// Renders the model events as CSV plus a commented stats footer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,slope,anchor_t,anchor_v\n");
        for e in &self.model_events {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_exact(e.t),
                fmt_sig(e.model.slope, 6),
                fmt_exact(e.model.anchor_t),
                fmt_sig(e.model.anchor_v, 6),
            ));
        }
        out.push_str(&format!("# samples_total={}\n", self.samples_total));
        out.push_str(&format!("# transmissions={}\n", self.transmissions));
        out.push_str(&format!("# suppression={}\n", fmt_sig(self.suppression, 6)));
        out.push_str(&format!(
            "# max_abs_error_incl_grace={}\n",
            fmt_sig(self.max_abs_error_incl_grace, 6)
        ));
        out.push_str(&format!(
            "# max_abs_error_excl_grace={}\n",
            fmt_sig(self.max_abs_error_excl_grace, 6)
        ));
        out
    }
}
