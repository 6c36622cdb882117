//! Indoor photovoltaic harvesting and energy-neutrality verdicts.
//!
//! A monotone piecewise-linear curve maps illuminance to the output power
//! of a single cell; the chain applies charging efficiency, cell count and
//! an area scale. Neutrality compares long-run time averages over the light
//! trace, with no storage model in between.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::trace::SensorTrace;
use crate::{fmt_sig, NodeId};

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("curve needs at least one breakpoint above 0 lux")]
    EmptyCurve,
    #[error("curve lux values must be strictly increasing at index {0}")]
    LuxNotIncreasing(usize),
    #[error("curve must be monotone non-decreasing at index {0}")]
    NotMonotone(usize),
    #[error("curve output at 0 lux must be 0, got {0}")]
    NonZeroOrigin(f64),
    #[error("efficiency must be in (0, 1], got {0}")]
    BadEfficiency(f64),
    #[error("cells must be at least 1")]
    NoCells,
    #[error("negative illuminance {0}")]
    NegativeLux(f64),
    #[error("missing light traces for nodes: {}", .0.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", "))]
    MissingTraces(Vec<NodeId>),
}

/// Lux to single-cell output power, anchored at the origin, clamped above
/// the last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestCurve {
    points: Vec<(f64, f64)>,
}

impl HarvestCurve {
    /// Builds a curve; a missing `(0, 0)` origin breakpoint is prepended.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self, HarvestError> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        match points.first() {
            None => return Err(HarvestError::EmptyCurve),
            Some(&(lux, w)) if lux == 0.0 && w != 0.0 => {
                return Err(HarvestError::NonZeroOrigin(w))
            }
            Some(&(lux, _)) if lux > 0.0 => points.insert(0, (0.0, 0.0)),
            _ => {}
        }
        if points.len() < 2 {
            return Err(HarvestError::EmptyCurve);
        }
        for (i, pair) in points.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(HarvestError::LuxNotIncreasing(i + 1));
            }
            if pair[1].1 < pair[0].1 {
                return Err(HarvestError::NotMonotone(i + 1));
            }
        }
        Ok(HarvestCurve { points })
    }

    /// Parses the `lux,watts` CSV curve format (optional header).
    pub fn parse(text: &str) -> Result<Self, HarvestError> {
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "lux,watts" {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| HarvestError::Parse {
                line: idx + 1,
                message: format!("expected `lux,watts`, got `{line}`"),
            })?;
            let lux: f64 = a.trim().parse().map_err(|e| HarvestError::Parse {
                line: idx + 1,
                message: format!("bad lux: {e}"),
            })?;
            let watts: f64 = b.trim().parse().map_err(|e| HarvestError::Parse {
                line: idx + 1,
                message: format!("bad watts: {e}"),
            })?;
            points.push((lux, watts));
        }
        HarvestCurve::new(points)
    }

    /// Single-cell output power at an illuminance.
    pub fn output_w(&self, lux: f64) -> f64 {
        let p = &self.points;
        if lux >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let i = p.partition_point(|q| q.0 <= lux);
        let (x0, y0) = p[i - 1];
        let (x1, y1) = p[i];
        y0 + (y1 - y0) * (lux - x0) / (x1 - x0)
    }
}

/// Harvester chain: cell curve, charging efficiency, cell count, area scale.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestModel {
    pub curve: HarvestCurve,
    pub efficiency: f64,
    pub cells: u32,
    pub area_scale: f64,
}

impl HarvestModel {
    pub fn new(
        curve: HarvestCurve,
        efficiency: f64,
        cells: u32,
        area_scale: f64,
    ) -> Result<Self, HarvestError> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(HarvestError::BadEfficiency(efficiency));
        }
        if cells < 1 {
            return Err(HarvestError::NoCells);
        }
        Ok(HarvestModel {
            curve,
            efficiency,
            cells,
            area_scale,
        })
    }

    /// Default charging efficiency of the harvester front-end.
    pub const DEFAULT_EFFICIENCY: f64 = 0.79;
}

/// Harvested electrical power at an illuminance.
pub fn harvest_power(lux: f64, model: &HarvestModel) -> Result<f64, HarvestError> {
    if lux < 0.0 {
        return Err(HarvestError::NegativeLux(lux));
    }
    Ok(model.efficiency * model.cells as f64 * model.area_scale * model.curve.output_w(lux))
}

/// Per-node neutrality verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeNeutrality {
    pub mean_consumed_w: f64,
    pub mean_harvested_w: f64,
    pub neutral: bool,
    /// Cells required for neutrality; `None` when no number of cells can
    /// cover the consumption (zero-light node).
    pub cells_needed: Option<u64>,
}

/// Network-wide neutrality report.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralityReport {
    pub nodes: BTreeMap<NodeId, NodeNeutrality>,
    /// Sum of per-node cell requirements; `None` if any node is impossible
    /// to sustain.
    pub total_cells: Option<u64>,
}

/// Compares each node's mean consumption to its mean harvest over its light
/// trace. Negative sample values are clamped to zero lux (sensor noise
/// around darkness).
pub fn neutrality(
    node_powers: &BTreeMap<NodeId, f64>,
    light_traces: &BTreeMap<NodeId, SensorTrace>,
    model: &HarvestModel,
) -> Result<NeutralityReport, HarvestError> {
    let missing: Vec<NodeId> = node_powers
        .keys()
        .filter(|n| !light_traces.contains_key(n))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(HarvestError::MissingTraces(missing));
    }
    let mut nodes = BTreeMap::new();
    let mut total = Some(0u64);
    for (&n, &consumed) in node_powers {
        let trace = &light_traces[&n];
        let mut sum = 0.0;
        for s in &trace.samples {
            sum += harvest_power(s.v.max(0.0), model)?;
        }
        let mean_harvested = sum / trace.samples.len() as f64;
        // per-cell net harvest with the same efficiency and area scale
        let per_cell = mean_harvested / model.cells as f64;
        let cells_needed = if consumed <= 0.0 {
            Some(1)
        } else if per_cell > 0.0 {
            Some((consumed / per_cell).ceil() as u64)
        } else {
            None
        };
        if let Some(t) = total {
            total = cells_needed.map(|c| t + c);
        }
        nodes.insert(
            n,
            NodeNeutrality {
                mean_consumed_w: consumed,
                mean_harvested_w: mean_harvested,
                neutral: mean_harvested >= consumed,
                cells_needed,
            },
        );
    }
    Ok(NeutralityReport {
        nodes,
        total_cells: total,
    })
}

impl NeutralityReport {
    /// `node,consumed_w,harvested_w,neutral,cells_needed` per node plus a
    /// commented total.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,consumed_w,harvested_w,neutral,cells_needed\n");
        for (n, v) in &self.nodes {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                n,
                fmt_sig(v.mean_consumed_w, 6),
                fmt_sig(v.mean_harvested_w, 6),
                v.neutral,
                v.cells_needed
                    .map_or("unattainable".to_string(), |c| c.to_string()),
            ));
        }
        out.push_str(&format!(
            "# total_cells={}\n",
            self.total_cells
                .map_or("unattainable".to_string(), |c| c.to_string())
        ));
        out
    }

    /// Two-column gnuplot-friendly series: consumed and harvested per node,
    /// floored at a positive value so a log scale stays happy.
    pub fn to_plot_series(&self) -> String {
        let mut out = String::from("# node consumed_w harvested_w\n");
        for (n, v) in &self.nodes {
            out.push_str(&format!(
                "{} {} {}\n",
                n,
                fmt_sig(v.mean_consumed_w.max(1e-12), 6),
                fmt_sig(v.mean_harvested_w.max(1e-12), 6),
            ));
        }
        out
    }

    /// A gnuplot script that renders the consumed-vs-harvested comparison.
    pub fn gnuplot_script(data_file: &str, output_file: &str) -> String {
        format!(
            "set terminal pngcairo size 900,500\n\
             set output '{output_file}'\n\
             set logscale y\n\
             set xlabel 'node'\n\
             set ylabel 'power [W]'\n\
             set key outside\n\
             plot '{data_file}' using 1:2 with linespoints title 'consumed', \\\n\
             \x20    '{data_file}' using 1:3 with linespoints title 'harvested'\n"
        )
    }
}
