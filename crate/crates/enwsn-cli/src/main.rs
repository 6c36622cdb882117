//! `enwsn` command-line interface.
//!
//! Subcommands: `dbp` (prediction over one trace), `sweep` (the full
//! configuration/software power matrix), `sustain` (energy neutrality),
//! `synth` (trace generation) and `topo` (tree inspection). Exit codes:
//! 0 success, 1 computation refusal, 2 input or validation error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use enwsn::dbp::{run_dbp, DbpParams, ToleranceMode};
use enwsn::fixtures;
use enwsn::harvest::{neutrality, HarvestCurve, HarvestModel, NeutralityReport};
use enwsn::hw::{default_catalog, HwCatalog, Software};
use enwsn::power::{sweep, CellOutcome, NetworkScenario};
use enwsn::topology::{build_tree, parse_link_quality, parse_topology, Topology};
use enwsn::trace::{
    apply_calibration, parse_trace, synth_trace, Calibration, SensorKind, SensorTrace, SynthSpec,
    Unit,
};
use enwsn::NodeId;

#[derive(Parser)]
#[command(name = "enwsn", version, about = "Wireless sensor network energy simulator")]
struct Cli {
    /// Catalog override file (`key = value` lines); falls back to the
    /// ENWSN_CATALOG environment variable
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run prediction over one trace and report suppression statistics
    Dbp(DbpArgs),
    /// Evaluate average node power over the 23-row configuration matrix
    Sweep(SweepArgs),
    /// Energy-neutrality analysis for one configuration and software mode
    Sustain(SustainArgs),
    /// Generate synthetic traces
    Synth(SynthArgs),
    /// Inspect a topology: collection tree depths and subtree sizes
    Topo(TopoArgs),
}

#[derive(Args)]
struct DbpArgs {
    /// Trace file in `t,v` CSV format
    #[arg(long)]
    trace: PathBuf,
    /// Sensor kind of the trace
    #[arg(long, default_value = "light")]
    kind: KindArg,
    /// Node id to attach to the trace
    #[arg(long, default_value = "1")]
    node_id: u32,
    /// Prediction parameters, e.g. `m=16,l=4,eps-abs=15,eps-rel=0.05,w=2`
    #[arg(long, value_parser = parse_dbp_flag)]
    dbp: Option<DbpParams>,
    /// Calibration CSV (`raw,value`): the trace is read as raw readings and
    /// mapped to engineering units first
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Directory for the model-events CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Topology CSV (`node_id,x,y` with `# sink=`/`# comm_range_m=` headers)
    #[arg(long)]
    topology: PathBuf,
    /// Optional `u,v,quality` link file; switches tree building to expected
    /// transmissions
    #[arg(long)]
    link_quality: Option<PathBuf>,
    /// Directory of per-node trace files named `node_<id>.csv` or `<id>.csv`
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, default_value = "light")]
    kind: KindArg,
    #[arg(long, value_parser = parse_dbp_flag)]
    dbp: Option<DbpParams>,
    /// Calibration CSV applied to every trace (read as raw readings)
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Software modes to evaluate
    #[arg(long, default_value = "no-dbp,dbp,mbs", value_parser = parse_modes)]
    modes: std::vec::Vec<Software>,
    /// Restrict the report to one configuration row
    #[arg(long)]
    only_id: Option<u8>,
    /// Directory for sweep.csv (and per_node.csv with --per-node)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit the per-node power breakdown CSV
    #[arg(long)]
    per_node: bool,
}

#[derive(Args)]
struct SustainArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    link_quality: Option<PathBuf>,
    /// Directory of per-node light traces (also drive the prediction)
    #[arg(long)]
    traces: PathBuf,
    /// Harvest curve CSV `lux,watts`; defaults to the built-in illustrative
    /// indoor cell curve
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Calibration CSV applied to every light trace (read as raw readings)
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Configuration row to evaluate
    #[arg(long, default_value = "11")]
    config_id: u8,
    /// Software mode to evaluate
    #[arg(long, default_value = "mbs", value_parser = parse_mode)]
    software: Software,
    #[arg(long, default_value = "1")]
    cells: u32,
    #[arg(long, default_value_t = HarvestModel::DEFAULT_EFFICIENCY)]
    efficiency: f64,
    #[arg(long, default_value = "1.0")]
    area_scale: f64,
    #[arg(long, value_parser = parse_dbp_flag)]
    dbp: Option<DbpParams>,
    /// Directory for sustain.csv, sustain_series.dat and sustain.gp
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in scenario: `tunnel` writes one trace per node plus the
    /// topology into --out
    #[arg(long)]
    profile: Option<String>,
    #[arg(long, default_value = "1")]
    days: u32,
    #[arg(long, default_value = "30.0")]
    period: f64,
    #[arg(long, default_value = "100.0")]
    base: f64,
    #[arg(long, default_value = "0.0")]
    amplitude: f64,
    #[arg(long, default_value = "0.0")]
    sigma: f64,
    #[arg(long, default_value = "0.0")]
    steps_per_day: f64,
    #[arg(long, default_value = "0.0")]
    step_magnitude: f64,
    #[arg(long, default_value = "0")]
    seed: u64,
    #[arg(long, default_value = "1")]
    node_id: u32,
    /// Output file (single trace) or directory (--profile tunnel)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TopoArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    link_quality: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum KindArg {
    Light,
    Temperature,
    Humidity,
}

impl From<KindArg> for SensorKind {
    fn from(k: KindArg) -> SensorKind {
        match k {
            KindArg::Light => SensorKind::Light,
            KindArg::Temperature => SensorKind::Temperature,
            KindArg::Humidity => SensorKind::Humidity,
        }
    }
}

enum CliError {
    /// Input or validation problem: exit code 2.
    Input(String),
    /// The computation itself refused (e.g. infeasible selection): exit 1.
    Refusal(String),
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }
}

fn parse_mode(s: &str) -> Result<Software, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "no-dbp" | "nodbp" | "no_dbp" => Ok(Software::NoDbp),
        "dbp" => Ok(Software::Dbp),
        "mbs" => Ok(Software::Mbs),
        other => Err(format!("unknown software mode `{other}`")),
    }
}

fn parse_modes(s: &str) -> Result<Vec<Software>, String> {
    s.split(',').map(parse_mode).collect()
}

/// Parses `m=16,l=4,eps-abs=15,eps-rel=0.05,w=2,mode=any` on top of the
/// defaults.
fn parse_dbp_flag(s: &str) -> Result<DbpParams, String> {
    let mut params = DbpParams::default();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{item}`"))?;
        let value = value.trim();
        match key.trim() {
            "m" => params.m = value.parse().map_err(|e| format!("m: {e}"))?,
            "l" => params.l = value.parse().map_err(|e| format!("l: {e}"))?,
            "eps-abs" => params.eps_abs = value.parse().map_err(|e| format!("eps-abs: {e}"))?,
            "eps-rel" => params.eps_rel = value.parse().map_err(|e| format!("eps-rel: {e}"))?,
            "w" => params.w_consec = value.parse().map_err(|e| format!("w: {e}"))?,
            "mode" => {
                params.tolerance_mode = match value {
                    "any" => ToleranceMode::Any,
                    "all" => ToleranceMode::All,
                    other => return Err(format!("unknown tolerance mode `{other}`")),
                }
            }
            other => return Err(format!("unknown prediction parameter `{other}`")),
        }
    }
    params.validate().map_err(|e| e.to_string())?;
    Ok(params)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("no such input: {}", path.display())));
    }
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_catalog(flag: &Option<PathBuf>) -> Result<HwCatalog, CliError> {
    let path = flag
        .clone()
        .or_else(|| std::env::var_os("ENWSN_CATALOG").map(PathBuf::from));
    match path {
        Some(p) => {
            let text = read_input(&p)?;
            default_catalog().with_overrides(&text).map_err(CliError::input)
        }
        None => Ok(default_catalog()),
    }
}

fn load_topology(path: &Path, links: &Option<PathBuf>) -> Result<Topology, CliError> {
    let topo = parse_topology(&read_input(path)?).map_err(CliError::input)?;
    match links {
        Some(p) => {
            let entries = parse_link_quality(&read_input(p)?).map_err(CliError::input)?;
            topo.with_link_quality(entries).map_err(CliError::input)
        }
        None => Ok(topo),
    }
}

fn load_calibration(path: &Option<PathBuf>) -> Result<Option<Calibration>, CliError> {
    match path {
        Some(p) => Ok(Some(
            Calibration::parse(&read_input(p)?).map_err(CliError::input)?,
        )),
        None => Ok(None),
    }
}

fn read_one_trace(
    text: &str,
    id: NodeId,
    kind: SensorKind,
    cal: Option<&Calibration>,
) -> Result<SensorTrace, enwsn::trace::TraceError> {
    match cal {
        Some(cal) => {
            let raw = parse_trace(text, id, kind, Unit::Raw)?;
            apply_calibration(&raw, cal)
        }
        None => parse_trace(text, id, kind, kind.engineering_unit()),
    }
}

/// Loads `node_<id>.csv` / `<id>.csv` trace files from a directory.
fn load_traces(
    dir: &Path,
    kind: SensorKind,
    cal: Option<&Calibration>,
) -> Result<BTreeMap<NodeId, SensorTrace>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!("no such input: {}", dir.display())));
    }
    let mut traces = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    for path in entries {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let id_part = stem.strip_prefix("node_").unwrap_or(stem);
        // other CSV files (topology copies, notes) may share the directory
        let Ok(id) = id_part.parse::<u32>() else {
            continue;
        };
        let text = read_input(&path)?;
        let trace = read_one_trace(&text, NodeId(id), kind, cal)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        traces.insert(NodeId(id), trace);
    }
    if traces.is_empty() {
        return Err(CliError::Input(format!(
            "no trace files named node_<id>.csv or <id>.csv in {}",
            dir.display()
        )));
    }
    Ok(traces)
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn cmd_dbp(args: &DbpArgs) -> Result<(), CliError> {
    let text = read_input(&args.trace)?;
    let kind: SensorKind = args.kind.into();
    let cal = load_calibration(&args.calibration)?;
    let trace = read_one_trace(&text, NodeId(args.node_id), kind, cal.as_ref())
        .map_err(CliError::input)?;
    let params = args.dbp.clone().unwrap_or_default();
    let result = run_dbp(&trace, &params).map_err(CliError::input)?;
    println!(
        "samples={} transmissions={} suppression={:.6} rate_per_hour={:.3}",
        result.samples_total,
        result.transmissions,
        result.suppression,
        enwsn::dbp::traffic_rate(&result, trace.horizon_s()),
    );
    println!(
        "max_abs_error_incl_grace={:.6} max_abs_error_excl_grace={:.6}",
        result.max_abs_error_incl_grace, result.max_abs_error_excl_grace,
    );
    if let Some(dir) = &args.out {
        write_out(dir, "dbp_events.csv", &result.to_csv())?;
    }
    Ok(())
}

fn scenario_from(
    topology: PathBuf,
    link_quality: &Option<PathBuf>,
    traces_dir: &Path,
    kind: SensorKind,
    cal: Option<&Calibration>,
    params: &DbpParams,
) -> Result<(NetworkScenario, BTreeMap<NodeId, SensorTrace>), CliError> {
    let topo = load_topology(&topology, link_quality)?;
    let traces = load_traces(traces_dir, kind, cal)?;
    let scenario = NetworkScenario::new(topo, &traces, params).map_err(CliError::input)?;
    Ok((scenario, traces))
}

fn cmd_sweep(args: &SweepArgs, catalog: &HwCatalog) -> Result<(), CliError> {
    let params = args.dbp.clone().unwrap_or_default();
    let cal = load_calibration(&args.calibration)?;
    let (scenario, _) = scenario_from(
        args.topology.clone(),
        &args.link_quality,
        &args.traces,
        args.kind.into(),
        cal.as_ref(),
        &params,
    )?;
    let mut table = sweep(&scenario, &args.modes, catalog);
    if let Some(id) = args.only_id {
        if !(1..=23).contains(&id) {
            return Err(CliError::Input(format!("configuration id {id} out of 1..=23")));
        }
        table = table.filter_id(id);
    }
    print!("{}", table.to_text_table());
    if !table
        .cells
        .iter()
        .any(|c| matches!(c.outcome, CellOutcome::Ok { .. }))
    {
        return Err(CliError::Refusal("all requested cells are infeasible".into()));
    }
    if let Some(dir) = &args.out {
        write_out(dir, "sweep.csv", &table.to_csv())?;
        if args.per_node {
            write_out(dir, "per_node.csv", &per_node_csv(&table))?;
        }
    }
    Ok(())
}

fn per_node_csv(table: &enwsn::power::SweepTable) -> String {
    let mut out = String::from(
        "id,software,node,floor_w,overhear_w,route_w,sample_tx_w,sample_only_w,total_w\n",
    );
    for cell in &table.cells {
        if let CellOutcome::Ok { per_node, .. } = &cell.outcome {
            for (n, b) in per_node {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    cell.config.id,
                    cell.config.software,
                    n,
                    enwsn::fmt_sig(b.floor_w, 6),
                    enwsn::fmt_sig(b.overhear_w, 6),
                    enwsn::fmt_sig(b.route_w, 6),
                    enwsn::fmt_sig(b.sample_tx_w, 6),
                    enwsn::fmt_sig(b.sample_only_w, 6),
                    enwsn::fmt_sig(b.total_w, 6),
                ));
            }
        }
    }
    out
}

fn cmd_sustain(args: &SustainArgs, catalog: &HwCatalog) -> Result<(), CliError> {
    let params = args.dbp.clone().unwrap_or_default();
    let cal = load_calibration(&args.calibration)?;
    let (scenario, traces) = scenario_from(
        args.topology.clone(),
        &args.link_quality,
        &args.traces,
        SensorKind::Light,
        cal.as_ref(),
        &params,
    )?;
    let curve = match &args.curve {
        Some(p) => HarvestCurve::parse(&read_input(p)?).map_err(CliError::input)?,
        None => fixtures::default_harvest_curve(),
    };
    let model = HarvestModel::new(curve, args.efficiency, args.cells, args.area_scale)
        .map_err(CliError::input)?;

    let table = sweep(&scenario, &[args.software], catalog);
    let cell = table
        .cell(args.config_id, args.software)
        .ok_or_else(|| CliError::Input(format!("configuration id {} out of 1..=23", args.config_id)))?;
    let per_node = match &cell.outcome {
        CellOutcome::Ok { per_node, .. } => per_node,
        CellOutcome::Infeasible { reason } => {
            return Err(CliError::Refusal(format!(
                "configuration {} with {} is infeasible: {reason}",
                args.config_id, args.software
            )))
        }
        CellOutcome::Error { message } => return Err(CliError::Input(message.clone())),
    };
    let powers: BTreeMap<NodeId, f64> =
        per_node.iter().map(|(n, b)| (*n, b.total_w)).collect();
    let report = neutrality(&powers, &traces, &model).map_err(CliError::input)?;
    print!("{}", report.to_csv());
    if let Some(dir) = &args.out {
        write_out(dir, "sustain.csv", &report.to_csv())?;
        write_out(dir, "sustain_series.dat", &report.to_plot_series())?;
        write_out(
            dir,
            "sustain.gp",
            &NeutralityReport::gnuplot_script("sustain_series.dat", "sustain.png"),
        )?;
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    match args.profile.as_deref() {
        Some("tunnel") => {
            let traces = fixtures::tunnel_traces(args.days, args.seed);
            std::fs::create_dir_all(&args.out)
                .map_err(|e| CliError::Input(format!("cannot create {}: {e}", args.out.display())))?;
            for (n, trace) in &traces {
                write_out(&args.out, &format!("node_{n}.csv"), &trace.to_csv())?;
            }
            write_out(&args.out, "topology.csv", fixtures::TUNNEL_TOPOLOGY_CSV)?;
            println!(
                "wrote {} traces and topology.csv to {}",
                traces.len(),
                args.out.display()
            );
            Ok(())
        }
        Some(other) => Err(CliError::Input(format!("unknown profile `{other}`"))),
        None => {
            let spec = SynthSpec {
                days: args.days,
                period_s: args.period,
                base: args.base,
                diurnal_amplitude: args.amplitude,
                noise_sigma: args.sigma,
                step_events_per_day: args.steps_per_day,
                step_magnitude: args.step_magnitude,
                seed: args.seed,
            };
            let trace = synth_trace(&spec, NodeId(args.node_id), SensorKind::Light)
                .map_err(CliError::input)?;
            if let Some(parent) = args.out.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| {
                        CliError::Input(format!("cannot create {}: {e}", parent.display()))
                    })?;
                }
            }
            std::fs::write(&args.out, trace.to_csv())
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out.display())))?;
            println!("wrote {} samples to {}", trace.samples.len(), args.out.display());
            Ok(())
        }
    }
}

fn cmd_topo(args: &TopoArgs) -> Result<(), CliError> {
    let topo = load_topology(&args.topology, &args.link_quality)?;
    let tree = build_tree(&topo).map_err(CliError::input)?;
    let edge_count = |adj: &enwsn::topology::Adjacency| {
        adj.values().map(|v| v.len()).sum::<usize>() / 2
    };
    println!("nodes={} sink={}", topo.node_count(), topo.sink);
    println!(
        "comm_edges={} interference_edges={}",
        edge_count(&topo.comm_adjacency()),
        edge_count(&topo.interference_adjacency())
    );
    println!("max_depth={}", tree.max_depth());
    println!("depth,count");
    for (depth, count) in tree.depth_histogram() {
        println!("{depth},{count}");
    }
    println!("node,depth,parent,subtree_size");
    for n in topo.node_ids() {
        let parent = tree
            .parent
            .get(&n)
            .map_or("-".to_string(), |p| p.to_string());
        println!(
            "{n},{},{parent},{}",
            tree.depth[&n], tree.subtree_size[&n]
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Dbp(args) => cmd_dbp(args),
        Command::Sweep(args) => cmd_sweep(args, &load_catalog(&cli.catalog)?),
        Command::Sustain(args) => cmd_sustain(args, &load_catalog(&cli.catalog)?),
        Command::Synth(args) => cmd_synth(args),
        Command::Topo(args) => cmd_topo(args),
    }
}

fn main() -> ExitCode {
    // die quietly when the consumer closes the pipe (e.g. `enwsn topo | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Refusal(msg)) => {
            eprintln!("refused: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
