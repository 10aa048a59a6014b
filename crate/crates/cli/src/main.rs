//! Command-line front end: generate or load traces, build dependency graphs,
//! partition, map, simulate, and run parameter sweeps, with file handoffs
//! between the standalone stages.
//!
//! Exit codes: 0 success, 1 stage failure, 2 usage or configuration error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use netos_core::depgraph::{build_depgraph_with, DepGraph, WeightRule};
use netos_core::error::Error as CoreError;
use netos_core::mapper::{
    format_mapping, map_processes, parse_mapping, CostParams, MappingAssignment, MeshTopology,
};
use netos_core::mlgraph::{assemble, derive_process_graph};
use netos_core::partitioner::{
    brute_force_partition, format_partition, greedy_partition_best_of, parse_partition,
    DEFAULT_ORACLE_LIMIT,
};
use netos_core::pipeline::{
    run_pipeline_on_trace, render_report_text, write_artifacts, RunConfig, TraceSource,
};
use netos_core::simkernel::{simulate, sweep, MappingPolicy, SimConfig};
use netos_core::trace::{emit_trace, Trace};

#[derive(Parser)]
#[command(name = "netos", version, about = "Trace-to-mesh pipeline: dependency graphs, overlapping partitioning, process mapping, cost-model simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write all artifacts to a directory.
    Pipeline(PipelineArgs),
    /// Evaluate the message microbenchmark over parameter ranges as CSV.
    Sweep(SweepArgs),
    /// Compare the greedy partitioner against the exhaustive oracle.
    Oracle(OracleArgs),
    /// Generate a synthetic trace.
    TraceGen(TraceGenArgs),
    /// Build the dependency graph and export it.
    Graph(GraphArgs),
    /// Partition a trace and write the cluster file.
    Partition(PartitionArgs),
    /// Map a partitioned trace onto a mesh and write the placement file.
    Map(MapArgs),
    /// Score a trace + partition + mapping with the cost model.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Trace file to read.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Generate a trace instead: <pattern>:<size>:<seed>.
    #[arg(long, value_name = "SPEC")]
    gen: Option<String>,
}

impl SourceArgs {
    fn resolve(&self) -> Result<TraceSource, CliError> {
        match (&self.trace, &self.gen) {
            (Some(path), None) => Ok(TraceSource::File(path.clone())),
            (None, Some(spec)) => {
                TraceSource::parse_generator_spec(spec).map_err(CliError::config)
            }
            _ => Err(CliError::Config(
                "exactly one of --trace and --gen is required".into(),
            )),
        }
    }

    fn load(&self) -> Result<Trace, CliError> {
        self.resolve()?.load().map_err(CliError::config)
    }
}

#[derive(Args)]
struct CostArgs {
    /// Cycles per byte per hop.
    #[arg(long = "hop-cost", default_value_t = 1)]
    hop_cost: u64,
    /// Cycles per shared frame split across cores.
    #[arg(long = "block-cost", default_value_t = 64)]
    block_cost: u64,
    /// Bytes per unit of message volume.
    #[arg(long = "msg-bytes", default_value_t = 1)]
    msg_bytes: u64,
    /// Co-location cap: processes per core before stacking stops.
    #[arg(long = "cap", default_value_t = 2)]
    cap: u32,
}

impl CostArgs {
    fn params(&self) -> CostParams {
        CostParams {
            hop_cost: self.hop_cost,
            block_op_cost: self.block_cost,
            msg_byte_size: self.msg_bytes,
            colocation_cap: self.cap,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Netos,
    Roundrobin,
    Random,
}

impl From<PolicyArg> for MappingPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Netos => MappingPolicy::Netos,
            PolicyArg::Roundrobin => MappingPolicy::RoundRobin,
            PolicyArg::Random => MappingPolicy::Random,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Also follow store-to-load dependencies on matching addresses.
    #[arg(long = "mem-deps")]
    mem_deps: bool,
    /// Unit edge weights instead of consumer latency.
    #[arg(long = "unit-weights")]
    unit_weights: bool,
    /// Core count N in the objective (defaults to the mesh size).
    #[arg(long)]
    cores: Option<u32>,
    /// Enable the overlapping-cluster replication pass.
    #[arg(long)]
    overlap: bool,
    /// Greedy restarts (consecutive seeds, best kept).
    #[arg(long, default_value_t = 1)]
    restarts: u32,
    /// Mesh dimensions as <W>x<H>.
    #[arg(long, default_value = "4x4")]
    mesh: String,
    #[command(flatten)]
    cost: CostArgs,
    /// Mapping policy.
    #[arg(long, value_enum, default_value = "netos")]
    policy: PolicyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame granularity: log2 of the page size in bytes.
    #[arg(long = "page-log2", default_value_t = 12)]
    page_log2: u8,
    /// Output directory for the report and stage artifacts.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Process pairs per instance: comma list or doubling range a..b.
    #[arg(long, default_value = "1,2")]
    pairs: String,
    /// Message sizes in KiB: comma list or doubling range a..b.
    #[arg(long, default_value = "1..64")]
    msg: String,
    /// Core counts: comma list or doubling range a..b.
    #[arg(long, default_value = "2..32")]
    cores: String,
    /// Policies to evaluate, comma separated.
    #[arg(long, default_value = "netos,roundrobin,random")]
    policies: String,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of standard output.
    #[arg(long = "out-file", value_name = "FILE")]
    out_file: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "mem-deps")]
    mem_deps: bool,
    /// Core count N in the objective.
    #[arg(long)]
    cores: u32,
    /// Node limit for the exhaustive enumeration.
    #[arg(long = "max-nodes", default_value_t = DEFAULT_ORACLE_LIMIT)]
    max_nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Greedy restarts (consecutive seeds, best kept).
    #[arg(long, default_value_t = 8)]
    restarts: u32,
}

#[derive(Args)]
struct TraceGenArgs {
    /// Generator spec <pattern>:<size>:<seed>.
    #[arg(long, value_name = "SPEC")]
    gen: String,
    /// Write the trace here instead of standard output.
    #[arg(long = "out-file", value_name = "FILE")]
    out_file: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "mem-deps")]
    mem_deps: bool,
    #[arg(long = "unit-weights")]
    unit_weights: bool,
    /// Emit DOT instead of the edge-list format.
    #[arg(long)]
    dot: bool,
    #[arg(long = "out-file", value_name = "FILE")]
    out_file: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "mem-deps")]
    mem_deps: bool,
    #[arg(long = "unit-weights")]
    unit_weights: bool,
    #[arg(long)]
    cores: u32,
    #[arg(long)]
    overlap: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    restarts: u32,
    #[arg(long = "out-file", value_name = "FILE")]
    out_file: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "mem-deps")]
    mem_deps: bool,
    #[arg(long = "unit-weights")]
    unit_weights: bool,
    /// Partition file produced by the partition stage.
    #[arg(long, value_name = "FILE")]
    partition: PathBuf,
    #[arg(long, default_value = "4x4")]
    mesh: String,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long = "page-log2", default_value_t = 12)]
    page_log2: u8,
    #[arg(long = "out-file", value_name = "FILE")]
    out_file: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "mem-deps")]
    mem_deps: bool,
    #[arg(long = "unit-weights")]
    unit_weights: bool,
    #[arg(long, value_name = "FILE")]
    partition: PathBuf,
    /// Mapping file produced by the map stage.
    #[arg(long, value_name = "FILE")]
    mapping: PathBuf,
    #[arg(long, default_value = "4x4")]
    mesh: String,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long = "page-log2", default_value_t = 12)]
    page_log2: u8,
    /// Emit JSON instead of key-value text.
    #[arg(long)]
    json: bool,
}

enum CliError {
    /// Bad flags, unreadable inputs, malformed specs: exit 2.
    Config(String),
    /// A pipeline stage failed on valid configuration: exit 1.
    Stage(String),
}

impl CliError {
    fn config(e: CoreError) -> CliError {
        CliError::Config(e.to_string())
    }

    fn stage(e: CoreError) -> CliError {
        CliError::Stage(e.to_string())
    }
}

fn parse_mesh(s: &str) -> Result<MeshTopology, CliError> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| CliError::Config(format!("mesh '{s}' must look like <W>x<H>")))?;
    let w: u32 = w
        .parse()
        .map_err(|_| CliError::Config(format!("bad mesh width '{w}'")))?;
    let h: u32 = h
        .parse()
        .map_err(|_| CliError::Config(format!("bad mesh height '{h}'")))?;
    MeshTopology::new(w, h).map_err(CliError::config)
}

/// Ranges are either comma lists (`1,2,4`) or doubling spans (`2..32`,
/// meaning 2, 4, 8, 16, 32).
fn parse_range(s: &str) -> Result<Vec<u32>, CliError> {
    let bad = |why: String| CliError::Config(format!("bad range '{s}': {why}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.parse().map_err(|_| bad(format!("bad start '{a}'")))?;
        let b: u32 = b.parse().map_err(|_| bad(format!("bad end '{b}'")))?;
        if a == 0 || b < a {
            return Err(bad("expected 1 <= start <= end".into()));
        }
        let mut out = Vec::new();
        let mut v = a;
        while v <= b {
            out.push(v);
            match v.checked_mul(2) {
                Some(next) => v = next,
                None => break,
            }
        }
        Ok(out)
    } else {
        s.split(',')
            .map(|tok| {
                let v: u32 = tok
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad value '{tok}'")))?;
                if v == 0 {
                    return Err(bad("values must be >= 1".into()));
                }
                Ok(v)
            })
            .collect()
    }
}

fn parse_policies(s: &str) -> Result<Vec<MappingPolicy>, CliError> {
    s.split(',')
        .map(|tok| tok.trim().parse::<MappingPolicy>().map_err(CliError::config))
        .collect()
}

fn weight_rule(unit: bool) -> WeightRule {
    if unit {
        WeightRule::Unit
    } else {
        WeightRule::ConsumerLatency
    }
}

fn load_depgraph(
    source: &SourceArgs,
    mem_deps: bool,
    unit_weights: bool,
) -> Result<(Trace, DepGraph), CliError> {
    let trace = source.load()?;
    let dep = build_depgraph_with(&trace, mem_deps, weight_rule(unit_weights));
    Ok((trace, dep))
}

fn emit_output(out_file: &Option<PathBuf>, contents: &str) -> Result<(), CliError> {
    match out_file {
        Some(path) => fs::write(path, contents).map_err(|e| {
            CliError::Stage(format!("cannot write {}: {e}", path.display()))
        }),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    let mesh = parse_mesh(&args.mesh)?;
    let source = args.source.resolve()?;
    let trace = source.load().map_err(CliError::config)?;
    let cfg = RunConfig {
        source,
        include_mem_deps: args.mem_deps,
        weight_rule: weight_rule(args.unit_weights),
        cores_n: args.cores,
        allow_overlap: args.overlap,
        restarts: args.restarts,
        mesh,
        params: args.cost.params(),
        policy: args.policy.into(),
        seed: args.seed,
        page_size_log2: args.page_log2,
    };
    let (report, artifacts) = run_pipeline_on_trace(trace, &cfg).map_err(CliError::stage)?;
    write_artifacts(&args.out, &report, &artifacts).map_err(CliError::stage)?;
    print!("{}", render_report_text(&report));
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let pairs = parse_range(&args.pairs)?;
    let msg = parse_range(&args.msg)?;
    let cores = parse_range(&args.cores)?;
    let policies = parse_policies(&args.policies)?;
    let table = sweep(
        &pairs,
        &msg,
        &cores,
        &policies,
        &args.cost.params(),
        args.seed,
    )
    .map_err(CliError::stage)?;
    for f in &table.failures {
        eprintln!(
            "skipped {} cores={} pairs={} msg={}KiB: {}",
            f.policy.name(),
            f.cores,
            f.pairs,
            f.msg_kib,
            f.reason
        );
    }
    emit_output(&args.out_file, &table.to_csv())
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let (_, dep) = load_depgraph(&args.source, args.mem_deps, false)?;
    let (oracle_state, oracle_q) =
        brute_force_partition(&dep, args.cores, args.max_nodes).map_err(|e| match e {
            CoreError::Refused(_) => CliError::config(e),
            other => CliError::stage(other),
        })?;
    let (greedy_state, greedy_q) =
        greedy_partition_best_of(&dep, args.cores, args.seed, args.restarts, false)
            .map_err(CliError::stage)?;
    println!("greedy_t_scaled: {}", greedy_q.t_scaled);
    println!("greedy_t: {}", greedy_q.t());
    println!("oracle_t_scaled: {}", oracle_q.t_scaled);
    println!("oracle_t: {}", oracle_q.t());
    println!("gap_scaled: {}", greedy_q.t_scaled - oracle_q.t_scaled);
    println!("greedy_partition:");
    print!("{}", format_partition(&greedy_state));
    println!("oracle_partition:");
    print!("{}", format_partition(&oracle_state));
    Ok(())
}

fn cmd_trace_gen(args: &TraceGenArgs) -> Result<(), CliError> {
    let source = TraceSource::parse_generator_spec(&args.gen).map_err(CliError::config)?;
    let trace = source.load().map_err(CliError::config)?;
    emit_output(&args.out_file, &emit_trace(&trace))
}

fn cmd_graph(args: &GraphArgs) -> Result<(), CliError> {
    let (_, dep) = load_depgraph(&args.source, args.mem_deps, args.unit_weights)?;
    let contents = if args.dot {
        dep.to_dot()
    } else {
        dep.to_edge_list()
    };
    emit_output(&args.out_file, &contents)
}

fn cmd_partition(args: &PartitionArgs) -> Result<(), CliError> {
    let (_, dep) = load_depgraph(&args.source, args.mem_deps, args.unit_weights)?;
    let (state, q) = greedy_partition_best_of(
        &dep,
        args.cores,
        args.seed,
        args.restarts.max(1),
        args.overlap,
    )
    .map_err(CliError::stage)?;
    eprintln!(
        "clusters={} w_seq={} w_par={} w_c={} t_scaled={} t={}",
        state.cluster_count(),
        q.w_seq,
        q.w_par,
        q.w_c,
        q.t_scaled,
        q.t()
    );
    emit_output(&args.out_file, &format_partition(&state))
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn cmd_map(args: &MapArgs) -> Result<(), CliError> {
    let mesh = parse_mesh(&args.mesh)?;
    let (_, dep) = load_depgraph(&args.source, args.mem_deps, args.unit_weights)?;
    let partition_text = read_file(&args.partition)?;
    let state = parse_partition(&partition_text, dep.node_count()).map_err(CliError::config)?;
    let pg = derive_process_graph(&dep, &state).map_err(CliError::stage)?;
    let mlg = assemble(&dep, &state, args.page_log2).map_err(CliError::stage)?;
    let assignment =
        map_processes(&pg, &mlg, &mesh, &args.cost.params()).map_err(CliError::stage)?;
    emit_output(&args.out_file, &format_mapping(&assignment))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mesh = parse_mesh(&args.mesh)?;
    let (_, dep) = load_depgraph(&args.source, args.mem_deps, args.unit_weights)?;
    let partition_text = read_file(&args.partition)?;
    let state = parse_partition(&partition_text, dep.node_count()).map_err(CliError::config)?;
    let pg = derive_process_graph(&dep, &state).map_err(CliError::stage)?;
    let mlg = assemble(&dep, &state, args.page_log2).map_err(CliError::stage)?;
    let mapping_text = read_file(&args.mapping)?;
    let placement = parse_mapping(&mapping_text, pg.process_count).map_err(CliError::config)?;
    let assignment =
        MappingAssignment::from_placement(placement, &pg, &mesh).map_err(CliError::stage)?;
    let config = SimConfig {
        mesh,
        params: args.cost.params(),
        policy: MappingPolicy::Netos,
        seed: 0,
    };
    let result = simulate(&pg, &mlg, &assignment, &config).map_err(CliError::stage)?;
    if args.json {
        let json = serde_json::to_string_pretty(&result)
            .map_err(|e| CliError::Stage(format!("serialization: {e}")))?;
        println!("{json}");
    } else {
        println!("makespan: {}", result.makespan);
        println!("msg_cycles: {}", result.total_msg_cycles);
        println!("block_cycles: {}", result.total_block_cycles);
        println!("msg_count: {}", result.msg_count);
        let busy: Vec<String> = result
            .per_core_busy
            .iter()
            .enumerate()
            .map(|(i, b)| format!("c{i}={b}"))
            .collect();
        println!("per_core_busy: {}", busy.join(","));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::TraceGen(args) => cmd_trace_gen(args),
        Command::Graph(args) => cmd_graph(args),
        Command::Partition(args) => cmd_partition(args),
        Command::Map(args) => cmd_map(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Stage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
