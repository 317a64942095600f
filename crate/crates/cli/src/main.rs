//! Command-line front end: instance generation and validation, inspection,
//! guard construction, both engines, the exact oracles, plan execution, and
//! report aggregation.
//!
//! Exit codes: 0 on success, 1 when an assertion or validation check fails,
//! 2 on usage, parse, or I/O problems.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use decaysim::config::ScenarioConfig;
use decaysim::conflict::{
    build_guard_set, disk_decomposition, verify_guard_property, Endpoint, GuardRole,
};
use decaysim::decayspace::{
    generate_broadcast_instance, generate_instance, validate_quasi_metric, Instance,
};
use decaysim::harness::{report as harness_report, run_plan, OUTPUT_ROOT_ENV};
use decaysim::instance_io::{
    instance_digest, instance_to_string, load_instance, load_plan, FORMAT_VERSION,
};
use decaysim::oams::{oams_run, power_ladder_for};
use decaysim::oracle::{
    exact_chain_expectation, exact_min_schedule, offline_optimal_broadcast, ChainSpec,
};
use decaysim::sinrcore::{
    ack_affectance_ratio, power_conditions_check, waff, AffectanceMatrix, QuasiLink,
};
use decaysim::spaids::spaids_run;

#[derive(Parser)]
#[command(
    name = "decaysim",
    about = "SINR scheduling and online broadcast simulators over decay spaces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an instance and print (or save) its structured-text form.
    Generate(GenerateArgs),
    /// Check the quasi-metric axioms of an instance file.
    Validate(InstanceArg),
    /// Print link, power-condition, affectance, and WAFF diagnostics.
    Inspect(InstanceArg),
    /// Build and verify a guard set around a node.
    Guards(GuardsArgs),
    /// Run the scheduling engine on an instance.
    Spaids(SpaidsArgs),
    /// Run the online broadcast engine on an instance.
    Oams(OamsArgs),
    /// Exact brute-force references for small instances.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Execute every (row, seed) cell of an experiment plan.
    RunPlan(RunPlanArgs),
    /// Aggregate metrics CSVs into a plot-ready report.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Base config file (structured text); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short = 'n')]
    nodes: Option<usize>,
    #[arg(long)]
    links: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Star topology with node 0 as the single sender (needs sigma = 1).
    #[arg(long)]
    broadcast: bool,
    /// Output path; stdout when omitted.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InstanceArg {
    /// Instance file in the structured-text format.
    #[arg(long, short = 'i')]
    instance: PathBuf,
}

#[derive(Args)]
struct GuardsArgs {
    #[arg(long, short = 'i')]
    instance: PathBuf,
    /// Node to guard.
    #[arg(long)]
    target: usize,
    #[arg(long, value_parser = ["receiver", "sender"], default_value = "receiver")]
    role: String,
    /// Disk count of the decomposition.
    #[arg(long)]
    disks: Option<usize>,
    /// Power ratio R of the decomposition radii.
    #[arg(long, default_value_t = 1.0)]
    power_ratio: f64,
    /// Base quasi-distance unit; nearest-neighbour distance when omitted.
    #[arg(long)]
    base: Option<f64>,
    /// Uniform per-node probability override.
    #[arg(long)]
    prob: Option<f64>,
}

#[derive(Args)]
struct SpaidsArgs {
    #[arg(long, short = 'i')]
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the epoch budget.
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Per-slot CSV trace output path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary output path; stdout when omitted.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OamsArgs {
    #[arg(long, short = 'i')]
    instance: PathBuf,
    /// Comma-separated seed list.
    #[arg(long, default_value = "0", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Override the round budget.
    #[arg(long)]
    rounds: Option<usize>,
    /// Chain-trace CSV path; per-seed suffix added for multiple seeds.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exact minimum slot count (at most 12 links).
    MinSchedule(InstanceArg),
    /// Offline broadcast optimum (at most 12 receivers, 8 ladder states).
    Broadcast(InstanceArg),
    /// Exact chain expectations from a chain-spec file.
    Chain {
        /// Chain spec in structured text.
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Args)]
struct RunPlanArgs {
    /// Plan file in the structured-text format.
    plan: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Metrics CSV files produced by run-plan.
    metrics: Vec<PathBuf>,
    /// Output directory; DECAYSIM_OUT or ./decaysim-out when omitted.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

fn emit<T: Serialize>(kind: &str, value: &T, out: Option<&PathBuf>) -> Result<()> {
    let body = toml::to_string(value)?;
    let text = format!("# decaysim/{kind} v{FORMAT_VERSION}\n{body}");
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| path.display().to_string())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(path: &PathBuf) -> Result<Instance> {
    load_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn cmd_generate(args: GenerateArgs) -> Result<u8> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<ScenarioConfig>(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(n) = args.nodes {
        config.n_nodes = n;
    }
    if let Some(m) = args.links {
        config.n_links = Some(m);
    }
    if let Some(s) = args.sigma {
        config.sigma = s;
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    let instance = if args.broadcast {
        generate_broadcast_instance(&config, args.seed)?
    } else {
        generate_instance(&config, args.seed)?
    };
    let text = instance_to_string(&instance)?;
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

#[derive(Serialize)]
struct ValidateOutput {
    instance: String,
    digest: String,
    valid: bool,
    report: decaysim::decayspace::ValidationReport,
}

fn cmd_validate(args: InstanceArg) -> Result<u8> {
    let instance = load(&args.instance)?;
    let report = validate_quasi_metric(&instance.space);
    let valid = report.is_valid();
    let out = ValidateOutput {
        instance: args.instance.display().to_string(),
        digest: instance_digest(&instance)?,
        valid,
        report,
    };
    emit("validation-report", &out, None)?;
    Ok(if valid { 0 } else { 1 })
}

#[derive(Serialize)]
struct LinkView {
    id: usize,
    sender: usize,
    receiver: usize,
    quasi_length: f64,
    power: f64,
    prob: f64,
    /// WAFF of all other links on this one.
    waff_rest: f64,
}

#[derive(Serialize)]
struct InspectOutput {
    digest: String,
    n_nodes: usize,
    n_links: usize,
    power_spread: f64,
    length_spread: f64,
    links: Vec<LinkView>,
    power_conditions: decaysim::sinrcore::PowerConditionReport,
    affectance: AffectanceMatrix,
    max_ack_ratio: Option<f64>,
}

fn cmd_inspect(args: InstanceArg) -> Result<u8> {
    let instance = load(&args.instance)?;
    let space = &instance.space;
    let config = &instance.config;
    let mut links = Vec::new();
    for link in &instance.links {
        let rest: Vec<&QuasiLink> =
            instance.links.iter().filter(|l| l.id != link.id).collect();
        links.push(LinkView {
            id: link.id,
            sender: link.sender,
            receiver: link.receiver,
            quasi_length: link.quasi_length,
            power: link.power,
            prob: link.prob,
            waff_rest: waff(rest.into_iter(), link, space)?,
        });
    }
    let mut max_ack_ratio = None;
    for i in &instance.links {
        for j in &instance.links {
            if i.id == j.id {
                continue;
            }
            let r = ack_affectance_ratio(i, j, space, config)?;
            if r.ratio.is_finite() {
                max_ack_ratio =
                    Some(max_ack_ratio.map_or(r.ratio, |m: f64| m.max(r.ratio)));
            }
        }
    }
    let out = InspectOutput {
        digest: instance_digest(&instance)?,
        n_nodes: space.n(),
        n_links: instance.links.len(),
        power_spread: instance.power_spread(),
        length_spread: instance.length_spread(),
        links,
        power_conditions: power_conditions_check(&instance.links, space, config),
        affectance: AffectanceMatrix::compute(
            &instance.links,
            space,
            &format!("{:?}", config.power_scheme),
        )?,
        max_ack_ratio,
    };
    emit("inspect", &out, None)?;
    Ok(0)
}

#[derive(Serialize)]
struct GuardsOutput {
    target: usize,
    role: String,
    base: f64,
    guards: decaysim::conflict::GuardSet,
    report: decaysim::conflict::GuardReport,
    independence_ok: bool,
    property1_violations: usize,
}

fn cmd_guards(args: GuardsArgs) -> Result<u8> {
    let instance = load(&args.instance)?;
    let space = &instance.space;
    let config = &instance.config;
    if args.target >= space.n() {
        bail!("target {} out of range for {} nodes", args.target, space.n());
    }
    let base = args.base.unwrap_or_else(|| {
        (0..space.n())
            .filter(|&z| z != args.target)
            .map(|z| space.q(args.target, z))
            .fold(f64::INFINITY, f64::min)
    });
    if !(base > 0.0) {
        bail!("base unit must be positive (got {base})");
    }
    let max_d = (0..space.n())
        .filter(|&z| z != args.target)
        .map(|z| space.q(args.target, z))
        .fold(0.0f64, f64::max);
    let disks = args.disks.unwrap_or_else(|| {
        (((max_d - args.power_ratio * base * config.gamma1) / base).ceil() as usize + 2).max(2)
    });
    let probs = match args.prob {
        Some(p) => vec![p; space.n()],
        None => instance.node_probs(),
    };
    let anchor = QuasiLink::new(0, args.target, (args.target + 1) % space.n(), base, 1.0, 0.5);
    let decomposition =
        disk_decomposition(&anchor, Endpoint::Sender, space, config, args.power_ratio, disks)?;
    let role = match args.role.as_str() {
        "sender" => GuardRole::Sender,
        _ => GuardRole::Receiver,
    };
    let guards = build_guard_set(args.target, role, &decomposition, space, &probs, config)?;
    let report = verify_guard_property(&guards, space, &probs, config)?;
    let independence_ok = report.independence_ok();
    let property1_violations = report.property1_violations();
    let out = GuardsOutput {
        target: args.target,
        role: args.role.clone(),
        base,
        guards,
        report,
        independence_ok,
        property1_violations,
    };
    emit("guard-report", &out, None)?;
    Ok(if independence_ok { 0 } else { 1 })
}

#[derive(Serialize)]
struct SpaidsSummary {
    digest: String,
    seed: u64,
    slots: usize,
    rounds: usize,
    epochs: usize,
    partial: bool,
    clamped_colors: usize,
    power_spread: f64,
    length_spread: f64,
    schedule: Vec<Vec<usize>>,
    quits: Vec<decaysim::spaids::QuitRecord>,
    ack_stats: decaysim::spaids::AckStats,
}

fn cmd_spaids(args: SpaidsArgs) -> Result<u8> {
    let mut instance = load(&args.instance)?;
    if let Some(m) = args.max_epochs {
        instance.config.max_epochs = m;
    }
    let result = spaids_run(&instance, args.seed)?;
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["slot", "phase", "link", "transmitted", "sinr", "data_ok", "ack_ok", "quit"])?;
        for row in &result.slot_log {
            w.write_record([
                row.round.to_string(),
                row.phase.to_string(),
                row.link.to_string(),
                (row.transmitted as u8).to_string(),
                row.sinr.map_or(String::new(), |s| s.to_string()),
                (row.data_ok as u8).to_string(),
                (row.ack_ok as u8).to_string(),
                (row.quit as u8).to_string(),
            ])?;
        }
        w.flush()?;
    }
    let summary = SpaidsSummary {
        digest: instance_digest(&instance)?,
        seed: args.seed,
        slots: result.slot_count(),
        rounds: result.total_rounds,
        epochs: result.epochs,
        partial: result.partial,
        clamped_colors: result.clamped_colors,
        power_spread: result.power_spread,
        length_spread: result.length_spread,
        schedule: result.slots.clone(),
        quits: result.quits.clone(),
        ack_stats: result.ack_stats.clone(),
    };
    emit("spaids-summary", &summary, args.out.as_ref())?;
    Ok(if result.partial { 1 } else { 0 })
}

#[derive(Serialize)]
struct OamsSummary {
    digest: String,
    seed: u64,
    result: decaysim::oams::BroadcastResult,
}

fn cmd_oams(args: OamsArgs) -> Result<u8> {
    let mut instance = load(&args.instance)?;
    if let Some(r) = args.rounds {
        instance.config.max_rounds = r;
    }
    let mut code = 0u8;
    for (ix, &seed) in args.seeds.iter().enumerate() {
        let run = oams_run(&instance, seed)?;
        if let Some(base) = &args.trace_csv {
            let path = if args.seeds.len() == 1 {
                base.clone()
            } else {
                let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
                let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
                base.with_file_name(format!("{stem}_s{seed}.{ext}"))
            };
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record([
                "round", "state", "power", "targets", "successes", "charged", "battery",
            ])?;
            for row in &run.trace.rows {
                w.write_record([
                    row.round.to_string(),
                    row.state.to_string(),
                    row.power.to_string(),
                    row.targets.to_string(),
                    row.successes.to_string(),
                    row.charged.to_string(),
                    row.battery_after.to_string(),
                ])?;
            }
            w.flush()?;
        }
        if run.result.consumed > instance.config.battery + 1e-9 {
            code = 1;
        }
        let summary = OamsSummary {
            digest: instance_digest(&instance)?,
            seed,
            result: run.result,
        };
        let out = args.out.as_ref().map(|base| {
            if args.seeds.len() == 1 || ix == 0 {
                base.clone()
            } else {
                base.with_extension(format!("s{seed}.toml"))
            }
        });
        emit("oams-summary", &summary, out.as_ref())?;
    }
    Ok(code)
}

fn cmd_oracle(cmd: OracleCommand) -> Result<u8> {
    match cmd {
        OracleCommand::MinSchedule(args) => {
            let instance = load(&args.instance)?;
            let r = exact_min_schedule(&instance, &instance.config)?;
            emit("oracle-min-schedule", &r, None)?;
        }
        OracleCommand::Broadcast(args) => {
            let instance = load(&args.instance)?;
            let ladder = power_ladder_for(&instance)?;
            let r = offline_optimal_broadcast(&instance, &ladder, &instance.config)?;
            emit("oracle-broadcast", &r, None)?;
        }
        OracleCommand::Chain { spec } => {
            let text = std::fs::read_to_string(&spec)?;
            let spec: ChainSpec = toml::from_str(&text)?;
            let r = exact_chain_expectation(&spec)?;
            emit("oracle-chain", &r, None)?;
        }
    }
    Ok(0)
}

fn cmd_run_plan(args: RunPlanArgs) -> Result<u8> {
    let plan = load_plan(&args.plan)?;
    let out = run_plan(&plan)?;
    eprintln!(
        "{} records -> {} ({} assertion failures)",
        out.records.len(),
        out.metrics_path.display(),
        out.failures
    );
    Ok(if out.failures > 0 { 1 } else { 0 })
}

fn cmd_report(args: ReportArgs) -> Result<u8> {
    if args.metrics.is_empty() {
        bail!("report needs at least one metrics file");
    }
    let out_dir = args
        .out
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("decaysim-out"));
    let rep = harness_report(&args.metrics, &out_dir)?;
    eprintln!("{} report rows -> {}", rep.rows.len(), rep.report_path.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Guards(args) => cmd_guards(args),
        Command::Spaids(args) => cmd_spaids(args),
        Command::Oams(args) => cmd_oams(args),
        Command::Oracle(cmd) => cmd_oracle(cmd),
        Command::RunPlan(args) => cmd_run_plan(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
