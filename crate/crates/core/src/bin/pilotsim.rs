use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pilotsim::assignment::{assign_in_order, SchemeConfig, SchemeId};
use pilotsim::harness::{parse_scheme_list, run_experiment, write_atomic, ConfigFile, ExperimentSpec, Sweep};
use pilotsim::network::{generate_drop, normalize_powers, AssociationMap, NetworkConfig};
use pilotsim::protocol::{audit_overhead, run_protocol, OverheadReport};
use pilotsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pilotsim",
    version,
    about = "Pilot assignment experiments for distributed massive MIMO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sum SE against the number of UEs.
    SweepUes(SweepArgs),
    /// Sum SE against the pilot length.
    SweepPilots(SweepArgs),
    /// Sum SE against the association threshold.
    SweepAssoc(SweepArgs),
    /// Per-user SE distribution at the base configuration.
    Cdf(CommonArgs),
    /// Runs DPB as message passing on one drop and audits the signalling.
    ProtocolAudit(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat JSON config applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated schemes: eem, dpb, random, scalable.
    #[arg(long)]
    scheme: Option<String>,
    /// Monte-Carlo drops per sweep point [default: 200, or 50 with --desk-scale].
    #[arg(long)]
    drops: Option<usize>,
    /// Master seed; every drop seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Smaller network (30 APs, 50 UEs) and fewer default drops.
    #[arg(long)]
    desk_scale: bool,
    /// Worker threads [default: all cores]. Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

struct Resolved {
    net: NetworkConfig,
    spec: ExperimentSpec,
}

/// Preset, then config file, then command-line flags.
fn resolve(args: &CommonArgs, sweep: Sweep, preset: impl FnOnce(&mut NetworkConfig)) -> Result<Resolved> {
    let mut net = if args.desk_scale {
        NetworkConfig::desk_scale()
    } else {
        NetworkConfig::default()
    };
    preset(&mut net);
    let mut params = SchemeConfig::new(SchemeId::Dpb);
    let mut schemes = SchemeId::ALL.to_vec();
    let mut lsfd = Default::default();
    let mut num_drops = if args.desk_scale { 50 } else { 200 };

    if let Some(path) = &args.config {
        let file = ConfigFile::load(path)?;
        file.apply_network(&mut net);
        file.apply_scheme(&mut params);
        if let Some(s) = file.schemes()? {
            schemes = s;
        }
        lsfd = file.lsfd.unwrap_or(lsfd);
        num_drops = file.num_drops.unwrap_or(num_drops);
    }
    if let Some(s) = &args.scheme {
        schemes = parse_scheme_list(s)?;
    }
    if let Some(d) = args.drops {
        num_drops = d;
    }
    if let Some(s) = args.seed {
        params.seed = s;
    }
    net.validate()?;

    let spec = ExperimentSpec {
        scheme_params: params.clone(),
        lsfd,
        schemes,
        num_drops,
        master_seed: params.seed,
        threads: args.threads,
        ..ExperimentSpec::new(net.clone(), sweep, args.out.clone())
    };
    Ok(Resolved { net, spec })
}

fn as_counts(values: &[f64]) -> Result<Vec<usize>> {
    values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!("{v} is not a positive integer")))
            }
        })
        .collect()
}

fn run_sweep(cmd: &Command, args: &SweepArgs) -> Result<()> {
    let desk = args.common.desk_scale;
    let sweep = match cmd {
        Command::SweepUes(_) => Sweep::UeCount(match &args.values {
            Some(v) => as_counts(v)?,
            None if desk => vec![30, 40, 50, 60],
            None => (50..=100).step_by(10).collect(),
        }),
        Command::SweepPilots(_) => Sweep::PilotLength(match &args.values {
            Some(v) => as_counts(v)?,
            None => (3..=15).step_by(2).collect(),
        }),
        Command::SweepAssoc(_) => Sweep::AssocThreshold(
            args.values
                .clone()
                .unwrap_or_else(|| vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0]),
        ),
        _ => unreachable!(),
    };
    let pilots = matches!(cmd, Command::SweepPilots(_));
    let r = resolve(&args.common, sweep, |net| {
        if pilots {
            // every swept pilot length must stay below the antenna count
            net.antennas_per_ap = 16;
        }
    })?;
    report_experiment(&r.spec)
}

fn report_experiment(spec: &ExperimentSpec) -> Result<()> {
    let out = run_experiment(spec)?;
    eprintln!(
        "{} rows -> {}, {}",
        out.results.len(),
        out.rows_csv.display(),
        out.aggregate_csv.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AuditSummary {
    drop_seed: u64,
    num_aps: usize,
    num_ues: usize,
    pilot_length: usize,
    matches_direct_assignment: bool,
    #[serde(flatten)]
    overhead: OverheadReport,
}

fn protocol_audit(args: &CommonArgs) -> Result<()> {
    let r = resolve(args, Sweep::Cdf, |_| {})?;
    let net = &r.net;
    let drop_seed = r.spec.drop_seed(0, 0);
    let real = generate_drop(net, drop_seed)?;
    let assoc = AssociationMap::build(&real, net.assoc_threshold);
    let powers = normalize_powers(net);
    let scheme = SchemeConfig {
        scheme: SchemeId::Dpb,
        seed: drop_seed,
        ..r.spec.scheme_params.clone()
    };
    let order: Vec<usize> = (0..real.num_ues()).collect();
    let (via_messages, log) = run_protocol(&real, &assoc, &scheme, &powers, net.pilot_length, &order)?;
    let (direct, _) = assign_in_order(&scheme, &real, &assoc, &powers, net.pilot_length, &order)?;
    let overhead = audit_overhead(&log, &assoc, scheme.dpb_s)?;

    std::fs::create_dir_all(&args.out)?;
    let mut trace = Vec::new();
    log.export(&mut trace)?;
    write_atomic(&args.out.join("trace.csv"), &trace)?;
    let summary = AuditSummary {
        drop_seed,
        num_aps: real.num_aps(),
        num_ues: real.num_ues(),
        pilot_length: net.pilot_length,
        matches_direct_assignment: via_messages == direct,
        overhead,
    };
    write_atomic(
        &args.out.join("audit.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    eprintln!(
        "{} messages, direct assignment {}",
        summary.overhead.total_messages,
        if summary.matches_direct_assignment {
            "matches"
        } else {
            "DIFFERS"
        }
    );
    if !summary.matches_direct_assignment {
        return Err(Error::Protocol(
            "message-passing result differs from direct assignment".into(),
        ));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        cmd @ (Command::SweepUes(a) | Command::SweepPilots(a) | Command::SweepAssoc(a)) => run_sweep(cmd, a),
        Command::Cdf(a) => report_experiment(&resolve(a, Sweep::Cdf, |_| {})?.spec),
        Command::ProtocolAudit(a) => protocol_audit(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
