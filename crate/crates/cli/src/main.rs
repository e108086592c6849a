use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rfid_evidence::harness::gas::{self, GasParams, Policy};
use rfid_evidence::harness::{run_scenario, suite, FaultSpec, Scenario, ScenarioReport};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rfid-evidence", version, about = "Simulate and verify RFID readout evidence anchored on a chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file, or a shipped scenario by name.
    Run(RunArgs),
    /// Run every shipped scenario.
    Suite {
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for one transcript file per scenario.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List shipped scenarios.
    List,
    /// Annual gas cost of anchoring.
    Gas(GasArgs),
    /// Mean time to confirm one write under a gas price policy.
    ConfirmTime {
        /// fastest, average or cheap
        policy: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file, or the name of a shipped scenario.
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Node fault as NODE=MODE, e.g. 3=withhold. Repeatable; replaces the
    /// faults in the file.
    #[arg(long = "fault", value_name = "NODE=MODE")]
    faults: Vec<String>,
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    block_interval: Option<u64>,
    #[arg(long)]
    close: Option<u64>,
    #[arg(long)]
    apart: Option<u64>,
    #[arg(long)]
    read_range: Option<f64>,
    #[arg(long)]
    request_drop: Option<f64>,
    #[arg(long)]
    ack_drop: Option<f64>,
    /// Transcript file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GasArgs {
    /// fastest, average or cheap; all three when neither this nor --gwei is given.
    #[arg(long, conflicts_with = "gwei")]
    policy: Option<String>,
    #[arg(long)]
    gwei: Option<f64>,
    #[arg(long)]
    eth_usd: Option<f64>,
    #[arg(long, default_value_t = gas::WRITES_PER_DAY)]
    writes_per_day: u64,
}

fn load(name: &str) -> Result<Scenario> {
    if let Some(s) = suite::find(name) {
        return Ok(s);
    }
    let text = fs::read_to_string(name).with_context(|| format!("reading scenario {name}"))?;
    Ok(Scenario::from_toml(&text)?)
}

fn parse_fault(s: &str) -> Result<FaultSpec> {
    let Some((node, mode)) = s.split_once('=') else {
        bail!("fault `{s}` is not NODE=MODE");
    };
    Ok(FaultSpec {
        node: node.trim().parse().with_context(|| format!("fault node in `{s}`"))?,
        mode: mode.trim().to_string(),
    })
}

fn apply_overrides(s: &mut Scenario, a: &RunArgs) -> Result<()> {
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    let n = &mut s.network;
    if let Some(nodes) = a.nodes {
        n.nodes = nodes;
    }
    if !a.faults.is_empty() {
        n.faults = a.faults.iter().map(|f| parse_fault(f)).collect::<Result<_>>()?;
    }
    if let Some(t) = &a.topology {
        n.topology = t.clone();
    }
    if let Some(b) = a.block_interval {
        n.block_interval = b;
    }
    if let Some(p) = a.request_drop {
        n.request_drop = p;
    }
    if let Some(p) = a.ack_drop {
        n.ack_drop = p;
    }
    let t = &mut s.thresholds;
    if let Some(c) = a.close {
        t.close = c;
    }
    if let Some(c) = a.apart {
        t.apart = c;
    }
    if let Some(r) = a.read_range {
        t.read_range_m = r;
    }
    Ok(())
}

fn summary(r: &ScenarioReport) -> String {
    let passed = r.checks.iter().filter(|c| c.passed).count();
    format!(
        "{} seed {}: {} ({}/{} checks, {} leaks, atomic {}, transcript {})",
        r.name,
        r.seed,
        if r.passed() { "PASS" } else { "FAIL" },
        passed,
        r.checks.len(),
        r.leaks.len(),
        r.atomicity.matched,
        &r.transcript_digest().to_hex()[..16],
    )
}

fn run(a: RunArgs) -> Result<bool> {
    let mut s = load(&a.scenario)?;
    apply_overrides(&mut s, &a)?;
    let report = run_scenario(&s)?;
    match &a.out {
        Some(path) => fs::write(path, report.transcript_text()).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(report.transcript_text().as_bytes())?,
    }
    for f in report.failures() {
        eprintln!("failed {} {} at t={}: {}", f.kind, f.subject, f.at, f.detail);
    }
    for l in &report.leaks {
        eprintln!("leak: {} of {} in chain message {}", l.kind, l.subject, l.message);
    }
    eprintln!("{}", summary(&report));
    Ok(report.passed())
}

fn run_suite(seed: Option<u64>, out: Option<PathBuf>) -> Result<bool> {
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
    }
    let mut ok = true;
    for (report, (stem, _)) in suite::run_suite(seed)?.iter().zip(suite::SCENARIOS) {
        println!("{}", summary(report));
        ok &= report.passed();
        if let Some(dir) = &out {
            fs::write(dir.join(format!("{stem}.jsonl")), report.transcript_text())?;
        }
    }
    Ok(ok)
}

fn gas_report(a: GasArgs) -> Result<()> {
    let prices: Vec<(String, f64)> = match (&a.policy, a.gwei) {
        (Some(p), _) => {
            let p: Policy = p.parse()?;
            vec![(p.to_string(), p.gas_price_gwei())]
        }
        (None, Some(g)) => vec![("custom".into(), g)],
        (None, None) => Policy::ALL.iter().map(|p| (p.to_string(), p.gas_price_gwei())).collect(),
    };
    for (label, gwei) in prices {
        let mut params = GasParams::at_price(gwei);
        params.writes_per_day = a.writes_per_day;
        if let Some(e) = a.eth_usd {
            params.eth_usd = e;
        }
        let e = gas::estimate_gas(params)?;
        println!(
            "{}",
            json!({
                "policy": label,
                "gas_price_gwei": gwei,
                "gas_per_store": e.params.gas_per_store,
                "eth_usd": e.params.eth_usd,
                "eth_per_write": e.eth_per_write,
                "usd_per_write": e.usd_per_write,
                "writes_per_year": e.writes_per_year,
                "usd_per_year": e.usd_per_year,
                "deploy_usd": e.deploy_usd,
            })
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Suite { seed, out } => run_suite(seed, out),
        Command::List => {
            for s in suite::shipped() {
                println!("{:<24} {}", s.name, s.description);
            }
            Ok(true)
        }
        Command::Gas(a) => gas_report(a).map(|_| true),
        Command::ConfirmTime { policy } => gas::report_confirm_time(&policy)
            .map(|c| {
                println!("{}", json!({"policy": policy, "min_secs": c.min_secs, "max_secs": c.max_secs}));
                true
            })
            .map_err(Into::into),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
