//! `clfl`: run simulations, attack sweeps, latency benchmarks, the cost
//! model, and offline pseudonym tracing.
//!
//! Exit codes: 0 success, 1 assertion failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use clfl_core::bench::{cost_model, scheme_shapes, time_certificateless, time_pki, CostModelInput, SchemeProfile};
use clfl_core::clpa::{SystemParams, TraceOutcome, Tra};
use clfl_core::group::{Group, P256Group, WeierstrassCurve};
use clfl_core::sim::{self, CurveChoice, ScenarioKind, SimConfig, SimOutcome, TraExport, Transcript};

#[derive(Parser, Debug)]
#[command(name = "clfl", version, about = "Certificateless pseudonym authentication for federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write metrics.csv, transcript.jsonl and tra_state.json.
    Run(RunArgs),
    /// Sweep an attack scenario over many seeds.
    Attack(AttackArgs),
    /// Measure sign and verify latency for both schemes.
    Bench(BenchArgs),
    /// Measure, then evaluate the cost model and write cost_report.csv.
    Cost(CostArgs),
    /// Recover the real identity behind a pseudonym seen in a transcript.
    Trace(TraceArgs),
}

#[derive(Args, Debug)]
struct SimArgs {
    /// key = value configuration file; defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_curve)]
    curve: Option<CurveChoice>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Scenario name, or `all` for every attack.
    #[arg(long, default_value = "all")]
    scenario: String,
    /// Number of consecutive seeds starting at --seed (or the config seed).
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, value_parser = parse_curve, default_value = "prod")]
    curve: CurveChoice,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Payload size in bytes for both schemes.
    #[arg(long, default_value_t = 40)]
    payload: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CostArgs {
    #[command(flatten)]
    bench: BenchArgs,
    /// Training rounds N.
    #[arg(long, default_value_t = 50)]
    rounds: u64,
    /// User-to-user messages M.
    #[arg(long, default_value_t = 50)]
    messages: u64,
    #[arg(long, default_value_t = 5)]
    pairs: u64,
    #[arg(long, default_value_t = 4.0)]
    lambda: f64,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long)]
    transcript: PathBuf,
    /// TRA export; defaults to tra_state.json next to the transcript.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Encoded pseudonym, hex.
    #[arg(long)]
    aid: String,
}

fn parse_curve(s: &str) -> Result<CurveChoice, String> {
    s.parse()
}

enum Failure {
    Usage(anyhow::Error),
    Assertion(anyhow::Error),
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure::Usage(e.into())
    }

    fn assertion(e: impl Into<anyhow::Error>) -> Self {
        Failure::Assertion(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(args: &SimArgs) -> Result<SimConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::usage)?;
            SimConfig::parse(&text)
                .with_context(|| format!("in {}", path.display()))
                .map_err(Failure::usage)?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(curve) = args.curve {
        cfg.curve = curve;
    }
    cfg.validate().map_err(Failure::usage)?;
    Ok(cfg)
}

/// Writes every file or none: all contents are computed before the first
/// write, and files land in a staging directory that is renamed into place.
fn write_outputs(out: &Path, files: &[(&str, String)]) -> CmdResult {
    let io = |e: anyhow::Error| Failure::assertion(e);
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)
        .with_context(|| format!("creating {}", parent.display()))
        .map_err(io)?;
    let staging = parent.join(format!(
        ".{}.partial",
        out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    let _ = fs::remove_dir_all(&staging);
    fs::create_dir_all(&staging).context("creating staging directory").map_err(io)?;
    for (name, contents) in files {
        fs::write(staging.join(name), contents)
            .with_context(|| format!("writing {name}"))
            .map_err(io)?;
    }
    if out.exists() {
        for (name, _) in files {
            let target = out.join(name);
            fs::rename(staging.join(name), &target)
                .with_context(|| format!("moving {} into place", target.display()))
                .map_err(io)?;
        }
        let _ = fs::remove_dir_all(&staging);
    } else {
        fs::rename(&staging, out)
            .with_context(|| format!("creating {}", out.display()))
            .map_err(io)?;
    }
    Ok(())
}

fn run_outputs(outcome: &SimOutcome) -> Vec<(&'static str, String)> {
    vec![
        ("metrics.csv", outcome.metrics_csv()),
        ("transcript.jsonl", outcome.transcript.to_jsonl()),
        (
            "tra_state.json",
            serde_json::to_string_pretty(&outcome.tra_export).expect("export serializes") + "\n",
        ),
        (
            "summary.json",
            serde_json::to_string_pretty(&outcome.summary).expect("summary serializes") + "\n",
        ),
    ]
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let cfg = load_config(&args.sim)?;
    let outcome = sim::run(&cfg).map_err(Failure::usage)?;
    write_outputs(&args.out, &run_outputs(&outcome))?;

    let s = &outcome.summary;
    println!(
        "scenario={} curve={} seed={} rounds={} entities={} (+2 authorities)",
        cfg.scenario.kind,
        cfg.curve,
        cfg.seed,
        outcome.rounds.len(),
        s.entities
    );
    println!(
        "envelopes={} accepted={} rejected={} final_mse={:.6} pooled_mse={:.6}",
        s.envelopes, s.accepted, s.rejected, outcome.final_mse, outcome.pooled_mse
    );
    for (reason, n) in &s.rejects_by_reason {
        println!("  rejects[{reason}]={n}");
    }
    if let Some(rate) = s.detection_rate {
        println!("detection_rate={rate} ({}/{})", s.adversarial_rejected, s.adversarial);
    }
    println!("wrote {}", args.out.display());

    let fails = outcome.assertion_failures();
    if fails.is_empty() {
        Ok(())
    } else {
        Err(Failure::assertion(anyhow::anyhow!(fails.join("; "))))
    }
}

fn cmd_attack(args: AttackArgs) -> CmdResult {
    let base = load_config(&args.sim)?;
    let kinds: Vec<ScenarioKind> = if args.scenario == "all" {
        ScenarioKind::ATTACKS.to_vec()
    } else {
        let k: ScenarioKind = args.scenario.parse().map_err(|e: String| Failure::usage(anyhow::anyhow!(e)))?;
        if k == ScenarioKind::None {
            return Err(Failure::usage(anyhow::anyhow!("`none` is not an attack")));
        }
        vec![k]
    };
    if args.seeds == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--seeds must be at least 1")));
    }

    let mut csv = String::from("scenario,seed,adversarial,rejected,detection_rate,assertions\n");
    let mut failures = Vec::new();
    for kind in kinds {
        let (mut adv, mut rej) = (0usize, 0usize);
        for i in 0..args.seeds {
            let mut cfg = base.clone();
            cfg.scenario.kind = kind;
            cfg.seed = base.seed.wrapping_add(i);
            cfg.validate().map_err(Failure::usage)?;
            let out = sim::run(&cfg).map_err(Failure::usage)?;
            let s = &out.summary;
            let fails = out.assertion_failures();
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                kind,
                cfg.seed,
                s.adversarial,
                s.adversarial_rejected,
                s.detection_rate.map(|r| r.to_string()).unwrap_or_default(),
                if fails.is_empty() { "ok" } else { "fail" }
            ));
            adv += s.adversarial;
            rej += s.adversarial_rejected;
            failures.extend(fails.into_iter().map(|f| format!("{kind} seed {}: {f}", cfg.seed)));
        }
        let rate = if adv == 0 { 0.0 } else { rej as f64 / adv as f64 };
        println!("{kind}: {rej}/{adv} adversarial envelopes rejected over {} seeds, detection rate {rate}", args.seeds);
    }
    write_outputs(&args.out, &[("attack_report.csv", csv)])?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::assertion(anyhow::anyhow!(failures.join("; "))))
    }
}

struct Measured {
    profiles: Vec<SchemeProfile>,
    bench_csv: String,
}

fn measure_with<G: Group>(group: G, args: &BenchArgs) -> Result<Measured, Failure> {
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let cl = time_certificateless(group.clone(), args.iters, args.payload, &mut rng).map_err(Failure::usage)?;
    let pki = time_pki(group.clone(), args.iters, args.payload, &mut rng).map_err(Failure::usage)?;
    let (cl_shape, pki_shape) = scheme_shapes(group, args.payload, &mut rng).map_err(Failure::assertion)?;

    let mut csv = String::from("scheme,op,median_us,p25_us,p75_us,iqr_us,iterations\n");
    for t in [&cl, &pki] {
        for (op, st) in [("sign", &t.sign), ("verify", &t.verify)] {
            csv.push_str(&format!(
                "{},{},{:.3},{:.3},{:.3},{:.3},{}\n",
                t.scheme,
                op,
                st.median_us,
                st.p25_us,
                st.p75_us,
                st.iqr_us(),
                st.iterations
            ));
            println!(
                "{:<16} {:<6} median {:>10.2} us  IQR {:>8.2} us",
                t.scheme,
                op,
                st.median_us,
                st.iqr_us()
            );
        }
    }
    Ok(Measured {
        profiles: vec![
            SchemeProfile::measured(cl_shape, &cl),
            SchemeProfile::measured(pki_shape, &pki),
        ],
        bench_csv: csv,
    })
}

fn measure(args: &BenchArgs) -> Result<Measured, Failure> {
    match args.curve {
        CurveChoice::Toy => measure_with(WeierstrassCurve::toy(), args),
        CurveChoice::Prod => measure_with(P256Group::new(), args),
    }
}

/// The certificateless row must be strictly cheaper in bytes and
/// verification equations.
fn check_ordering(profiles: &[SchemeProfile]) -> CmdResult {
    let (cl, pki) = (&profiles[0].shape, &profiles[1].shape);
    println!(
        "bytes/message: certificateless {} vs pki {}; verify ops: {} vs {}",
        cl.bytes_per_message, pki.bytes_per_message, cl.verify_ops_per_message, pki.verify_ops_per_message
    );
    if cl.bytes_per_message < pki.bytes_per_message && cl.verify_ops_per_message < pki.verify_ops_per_message {
        Ok(())
    } else {
        Err(Failure::assertion(anyhow::anyhow!(
            "certificateless envelope is not strictly cheaper than the certificate baseline"
        )))
    }
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let m = measure(&args)?;
    write_outputs(&args.out, &[("bench.csv", m.bench_csv)])?;
    check_ordering(&m.profiles)
}

fn cmd_cost(args: CostArgs) -> CmdResult {
    let m = measure(&args.bench)?;
    let input = CostModelInput {
        rounds: args.rounds,
        messages: args.messages,
        pairs: args.pairs,
        poisson_lambda: args.lambda,
        schemes: m.profiles.clone(),
    };
    let report = cost_model(&input).map_err(Failure::usage)?;
    for r in &report.rows {
        println!(
            "{:<16} training {:>12.1} us  messaging {:>12.1} us  all users {:>12.1} us",
            r.scheme, r.training_cost_us, r.messaging_cost_us, r.training_cost_all_users_us
        );
    }
    write_outputs(
        &args.bench.out,
        &[("cost_report.csv", report.to_csv()), ("bench.csv", m.bench_csv)],
    )?;
    check_ordering(&m.profiles)
}

fn decode_hex_element<G: Group>(group: &G, hex_str: &str, what: &str) -> anyhow::Result<G::Element> {
    let bytes = hex::decode(hex_str).with_context(|| format!("{what} is not hex"))?;
    group
        .decode_element(&bytes)
        .map_err(|e| anyhow::anyhow!("{what}: {e}"))
}

fn trace_with<G: Group>(group: G, export: &TraExport, aid_bytes: &[u8]) -> Result<String, Failure> {
    let t_pub = decode_hex_element(&group, &export.t_pub, "t_pub").map_err(Failure::usage)?;
    let p_pub = decode_hex_element(&group, &export.p_pub, "p_pub").map_err(Failure::usage)?;
    let tra = Tra::restore(&export.tra, group.scalars()).map_err(Failure::usage)?;
    let params = SystemParams {
        group,
        t_pub,
        p_pub,
        config: export.protocol,
    };
    if !tra.matches_public_key(&params) {
        return Err(Failure::usage(anyhow::anyhow!("TRA state does not match its published key")));
    }
    let aid = params
        .decode_aid(aid_bytes)
        .map_err(|e| Failure::usage(anyhow::anyhow!("aid: {e}")))?;
    Ok(match tra.trace(&params, &aid) {
        TraceOutcome::Identified(rid) => rid.name(),
        TraceOutcome::Untraceable => "untraceable".to_string(),
    })
}

fn cmd_trace(args: TraceArgs) -> CmdResult {
    let aid_hex = args.aid.trim().to_ascii_lowercase();
    let aid_bytes = hex::decode(&aid_hex)
        .context("aid is not a hex string")
        .map_err(Failure::usage)?;

    let text = fs::read_to_string(&args.transcript)
        .with_context(|| format!("reading {}", args.transcript.display()))
        .map_err(Failure::usage)?;
    let transcript = Transcript::from_jsonl(&text)
        .map_err(|(line, e)| Failure::usage(anyhow::anyhow!("transcript line {line}: {e}")))?;
    if !transcript.events().iter().any(|e| e.aid.as_deref() == Some(aid_hex.as_str())) {
        return Err(Failure::assertion(anyhow::anyhow!("not-found: pseudonym does not appear in the transcript")));
    }

    let state_path = args.state.unwrap_or_else(|| {
        args.transcript
            .parent()
            .unwrap_or(Path::new("."))
            .join("tra_state.json")
    });
    let state = fs::read_to_string(&state_path)
        .with_context(|| format!("reading {}", state_path.display()))
        .map_err(Failure::usage)?;
    let export: TraExport = serde_json::from_str(&state)
        .with_context(|| format!("parsing {}", state_path.display()))
        .map_err(Failure::usage)?;

    let name = match export.tra.curve.as_str() {
        "p256" => trace_with(P256Group::new(), &export, &aid_bytes)?,
        "toy" => trace_with(WeierstrassCurve::toy(), &export, &aid_bytes)?,
        other => return Err(Failure::usage(anyhow::anyhow!("unknown curve `{other}` in TRA state"))),
    };
    println!("{name}");
    Ok(())
}
