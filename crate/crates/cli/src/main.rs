//! `rnft` — build referable-NFT ledgers from the command line, grow random
//! reference graphs, and export payoff reports.
//!
//! Usage errors exit 2 (clap's convention); domain errors exit 1 after
//! printing one machine-readable line: `error: <Code>: <message>`.

mod session;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rnft_core::chain::{tran_gen, ChainState, GenesisConfig, Payload, Receipt};
use rnft_core::graph::TokenId;
use rnft_core::incentive::{payoff_csv_row, payoff_of, IncentiveParams, PAYOFF_CSV_HEADER};
use rnft_core::scenario::{report_csv, run_scenario, ScenarioConfig};
use rnft_core::sig::key_gen;

use session::{CliError, Session};

#[derive(Parser)]
#[command(name = "rnft", version, about = "Referable NFT ledger simulator")]
struct Cli {
    /// Ledger state file.
    #[arg(long, global = true, default_value = "rnft-state.json")]
    state: PathBuf,

    /// Re-assert registry and chain invariants after every command.
    #[arg(long, global = true)]
    check_invariants: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Create a fresh ledger state file.
    Init {
        /// Genesis config (JSON: genesisTime, blockInterval, initialAccounts).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Submit a mint transaction to the mempool (takes effect at `seal`).
    Mint {
        /// Signer seed string; the account is derived from it.
        #[arg(long)]
        signer: String,
        /// Referenced token ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        refers: Vec<u64>,
        /// Profit weight per referenced token, comma separated.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        /// Free-form labels, comma separated.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        /// Metadata entries as key=value.
        #[arg(long = "meta")]
        metadata: Vec<String>,
    },
    /// Seal the mempool into the next block.
    Seal,
    /// Query the registry.
    Query {
        #[command(subcommand)]
        what: QueryCommand,
    },
    /// Compute payoff rows (CSV) for one token or the whole registry.
    Payoff {
        /// Incentive parameter file (JSON: O_hat, lambda, alpha, beta, g, k_scale).
        #[arg(long)]
        params: PathBuf,
        /// Restrict to a single token.
        #[arg(long)]
        token: Option<u64>,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grow a ledger from a scenario config and write all artifacts.
    Simulate {
        /// Scenario config file (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for report.csv, graph.dot, snapshot.json,
        /// txlog.jsonl, blocks.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the registry or a payoff report.
    Export {
        #[arg(long)]
        format: Format,
        /// Incentive parameter file; required for --format csv.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a script: one command per line, '#' starts a comment.
    Run { script: PathBuf },
}

#[derive(Subcommand, Clone)]
enum QueryCommand {
    /// Tokens this one refers to (out-edges).
    Referring { token: u64 },
    /// Tokens referring to this one (in-edges).
    Referred { token: u64 },
    /// All transitive referents.
    Ancestors { token: u64 },
    /// All transitive referrers.
    Descendants { token: u64 },
    /// Creation timestamp (sealing block time).
    Timestamp { token: u64 },
    /// Current owner address.
    Owner { token: u64 },
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Dot,
    Json,
    Csv,
}

/// Parser for script lines: the subcommand grammar without global flags.
#[derive(Parser)]
#[command(name = "rnft", no_binary_name = true)]
struct ScriptLine {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut session = match Session::open(&cli.state, cli.check_invariants) {
        Ok(session) => session,
        Err(e) => return fail(e),
    };
    match run_command(&mut session, &cli.command).and_then(|_| {
        session.check()?;
        session.save()
    }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {}: {}", e.code, e.message);
    ExitCode::FAILURE
}

fn run_command(session: &mut Session, command: &Command) -> Result<(), CliError> {
    match command {
        Command::Init { config } => init(session, config.as_deref()),
        Command::Mint {
            signer,
            refers,
            weights,
            labels,
            metadata,
        } => mint(session, signer, refers, weights, labels, metadata),
        Command::Seal => seal(session),
        Command::Query { what } => query(session, what),
        Command::Payoff { params, token, out } => payoff(session, params, *token, out.as_deref()),
        Command::Simulate { config, seed, out } => simulate(config, *seed, out),
        Command::Export { format, params, out } => {
            export(session, *format, params.as_deref(), out.as_deref())
        }
        Command::Run { script } => run_script(session, script),
    }
}

fn init(session: &mut Session, config: Option<&Path>) -> Result<(), CliError> {
    let genesis = match config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => GenesisConfig::default(),
    };
    let state = ChainState::new(genesis);
    println!(
        "initialized ledger (genesis timestamp {}, block interval {}s)",
        state.config.genesis_time, state.config.block_interval
    );
    session.replace(state);
    Ok(())
}

fn mint(
    session: &mut Session,
    signer: &str,
    refers: &[u64],
    weights: &[f64],
    labels: &[String],
    metadata: &[String],
) -> Result<(), CliError> {
    let mut meta = BTreeMap::new();
    for entry in metadata {
        let (key, value) = entry.split_once('=').ok_or_else(|| {
            CliError::new("InvalidArgument", format!("--meta `{entry}` is not key=value"))
        })?;
        meta.insert(key.to_string(), value.to_string());
    }
    let pair = key_gen(signer.as_bytes());
    let state = session.state_mut()?;
    let pending = state
        .mempool()
        .iter()
        .filter(|tx| tx.sender == pair.address())
        .count() as u64;
    let nonce = state.accounts().get(&pair.address()).copied().unwrap_or(0) + pending;
    let payload = Payload::Mint {
        referring: refers.iter().copied().map(TokenId).collect(),
        weights: weights.to_vec(),
        labels: labels.to_vec(),
    };
    state.submit_tx(tran_gen(&pair, payload, nonce, meta))?;
    println!(
        "submitted mint (sender={} nonce={} refers={:?})",
        pair.address(),
        nonce,
        refers
    );
    Ok(())
}

fn seal(session: &mut Session) -> Result<(), CliError> {
    let state = session.state_mut()?;
    let block = state.seal_block();
    println!(
        "sealed block {} at {} ({} txs, root {})",
        block.height,
        block.timestamp,
        block.transactions.len(),
        block.state_root
    );
    for (i, receipt) in block.receipts.iter().enumerate() {
        match receipt {
            Receipt::Success { minted: Some(token) } => println!("  tx {i}: minted token {token}"),
            Receipt::Success { minted: None } => println!("  tx {i}: ok"),
            Receipt::Failed { reason } => println!("  tx {i}: failed: {reason}"),
        }
    }
    Ok(())
}

fn query(session: &Session, what: &QueryCommand) -> Result<(), CliError> {
    let graph = session.state()?.graph();
    let list = |ids: Vec<TokenId>| {
        ids.iter()
            .map(TokenId::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    let line = match what {
        QueryCommand::Referring { token } => list(graph.referring_of(TokenId(*token))?),
        QueryCommand::Referred { token } => list(graph.referred_of(TokenId(*token))?),
        QueryCommand::Ancestors { token } => {
            list(graph.ancestors(TokenId(*token))?.into_iter().collect())
        }
        QueryCommand::Descendants { token } => {
            list(graph.descendants(TokenId(*token))?.into_iter().collect())
        }
        QueryCommand::Timestamp { token } => {
            graph.created_timestamp_of(TokenId(*token))?.to_string()
        }
        QueryCommand::Owner { token } => graph.owner_of(TokenId(*token))?.to_string(),
    };
    println!("{line}");
    Ok(())
}

fn load_params(path: &Path) -> Result<IncentiveParams, CliError> {
    let params: IncentiveParams = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    params.validate()?;
    Ok(params)
}

fn payoff(
    session: &Session,
    params_path: &Path,
    token: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let params = load_params(params_path)?;
    let graph = session.state()?.graph();
    let tokens: Vec<TokenId> = match token {
        Some(id) => vec![TokenId(id)],
        None => graph.token_ids().collect(),
    };
    let mut csv = String::from(PAYOFF_CSV_HEADER);
    csv.push('\n');
    for token in tokens {
        let breakdown = payoff_of(graph, token, &params)?;
        csv.push_str(&payoff_csv_row(token, &breakdown));
        csv.push('\n');
    }
    emit(out, &csv)
}

fn simulate(config_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<(), CliError> {
    let mut config: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(config_path)?)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let (state, rows) = run_scenario(&config)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.csv"), report_csv(&rows))?;
    std::fs::write(out_dir.join("graph.dot"), state.graph().to_dot())?;
    std::fs::write(
        out_dir.join("snapshot.json"),
        state.graph().to_snapshot_json() + "\n",
    )?;
    std::fs::write(out_dir.join("txlog.jsonl"), state.tx_log_jsonl())?;
    let summaries: Vec<serde_json::Value> = state
        .blocks()
        .iter()
        .map(|b| {
            serde_json::json!({
                "height": b.height,
                "timestamp": b.timestamp,
                "parentHash": b.parent_hash,
                "stateRoot": b.state_root,
                "txs": b.transactions.len(),
                "failures": b.receipts.iter().filter(|r| !r.is_success()).count(),
            })
        })
        .collect();
    std::fs::write(
        out_dir.join("blocks.json"),
        serde_json::to_string_pretty(&summaries)? + "\n",
    )?;
    println!(
        "simulated {} rounds: {} tokens in {} blocks, final root {}",
        config.rounds,
        state.graph().len(),
        state.blocks().len(),
        state.state_root()
    );
    Ok(())
}

fn export(
    session: &Session,
    format: Format,
    params: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let state = session.state()?;
    match format {
        Format::Dot => emit(out, &state.graph().to_dot()),
        Format::Json => emit(out, &(state.graph().to_snapshot_json() + "\n")),
        Format::Csv => {
            let params_path = params.ok_or_else(|| {
                CliError::new("InvalidArgument", "--format csv requires --params")
            })?;
            let params = load_params(params_path)?;
            let graph = state.graph();
            let mut rows = Vec::with_capacity(graph.len());
            for record in graph.records() {
                let token = record.token_id;
                rows.push(rnft_core::scenario::ReportRow {
                    token_id: token,
                    created_height: record.relationship.created_height,
                    in_degree: record.relationship.referred.len(),
                    out_degree: record.relationship.referring.len(),
                    ancestors_count: graph.ancestors(token)?.len(),
                    payoff: payoff_of(graph, token, &params)?,
                });
            }
            emit(out, &report_csv(&rows))
        }
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run_script(session: &mut Session, script: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(script)?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let parsed = ScriptLine::try_parse_from(&words).map_err(|e| {
            CliError::new(
                "ScriptError",
                format!("{}:{}: {}", script.display(), lineno + 1, e),
            )
        })?;
        if matches!(parsed.command, Command::Run { .. }) {
            return Err(CliError::new(
                "ScriptError",
                format!("{}:{}: nested scripts are not allowed", script.display(), lineno + 1),
            ));
        }
        run_command(session, &parsed.command)?;
        session.check()?;
    }
    Ok(())
}
