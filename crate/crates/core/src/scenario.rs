//! Seeded scenario growth: mint arriving tokens round by round, seal one
//! block per round, then report every token's payoff.
//!
//! Each arrival picks `referencesPerArrival` referents among the tokens
//! sealed in earlier rounds, either uniformly or by preferential attachment
//! (probability proportional to `1 + in-degree`). Cross weights are uniform
//! at `(1 - selfWeight) / m`. The whole run is a pure function of the config
//! and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{tran_gen, ChainError, ChainState, GenesisConfig, Payload};
use crate::graph::TokenId;
use crate::incentive::{self, IncentiveError, IncentiveParams, PayoffBreakdown};
use crate::sig::key_gen;

/// How many tokens arrive per round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Arrivals {
    Fixed(u32),
    /// Seeded uniform draw in `[min, max]` each round.
    Range { min: u32, max: u32 },
}

/// Referent selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attachment {
    Uniform,
    Preferential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioConfig {
    pub rounds: u32,
    pub arrivals_per_round: Arrivals,
    /// Referents chosen per arrival (capped by the tokens available).
    pub references_per_arrival: u32,
    pub attachment: Attachment,
    pub seed: u64,
    /// Self-reference weight of referencing arrivals.
    #[serde(default = "default_self_weight")]
    pub self_weight: f64,
    pub incentive: IncentiveParams,
}

fn default_self_weight() -> f64 {
    0.5
}

/// One report line per token: topology measures plus the payoff breakdown.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub token_id: TokenId,
    pub created_height: u64,
    pub in_degree: usize,
    pub out_degree: usize,
    pub ancestors_count: usize,
    pub payoff: PayoffBreakdown,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Incentive(#[from] IncentiveError),
}

impl ScenarioError {
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::ConfigInvalid(_) => "ConfigInvalid",
            ScenarioError::Chain(e) => e.code(),
            ScenarioError::Incentive(e) => e.code(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.rounds < 1 {
            return Err(ScenarioError::ConfigInvalid("rounds must be >= 1".into()));
        }
        if let Arrivals::Range { min, max } = self.arrivals_per_round {
            if min > max {
                return Err(ScenarioError::ConfigInvalid(format!(
                    "arrivals range {min}..{max} is empty"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.self_weight) {
            return Err(ScenarioError::ConfigInvalid(format!(
                "selfWeight {} must be in [0, 1]",
                self.self_weight
            )));
        }
        self.incentive
            .validate()
            .map_err(|e| ScenarioError::ConfigInvalid(e.to_string()))?;
        // Every scenario token has w0 of either selfWeight or 1, so the
        // descending rate must be valid at selfWeight.
        if self.self_weight + self.incentive.beta < 1.0 {
            return Err(ScenarioError::ConfigInvalid(format!(
                "selfWeight {} + beta {} < 1 makes sigma undefined",
                self.self_weight, self.incentive.beta
            )));
        }
        Ok(())
    }
}

/// Grows a ledger per the config and reports every token's payoff.
pub fn run_scenario(config: &ScenarioConfig) -> Result<(ChainState, Vec<ReportRow>), ScenarioError> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut state = ChainState::new(GenesisConfig::default());

    for _ in 0..config.rounds {
        let arrivals = match config.arrivals_per_round {
            Arrivals::Fixed(n) => n,
            Arrivals::Range { min, max } => rng.gen_range(min..=max),
        };
        // Only tokens sealed in earlier rounds are candidates, so every
        // reference points strictly backwards.
        let candidates: Vec<TokenId> = state.graph().token_ids().collect();
        for _ in 0..arrivals {
            let signer = key_gen(&rng.gen::<u64>().to_be_bytes());
            let chosen = choose_referents(
                &mut rng,
                &state,
                &candidates,
                config.references_per_arrival,
                config.attachment,
            );
            let weights = if chosen.is_empty() {
                Vec::new()
            } else {
                let cross = (1.0 - config.self_weight) / chosen.len() as f64;
                vec![cross; chosen.len()]
            };
            let payload = Payload::Mint {
                referring: chosen,
                weights,
                labels: Vec::new(),
            };
            state.submit_tx(tran_gen(&signer, payload, 0, Default::default()))?;
        }
        state.seal_block();
    }

    let mut rows = Vec::with_capacity(state.graph().len());
    for record in state.graph().records() {
        let token = record.token_id;
        let payoff = incentive::payoff_of(state.graph(), token, &config.incentive)?;
        rows.push(ReportRow {
            token_id: token,
            created_height: record.relationship.created_height,
            in_degree: record.relationship.referred.len(),
            out_degree: record.relationship.referring.len(),
            ancestors_count: state
                .graph()
                .ancestors(token)
                .expect("token exists")
                .len(),
            payoff,
        });
    }
    Ok((state, rows))
}

fn choose_referents(
    rng: &mut ChaCha12Rng,
    state: &ChainState,
    candidates: &[TokenId],
    m: u32,
    attachment: Attachment,
) -> Vec<TokenId> {
    let take = (m as usize).min(candidates.len());
    if take == 0 {
        return Vec::new();
    }
    match attachment {
        Attachment::Uniform => {
            let mut pool = candidates.to_vec();
            let mut chosen = Vec::with_capacity(take);
            for _ in 0..take {
                let i = rng.gen_range(0..pool.len());
                chosen.push(pool.swap_remove(i));
            }
            chosen
        }
        Attachment::Preferential => {
            // Weight 1 + in-degree at round start; sampled without
            // replacement by walking the cumulative mass.
            let mut pool: Vec<(TokenId, u64)> = candidates
                .iter()
                .map(|t| {
                    let in_degree = state
                        .graph()
                        .get(*t)
                        .expect("candidate exists")
                        .relationship
                        .referred
                        .len() as u64;
                    (*t, 1 + in_degree)
                })
                .collect();
            let mut chosen = Vec::with_capacity(take);
            for _ in 0..take {
                let total: u64 = pool.iter().map(|(_, w)| w).sum();
                let mut x = rng.gen_range(0..total);
                let mut idx = 0;
                for (i, (_, w)) in pool.iter().enumerate() {
                    if x < *w {
                        idx = i;
                        break;
                    }
                    x -= w;
                }
                chosen.push(pool.remove(idx).0);
            }
            chosen
        }
    }
}

/// Header for the scenario report.
pub const REPORT_CSV_HEADER: &str =
    "tokenId,createdHeight,inDegree,outDegree,ancestorsCount,p0,r,sigma,d,outcome,income,utility";

/// Renders report rows as CSV: '.' decimal, no thousands separators, header
/// row mandatory.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.token_id,
            row.created_height,
            row.in_degree,
            row.out_degree,
            row.ancestors_count,
            row.payoff.p0,
            row.payoff.r,
            row.payoff.sigma,
            row.payoff.d,
            row.payoff.outcome,
            row.payoff.income,
            row.payoff.utility
        ));
    }
    out
}
