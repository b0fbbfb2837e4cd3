//! Miner rosters, pool-file ingestion and attack scenarios.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest relative deviation of the raw power total from 1 that is still
/// treated as rounding noise and renormalized away.
pub const MAX_POWER_SUM_DEVIATION: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate miner id `{0}`")]
    DuplicateId(String),
    #[error("miner `{id}` has invalid power {power}")]
    InvalidPower { id: String, power: f64 },
    #[error("no attacker entry in pool distribution")]
    MissingAttacker,
    #[error("more than one entry is flagged as attacker (`{0}` and `{1}`)")]
    MultipleAttackers(String, String),
    #[error("unknown miner id `{0}`")]
    UnknownMiner(String),
    #[error("powers sum to {0}, more than 5% away from 1")]
    PowerSumOutOfRange(f64),
    #[error("pool distribution has no miners besides the attacker")]
    NoMiners,
    #[error("target `{0}` is the attacker")]
    TargetIsAttacker(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// A mining pool on the main chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Miner {
    pub id: String,
    pub power: f64,
}

/// One parsed record of a pool file, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub id: String,
    pub power: f64,
    pub attacker: bool,
}

/// Parses the line-oriented pool format: `id power [attacker]`, `#` comments.
pub fn parse_pool_file(raw: &str) -> Result<Vec<PoolEntry>, ModelError> {
    let mut entries = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let err = |message: String| ModelError::Parse {
            line: line_no,
            message,
        };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(err(format!(
                "expected `id power [attacker]`, got {} fields",
                fields.len()
            )));
        }
        let power: f64 = fields[1]
            .parse()
            .map_err(|_| err(format!("cannot parse power `{}`", fields[1])))?;
        let attacker = match fields.get(2) {
            None => false,
            Some(&"attacker") => true,
            Some(other) => return Err(err(format!("unknown flag `{other}`"))),
        };
        entries.push(PoolEntry {
            id: fields[0].to_string(),
            power,
            attacker,
        });
    }
    Ok(entries)
}

/// The main-chain roster (sorted by descending power) together with the
/// attacker's share of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerSet {
    attacker_id: String,
    attacker_power: f64,
    miners: Vec<Miner>,
    lambda: f64,
}

impl MinerSet {
    /// Builds a normalized set. Powers are rescaled so that attacker and
    /// miners sum to exactly one; the roster is sorted by descending power
    /// with ties broken by id.
    pub fn new(
        attacker_id: impl Into<String>,
        attacker_power: f64,
        miners: Vec<Miner>,
    ) -> Result<Self, ModelError> {
        let attacker_id = attacker_id.into();
        check_power(&attacker_id, attacker_power)?;
        if miners.is_empty() {
            return Err(ModelError::NoMiners);
        }
        let mut seen = HashSet::new();
        seen.insert(attacker_id.clone());
        for m in &miners {
            check_power(&m.id, m.power)?;
            if !seen.insert(m.id.clone()) {
                return Err(ModelError::DuplicateId(m.id.clone()));
            }
        }

        let total = attacker_power + miners.iter().map(|m| m.power).sum::<f64>();
        if (total - 1.0).abs() > MAX_POWER_SUM_DEVIATION {
            return Err(ModelError::PowerSumOutOfRange(total));
        }

        let attacker_power = attacker_power / total;
        let mut miners: Vec<Miner> = miners
            .into_iter()
            .map(|m| Miner {
                power: m.power / total,
                id: m.id,
            })
            .collect();
        miners.sort_by(|a, b| {
            b.power
                .partial_cmp(&a.power)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.id.cmp(&b.id))
        });
        // λ is derived as the complement so that μ + λ = 1 holds exactly.
        let lambda = 1.0 - attacker_power;
        Ok(Self {
            attacker_id,
            attacker_power,
            miners,
            lambda,
        })
    }

    /// Builds a set from parsed pool entries. `attacker` overrides the entry
    /// flagged in the file.
    pub fn from_entries(entries: &[PoolEntry], attacker: Option<&str>) -> Result<Self, ModelError> {
        let attacker_id = match attacker {
            Some(id) => {
                if !entries.iter().any(|e| e.id == id) {
                    return Err(ModelError::UnknownMiner(id.to_string()));
                }
                id.to_string()
            }
            None => {
                let mut flagged = entries.iter().filter(|e| e.attacker);
                let first = flagged.next().ok_or(ModelError::MissingAttacker)?;
                if let Some(second) = flagged.next() {
                    return Err(ModelError::MultipleAttackers(
                        first.id.clone(),
                        second.id.clone(),
                    ));
                }
                first.id.clone()
            }
        };
        let mut attacker_power = None;
        let mut miners = Vec::with_capacity(entries.len());
        for e in entries {
            if e.id == attacker_id {
                if attacker_power.is_some() {
                    return Err(ModelError::DuplicateId(e.id.clone()));
                }
                attacker_power = Some(e.power);
            } else {
                miners.push(Miner {
                    id: e.id.clone(),
                    power: e.power,
                });
            }
        }
        let attacker_power = attacker_power.ok_or(ModelError::MissingAttacker)?;
        Self::new(attacker_id, attacker_power, miners)
    }

    pub fn attacker_id(&self) -> &str {
        &self.attacker_id
    }

    /// μ, the attacker's normalized power.
    pub fn attacker_power(&self) -> f64 {
        self.attacker_power
    }

    /// λ, the total power of the main-chain miners.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn miners(&self) -> &[Miner] {
        &self.miners
    }

    pub fn powers(&self) -> Vec<f64> {
        self.miners.iter().map(|m| m.power).collect()
    }

    pub fn len(&self) -> usize {
        self.miners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.miners.is_empty()
    }

    /// Roster index of a main-chain miner.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.miners.iter().position(|m| m.id == id)
    }

    pub fn miner(&self, id: &str) -> Option<&Miner> {
        self.miners.iter().find(|m| m.id == id)
    }
}

fn check_power(id: &str, power: f64) -> Result<(), ModelError> {
    if !(power > 0.0 && power <= 1.0) {
        return Err(ModelError::InvalidPower {
            id: id.to_string(),
            power,
        });
    }
    Ok(())
}

/// Parses a pool file and builds the normalized roster, using the entry
/// flagged `attacker`.
pub fn load_pool_distribution(raw: &str) -> Result<MinerSet, ModelError> {
    MinerSet::from_entries(&parse_pool_file(raw)?, None)
}

/// One attack instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    miner_set: MinerSet,
    target_id: String,
    target_index: usize,
    confirmations: usize,
    premined: usize,
    reward: f64,
    start_state: usize,
    horizon: usize,
}

/// Builds a scenario with `D0 = C - l + 1` and the default horizon `C + 1`.
pub fn make_scenario(
    miner_set: MinerSet,
    target_id: &str,
    confirmations: usize,
    premined: usize,
    reward: f64,
) -> Result<Scenario, ModelError> {
    if confirmations < 1 {
        return Err(ModelError::InvalidScenario(
            "confirmation depth must be at least 1".into(),
        ));
    }
    if premined < 1 || premined > confirmations {
        return Err(ModelError::InvalidScenario(format!(
            "pre-mined blocks l={premined} must satisfy 1 <= l <= C={confirmations}"
        )));
    }
    if !(reward > 0.0 && reward.is_finite()) {
        return Err(ModelError::InvalidScenario(format!(
            "block reward must be positive, got {reward}"
        )));
    }
    if target_id == miner_set.attacker_id() {
        return Err(ModelError::TargetIsAttacker(target_id.to_string()));
    }
    let target_index = miner_set
        .index_of(target_id)
        .ok_or_else(|| ModelError::UnknownMiner(target_id.to_string()))?;
    Ok(Scenario {
        target_id: target_id.to_string(),
        target_index,
        confirmations,
        premined,
        reward,
        start_state: confirmations - premined + 1,
        horizon: confirmations + 1,
        miner_set,
    })
}

impl Scenario {
    /// Starts the attack at gap `state` instead of `C - l + 1`. State 0 is
    /// allowed here (the fork is level with the main chain).
    pub fn with_start_state(mut self, state: usize) -> Result<Self, ModelError> {
        if state > self.confirmations {
            return Err(ModelError::InvalidScenario(format!(
                "start state {state} exceeds confirmation depth {}",
                self.confirmations
            )));
        }
        if state >= self.horizon {
            return Err(ModelError::InvalidScenario(format!(
                "start state {state} is outside the horizon {}",
                self.horizon
            )));
        }
        self.start_state = state;
        if state >= 1 {
            self.premined = self.confirmations - state + 1;
        }
        Ok(self)
    }

    /// Overrides the number of transient states (default `C + 1`).
    pub fn with_horizon(mut self, horizon: usize) -> Result<Self, ModelError> {
        if horizon <= self.start_state {
            return Err(ModelError::InvalidScenario(format!(
                "horizon {horizon} must exceed the start state {}",
                self.start_state
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_reward(mut self, reward: f64) -> Result<Self, ModelError> {
        if !(reward > 0.0 && reward.is_finite()) {
            return Err(ModelError::InvalidScenario(format!(
                "block reward must be positive, got {reward}"
            )));
        }
        self.reward = reward;
        Ok(self)
    }

    pub fn miner_set(&self) -> &MinerSet {
        &self.miner_set
    }

    pub fn target_id(&self) -> &str {
        &self.target_id
    }

    /// Roster index of the target miner `m`.
    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_power(&self) -> f64 {
        self.miner_set.miners()[self.target_index].power
    }

    /// C
    pub fn confirmations(&self) -> usize {
        self.confirmations
    }

    /// l
    pub fn premined(&self) -> usize {
        self.premined
    }

    /// F, in BTC.
    pub fn reward(&self) -> f64 {
        self.reward
    }

    /// D0
    pub fn start_state(&self) -> usize {
        self.start_state
    }

    /// h, the number of transient gap states.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mu(&self) -> f64 {
        self.miner_set.attacker_power()
    }

    pub fn lambda(&self) -> f64 {
        self.miner_set.lambda()
    }

    /// Highest state that may carry a bribe; nothing is offered beyond `C`.
    pub fn last_bribed_state(&self) -> usize {
        self.confirmations.min(self.horizon - 1)
    }
}
