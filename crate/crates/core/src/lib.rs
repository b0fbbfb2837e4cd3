//! Fork-race analysis for in-band bribery attacks on proof-of-work chains.
//!
//! The race between the attacker's fork and the main chain is modelled as an
//! absorbing Markov chain over the length gap. Bribe schedules change which
//! miners work on the fork at each gap, and therefore the chain itself.
//! [`strategies`] builds and evaluates those schedules, and [`simulate`]
//! replays them event by event as an independent check.

pub mod markov;
pub mod model;
pub mod rationality;
pub mod simulate;
pub mod strategies;

pub use markov::{AbsorbingChain, AbsorptionAnalysis, CanonicalForm, MarkovError};
pub use model::{load_pool_distribution, make_scenario, Miner, MinerSet, ModelError, Scenario};
pub use rationality::{BribeQuote, ChainChoice, MinerBeliefs, DUST_BTC};
pub use simulate::{compare_reports, simulate_race, SimConfig, SimReport};
pub use strategies::{BribeSchedule, StrategyOutcome, StrategyTag};
