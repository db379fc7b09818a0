//! Contextual-bandit influence maximization.
//!
//! Influencers are arms; each round a context is observed, `L` influencers
//! are chosen, and the reward is the number of nodes activated for the
//! first time. Policies estimate each influencer's remaining potential from
//! the nodes it alone has activated once (hapaxes).

pub mod analysis;
pub mod env;
pub mod error;
pub mod harness;
pub mod ledger;
pub mod linalg;
pub mod policy;

pub use error::{Error, Result};
pub use harness::{run_campaign, CampaignConfig, CampaignResult, RunOptions};
pub use ledger::{ActivationLedger, ArmId, Feedback, NodeId};
pub use policy::{Policy, PolicyConfig, PolicyKind};
