//! Non-negative, part-based actor training with PPO on a deterministic
//! cart-pole, plus the tooling to inspect what the trained actor learned.

pub mod cli;
pub mod env;
pub mod error;
pub mod explain;
pub mod init;
pub mod kv;
pub mod logio;
pub mod nncore;
pub mod optim;
pub mod ppo;

pub use error::{Error, Result};
