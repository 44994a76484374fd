pub mod channel;
pub mod dsched;
pub mod error;
pub mod evt;
pub mod groups;
pub mod numerics;
pub mod qmodel1;
pub mod qmodel2;
pub mod qmodel3;
pub mod sim;
pub mod solution;
pub mod stats;

pub use channel::{ChannelModel, UserState};
pub use dsched::{ThresholdMethod, ThresholdPlan};
pub use error::{Error, Result};
pub use evt::GumbelNorm;
pub use groups::SystemChain;
pub use solution::QModelSolution;
pub use sim::{SimConfig, SimResult};
