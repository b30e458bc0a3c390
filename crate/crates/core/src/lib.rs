pub mod arrays;
pub mod error;
pub mod link_math;
pub mod seed;
pub mod units;

pub use error::{Error, Result};
pub mod channels;
pub mod fd_link;
pub mod analog_sic;
pub mod beam_design;
pub mod codebook_design;
pub mod report;
pub mod steer;
pub mod scenario;
pub mod cli;
