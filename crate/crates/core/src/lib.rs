pub mod atoms;
pub mod cli;
pub mod corpus;
pub mod covering;
pub mod error;
pub mod imageio;
mod fft;
pub mod kernel;
pub mod littlewood_paley;
pub mod maximal;
pub mod multiplier;
pub mod signal_grid;
pub mod tubes;
pub mod verify;

pub use error::{Result, TwlpError};
