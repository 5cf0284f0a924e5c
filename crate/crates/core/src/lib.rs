//! LDPC code design for the unequal-power two-user Gaussian multiple access
//! channel.
//!
//! The crate covers the full pipeline:
//!
//! - [`degree`]: degree distributions, design rate and the stability bound.
//! - [`channel`]: the two-user GMAC, the state-node LLR rule and the
//!   BPSK-input sum capacity.
//! - [`exit`]: the J function, the Gaussian-approximation state-node means and
//!   the joint EXIT recursion of both users.
//! - [`design`]: alternating linear programs over one user's variable degree
//!   distribution and the check-degree sweep.
//! - [`simulate`]: random Tanner graphs, the joint belief-propagation decoder
//!   and a reproducible Monte Carlo BER harness.
//! - [`format`]: the JSON design file and the CSV outputs used by the CLI.
//!
//! Numerical kernels are generic over [`Real`] (`f32` or `f64`); the design
//! loop itself runs in `f64` and the aliases at the crate root name the
//! concrete types used there.

pub mod channel;
pub mod degree;
pub mod design;
pub mod exit;
pub mod format;
pub mod lp;
pub mod quadrature;
pub mod simulate;

mod error;
mod real;

pub use error::{Error, Result};
pub use real::Real;

/// Which of the two users a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum User {
    One,
    Two,
}

impl User {
    pub const BOTH: [User; 2] = [User::One, User::Two];

    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }

    /// Zero-based index, handy for per-user arrays.
    pub fn index(self) -> usize {
        match self {
            User::One => 0,
            User::Two => 1,
        }
    }

    /// One-based user number as used in file formats.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl std::fmt::Display for User {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

pub type ChannelParams = channel::ChannelParams<f64>;
pub type DegreeDistribution = degree::DegreeDistribution<f64>;
pub type CodeEnsemble = degree::CodeEnsemble<f64>;
pub type ChannelParams32 = channel::ChannelParams<f32>;
pub type DegreeDistribution32 = degree::DegreeDistribution<f32>;
