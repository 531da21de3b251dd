//! Incoherent qubit channels: Choi-matrix construction, decomposition into at
//! most four incoherent Kraus operators, classification and sampling.
//!
//! ```
//! use iokraus::classify::gallery;
//! use iokraus::decompose::{decompose_channel, DECOMPOSE_TOL};
//!
//! let ch = gallery("eq14").unwrap();
//! let sol = decompose_channel(&ch, DECOMPOSE_TOL).unwrap();
//! assert_eq!(sol.kraus.len(), 4);
//! assert!(sol.residuals.choi_round_trip < 1e-12);
//! ```

pub mod canonical;
pub mod channel;
pub mod classify;
pub mod complexmat;
pub mod decompose;
pub mod error;
pub mod sampler;

pub use error::{Error, Result};
