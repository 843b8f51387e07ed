//! Constrained maximal run-length statistics for digit expansions.
//!
//! For a family `A = {A_k}` of admissible words, `l_n(x, A)` is the length of
//! the longest window among the first `n` digits of `x` that lies in the
//! corresponding `A_k`. The crate evaluates it exactly, counts `|A_k|`,
//! runs Monte Carlo checks of its almost-sure growth `log n / (1 - tau)`,
//! and builds digit sequences where the growth is much slower.

pub mod census;
pub mod error;
pub mod experiment;
pub mod family;
pub mod grid;
pub mod moran;
pub mod ratio;
pub mod scanner;
pub mod sft;
pub mod stream;
pub mod word;

pub use error::{Error, Result};
pub use family::{
    parse_family_spec, Closure, ClosureFlags, ConstraintFamily, FamilyKind, TargetSource,
};
pub use grid::NGrid;
pub use scanner::{max_run, max_run_incremental, max_run_naive, RunLengthSeries, Scanner};
pub use sft::{Forbidden, SftGraph};
pub use stream::{DigitSource, DigitStream};
pub use word::Word;
