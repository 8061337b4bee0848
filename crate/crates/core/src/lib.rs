//! Verification that the tame kernel K2 O_F is trivial for the imaginary
//! cyclic quartic fields Q(sqrt(-(D + B sqrt D))) of class number one.

pub mod arith;
pub mod bounds;
pub mod field;
pub mod ideal;
pub mod lattice;
pub mod linalg;
pub mod poly;
pub mod real;
pub mod runner;
pub mod tate;
pub mod verify;

pub use bounds::{Bounds, BoundsReport, Enclosure};
pub use field::{FieldContext, FieldError, FieldParams, OElem, QuarticElement};
pub use ideal::{PrimeCache, PrimeIdeal, PrimeKey};
pub use runner::{ConditionSel, Report, RunConfig, RunError, RunOutput};
pub use tate::{CSet, Effort};
pub use verify::{K2Conclusion, Statement};
