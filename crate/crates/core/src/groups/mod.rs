//! Marked groups, their finite quotients along normal chains, word metrics
//! and balls in the infinite group.

mod chain;
mod marked;
mod quotient;
mod space;

pub use chain::{
    build_family, injectivity_radius, ChainFile, FamilySpec, InjectivityRadius, NormalChain,
    PermutationTarget,
};
pub use marked::{
    ball_in_group, Ball, Carrier, Element, Generator, MarkedGroup, Word, DEFAULT_BALL_BUDGET,
};
pub use quotient::{FiniteQuotient, QuotientCarrier};
pub use space::{FiniteGroupSpace, TagProduct, MAX_TABLE_ORDER};
