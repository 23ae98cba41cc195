//! Automatic differentiation: forward-mode jets in space, reverse-mode tape
//! in parameters.

mod jet;
mod tape;

pub use jet::{jet_seed, Comp, Jet2, JetOrder};
pub use tape::{BatchOrder, BufId, SlotRange, Tape, View};
