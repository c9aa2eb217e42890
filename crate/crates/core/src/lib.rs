//! Exact-time modelling and verification of an asynchronous leader
//! election protocol.
//!
//! The crate is organised in three layers:
//!
//! * the protocol kernel ([`protocol`]) and timing model ([`timing`],
//!   [`linear`], [`simplex`]);
//! * an exact-time discrete-event simulator ([`sim`]);
//! * three verification engines: parametric drift feasibility ([`drift`]),
//!   an assume-guarantee abstraction ([`abstraction`]), and direct bounded
//!   exploration of the concrete network ([`direct`]).

pub mod abstraction;
pub mod direct;
pub mod drift;
pub mod linear;
pub mod sim;
pub mod protocol;
pub mod rat;
pub mod report;
pub mod simplex;
pub mod timing;
