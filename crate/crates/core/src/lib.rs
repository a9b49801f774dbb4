//! Desk-scale simulator of a Rydberg-atom RF receiver carrying NTSC 480i
//! composite color video.
//!
//! The chain is [`ntsc`] (encode an RGB frame into a composite waveform),
//! [`channel`] (the atomic receiver: discriminator, transit-time-limited
//! response, detection and noise), [`ntsc`] again (decode) and [`metrics`]
//! (reception clarity and color recovery). [`pipeline`] wires them into
//! experiments; [`atomic`] holds the ladder physics behind the channel.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
pub mod channel;
pub mod metrics;
pub mod ntsc;
pub mod pipeline;
