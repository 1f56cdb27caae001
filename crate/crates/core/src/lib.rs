// SPDX-License-Identifier: Apache-2.0

//! Segment-wise ACSL specification synthesis for C programs.

pub mod acsl;
pub mod config;
pub mod eval;
pub mod events;
pub mod frontend;
pub mod model;
pub mod mutation;
pub mod poi;
pub mod refinement;
pub mod report;
pub mod segmentation;
pub mod spec;
pub mod synthesis;
pub mod unit;
pub mod verifier;
