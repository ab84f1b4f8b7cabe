//! Command-line front end for the `torus-spread` crate: configuration
//! handling, certificate envelopes, figures and atomic output.
//!
//! Exit codes: 0 certified positive, 1 certified negative, 2 inconclusive,
//! 3 resource or search exhaustion, 64 usage error.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_RESOURCE,
            message: message.into(),
        }
    }
}
