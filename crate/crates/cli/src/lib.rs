//! Command line and HTTP front end for `voxgram`.
//!
//! The binary is a thin wrapper over [`commands::run`]; the server is
//! [`api::router`], which tests drive in-process.

pub mod api;
pub mod commands;
pub mod schemas;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
