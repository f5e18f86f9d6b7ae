// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Configuration, file formats and subcommands of the `trajkrotov` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod pulse;
