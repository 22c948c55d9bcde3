//! Library surface of the `bottlemod` command-line tool: the JSON document
//! format and the subcommand implementations, exposed for integration tests
//! and embedding.

pub mod commands;
pub mod doc;
