//! Holds the acceptance suite in `tests/acceptance.rs`, which runs after
//! every other test target of the workspace.
