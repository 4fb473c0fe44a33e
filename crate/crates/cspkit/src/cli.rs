//! Command-line surface.

/// Entry point for the `cspkit` binary; returns the process exit code.
pub fn run() -> i32 {
    0
}
