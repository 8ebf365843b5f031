//! Acceptance runs live in `tests/acceptance.rs`; run them with
//! `cargo test -p unfold-ipm-validation --test acceptance`.
