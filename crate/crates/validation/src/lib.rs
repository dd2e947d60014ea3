//! Test-only package. The acceptance suite lives in `tests/acceptance.rs`
//! and the brute-force reference implementations in `tests/oracle`.
