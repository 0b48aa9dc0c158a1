//! Holds the `acceptance` test target, a standalone binary that checks each
//! release criterion and prints one PASS or FAIL line per criterion:
//!
//! ```text
//! cargo test -p uno-acceptance --test acceptance
//! ```
//!
//! The training smoke check takes a few minutes; the rest take seconds.
