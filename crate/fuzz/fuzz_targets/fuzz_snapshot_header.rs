#![no_main]

use libfuzzer_sys::fuzz_target;

// Snapshot headers arrive from disk; parsing must never panic or accept a
// header that would drive absurd allocations downstream.
fuzz_target!(|data: &[u8]| {
    if let Ok(header) = hydrolab::torus_field::snapshot::SnapshotHeader::parse(data) {
        // anything accepted must satisfy its own invariants
        assert!(header.validate().is_ok());
        assert!(header.points() <= 1 << 28);
    }
});
