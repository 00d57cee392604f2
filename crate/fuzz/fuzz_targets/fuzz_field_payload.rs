#![no_main]

use libfuzzer_sys::fuzz_target;

// Raw little-endian f64 payload decoding: the first two bytes choose the
// expected length, the rest is the payload. Must error on size mismatches
// and non-finite values, never panic.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let expected = (u16::from_le_bytes([data[0], data[1]]) % 4096) as usize;
    let payload = &data[2..];
    if let Ok(values) = hydrolab::torus_field::snapshot::decode_field_bytes("f", expected, payload)
    {
        assert_eq!(values.len(), expected);
        assert!(values.iter().all(|v| v.is_finite()));
    }
});
