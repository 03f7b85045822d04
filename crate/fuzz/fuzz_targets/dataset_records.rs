#![no_main]

use libfuzzer_sys::fuzz_target;
use lyraline::cleansing::decode_records;

fuzz_target!(|data: &[u8]| {
    let _ = decode_records(data);
});
