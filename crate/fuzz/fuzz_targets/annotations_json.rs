#![no_main]

use libfuzzer_sys::fuzz_target;
use lyraline::annotations::validate;
use lyraline::SongAnnotations;

fuzz_target!(|data: &[u8]| {
    if let Ok(song) = SongAnnotations::from_json_bytes(data) {
        let _ = validate(&song);
        let _ = song.to_json_string();
    }
});
