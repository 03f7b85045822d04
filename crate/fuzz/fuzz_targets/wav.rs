#![no_main]

use libfuzzer_sys::fuzz_target;
use lyraline::dsp::AudioBuffer;

fuzz_target!(|data: &[u8]| {
    let _ = AudioBuffer::from_wav_reader(std::io::Cursor::new(data));
});
