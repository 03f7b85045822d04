#![no_main]

use libfuzzer_sys::fuzz_target;
use lyraline::Tensor3;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = Tensor3::from_mmx3(data) {
        let [a, b, c] = t.dims();
        assert_eq!(t.data().len(), a * b * c);
    }
});
