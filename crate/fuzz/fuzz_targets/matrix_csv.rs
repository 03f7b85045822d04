#![no_main]

use libfuzzer_sys::fuzz_target;
use lyraline::DenseMatrix;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = DenseMatrix::from_csv(text) {
            assert_eq!(m.data().len(), m.rows() * m.cols());
        }
    }
});
