#![no_main]

use libfuzzer_sys::fuzz_target;
use lyraline::DenseMatrix;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = DenseMatrix::from_mmx1(data) {
        // whatever decodes must re-encode to the same matrix
        let again = DenseMatrix::from_mmx1(&m.to_mmx1()).expect("round trip");
        assert_eq!(again.shape(), m.shape());
    }
    let _ = DenseMatrix::decode_mmx1(data);
});
