#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&dim, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let dim = usize::from(dim % 6);
    if let Ok(m) = hilbert_bundle::scenario::parse_matrix_literal(text, dim) {
        assert_eq!((m.nrows(), m.ncols()), (dim, dim));
    }
});
