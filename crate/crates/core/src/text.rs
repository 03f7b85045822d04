//! String similarity shared by paragraph merging and text SSMs.

/// Lowercases and collapses runs of whitespace into single spaces.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalized edit similarity `1 - lev(a, b) / max(|a|, |b|)` on normalized
/// text, counted in Unicode scalar values. Two empty strings are identical.
pub fn str_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&normalize(a), &normalize(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kitten_sitting() {
        assert!((str_similarity("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn normalization_ignores_case_and_spacing() {
        assert_eq!(str_similarity("Hello   World", "hello world"), 1.0);
        assert_eq!(normalize("  a\tB \n c "), "a b c");
    }

    #[test]
    fn empty_pair_is_identical() {
        assert_eq!(str_similarity("", ""), 1.0);
        assert_eq!(str_similarity("", "abc"), 0.0);
    }
}
