//! Text normalization shared by schema label comparison, record parsing and
//! scoring.

use unicode_normalization::UnicodeNormalization;

/// NFC-normalizes and trims a type label. No case folding: labels such as
/// `Movement:Transport` are case-significant.
pub fn normalize_label(label: &str) -> String {
    label.nfc().collect::<String>().trim().to_string()
}

/// Trims and collapses every run of whitespace into a single space.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Maps full-width ASCII variants (U+FF01..U+FF5E) and the ideographic space
/// onto their half-width forms.
pub fn fold_width(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '\u{3000}' => ' ',
            '\u{FF01}'..='\u{FF5E}' => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
            _ => c,
        })
        .collect()
}
