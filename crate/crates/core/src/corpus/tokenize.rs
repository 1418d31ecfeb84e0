/// Splits text into maximal runs of Unicode letters and digits.
///
/// Everything else, including hyphens and apostrophes, separates words.
pub fn word_tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}
