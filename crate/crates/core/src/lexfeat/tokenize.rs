/// Lowercases, drops URLs and @mentions, keeps hashtag words without the
/// `#`, and splits on every non-letter character.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.") {
            continue;
        }
        if lower.starts_with('@') {
            continue;
        }
        tokens.extend(
            lower
                .split(|c: char| !c.is_alphabetic())
                .filter(|t| !t.is_empty())
                .map(str::to_string),
        );
    }
    tokens
}

/// Hook for mapping non-English text before featurization.
pub trait TextNormalizer: Send + Sync {
    fn normalize(&self, text: &str, lang: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityNormalizer;

impl TextNormalizer for IdentityNormalizer {
    fn normalize(&self, text: &str, _lang: &str) -> String {
        text.to_string()
    }
}
