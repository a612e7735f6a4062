use serde::{Deserialize, Serialize};

/// Lowercased identifier parts of a code fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub tokens: Vec<String>,
    pub source_id: String,
}

impl TokenizedDoc {
    pub fn new(source_id: impl Into<String>, text: &str) -> Self {
        TokenizedDoc {
            tokens: tokenize(text),
            source_id: source_id.into(),
        }
    }
}

pub fn tokenize_code(text: &str) -> TokenizedDoc {
    TokenizedDoc::new("", text)
}

/// Split on non-alphanumerics, then on camelCase boundaries, then lowercase.
///
/// `HTTPServer` splits as `http`, `server`: an upper-case run followed by a
/// lower-case letter gives its last capital to the next part.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for segment in text.split(|c: char| !c.is_alphanumeric()) {
        if segment.is_empty() {
            continue;
        }
        split_camel(segment, &mut out);
    }
    out
}

fn split_camel(segment: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = segment.chars().collect();
    let mut start = 0;
    for i in 1..chars.len() {
        let prev = chars[i - 1];
        let cur = chars[i];
        let lower_to_upper = (prev.is_lowercase() || prev.is_ascii_digit()) && cur.is_uppercase();
        let acronym_end = prev.is_uppercase()
            && cur.is_uppercase()
            && chars.get(i + 1).is_some_and(|n| n.is_lowercase());
        if lower_to_upper || acronym_end {
            push_part(&chars[start..i], out);
            start = i;
        }
    }
    push_part(&chars[start..], out);
}

fn push_part(part: &[char], out: &mut Vec<String>) {
    if part.is_empty() {
        return;
    }
    let s: String = part.iter().collect::<String>().to_lowercase();
    if !s.is_empty() {
        out.push(s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  (){};").is_empty());
    }

    #[test]
    fn camel_and_snake_parts_are_split() {
        assert_eq!(
            tokenize("createServer_withHttpOnly"),
            vec!["create", "server", "with", "http", "only"]
        );
        assert_eq!(tokenize("Server(ThreadPool)"), vec!["server", "thread", "pool"]);
    }

    #[test]
    fn acronyms_keep_together() {
        assert_eq!(tokenize("parseHTTPResponse"), vec!["parse", "http", "response"]);
        assert_eq!(tokenize("IOError"), vec!["io", "error"]);
        assert_eq!(tokenize("utf8Decoder"), vec!["utf8", "decoder"]);
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_and_nonempty(s in ".{0,64}") {
            for t in tokenize(&s) {
                prop_assert!(!t.is_empty());
                prop_assert_eq!(t.to_lowercase(), t.clone());
            }
        }

        #[test]
        fn ascii_tokens_are_alphanumeric(s in "[ -~]{0,64}") {
            for t in tokenize(&s) {
                prop_assert!(t.chars().all(|c| c.is_ascii_alphanumeric()));
            }
        }
    }
}
