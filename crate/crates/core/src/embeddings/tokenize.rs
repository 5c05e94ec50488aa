/// Lowercased whitespace split with every non-alphanumeric character broken
/// out as its own token. Hyphens inside words are kept.
pub fn rule_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut current = String::new();
        let chars: Vec<char> = chunk.chars().collect();
        for (i, &ch) in chars.iter().enumerate() {
            let inner_hyphen = ch == '-'
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric();
            if ch.is_alphanumeric() || inner_hyphen {
                current.extend(ch.to_lowercase());
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(ch.to_string());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_and_lowercases() {
        assert_eq!(rule_tokenize("The Court notes."), vec!["the", "court", "notes", "."]);
        assert_eq!(
            rule_tokenize("(Article 6 para 1) ill-founded;"),
            vec!["(", "article", "6", "para", "1", ")", "ill-founded", ";"]
        );
        assert_eq!(rule_tokenize("applicant's"), vec!["applicant", "'", "s"]);
        assert!(rule_tokenize("  \t ").is_empty());
    }
}
