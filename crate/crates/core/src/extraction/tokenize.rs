use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    Word,
    Number,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        let surface = surface.into();
        let kind = if is_number(&surface) {
            TokenKind::Number
        } else {
            TokenKind::Word
        };
        Token { surface, kind }
    }
}

/// `[0-9]+(\.[0-9]+)?`
pub fn is_number(s: &str) -> bool {
    let (int, frac) = match s.split_once('.') {
        Some((int, frac)) => (int, Some(frac)),
        None => (s, None),
    };
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits)
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

/// Splits text into lowercased tokens.
///
/// Tokens are maximal runs of letters and digits. A hyphen or apostrophe is kept
/// when it sits between two letters/digits ("covid-19", "don't"); a period is kept
/// only between ASCII digits of a leading number ("2.5"). Typographic apostrophes
/// are folded to `'`. Everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    let chars: Vec<char> = normalized.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut all_digits = true;

    let flush = |current: &mut String, all_digits: &mut bool, tokens: &mut Vec<Token>| {
        if !current.is_empty() {
            tokens.push(Token::new(std::mem::take(current)));
        }
        *all_digits = true;
    };

    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            if !c.is_ascii_digit() {
                all_digits = false;
            }
            current.push(c);
            continue;
        }
        let next_alnum = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if !current.is_empty() && next_alnum && is_joiner(c) {
            current.push(if c == '\u{2019}' { '\'' } else { c });
            all_digits = false;
            continue;
        }
        if c == '.'
            && !current.is_empty()
            && all_digits
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())
        {
            current.push(c);
            all_digits = false;
            continue;
        }
        flush(&mut current, &mut all_digits, &mut tokens);
    }
    flush(&mut current, &mut all_digits, &mut tokens);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn hyphenated_and_punctuation() {
        let tokens = tokenize("Covid-19 spreads fast.");
        assert_eq!(
            tokens,
            vec![
                Token { surface: "covid-19".into(), kind: TokenKind::Word },
                Token { surface: "spreads".into(), kind: TokenKind::Word },
                Token { surface: "fast".into(), kind: TokenKind::Word },
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ,;  ").is_empty());
    }

    #[test]
    fn numbers() {
        let kinds: Vec<TokenKind> = tokenize("I took 2 pills").into_iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![TokenKind::Word, TokenKind::Word, TokenKind::Number, TokenKind::Word]
        );
        let tokens = tokenize("dose 2.5 then 10. done");
        assert_eq!(tokens[1], Token { surface: "2.5".into(), kind: TokenKind::Number });
        assert_eq!(tokens[3], Token { surface: "10".into(), kind: TokenKind::Number });
    }

    #[test]
    fn apostrophes() {
        assert_eq!(surfaces("Don't stop"), vec!["don't", "stop"]);
        assert_eq!(surfaces("Don\u{2019}t"), vec!["don't"]);
        assert_eq!(surfaces("'quoted' -dash- end-"), vec!["quoted", "dash", "end"]);
    }

    #[test]
    fn nfc_and_lowercase() {
        // decomposed e + combining acute composes to a single char
        assert_eq!(surfaces("CAFE\u{301} Café"), vec!["café", "café"]);
    }

    #[test]
    fn number_grammar() {
        assert!(is_number("0"));
        assert!(is_number("12.50"));
        assert!(!is_number("1."));
        assert!(!is_number(".5"));
        assert!(!is_number("1.2.3"));
        assert!(!is_number("19a"));
        assert!(!is_number(""));
    }
}
