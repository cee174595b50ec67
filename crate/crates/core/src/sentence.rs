//! Token annotations for one sentence.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: Option<String>,
    /// Coarse tag as given in the input, if any.
    pub cpos: Option<String>,
    pub pos: String,
}

impl Token {
    pub fn new(form: impl Into<String>, pos: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            lemma: None,
            cpos: None,
            pos: pos.into(),
        }
    }

    pub fn with_cpos(mut self, cpos: impl Into<String>) -> Self {
        self.cpos = Some(cpos.into());
        self
    }

    /// The coarse tag, falling back to the fine tag.
    pub fn coarse(&self) -> &str {
        self.cpos.as_deref().unwrap_or(&self.pos)
    }
}

/// Tokens `1..=n` of a sentence; position 0 is the implicit ROOT.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    tokens: Vec<Token>,
}

impl AnnotatedSentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("sentence has no tokens".into()));
        }
        Ok(AnnotatedSentence { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at 1-based position `i`.
    pub fn token(&self, i: usize) -> &Token {
        &self.tokens[i - 1]
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Fills missing coarse tags from a fine-to-coarse map.
    pub fn apply_coarse_map(&mut self, map: &CoarseTagMap) {
        for t in &mut self.tokens {
            if t.cpos.is_none() {
                if let Some(c) = map.get(&t.pos) {
                    t.cpos = Some(c.to_string());
                }
            }
        }
    }
}

/// Fine tag → coarse tag, learned from whichever training tokens carry both.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoarseTagMap {
    map: BTreeMap<String, String>,
}

impl CoarseTagMap {
    pub fn fit<'a>(sentences: impl IntoIterator<Item = &'a AnnotatedSentence>) -> Self {
        let mut map = BTreeMap::new();
        for s in sentences {
            for t in s.tokens() {
                if let Some(c) = &t.cpos {
                    map.entry(t.pos.clone()).or_insert_with(|| c.clone());
                }
            }
        }
        CoarseTagMap { map }
    }

    pub fn insert(&mut self, fine: impl Into<String>, coarse: impl Into<String>) {
        self.map.insert(fine.into(), coarse.into());
    }

    pub fn get(&self, fine: &str) -> Option<&str> {
        self.map.get(fine).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_falls_back_to_fine() {
        let t = Token::new("dog", "NN");
        assert_eq!(t.coarse(), "NN");
        assert_eq!(t.with_cpos("N").coarse(), "N");
    }

    #[test]
    fn map_fills_missing_coarse_tags() {
        let train = AnnotatedSentence::new(vec![Token::new("a", "DT").with_cpos("D")]).unwrap();
        let map = CoarseTagMap::fit([&train]);
        let mut s = AnnotatedSentence::new(vec![Token::new("the", "DT"), Token::new("x", "XX")]).unwrap();
        s.apply_coarse_map(&map);
        assert_eq!(s.token(1).coarse(), "D");
        assert_eq!(s.token(2).coarse(), "XX");
    }

    #[test]
    fn empty_sentence_rejected() {
        assert!(AnnotatedSentence::new(vec![]).is_err());
    }
}
