use std::collections::BTreeMap;

use super::TokenId;

#[derive(Debug, Clone, Default)]
struct Node {
    children: BTreeMap<u8, usize>,
    tokens: Vec<TokenId>,
}

/// Byte trie over vocabulary words.
#[derive(Debug, Clone)]
pub struct PrefixIndex {
    nodes: Vec<Node>,
}

impl PrefixIndex {
    pub fn new<'a, I>(words: I) -> Self
    where
        I: IntoIterator<Item = (TokenId, &'a str)>,
    {
        let mut nodes = vec![Node::default()];
        for (id, word) in words {
            let mut at = 0;
            for &b in word.as_bytes() {
                at = match nodes[at].children.get(&b) {
                    Some(&next) => next,
                    None => {
                        nodes.push(Node::default());
                        let next = nodes.len() - 1;
                        nodes[at].children.insert(b, next);
                        next
                    }
                };
            }
            nodes[at].tokens.push(id);
        }
        Self { nodes }
    }

    /// Every `(word length, token)` whose word is a prefix of `s`, shortest first.
    pub fn prefixes_of(&self, s: &[u8]) -> Vec<(usize, TokenId)> {
        let mut out = Vec::new();
        let mut at = 0;
        for (i, b) in s.iter().enumerate() {
            match self.nodes[at].children.get(b) {
                Some(&next) => at = next,
                None => break,
            }
            out.extend(self.nodes[at].tokens.iter().map(|&t| (i + 1, t)));
        }
        out
    }

    /// Tokens whose word is a prefix of `s`.
    pub fn lookup(&self, s: &[u8]) -> Vec<TokenId> {
        self.prefixes_of(s).into_iter().map(|(_, t)| t).collect()
    }
}
