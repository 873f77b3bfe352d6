use std::collections::BTreeSet;

use super::{TokenId, TokenSeq, TokenizerSpec};
use crate::error::{Error, Result};

/// How [`get_collision_with`] enumerates candidate sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CollisionSearch {
    /// Depth-first walk over the prefix index.
    #[default]
    PrefixIndex,
    /// Decode every sequence of length `1..=d`. Exponential; for cross-checking.
    BruteForce,
}

/// All non-EOS sequences of length `1..=d` that decode to the same string as `sigma`.
pub fn get_collision(spec: &TokenizerSpec, sigma: &TokenSeq, d: usize) -> Result<BTreeSet<TokenSeq>> {
    get_collision_with(spec, sigma, d, CollisionSearch::PrefixIndex)
}

pub fn get_collision_with(
    spec: &TokenizerSpec,
    sigma: &TokenSeq,
    d: usize,
    search: CollisionSearch,
) -> Result<BTreeSet<TokenSeq>> {
    let text = spec.decode(sigma)?;
    Ok(match search {
        CollisionSearch::PrefixIndex => collide_text(spec, text.as_bytes(), d),
        CollisionSearch::BruteForce => brute_force(spec, &text, d)?,
    })
}

pub(super) fn collide_text(spec: &TokenizerSpec, text: &[u8], d: usize) -> BTreeSet<TokenSeq> {
    let mut out = BTreeSet::new();
    let mut path = Vec::with_capacity(d);
    if !text.is_empty() {
        walk(spec, text, 0, d, &mut path, &mut out);
    }
    out
}

fn walk(
    spec: &TokenizerSpec,
    text: &[u8],
    pos: usize,
    budget: usize,
    path: &mut Vec<TokenId>,
    out: &mut BTreeSet<TokenSeq>,
) {
    if pos == text.len() {
        out.insert(TokenSeq(path.clone()));
        return;
    }
    if budget == 0 {
        return;
    }
    for (len, id) in spec.prefix_index().prefixes_of(&text[pos..]) {
        path.push(id);
        walk(spec, text, pos + len, budget - 1, path, out);
        path.pop();
    }
}

fn brute_force(spec: &TokenizerSpec, text: &str, d: usize) -> Result<BTreeSet<TokenSeq>> {
    let v = spec.vocab_size();
    let total: f64 = (1..=d).map(|k| (v as f64).powi(k as i32)).sum();
    if total > 5e7 {
        return Err(Error::OracleIntractable(format!("{total:.0} sequences to enumerate")));
    }
    let mut out = BTreeSet::new();
    if v == 0 {
        return Ok(out);
    }
    for k in 1..=d {
        let mut digits = vec![1 as TokenId; k];
        'next: loop {
            if spec.decode_ids(&digits)? == text {
                out.insert(TokenSeq(digits.clone()));
            }
            for i in (0..k).rev() {
                if (digits[i] as usize) < v {
                    digits[i] += 1;
                    continue 'next;
                }
                digits[i] = 1;
            }
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seqs(v: &[&[TokenId]]) -> BTreeSet<TokenSeq> {
        v.iter().map(|s| TokenSeq(s.to_vec())).collect()
    }

    #[test]
    fn abc_example() {
        let t = TokenizerSpec::from_words("abc", &["a", "b", "ab"]).unwrap();
        let got = get_collision(&t, &TokenSeq(vec![3]), 2).unwrap();
        assert_eq!(got, seqs(&[&[3], &[1, 2]]));
        let got = get_collision(&t, &TokenSeq(vec![3]), 1).unwrap();
        assert_eq!(got, seqs(&[&[3]]));
    }

    #[test]
    fn not_equals_example() {
        let t = TokenizerSpec::from_words("ne", &["a", "!", "=", "b", "!="]).unwrap();
        let sigma = t.encode("a!=b").unwrap();
        assert_eq!(sigma, TokenSeq(vec![1, 5, 4]));
        let got = get_collision(&t, &sigma, 4).unwrap();
        assert_eq!(got, seqs(&[&[1, 2, 3, 4], &[1, 5, 4]]));
        assert_eq!(get_collision(&t, &sigma, 3).unwrap(), seqs(&[&[1, 5, 4]]));
    }

    #[test]
    fn empty_text_has_no_collisions() {
        let t = TokenizerSpec::from_words("abc", &["a", "b", "ab"]).unwrap();
        assert!(get_collision(&t, &TokenSeq(vec![4]), 3).unwrap().is_empty());
        assert!(get_collision_with(&t, &TokenSeq(vec![]), 3, CollisionSearch::BruteForce)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn brute_force_refuses_huge_enumerations() {
        let words: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
        let t = TokenizerSpec::from_words("big", &words).unwrap();
        let r = get_collision_with(&t, &TokenSeq(vec![1]), 4, CollisionSearch::BruteForce);
        assert!(matches!(r, Err(Error::OracleIntractable(_))));
    }

    proptest! {
        #[test]
        fn collisions_are_sound_and_complete(
            words in proptest::collection::btree_set("[ab=]{1,3}", 1..9),
            text in "[ab=]{1,6}",
            d in 1usize..5,
        ) {
            let mut words: Vec<String> = words.into_iter().collect();
            for base in ["a", "b", "="] {
                if !words.iter().any(|w| w == base) {
                    words.push(base.to_owned());
                }
            }
            let t = TokenizerSpec::from_words("p", &words).unwrap();
            let sigma = t.encode(&text).unwrap();
            let fast = get_collision(&t, &sigma, d).unwrap();
            let slow = get_collision_with(&t, &sigma, d, CollisionSearch::BruteForce).unwrap();
            for s in &fast {
                prop_assert!(!s.is_empty() && s.len() <= d);
                prop_assert_eq!(t.decode(s).unwrap(), text.clone());
            }
            if sigma.len() <= d {
                prop_assert!(fast.contains(&sigma));
            }
            prop_assert_eq!(fast, slow);
        }
    }
}
