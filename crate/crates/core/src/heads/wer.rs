use serde::{Deserialize, Serialize};

use super::HeadError;

/// Levenshtein distance with unit substitution, insertion and deletion costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Whitespace tokenization, no normalization.
pub fn tokenize(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerScore {
    pub edits: usize,
    pub ref_words: usize,
    pub wer: f64,
}

pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<WerScore, HeadError> {
    if reference.is_empty() {
        return Err(HeadError::EmptyReference);
    }
    let edits = edit_distance(reference, hypothesis);
    Ok(WerScore {
        edits,
        ref_words: reference.len(),
        wer: edits as f64 / reference.len() as f64,
    })
}

/// Total edits over total reference words.
pub fn corpus_wer<'a, I>(pairs: I) -> Result<WerScore, HeadError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let (mut edits, mut words) = (0, 0);
    for (r, h) in pairs {
        let s = wer(&tokenize(r), &tokenize(h))?;
        edits += s.edits;
        words += s.ref_words;
    }
    if words == 0 {
        return Err(HeadError::EmptyReference);
    }
    Ok(WerScore {
        edits,
        ref_words: words,
        wer: edits as f64 / words as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_is_zero() {
        let r = tokenize("a b c");
        assert_eq!(wer(&r, &r).unwrap().wer, 0.0);
    }

    #[test]
    fn one_substitution() {
        let s = wer(&tokenize("a b c"), &tokenize("a x c")).unwrap();
        assert_eq!(s.edits, 1);
        assert!((s.wer - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_reference_is_rejected() {
        assert_eq!(wer::<&str>(&[], &["a"]), Err(HeadError::EmptyReference));
    }

    #[test]
    fn known_distances() {
        assert_eq!(edit_distance(b"kitten", b"sitting"), 3);
        assert_eq!(edit_distance(b"", b"abc"), 3);
        assert_eq!(edit_distance(b"abc", b""), 3);
        assert_eq!(edit_distance(b"flaw", b"lawn"), 2);
    }

    #[test]
    fn corpus_level_aggregation() {
        let s = corpus_wer([("a b", "a"), ("c d e f", "c d e f")]).unwrap();
        assert_eq!((s.edits, s.ref_words), (1, 6));
    }

    proptest! {
        #[test]
        fn metric_axioms(
            a in prop::collection::vec(0u8..3, 0..8),
            b in prop::collection::vec(0u8..3, 0..8),
            c in prop::collection::vec(0u8..3, 0..8),
        ) {
            let ab = edit_distance(&a, &b);
            prop_assert_eq!(ab, edit_distance(&b, &a));
            prop_assert!(edit_distance(&a, &c) <= ab + edit_distance(&b, &c));
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(ab >= a.len().abs_diff(b.len()));
        }
    }
}
