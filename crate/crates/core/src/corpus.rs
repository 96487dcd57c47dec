//! Headline records, micro-edit application and token preprocessing.
//!
//! A record's `original` text carries exactly one edit span written
//! `<word/>`. The edited variant replaces the span with the substitute word;
//! the original variant strips the markers and keeps the word.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Token used to fill sequences up to their fixed capacity.
pub const PAD: &str = "<pad>";

/// Default sequence capacity.
pub const DEFAULT_MAX_LEN: usize = 40;

/// Upper end of the funniness scale.
pub const MAX_GRADE: f64 = 3.0;

const MEAN_TOLERANCE: f64 = 1e-6;

/// Location of the `<word/>` marker inside an original headline (byte offsets).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditSpan {
    /// Offset of `<`.
    pub start: usize,
    /// Offset one past the closing `>`.
    pub end: usize,
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadlineRecord {
    pub id: String,
    pub original: String,
    pub substitute: String,
    pub grades: Vec<u8>,
    pub mean_grade: f64,
    span: EditSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Original,
    Edited,
}

impl HeadlineRecord {
    /// Builds a record, checking every record invariant.
    pub fn new(
        id: impl Into<String>,
        original: impl Into<String>,
        substitute: impl Into<String>,
        grades: Vec<u8>,
        mean_grade: f64,
    ) -> Result<Self> {
        let original = original.into();
        let substitute = substitute.into();
        let span = find_edit_span(&original)?;
        if substitute.trim().is_empty() || substitute.chars().any(char::is_whitespace) {
            return Err(Error::Record(format!(
                "substitute must be a single word, got {substitute:?}"
            )));
        }
        if grades.is_empty() {
            return Err(Error::Record("grade list is empty".into()));
        }
        if let Some(g) = grades.iter().find(|&&g| g > 3) {
            return Err(Error::Record(format!("grade {g} outside 0..=3")));
        }
        if !mean_grade.is_finite() || !(0.0..=MAX_GRADE).contains(&mean_grade) {
            return Err(Error::Record(format!("mean grade {mean_grade} outside [0, 3]")));
        }
        let mean = grades.iter().map(|&g| f64::from(g)).sum::<f64>() / grades.len() as f64;
        if (mean - mean_grade).abs() > MEAN_TOLERANCE {
            return Err(Error::Record(format!(
                "mean grade {mean_grade} disagrees with grades (mean {mean})"
            )));
        }
        Ok(Self {
            id: id.into(),
            original,
            substitute,
            grades,
            mean_grade,
            span,
        })
    }

    pub fn span(&self) -> EditSpan {
        self.span
    }

    /// The word inside the edit markers.
    pub fn marked_word(&self) -> &str {
        &self.original[self.span.start + 1..self.span.end - 2]
    }

    /// Text of the requested variant, with no markers left.
    pub fn apply_edit(&self, variant: Variant) -> String {
        let word = match variant {
            Variant::Original => self.marked_word(),
            Variant::Edited => self.substitute.as_str(),
        };
        let mut out = String::with_capacity(self.original.len() + word.len());
        out.push_str(&self.original[..self.span.start]);
        out.push_str(word);
        out.push_str(&self.original[self.span.end..]);
        out
    }
}

/// Parses a digit string such as `"21000"` into grades.
pub fn parse_grades(digits: &str) -> Result<Vec<u8>> {
    if digits.is_empty() {
        return Err(Error::Record("grade string is empty".into()));
    }
    digits
        .chars()
        .map(|c| match c {
            '0'..='3' => Ok(c as u8 - b'0'),
            _ => Err(Error::Record(format!("grade character {c:?} not in 0-3"))),
        })
        .collect()
}

/// Locates the single `<word/>` span.
pub fn find_edit_span(original: &str) -> Result<EditSpan> {
    let closes: Vec<usize> = original.match_indices("/>").map(|(i, _)| i).collect();
    if closes.len() != 1 {
        return Err(Error::Record(format!(
            "expected exactly one edit span, found {}",
            closes.len()
        )));
    }
    let close = closes[0];
    let open = original[..close]
        .rfind('<')
        .ok_or_else(|| Error::Record("edit span has no opening `<`".into()))?;
    let word = &original[open + 1..close];
    if word.is_empty() || word.contains(['<', '>']) {
        return Err(Error::Record(format!("malformed edit span {word:?}")));
    }
    if original[..open].contains('<') || original[close + 2..].contains('<') {
        return Err(Error::Record("expected exactly one edit span".into()));
    }
    Ok(EditSpan {
        start: open,
        end: close + 2,
    })
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
                | '\u{00ab}' | '\u{00bb}'
        )
}

/// Lowercases, splits on whitespace and strips edge punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(is_punct).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// A set of words removed before embedding lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    words: BTreeSet<String>,
}

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

impl StopList {
    /// The bundled English list.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS).expect("bundled stop list is well-formed")
    }

    /// Parses one word per line; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            };
            let word = line.trim();
            if word.is_empty() {
                continue;
            }
            if word.chars().any(char::is_whitespace) || word.to_lowercase() != word {
                return Err(Error::StopList(format!(
                    "line {}: entry {word:?} must be one lowercase word",
                    n + 1
                )));
            }
            words.insert(word.to_string());
        }
        if words.is_empty() {
            return Err(Error::StopList("no entries".into()));
        }
        Ok(Self { words })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &StopList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// A fixed-capacity token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub effective_len: usize,
}

impl TokenSequence {
    pub fn max_len(&self) -> usize {
        self.tokens.len()
    }

    /// The tokens before padding.
    pub fn content(&self) -> &[String] {
        &self.tokens[..self.effective_len]
    }
}

/// Keeps the head of long sequences and pads short ones with [`PAD`].
pub fn pad_truncate(mut tokens: Vec<String>, max_len: usize) -> Result<TokenSequence> {
    if max_len == 0 {
        return Err(Error::Invalid("max_len must be at least 1".into()));
    }
    tokens.truncate(max_len);
    let effective_len = tokens.len();
    tokens.resize(max_len, PAD.to_string());
    Ok(TokenSequence {
        tokens,
        effective_len,
    })
}

/// Counts of mean grades per left-inclusive bin covering `[0, 3]`.
///
/// The last bin also holds the value `3.0` so that counts always sum to the
/// number of records.
pub fn grade_histogram(mean_grades: &[f64], bin_width: f64) -> Result<Vec<(f64, usize)>> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::Invalid(format!("bin width must be positive, got {bin_width}")));
    }
    // Bin boundaries are compared with a small slack so that values such as
    // 0.6 land in the bin whose lower bound prints as 0.6.
    let slack = 1e-9;
    let n_bins = libm::ceil(MAX_GRADE / bin_width - slack).max(1.0) as usize;
    let mut counts = vec![0usize; n_bins];
    for &g in mean_grades {
        let idx = libm::floor(g / bin_width + slack).max(0.0) as usize;
        counts[idx.min(n_bins - 1)] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * bin_width, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_row1() -> HeadlineRecord {
        HeadlineRecord::new(
            "1",
            "Trump wants you to take his <tweets/> seriously. His aides don't",
            "hair",
            vec![3, 3, 3, 3, 2],
            2.8,
        )
        .unwrap()
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn edit_variants() {
        let r = table1_row1();
        assert_eq!(
            r.apply_edit(Variant::Edited),
            "Trump wants you to take his hair seriously. His aides don't"
        );
        assert_eq!(
            r.apply_edit(Variant::Original),
            "Trump wants you to take his tweets seriously. His aides don't"
        );
        assert_eq!(r.marked_word(), "tweets");
    }

    #[test]
    fn identity_substitution() {
        let r = HeadlineRecord::new("9", "a <cat/> sat", "cat", vec![1], 1.0).unwrap();
        assert_eq!(r.apply_edit(Variant::Edited), r.apply_edit(Variant::Original));
    }

    #[test]
    fn record_invariants() {
        assert!(HeadlineRecord::new("x", "no span here", "w", vec![0], 0.0).is_err());
        assert!(HeadlineRecord::new("x", "<a/> and <b/>", "w", vec![0], 0.0).is_err());
        assert!(HeadlineRecord::new("x", "a <b/>", "w", vec![], 0.0).is_err());
        assert!(HeadlineRecord::new("x", "a <b/>", "w", vec![4], 0.0).is_err());
        assert!(HeadlineRecord::new("x", "a <b/>", "two words", vec![0], 0.0).is_err());
        assert!(HeadlineRecord::new("x", "a <b/>", "w", vec![3; 5], 3.0).is_ok());
        assert!(HeadlineRecord::new("x", "a <b/>", "w", vec![3; 5], 2.9).is_err());
        assert!(HeadlineRecord::new("x", "a <b/>", "w", vec![0; 5], 0.0).is_ok());
    }

    #[test]
    fn grades_from_digits() {
        assert_eq!(parse_grades("21000").unwrap(), vec![2, 1, 0, 0, 0]);
        assert_eq!(parse_grades("00000").unwrap(), vec![0; 5]);
        assert!(parse_grades("2104").is_err());
        assert!(parse_grades("").is_err());
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(tokenize("Trump wants you."), strings(&["trump", "wants", "you"]));
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Nagorno-Karabakh fighting: Officials"),
            strings(&["nagorno-karabakh", "fighting", "officials"])
        );
        assert_eq!(tokenize("-- ... hello !!"), strings(&["hello"]));
        assert_eq!(tokenize("aides don't"), strings(&["aides", "don't"]));
    }

    #[test]
    fn stopword_filtering() {
        let list = StopList::parse("you\nto\nhis\n").unwrap();
        let toks = strings(&["trump", "wants", "you", "to", "take", "his", "hair"]);
        assert_eq!(
            remove_stopwords(toks, &list),
            strings(&["trump", "wants", "take", "hair"])
        );
        assert!(remove_stopwords(vec![], &list).is_empty());
        let clean = strings(&["trump", "hair"]);
        assert_eq!(remove_stopwords(clean.clone(), &list), clean);
    }

    #[test]
    fn bundled_list_covers_example_words() {
        let list = StopList::bundled();
        assert_eq!(list.len(), 179);
        for w in ["you", "to", "his"] {
            assert!(list.contains(w));
        }
        assert!(!list.contains("trump"));
    }

    #[test]
    fn stoplist_format_errors() {
        assert!(StopList::parse("# only a comment\n\n").is_err());
        assert!(StopList::parse("Upper\n").is_err());
        assert!(StopList::parse("two words\n").is_err());
        let l = StopList::parse("a # trailing comment\n").unwrap();
        assert!(l.contains("a"));
    }

    #[test]
    fn padding_and_truncation() {
        let seven = pad_truncate(strings(&["a"; 7]), 40).unwrap();
        assert_eq!(seven.tokens.len(), 40);
        assert_eq!(seven.effective_len, 7);
        assert!(seven.tokens[7..].iter().all(|t| t == PAD));

        let forty = pad_truncate(strings(&["a"; 40]), 40).unwrap();
        assert_eq!(forty.effective_len, 40);
        assert!(forty.tokens.iter().all(|t| t == "a"));

        let mut long: Vec<String> = (0..45).map(|i| i.to_string()).collect();
        let t = pad_truncate(long.clone(), 40).unwrap();
        long.truncate(40);
        assert_eq!(t.tokens, long);
        assert_eq!(t.effective_len, 40);

        assert!(pad_truncate(vec![], 0).is_err());
    }

    #[test]
    fn histogram_counts() {
        let h = grade_histogram(&[0.0, 0.2, 1.0], 1.0).unwrap();
        assert_eq!(h, vec![(0.0, 2), (1.0, 1), (2.0, 0)]);
        let empty = grade_histogram(&[], 1.0).unwrap();
        assert!(empty.iter().all(|&(_, c)| c == 0));
        assert_eq!(empty.len(), 3);
        // left-inclusive
        let h = grade_histogram(&[1.0], 1.0).unwrap();
        assert_eq!(h[1], (1.0, 1));
        // top of the scale goes into the last bin
        let h = grade_histogram(&[3.0], 1.0).unwrap();
        assert_eq!(h[2].1, 1);
        let h = grade_histogram(&[0.6, 0.4], 0.2).unwrap();
        assert_eq!(h.len(), 15);
        assert_eq!(h[3].1, 1);
        assert_eq!(h[2].1, 1);
        assert!(grade_histogram(&[1.0], 0.0).is_err());
    }
}
