//! Text normalization: tokenization, stop-word removal and suffix stripping.
//!
//! The stop-word list and the stemmer rule table live under `data/` and are
//! compiled into the crate, so normalization is identical on every machine.

use std::collections::HashSet;
use std::sync::OnceLock;

const STOPWORDS_SRC: &str = include_str!("../data/stopwords.txt");
const STEMMER_RULES_SRC: &str = include_str!("../data/stemmer_rules.tsv");

/// Lowercases, tokenizes, drops stop words and stems `text`.
///
/// Tokens are maximal runs of alphanumeric characters, `+` and `#` (so that
/// `c++` and `c#` survive); runs without any alphanumeric character are
/// dropped.
pub fn normalize_text(text: &str) -> Vec<String> {
    let stop = stopwords();
    let stemmer = Stemmer::shared();
    tokenize(text)
        .filter(|t| !stop.contains(t.as_str()))
        .map(|t| stemmer.stem(&t))
        .collect()
}

/// Normalizes a topic or language label into its canonical form: the
/// normalized tokens joined with `-`.
///
/// Labels made only of stop words keep them (stemmed) rather than vanishing.
/// Returns `None` when the label has no alphanumeric content at all.
pub fn normalize_topic(label: &str) -> Option<String> {
    let mut tokens = normalize_text(label);
    if tokens.is_empty() {
        let stemmer = Stemmer::shared();
        tokens = tokenize(label).map(|t| stemmer.stem(&t)).collect();
    }
    if tokens.is_empty() {
        None
    } else {
        Some(tokens.join("-"))
    }
}

fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '+' || c == '#'))
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_lowercase)
}

pub fn stopwords() -> &'static HashSet<&'static str> {
    static STOP: OnceLock<HashSet<&'static str>> = OnceLock::new();
    STOP.get_or_init(|| {
        STOPWORDS_SRC
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Condition {
    Always,
    MeasureAbove0,
    MeasureAbove1,
    ContainsVowel,
    MeasureAbove1EndsSOrT,
    MeasureAbove1OrOneNotCvc,
    MeasureAbove1DoubleConsonant,
}

impl Condition {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "always" => Condition::Always,
            "m>0" => Condition::MeasureAbove0,
            "m>1" => Condition::MeasureAbove1,
            "vowel" => Condition::ContainsVowel,
            "m>1,s|t" => Condition::MeasureAbove1EndsSOrT,
            "m>1|m=1,!cvc" => Condition::MeasureAbove1OrOneNotCvc,
            "m>1,dbl" => Condition::MeasureAbove1DoubleConsonant,
            _ => return None,
        })
    }

    fn holds(self, word: &[u8], stem_len: usize) -> bool {
        let stem = &word[..stem_len];
        match self {
            Condition::Always => true,
            Condition::MeasureAbove0 => measure(stem) > 0,
            Condition::MeasureAbove1 => measure(stem) > 1,
            Condition::ContainsVowel => (0..stem.len()).any(|i| !is_consonant(stem, i)),
            Condition::MeasureAbove1EndsSOrT => {
                measure(stem) > 1 && matches!(stem.last(), Some(b's') | Some(b't'))
            }
            Condition::MeasureAbove1OrOneNotCvc => {
                let m = measure(stem);
                m > 1 || (m == 1 && !ends_cvc(stem))
            }
            Condition::MeasureAbove1DoubleConsonant => {
                measure(stem) > 1 && ends_double_consonant(word)
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Rule {
    suffix: String,
    replacement: String,
    condition: Condition,
}

#[derive(Debug, Clone)]
struct Step {
    name: String,
    rules: Vec<Rule>,
}

/// Table-driven Porter stemmer built from `data/stemmer_rules.tsv`.
#[derive(Debug, Clone)]
pub struct Stemmer {
    steps: Vec<Step>,
}

impl Stemmer {
    /// Parses a rule table in the `stemmer_rules.tsv` format.
    pub fn from_table(src: &str) -> Result<Self, String> {
        let mut steps: Vec<Step> = Vec::new();
        for (lineno, line) in src.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(format!("line {}: expected 4 columns", lineno + 1));
            }
            let condition = Condition::parse(cols[3])
                .ok_or_else(|| format!("line {}: unknown condition {:?}", lineno + 1, cols[3]))?;
            let rule = Rule {
                suffix: cols[1].to_string(),
                replacement: if cols[2] == "-" { String::new() } else { cols[2].to_string() },
                condition,
            };
            match steps.last_mut() {
                Some(step) if step.name == cols[0] => step.rules.push(rule),
                _ => steps.push(Step { name: cols[0].to_string(), rules: vec![rule] }),
            }
        }
        Ok(Stemmer { steps })
    }

    pub fn shared() -> &'static Stemmer {
        static STEMMER: OnceLock<Stemmer> = OnceLock::new();
        STEMMER.get_or_init(|| {
            Stemmer::from_table(STEMMER_RULES_SRC).expect("bundled stemmer table is valid")
        })
    }

    /// Stems one lowercase token. Tokens that are not purely ASCII
    /// alphabetic, or shorter than three letters, are returned unchanged.
    pub fn stem(&self, token: &str) -> String {
        if token.len() <= 2 || !token.bytes().all(|b| b.is_ascii_lowercase()) {
            return token.to_string();
        }
        let mut word = token.as_bytes().to_vec();
        let mut cleanup_pending = false;
        for step in &self.steps {
            if step.name == "1b+" {
                if cleanup_pending {
                    step1b_cleanup(&mut word, &step.rules);
                }
                continue;
            }
            let fired = apply_step(&mut word, &step.rules);
            if step.name == "1b" {
                cleanup_pending = matches!(fired, Some(r) if r.replacement.is_empty());
            }
        }
        String::from_utf8(word).expect("ascii in, ascii out")
    }
}

/// Applies the longest matching rule of a step. Returns the rule that fired.
fn apply_step<'a>(word: &mut Vec<u8>, rules: &'a [Rule]) -> Option<&'a Rule> {
    let rule = rules
        .iter()
        .filter(|r| word.len() > r.suffix.len() && word.ends_with(r.suffix.as_bytes()))
        .max_by_key(|r| r.suffix.len())?;
    let stem_len = word.len() - rule.suffix.len();
    if !rule.condition.holds(word, stem_len) {
        return None;
    }
    word.truncate(stem_len);
    word.extend_from_slice(rule.replacement.as_bytes());
    Some(rule)
}

fn step1b_cleanup(word: &mut Vec<u8>, rules: &[Rule]) {
    if apply_step(word, rules).is_some() {
        return;
    }
    if ends_double_consonant(word) && !matches!(word.last(), Some(b'l' | b's' | b'z')) {
        word.pop();
    } else if measure(word) == 1 && ends_cvc(word) {
        word.push(b'e');
    }
}

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Number of VC sequences in the word.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let cons = is_consonant(w, i);
        if cons && prev_vowel {
            m += 1;
        }
        prev_vowel = !cons;
    }
    m
}

fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}
