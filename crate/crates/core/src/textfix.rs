//! OCR text repair: edit distance, fuzzy lexicon lookup, character
//! substitution tables and Bikram Sambat date normalization.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default similarity a lexicon match must reach to be applied.
pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - levenshtein / max length`, and 1 for two empty strings.
pub fn similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Trims and collapses internal whitespace runs to single spaces.
pub fn normalize_whitespace(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A list of canonical strings, optionally each mapped to a code
/// (e.g. a gender term to `M`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    name: String,
    entries: Vec<String>,
    codes: Option<Vec<String>>,
    threshold: f64,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, entries: Vec<String>, threshold: f64) -> Result<Self> {
        Self::build(name.into(), entries, None, threshold)
    }

    /// `pairs` are `(surface form, code)`.
    pub fn mapped(
        name: impl Into<String>,
        pairs: Vec<(String, String)>,
        threshold: f64,
    ) -> Result<Self> {
        let (entries, codes) = pairs.into_iter().unzip();
        Self::build(name.into(), entries, Some(codes), threshold)
    }

    fn build(
        name: String,
        entries: Vec<String>,
        codes: Option<Vec<String>>,
        threshold: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "lexicon {name}: threshold {threshold} outside [0, 1]"
            )));
        }
        if entries.is_empty() {
            return Err(Error::Config(format!("lexicon {name} is empty")));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.trim().is_empty() {
                return Err(Error::Config(format!("lexicon {name} has an empty entry")));
            }
            if !seen.insert(e.as_str()) {
                return Err(Error::Config(format!("lexicon {name} repeats {e:?}")));
            }
        }
        Ok(Lexicon {
            name,
            entries,
            codes,
            threshold,
        })
    }

    /// Parses the text format: one entry per line, or `surface<TAB>code`
    /// for mapped lexicons. Blank lines and `#` comments are skipped.
    pub fn parse(name: impl Into<String>, text: &str, threshold: f64) -> Result<Self> {
        let name = name.into();
        let mut plain = Vec::new();
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                Some((surface, code)) => {
                    pairs.push((normalize_whitespace(surface), code.trim().to_string()))
                }
                None => plain.push(normalize_whitespace(line)),
            }
            if !plain.is_empty() && !pairs.is_empty() {
                return Err(Error::parse(i + 1, "mixes plain and mapped entries"));
            }
        }
        if pairs.is_empty() {
            Self::new(name, plain, threshold)
        } else {
            Self::mapped(name, pairs, threshold)
        }
    }

    /// Loads a lexicon file; its name is the file stem.
    pub fn load(path: &Path, threshold: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(name, &text, threshold)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn is_mapped(&self) -> bool {
        self.codes.is_some()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "threshold {threshold} outside [0, 1]"
            )));
        }
        self.threshold = threshold;
        Ok(self)
    }

    fn code_of(&self, entry: &str) -> Option<&str> {
        let codes = self.codes.as_ref()?;
        let i = self.entries.iter().position(|e| e == entry)?;
        Some(&codes[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOutcome {
    pub value: String,
    pub applied: bool,
    pub similarity: f64,
    /// Best candidates first, for diagnostics.
    pub candidate_rank: Vec<(String, f64)>,
}

const RANK_LEN: usize = 5;

/// Matches `raw` against every entry. The best entry wins on similarity,
/// then smaller edit distance, then lexicographic order, so the result does
/// not depend on entry order.
pub fn correct_token(raw: &str, lex: &Lexicon) -> Result<CorrectionOutcome> {
    if lex.entries.is_empty() {
        return Err(Error::Config(format!("lexicon {} is empty", lex.name)));
    }
    let token = normalize_whitespace(raw);
    let mut scored: Vec<(&str, f64, usize)> = lex
        .entries
        .iter()
        .map(|e| (e.as_str(), similarity(&token, e), levenshtein(&token, e)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.2.cmp(&b.2))
            .then(a.0.cmp(b.0))
    });
    let (best, sim, _) = scored[0];
    let applied = !token.is_empty() && sim >= lex.threshold;
    Ok(CorrectionOutcome {
        value: if applied { best.to_string() } else { token },
        applied,
        similarity: sim,
        candidate_rank: scored
            .iter()
            .take(RANK_LEN)
            .map(|(e, s, _)| (e.to_string(), *s))
            .collect(),
    })
}

/// Fuzzy-matches against the surface forms of a mapped lexicon and emits the
/// matched form's code. With a plain lexicon the matched entry itself is
/// the code.
pub fn standardize_gender(raw: &str, mapping: &Lexicon) -> Result<CorrectionOutcome> {
    let mut out = correct_token(raw, mapping)?;
    if out.applied {
        if let Some(code) = mapping.code_of(&out.value) {
            out.value = code.to_string();
        }
    }
    Ok(out)
}

/// Scope name that applies a table to every field.
pub const ALL_FIELDS: &str = "all";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionTable {
    pub rules: Vec<(String, String)>,
    pub scope: String,
}

impl SubstitutionTable {
    pub fn new(rules: Vec<(String, String)>, scope: impl Into<String>) -> Result<Self> {
        if rules.iter().any(|(from, _)| from.is_empty()) {
            return Err(Error::Config("substitution rule with empty source".into()));
        }
        Ok(SubstitutionTable {
            rules,
            scope: scope.into(),
        })
    }

    pub fn applies_to(&self, field: &str) -> bool {
        self.scope == ALL_FIELDS || self.scope == field
    }
}

/// Parses `from<TAB>to[<TAB>scope]` lines into one table per scope, in
/// order of first appearance. Rules keep their file order within a scope.
pub fn parse_substitutions(text: &str) -> Result<Vec<SubstitutionTable>> {
    let mut tables: Vec<SubstitutionTable> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (from, to, scope) = match cols.as_slice() {
            [from, to] => (*from, *to, ALL_FIELDS),
            [from, to, scope] => (*from, *to, scope.trim()),
            _ => return Err(Error::parse(i + 1, "expected from<TAB>to[<TAB>scope]")),
        };
        if from.is_empty() {
            return Err(Error::parse(i + 1, "empty source string"));
        }
        let rule = (from.to_string(), to.to_string());
        match tables.iter_mut().find(|t| t.scope == scope) {
            Some(t) => t.rules.push(rule),
            None => tables.push(SubstitutionTable {
                rules: vec![rule],
                scope: scope.to_string(),
            }),
        }
    }
    Ok(tables)
}

/// Applies each rule once, in order, replacing non-overlapping matches left
/// to right.
pub fn apply_substitutions(raw: &str, table: &SubstitutionTable) -> String {
    table.rules.iter().fold(raw.to_string(), |s, (from, to)| {
        s.replace(from.as_str(), to)
    })
}

fn ascii_digit(c: char) -> char {
    match c {
        '०'..='९' => char::from(b'0' + (c as u32 - '०' as u32) as u8),
        _ => c,
    }
}

/// Normalizes a Bikram Sambat date to `YYYY-MM-DD`. Accepts Devanagari or
/// ASCII digits and `/ - .` or spaces as separators. Months run 1..=12 and
/// days 1..=32.
pub fn normalize_date(raw: &str) -> Result<String> {
    let fail = |reason: &str| Error::Date {
        raw: raw.to_string(),
        reason: reason.to_string(),
    };
    let mapped: String = raw.trim().chars().map(ascii_digit).collect();
    let parts: Vec<&str> = mapped
        .split(|c: char| matches!(c, '/' | '-' | '.') || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .collect();
    let [year, month, day] = parts.as_slice() else {
        return Err(fail("expected year, month and day"));
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if year.len() != 4 || !digits(year) {
        return Err(fail("year must have four digits"));
    }
    let small = |s: &str, what: &str, max: u32| -> Result<u32> {
        if s.len() > 2 || !digits(s) {
            return Err(fail(&format!("{what} must have one or two digits")));
        }
        let v: u32 = s.parse().map_err(|_| fail(what))?;
        if !(1..=max).contains(&v) {
            return Err(fail(&format!("{what} {v} outside 1..={max}")));
        }
        Ok(v)
    };
    let m = small(month, "month", 12)?;
    let d = small(day, "day", 32)?;
    Ok(format!("{year}-{m:02}-{d:02}"))
}
