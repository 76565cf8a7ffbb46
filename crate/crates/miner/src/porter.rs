//! Porter stemmer, with Martin Porter's published revisions to the original
//! algorithm (the `bli`/`logi` step-2 rules and the short-word guard).

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Per-character consonant flags; `y` is a consonant at the start or
/// after a vowel.
fn consonant_flags(w: &[char]) -> Vec<bool> {
    let mut flags: Vec<bool> = Vec::with_capacity(w.len());
    for (i, &c) in w.iter().enumerate() {
        let f = if is_vowel(c) {
            false
        } else if c == 'y' {
            i == 0 || !flags[i - 1]
        } else {
            true
        };
        flags.push(f);
    }
    flags
}

/// Number of vowel-consonant sequences, `m` in `[C](VC)^m[V]`.
fn measure(w: &[char]) -> usize {
    let flags = consonant_flags(w);
    flags.windows(2).filter(|p| !p[0] && p[1]).count()
}

fn contains_vowel(w: &[char]) -> bool {
    consonant_flags(w).iter().any(|c| !c)
}

fn ends_double_consonant(w: &[char]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && consonant_flags(w)[n - 1]
}

fn ends_cvc(w: &[char]) -> bool {
    let n = w.len();
    if n < 3 {
        return false;
    }
    let f = consonant_flags(w);
    f[n - 3] && !f[n - 2] && f[n - 1] && !matches!(w[n - 1], 'w' | 'x' | 'y')
}

fn ends_with(w: &[char], suffix: &str) -> bool {
    let n = suffix.chars().count();
    w.len() >= n && w[w.len() - n..].iter().copied().eq(suffix.chars())
}

fn strip(w: &[char], suffix: &str) -> Vec<char> {
    w[..w.len() - suffix.chars().count()].to_vec()
}

fn with(mut stem: Vec<char>, tail: &str) -> Vec<char> {
    stem.extend(tail.chars());
    stem
}

type Cond = fn(&[char]) -> bool;

fn m_pos(s: &[char]) -> bool {
    measure(s) > 0
}

fn m_gt1(s: &[char]) -> bool {
    measure(s) > 1
}

/// The first rule whose suffix matches decides the result, whether or not
/// its condition holds.
fn apply_rules(w: Vec<char>, rules: &[(&str, &str, Option<Cond>)]) -> Vec<char> {
    for &(suffix, replacement, cond) in rules {
        if ends_with(&w, suffix) {
            let stem = strip(&w, suffix);
            return if cond.map_or(true, |c| c(&stem)) { with(stem, replacement) } else { w };
        }
    }
    w
}

fn step1a(w: Vec<char>) -> Vec<char> {
    apply_rules(w, &[("sses", "ss", None), ("ies", "i", None), ("ss", "ss", None), ("s", "", None)])
}

fn step1b(w: Vec<char>) -> Vec<char> {
    if ends_with(&w, "eed") {
        let stem = strip(&w, "eed");
        return if measure(&stem) > 0 { with(stem, "ee") } else { w };
    }
    let Some(stem) = ["ed", "ing"]
        .iter()
        .find(|s| ends_with(&w, s) && contains_vowel(&strip(&w, s)))
        .map(|s| strip(&w, s))
    else {
        return w;
    };
    if ["at", "bl", "iz"].iter().any(|s| ends_with(&stem, s)) {
        return with(stem, "e");
    }
    if ends_double_consonant(&stem) {
        let last = stem[stem.len() - 1];
        let mut s = stem;
        if !matches!(last, 'l' | 's' | 'z') {
            s.pop();
        }
        return s;
    }
    if measure(&stem) == 1 && ends_cvc(&stem) {
        return with(stem, "e");
    }
    stem
}

fn step1c(w: Vec<char>) -> Vec<char> {
    apply_rules(w, &[("y", "i", Some(contains_vowel))])
}

fn step2(w: Vec<char>) -> Vec<char> {
    const RULES: [(&str, &str); 21] = [
        ("ational", "ate"),
        ("tional", "tion"),
        ("enci", "ence"),
        ("anci", "ance"),
        ("izer", "ize"),
        ("bli", "ble"),
        ("alli", "al"),
        ("entli", "ent"),
        ("eli", "e"),
        ("ousli", "ous"),
        ("ization", "ize"),
        ("ation", "ate"),
        ("ator", "ate"),
        ("alism", "al"),
        ("iveness", "ive"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("aliti", "al"),
        ("iviti", "ive"),
        ("biliti", "ble"),
        ("logi", "log"),
    ];
    let rules: Vec<_> = RULES.iter().map(|&(s, r)| (s, r, Some(m_pos as Cond))).collect();
    apply_rules(w, &rules)
}

fn step3(w: Vec<char>) -> Vec<char> {
    const RULES: [(&str, &str); 7] = [
        ("icate", "ic"),
        ("ative", ""),
        ("alize", "al"),
        ("iciti", "ic"),
        ("ical", "ic"),
        ("ful", ""),
        ("ness", ""),
    ];
    let rules: Vec<_> = RULES.iter().map(|&(s, r)| (s, r, Some(m_pos as Cond))).collect();
    apply_rules(w, &rules)
}

fn step4(w: Vec<char>) -> Vec<char> {
    fn ion(s: &[char]) -> bool {
        measure(s) > 1 && matches!(s.last(), Some('s' | 't'))
    }
    const SUFFIXES: [&str; 19] = [
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou", "ism", "ate",
        "iti", "ous", "ive", "ize",
    ];
    let rules: Vec<_> = SUFFIXES
        .iter()
        .map(|&s| (s, "", Some(if s == "ion" { ion as Cond } else { m_gt1 as Cond })))
        .collect();
    apply_rules(w, &rules)
}

fn step5a(w: Vec<char>) -> Vec<char> {
    if ends_with(&w, "e") {
        let stem = strip(&w, "e");
        let m = measure(&stem);
        if m > 1 || m == 1 && !ends_cvc(&stem) {
            return stem;
        }
    }
    w
}

fn step5b(w: Vec<char>) -> Vec<char> {
    if ends_with(&w, "ll") && measure(&w[..w.len() - 1]) > 1 {
        return w[..w.len() - 1].to_vec();
    }
    w
}

/// Porter stem of `word`, lowercased first. Words of one or two characters
/// are returned unchanged.
pub fn stem_word(word: &str) -> String {
    let lower = word.to_lowercase();
    if word.chars().count() <= 2 {
        return lower;
    }
    let mut w: Vec<char> = lower.chars().collect();
    for step in [step1a, step1b, step1c, step2, step3, step4, step5a, step5b] {
        w = step(w);
    }
    w.into_iter().collect()
}
