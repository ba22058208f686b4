//! Rule-based lemma fallback for trigger words.

const IRREGULAR: &[(&str, &str)] = &[
    ("was", "be"),
    ("were", "be"),
    ("is", "be"),
    ("are", "be"),
    ("been", "be"),
    ("had", "have"),
    ("has", "have"),
    ("did", "do"),
    ("done", "do"),
    ("made", "make"),
    ("said", "say"),
    ("took", "take"),
    ("taken", "take"),
    ("went", "go"),
    ("gone", "go"),
    ("came", "come"),
    ("got", "get"),
    ("gave", "give"),
    ("given", "give"),
    ("found", "find"),
    ("left", "leave"),
    ("held", "hold"),
    ("hit", "hit"),
    ("shot", "shoot"),
    ("killed", "kill"),
    ("died", "die"),
    ("sold", "sell"),
    ("bought", "buy"),
    ("won", "win"),
    ("struck", "strike"),
    ("fell", "fall"),
    ("led", "lead"),
    ("sent", "send"),
    ("began", "begin"),
    ("begun", "begin"),
];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z') {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

/// Lowercases and strips common English inflection. Multi-word triggers
/// keep their last word's lemma.
pub fn lemmatize(word: &str) -> String {
    let lower = word.trim().to_lowercase();
    let w = lower.rsplit(char::is_whitespace).next().unwrap_or("");
    if let Some((_, lemma)) = IRREGULAR.iter().find(|(form, _)| *form == w) {
        return lemma.to_string();
    }
    if !w.is_ascii() || w.len() <= 3 {
        return w.to_string();
    }
    if let Some(stem) = w.strip_suffix("ies") {
        return format!("{stem}y");
    }
    if let Some(stem) = w.strip_suffix("ied") {
        return format!("{stem}y");
    }
    if w.ends_with("eed") {
        return w[..w.len() - 1].to_string();
    }
    let has_vowel = |s: &str| s.bytes().any(is_vowel);
    for suffix in ["ing", "ed"] {
        if let Some(stem) = w.strip_suffix(suffix).filter(|s| s.len() >= 3 && has_vowel(s)) {
            if suffix == "ed" && stem.ends_with('e') {
                return stem.to_string();
            }
            let undoubled = undouble(stem);
            if undoubled.len() < stem.len() {
                return undoubled;
            }
            if needs_silent_e(stem) {
                return format!("{stem}e");
            }
            return stem.to_string();
        }
    }
    if w.ends_with("sses") || w.ends_with("shes") || w.ends_with("ches") || w.ends_with("xes") {
        return w[..w.len() - 2].to_string();
    }
    if w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        return w[..w.len() - 1].to_string();
    }
    w.to_string()
}

// short consonant-vowel-consonant stems ("mak") and endings that drop an e
// before a suffix ("announc", "charg", "mov", "acquir")
fn needs_silent_e(stem: &str) -> bool {
    let b = stem.as_bytes();
    let n = b.len();
    let short_cvc = (3..=4).contains(&n)
        && !is_vowel(b[n - 1])
        && !matches!(b[n - 1], b'w' | b'x' | b'y')
        && is_vowel(b[n - 2])
        && !is_vowel(b[n - 3]);
    short_cvc
        || stem.ends_with('c')
        || stem.ends_with("dg")
        || stem.ends_with("rg")
        || stem.ends_with('v')
        || stem.ends_with("uir")
        || stem.ends_with("ur")
        || (stem.ends_with('z') && !stem.ends_with("zz"))
}
