use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

/// Lowercase, ASCII-alphanumeric runs joined by `-`.
///
/// CamelCase boundaries also split, so `PreparednessGoal` becomes
/// `preparedness-goal`.
pub fn slugify(s: &str) -> String {
    words(s).join("-")
}

/// Lowercased words with punctuation removed and camelCase split.
pub fn words(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev: Option<char> = None;
    for c in s.chars() {
        if c.is_alphanumeric() {
            let boundary = match prev {
                Some(p) => p.is_lowercase() && c.is_uppercase() || p.is_alphabetic() != c.is_alphabetic(),
                None => false,
            };
            if boundary && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            cur.extend(c.to_lowercase());
            prev = Some(c);
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev = None;
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn token_set(s: &str) -> BTreeSet<String> {
    words(s).into_iter().collect()
}

/// Token-set Jaccard similarity rounded to four decimals. Two empty sets score 0.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    round4(inter as f64 / union as f64)
}

pub fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Case-insensitive form with whitespace collapsed, used for forgiving lookups.
pub fn normalize(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// First 12 hex digits of the SHA-256 of `parts` joined with a unit separator.
pub fn short_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0x1f]);
        }
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slugify("PreparednessGoal"), "preparedness-goal");
        assert_eq!(slugify("Before-disaster"), "before-disaster");
        assert_eq!(slugify("Wagga Wagga"), "wagga-wagga");
        assert_eq!(slugify("MutualAidAgreement"), "mutual-aid-agreement");
        assert_eq!(slugify("Concept07"), "concept-07");
    }

    #[test]
    fn jaccard_bounds() {
        let a = token_set("Providing Road Information Service (RIS)");
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&a, &token_set("unrelated words")), 0.0);
        assert_eq!(jaccard(&token_set(""), &token_set("")), 0.0);
        assert_eq!(jaccard(&token_set("a b c"), &token_set("a b d")), 0.5);
        assert_eq!(jaccard(&token_set("a b c"), &token_set("a")), 0.3333);
    }

    #[test]
    fn normalize_collapses() {
        assert_eq!(normalize("  Road   Information "), "road information");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(short_hash(&["a", "b"]), short_hash(&["a", "b"]));
        assert_ne!(short_hash(&["a", "b"]), short_hash(&["ab"]));
        assert_eq!(short_hash(&["x"]).len(), 12);
    }
}
