//! Slot syntax shared by question templates and lexicon clause forms.
//!
//! A surface string is literal text interleaved with `{a:b:c}` slots. Braces
//! do not nest and cannot be escaped.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Slot(Vec<String>),
}

pub fn parse_surface(surface: &str) -> Result<Vec<Segment>, String> {
    let mut segments = Vec::new();
    let mut rest = surface;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(format!("unbalanced `}}` in `{surface}`"));
        }
        if open > 0 {
            segments.push(Segment::Literal(rest[..open].to_owned()));
        }
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| format!("unterminated slot in `{surface}`"))?;
        let body = &after[..close];
        if body.is_empty() || body.contains('{') {
            return Err(format!("malformed slot `{{{body}}}` in `{surface}`"));
        }
        segments.push(Segment::Slot(body.split(':').map(str::to_owned).collect()));
        rest = &after[close + 1..];
    }
    if !rest.is_empty() {
        segments.push(Segment::Literal(rest.to_owned()));
    }
    Ok(segments)
}

/// `a` or `an` prefixed to `noun` by its first letter.
pub fn indefinite(noun: &str) -> String {
    let vowel = noun
        .chars()
        .next()
        .is_some_and(|c| matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u'));
    if vowel {
        format!("an {noun}")
    } else {
        format!("a {noun}")
    }
}

/// Post-rules applied to a filled question: whitespace collapse, `a` -> `an`
/// before a vowel, capitalised first letter, and no space before the final
/// punctuation.
pub fn tidy(text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out: Vec<String> = Vec::with_capacity(words.len());
    for (i, word) in words.iter().enumerate() {
        let next_vowel = words
            .get(i + 1)
            .and_then(|w| w.chars().next())
            .is_some_and(|c| matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u'));
        match *word {
            "a" if next_vowel => out.push("an".to_owned()),
            "A" if next_vowel => out.push("An".to_owned()),
            "?" | "." | "," if !out.is_empty() => {
                let last = out.last_mut().unwrap();
                last.push_str(word);
            }
            w => out.push(w.to_owned()),
        }
    }
    let mut joined = out.join(" ");
    if let Some(first) = joined.chars().next() {
        let upper: String = first.to_uppercase().collect();
        joined.replace_range(..first.len_utf8(), &upper);
    }
    joined
}
