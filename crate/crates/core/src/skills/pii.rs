//! Pattern-based PII screening: email addresses, 16-digit card numbers, and
//! US social security numbers.
//!
//! Offsets are character offsets. Spans never overlap; on overlap an email
//! beats a card, and a card beats an SSN.

use super::{FlagCategory, FlagSpan};

const LEADING_PUNCT: &[char] = &['(', '<', '[', '{', '"', '\''];
const TRAILING_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', ')', ']', '}', '>', '"', '\''];

fn span(chars: &[char], start: usize, end: usize, category: FlagCategory) -> FlagSpan {
    FlagSpan {
        start,
        end,
        category,
        matched: chars[start..end].iter().collect(),
    }
}

fn is_email(token: &[char]) -> bool {
    let Some(at) = token.iter().position(|&c| c == '@') else {
        return false;
    };
    let (local, domain) = (&token[..at], &token[at + 1..]);
    if local.is_empty() || domain.is_empty() {
        return false;
    }
    if !domain.iter().all(|c| c.is_alphanumeric() || *c == '-' || *c == '.') {
        return false;
    }
    let domain: String = domain.iter().collect();
    domain.contains('.') && domain.split('.').all(|label| !label.is_empty())
}

fn emails(chars: &[char]) -> Vec<FlagSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let mut end = i;
        while end < chars.len() && !chars[end].is_whitespace() {
            end += 1;
        }
        let (mut s, mut e) = (i, end);
        while s < e && LEADING_PUNCT.contains(&chars[s]) {
            s += 1;
        }
        while e > s && TRAILING_PUNCT.contains(&chars[e - 1]) {
            e -= 1;
        }
        if s < e && is_email(&chars[s..e]) {
            out.push(span(chars, s, e, FlagCategory::PiiEmail));
        }
        i = end;
    }
    out
}

fn digits_at(chars: &[char], i: usize, n: usize) -> bool {
    i + n <= chars.len() && chars[i..i + n].iter().all(char::is_ascii_digit)
}

fn preceded_by_digit(chars: &[char], i: usize) -> bool {
    i > 0 && chars[i - 1].is_ascii_digit()
}

/// End offset of a card number starting at `i`: four groups of four digits,
/// each gap optionally a single `-` or space, not followed by another digit.
fn card_at(chars: &[char], i: usize) -> Option<usize> {
    let mut pos = i;
    for group in 0..4 {
        if group > 0 && pos < chars.len() && (chars[pos] == '-' || chars[pos] == ' ') {
            pos += 1;
        }
        if !digits_at(chars, pos, 4) {
            return None;
        }
        pos += 4;
    }
    (pos == chars.len() || !chars[pos].is_ascii_digit()).then_some(pos)
}

fn ssn_at(chars: &[char], i: usize) -> Option<usize> {
    let ok = digits_at(chars, i, 3)
        && chars.get(i + 3) == Some(&'-')
        && digits_at(chars, i + 4, 2)
        && chars.get(i + 6) == Some(&'-')
        && digits_at(chars, i + 7, 4)
        && !chars.get(i + 11).is_some_and(char::is_ascii_digit);
    ok.then_some(i + 11)
}

fn scan(chars: &[char], category: FlagCategory, matcher: fn(&[char], usize) -> Option<usize>) -> Vec<FlagSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() && !preceded_by_digit(chars, i) {
            if let Some(end) = matcher(chars, i) {
                out.push(span(chars, i, end, category));
                i = end;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn overlaps(a: &FlagSpan, b: &FlagSpan) -> bool {
    a.start < b.end && b.start < a.end
}

pub fn detect_pii(text: &str) -> Vec<FlagSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut kept = emails(&chars);
    for candidate in
        scan(&chars, FlagCategory::PiiCard, card_at)
            .into_iter()
            .chain(scan(&chars, FlagCategory::PiiSsn, ssn_at))
    {
        if !kept.iter().any(|k| overlaps(k, &candidate)) {
            kept.push(candidate);
        }
    }
    kept.sort_by_key(|s| s.start);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn categories(text: &str) -> Vec<FlagCategory> {
        detect_pii(text).into_iter().map(|s| s.category).collect()
    }

    #[test]
    fn email() {
        let spans = detect_pii("reach me at a@b.co");
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].category, FlagCategory::PiiEmail);
        assert_eq!(spans[0].matched, "a@b.co");
    }

    #[test]
    fn email_trailing_punctuation() {
        assert_eq!(
            detect_pii("mail (x.y@corp.example.com).")[0].matched,
            "x.y@corp.example.com"
        );
        assert!(detect_pii("user@localhost").is_empty());
        assert!(detect_pii("a@.co").is_empty());
        assert!(detect_pii("@b.co").is_empty());
    }

    #[test]
    fn card_forms() {
        assert_eq!(categories("4111 1111 1111 1111"), vec![FlagCategory::PiiCard]);
        assert_eq!(categories("4111-1111-1111-1111"), vec![FlagCategory::PiiCard]);
        assert_eq!(categories("card 4111111111111111 ok"), vec![FlagCategory::PiiCard]);
        assert!(detect_pii("41111111111111111").is_empty());
        assert!(detect_pii("4111 1111 1111 111").is_empty());
    }

    #[test]
    fn ssn() {
        let spans = detect_pii("ssn 123-45-6789 on file");
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].category, FlagCategory::PiiSsn);
        assert_eq!((spans[0].start, spans[0].end), (4, 15));
        assert!(detect_pii("1123-45-6789").is_empty());
        assert!(detect_pii("123-45-67890").is_empty());
    }

    #[test]
    fn nothing_in_version_string() {
        assert!(detect_pii("v1.2 released").is_empty());
    }

    #[test]
    fn email_beats_card() {
        assert_eq!(categories("4111111111111111@bank.com"), vec![FlagCategory::PiiEmail]);
    }

    #[test]
    fn offsets_are_chars() {
        let text = "é 123-45-6789";
        let s = &detect_pii(text)[0];
        let sliced: String = text.chars().skip(s.start).take(s.end - s.start).collect();
        assert_eq!(sliced, s.matched);
    }
}
