//! Text normalization shared by option matching, answer parsing, and the
//! scripted backend's prompt inspection.

/// Normalizes free text for option comparison: lowercase, trim, collapse
/// internal whitespace, and strip one layer of surrounding quotes or
/// parentheses. Models echo options inconsistently; this brings the common
/// variants onto one canonical form.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut last_space = false;
    for ch in s.trim().chars() {
        if ch.is_whitespace() {
            if !last_space && !out.is_empty() {
                out.push(' ');
                last_space = true;
            }
        } else {
            for low in ch.to_lowercase() {
                out.push(low);
            }
            last_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    strip_wrapping(&out)
}

const WRAP_PAIRS: [(char, char); 6] = [
    ('"', '"'),
    ('\u{201C}', '\u{201D}'),
    ('\u{2018}', '\u{2019}'),
    ('\'', '\''),
    ('(', ')'),
    ('[', ']'),
];

fn strip_wrapping(s: &str) -> String {
    let mut cur = s.to_string();
    loop {
        let trimmed = cur.trim();
        let mut chars = trimmed.chars();
        let (first, last) = match (chars.next(), chars.next_back()) {
            (Some(f), Some(l)) => (f, l),
            _ => return trimmed.to_string(),
        };
        let wrapped = WRAP_PAIRS.iter().any(|&(o, c)| first == o && last == c);
        if wrapped && trimmed.chars().count() >= 2 {
            let inner: String = trimmed
                .chars()
                .skip(1)
                .take(trimmed.chars().count() - 2)
                .collect();
            cur = inner.trim().to_string();
        } else {
            return trimmed.to_string();
        }
    }
}

/// True when `needle` occurs in `haystack` bounded by non-alphanumeric
/// characters (or the string edges) on both sides. Both inputs are expected to
/// be pre-normalized. Guards against "none" matching inside "nonetheless".
pub fn contains_bounded(haystack: &str, needle: &str) -> bool {
    count_bounded(haystack, needle) > 0
}

/// Counts bounded occurrences of `needle` in `haystack` (see
/// [`contains_bounded`]).
pub fn count_bounded(haystack: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    let hay: Vec<char> = haystack.chars().collect();
    let ned: Vec<char> = needle.chars().collect();
    let mut count = 0;
    let mut i = 0;
    while i + ned.len() <= hay.len() {
        if hay[i..i + ned.len()] == ned[..] {
            let left_ok = i == 0 || !hay[i - 1].is_alphanumeric();
            let right = i + ned.len();
            let right_ok = right == hay.len() || !hay[right].is_alphanumeric();
            if left_ok && right_ok {
                count += 1;
                i += ned.len();
                continue;
            }
        }
        i += 1;
    }
    count
}

/// Levenshtein edit distance over characters; used as the last-resort
/// distractor matcher.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
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

/// Stable 64-bit FNV-1a hash. The scripted backend derives its
/// context-independent answer choice from this, so it must not vary across
/// platforms or std releases the way `DefaultHasher` may.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
