//! A pragmatic subset of wikitext-to-plain-text conversion.

use quick_xml::escape::resolve_html5_entity;

/// Link namespaces whose links are dropped entirely rather than rewritten.
const DROPPED_LINK_PREFIXES: &[&str] = &[
    "file:", "image:", "category:", "media:",
    // Tamil and Hindi wikis
    "படிமம்:", "பகுப்பு:", "चित्र:", "श्रेणी:", "संचिका:",
];

/// Elements removed together with their content.
const DROPPED_ELEMENTS: &[&str] = &["ref", "math", "gallery", "timeline", "score"];

const MAX_PASSES: usize = 64;

/// Converts wikitext to plain text: templates, tables, refs, comments, HTML
/// tags and file/category links are removed, internal links are replaced by
/// their label, bold/italic quotes and heading markers are dropped, and
/// whitespace is collapsed. One paragraph or heading per output line.
///
/// Unbalanced constructs are dropped to the end of their line. The result is
/// a fixpoint, so `strip_markup(strip_markup(x)) == strip_markup(x)`.
pub fn strip_markup(text: &str) -> String {
    let mut cur = strip_once(text);
    for _ in 0..MAX_PASSES {
        let next = strip_once(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn strip_once(s: &str) -> String {
    let s = remove_comments(s);
    let s = remove_elements(&s);
    let s = remove_braced(&s);
    let s = rewrite_links(&s);
    let s = rewrite_external_links(&s);
    let s = remove_tags(&s);
    let s = decode_entities(&s);
    let s = remove_quote_runs(&s);
    tidy_lines(&s)
}

fn line_end(s: &str, from: usize) -> usize {
    s[from..].find('\n').map_or(s.len(), |i| from + i)
}

fn remove_comments(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find("<!--") {
        out.push_str(&rest[..i]);
        rest = match rest[i + 4..].find("-->") {
            Some(j) => &rest[i + 4 + j + 3..],
            None => &rest[line_end(rest, i)..],
        };
    }
    out.push_str(rest);
    out
}

fn starts_with_ci(s: &str, prefix: &str) -> bool {
    s.len() >= prefix.len() && s.as_bytes()[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes())
}

fn find_ci(s: &str, needle: &str) -> Option<usize> {
    let (h, n) = (s.as_bytes(), needle.as_bytes());
    (0..=h.len().checked_sub(n.len())?).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Name of a dropped element opening at the start of `s`, e.g. `<ref name=x>`.
fn dropped_open(s: &str) -> Option<&'static str> {
    let rest = s.strip_prefix('<')?;
    DROPPED_ELEMENTS.iter().copied().find(|name| {
        starts_with_ci(rest, name)
            && matches!(rest.as_bytes().get(name.len()), Some(b'>' | b'/' | b' ' | b'\t' | b'\n'))
    })
}

fn remove_elements(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < s.len() {
        let Some(off) = s[i..].find('<') else { break };
        out.push_str(&s[i..i + off]);
        i += off;
        let Some(name) = dropped_open(&s[i..]) else {
            out.push('<');
            i += 1;
            continue;
        };
        let Some(gt) = s[i..].find('>') else {
            i = line_end(s, i);
            continue;
        };
        let open_end = i + gt + 1;
        if s[..open_end - 1].ends_with('/') {
            i = open_end;
            continue;
        }
        let close = format!("</{name}");
        i = match find_ci(&s[open_end..], &close) {
            Some(j) => {
                let after = open_end + j + close.len();
                s[after..].find('>').map_or(s.len(), |k| after + k + 1)
            }
            None => line_end(s, i),
        };
    }
    if i < s.len() {
        out.push_str(&s[i..]);
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Brace {
    Template,
    Table,
}

/// Removes `{{...}}` templates and `{|...|}` tables, with nesting.
fn remove_braced(s: &str) -> String {
    let b = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    let mut copied = 0;
    let mut stack: Vec<Brace> = Vec::new();
    let mut opened_at = 0;
    while i < b.len() {
        let two = &b[i..(i + 2).min(b.len())];
        let step = match (two, stack.last()) {
            (b"{{", _) => Some(Some(Brace::Template)),
            (b"{|", _) => Some(Some(Brace::Table)),
            (b"}}", Some(Brace::Template)) | (b"|}", Some(Brace::Table)) => Some(None),
            _ => None,
        };
        match step {
            Some(Some(kind)) => {
                if stack.is_empty() {
                    out.push_str(&s[copied..i]);
                    opened_at = i;
                }
                stack.push(kind);
                i += 2;
            }
            Some(None) => {
                stack.pop();
                i += 2;
                if stack.is_empty() {
                    copied = i;
                }
            }
            None => i += 1,
        }
        if i >= b.len() && !stack.is_empty() {
            // unbalanced: drop the outermost opener's line and rescan after it
            stack.clear();
            i = line_end(s, opened_at);
            copied = i;
        }
    }
    if stack.is_empty() && copied < s.len() {
        out.push_str(&s[copied..]);
    }
    out
}

/// Index just past the `]]` matching the `[[` at `start`, honoring nesting.
fn matching_link_end(s: &str, start: usize) -> Option<usize> {
    let b = s.as_bytes();
    let mut depth = 0usize;
    let mut i = start;
    while i + 1 < b.len() {
        match &b[i..i + 2] {
            b"[[" => {
                depth += 1;
                i += 2;
            }
            b"]]" => {
                depth -= 1;
                i += 2;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => i += 1,
        }
    }
    None
}

fn rewrite_links(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find("[[") {
        out.push_str(&rest[..i]);
        let Some(end) = matching_link_end(rest, i) else {
            rest = &rest[line_end(rest, i)..];
            continue;
        };
        let inner = &rest[i + 2..end - 2];
        let (target, label) = match inner.find('|') {
            Some(p) => (&inner[..p], Some(&inner[p + 1..])),
            None => (inner, None),
        };
        let target = target.trim();
        let lowered = target.to_lowercase();
        let dropped = DROPPED_LINK_PREFIXES.iter().any(|p| lowered.starts_with(p));
        if !dropped {
            let shown = match label {
                Some(l) if !l.trim().is_empty() => l,
                _ => target.trim_start_matches(':'),
            };
            out.push_str(&rewrite_links(shown));
        }
        rest = &rest[end..];
    }
    out.push_str(rest);
    out
}

fn rewrite_external_links(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('[') {
        out.push_str(&rest[..i]);
        let after = &rest[i + 1..];
        let is_url = ["http://", "https://", "//"]
            .iter()
            .any(|p| starts_with_ci(after, p));
        if !is_url {
            out.push('[');
            rest = after;
            continue;
        }
        let line = &after[..line_end(after, 0)];
        match line.find(']') {
            Some(j) => {
                if let Some(sp) = line[..j].find(' ') {
                    out.push_str(&line[sp + 1..j]);
                }
                rest = &after[j + 1..];
            }
            None => rest = &after[line.len()..],
        }
    }
    out.push_str(rest);
    out
}

fn remove_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('<') {
        out.push_str(&rest[..i]);
        let after = &rest[i + 1..];
        let name = after.strip_prefix('/').unwrap_or(after);
        let is_tag = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        let line = &after[..line_end(after, 0)];
        match (is_tag, line.find('>')) {
            (true, Some(j)) => rest = &after[j + 1..],
            _ => {
                out.push('<');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn resolve_entity(name: &str) -> Option<String> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code).map(String::from);
    }
    resolve_html5_entity(name).map(String::from)
}

fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let after = &rest[i + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '#'))
            .unwrap_or(after.len());
        match (after[name_len..].starts_with(';'), resolve_entity(&after[..name_len])) {
            (true, Some(v)) if name_len > 0 => {
                out.push_str(&v);
                rest = &after[name_len + 1..];
            }
            _ => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn remove_quote_runs(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut run = 0;
    for c in s.chars() {
        if c == '\'' {
            run += 1;
            continue;
        }
        if run == 1 {
            out.push('\'');
        }
        run = 0;
        out.push(c);
    }
    if run == 1 {
        out.push('\'');
    }
    out
}

fn tidy_lines(s: &str) -> String {
    let mut lines = Vec::new();
    for line in s.lines() {
        let mut l = line.trim();
        if l.len() >= 2 && l.starts_with('=') && l.ends_with('=') {
            l = l.trim_matches('=').trim();
        }
        l = l.trim_start_matches(['*', '#', ':', ';']);
        if l.chars().all(|c| c == '-' || c.is_whitespace()) {
            continue;
        }
        lines.push(l.split_whitespace().collect::<Vec<_>>().join(" "));
    }
    lines.join("\n")
}
