use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ingest::RawTicket;
use crate::taxonomy::CategoryPath;

/// A ticket ready for training.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanSample {
    pub id: String,
    pub title: String,
    pub description: String,
    /// `"title. description"`
    pub text: String,
    pub path: CategoryPath,
}

impl CleanSample {
    pub fn new(id: impl Into<String>, title: impl Into<String>, description: impl Into<String>, path: CategoryPath) -> Self {
        let title = title.into();
        let description = description.into();
        Self {
            id: id.into(),
            text: join_text(&title, &description),
            title,
            description,
            path,
        }
    }

    pub fn to_raw(&self) -> RawTicket {
        RawTicket {
            id: self.id.clone(),
            title: self.title.clone(),
            description: self.description.clone(),
            category: self.path.render(),
        }
    }

    /// Same sample under a different label.
    pub fn relabeled(&self, path: CategoryPath) -> Self {
        Self {
            path,
            ..self.clone()
        }
    }
}

pub fn join_text(title: &str, description: &str) -> String {
    format!("{title}. {description}")
}

/// Rows dropped by each cleaning rule.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input: usize,
    pub exact_duplicates: usize,
    pub duplicate_ids: usize,
    pub missing_values: usize,
    pub invalid_category: usize,
    pub root_level: usize,
    pub output: usize,
}

pub fn clean(tickets: &[RawTicket]) -> Vec<CleanSample> {
    clean_with_report(tickets).0
}

pub fn clean_with_report(tickets: &[RawTicket]) -> (Vec<CleanSample>, CleanReport) {
    let mut report = CleanReport {
        input: tickets.len(),
        ..CleanReport::default()
    };
    let mut seen_rows: HashSet<&RawTicket> = HashSet::new();
    let mut seen_ids: HashSet<&str> = HashSet::new();
    let mut out = Vec::new();
    for t in tickets {
        if !seen_rows.insert(t) {
            report.exact_duplicates += 1;
            continue;
        }
        if !seen_ids.insert(t.id.as_str()) {
            report.duplicate_ids += 1;
            continue;
        }
        let title = html_to_text(&t.title);
        let description = html_to_text(&t.description);
        if t.id.trim().is_empty() || title.is_empty() || description.is_empty() || t.category.trim().is_empty() {
            report.missing_values += 1;
            continue;
        }
        let Ok(path) = CategoryPath::parse(&t.category) else {
            report.invalid_category += 1;
            continue;
        };
        if path.depth() < 2 {
            report.root_level += 1;
            continue;
        }
        out.push(CleanSample::new(t.id.clone(), title, description, path));
    }
    report.output = out.len();
    (out, report)
}

/// Plain text from an HTML fragment. Script and style blocks are dropped
/// with their content, other tags are dropped and their text kept, entities
/// are decoded, and whitespace is collapsed. Repeats until stable so that
/// escaped markup cannot survive.
pub fn html_to_text(input: &str) -> String {
    let mut current = collapse(input);
    for _ in 0..8 {
        let next = collapse(&html_escape::decode_html_entities(&strip_tags(&current)));
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn starts_with_ci(hay: &str, needle: &str) -> bool {
    hay.len() >= needle.len() && hay.as_bytes()[..needle.len()].eq_ignore_ascii_case(needle.as_bytes())
}

fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    let n = needle.len();
    (0..=hay.len().saturating_sub(n)).find(|&i| hay.is_char_boundary(i) && starts_with_ci(&hay[i..], needle))
}

fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        let tail = &rest[lt..];
        if tail.starts_with("<!--") {
            rest = tail.find("-->").map_or("", |e| &tail[e + 3..]);
            out.push(' ');
            continue;
        }
        let block = ["script", "style"]
            .into_iter()
            .find(|name| starts_with_ci(&tail[1..], name) && !tail[1 + name.len()..].starts_with(|c: char| c.is_alphanumeric()));
        if let Some(name) = block {
            let close = format!("</{name}");
            rest = match find_ci(tail, &close) {
                Some(e) => tail[e..].find('>').map_or("", |g| &tail[e + g + 1..]),
                None => "",
            };
            out.push(' ');
            continue;
        }
        let is_tag = tail[1..].starts_with(|c: char| c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?');
        match tail.find('>') {
            Some(gt) if is_tag => {
                out.push(' ');
                rest = &tail[gt + 1..];
            }
            _ => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(id: &str, title: &str, desc: &str, cat: &str) -> RawTicket {
        RawTicket {
            id: id.into(),
            title: title.into(),
            description: desc.into(),
            category: cat.into(),
        }
    }

    #[test]
    fn html_examples() {
        assert_eq!(html_to_text("<b>VPN</b> down <img src=x>"), "VPN down");
        assert_eq!(html_to_text("a < b &amp; c"), "a < b & c");
        assert_eq!(html_to_text("x<script>alert(1)</script>y<STYLE>p{}</STYLE>z"), "x y z");
        assert_eq!(html_to_text("&lt;b&gt;bold&lt;/b&gt;"), "bold");
        assert_eq!(html_to_text("<table><tr><td>cell</td></tr></table><!-- note -->end"), "cell end");
        assert_eq!(html_to_text("<a href=\"u\">link</a>&nbsp;text"), "link text");
    }

    #[test]
    fn dedup_and_filters() {
        let rows = vec![
            raw("1", "VPN", "down", "Net/Vpn"),
            raw("1", "VPN", "down", "Net/Vpn"),
            raw("1", "other", "row", "Net/Vpn"),
            raw("2", "", "x", "Net/Vpn"),
            raw("3", "<img src=x>", "x", "Net/Vpn"),
            raw("4", "t", "d", "Hardware"),
            raw("5", "t", "d", "A//B"),
            raw("6", "<b>Mail</b>", "full", "Net/Mail"),
        ];
        let (out, rep) = clean_with_report(&rows);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].text, "VPN. down");
        assert_eq!(out[1].title, "Mail");
        assert_eq!(
            rep,
            CleanReport {
                input: 8,
                exact_duplicates: 1,
                duplicate_ids: 1,
                missing_values: 2,
                invalid_category: 1,
                root_level: 1,
                output: 2,
            }
        );
    }

    fn arb_raw() -> impl Strategy<Value = RawTicket> {
        let text = prop_oneof![
            Just("plain words".to_string()),
            Just("<b>bold</b> &amp;lt;i&amp;gt; x".to_string()),
            Just("  ".to_string()),
            Just("a < b".to_string()),
            "[a-z<>&;/ ]{0,12}",
        ];
        let cat = prop_oneof![Just("A"), Just("A/B"), Just("A/B/C"), Just("A//B"), Just(" X / Y ")];
        (0u8..6, text.clone(), text, cat).prop_map(|(id, t, d, c)| raw(&id.to_string(), &t, &d, c))
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(rows in proptest::collection::vec(arb_raw(), 0..20)) {
            let once = clean(&rows);
            let again = clean(&once.iter().map(CleanSample::to_raw).collect::<Vec<_>>());
            prop_assert_eq!(once, again);
        }
    }
}
