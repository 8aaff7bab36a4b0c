//! Heading-delimited section parsing for model-written Markdown reports.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

/// `Some((level, text))` when `line` is an ATX heading.
pub fn heading(line: &str) -> Option<(usize, &str)> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let level = rest.len() - rest.trim_start_matches('#').len();
    if level == 0 || level > 6 {
        return None;
    }
    let after = &rest[level..];
    if !after.is_empty() && !after.starts_with(' ') && !after.starts_with('\t') {
        return None;
    }
    let text = after.trim().trim_end_matches('#').trim_end();
    Some((level, text))
}

fn lines_outside_fences(text: &str) -> impl Iterator<Item = (bool, &str)> {
    let mut fenced = false;
    text.lines().map(move |line| {
        let t = line.trim_start();
        if t.starts_with("```") || t.starts_with("~~~") {
            fenced = !fenced;
            return (true, line);
        }
        (fenced, line)
    })
}

/// First level-1 heading.
pub fn title(text: &str) -> Option<String> {
    lines_outside_fences(text)
        .filter(|(fenced, _)| !fenced)
        .find_map(|(_, l)| heading(l).filter(|(lv, _)| *lv == 1).map(|(_, t)| t.to_string()))
}

/// Sections introduced by headings of exactly `level`. A section's body runs
/// to the next heading of the same or higher rank; deeper headings stay in the
/// body. Text before the first such heading is ignored.
pub fn sections(text: &str, level: usize) -> Vec<Section> {
    let mut out: Vec<Section> = Vec::new();
    let mut open = false;
    for (fenced, line) in lines_outside_fences(text) {
        if !fenced {
            if let Some((lv, h)) = heading(line) {
                if lv == level {
                    out.push(Section { heading: h.to_string(), body: String::new() });
                    open = true;
                    continue;
                }
                if lv < level {
                    open = false;
                    continue;
                }
            }
        }
        if open {
            let body = &mut out.last_mut().expect("open section").body;
            body.push_str(line);
            body.push('\n');
        }
    }
    for s in &mut out {
        s.body = s.body.trim().to_string();
    }
    out
}

pub fn headings(text: &str, level: usize) -> Vec<String> {
    sections(text, level).into_iter().map(|s| s.heading).collect()
}

/// List items of a section body. A body with prose but no list markers is a
/// single item; an empty body has none.
pub fn list_items(body: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    for line in body.lines() {
        let t = line.trim();
        let stripped = t.strip_prefix("- ").or_else(|| t.strip_prefix("* ")).or_else(|| t.strip_prefix("+ ")).or_else(|| {
            let digits = t.len() - t.trim_start_matches(|c: char| c.is_ascii_digit()).len();
            if digits == 0 {
                return None;
            }
            t[digits..].strip_prefix(". ").or_else(|| t[digits..].strip_prefix(") "))
        });
        match stripped {
            Some(item) if !item.trim().is_empty() => items.push(item.trim().to_string()),
            Some(_) => {}
            None if !t.is_empty() && !items.is_empty() && line.starts_with([' ', '\t']) => {
                let last = items.last_mut().expect("non-empty");
                last.push(' ');
                last.push_str(t);
            }
            None => {}
        }
    }
    if items.is_empty() && !body.trim().is_empty() {
        items.push(body.trim().to_string());
    }
    items
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}
