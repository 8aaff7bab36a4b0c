use alloc::string::String;
use alloc::vec::Vec;

const BLOCK_TAGS: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "br",
    "dd",
    "div",
    "dl",
    "dt",
    "figcaption",
    "figure",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "li",
    "main",
    "nav",
    "ol",
    "p",
    "pre",
    "section",
    "table",
    "tbody",
    "td",
    "tfoot",
    "th",
    "thead",
    "tr",
    "ul",
    "title",
];

// Internal marker for block boundaries; stripped from input text.
const BREAK: char = '\u{1}';

/// Best-effort HTML to plain text.
///
/// Tags are removed and `script`/`style` contents dropped. Every block-level tag
/// (opening or closing) marks a line boundary; inside a line, whitespace runs
/// become one space. Empty lines are dropped.
pub fn html_to_text(html: &str) -> String {
    let mut raw = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(lt) = rest.find('<') {
        raw.push_str(&decode_entities(&rest[..lt]));
        rest = &rest[lt..];
        if let Some(after) = rest.strip_prefix("<!--") {
            rest = after.find("-->").map_or("", |e| &after[e + 3..]);
            continue;
        }
        let Some(gt) = rest.find('>') else {
            // Unclosed tag: treat the remainder as markup.
            rest = "";
            break;
        };
        let tag = &rest[1..gt];
        rest = &rest[gt + 1..];
        let closing = tag.starts_with('/');
        let name: String =
            tag.trim_start_matches('/').chars().take_while(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect();
        if name.is_empty() {
            if !tag.starts_with('!') && !tag.starts_with('?') && !closing {
                // A bare `<` in text, e.g. "a < b".
                raw.push('<');
                raw.push_str(&decode_entities(tag));
                raw.push('>');
            }
            continue;
        }
        if !closing && (name == "script" || name == "style") && !tag.ends_with('/') {
            rest = skip_raw_text(rest, &name);
            continue;
        }
        if BLOCK_TAGS.contains(&name.as_str()) {
            raw.push(BREAK);
        }
    }
    raw.push_str(&decode_entities(rest));

    let lines: Vec<String> =
        raw.split(BREAK).map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ")).filter(|l| !l.is_empty()).collect();
    lines.join("\n")
}

fn skip_raw_text<'a>(rest: &'a str, name: &str) -> &'a str {
    let lower = rest.to_ascii_lowercase();
    let close = alloc::format!("</{name}");
    match lower.find(&close) {
        Some(i) => rest[i..].find('>').map_or("", |g| &rest[i + g + 1..]),
        None => "",
    }
}

fn decode_entities(s: &str) -> String {
    let s = &s.replace(BREAK, " ");
    if !s.contains('&') {
        return s.clone();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest: &str = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let end = rest[1..].find(|c: char| c == ';' || c == '&' || c.is_whitespace()).map(|i| i + 1);
        let decoded = end.filter(|&e| rest.as_bytes()[e] == b';').and_then(|e| entity(&rest[1..e]).map(|c| (c, e)));
        match decoded {
            Some((c, e)) => {
                out.push(c);
                rest = &rest[e + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        "mdash" => '\u{2014}',
        "ndash" => '\u{2013}',
        "hellip" => '\u{2026}',
        "copy" => '\u{a9}',
        _ => {
            let num = name.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basics() {
        assert_eq!(html_to_text("<p>hi</p>"), "hi");
        assert_eq!(html_to_text("<script>x</script><p>a</p>"), "a");
        assert_eq!(html_to_text("<div><p>a<p>b</div>"), "a\nb");
        assert_eq!(html_to_text("<STYLE type=x>p{}</style>t"), "t");
        assert_eq!(html_to_text("a  <b>bold</b>\n\t text"), "a bold text");
        assert_eq!(html_to_text("x &amp; y &lt;3 &#65;&#x42; &bogus; &"), "x & y <3 AB &bogus; &");
        assert_eq!(html_to_text("<!-- hidden <p>no</p> -->shown"), "shown");
        assert_eq!(html_to_text("one<br>two<br/>three"), "one\ntwo\nthree");
        assert_eq!(html_to_text("<p>unclosed <a href"), "unclosed");
        assert_eq!(html_to_text("<script>never closed"), "");
    }

    proptest! {
        #[test]
        fn output_has_no_tags_or_blank_lines(s in "(<[a-z/ ]{0,6}>|[a-z &;<>\n\t]){0,60}") {
            let out = html_to_text(&s);
            prop_assert!(!out.lines().any(|l| l.trim().is_empty()));
            prop_assert!(!out.contains("  "));
        }

        #[test]
        fn plain_words_survive(words in proptest::collection::vec("[a-z]{1,8}", 1..10)) {
            let html = alloc::format!("<p>{}</p>", words.join(" "));
            prop_assert_eq!(html_to_text(&html), words.join(" "));
        }
    }
}
