//! Visible-text and hyperlink extraction.
//!
//! Text extraction walks the DOM from `<body>`. An element with no
//! block-level descendants is a *leaf block*: its rendered text (descendant
//! text nodes concatenated, whitespace collapsed) is one unit. Consecutive
//! sibling units are joined into blocks of at most [`MAX_SIBLINGS_PER_BLOCK`];
//! an element that does contain block-level descendants closes the current
//! group and is walked recursively. The grouping rule lives entirely in
//! [`SiblingGrouper`].
//!
//! Link extraction pairs each `<a href>` with the text found at the anchor's
//! own level and one level beneath it; deeper text is ignored.

use ego_tree::NodeRef;
use scraper::{node::Element, Html, Node, Selector};
use url::Url;

/// Upper bound on sibling elements merged into one emitted text block.
pub const MAX_SIBLINGS_PER_BLOCK: usize = 3;

const SKIPPED: &[&str] = &[
    "script", "style", "noscript", "template", "head", "title", "meta", "link", "iframe", "object", "embed",
    "canvas", "select", "option", "datalist", "textarea",
];

const BLOCK_LEVEL: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "center", "dd", "details", "dialog", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hgroup",
    "hr", "li", "main", "menu", "nav", "ol", "p", "pre", "section", "summary", "table", "tbody", "td", "tfoot",
    "th", "thead", "tr", "ul", "caption",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperlink {
    pub href: String,
    pub text: String,
}

impl std::fmt::Display for Hyperlink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.href, self.text)
    }
}

/// Visible text blocks of `html`, in document order. Empty when the page
/// has no visible text.
pub fn text_blocks(html: &str) -> Vec<String> {
    let doc = Html::parse_document(html);
    let body = Selector::parse("body").unwrap();
    let mut out = Vec::new();
    match doc.select(&body).next() {
        Some(body) => walk(*body, &mut out),
        None => walk(doc.tree.root(), &mut out),
    }
    out
}

/// Every `<a href>` in document order with hrefs resolved against `page_url`
/// (or the document's `<base href>` when present).
pub fn hyperlinks(html: &str, page_url: &Url) -> Vec<Hyperlink> {
    let doc = Html::parse_document(html);
    let base = Selector::parse("base[href]").unwrap();
    let base_url = doc
        .select(&base)
        .next()
        .and_then(|b| b.value().attr("href"))
        .and_then(|href| page_url.join(href.trim()).ok())
        .unwrap_or_else(|| page_url.clone());
    let anchors = Selector::parse("a[href]").unwrap();
    doc.select(&anchors)
        .filter(|a| !hidden_by_ancestor(**a))
        .map(|a| {
            let raw = a.value().attr("href").unwrap_or_default().trim();
            let href = base_url.join(raw).map(|u| u.to_string()).unwrap_or_else(|_| raw.to_string());
            Hyperlink { href, text: anchor_text(*a) }
        })
        .collect()
}

struct SiblingGrouper<'a> {
    pending: Vec<String>,
    out: &'a mut Vec<String>,
}

impl<'a> SiblingGrouper<'a> {
    fn new(out: &'a mut Vec<String>) -> Self {
        Self { pending: Vec::new(), out }
    }

    fn push(&mut self, text: String) {
        if text.is_empty() {
            return;
        }
        self.pending.push(text);
        if self.pending.len() == MAX_SIBLINGS_PER_BLOCK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if !self.pending.is_empty() {
            self.out.push(self.pending.join(" "));
            self.pending.clear();
        }
    }
}

fn walk(node: NodeRef<'_, Node>, out: &mut Vec<String>) {
    let mut grouper = SiblingGrouper::new(out);
    for child in node.children() {
        match child.value() {
            Node::Text(t) => grouper.push(collapse(t)),
            Node::Element(e) if is_skipped(e) => {}
            Node::Element(_) if has_block_descendant(child) => {
                grouper.flush();
                walk(child, grouper.out);
            }
            Node::Element(_) => grouper.push(collapse(&rendered_text(child))),
            _ => {}
        }
    }
    grouper.flush();
}

fn is_skipped(e: &Element) -> bool {
    if SKIPPED.contains(&e.name()) || e.attr("hidden").is_some() {
        return true;
    }
    if e.attr("aria-hidden").is_some_and(|v| v.eq_ignore_ascii_case("true")) {
        return true;
    }
    e.attr("style").is_some_and(|style| {
        let compact: String = style.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        compact.contains("display:none") || compact.contains("visibility:hidden")
    })
}

fn hidden_by_ancestor(node: NodeRef<'_, Node>) -> bool {
    std::iter::successors(Some(node), |n| n.parent())
        .filter_map(|n| n.value().as_element())
        .any(is_skipped)
}

fn has_block_descendant(node: NodeRef<'_, Node>) -> bool {
    node.descendants()
        .skip(1)
        .filter_map(|n| n.value().as_element())
        .any(|e| BLOCK_LEVEL.contains(&e.name()))
}

/// Concatenated text of visible descendants; `<br>` renders as a space.
fn rendered_text(node: NodeRef<'_, Node>) -> String {
    let mut text = String::new();
    for child in node.children() {
        match child.value() {
            Node::Text(t) => text.push_str(t),
            Node::Element(e) if e.name() == "br" => text.push(' '),
            Node::Element(e) if is_skipped(e) => {}
            Node::Element(_) => text.push_str(&rendered_text(child)),
            _ => {}
        }
    }
    text
}

/// Text nodes directly under the anchor plus those directly under its
/// element children.
fn anchor_text(anchor: NodeRef<'_, Node>) -> String {
    let mut text = String::new();
    for child in anchor.children() {
        match child.value() {
            Node::Text(t) => text.push_str(t),
            Node::Element(e) if e.name() == "br" => text.push(' '),
            Node::Element(e) if is_skipped(e) => {}
            Node::Element(_) => {
                for grandchild in child.children() {
                    match grandchild.value() {
                        Node::Text(t) => text.push_str(t),
                        Node::Element(e) if e.name() == "br" => text.push(' '),
                        _ => {}
                    }
                }
            }
            _ => {}
        }
    }
    collapse(&text)
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page() -> Url {
        Url::parse("http://example.com/").unwrap()
    }

    #[test]
    fn siblings_group_in_threes() {
        assert_eq!(text_blocks("<p>A</p><p>B</p><p>C</p><p>D</p>"), vec!["A B C", "D"]);
    }

    #[test]
    fn nested_containers_split_groups() {
        let html = "<div><h1>Title</h1><div><p>x</p><p>y</p></div><p>z</p></div>";
        assert_eq!(text_blocks(html), vec!["Title", "x y", "z"]);
    }

    #[test]
    fn inline_fragments_join_without_spaces() {
        let html = "<div><span>P</span><span>ay</span> <b>now</b></div>";
        assert_eq!(text_blocks(html), vec!["Pay now"]);
    }

    #[test]
    fn scripts_and_hidden_elements_are_dropped() {
        let html = "<body><script>var a='<p>no</p>';</script><style>p{}</style><p hidden>secret</p>\
                    <p style='display: none'>gone</p><p>shown</p></body>";
        assert_eq!(text_blocks(html), vec!["shown"]);
    }

    #[test]
    fn empty_body_has_no_blocks() {
        assert!(text_blocks("<html><body>   </body></html>").is_empty());
        assert!(text_blocks("").is_empty());
    }

    #[test]
    fn contact_page_example() {
        let links = hyperlinks("<a href=\"/contact.html\">Contact Page</a>", &page());
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].to_string(), "(http://example.com/contact.html, Contact Page)");
    }

    #[test]
    fn anchor_text_stops_one_level_down() {
        let links = hyperlinks(r#"<a href="/x"><span>Buy</span><div><div>deep</div></div></a>"#, &page());
        assert_eq!(links[0].text, "Buy");
        assert_eq!(links[0].href, "http://example.com/x");
    }

    #[test]
    fn base_href_is_honoured() {
        let html = r#"<head><base href="https://cdn.example.net/shop/"></head><a href="item?id=1">Item</a>"#;
        assert_eq!(hyperlinks(html, &page())[0].href, "https://cdn.example.net/shop/item?id=1");
    }

    #[test]
    fn no_anchors_no_links() {
        assert!(hyperlinks("<p>nothing</p><a>no href</a>", &page()).is_empty());
    }
}
