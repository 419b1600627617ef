//! Tag-protocol text extraction from stored HTML.
//!
//! A [`TagMask`] selects which element classes contribute text. The title is
//! always included. Each text node is emitted at most once: it is kept when
//! it sits under at least one enabled element, so nested matches (a headline
//! inside a link) do not duplicate tokens.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use ego_tree::iter::Edge;
use scraper::{Html, Node};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskParseError {
    #[error("unknown tag letter '{0}' (expected one of t,h,p,a,i,v)")]
    UnknownLetter(char),
    #[error("tag letter '{0}' given more than once")]
    Repeated(char),
}

/// Which HTML tag classes feed the token stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TagMask {
    pub headlines: bool,
    pub paragraphs: bool,
    pub links: bool,
    pub images: bool,
    pub visible_text: bool,
}

impl TagMask {
    pub const TITLE_ONLY: TagMask = TagMask {
        headlines: false,
        paragraphs: false,
        links: false,
        images: false,
        visible_text: false,
    };

    pub const HPAI: TagMask = TagMask {
        headlines: true,
        paragraphs: true,
        links: true,
        images: true,
        visible_text: false,
    };

    /// Always true; present so callers can treat the title like any other flag.
    pub fn title(&self) -> bool {
        true
    }

    /// The 16 subsets of {h,p,a,i}, ordered by their bit pattern.
    pub fn tag_combinations() -> Vec<TagMask> {
        (0u8..16)
            .map(|bits| TagMask {
                headlines: bits & 1 != 0,
                paragraphs: bits & 2 != 0,
                links: bits & 4 != 0,
                images: bits & 8 != 0,
                visible_text: false,
            })
            .collect()
    }

    /// The default set for the tag experiment: every {h,p,a,i} subset plus `hpaiv`.
    pub fn experiment_masks() -> Vec<TagMask> {
        let mut masks = Self::tag_combinations();
        masks.push(TagMask {
            visible_text: true,
            ..TagMask::HPAI
        });
        masks
    }

    /// True when every flag set in `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &TagMask) -> bool {
        (!self.headlines || other.headlines)
            && (!self.paragraphs || other.paragraphs)
            && (!self.links || other.links)
            && (!self.images || other.images)
            && (!self.visible_text || other.visible_text)
    }
}

impl fmt::Display for TagMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for (on, c) in [
            (self.headlines, 'h'),
            (self.paragraphs, 'p'),
            (self.links, 'a'),
            (self.images, 'i'),
            (self.visible_text, 'v'),
        ] {
            if on {
                s.push(c);
            }
        }
        if s.is_empty() {
            s.push('t');
        }
        f.write_str(&s)
    }
}

impl FromStr for TagMask {
    type Err = MaskParseError;

    /// Accepts letters from {h,p,a,i,v} in any order. `t` (title) is implicit
    /// but accepted, so `""`, `"t"` and `"th"` are all valid.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut mask = TagMask::TITLE_ONLY;
        let mut seen_title = false;
        for c in s.trim().chars() {
            let flag = match c {
                't' => {
                    if seen_title {
                        return Err(MaskParseError::Repeated(c));
                    }
                    seen_title = true;
                    continue;
                }
                'h' => &mut mask.headlines,
                'p' => &mut mask.paragraphs,
                'a' => &mut mask.links,
                'i' => &mut mask.images,
                'v' => &mut mask.visible_text,
                other => return Err(MaskParseError::UnknownLetter(other)),
            };
            if *flag {
                return Err(MaskParseError::Repeated(c));
            }
            *flag = true;
        }
        Ok(mask)
    }
}

impl Serialize for TagMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TagMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Tokens extracted from one site's HTML.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractedDocument {
    pub site_id: String,
    tokens: Vec<String>,
}

impl ExtractedDocument {
    pub fn new(site_id: impl Into<String>, tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        ExtractedDocument {
            site_id: site_id.into(),
            tokens,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    tokenize_into(text, &mut out);
    out
}

fn tokenize_into(text: &str, out: &mut Vec<String>) {
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
}

#[derive(Clone, Copy, Default)]
struct Scope {
    title: bool,
    head: bool,
    hidden: bool,
    selected: bool,
}

fn is_hidden_element(name: &str) -> bool {
    matches!(name, "script" | "style" | "noscript" | "template")
}

fn is_headline(name: &str) -> bool {
    matches!(name, "h1" | "h2" | "h3" | "h4" | "h5" | "h6")
}

/// Extracts the token stream of `html` under `mask`.
///
/// Title text comes first, followed by the remaining selected text in
/// document order. Invalid UTF-8 is replaced, and malformed markup is
/// recovered by the HTML5 parser.
pub fn extract(site_id: impl Into<String>, html: &[u8], mask: TagMask) -> ExtractedDocument {
    let source = String::from_utf8_lossy(html);
    let doc = Html::parse_document(&source);

    let mut title_tokens = Vec::new();
    let mut body_tokens = Vec::new();
    let mut stack: Vec<Scope> = vec![Scope::default()];

    for edge in doc.tree.root().traverse() {
        match edge {
            Edge::Open(node) => {
                let parent = *stack.last().expect("scope stack never empty");
                match node.value() {
                    Node::Element(el) => {
                        let name = el.name();
                        let mut scope = parent;
                        if is_hidden_element(name) {
                            scope.hidden = true;
                        }
                        match name {
                            "title" => scope.title = true,
                            "head" => scope.head = true,
                            _ => {}
                        }
                        let selected_here = (mask.headlines && is_headline(name))
                            || (mask.paragraphs && name == "p")
                            || (mask.links && name == "a");
                        scope.selected |= selected_here;

                        if name == "img"
                            && !scope.hidden
                            && (mask.images || (mask.visible_text && !scope.head))
                        {
                            let description = el
                                .attr("alt")
                                .filter(|s| !s.trim().is_empty())
                                .or_else(|| el.attr("title"));
                            if let Some(text) = description {
                                tokenize_into(text, &mut body_tokens);
                            }
                        }
                        stack.push(scope);
                    }
                    Node::Text(text) => {
                        if parent.hidden {
                            continue;
                        }
                        if parent.title {
                            tokenize_into(text, &mut title_tokens);
                        } else if parent.selected || (mask.visible_text && !parent.head) {
                            tokenize_into(text, &mut body_tokens);
                        }
                    }
                    _ => {}
                }
            }
            Edge::Close(node) => {
                if node.value().is_element() {
                    stack.pop();
                }
            }
        }
    }

    title_tokens.extend(body_tokens);
    ExtractedDocument::new(site_id, title_tokens)
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("fetching {url}: HTTP status {status}")]
    Status { url: String, status: u16 },
    #[error("fetching {url}: {message}")]
    Transport { url: String, message: String },
}

impl FetchError {
    pub fn url(&self) -> &str {
        match self {
            FetchError::Status { url, .. } | FetchError::Transport { url, .. } => url,
        }
    }
}

/// Blocking GET of `url`, returning the body bytes on a 2xx response.
pub fn fetch(url: &str, timeout: Duration) -> Result<Vec<u8>, FetchError> {
    let agent = ureq::AgentBuilder::new().timeout(timeout).build();
    let response = agent.get(url).call().map_err(|e| match e {
        ureq::Error::Status(status, _) => FetchError::Status {
            url: url.to_string(),
            status,
        },
        ureq::Error::Transport(t) => FetchError::Transport {
            url: url.to_string(),
            message: t.to_string(),
        },
    })?;
    let mut body = Vec::new();
    std::io::Read::read_to_end(&mut response.into_reader(), &mut body).map_err(|e| {
        FetchError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        }
    })?;
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(s: &str) -> TagMask {
        s.parse().unwrap()
    }

    fn tokens(html: &str, m: &str) -> Vec<String> {
        extract("s", html.as_bytes(), mask(m)).into_tokens()
    }

    #[test]
    fn title_and_paragraph() {
        assert_eq!(
            tokens("<title>Hello World</title><p>Cats and dogs</p>", "p"),
            ["hello", "world", "cats", "and", "dogs"]
        );
    }

    #[test]
    fn disabled_image_contributes_nothing() {
        assert_eq!(tokens(r#"<title>T</title><img alt="red shoe">"#, "t"), ["t"]);
        assert_eq!(
            tokens(r#"<title>T</title><img alt="red shoe">"#, "i"),
            ["t", "red", "shoe"]
        );
    }

    #[test]
    fn image_falls_back_to_title_attribute() {
        assert_eq!(
            tokens(r#"<img title="blue hat"><img alt="" title="x">"#, "i"),
            ["blue", "hat", "x"]
        );
    }

    #[test]
    fn links_contribute_anchor_text() {
        let html = r#"<p>para</p><a href="/x">Go <b>home</b></a>"#;
        assert_eq!(tokens(html, "a"), ["go", "home"]);
    }

    #[test]
    fn title_comes_first() {
        let html = "<html><body><p>body</p></body><head><title>late</title></head></html>";
        assert_eq!(tokens(html, "p")[0], "late");
    }

    #[test]
    fn nested_selection_counted_once() {
        let html = "<a href='#'><h1>deal</h1></a>";
        assert_eq!(tokens(html, "ha"), ["deal"]);
    }

    #[test]
    fn scripts_and_styles_never_leak() {
        let html = "<head><style>p{color:red}</style><script>var secret=1</script></head>\
                    <body><p>ok<script>hidden()</script></p><div>free</div></body>";
        for m in ["t", "p", "hpai", "v", "hpaiv"] {
            let toks = tokens(html, m);
            assert!(!toks.iter().any(|t| t == "secret" || t == "hidden" || t == "color"));
        }
        assert_eq!(tokens(html, "v"), ["ok", "free"]);
    }

    #[test]
    fn visible_text_ignores_flags() {
        let html = "<title>t</title><div>loose</div><p>para</p><img alt='pic'>";
        assert_eq!(tokens(html, "v"), tokens(html, "hpaiv"));
        assert_eq!(tokens(html, "v"), ["t", "loose", "para", "pic"]);
    }

    #[test]
    fn malformed_and_binary_input() {
        assert_eq!(tokens("<p>unclosed <b>bold", "p"), ["unclosed", "bold"]);
        let bytes = b"<title>caf\xff\xfe</title>";
        let doc = extract("s", bytes, TagMask::TITLE_ONLY);
        assert_eq!(doc.tokens(), ["caf"]);
        assert_eq!(extract("s", b"", TagMask::HPAI).token_count(), 0);
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hello, World!"), ["hello", "world"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("e-mail 2015"), ["e", "mail", "2015"]);
        assert_eq!(tokenize("ÉCOLE straße"), ["école", "straße"]);
    }

    #[test]
    fn mask_strings() {
        assert_eq!(mask("hpai"), TagMask::HPAI);
        assert_eq!(mask("").to_string(), "t");
        assert_eq!(mask("iahp").to_string(), "hpai");
        assert_eq!(mask("thp").to_string(), "hp");
        assert!(matches!("hx".parse::<TagMask>(), Err(MaskParseError::UnknownLetter('x'))));
        assert!(matches!("hh".parse::<TagMask>(), Err(MaskParseError::Repeated('h'))));
        assert_eq!(TagMask::experiment_masks().len(), 17);
        for m in TagMask::experiment_masks() {
            assert_eq!(m.to_string().parse::<TagMask>().unwrap(), m);
        }
    }
}
