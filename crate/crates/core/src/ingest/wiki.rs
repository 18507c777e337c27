//! Streaming reader for MediaWiki XML exports (pages-articles form).

use std::io::BufRead;

use quick_xml::escape::resolve_xml_entity;
use quick_xml::events::Event;
use quick_xml::Reader;

use super::markup::strip_markup;
use super::Article;
use crate::error::{Error, Result};

/// Page counts seen so far. `pages == articles + redirects + other_namespace`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DumpStats {
    pub pages: usize,
    pub articles: usize,
    pub redirects: usize,
    pub other_namespace: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    None,
    Title,
    Ns,
    Text,
}

#[derive(Default)]
struct Page {
    title: String,
    ns: String,
    text: String,
    redirect: bool,
}

/// Iterator over the main-namespace, non-redirect pages of a dump, with markup
/// stripped. Holds at most one page in memory.
pub struct DumpReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    lang: String,
    stats: DumpStats,
    depth: usize,
    page: Option<Page>,
    field: Field,
    finished: bool,
}

pub fn parse_wiki_dump<R: BufRead>(input: R, lang: &str) -> DumpReader<R> {
    DumpReader {
        reader: Reader::from_reader(input),
        buf: Vec::new(),
        lang: lang.to_string(),
        stats: DumpStats::default(),
        depth: 0,
        page: None,
        field: Field::None,
        finished: false,
    }
}

fn malformed(offset: u64, message: String, pages: usize) -> Error {
    Error::Malformed {
        offset,
        message: format!("{message} (after {pages} complete pages)"),
    }
}

impl<R: BufRead> DumpReader<R> {
    pub fn stats(&self) -> DumpStats {
        self.stats
    }

    fn push_text(&mut self, s: &str) {
        if let Some(page) = self.page.as_mut() {
            match self.field {
                Field::Title => page.title.push_str(s),
                Field::Ns => page.ns.push_str(s),
                Field::Text => page.text.push_str(s),
                Field::None => {}
            }
        }
    }

    /// Reads events until a page closes; `Ok(None)` at a clean end of stream.
    fn next_page(&mut self) -> Result<Option<Article>> {
        loop {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(e) => e,
                Err(e) => {
                    let offset = self.reader.error_position();
                    return Err(malformed(offset, e.to_string(), self.stats.pages));
                }
            };
            match event {
                Event::Start(e) => {
                    self.depth += 1;
                    match e.local_name().as_ref() {
                        "page" => self.page = Some(Page::default()),
                        "title" if self.depth == 3 => self.field = Field::Title,
                        "ns" if self.depth == 3 => self.field = Field::Ns,
                        "text" => {
                            // keep the last revision only
                            if let Some(p) = self.page.as_mut() {
                                p.text.clear();
                            }
                            self.field = Field::Text;
                        }
                        "redirect" => self.set_redirect(),
                        _ => {}
                    }
                }
                Event::Empty(e) => {
                    if e.local_name().as_ref() == "redirect" {
                        self.set_redirect();
                    }
                }
                Event::End(e) => {
                    self.depth = self.depth.saturating_sub(1);
                    self.field = Field::None;
                    if e.local_name().as_ref() == "page" {
                        if let Some(article) = self.finish_page() {
                            return Ok(Some(article));
                        }
                    }
                }
                Event::Text(t) => {
                    let s = t.xml10_content().into_owned();
                    self.push_text(&s);
                }
                Event::CData(t) => {
                    let s = t.xml10_content().into_owned();
                    self.push_text(&s);
                }
                Event::GeneralRef(r) => {
                    let resolved = match r.resolve_char_ref() {
                        Ok(Some(c)) => c.to_string(),
                        Ok(None) => match resolve_xml_entity(&r) {
                            Some(v) => v.to_string(),
                            None => {
                                let offset = self.reader.buffer_position();
                                return Err(malformed(offset, format!("unknown entity &{};", &*r), self.stats.pages));
                            }
                        },
                        Err(e) => {
                            let offset = self.reader.buffer_position();
                            return Err(malformed(offset, e.to_string(), self.stats.pages));
                        }
                    };
                    self.push_text(&resolved);
                }
                Event::Eof => {
                    if self.depth > 0 {
                        let offset = self.reader.buffer_position();
                        return Err(malformed(
                            offset,
                            "truncated stream: input ended inside an element".into(),
                            self.stats.pages,
                        ));
                    }
                    return Ok(None);
                }
                _ => {}
            }
        }
    }

    fn set_redirect(&mut self) {
        if let Some(p) = self.page.as_mut() {
            p.redirect = true;
        }
    }

    fn finish_page(&mut self) -> Option<Article> {
        let page = self.page.take()?;
        self.stats.pages += 1;
        if page.redirect {
            self.stats.redirects += 1;
            return None;
        }
        if page.ns.trim() != "0" && !page.ns.trim().is_empty() {
            self.stats.other_namespace += 1;
            return None;
        }
        self.stats.articles += 1;
        Some(Article {
            title: page.title.trim().to_string(),
            text: strip_markup(&page.text),
            lang: self.lang.clone(),
        })
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<Article>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.next_page() {
            Ok(Some(a)) => Some(Ok(a)),
            Ok(None) => {
                self.finished = true;
                None
            }
            Err(e) => {
                self.finished = true;
                Some(Err(e))
            }
        }
    }
}
