//! Provenance resolution against the source corpus: span and bounding-box
//! validation, paragraph context, and source lookup.
//!
//! Offsets are Unicode scalar-value indices. A paragraph is a maximal run of
//! text between blank-line separators (two consecutive newlines).

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::formats::CorpusFile;
use crate::model::{BoundingBox, InstantiatedGraph, ProvenanceRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// What the UI needs to highlight a span or draw a box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResolvedProvenance {
    Text {
        id: String,
        doc_id: String,
        title: String,
        start: usize,
        end: usize,
        text: String,
    },
    Image {
        id: String,
        image_id: String,
        media: String,
        width: u32,
        height: u32,
        bbox: BoundingBox,
        doc_id: String,
        title: String,
    },
}

/// Where to open the source of a provenance record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceLocation {
    Text {
        doc_id: String,
        title: String,
        start: usize,
        end: usize,
    },
    Image {
        image_id: String,
        doc_id: String,
        title: String,
        bbox: BoundingBox,
    },
}

#[derive(Debug)]
struct DocEntry {
    doc: usize,
    /// Byte offset of every char, plus one final entry for the text length.
    char_bytes: Vec<usize>,
}

/// Read-only lookup structure over a corpus.
#[derive(Debug)]
pub struct CorpusIndex {
    corpus: Arc<CorpusFile>,
    docs: HashMap<String, DocEntry>,
    images: HashMap<String, (usize, usize)>,
}

impl CorpusIndex {
    pub fn new(corpus: &CorpusFile) -> Self {
        Self::from_arc(Arc::new(corpus.clone()))
    }

    pub fn from_arc(corpus: Arc<CorpusFile>) -> Self {
        let mut docs = HashMap::new();
        let mut images = HashMap::new();
        for (i, doc) in corpus.documents.iter().enumerate() {
            let mut char_bytes: Vec<usize> = doc.text.char_indices().map(|(b, _)| b).collect();
            char_bytes.push(doc.text.len());
            docs.insert(doc.doc_id.clone(), DocEntry { doc: i, char_bytes });
            for (j, img) in doc.images.iter().enumerate() {
                images.insert(img.image_id.clone(), (i, j));
            }
        }
        Self {
            corpus,
            docs,
            images,
        }
    }

    pub fn corpus(&self) -> &CorpusFile {
        &self.corpus
    }

    /// Document length in chars.
    pub fn doc_len(&self, doc_id: &str) -> Option<usize> {
        self.docs.get(doc_id).map(|d| d.char_bytes.len() - 1)
    }

    /// `text[start..end]` in char offsets, if in range.
    pub fn slice(&self, doc_id: &str, start: usize, end: usize) -> Option<&str> {
        let entry = self.docs.get(doc_id)?;
        if start > end || end >= entry.char_bytes.len() {
            return None;
        }
        let text = &self.corpus.documents[entry.doc].text;
        Some(&text[entry.char_bytes[start]..entry.char_bytes[end]])
    }

    /// Validates `[start, end)` against a document and returns the slice.
    pub fn check_span(&self, doc_id: &str, start: usize, end: usize) -> Result<String, Diagnostic> {
        let Some(len) = self.doc_len(doc_id) else {
            return Err(Diagnostic::error(
                Code::RefMissing,
                doc_id,
                format!("document {doc_id} does not exist"),
            ));
        };
        if start >= end || end > len {
            return Err(Diagnostic::error(
                Code::InvalidSpan,
                doc_id,
                format!("span [{start}, {end}) invalid for document of length {len}"),
            ));
        }
        Ok(self
            .slice(doc_id, start, end)
            .unwrap_or_default()
            .to_string())
    }

    /// Box must have positive extent and lie inside the image.
    pub fn check_bbox(&self, image_id: &str, bbox: &BoundingBox) -> Result<(), Diagnostic> {
        let Some(&(d, i)) = self.images.get(image_id) else {
            return Err(Diagnostic::error(
                Code::RefMissing,
                image_id,
                format!("image {image_id} does not exist"),
            ));
        };
        let img = &self.corpus.documents[d].images[i];
        let ok = bbox.w > 0
            && bbox.h > 0
            && bbox.x >= 0
            && bbox.y >= 0
            && bbox.x + bbox.w <= i64::from(img.width)
            && bbox.y + bbox.h <= i64::from(img.height);
        if ok {
            Ok(())
        } else {
            Err(Diagnostic::error(
                Code::InvalidBbox,
                image_id,
                format!(
                    "box [{}, {}, {}, {}] does not fit a {}x{} image",
                    bbox.x, bbox.y, bbox.w, bbox.h, img.width, img.height
                ),
            ))
        }
    }

    fn record<'g>(
        &self,
        g: &'g InstantiatedGraph,
        id: &str,
    ) -> Result<&'g ProvenanceRecord, Diagnostic> {
        g.provenance.get(id).ok_or_else(|| {
            Diagnostic::error(
                Code::RefMissing,
                id,
                format!("provenance {id} does not exist"),
            )
        })
    }

    fn doc_title(&self, doc_index: usize) -> (&str, &str) {
        let d = &self.corpus.documents[doc_index];
        (&d.doc_id, &d.title)
    }

    pub fn resolve(
        &self,
        g: &InstantiatedGraph,
        id: &str,
    ) -> Result<ResolvedProvenance, Diagnostic> {
        match self.record(g, id)? {
            ProvenanceRecord::Text {
                doc_id,
                start,
                end,
                text,
                ..
            } => {
                let slice = self.check_span(doc_id, *start, *end).map_err(|mut d| {
                    d.subject = id.to_string();
                    d
                })?;
                if slice != *text {
                    return Err(Diagnostic::error(
                        Code::StaleSpan,
                        id,
                        format!("cached text {text:?} differs from document text {slice:?}"),
                    ));
                }
                let (_, title) = self.doc_title(self.docs[doc_id.as_str()].doc);
                Ok(ResolvedProvenance::Text {
                    id: id.to_string(),
                    doc_id: doc_id.clone(),
                    title: title.to_string(),
                    start: *start,
                    end: *end,
                    text: slice,
                })
            }
            ProvenanceRecord::Image { image_id, bbox, .. } => {
                let &(d, i) = self.images.get(image_id.as_str()).ok_or_else(|| {
                    Diagnostic::error(
                        Code::RefMissing,
                        id,
                        format!("image {image_id} does not exist"),
                    )
                })?;
                let img = &self.corpus.documents[d].images[i];
                let (doc_id, title) = self.doc_title(d);
                Ok(ResolvedProvenance::Image {
                    id: id.to_string(),
                    image_id: image_id.clone(),
                    media: img.media.clone(),
                    width: img.width,
                    height: img.height,
                    bbox: *bbox,
                    doc_id: doc_id.to_string(),
                    title: title.to_string(),
                })
            }
        }
    }

    /// The paragraph that contains a text span, with absolute offsets.
    pub fn expand_context(&self, g: &InstantiatedGraph, id: &str) -> Result<Paragraph, Diagnostic> {
        let ProvenanceRecord::Text {
            doc_id, start, end, ..
        } = self.record(g, id)?
        else {
            return Err(Diagnostic::error(
                Code::NotText,
                id,
                "context expansion only applies to text provenance",
            ));
        };
        self.check_span(doc_id, *start, *end).map_err(|mut d| {
            d.subject = id.to_string();
            d
        })?;
        let entry = &self.docs[doc_id.as_str()];
        let text = &self.corpus.documents[entry.doc].text;
        let chars: Vec<char> = text.chars().collect();
        let (p_start, p_end) = paragraph_bounds(&chars, *start, *end);
        Ok(Paragraph {
            start: p_start,
            end: p_end,
            text: chars[p_start..p_end].iter().collect(),
        })
    }

    pub fn locate_source(
        &self,
        g: &InstantiatedGraph,
        id: &str,
    ) -> Result<SourceLocation, Diagnostic> {
        match self.record(g, id)? {
            ProvenanceRecord::Text {
                doc_id, start, end, ..
            } => {
                let entry = self.docs.get(doc_id.as_str()).ok_or_else(|| {
                    Diagnostic::error(
                        Code::RefMissing,
                        id,
                        format!("document {doc_id} does not exist"),
                    )
                })?;
                let (_, title) = self.doc_title(entry.doc);
                Ok(SourceLocation::Text {
                    doc_id: doc_id.clone(),
                    title: title.to_string(),
                    start: *start,
                    end: *end,
                })
            }
            ProvenanceRecord::Image { image_id, bbox, .. } => {
                let &(d, _) = self.images.get(image_id.as_str()).ok_or_else(|| {
                    Diagnostic::error(
                        Code::RefMissing,
                        id,
                        format!("image {image_id} does not exist"),
                    )
                })?;
                let (doc_id, title) = self.doc_title(d);
                Ok(SourceLocation::Image {
                    image_id: image_id.clone(),
                    doc_id: doc_id.to_string(),
                    title: title.to_string(),
                    bbox: *bbox,
                })
            }
        }
    }

    /// Validates one provenance record: span in range with matching cached
    /// text, or box inside its image.
    pub fn check_record(&self, rec: &ProvenanceRecord) -> Result<(), Diagnostic> {
        let res = match rec {
            ProvenanceRecord::Text {
                doc_id,
                start,
                end,
                text,
                ..
            } => self.check_span(doc_id, *start, *end).and_then(|slice| {
                if slice == *text {
                    Ok(())
                } else {
                    Err(Diagnostic::error(
                        Code::StaleSpan,
                        rec.id(),
                        format!("cached text {text:?} differs from document text {slice:?}"),
                    ))
                }
            }),
            ProvenanceRecord::Image { image_id, bbox, .. } => self.check_bbox(image_id, bbox),
        };
        res.map_err(|mut d| {
            d.subject = rec.id().to_string();
            d
        })
    }

    /// Every provenance record of the graph checked against the corpus.
    pub fn check_graph(&self, g: &InstantiatedGraph) -> Diagnostics {
        let mut out = Diagnostics::default();
        for rec in g.provenance.values() {
            if let Err(d) = self.check_record(rec) {
                out.push(d);
            }
        }
        out.sort();
        out
    }
}

/// `[p_start, p_end)` of the blank-line delimited block(s) covering
/// `[start, end)`.
fn paragraph_bounds(chars: &[char], start: usize, end: usize) -> (usize, usize) {
    let is_sep = |i: usize| i + 1 < chars.len() && chars[i] == '\n' && chars[i + 1] == '\n';
    let mut p_start = 0;
    let mut i = start.min(chars.len());
    while i >= 2 {
        if is_sep(i - 2) {
            p_start = i;
            break;
        }
        i -= 1;
    }
    let mut p_end = chars.len();
    for j in end..chars.len() {
        if is_sep(j) {
            p_end = j;
            break;
        }
    }
    (p_start, p_end)
}
