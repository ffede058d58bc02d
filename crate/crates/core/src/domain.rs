//! Objects, keyword vocabulary, bitmap signatures, query specifications and result sets.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Result, StixError};
use crate::geometry::{Mbr, Point};

pub type ObjectId = u64;
pub type KeywordId = u32;

/// A point location tagged with a set of keywords.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatioTextualObject {
    pub id: ObjectId,
    pub location: Point,
    /// Sorted, duplicate-free.
    keywords: Vec<KeywordId>,
}

impl SpatioTextualObject {
    pub fn new(id: ObjectId, location: Point, keywords: impl IntoIterator<Item = KeywordId>) -> Self {
        let mut keywords: Vec<KeywordId> = keywords.into_iter().collect();
        keywords.sort_unstable();
        keywords.dedup();
        Self {
            id,
            location,
            keywords,
        }
    }

    pub fn keywords(&self) -> &[KeywordId] {
        &self.keywords
    }

    /// `T ⊆ o.T`; vacuously true for an empty `T`.
    pub fn contains_all(&self, query: &[KeywordId]) -> bool {
        query.iter().all(|k| self.keywords.binary_search(k).is_ok())
    }
}

/// Dense bijection between keyword strings and ids `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct KeywordVocabulary {
    words: Vec<String>,
    ids: HashMap<String, KeywordId>,
}

impl TryFrom<Vec<String>> for KeywordVocabulary {
    type Error = StixError;

    fn try_from(words: Vec<String>) -> Result<Self> {
        Self::from_words(words)
    }
}

impl From<KeywordVocabulary> for Vec<String> {
    fn from(v: KeywordVocabulary) -> Self {
        v.words
    }
}

impl KeywordVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assign ids in order of first appearance over the input sequence.
    pub fn build<I, S, W>(objects: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = W>,
        W: AsRef<str>,
    {
        let mut vocab = Self::new();
        for keywords in objects {
            for w in keywords {
                vocab.intern(w.as_ref());
            }
        }
        vocab
    }

    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if ids.insert(w.clone(), i as KeywordId).is_some() {
                return Err(StixError::InvalidParameter(format!(
                    "keyword {w:?} appears twice in vocabulary"
                )));
            }
        }
        Ok(Self { words, ids })
    }

    pub fn intern(&mut self, word: &str) -> KeywordId {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as KeywordId;
        self.words.push(word.to_owned());
        self.ids.insert(word.to_owned(), id);
        id
    }

    pub fn id(&self, word: &str) -> Option<KeywordId> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: KeywordId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn build_vocabulary<I, S, W>(objects: I) -> KeywordVocabulary
where
    I: IntoIterator<Item = S>,
    S: IntoIterator<Item = W>,
    W: AsRef<str>,
{
    KeywordVocabulary::build(objects)
}

pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

/// Fixed-length bit vector over the keyword corpus. Bit `i` is set iff keyword
/// `i` is present in the represented object, node or query.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bitmap {
    len: usize,
    words: Vec<u64>,
}

impl Bitmap {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_keywords(len: usize, keywords: &[KeywordId]) -> Result<Self> {
        let mut bm = Self::zeros(len);
        for &k in keywords {
            if k as usize >= len {
                return Err(StixError::KeywordOutOfRange {
                    id: k,
                    vocabulary_size: len,
                });
            }
            bm.set(k);
        }
        Ok(bm)
    }

    pub(crate) fn from_words(len: usize, words: &[u64]) -> Self {
        debug_assert_eq!(words.len(), words_for(len));
        Self {
            len,
            words: words.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Panics if `bit` is outside the bitmap.
    pub fn set(&mut self, bit: KeywordId) {
        let b = bit as usize;
        assert!(b < self.len, "bit {b} outside bitmap of length {}", self.len);
        self.words[b / 64] |= 1u64 << (b % 64);
    }

    pub fn get(&self, bit: KeywordId) -> bool {
        let b = bit as usize;
        b < self.len && self.words[b / 64] & (1u64 << (b % 64)) != 0
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn union_with(&mut self, other: &Bitmap) {
        debug_assert_eq!(self.len, other.len);
        self.union_words(&other.words);
    }

    #[inline]
    pub(crate) fn union_words(&mut self, other: &[u64]) {
        for (a, b) in self.words.iter_mut().zip(other) {
            *a |= b;
        }
    }

    /// `query & self == query`: every bit of `query` is also set here.
    #[inline]
    pub fn covers(&self, query: &Bitmap) -> bool {
        covers_words(&self.words, &query.words)
    }

    /// Set bit positions in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = KeywordId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros();
                rest &= rest - 1;
                Some((wi * 64) as KeywordId + tz)
            })
        })
    }

    pub fn to_keywords(&self) -> Vec<KeywordId> {
        self.ones().collect()
    }

    pub fn complement(&self) -> Bitmap {
        let mut out = self.clone();
        for w in out.words.iter_mut() {
            *w = !*w;
        }
        let tail = self.len % 64;
        if tail != 0 {
            if let Some(last) = out.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn covers_words(node: &[u64], query: &[u64]) -> bool {
    node.iter().zip(query).all(|(n, q)| q & !n == 0)
}

/// Signature of a keyword set over `vocab`.
pub fn encode_bitmap(vocab: &KeywordVocabulary, keywords: &[KeywordId]) -> Result<Bitmap> {
    Bitmap::from_keywords(vocab.len(), keywords)
}

/// Affine map from raw input coordinates into the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Point,
    pub max: Point,
}

impl Normalization {
    fn axis(v: f64, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::new(
            Self::axis(p.x, self.min.x, self.max.x),
            Self::axis(p.y, self.min.y, self.max.y),
        )
    }

    pub fn invert(&self, p: &Point) -> Point {
        Point::new(
            self.min.x + p.x * (self.max.x - self.min.x),
            self.min.y + p.y * (self.max.y - self.min.y),
        )
    }
}

/// An immutable collection of objects with its vocabulary and precomputed
/// per-object bitmaps. Indices refer to objects by their position here.
#[derive(Debug, Clone)]
pub struct Dataset {
    objects: Vec<SpatioTextualObject>,
    vocab: KeywordVocabulary,
    normalization: Option<Normalization>,
    signature_words: usize,
    signatures: Vec<u64>,
    bounds: Mbr,
}

impl Dataset {
    /// Validate and index `objects` as given: coordinates must be finite,
    /// keyword ids inside `vocab` and object ids unique.
    pub fn new(objects: Vec<SpatioTextualObject>, vocab: KeywordVocabulary) -> Result<Self> {
        Self::assemble(objects, vocab, None)
    }

    /// Like [`Dataset::new`] but first min-max normalizes both axes into `[0,1]`.
    /// A degenerate axis (all values equal) maps to 0.5.
    pub fn normalized(mut objects: Vec<SpatioTextualObject>, vocab: KeywordVocabulary) -> Result<Self> {
        check_finite(&objects)?;
        let raw = Mbr::of_points(objects.iter().map(|o| &o.location));
        let norm = if raw.is_empty() {
            Normalization {
                min: Point::default(),
                max: Point::new(1.0, 1.0),
            }
        } else {
            Normalization {
                min: raw.lo,
                max: raw.hi,
            }
        };
        for o in objects.iter_mut() {
            o.location = norm.apply(&o.location);
        }
        Self::assemble(objects, vocab, Some(norm))
    }

    /// Build the vocabulary from keyword strings (first-appearance order) and
    /// keep coordinates as given.
    pub fn from_keyword_strings<S: AsRef<str>>(
        rows: Vec<(ObjectId, Point, Vec<S>)>,
    ) -> Result<Self> {
        let mut vocab = KeywordVocabulary::new();
        let objects = rows
            .into_iter()
            .map(|(id, p, kws)| {
                let ids: Vec<KeywordId> = kws.iter().map(|w| vocab.intern(w.as_ref())).collect();
                SpatioTextualObject::new(id, p, ids)
            })
            .collect();
        Self::new(objects, vocab)
    }

    fn assemble(
        objects: Vec<SpatioTextualObject>,
        vocab: KeywordVocabulary,
        normalization: Option<Normalization>,
    ) -> Result<Self> {
        check_finite(&objects)?;
        if objects.len() > u32::MAX as usize {
            return Err(StixError::InvalidParameter(format!(
                "at most {} objects are supported",
                u32::MAX
            )));
        }
        let mut seen = HashSet::with_capacity(objects.len());
        for o in &objects {
            if !seen.insert(o.id) {
                return Err(StixError::DuplicateId(o.id));
            }
        }
        let signature_words = words_for(vocab.len());
        let mut signatures = vec![0u64; signature_words * objects.len()];
        for (pos, o) in objects.iter().enumerate() {
            let row = &mut signatures[pos * signature_words..(pos + 1) * signature_words];
            for &k in o.keywords() {
                if k as usize >= vocab.len() {
                    return Err(StixError::KeywordOutOfRange {
                        id: k,
                        vocabulary_size: vocab.len(),
                    });
                }
                row[k as usize / 64] |= 1u64 << (k % 64);
            }
        }
        let bounds = Mbr::of_points(objects.iter().map(|o| &o.location));
        Ok(Self {
            objects,
            vocab,
            normalization,
            signature_words,
            signatures,
            bounds,
        })
    }

    pub fn objects(&self) -> &[SpatioTextualObject] {
        &self.objects
    }

    #[inline]
    pub fn object(&self, pos: u32) -> &SpatioTextualObject {
        &self.objects[pos as usize]
    }

    #[inline]
    pub fn location(&self, pos: u32) -> &Point {
        &self.objects[pos as usize].location
    }

    pub fn vocabulary(&self) -> &KeywordVocabulary {
        &self.vocab
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Tight MBR of all locations (empty rectangle for an empty dataset).
    pub fn bounds(&self) -> Mbr {
        self.bounds
    }

    pub fn bitmap_len(&self) -> usize {
        self.vocab.len()
    }

    /// Raw bitmap words of the object at `pos`.
    #[inline]
    pub fn signature(&self, pos: u32) -> &[u64] {
        let start = pos as usize * self.signature_words;
        &self.signatures[start..start + self.signature_words]
    }

    pub fn bitmap(&self, pos: u32) -> Bitmap {
        Bitmap::from_words(self.vocab.len(), self.signature(pos))
    }

    /// OR of the bitmaps of every object in `positions`.
    pub fn union_bitmap(&self, positions: impl IntoIterator<Item = u32>) -> Bitmap {
        let mut bm = Bitmap::zeros(self.vocab.len());
        for pos in positions {
            bm.union_words(self.signature(pos));
        }
        bm
    }

    pub fn matches(&self, pos: u32, query: &PreparedKeywords) -> bool {
        query.satisfiable && covers_words(self.signature(pos), query.bitmap.words())
    }

    pub fn prepare_keywords(&self, keywords: &[KeywordId]) -> PreparedKeywords {
        PreparedKeywords::new(self.vocab.len(), keywords)
    }

    /// Map raw keyword strings to ids; `None` if any is unknown to the vocabulary.
    pub fn keyword_ids<S: AsRef<str>>(&self, words: &[S]) -> Option<Vec<KeywordId>> {
        words.iter().map(|w| self.vocab.id(w.as_ref())).collect()
    }

    pub(crate) fn from_parts(
        objects: Vec<SpatioTextualObject>,
        vocab: KeywordVocabulary,
        normalization: Option<Normalization>,
    ) -> Result<Self> {
        Self::assemble(objects, vocab, normalization)
    }

    /// Approximate heap footprint of objects and keyword signatures.
    pub fn heap_bytes(&self) -> usize {
        self.objects.len() * std::mem::size_of::<SpatioTextualObject>()
            + self
                .objects
                .iter()
                .map(|o| o.keywords.len() * std::mem::size_of::<KeywordId>())
                .sum::<usize>()
            + self.signatures.len() * 8
    }
}

fn check_finite(objects: &[SpatioTextualObject]) -> Result<()> {
    for o in objects {
        if !o.location.is_finite() {
            return Err(StixError::InvalidGeometry(format!(
                "object {} has a non-finite coordinate {:?}",
                o.id, o.location
            )));
        }
    }
    Ok(())
}

/// Query keywords resolved against one dataset's vocabulary. A keyword id
/// outside the vocabulary can match no object, so the query becomes unsatisfiable.
#[derive(Debug, Clone)]
pub struct PreparedKeywords {
    pub ids: Vec<KeywordId>,
    pub bitmap: Bitmap,
    pub satisfiable: bool,
}

impl PreparedKeywords {
    pub fn new(vocab_len: usize, keywords: &[KeywordId]) -> Self {
        let mut ids = keywords.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let satisfiable = ids.iter().all(|&k| (k as usize) < vocab_len);
        let mut bitmap = Bitmap::zeros(vocab_len);
        if satisfiable {
            for &k in &ids {
                bitmap.set(k);
            }
        }
        Self {
            ids,
            bitmap,
            satisfiable,
        }
    }
}

/// Boolean window query: objects inside `window` containing every keyword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BwqSpec {
    pub window: Mbr,
    pub keywords: Vec<KeywordId>,
}

impl BwqSpec {
    pub fn new(lo: Point, hi: Point, keywords: Vec<KeywordId>) -> Result<Self> {
        let window = Mbr::new(lo, hi).map_err(|e| StixError::InvalidQuery(e.to_string()))?;
        Ok(Self { window, keywords })
    }

    pub fn from_window(window: Mbr, keywords: Vec<KeywordId>) -> Result<Self> {
        Self::new(window.lo, window.hi, keywords)
    }
}

/// Boolean kNN query: the `k` objects nearest to `point` containing every keyword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkqSpec {
    pub point: Point,
    pub keywords: Vec<KeywordId>,
    pub k: usize,
}

impl BkqSpec {
    pub fn new(point: Point, keywords: Vec<KeywordId>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(StixError::InvalidQuery("k must be at least 1".into()));
        }
        if !point.is_finite() {
            return Err(StixError::InvalidQuery(format!("non-finite query point {point:?}")));
        }
        Ok(Self { point, keywords, k })
    }
}

/// Query answer. Window answers are ids in ascending order; kNN answers are
/// ordered by distance (ties by id) and carry the distances.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultSet {
    ids: Vec<ObjectId>,
    distances: Option<Vec<f64>>,
}

impl ResultSet {
    pub fn from_ids(mut ids: Vec<ObjectId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self {
            ids,
            distances: None,
        }
    }

    /// Sorts by `(distance, id)`, drops duplicate ids and keeps the first `k`.
    pub fn from_neighbors(mut hits: Vec<(ObjectId, f64)>, k: usize) -> Self {
        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut seen = HashSet::with_capacity(hits.len());
        hits.retain(|(id, _)| seen.insert(*id));
        hits.truncate(k);
        let (ids, distances) = hits.into_iter().unzip();
        Self {
            ids,
            distances: Some(distances),
        }
    }

    pub fn ids(&self) -> &[ObjectId] {
        &self.ids
    }

    pub fn distances(&self) -> Option<&[f64]> {
        self.distances.as_deref()
    }

    /// Distance of the farthest returned neighbor.
    pub fn kth_distance(&self) -> Option<f64> {
        self.distances.as_ref().and_then(|d| d.last().copied())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        match self.distances {
            None => self.ids.binary_search(&id).is_ok(),
            Some(_) => self.ids.contains(&id),
        }
    }
}
