//! Memory-resident spatio-textual indices.
//!
//! `stix` answers two kinds of Boolean spatio-textual queries over a collection
//! of points tagged with keyword sets:
//!
//! * **Boolean window queries** ([`BwqSpec`]): every object inside a rectangle
//!   that carries all of the query keywords.
//! * **Boolean kNN queries** ([`BkqSpec`]): the `k` closest objects that carry
//!   all of the query keywords.
//!
//! Six index variants are provided behind a single [`IndexHandle`]:
//!
//! | variant        | spatial part            | textual part                         | exact |
//! |----------------|-------------------------|--------------------------------------|-------|
//! | `rstar-if`     | R*-tree                 | inverted file per leaf               | yes   |
//! | `ir2`          | R*-tree                 | keyword bitmap per node              | yes   |
//! | `rsmi-if`      | recursive learned index | inverted file per leaf block         | no    |
//! | `rsmi-bm`      | recursive learned index | keyword bitmap per model and object  | no    |
//! | `rsmi-bm-star` | learned, keyword-aware partitioning | bitmaps                  | no    |
//! | `rsmi-bm-ir2`  | learned upper levels    | an IR²-tree under every leaf block   | no    |
//!
//! The learned variants never return a false positive, but may miss results when an
//! inner model routes a query corner to the wrong child. The [`oracle`] module gives
//! brute-force ground truth together with the recall and kNN-deviation metrics used
//! to quantify that loss, and [`bench`] wraps everything into a benchmark harness.
//!
//! ```
//! use std::sync::Arc;
//! use stix::{BwqSpec, Dataset, IndexHandle, IndexParams, IndexVariant, Point};
//!
//! let data = Dataset::from_keyword_strings(vec![
//!     (1, Point::new(0.2, 0.3), vec!["pizza", "bar"]),
//!     (2, Point::new(0.8, 0.1), vec!["pizza"]),
//! ])
//! .unwrap();
//! let pizza = data.vocabulary().id("pizza").unwrap();
//! let data = Arc::new(data);
//! let index = IndexHandle::build(data, IndexVariant::Ir2, &IndexParams::default()).unwrap();
//! let q = BwqSpec::new(Point::new(0.0, 0.0), Point::new(0.5, 0.5), vec![pizza]).unwrap();
//! assert_eq!(index.execute_bwq(&q).ids(), &[1]);
//! ```

pub mod bench;
pub mod domain;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod mlp;
pub mod oracle;
pub mod rsmi;
pub mod rtree;
pub mod text;

pub use domain::{
    Bitmap, BkqSpec, BwqSpec, Dataset, KeywordId, KeywordVocabulary, ObjectId, ResultSet,
    SpatioTextualObject,
};
pub use engine::{IndexHandle, IndexParams, IndexVariant, QueryOptions};
pub use error::{Result, StixError};
pub use geometry::{Mbr, Point};
pub use text::QueryStats;
