//! Index snapshots.
//!
//! Layout: the magic bytes `STIX1`, one variant tag byte, then four sections
//! (vocabulary, objects, structure, models), each a little-endian `u64` byte
//! length followed by a bincode payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, KeywordVocabulary, Normalization, SpatioTextualObject};
use crate::engine::{BuildMeta, IndexHandle, IndexImpl, IndexVariant};
use crate::error::{Result, StixError};
use crate::mlp::Mlp;
use crate::rsmi::{RsmiIndex, RsmiStructure};
use crate::rtree::{Ir2Tree, RStarTreeIf};

pub const MAGIC: &[u8; 5] = b"STIX1";

#[derive(Serialize, Deserialize)]
struct ObjectsSection {
    objects: Vec<SpatioTextualObject>,
    normalization: Option<Normalization>,
}

#[derive(Serialize, Deserialize)]
enum Structure {
    RStarIf(RStarTreeIf),
    Ir2(Ir2Tree),
    Rsmi(RsmiStructure),
}

#[derive(Serialize, Deserialize)]
struct StructureSection {
    meta: BuildMeta,
    structure: Structure,
}

fn encode<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    bincode::serialize(value).map_err(|e| StixError::Format(e.to_string()))
}

fn decode<T: DeserializeOwned>(bytes: &[u8], what: &str) -> Result<T> {
    bincode::deserialize(bytes).map_err(|e| StixError::Format(format!("{what} section: {e}")))
}

pub fn write_snapshot(handle: &IndexHandle, mut out: impl Write) -> Result<()> {
    let data = handle.dataset();
    let (structure, models): (Structure, &[Mlp]) = match handle.index() {
        IndexImpl::RStarIf(t) => (Structure::RStarIf(t.clone()), &[]),
        IndexImpl::Ir2(t) => (Structure::Ir2(t.clone()), &[]),
        IndexImpl::Rsmi(r) => (Structure::Rsmi(r.structure().clone()), r.models()),
    };
    let sections = [
        encode(data.vocabulary())?,
        encode(&ObjectsSection {
            objects: data.objects().to_vec(),
            normalization: data.normalization().copied(),
        })?,
        encode(&StructureSection {
            meta: handle.meta().clone(),
            structure,
        })?,
        encode(&models)?,
    ];
    out.write_all(MAGIC)?;
    out.write_all(&[handle.variant().tag()])?;
    for s in &sections {
        out.write_all(&(s.len() as u64).to_le_bytes())?;
        out.write_all(s)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(mut input: impl Read) -> Result<IndexHandle> {
    let mut head = [0u8; 6];
    input
        .read_exact(&mut head)
        .map_err(|_| StixError::Format("file too short for a snapshot header".into()))?;
    if &head[..5] != MAGIC {
        return Err(StixError::Format("bad magic bytes; not a stix snapshot".into()));
    }
    let variant = IndexVariant::from_tag(head[5])
        .ok_or_else(|| StixError::Format(format!("unknown variant tag {}", head[5])))?;
    let mut section = |name: &str| -> Result<Vec<u8>> {
        let mut len = [0u8; 8];
        input
            .read_exact(&mut len)
            .map_err(|_| StixError::Format(format!("truncated before {name} section")))?;
        let len = u64::from_le_bytes(len);
        let mut buf = Vec::new();
        (&mut input).take(len).read_to_end(&mut buf)?;
        if buf.len() as u64 != len {
            return Err(StixError::Format(format!("truncated {name} section")));
        }
        Ok(buf)
    };
    let vocab: KeywordVocabulary = decode(&section("vocabulary")?, "vocabulary")?;
    let objects: ObjectsSection = decode(&section("objects")?, "objects")?;
    let structure: StructureSection = decode(&section("structure")?, "structure")?;
    let models: Vec<Mlp> = decode(&section("models")?, "models")?;

    let data = Arc::new(Dataset::from_parts(objects.objects, vocab, objects.normalization)?);
    let index = match structure.structure {
        Structure::RStarIf(t) => IndexImpl::RStarIf(t),
        Structure::Ir2(t) => IndexImpl::Ir2(t),
        Structure::Rsmi(s) => IndexImpl::Rsmi(RsmiIndex::from_parts(s, models)?),
    };
    IndexHandle::from_parts(variant, data, index, structure.meta)
}

pub fn snapshot_save(handle: &IndexHandle, path: impl AsRef<Path>) -> Result<()> {
    write_snapshot(handle, BufWriter::new(File::create(path)?))
}

pub fn snapshot_load(path: impl AsRef<Path>) -> Result<IndexHandle> {
    read_snapshot(BufReader::new(File::open(path)?))
}
