use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grid::{save_pattern, PbmFormat};
use crate::grid::{MaskSpec, PatternGrid};

pub type PatternHash = [u8; 32];

/// SHA-256 of the canonical P4 serialization.
pub fn canonical_hash(grid: &PatternGrid) -> PatternHash {
    Sha256::digest(save_pattern(grid, PbmFormat::P4)).into()
}

pub fn hash_hex(hash: &PatternHash) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Where a library entry came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub iteration: u32,
    pub parent_id: Option<usize>,
    pub mask: Option<MaskSpec>,
    pub backend: String,
}

impl Provenance {
    pub fn starter(backend: &str) -> Self {
        Self {
            iteration: 0,
            parent_id: None,
            mask: None,
            backend: backend.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub id: usize,
    pub grid: PatternGrid,
    pub hash: PatternHash,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(usize),
    Duplicate(usize),
}

impl InsertOutcome {
    pub fn id(self) -> usize {
        match self {
            Self::Inserted(id) | Self::Duplicate(id) => id,
        }
    }

    pub fn is_new(self) -> bool {
        matches!(self, Self::Inserted(_))
    }
}

/// Insertion-ordered set of unique patterns. Uniqueness is by hash with a
/// byte-level comparison on hash hits.
#[derive(Debug, Clone, Default)]
pub struct PatternLibrary {
    entries: Vec<LibraryEntry>,
    by_hash: HashMap<PatternHash, Vec<usize>>,
}

impl PatternLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> Option<&LibraryEntry> {
        self.entries.get(id)
    }

    pub fn find(&self, grid: &PatternGrid) -> Option<usize> {
        self.find_hashed(grid, &canonical_hash(grid))
    }

    fn find_hashed(&self, grid: &PatternGrid, hash: &PatternHash) -> Option<usize> {
        self.by_hash
            .get(hash)?
            .iter()
            .copied()
            .find(|&id| self.entries[id].grid == *grid)
    }

    pub fn contains(&self, grid: &PatternGrid) -> bool {
        self.find(grid).is_some()
    }

    pub fn insert(&mut self, grid: PatternGrid, provenance: Provenance) -> InsertOutcome {
        let hash = canonical_hash(&grid);
        if let Some(id) = self.find_hashed(&grid, &hash) {
            return InsertOutcome::Duplicate(id);
        }
        let id = self.entries.len();
        self.by_hash.entry(hash).or_default().push(id);
        self.entries.push(LibraryEntry {
            id,
            grid,
            hash,
            provenance,
        });
        InsertOutcome::Inserted(id)
    }

    pub fn grids(&self) -> impl Iterator<Item = &PatternGrid> {
        self.entries.iter().map(|e| &e.grid)
    }
}
