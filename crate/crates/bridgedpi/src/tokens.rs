//! Character-level token encoding for the two CNN branches. Id 0 is padding,
//! id 1 is the unknown character; real vocabulary entries start at 2.

use std::collections::HashMap;

/// Padding token id.
pub const PAD_ID: u32 = 0;
/// Unknown-character token id.
pub const UNK_ID: u32 = 1;

/// A fixed character-to-id table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    chars: String,
    map: HashMap<char, u32>,
}

impl Vocabulary {
    /// Build from the ordered character set; ids are assigned from 2 in the
    /// given order. Duplicate characters keep their first id.
    pub fn from_chars(chars: &str) -> Self {
        let mut map = HashMap::new();
        let mut id = 2;
        for c in chars.chars() {
            map.entry(c).or_insert_with(|| {
                let assigned = id;
                id += 1;
                assigned
            });
        }
        Vocabulary { chars: chars.to_string(), map }
    }

    /// Number of ids including pad and unknown.
    pub fn size(&self) -> usize {
        self.map.len() + 2
    }

    /// The ordered character set, for serialization.
    pub fn chars(&self) -> &str {
        &self.chars
    }

    pub fn id_of(&self, c: char) -> u32 {
        self.map.get(&c).copied().unwrap_or(UNK_ID)
    }
}

/// The 20 canonical amino acids.
pub fn protein_vocabulary() -> Vocabulary {
    Vocabulary::from_chars(crate::protein::AMINO_ACIDS)
}

/// Characters appearing in the SMILES subset accepted by the parser: organic
/// and aromatic atoms, the second letters of Cl/Br, digits, and punctuation.
pub fn smiles_vocabulary() -> Vocabulary {
    Vocabulary::from_chars("BCNOPSFIHbcnopslr0123456789%()[]=#:+-/\\.@")
}

/// Encode a string to exactly `max_len` ids: truncate, map unknown
/// characters to [`UNK_ID`], pad the tail with [`PAD_ID`].
pub fn encode_sequence(text: &str, max_len: usize, vocab: &Vocabulary) -> Vec<u32> {
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut ids = Vec::with_capacity(max_len);
    for c in text.chars().take(max_len) {
        ids.push(vocab.id_of(c));
    }
    ids.resize(max_len, PAD_ID);
    ids
}
