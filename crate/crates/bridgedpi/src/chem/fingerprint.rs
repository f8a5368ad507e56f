//! Folded circular (Morgan) fingerprints over parsed molecules.
//!
//! Environment identifiers are built by iterative neighborhood hashing: the
//! radius-0 id of an atom hashes its local invariants (element, heavy degree,
//! formal charge, hydrogen count, aromatic flag, ring flag); the radius-r id
//! hashes the radius and the previous id of the atom together with the sorted
//! (bond code, neighbor previous id) pairs. Every identifier collected for
//! r = 0..=radius sets bit `id mod nbits` — idempotently, so colliding
//! environments cost nothing.
//!
//! The mixing function is a fixed splitmix64-style finalizer folded over the
//! value sequence; all constants live in this file so the bit patterns are
//! reproducible forever. The dump format is a hex string of nbits/4 digits
//! with bit 0 as the most significant bit of the first digit.

use thiserror::Error;

use super::MolecularGraph;

/// Default fingerprint width, in bits.
pub const DEFAULT_NBITS: usize = 1024;
/// Default neighborhood radius (two bond hops).
pub const DEFAULT_RADIUS: u32 = 2;

/// Invalid fingerprint parameters.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("nbits must be a positive power of two, got {0}")]
    BadWidth(usize),
    #[error("hex dump has {got} digits, expected {expected}")]
    BadHexLength { got: usize, expected: usize },
    #[error("invalid hex digit `{0}`")]
    BadHexDigit(char),
}

/// A fixed-width bit vector, packed 8 bits per byte with bit 0 in the most
/// significant position of byte 0 (matching the hex dump convention).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FingerprintBits {
    bytes: Vec<u8>,
    nbits: usize,
}

impl FingerprintBits {
    /// All-zero fingerprint. Width must be a positive power of two (and at
    /// least 8 so the packed representation has no ragged tail).
    pub fn zeros(nbits: usize) -> Result<Self, FingerprintError> {
        if nbits < 8 || !nbits.is_power_of_two() {
            return Err(FingerprintError::BadWidth(nbits));
        }
        Ok(FingerprintBits { bytes: vec![0; nbits / 8], nbits })
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.nbits, "bit {bit} out of range {}", self.nbits);
        self.bytes[bit / 8] |= 0x80 >> (bit % 8);
    }

    pub fn get(&self, bit: usize) -> bool {
        assert!(bit < self.nbits, "bit {bit} out of range {}", self.nbits);
        self.bytes[bit / 8] & (0x80 >> (bit % 8)) != 0
    }

    pub fn popcount(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Indices of all set bits, ascending.
    pub fn ones(&self) -> Vec<usize> {
        (0..self.nbits).filter(|&i| self.get(i)).collect()
    }

    /// 0/1 entries as floats, for feeding the model.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.nbits).map(|i| f64::from(u8::from(self.get(i)))).collect()
    }

    /// Hex dump: nbits/4 digits, bit 0 = MSB of the first digit.
    pub fn to_hex(&self) -> String {
        self.bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parse a hex dump produced by [`Self::to_hex`].
    pub fn from_hex(hex: &str, nbits: usize) -> Result<Self, FingerprintError> {
        let mut fp = Self::zeros(nbits)?;
        if hex.len() != nbits / 4 {
            return Err(FingerprintError::BadHexLength { got: hex.len(), expected: nbits / 4 });
        }
        for (i, chunk) in hex.as_bytes().chunks(2).enumerate() {
            let s = std::str::from_utf8(chunk).expect("ascii hex");
            fp.bytes[i] = u8::from_str_radix(s, 16).map_err(|_| {
                FingerprintError::BadHexDigit(s.chars().next().unwrap_or('?'))
            })?;
        }
        Ok(fp)
    }
}

// Hash constants, fixed for reproducibility of every stored fingerprint.
const HASH_STATE_SEED: u64 = 0x243f_6a88_85a3_08d3; // pi fractional digits
const HASH_INPUT_MULT: u64 = 0x9e37_79b9_7f4a_7c15; // golden-ratio increment
const HASH_INPUT_ADD: u64 = 0x2545_f491_4f6c_dd1d;

/// splitmix64 finalizer.
fn diffuse(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn absorb(state: u64, value: u64) -> u64 {
    diffuse(state ^ value.wrapping_mul(HASH_INPUT_MULT).wrapping_add(HASH_INPUT_ADD))
}

/// Hash a value sequence into one 64-bit identifier.
pub(crate) fn hash_sequence(values: &[u64]) -> u64 {
    values.iter().fold(HASH_STATE_SEED, |state, &v| absorb(state, v))
}

/// Charge encoded into an unsigned hash input with an offset, so the common
/// −1/0/+1 cases stay small and distinct.
pub(crate) fn encode_charge(charge: i32) -> u64 {
    (charge as i64 + 16) as u64
}

/// The radius-0 identifier: a hash of the atom's local invariants.
pub(crate) fn atom_invariant(mol: &MolecularGraph, idx: usize) -> u64 {
    let a = &mol.atoms[idx];
    hash_sequence(&[
        a.element as u64,
        a.degree as u64,
        encode_charge(a.charge),
        a.hydrogens as u64,
        u64::from(a.aromatic),
        u64::from(a.in_ring),
    ])
}

/// Folded Morgan fingerprint of a molecule.
pub fn morgan_fingerprint(
    mol: &MolecularGraph,
    radius: u32,
    nbits: usize,
) -> Result<FingerprintBits, FingerprintError> {
    let mut fp = FingerprintBits::zeros(nbits)?;
    let n = mol.atoms.len();
    let adj = mol.adjacency();

    let mut ids: Vec<u64> = (0..n).map(|i| atom_invariant(mol, i)).collect();
    for &id in &ids {
        fp.set((id % nbits as u64) as usize);
    }
    for r in 1..=radius {
        let mut next = vec![0u64; n];
        for i in 0..n {
            let mut pairs: Vec<(u64, u64)> =
                adj[i].iter().map(|&(nbr, order)| (order.code(), ids[nbr])).collect();
            pairs.sort_unstable();
            let mut seq = Vec::with_capacity(2 + pairs.len() * 2);
            seq.push(r as u64);
            seq.push(ids[i]);
            for (code, id) in pairs {
                seq.push(code);
                seq.push(id);
            }
            next[i] = hash_sequence(&seq);
        }
        ids = next;
        for &id in &ids {
            fp.set((id % nbits as u64) as usize);
        }
    }
    Ok(fp)
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    #[test]
    fn methane_radius_zero_sets_exactly_one_bit() {
        let mol = parse_smiles("C").unwrap();
        let fp = morgan_fingerprint(&mol, 0, 1024).unwrap();
        assert_eq!(fp.popcount(), 1);
    }

    #[test]
    fn atom_order_does_not_change_the_bits() {
        let pairs = [
            ("CCO", "OCC"),
            ("CC(C)C", "C(C)(C)C"),
            ("c1ccccc1O", "Oc1ccccc1"),
            ("N#CC", "CC#N"),
            ("C1CC1Cl", "ClC1CC1"),
        ];
        for (a, b) in pairs {
            let fa = morgan_fingerprint(&parse_smiles(a).unwrap(), 2, 1024).unwrap();
            let fb = morgan_fingerprint(&parse_smiles(b).unwrap(), 2, 1024).unwrap();
            assert_eq!(fa, fb, "{a} vs {b}");
        }
    }

    #[test]
    fn popcount_is_monotone_in_radius() {
        let smiles = ["CCO", "c1ccccc1", "CC(=O)Oc1ccccc1C(=O)O", "CN1CCC[C@H]1c1cccnc1"];
        for s in smiles {
            let mol = parse_smiles(s).unwrap();
            let mut last = 0;
            for r in 0..=4 {
                let fp = morgan_fingerprint(&mol, r, 1024).unwrap();
                assert!(
                    fp.popcount() >= last,
                    "{s}: popcount dropped from {last} at radius {r}"
                );
                // subset property: every bit at radius r-1 is set at r
                if r > 0 {
                    let prev = morgan_fingerprint(&mol, r - 1, 1024).unwrap();
                    for bit in prev.ones() {
                        assert!(fp.get(bit), "{s}: bit {bit} lost at radius {r}");
                    }
                }
                last = fp.popcount();
            }
        }
    }

    #[test]
    fn different_molecules_differ() {
        let a = morgan_fingerprint(&parse_smiles("CCO").unwrap(), 2, 1024).unwrap();
        let b = morgan_fingerprint(&parse_smiles("CCN").unwrap(), 2, 1024).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn width_must_be_a_power_of_two() {
        let mol = parse_smiles("CC").unwrap();
        assert!(matches!(
            morgan_fingerprint(&mol, 2, 1000),
            Err(FingerprintError::BadWidth(1000))
        ));
        assert!(matches!(FingerprintBits::zeros(0), Err(FingerprintError::BadWidth(0))));
    }

    #[test]
    fn hex_dump_puts_bit_zero_first() {
        let mut fp = FingerprintBits::zeros(16).unwrap();
        fp.set(0);
        assert_eq!(fp.to_hex(), "8000");
        fp.set(15);
        assert_eq!(fp.to_hex(), "8001");
        assert_eq!(fp.to_hex().len(), 16 / 4);
    }

    #[test]
    fn hex_round_trip() {
        let mol = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let fp = morgan_fingerprint(&mol, 2, 1024).unwrap();
        let hex = fp.to_hex();
        assert_eq!(hex.len(), 256);
        let back = FingerprintBits::from_hex(&hex, 1024).unwrap();
        assert_eq!(fp, back);
    }

    #[test]
    fn bad_hex_is_rejected() {
        assert!(matches!(
            FingerprintBits::from_hex("zz", 8),
            Err(FingerprintError::BadHexDigit(_))
        ));
        assert!(matches!(
            FingerprintBits::from_hex("00", 16),
            Err(FingerprintError::BadHexLength { got: 2, expected: 4 })
        ));
    }
}
