//! Molecule handling: SMILES parsing into heavy-atom graphs and folded
//! circular (Morgan) fingerprints over those graphs.

mod fingerprint;
mod smiles;

pub use fingerprint::{morgan_fingerprint, FingerprintBits, FingerprintError, DEFAULT_NBITS, DEFAULT_RADIUS};
pub use smiles::{parse_smiles, SmilesError, SmilesErrorKind};

/// Bond multiplicity. Aromatic bonds are kept distinct from the three
/// integer orders because both the implicit-hydrogen rules and the
/// fingerprint invariants treat them differently.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Stable small integer used in environment hashing.
    pub fn code(self) -> u64 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    /// Contribution to an atom's valence sum. Aromatic bonds count 1; the
    /// delocalized extra for aromatic carbon/boron is handled at the atom
    /// level by the parser's hydrogen rules.
    fn valence_units(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

/// One heavy atom of a parsed molecule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    /// Atomic number (6 = carbon, ...).
    pub element: u8,
    pub charge: i32,
    pub aromatic: bool,
    /// Attached hydrogens: explicit bracket count, or derived from default
    /// valences for organic-subset atoms.
    pub hydrogens: u8,
    /// Number of explicit heavy-atom neighbors.
    pub degree: u8,
    /// Whether the atom lies on any cycle.
    pub in_ring: bool,
}

/// An undirected bond between two atoms, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

/// Heavy-atom graph of one molecule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

impl MolecularGraph {
    /// Neighbor list: for each atom, the (neighbor index, bond order) pairs.
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondOrder)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for bond in &self.bonds {
            adj[bond.a].push((bond.b, bond.order));
            adj[bond.b].push((bond.a, bond.order));
        }
        adj
    }
}

/// Element symbols indexed by atomic number (index 0 unused).
const ELEMENT_SYMBOLS: [&str; 119] = [
    "", "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S",
    "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
    "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd",
    "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg",
    "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Atomic number for an exact-case element symbol.
pub fn atomic_number(symbol: &str) -> Option<u8> {
    ELEMENT_SYMBOLS
        .iter()
        .position(|&s| s == symbol && !s.is_empty())
        .map(|n| n as u8)
}

/// Element symbol for an atomic number.
pub fn element_symbol(number: u8) -> &'static str {
    ELEMENT_SYMBOLS.get(number as usize).copied().unwrap_or("")
}
