//! A SMILES reader for the organic subset: bare atoms B/C/N/O/P/S/F/Cl/Br/I,
//! aromatic lowercase forms, bracket atoms with isotope/charge/explicit-H
//! fields, branches, bond symbols `- = # :`, ring closures `0`–`9` and `%nn`,
//! and `.` fragment separators. Stereo markers (`/`, `\`, `@`), isotopes, and
//! atom classes are accepted and ignored. Every rejection carries the byte
//! offset it was detected at.

use std::collections::HashMap;

use thiserror::Error;

use super::{atomic_number, Atom, Bond, BondOrder, MolecularGraph};

/// Why a SMILES string was rejected.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    EmptyInput,
    #[error("unknown atom symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("branch opened before any atom")]
    BranchBeforeAtom,
    #[error("ring closure digit before any atom")]
    RingBeforeAtom,
    #[error("ring closure {0} never closed")]
    UnclosedRing(u16),
    #[error("ring closure bond symbols disagree")]
    ConflictingRingBond,
    #[error("ring closure would bond an atom to itself")]
    SelfBond,
    #[error("duplicate bond between the same atoms")]
    DuplicateBond,
    #[error("bond symbol with nothing to attach to")]
    DanglingBond,
    #[error("bracket atom never closed")]
    UnclosedBracket,
    #[error("malformed bracket atom")]
    BadBracket,
    #[error("`%` ring closure needs two digits")]
    BadRingNumber,
    #[error("explicit hydrogen atoms are not supported (write them as bracket H counts)")]
    ExplicitHydrogenAtom,
}

/// A rejected SMILES string: what went wrong and where.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

fn err<T>(offset: usize, kind: SmilesErrorKind) -> Result<T, SmilesError> {
    Err(SmilesError { offset, kind })
}

/// Default valences used to derive implicit hydrogen counts for bare
/// organic-subset atoms, keyed by atomic number. The smallest valence not
/// smaller than the bond-order sum wins; hypervalent sums get no hydrogens.
fn default_valences(element: u8) -> &'static [u8] {
    match element {
        5 => &[3],        // B
        6 => &[4],        // C
        7 => &[3, 5],     // N
        8 => &[2],        // O
        15 => &[3, 5],    // P
        16 => &[2, 4, 6], // S
        9 | 17 | 35 | 53 => &[1], // F, Cl, Br, I
        _ => &[],
    }
}

/// An atom as collected during the scan, before hydrogen/ring finalization.
struct PendingAtom {
    element: u8,
    charge: i32,
    aromatic: bool,
    /// `Some` for bracket atoms (explicit count, possibly 0); `None` means
    /// derive from default valences.
    explicit_h: Option<u8>,
}

struct RingOpen {
    atom: usize,
    bond: Option<BondOrder>,
    offset: usize,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<PendingAtom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending_bond: Option<(BondOrder, usize)>,
    branch_stack: Vec<(usize, usize)>, // (restore atom, '(' offset)
    rings: HashMap<u16, RingOpen>,
}

/// Parse one SMILES string into a heavy-atom molecular graph.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    if text.is_empty() {
        return err(0, SmilesErrorKind::EmptyInput);
    }
    let mut parser = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        pending_bond: None,
        branch_stack: Vec::new(),
        rings: HashMap::new(),
    };
    parser.run()?;
    Ok(parser.finish())
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let at = self.pos;
            match c {
                b'A'..=b'Z' => self.bare_atom(at)?,
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                    self.pos += 1;
                    let symbol = (c as char).to_ascii_uppercase().to_string();
                    let element = atomic_number(&symbol)
                        .expect("aromatic subset letters are all valid elements");
                    self.add_atom(
                        PendingAtom { element, charge: 0, aromatic: true, explicit_h: None },
                        at,
                    )?;
                }
                b'[' => {
                    let atom = self.bracket_atom(at)?;
                    self.add_atom(atom, at)?;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending_bond.is_some() {
                        return err(at, SmilesErrorKind::DanglingBond);
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single, // '-' and ignored stereo slashes
                    };
                    self.pending_bond = Some((order, at));
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_closure((c - b'0') as u16, at)?;
                }
                b'%' => {
                    let d1 = self.bytes.get(at + 1).filter(|c| c.is_ascii_digit());
                    let d2 = self.bytes.get(at + 2).filter(|c| c.is_ascii_digit());
                    match (d1, d2) {
                        (Some(&a), Some(&b)) => {
                            self.pos += 3;
                            self.ring_closure(((a - b'0') as u16) * 10 + (b - b'0') as u16, at)?
                        }
                        _ => return err(at, SmilesErrorKind::BadRingNumber),
                    }
                }
                b'(' => {
                    if self.pending_bond.is_some() {
                        let offset = self.pending_bond.as_ref().map(|(_, o)| *o).unwrap_or(at);
                        return err(offset, SmilesErrorKind::DanglingBond);
                    }
                    match self.prev {
                        Some(p) => self.branch_stack.push((p, at)),
                        None => return err(at, SmilesErrorKind::BranchBeforeAtom),
                    }
                    self.pos += 1;
                }
                b')' => {
                    if let Some((_, offset)) = self.pending_bond {
                        return err(offset, SmilesErrorKind::DanglingBond);
                    }
                    match self.branch_stack.pop() {
                        Some((restore, _)) => self.prev = Some(restore),
                        None => return err(at, SmilesErrorKind::UnbalancedParenthesis),
                    }
                    self.pos += 1;
                }
                b'.' => {
                    if let Some((_, offset)) = self.pending_bond {
                        return err(offset, SmilesErrorKind::DanglingBond);
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                other => {
                    return err(at, SmilesErrorKind::UnknownSymbol((other as char).to_string()))
                }
            }
        }
        if let Some((_, offset)) = self.pending_bond {
            return err(offset, SmilesErrorKind::DanglingBond);
        }
        if let Some(&(_, offset)) = self.branch_stack.first() {
            return err(offset, SmilesErrorKind::UnbalancedParenthesis);
        }
        if let Some((digit, open)) = self
            .rings
            .iter()
            .min_by_key(|(_, open)| open.offset)
            .map(|(d, open)| (*d, open.offset))
        {
            return err(open, SmilesErrorKind::UnclosedRing(digit));
        }
        if self.atoms.is_empty() {
            return err(0, SmilesErrorKind::EmptyInput);
        }
        Ok(())
    }

    /// Uppercase atom outside brackets: only the ten organic-subset elements.
    fn bare_atom(&mut self, at: usize) -> Result<(), SmilesError> {
        let c = self.bytes[self.pos];
        let next = self.bytes.get(self.pos + 1).copied();
        let (symbol, width) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", 2),
            (b'B', Some(b'r')) => ("Br", 2),
            _ => {
                let s = match c {
                    b'B' => "B",
                    b'C' => "C",
                    b'N' => "N",
                    b'O' => "O",
                    b'P' => "P",
                    b'S' => "S",
                    b'F' => "F",
                    b'I' => "I",
                    _ => {
                        return err(at, SmilesErrorKind::UnknownSymbol((c as char).to_string()))
                    }
                };
                (s, 1)
            }
        };
        self.pos += width;
        let element = atomic_number(symbol).expect("organic subset symbols are valid");
        self.add_atom(PendingAtom { element, charge: 0, aromatic: false, explicit_h: None }, at)
    }

    /// Bracket atom: `[isotope? symbol chirality? Hcount? charge? :class?]`.
    fn bracket_atom(&mut self, open_at: usize) -> Result<PendingAtom, SmilesError> {
        self.pos += 1; // consume '['
        // isotope digits (ignored)
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let sym_at = self.pos;
        let c = match self.peek() {
            Some(c) => c,
            None => return err(open_at, SmilesErrorKind::UnclosedBracket),
        };
        let (element, aromatic) = match c {
            b'a'..=b'z' => {
                // aromatic: one of b c n o p s, or two-letter se/as
                let two: &[u8] = &self.bytes[self.pos..(self.pos + 2).min(self.bytes.len())];
                let (symbol, width, elem_sym) = match two {
                    [b's', b'e'] => ("se", 2, "Se"),
                    [b'a', b's'] => ("as", 2, "As"),
                    _ => match c {
                        b'b' => ("b", 1, "B"),
                        b'c' => ("c", 1, "C"),
                        b'n' => ("n", 1, "N"),
                        b'o' => ("o", 1, "O"),
                        b'p' => ("p", 1, "P"),
                        b's' => ("s", 1, "S"),
                        _ => {
                            return err(
                                sym_at,
                                SmilesErrorKind::UnknownSymbol((c as char).to_string()),
                            )
                        }
                    },
                };
                let _ = symbol;
                self.pos += width;
                (atomic_number(elem_sym).expect("aromatic subset"), true)
            }
            b'A'..=b'Z' => {
                // longest exact-case match: uppercase plus optional lowercase
                let mut end = self.pos + 1;
                if self.bytes.get(end).is_some_and(|c| c.is_ascii_lowercase()) {
                    end += 1;
                }
                let two = std::str::from_utf8(&self.bytes[self.pos..end]).expect("ascii");
                let (symbol, width) = match atomic_number(two) {
                    Some(_) if two.len() == 2 => (two.to_string(), 2),
                    _ => {
                        let one = &two[..1];
                        match atomic_number(one) {
                            Some(_) => (one.to_string(), 1),
                            None => {
                                return err(
                                    sym_at,
                                    SmilesErrorKind::UnknownSymbol(two.to_string()),
                                )
                            }
                        }
                    }
                };
                self.pos += width;
                let element = atomic_number(&symbol).expect("checked above");
                if element == 1 {
                    return err(sym_at, SmilesErrorKind::ExplicitHydrogenAtom);
                }
                (element, false)
            }
            _ => return err(sym_at, SmilesErrorKind::BadBracket),
        };
        // chirality (ignored)
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }
        // explicit hydrogen count
        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = 1;
            let mut digits = String::new();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                digits.push(self.bytes[self.pos] as char);
                self.pos += 1;
            }
            if !digits.is_empty() {
                hydrogens = digits.parse().map_err(|_| SmilesError {
                    offset: sym_at,
                    kind: SmilesErrorKind::BadBracket,
                })?;
            }
        }
        // formal charge: repeated signs or a sign with digits
        let mut charge = 0i32;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            let mut count = 0;
            while self.peek() == Some(sign) {
                count += 1;
                self.pos += 1;
            }
            let mut digits = String::new();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                digits.push(self.bytes[self.pos] as char);
                self.pos += 1;
            }
            charge = if digits.is_empty() {
                unit * count
            } else if count == 1 {
                unit * digits.parse::<i32>().map_err(|_| SmilesError {
                    offset: sym_at,
                    kind: SmilesErrorKind::BadBracket,
                })?
            } else {
                return err(self.pos, SmilesErrorKind::BadBracket);
            };
        }
        // atom class (ignored)
        if self.peek() == Some(b':') {
            self.pos += 1;
            let digit_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == digit_start {
                return err(digit_start, SmilesErrorKind::BadBracket);
            }
        }
        match self.peek() {
            Some(b']') => {
                self.pos += 1;
                Ok(PendingAtom { element, charge, aromatic, explicit_h: Some(hydrogens) })
            }
            Some(_) => err(self.pos, SmilesErrorKind::BadBracket),
            None => err(open_at, SmilesErrorKind::UnclosedBracket),
        }
    }

    fn add_atom(&mut self, atom: PendingAtom, at: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some((order, _)) = self.pending_bond.take() {
            match self.prev {
                Some(p) => self.push_bond(p, idx, Some(order), at)?,
                None => return err(at, SmilesErrorKind::DanglingBond),
            }
        } else if let Some(p) = self.prev {
            self.push_bond(p, idx, None, at)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn push_bond(
        &mut self,
        a: usize,
        b: usize,
        explicit: Option<BondOrder>,
        at: usize,
    ) -> Result<(), SmilesError> {
        if a == b {
            return err(at, SmilesErrorKind::SelfBond);
        }
        let (lo, hi) = (a.min(b), a.max(b));
        if self.bonds.iter().any(|bond| bond.a == lo && bond.b == hi) {
            return err(at, SmilesErrorKind::DuplicateBond);
        }
        let order = explicit.unwrap_or_else(|| {
            if self.atoms[a].aromatic && self.atoms[b].aromatic {
                BondOrder::Aromatic
            } else {
                BondOrder::Single
            }
        });
        self.bonds.push(Bond { a: lo, b: hi, order });
        Ok(())
    }

    fn ring_closure(&mut self, digit: u16, at: usize) -> Result<(), SmilesError> {
        let current = match self.prev {
            Some(p) => p,
            None => return err(at, SmilesErrorKind::RingBeforeAtom),
        };
        let pending = self.pending_bond.take().map(|(order, _)| order);
        match self.rings.remove(&digit) {
            Some(open) => {
                let explicit = match (open.bond, pending) {
                    (Some(x), Some(y)) if x != y => {
                        return err(at, SmilesErrorKind::ConflictingRingBond)
                    }
                    (x, y) => x.or(y),
                };
                self.push_bond(open.atom, current, explicit, at)
            }
            None => {
                self.rings.insert(digit, RingOpen { atom: current, bond: pending, offset: at });
                Ok(())
            }
        }
    }

    /// Derive hydrogen counts, degrees, and ring membership.
    fn finish(self) -> MolecularGraph {
        let n = self.atoms.len();
        let mut degree = vec![0u8; n];
        let mut valence_sum = vec![0u8; n];
        for bond in &self.bonds {
            degree[bond.a] += 1;
            degree[bond.b] += 1;
            valence_sum[bond.a] += bond.order.valence_units();
            valence_sum[bond.b] += bond.order.valence_units();
        }
        let in_ring = ring_membership(n, &self.bonds);
        let atoms = self
            .atoms
            .into_iter()
            .enumerate()
            .map(|(i, pending)| {
                let hydrogens = match pending.explicit_h {
                    Some(h) => h,
                    // Aromatic C and B take part in one delocalized double
                    // bond, so their valence sum gets +1 (benzene carbons end
                    // up with one H). Bare aromatic N/P/O/S never carry
                    // implicit hydrogens: pyridine-type and substituted
                    // nitrogens have none, and an aromatic N-H must be
                    // written explicitly as [nH].
                    None if pending.aromatic => match pending.element {
                        5 | 6 => implicit_h(pending.element, valence_sum[i] + 1),
                        _ => 0,
                    },
                    None => implicit_h(pending.element, valence_sum[i]),
                };
                Atom {
                    element: pending.element,
                    charge: pending.charge,
                    aromatic: pending.aromatic,
                    hydrogens,
                    degree: degree[i],
                    in_ring: in_ring[i],
                }
            })
            .collect();
        MolecularGraph { atoms, bonds: self.bonds }
    }
}

/// Hydrogens needed to reach the smallest default valence not below the
/// bond-order sum; hypervalent atoms and elements without defaults get none.
fn implicit_h(element: u8, valence_sum: u8) -> u8 {
    default_valences(element)
        .iter()
        .find(|&&v| v >= valence_sum)
        .map(|&v| v - valence_sum)
        .unwrap_or(0)
}

/// An atom is in a ring iff it touches a bond whose endpoints stay connected
/// after the bond is removed. Molecules are small, so the quadratic
/// remove-and-search test is plenty and obviously correct.
fn ring_membership(n: usize, bonds: &[Bond]) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for (ei, bond) in bonds.iter().enumerate() {
        adj[bond.a].push((bond.b, ei));
        adj[bond.b].push((bond.a, ei));
    }
    let mut in_ring = vec![false; n];
    for (ei, bond) in bonds.iter().enumerate() {
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([bond.a]);
        seen[bond.a] = true;
        while let Some(v) = queue.pop_front() {
            for &(w, edge) in &adj[v] {
                if edge != ei && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if seen[bond.b] {
            in_ring[bond.a] = true;
            in_ring[bond.b] = true;
        }
    }
    in_ring
}
