//! Shared test oracles. Everything here is an independent reference path:
//! the Morgan environment enumerator is recursive where the library is
//! iterative (with its own copy of the hash constants), the AUC is the
//! quadratic definition, the SMILES writer plus isomorphism check closes the
//! parser round trip, and the power iteration bounds GNN spectra.

#![allow(dead_code)]

use bridgedpi::chem::{BondOrder, MolecularGraph};

// --- Morgan environment oracle -------------------------------------------

// Reference copies of the fingerprint hash constants. Kept separate from the
// library on purpose: if the implementation drifts, fixtures must fail.
const SEED: u64 = 0x243f_6a88_85a3_08d3;
const MULT: u64 = 0x9e37_79b9_7f4a_7c15;
const ADD: u64 = 0x2545_f491_4f6c_dd1d;

fn diffuse(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_seq(values: &[u64]) -> u64 {
    values
        .iter()
        .fold(SEED, |h, &v| diffuse(h ^ v.wrapping_mul(MULT).wrapping_add(ADD)))
}

fn bond_code(order: BondOrder) -> u64 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Environment identifier of `atom` at `radius`, by direct recursion over
/// neighborhoods (no memoization, no iteration-order dependence).
pub fn oracle_environment(mol: &MolecularGraph, atom: usize, radius: u32) -> u64 {
    if radius == 0 {
        let a = &mol.atoms[atom];
        return hash_seq(&[
            a.element as u64,
            a.degree as u64,
            (a.charge as i64 + 16) as u64,
            a.hydrogens as u64,
            u64::from(a.aromatic),
            u64::from(a.in_ring),
        ]);
    }
    let mut pairs: Vec<(u64, u64)> = mol
        .bonds
        .iter()
        .filter_map(|b| {
            if b.a == atom {
                Some((bond_code(b.order), oracle_environment(mol, b.b, radius - 1)))
            } else if b.b == atom {
                Some((bond_code(b.order), oracle_environment(mol, b.a, radius - 1)))
            } else {
                None
            }
        })
        .collect();
    pairs.sort_unstable();
    let mut seq = vec![radius as u64, oracle_environment(mol, atom, radius - 1)];
    for (code, id) in pairs {
        seq.push(code);
        seq.push(id);
    }
    hash_seq(&seq)
}

/// All distinct environment identifiers up to `radius`.
pub fn oracle_environment_ids(mol: &MolecularGraph, radius: u32) -> std::collections::BTreeSet<u64> {
    let mut ids = std::collections::BTreeSet::new();
    for atom in 0..mol.atoms.len() {
        for r in 0..=radius {
            ids.insert(oracle_environment(mol, atom, r));
        }
    }
    ids
}

/// Expected fingerprint bit positions: every environment id folded mod nbits.
pub fn oracle_bits(mol: &MolecularGraph, radius: u32, nbits: usize) -> Vec<usize> {
    let set: std::collections::BTreeSet<usize> = oracle_environment_ids(mol, radius)
        .into_iter()
        .map(|id| (id % nbits as u64) as usize)
        .collect();
    set.into_iter().collect()
}

/// Render oracle bits as the library's hex dump format (bit 0 = MSB of the
/// first digit), without using the library's bit container.
pub fn oracle_hex(mol: &MolecularGraph, radius: u32, nbits: usize) -> String {
    let mut bytes = vec![0u8; nbits / 8];
    for bit in oracle_bits(mol, radius, nbits) {
        bytes[bit / 8] |= 0x80 >> (bit % 8);
    }
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// --- SMILES writer and graph isomorphism ----------------------------------

/// Emit a SMILES string for a parsed graph, bracketing every atom so no
/// implicit-valence reasoning is needed on the way out.
pub fn write_smiles(mol: &MolecularGraph) -> String {
    let n = mol.atoms.len();
    let adj = mol.adjacency();
    // classify edges into tree and ring-closure sets via DFS
    let mut visited = vec![false; n];
    let mut tree = vec![Vec::new(); n]; // child lists in visit order
    let mut closures: Vec<Vec<(usize, BondOrder, usize)>> = vec![Vec::new(); n]; // (digit, order, partner)
    let mut digit = 0usize;
    let mut roots = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        roots.push(start);
        visited[start] = true;
        // iterative DFS so deep chains cannot overflow the stack
        let mut order_stack = vec![(start, usize::MAX, 0usize)];
        while let Some((v, parent, next_idx)) = order_stack.pop() {
            if next_idx < adj[v].len() {
                order_stack.push((v, parent, next_idx + 1));
                let (w, order) = adj[v][next_idx];
                if w == parent {
                    continue;
                }
                if !visited[w] {
                    visited[w] = true;
                    tree[v].push(w);
                    order_stack.push((w, v, 0));
                } else if !closures[v].iter().any(|&(_, _, p)| p == w)
                    && !closures[w].iter().any(|&(_, _, p)| p == v)
                {
                    digit += 1;
                    closures[v].push((digit, order, w));
                    closures[w].push((digit, order, v));
                }
            }
        }
    }

    let bond_map: std::collections::HashMap<(usize, usize), BondOrder> = mol
        .bonds
        .iter()
        .map(|b| ((b.a.min(b.b), b.a.max(b.b)), b.order))
        .collect();
    let bond_of = |a: usize, b: usize| bond_map[&(a.min(b), a.max(b))];
    let default_order = |a: usize, b: usize| {
        if mol.atoms[a].aromatic && mol.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    };
    let bond_sym = |order: BondOrder| match order {
        BondOrder::Single => "-",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => ":",
    };

    fn atom_token(mol: &MolecularGraph, i: usize) -> String {
        let a = &mol.atoms[i];
        let sym = bridgedpi::chem::element_symbol(a.element);
        let sym = if a.aromatic { sym.to_lowercase() } else { sym.to_string() };
        let h = match a.hydrogens {
            0 => String::new(),
            1 => "H".to_string(),
            k => format!("H{k}"),
        };
        let charge = match a.charge {
            0 => String::new(),
            1 => "+".to_string(),
            -1 => "-".to_string(),
            c if c > 0 => format!("+{c}"),
            c => format!("{c}"),
        };
        format!("[{sym}{h}{charge}]")
    }

    fn emit(
        mol: &MolecularGraph,
        v: usize,
        parent: Option<usize>,
        tree: &[Vec<usize>],
        closures: &[Vec<(usize, BondOrder, usize)>],
        bond_of: &dyn Fn(usize, usize) -> BondOrder,
        default_order: &dyn Fn(usize, usize) -> BondOrder,
        bond_sym: &dyn Fn(BondOrder) -> &'static str,
        out: &mut String,
    ) {
        if let Some(p) = parent {
            let order = bond_of(p, v);
            if order != default_order(p, v) {
                out.push_str(bond_sym(order));
            }
        }
        out.push_str(&atom_token(mol, v));
        for &(digit, order, partner) in &closures[v] {
            if order != default_order(v, partner) {
                out.push_str(bond_sym(order));
            }
            if digit < 10 {
                out.push_str(&digit.to_string());
            } else {
                out.push_str(&format!("%{digit:02}"));
            }
        }
        let children = &tree[v];
        for (k, &c) in children.iter().enumerate() {
            let last = k + 1 == children.len();
            if !last {
                out.push('(');
            }
            emit(mol, c, Some(v), tree, closures, bond_of, default_order, bond_sym, out);
            if !last {
                out.push(')');
            }
        }
    }

    let mut out = String::new();
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        emit(mol, root, None, &tree, &closures, &bond_of, &default_order, &bond_sym, &mut out);
    }
    out
}

fn atom_signature(mol: &MolecularGraph, i: usize) -> (u8, i32, bool, u8, u8, bool) {
    let a = &mol.atoms[i];
    (a.element, a.charge, a.aromatic, a.hydrogens, a.degree, a.in_ring)
}

/// Exact graph isomorphism by backtracking, practical for the small
/// molecules the round-trip property uses (≤ 8 heavy atoms).
pub fn isomorphic(a: &MolecularGraph, b: &MolecularGraph) -> bool {
    let n = a.atoms.len();
    if n != b.atoms.len() || a.bonds.len() != b.bonds.len() {
        return false;
    }
    let mut sig_a: Vec<_> = (0..n).map(|i| atom_signature(a, i)).collect();
    let mut sig_b: Vec<_> = (0..n).map(|i| atom_signature(b, i)).collect();
    sig_a.sort_unstable();
    sig_b.sort_unstable();
    if sig_a != sig_b {
        return false;
    }
    let bonds_a: std::collections::HashMap<(usize, usize), BondOrder> =
        a.bonds.iter().map(|x| ((x.a, x.b), x.order)).collect();
    let bonds_b: std::collections::HashMap<(usize, usize), BondOrder> =
        b.bonds.iter().map(|x| ((x.a, x.b), x.order)).collect();

    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn assign(
        i: usize,
        n: usize,
        a: &MolecularGraph,
        b: &MolecularGraph,
        bonds_a: &std::collections::HashMap<(usize, usize), BondOrder>,
        bonds_b: &std::collections::HashMap<(usize, usize), BondOrder>,
        mapping: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if i == n {
            return true;
        }
        for j in 0..n {
            if used[j] || atom_signature(a, i) != atom_signature(b, j) {
                continue;
            }
            // all bonds from i to already-mapped atoms must exist in b with
            // the same order, and non-bonds must stay non-bonds
            let ok = (0..i).all(|k| {
                let ab = bonds_a.get(&(k.min(i), k.max(i)));
                let bb = bonds_b.get(&(mapping[k].min(j), mapping[k].max(j)));
                ab == bb
            });
            if !ok {
                continue;
            }
            mapping[i] = j;
            used[j] = true;
            if assign(i + 1, n, a, b, bonds_a, bonds_b, mapping, used) {
                return true;
            }
            mapping[i] = usize::MAX;
            used[j] = false;
        }
        false
    }
    assign(0, n, a, b, &bonds_a, &bonds_b, &mut mapping, &mut used)
}

// --- fixture loading ---------------------------------------------------------

pub struct CorpusRow {
    pub name: String,
    pub smiles: String,
    pub atoms: usize,
    pub bonds: usize,
    pub hydrogens: usize,
}

pub struct GoldenRow {
    pub name: String,
    pub smiles: String,
    pub radius: u32,
    pub nbits: usize,
    pub hex: String,
}

fn fixture_lines(file: &str) -> Vec<Vec<String>> {
    let path = format!("{}/fixtures/{file}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read fixture {path}: {e}"));
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

pub fn load_corpus() -> Vec<CorpusRow> {
    fixture_lines("smiles_corpus.tsv")
        .into_iter()
        .map(|f| CorpusRow {
            name: f[0].clone(),
            smiles: f[1].clone(),
            atoms: f[2].parse().unwrap(),
            bonds: f[3].parse().unwrap(),
            hydrogens: f[4].parse().unwrap(),
        })
        .collect()
}

pub fn load_morgan_golden() -> Vec<GoldenRow> {
    fixture_lines("morgan_golden.tsv")
        .into_iter()
        .map(|f| GoldenRow {
            name: f[0].clone(),
            smiles: f[1].clone(),
            radius: f[2].parse().unwrap(),
            nbits: f[3].parse().unwrap(),
            hex: f[4].clone(),
        })
        .collect()
}

// --- quadratic AUC oracle ---------------------------------------------------

/// Probability that a random positive outranks a random negative, ties at
/// half credit, by direct enumeration of all positive-negative pairs.
/// `None` when either class is missing.
pub fn pairwise_auc(labels: &[u8], scores: &[f64]) -> Option<f64> {
    let pos: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(&y, _)| y == 1)
        .map(|(_, &s)| s)
        .collect();
    let neg: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(&y, _)| y == 0)
        .map(|(_, &s)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &p in &pos {
        for &q in &neg {
            if p > q {
                total += 1.0;
            } else if p == q {
                total += 0.5;
            }
        }
    }
    Some(total / (pos.len() as f64 * neg.len() as f64))
}

// --- spectral radius by power iteration -------------------------------------

/// Largest absolute eigenvalue of a symmetric `n` x `n` matrix (row-major),
/// estimated with `iters` power-iteration steps from a seeded start vector.
pub fn spectral_radius_symmetric(mat: &[f64], n: usize, iters: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    let mut lambda = 0.0;
    for _ in 0..iters {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let row = &mat[i * n..(i + 1) * n];
            w[i] = row.iter().zip(&v).map(|(m, x)| m * x).sum();
        }
        let wn = norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        for (x, y) in v.iter_mut().zip(&w) {
            *x = y / wn;
        }
    }
    lambda.abs()
}
