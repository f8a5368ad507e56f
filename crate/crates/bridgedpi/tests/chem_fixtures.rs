//! Fixture-driven checks for the SMILES parser and circular fingerprints.
//!
//! `fixtures/smiles_corpus.tsv` carries hand-checked atom/bond/hydrogen
//! counts. `fixtures/morgan_golden.tsv` freezes fingerprint hex dumps
//! produced by the recursive environment oracle in `common`; the ignored
//! `regenerate_morgan_fixtures` test rewrites that file when the hashing
//! scheme is deliberately changed.

mod common;

use bridgedpi::chem::{morgan_fingerprint, parse_smiles};

#[test]
fn corpus_parses_with_expected_counts() {
    let rows = common::load_corpus();
    assert!(rows.len() >= 50, "corpus should stay at 50+ entries");
    for row in &rows {
        let mol = parse_smiles(&row.smiles)
            .unwrap_or_else(|e| panic!("{} ({}): {e}", row.name, row.smiles));
        assert_eq!(mol.atoms.len(), row.atoms, "{}: atom count", row.name);
        assert_eq!(mol.bonds.len(), row.bonds, "{}: bond count", row.name);
        let h: usize = mol.atoms.iter().map(|a| a.hydrogens as usize).sum();
        assert_eq!(h, row.hydrogens, "{}: total hydrogens", row.name);
    }
}

#[test]
fn morgan_golden_fixtures_match() {
    let rows = common::load_morgan_golden();
    assert!(rows.len() >= 20, "golden file should stay at 20+ entries");
    for row in &rows {
        let mol = parse_smiles(&row.smiles).expect(&row.name);
        let fp = morgan_fingerprint(&mol, row.radius, row.nbits).expect(&row.name);
        assert_eq!(
            fp.to_hex(),
            row.hex,
            "{} (radius {}, {} bits)",
            row.name,
            row.radius,
            row.nbits
        );
    }
}

#[test]
fn fingerprints_match_recursive_environment_oracle() {
    // The library folds environments iteratively with memoized layers; the
    // oracle recomputes every environment by recursion. Bit sets must agree
    // exactly on the whole corpus.
    for row in common::load_corpus() {
        let mol = parse_smiles(&row.smiles).unwrap();
        let fp = morgan_fingerprint(&mol, 2, 1024).unwrap();
        assert_eq!(
            fp.ones(),
            common::oracle_bits(&mol, 2, 1024),
            "{}: folded bits",
            row.name
        );
    }
}

#[test]
fn folding_collisions_verified_on_small_molecules() {
    // Tiny widths force identifier collisions; molecules up to 6 heavy atoms
    // keep the enumeration obviously correct by inspection.
    for row in common::load_corpus() {
        let mol = parse_smiles(&row.smiles).unwrap();
        if mol.atoms.len() > 6 {
            continue;
        }
        for nbits in [8, 16, 64] {
            for radius in 0..=3 {
                let fp = morgan_fingerprint(&mol, radius, nbits).unwrap();
                assert_eq!(
                    fp.ones(),
                    common::oracle_bits(&mol, radius, nbits),
                    "{} radius {radius} nbits {nbits}",
                    row.name
                );
            }
        }
    }
}

#[test]
fn round_trip_isomorphism_small_molecules() {
    // Write each parsed graph back out and reparse; the result must be
    // isomorphic (same atoms, bonds, charges, hydrogen counts). Kept to
    // 8 heavy atoms so the backtracking matcher stays instant.
    let mut checked = 0;
    for row in common::load_corpus() {
        let mol = parse_smiles(&row.smiles).unwrap();
        if mol.atoms.len() > 8 {
            continue;
        }
        let rewritten = common::write_smiles(&mol);
        let reparsed = parse_smiles(&rewritten)
            .unwrap_or_else(|e| panic!("{}: rewrote to {rewritten}: {e}", row.name));
        assert!(
            common::isomorphic(&mol, &reparsed),
            "{}: {} -> {} is not isomorphic",
            row.name,
            row.smiles,
            rewritten
        );
        checked += 1;
    }
    assert!(checked >= 30, "expected 30+ small molecules, got {checked}");
}

/// Rebuilds `fixtures/morgan_golden.tsv` from the oracle. Run explicitly:
/// `cargo test -p bridgedpi --test chem_fixtures -- --ignored regenerate`
#[test]
#[ignore]
fn regenerate_morgan_fixtures() {
    let molecules: &[(&str, &str)] = &[
        ("methane", "C"),
        ("ethanol", "CCO"),
        ("acetic_acid", "CC(=O)O"),
        ("benzene", "c1ccccc1"),
        ("toluene", "Cc1ccccc1"),
        ("phenol", "Oc1ccccc1"),
        ("pyridine", "n1ccccc1"),
        ("pyrrole", "c1cc[nH]c1"),
        ("furan", "o1cccc1"),
        ("thiophene", "s1cccc1"),
        ("cyclopropane", "C1CC1"),
        ("cyclohexane", "C1CCCCC1"),
        ("isobutane", "CC(C)C"),
        ("acetonitrile", "CC#N"),
        ("formaldehyde", "C=O"),
        ("dimethyl_sulfoxide", "CS(=O)C"),
        ("acetamide", "CC(N)=O"),
        ("aspirin", "CC(=O)Oc1ccccc1C(=O)O"),
        ("caffeine", "Cn1cnc2c1c(=O)n(C)c(=O)n2C"),
        ("nicotine", "CN1CCC[C@H]1c1cccnc1"),
        ("ibuprofen", "CC(C)Cc1ccc(cc1)C(C)C(=O)O"),
        ("paracetamol", "CC(=O)Nc1ccc(O)cc1"),
        ("ammonium", "[NH4+]"),
        ("acetate_anion", "CC(=O)[O-]"),
        ("naphthalene", "c1ccc2ccccc2c1"),
        ("chlorobenzene", "Clc1ccccc1"),
    ];
    // extra rows exercising other radii and widths
    let variants: &[(&str, &str, u32, usize)] = &[
        ("ethanol_r0", "CCO", 0, 1024),
        ("ethanol_r1", "CCO", 1, 1024),
        ("ethanol_r3", "CCO", 3, 1024),
        ("benzene_w64", "c1ccccc1", 2, 64),
        ("benzene_w512", "c1ccccc1", 2, 512),
        ("benzene_w2048", "c1ccccc1", 2, 2048),
        ("caffeine_r3_w2048", "Cn1cnc2c1c(=O)n(C)c(=O)n2C", 3, 2048),
        ("methane_w8", "C", 0, 8),
    ];
    let mut out = String::from("# name\tsmiles\tradius\tnbits\thex\n");
    out.push_str("# Generated by the recursive environment oracle in tests/common.\n");
    for &(name, smiles) in molecules {
        let mol = parse_smiles(smiles).expect(name);
        let hex = common::oracle_hex(&mol, 2, 1024);
        out.push_str(&format!("{name}\t{smiles}\t2\t1024\t{hex}\n"));
    }
    for &(name, smiles, radius, nbits) in variants {
        let mol = parse_smiles(smiles).expect(name);
        let hex = common::oracle_hex(&mol, radius, nbits);
        out.push_str(&format!("{name}\t{smiles}\t{radius}\t{nbits}\t{hex}\n"));
    }
    let path = format!("{}/fixtures/morgan_golden.tsv", env!("CARGO_MANIFEST_DIR"));
    std::fs::write(&path, out).unwrap();
}
