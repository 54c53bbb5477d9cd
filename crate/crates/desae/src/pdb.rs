//! Fixed-column PDB ATOM reading and writing (backbone atoms only).
//!
//! Only ATOM records are ingested, only atoms named N, CA, C, O, and only
//! model 1 of multi-model files. The first alternate location seen for an
//! atom wins. Residues missing their Cα are dropped. For predicted
//! structures the B-factor column is read as per-residue confidence.

use crate::error::{Result, ToolError};
use desae_core::backbone::{one_letter, three_letter, BackboneStructure, ATOM_CA, ATOM_NAMES};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Chain to extract; None takes the first chain encountered.
    pub chain: Option<char>,
    /// Read the B-factor column into per-residue plddt (predicted files).
    pub plddt_from_bfactor: bool,
}

impl ParseOptions {
    pub fn predicted() -> Self {
        Self {
            chain: None,
            plddt_from_bfactor: true,
        }
    }
}

struct ResidueSlot {
    code: char,
    coords: [[f64; 3]; 4],
    mask: [bool; 4],
    bfactor: Option<f64>,
}

pub fn parse_structure(path: &Path, options: &ParseOptions) -> Result<BackboneStructure> {
    let text = std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
    parse_structure_str(&text, path, options)
}

/// Parse PDB text; `path` is used only for diagnostics.
pub fn parse_structure_str(
    text: &str,
    path: &Path,
    options: &ParseOptions,
) -> Result<BackboneStructure> {
    let malformed = |line: usize, detail: String| ToolError::MalformedRecord {
        path: path.to_path_buf(),
        line,
        detail,
    };
    fn field(line: &str, lo: usize, hi: usize) -> &str {
        line.get(lo..hi.min(line.len())).unwrap_or("")
    }

    let mut order: Vec<(i64, char)> = Vec::new();
    let mut residues: HashMap<(i64, char), ResidueSlot> = HashMap::new();
    let mut selected_chain = options.chain;
    let mut in_model = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let record = field(line, 0, 6).trim_end();
        match record {
            "MODEL" => {
                in_model += 1;
                if in_model >= 2 {
                    break; // only model 1
                }
            }
            "ENDMDL" => break,
            "ATOM" => {
                if line.len() < 54 {
                    return Err(malformed(
                        line_no,
                        format!("record too short ({} chars) for coordinates", line.len()),
                    ));
                }
                let name = field(line, 12, 16).trim();
                let Some(atom_slot) = ATOM_NAMES.iter().position(|&n| n == name) else {
                    continue; // side-chain or other atom
                };
                let chain = line.as_bytes()[21] as char;
                match selected_chain {
                    None => selected_chain = Some(chain),
                    Some(c) if c != chain => continue,
                    _ => {}
                }
                let res_name = field(line, 17, 20).trim();
                let res_seq: i64 = field(line, 22, 26).trim().parse().map_err(|_| {
                    malformed(line_no, format!("residue number {:?}", field(line, 22, 26)))
                })?;
                let i_code = line.as_bytes().get(26).map(|&b| b as char).unwrap_or(' ');
                let mut coord = [0.0f64; 3];
                for (k, (lo, hi)) in [(30, 38), (38, 46), (46, 54)].iter().enumerate() {
                    coord[k] = field(line, *lo, *hi).trim().parse().map_err(|_| {
                        malformed(
                            line_no,
                            format!("coordinate field {:?}", field(line, *lo, *hi)),
                        )
                    })?;
                }
                let bfactor = {
                    let raw = field(line, 60, 66).trim();
                    if raw.is_empty() {
                        None
                    } else {
                        Some(raw.parse::<f64>().map_err(|_| {
                            malformed(line_no, format!("B-factor field {raw:?}"))
                        })?)
                    }
                };

                let key = (res_seq, i_code);
                let slot = residues.entry(key).or_insert_with(|| {
                    order.push(key);
                    ResidueSlot {
                        code: one_letter(res_name),
                        coords: [[0.0; 3]; 4],
                        mask: [false; 4],
                        bfactor: None,
                    }
                });
                // First altLoc/duplicate wins.
                if !slot.mask[atom_slot] {
                    slot.coords[atom_slot] = coord;
                    slot.mask[atom_slot] = true;
                    if atom_slot == ATOM_CA {
                        slot.bfactor = bfactor;
                    }
                }
            }
            "TER" => {
                if selected_chain.is_some() && !order.is_empty() {
                    break; // end of the selected chain
                }
            }
            _ => {}
        }
    }

    if order.is_empty() {
        return Err(ToolError::EmptyChain {
            path: path.to_path_buf(),
            chain: options.chain,
        });
    }

    let mut sequence = Vec::new();
    let mut coords = Vec::new();
    let mut atom_mask = Vec::new();
    let mut plddt = Vec::new();
    for key in &order {
        let slot = &residues[key];
        if !slot.mask[ATOM_CA] {
            continue; // residues without Cα are dropped
        }
        sequence.push(slot.code);
        coords.push(slot.coords);
        atom_mask.push(slot.mask);
        plddt.push(slot.bfactor.unwrap_or(0.0));
    }
    if sequence.is_empty() {
        return Err(ToolError::EmptyChain {
            path: path.to_path_buf(),
            chain: options.chain,
        });
    }

    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "structure".into());
    let structure = BackboneStructure {
        id,
        sequence,
        coords,
        atom_mask,
        plddt: options.plddt_from_bfactor.then_some(plddt),
    };
    structure.validate().map_err(|e| ToolError::InvalidStructure {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(structure)
}

/// Serialize to PDB text: one ATOM record per observed atom, occupancy
/// 1.00, B-factor from plddt (or 0.00), chain A, residues numbered from 1.
pub fn to_pdb_string(s: &BackboneStructure) -> Result<String> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let mut serial = 0usize;
    let overflow = |detail: String| ToolError::FormatOverflow {
        path: std::path::PathBuf::from(format!("{}.pdb", s.id)),
        detail,
    };
    if s.len() > 9999 {
        return Err(overflow(format!("{} residues exceed 4-digit numbering", s.len())));
    }
    for i in 0..s.len() {
        let res_name = three_letter(s.sequence[i]);
        let b = s.plddt.as_ref().map(|p| p[i]).unwrap_or(0.0);
        for a in 0..4 {
            if !s.atom_mask[i][a] {
                continue;
            }
            serial += 1;
            let xyz = s.coords[i][a];
            for v in xyz {
                if !(-999.999..=9999.999).contains(&v) {
                    return Err(overflow(format!("coordinate {v} outside 8.3 field")));
                }
            }
            let element = if a == 0 { "N" } else if a == 3 { "O" } else { "C" };
            writeln!(
                out,
                "ATOM  {serial:>5}  {name:<3} {res_name:>3} A{res_seq:>4}    {x:>8.3}{y:>8.3}{z:>8.3}{occ:>6.2}{b:>6.2}          {element:>2}",
                serial = serial,
                name = ATOM_NAMES[a],
                res_name = res_name,
                res_seq = i + 1,
                x = xyz[0],
                y = xyz[1],
                z = xyz[2],
                occ = 1.00,
                b = b,
                element = element,
            )
            .expect("write to string");
        }
    }
    out.push_str("END\n");
    Ok(out)
}

pub fn write_structure(s: &BackboneStructure, path: &Path) -> Result<()> {
    let text = to_pdb_string(s)?;
    std::fs::write(path, text).map_err(|e| ToolError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use desae_core::backbone::{ATOM_C, ATOM_N, ATOM_O};
    use desae_core::synthetic;
    use std::path::PathBuf;

    fn fake_path() -> PathBuf {
        PathBuf::from("test.pdb")
    }

    #[test]
    fn minimal_two_residue_file() {
        let text = "\
ATOM      1  N   ALA A   1       0.000   0.000   0.000  1.00  0.00           N
ATOM      2  CA  ALA A   1       1.458   0.000   0.000  1.00  0.00           C
ATOM      3  C   ALA A   1       2.009   1.420   0.000  1.00  0.00           C
ATOM      4  O   ALA A   1       1.251   2.390   0.000  1.00  0.00           O
ATOM      5  N   GLY A   2       3.332   1.536   0.000  1.00  0.00           N
ATOM      6  CA  GLY A   2       3.988   2.839   0.000  1.00  0.00           C
ATOM      7  C   GLY A   2       5.504   2.693   0.000  1.00  0.00           C
ATOM      8  O   GLY A   2       6.030   1.580   0.000  1.00  0.00           O
END
";
        let s = parse_structure_str(text, &fake_path(), &ParseOptions::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.sequence, vec!['A', 'G']);
        assert!(s.fully_observed());
        assert!((s.coords[1][ATOM_CA][1] - 2.839).abs() < 1e-9);
        assert!(s.plddt.is_none());
    }

    #[test]
    fn missing_oxygen_is_masked() {
        let text = "\
ATOM      1  N   ALA A   1       0.000   0.000   0.000  1.00  0.00           N
ATOM      2  CA  ALA A   1       1.458   0.000   0.000  1.00  0.00           C
ATOM      3  C   ALA A   1       2.009   1.420   0.000  1.00  0.00           C
ATOM      5  N   GLY A   2       3.332   1.536   0.000  1.00  0.00           N
ATOM      6  CA  GLY A   2       3.988   2.839   0.000  1.00  0.00           C
ATOM      7  C   GLY A   2       5.504   2.693   0.000  1.00  0.00           C
ATOM      8  O   GLY A   2       6.030   1.580   0.000  1.00  0.00           O
";
        let s = parse_structure_str(text, &fake_path(), &ParseOptions::default()).unwrap();
        assert!(!s.atom_mask[0][ATOM_O]);
        assert!(s.atom_mask[0][ATOM_N] && s.atom_mask[0][ATOM_C]);
        assert!(s.atom_mask[1][ATOM_O]);
    }

    #[test]
    fn non_numeric_coordinate_is_rejected_with_line() {
        let text = "\
ATOM      1  N   ALA A   1       0.000   0.000   0.000  1.00  0.00           N
ATOM      2  CA  ALA A   1       xx.xxx   0.000   0.000  1.00  0.00           C
";
        let err = parse_structure_str(text, &fake_path(), &ParseOptions::default()).unwrap_err();
        match err {
            ToolError::MalformedRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn residue_missing_ca_is_dropped() {
        let text = "\
ATOM      1  N   ALA A   1       0.000   0.000   0.000  1.00  0.00           N
ATOM      2  C   ALA A   1       2.009   1.420   0.000  1.00  0.00           C
ATOM      3  N   GLY A   2       3.332   1.536   0.000  1.00  0.00           N
ATOM      4  CA  GLY A   2       3.988   2.839   0.000  1.00  0.00           C
ATOM      5  C   GLY A   2       5.504   2.693   0.000  1.00  0.00           C
ATOM      6  O   GLY A   2       6.030   1.580   0.000  1.00  0.00           O
ATOM      7  N   ALA A   3       0.100   0.000   3.000  1.00  0.00           N
ATOM      8  CA  ALA A   3       1.500   0.000   3.100  1.00  0.00           C
ATOM      9  C   ALA A   3       2.100   1.400   3.000  1.00  0.00           C
ATOM     10  O   ALA A   3       1.300   2.400   3.100  1.00  0.00           O
";
        let s = parse_structure_str(text, &fake_path(), &ParseOptions::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.sequence, vec!['G', 'A']);
        assert!(s.atom_mask.iter().all(|m| m[ATOM_CA]));
    }

    #[test]
    fn model_one_only_and_first_altloc_wins() {
        let text = "\
MODEL        1
ATOM      1  N   ALA A   1       0.000   0.000   0.000  1.00  0.00           N
ATOM      2  CA AALA A   1       1.000   0.000   0.000  1.00  0.00           C
ATOM      3  CA BALA A   1       9.000   9.000   9.000  1.00  0.00           C
ATOM      4  C   ALA A   1       2.000   1.400   0.000  1.00  0.00           C
ATOM      5  O   ALA A   1       1.200   2.400   0.000  1.00  0.00           O
ATOM      6  N   GLY A   2       3.300   1.500   0.000  1.00  0.00           N
ATOM      7  CA  GLY A   2       4.000   2.800   0.000  1.00  0.00           C
ENDMDL
MODEL        2
ATOM      8  CA  TRP A   9      99.000  99.000  99.000  1.00  0.00           C
ENDMDL
";
        let s = parse_structure_str(text, &fake_path(), &ParseOptions::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.coords[0][ATOM_CA], [1.0, 0.0, 0.0]);
        assert!(!s.sequence.contains(&'W'));
    }

    #[test]
    fn chain_selection() {
        let text = "\
ATOM      1  CA  ALA A   1       1.000   0.000   0.000  1.00  0.00           C
ATOM      2  CA  GLY A   2       4.000   2.800   0.000  1.00  0.00           C
TER
ATOM      3  CA  TRP B   1       0.000   0.000   0.000  1.00 10.00           C
ATOM      4  CA  TRP B   2       3.800   0.000   0.000  1.00 20.00           C
";
        let a = parse_structure_str(text, &fake_path(), &ParseOptions::default()).unwrap();
        assert_eq!(a.sequence, vec!['A', 'G']);
        let opts = ParseOptions {
            chain: Some('B'),
            plddt_from_bfactor: true,
        };
        let b = parse_structure_str(text, &fake_path(), &opts).unwrap();
        assert_eq!(b.sequence, vec!['W', 'W']);
        assert_eq!(b.plddt.as_ref().unwrap(), &vec![10.0, 20.0]);
    }

    #[test]
    fn empty_chain_error() {
        let err =
            parse_structure_str("HEADER    X\nEND\n", &fake_path(), &ParseOptions::default())
                .unwrap_err();
        assert!(matches!(err, ToolError::EmptyChain { .. }));
    }

    #[test]
    fn round_trip_within_format_precision() {
        let s = synthetic::mixed_chain("rt", 24, 0.1, 5);
        let text = to_pdb_string(&s).unwrap();
        let back = parse_structure_str(&text, &fake_path(), &ParseOptions::default()).unwrap();
        assert_eq!(back.len(), s.len());
        assert_eq!(back.sequence, s.sequence);
        assert_eq!(back.atom_mask, s.atom_mask);
        let mut worst = 0.0f64;
        for i in 0..s.len() {
            for a in 0..4 {
                for k in 0..3 {
                    worst = worst.max((back.coords[i][a][k] - s.coords[i][a][k]).abs());
                }
            }
        }
        assert!(worst <= 5e-4, "round-trip error {worst}");
    }

    #[test]
    fn plddt_written_to_bfactor_column() {
        let mut s = synthetic::helix("pl", 3, 0.0, 6);
        s.plddt = Some(vec![88.25, 91.5, 77.0]);
        let text = to_pdb_string(&s).unwrap();
        let line = text.lines().next().unwrap();
        assert_eq!(&line[60..66], " 88.25");
        let back = parse_structure_str(&text, &fake_path(), &ParseOptions::predicted()).unwrap();
        let p = back.plddt.unwrap();
        assert!((p[0] - 88.25).abs() < 1e-9);
        assert!((p[2] - 77.0).abs() < 1e-9);
    }

    #[test]
    fn masked_atom_not_written() {
        let mut s = synthetic::helix("ma", 3, 0.0, 7);
        s.atom_mask[1][ATOM_O] = false;
        let text = to_pdb_string(&s).unwrap();
        let o_records = text
            .lines()
            .filter(|l| l.starts_with("ATOM") && l[12..16].trim() == "O")
            .count();
        assert_eq!(o_records, 2);
    }
}
