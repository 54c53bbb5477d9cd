//! Backbone-only protein structures.
//!
//! A structure is a chain of residues, each carrying the four backbone
//! atoms N, Cα, C, O in that fixed order. Missing atoms are recorded in a
//! per-atom mask; coordinates are only meaningful where the mask is true.

use alloc::string::String;
use alloc::vec::Vec;

/// Index of the N atom within a residue's coordinate block.
pub const ATOM_N: usize = 0;
/// Index of the Cα atom.
pub const ATOM_CA: usize = 1;
/// Index of the carbonyl C atom.
pub const ATOM_C: usize = 2;
/// Index of the carbonyl O atom.
pub const ATOM_O: usize = 3;

/// Atom names in storage order.
pub const ATOM_NAMES: [&str; 4] = ["N", "CA", "C", "O"];

/// The 20 standard one-letter amino acid codes.
pub const AMINO_ACIDS: [char; 20] = [
    'A', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'K', 'L', 'M', 'N', 'P', 'Q', 'R', 'S', 'T', 'V', 'W',
    'Y',
];

/// Map a PDB three-letter residue name to its one-letter code, or 'X'.
pub fn one_letter(res_name: &str) -> char {
    match res_name {
        "ALA" => 'A',
        "ARG" => 'R',
        "ASN" => 'N',
        "ASP" => 'D',
        "CYS" => 'C',
        "GLN" => 'Q',
        "GLU" => 'E',
        "GLY" => 'G',
        "HIS" => 'H',
        "ILE" => 'I',
        "LEU" => 'L',
        "LYS" => 'K',
        "MET" => 'M',
        "PHE" => 'F',
        "PRO" => 'P',
        "SER" => 'S',
        "THR" => 'T',
        "TRP" => 'W',
        "TYR" => 'Y',
        "VAL" => 'V',
        _ => 'X',
    }
}

/// Map a one-letter code back to a three-letter residue name ('X' → UNK).
pub fn three_letter(code: char) -> &'static str {
    match code {
        'A' => "ALA",
        'R' => "ARG",
        'N' => "ASN",
        'D' => "ASP",
        'C' => "CYS",
        'Q' => "GLN",
        'E' => "GLU",
        'G' => "GLY",
        'H' => "HIS",
        'I' => "ILE",
        'L' => "LEU",
        'K' => "LYS",
        'M' => "MET",
        'F' => "PHE",
        'P' => "PRO",
        'S' => "SER",
        'T' => "THR",
        'W' => "TRP",
        'Y' => "TYR",
        'V' => "VAL",
        _ => "UNK",
    }
}

/// Position of `code` in the 20-letter alphabet, or None for 'X'/unknown.
pub fn alphabet_index(code: char) -> Option<usize> {
    AMINO_ACIDS.iter().position(|&c| c == code)
}

/// A backbone-only structure: sequence plus N/Cα/C/O coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneStructure {
    /// Identifier (file stem, PDB id, or pair id).
    pub id: String,
    /// One-letter residue codes, length L.
    pub sequence: Vec<char>,
    /// Coordinates in Å, `[L][4]` with atom order N, Cα, C, O.
    pub coords: Vec<[[f64; 3]; 4]>,
    /// True where the atom was observed.
    pub atom_mask: Vec<[bool; 4]>,
    /// Optional per-residue predicted confidence in [0, 100].
    pub plddt: Option<Vec<f64>>,
}

/// Violations of the structural invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureError {
    TooShort { len: usize },
    LengthMismatch { field: &'static str },
    NonFiniteCoordinate { residue: usize, atom: usize },
    PlddtOutOfRange { residue: usize },
}

impl core::fmt::Display for StructureError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::TooShort { len } => write!(f, "structure has {len} residues; at least 2 required"),
            Self::LengthMismatch { field } => write!(f, "{field} length differs from sequence length"),
            Self::NonFiniteCoordinate { residue, atom } => {
                write!(f, "non-finite coordinate at residue {residue}, atom {}", ATOM_NAMES[*atom])
            }
            Self::PlddtOutOfRange { residue } => {
                write!(f, "plddt outside [0, 100] at residue {residue}")
            }
        }
    }
}

impl core::error::Error for StructureError {}

impl BackboneStructure {
    /// Number of residues.
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Check the structural invariants: L ≥ 2, aligned field lengths,
    /// finite coordinates wherever the mask is true, plddt in range.
    pub fn validate(&self) -> Result<(), StructureError> {
        let l = self.len();
        if l < 2 {
            return Err(StructureError::TooShort { len: l });
        }
        if self.coords.len() != l {
            return Err(StructureError::LengthMismatch { field: "coords" });
        }
        if self.atom_mask.len() != l {
            return Err(StructureError::LengthMismatch { field: "atom_mask" });
        }
        if let Some(p) = &self.plddt {
            if p.len() != l {
                return Err(StructureError::LengthMismatch { field: "plddt" });
            }
            for (i, v) in p.iter().enumerate() {
                if !v.is_finite() || !(0.0..=100.0).contains(v) {
                    return Err(StructureError::PlddtOutOfRange { residue: i });
                }
            }
        }
        for i in 0..l {
            for a in 0..4 {
                if self.atom_mask[i][a] && !self.coords[i][a].iter().all(|c| c.is_finite()) {
                    return Err(StructureError::NonFiniteCoordinate { residue: i, atom: a });
                }
            }
        }
        Ok(())
    }

    /// Mean plddt, if present.
    pub fn mean_plddt(&self) -> Option<f64> {
        let p = self.plddt.as_ref()?;
        if p.is_empty() {
            return None;
        }
        Some(p.iter().sum::<f64>() / p.len() as f64)
    }

    /// True when every residue has all four backbone atoms observed.
    pub fn fully_observed(&self) -> bool {
        self.atom_mask.iter().all(|m| m.iter().all(|&b| b))
    }

    /// Cα coordinates for residues with Cα observed (all of them, by the
    /// parsing contract), in residue order.
    pub fn ca_coords(&self) -> Vec<[f64; 3]> {
        self.coords.iter().map(|r| r[ATOM_CA]).collect()
    }

    /// Apply a rigid motion x → R·x + t to every observed atom.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: &[f64; 3]) -> Self {
        let mut out = self.clone();
        for (res, mask) in out.coords.iter_mut().zip(&self.atom_mask) {
            for (a, atom) in res.iter_mut().enumerate() {
                if mask[a] {
                    *atom = crate::geometry::mat_vec(rotation, atom);
                    for k in 0..3 {
                        atom[k] += translation[k];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_residue() -> BackboneStructure {
        BackboneStructure {
            id: "t".into(),
            sequence: vec!['A', 'G'],
            coords: vec![[[0.0; 3]; 4]; 2],
            atom_mask: vec![[true; 4]; 2],
            plddt: None,
        }
    }

    #[test]
    fn validate_accepts_minimal() {
        assert!(two_residue().validate().is_ok());
    }

    #[test]
    fn validate_rejects_short() {
        let mut s = two_residue();
        s.sequence.truncate(1);
        s.coords.truncate(1);
        s.atom_mask.truncate(1);
        assert_eq!(s.validate(), Err(StructureError::TooShort { len: 1 }));
    }

    #[test]
    fn validate_rejects_nan_in_masked_true() {
        let mut s = two_residue();
        s.coords[1][ATOM_O][0] = f64::NAN;
        assert!(matches!(
            s.validate(),
            Err(StructureError::NonFiniteCoordinate { residue: 1, atom: ATOM_O })
        ));
        // Masked-out atoms may hold anything.
        s.atom_mask[1][ATOM_O] = false;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn code_round_trip() {
        for &aa in AMINO_ACIDS.iter() {
            assert_eq!(one_letter(three_letter(aa)), aa);
        }
        assert_eq!(one_letter("SEC"), 'X');
        assert_eq!(three_letter('X'), "UNK");
    }
}
