//! JSON wire formats shared by the library reports and the command line.
//!
//! A symbol is `{ "n", "rows", "cols", "d"?, "terms": [{ "k": [..], "matrix":
//! [[[re, im], ..], ..] }] }`; omitted multi-indices are zero coefficients. An
//! element of `H^2_{C^m}` is the `cols = 1` case with `rows = m`. The optional
//! `d` records the window degree; when absent the actual degree is used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::{DegreeWindow, HardyElement, MultiIndex, OperatorSymbol};
use crate::linalg::{CMat, C64};
use crate::subspace::SubspaceBasis;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermWire {
    pub k: Vec<u32>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolWire {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    pub terms: Vec<TermWire>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub d: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubspaceWire {
    pub window: WindowWire,
    #[serde(rename = "dimE")]
    pub dim_e: usize,
    pub columns: Vec<SymbolWire>,
}

fn to_pair(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

impl From<&OperatorSymbol> for SymbolWire {
    fn from(s: &OperatorSymbol) -> Self {
        let terms = s
            .terms()
            .map(|(k, m)| TermWire {
                k: k.entries().to_vec(),
                matrix: (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| to_pair(m[(r, c)])).collect()).collect(),
            })
            .collect();
        SymbolWire { n: s.n(), rows: s.rows(), cols: s.cols(), d: Some(s.window().d()), terms }
    }
}

impl SymbolWire {
    pub fn to_symbol(&self) -> Result<OperatorSymbol> {
        let mut max_deg = 0;
        for t in &self.terms {
            if t.k.len() != self.n {
                return Err(Error::Format(format!("term exponent {:?} does not have {} entries", t.k, self.n)));
            }
            max_deg = max_deg.max(t.k.iter().copied().max().unwrap_or(0));
            if t.matrix.len() != self.rows || t.matrix.iter().any(|r| r.len() != self.cols) {
                return Err(Error::Format(format!("term {:?} is not a {}x{} matrix", t.k, self.rows, self.cols)));
            }
        }
        let d = self.d.unwrap_or(max_deg);
        if max_deg > d {
            return Err(Error::Format(format!("term degree {max_deg} exceeds declared window degree {d}")));
        }
        let window = DegreeWindow::new(self.n, d)?;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let m = CMat::from_fn(self.rows, self.cols, |r, c| C64::new(t.matrix[r][c][0], t.matrix[r][c][1]));
                Ok((MultiIndex::new(t.k.clone())?, m))
            })
            .collect::<Result<Vec<_>>>()?;
        OperatorSymbol::from_terms(&window, self.rows, self.cols, terms)
    }

    pub fn to_element(&self) -> Result<HardyElement> {
        if self.cols != 1 {
            return Err(Error::Format(format!("an element needs cols = 1, got {}", self.cols)));
        }
        self.to_symbol()?.column(0)
    }

    pub fn from_element(e: &HardyElement) -> Self {
        let sym = OperatorSymbol::from_columns(e.window(), e.dim(), std::slice::from_ref(e)).expect("one column");
        SymbolWire::from(&sym)
    }
}

impl From<&SubspaceBasis> for SubspaceWire {
    fn from(s: &SubspaceBasis) -> Self {
        SubspaceWire {
            window: WindowWire { n: Some(s.window().n()), d: s.window().d() },
            dim_e: s.dim_e(),
            columns: s.elements().iter().map(SymbolWire::from_element).collect(),
        }
    }
}

impl SubspaceWire {
    /// Rebuilds the subspace, re-orthonormalizing the stored columns.
    pub fn to_subspace(&self) -> Result<SubspaceBasis> {
        let n = self
            .window
            .n
            .or_else(|| self.columns.first().map(|c| c.n))
            .ok_or_else(|| Error::Format("subspace window needs n".into()))?;
        let window = DegreeWindow::new(n, self.window.d)?;
        let cols = self
            .columns
            .iter()
            .map(|c| c.to_element().and_then(|e| e.resized(window.d())))
            .collect::<Result<Vec<_>>>()?;
        crate::subspace::orthonormalize_in(&window, self.dim_e, &cols, crate::subspace::DEFAULT_RANK_TOL)
    }
}

/// `#[serde(with = "symbol_serde")]` adapter storing an [`OperatorSymbol`] as
/// a [`SymbolWire`].
pub mod symbol_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::SymbolWire;
    use crate::hardy::OperatorSymbol;

    pub fn serialize<S: Serializer>(s: &OperatorSymbol, ser: S) -> Result<S::Ok, S::Error> {
        SymbolWire::from(s).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<OperatorSymbol, D::Error> {
        SymbolWire::deserialize(de)?.to_symbol().map_err(D::Error::custom)
    }
}
