use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sod_core::channels::TargetMap;
use sod_core::combs::{Comb, CombStructure};
use sod_core::construction::OneSlotComb;
use sod_core::tensor::OperatorData;

use crate::CliError;

/// Labeled operator on disk: `spaces` in tensor order, row-major `re`/`im`.
pub type MatrixFile = OperatorData;

/// A one-slot probabilistic comb and the unitary map it implements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSlotFile {
    pub target: TargetMap,
    pub nominal_p: f64,
    pub choi: MatrixFile,
}

impl OneSlotFile {
    pub fn from_comb(s: &OneSlotComb) -> Self {
        Self { target: s.target, nominal_p: s.nominal_p, choi: MatrixFile::from_operator(&s.choi) }
    }

    pub fn to_comb(&self) -> Result<OneSlotComb, CliError> {
        let op = self.choi.to_operator().map_err(CliError::format)?;
        OneSlotComb::new(op, self.target, self.nominal_p).map_err(CliError::format)
    }
}

/// A success-or-draw pair `(S, N)` on a common comb structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub slots: usize,
    pub d: usize,
    pub d0: usize,
    pub target: TargetMap,
    /// Success probability `S` is meant to realize on every unitary.
    pub p: f64,
    pub s: MatrixFile,
    pub n: MatrixFile,
}

impl PairFile {
    pub fn new(s: &Comb, n: &Comb, target: TargetMap, p: f64) -> Self {
        let st = s.structure();
        Self {
            slots: st.slots,
            d: st.d,
            d0: st.d0,
            target,
            p,
            s: MatrixFile::from_operator(s.choi()),
            n: MatrixFile::from_operator(n.choi()),
        }
    }

    pub fn combs(&self) -> Result<(Comb, Comb), CliError> {
        let st = CombStructure::new(self.slots, self.d, self.d0).map_err(CliError::format)?;
        let load = |m: &MatrixFile| -> Result<Comb, CliError> {
            let op = m.to_operator().map_err(CliError::format)?;
            Comb::new(st, op).map_err(CliError::format)
        };
        Ok((load(&self.s)?, load(&self.n)?))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
