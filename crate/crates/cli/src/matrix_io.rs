//! Matrix files: `{"re": [[..]], "im": [[..]]}`, row-major, `im` optional.

use std::path::Path;

use krylov_qfi::{CMatrix, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        let im = m.iter().any(|z| z.im != 0.0).then(|| rows(|z| z.im));
        Self { re: rows(|z| z.re), im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix, CliError> {
        let nrows = self.re.len();
        let ncols = self.re.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(CliError::Config("matrix is empty".into()));
        }
        let ragged = |rows: &[Vec<f64>]| rows.len() != nrows || rows.iter().any(|r| r.len() != ncols);
        if ragged(&self.re) || self.im.as_deref().is_some_and(ragged) {
            return Err(CliError::Config(format!(
                "matrix rows must all have length {ncols} and re/im must have equal shape"
            )));
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |m| m[i][j]);
            Complex64::new(self.re[i][j], im)
        }))
    }
}

pub fn read_matrix(path: &Path) -> Result<CMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let file: MatrixFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    file.to_matrix()
}
