use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are replaced by it, so constant columns
/// map to zero instead of dividing by zero.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-column z-score parameters (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Array1<f64>,
    pub stds: Array1<f64>,
}

pub fn fit_scaler(x: ArrayView2<f64>) -> Result<ScalerParams> {
    if x.nrows() < 2 {
        return Err(Error::InvalidParam(format!(
            "scaler needs at least 2 rows, got {}",
            x.nrows()
        )));
    }
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    let stds = x.std_axis(Axis(0), 0.0).mapv(|s| if s < STD_FLOOR { STD_FLOOR } else { s });
    Ok(ScalerParams { means, stds })
}

pub fn apply_scaler(p: &ScalerParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != p.means.len() {
        return Err(Error::DimensionMismatch(format!(
            "scaler fitted on {} columns, got {}",
            p.means.len(),
            x.ncols()
        )));
    }
    Ok((&x - &p.means) / &p.stds)
}
