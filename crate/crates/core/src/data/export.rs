use std::fmt::Write as _;
use std::path::Path;

use super::{DataError, Result};
use crate::tensor::Tensor;

/// CSV text of a field sampled on `grid`.
///
/// A 1-D field `[n]` with grid `[n, 1]` gives `x,value` rows; a 2-D field
/// `[n0, n1]` with grid `[n0, n1, 2]` gives `x,y,value` rows in row-major
/// order. Trailing singleton channel axes on the field are ignored.
pub fn field_csv(field: &Tensor, grid: &Tensor) -> Result<String> {
    let mut shape: Vec<usize> = field.shape().to_vec();
    while shape.len() > 1 && shape.last() == Some(&1) {
        shape.pop();
    }
    let dims = shape.len();
    let gs = grid.shape();
    if !(1..=2).contains(&dims) || gs.len() != dims + 1 || gs[..dims] != shape[..] || gs[dims] != dims {
        return Err(DataError::Invalid(format!(
            "field {:?} does not match grid {gs:?}",
            field.shape()
        )));
    }
    let mut out = String::from(if dims == 1 { "x,value\n" } else { "x,y,value\n" });
    for (i, v) in field.data().iter().enumerate() {
        let coords = &grid.data()[i * dims..(i + 1) * dims];
        for c in coords {
            write!(out, "{c},").expect("write to string");
        }
        writeln!(out, "{v}").expect("write to string");
    }
    Ok(out)
}

pub fn write_field_csv(path: impl AsRef<Path>, field: &Tensor, grid: &Tensor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, field_csv(field, grid)?).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}
