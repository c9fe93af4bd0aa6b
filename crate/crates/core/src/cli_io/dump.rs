//! Raw field dumps: `<name>.f64` holds little-endian doubles in grid order,
//! `<name>.toml` the grid metadata and a SHA-256 of the data file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, VortexError};
use crate::geometry::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub name: String,
    pub len: usize,
    pub dtype: String,
    pub byte_order: String,
    /// Index convention of the grid the values live on.
    pub layout: String,
    pub sha256: String,
    pub grid: Grid,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn checksum(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn layout(grid: &Grid) -> &'static str {
    match grid {
        Grid::Torus(_) => "iu * n_v + iv",
        Grid::Plane(_) => "ix * n + iy",
        Grid::Product(_) => "(ix * n + iy) * n_u * n_v + iu * n_v + iv",
    }
}

/// Write `dir/<name>.f64` and `dir/<name>.toml`; returns the data path.
pub fn write_field(dir: &Path, name: &str, values: &[f64], grid: &Grid) -> Result<PathBuf> {
    if values.len() != grid.len() {
        return Err(VortexError::GridMismatch {
            expected: format!("{} values", grid.len()),
            found: format!("{} values", values.len()),
        });
    }
    fs::create_dir_all(dir)?;
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let header = FieldHeader {
        name: name.to_string(),
        len: values.len(),
        dtype: "f64".into(),
        byte_order: "little-endian".into(),
        layout: layout(grid).into(),
        sha256: checksum(&bytes),
        grid: grid.clone(),
    };
    let data = dir.join(format!("{name}.f64"));
    fs::write(&data, &bytes)?;
    let text = toml::to_string(&header).map_err(|e| VortexError::InvalidInput(e.to_string()))?;
    fs::write(dir.join(format!("{name}.toml")), text)?;
    Ok(data)
}

/// Read a dump back, refusing it if the checksum or length disagrees with
/// the header.
pub fn read_field(data: &Path) -> Result<(Vec<f64>, FieldHeader)> {
    let head_path = data.with_extension("toml");
    let text = fs::read_to_string(&head_path)?;
    let header: FieldHeader = toml::from_str(&text)
        .map_err(|e| VortexError::InvalidInput(format!("bad header {}: {e}", head_path.display())))?;
    let bytes = fs::read(data)?;
    let found = checksum(&bytes);
    if found != header.sha256 {
        return Err(VortexError::Checksum {
            path: data.display().to_string(),
            expected: header.sha256.clone(),
            found,
        });
    }
    if bytes.len() != 8 * header.len {
        return Err(VortexError::InvalidInput(format!(
            "{} holds {} bytes, header promises {} doubles",
            data.display(),
            bytes.len(),
            header.len
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((values, header))
}
