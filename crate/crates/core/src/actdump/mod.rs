// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hidden-state dump format.
//!
//! A dump is a directory holding `manifest.json` plus one raw payload per
//! stored layer snapshot, `layer_0000.bin` .. `layer_{m-1:04}.bin`. Each
//! payload is `N * d_embed` little-endian `f32` values in row-major order
//! (tokens are rows). Layer 0 is the embedding output; the last layer is
//! the post-final-norm stream.
//!
//! Values are widened to `f64` on read and every downstream computation
//! runs in 64-bit arithmetic.

mod synth;

pub use synth::{
    generate_synthetic_trace, orthogonal_noise_ensemble, shared_direction, shared_mean_ensemble,
    LayerGenerator, SyntheticSpec,
};

use std::collections::BTreeSet;
use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32")]
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ByteOrder {
    #[serde(rename = "le")]
    LittleEndian,
}

/// Metadata describing one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_label: String,
    /// Number of stored snapshots `m`, including the embedding output.
    pub layer_count: usize,
    pub token_count: usize,
    pub embed_dim: usize,
    pub dtype: Dtype,
    pub byte_order: ByteOrder,
    /// Set for randomly reinitialized baseline runs.
    pub random_init: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer_note: Option<String>,
    #[serde(default)]
    pub excluded_token_positions: Vec<usize>,
}

impl Manifest {
    pub fn new(
        model_label: impl Into<String>,
        layer_count: usize,
        token_count: usize,
        embed_dim: usize,
    ) -> Self {
        Self {
            model_label: model_label.into(),
            layer_count,
            token_count,
            embed_dim,
            dtype: Dtype::F32,
            byte_order: ByteOrder::LittleEndian,
            random_init: false,
            tokenizer_note: None,
            excluded_token_positions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_count < 2 {
            return Err(Error::Format(format!(
                "layer_count must be >= 2, got {}",
                self.layer_count
            )));
        }
        if self.token_count < 2 {
            return Err(Error::Format(format!(
                "token_count must be >= 2, got {}",
                self.token_count
            )));
        }
        if self.embed_dim < 2 {
            return Err(Error::Format(format!(
                "embed_dim must be >= 2, got {}",
                self.embed_dim
            )));
        }
        if let Some(&p) = self
            .excluded_token_positions
            .iter()
            .find(|&&p| p >= self.token_count)
        {
            return Err(Error::Format(format!(
                "excluded position {p} out of range for {} tokens",
                self.token_count
            )));
        }
        Ok(())
    }

    /// Expected payload size of one layer file in bytes.
    pub fn layer_bytes(&self) -> usize {
        self.token_count * self.embed_dim * 4
    }
}

/// One stored snapshot: an `N × d_embed` matrix, tokens as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub index: usize,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub manifest: Manifest,
    pub layers: Vec<LayerActivations>,
}

impl ActivationTrace {
    /// Builds a trace, checking every invariant.
    pub fn new(manifest: Manifest, layers: Vec<LayerActivations>) -> Result<Self> {
        let trace = Self { manifest, layers };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        self.manifest.validate()?;
        let m = &self.manifest;
        if self.layers.len() != m.layer_count {
            return Err(Error::Format(format!(
                "manifest declares {} layers, trace holds {}",
                m.layer_count,
                self.layers.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for layer in &self.layers {
            if !seen.insert(layer.index) {
                return Err(Error::Format(format!(
                    "duplicate layer index {}",
                    layer.index
                )));
            }
        }
        for (expected, layer) in self.layers.iter().enumerate() {
            if layer.index != expected {
                return Err(Error::Format(format!(
                    "layer indices must run 0..{} in order; found {} at position {expected}",
                    m.layer_count, layer.index
                )));
            }
            check_layer(m, layer)?;
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }
}

fn check_layer(m: &Manifest, layer: &LayerActivations) -> Result<()> {
    let (rows, cols) = layer.matrix.shape();
    if rows != m.token_count || cols != m.embed_dim {
        return Err(Error::Format(format!(
            "layer {} has shape {rows}x{cols}, manifest expects {}x{}",
            layer.index, m.token_count, m.embed_dim
        )));
    }
    if let Some(pos) = layer.matrix.iter().position(|v| !v.is_finite()) {
        // Column-major position back to (row, col).
        return Err(Error::Data(format!(
            "layer {} holds a non-finite value at token {}, dim {}",
            layer.index,
            pos % rows,
            pos / rows
        )));
    }
    Ok(())
}

pub fn layer_file_name(index: usize) -> String {
    format!("layer_{index:04}.bin")
}

fn parse_layer_file_name(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("layer_")?.strip_suffix(".bin")?;
    if digits.len() < 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::Format(format!("missing file {}", path.display())),
        _ => Error::io(path, e),
    })
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let bytes = read_file(&path)?;
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    manifest.validate()?;
    Ok(manifest)
}

/// Decodes a single layer payload. Lets callers stream one layer at a time.
pub fn read_layer(dir: impl AsRef<Path>, manifest: &Manifest, index: usize) -> Result<LayerActivations> {
    if index >= manifest.layer_count {
        return Err(Error::Format(format!(
            "layer {index} out of range for {} layers",
            manifest.layer_count
        )));
    }
    let path = dir.as_ref().join(layer_file_name(index));
    let bytes = read_file(&path)?;
    if bytes.len() != manifest.layer_bytes() {
        return Err(Error::Format(format!(
            "{}: {} bytes, expected {} ({} tokens x {} dims x 4)",
            path.display(),
            bytes.len(),
            manifest.layer_bytes(),
            manifest.token_count,
            manifest.embed_dim
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
    let layer = LayerActivations {
        index,
        matrix: DMatrix::from_row_iterator(manifest.token_count, manifest.embed_dim, values),
    };
    check_layer(manifest, &layer)?;
    Ok(layer)
}

/// Reads and fully validates a dump directory.
pub fn read_trace(dir: impl AsRef<Path>) -> Result<ActivationTrace> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;

    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut on_disk = 0usize;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry
            .file_name()
            .to_str()
            .and_then(parse_layer_file_name)
            .is_some()
        {
            on_disk += 1;
        }
    }

    let layers = (0..manifest.layer_count)
        .map(|i| read_layer(dir, &manifest, i))
        .collect::<Result<Vec<_>>>()?;
    if on_disk != manifest.layer_count {
        return Err(Error::Format(format!(
            "{} layer files on disk, manifest declares {}",
            on_disk, manifest.layer_count
        )));
    }
    ActivationTrace::new(manifest, layers)
}

/// Writes `trace` as a dump directory, creating it if needed. The trace is
/// validated before anything touches the filesystem.
pub fn write_trace(trace: &ActivationTrace, dir: impl AsRef<Path>) -> Result<()> {
    trace.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut json = serde_json::to_string_pretty(&trace.manifest)
        .expect("manifest serialization cannot fail");
    json.push('\n');
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    let mut buf = Vec::with_capacity(trace.manifest.layer_bytes());
    for layer in &trace.layers {
        buf.clear();
        for row in layer.matrix.row_iter() {
            for &v in row.iter() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let path = dir.join(layer_file_name(layer.index));
        fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_trace() -> ActivationTrace {
        let manifest = Manifest::new("tiny", 3, 2, 4);
        let layers = (0..3)
            .map(|i| LayerActivations {
                index: i,
                matrix: DMatrix::from_fn(2, 4, |r, c| (i * 8 + r * 4 + c) as f64 * 0.25 - 1.0),
            })
            .collect();
        ActivationTrace::new(manifest, layers).unwrap()
    }

    #[test]
    fn reads_three_layers_of_two_by_four() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&small_trace(), dir.path()).unwrap();
        for i in 0..3 {
            let len = fs::metadata(dir.path().join(layer_file_name(i))).unwrap().len();
            assert_eq!(len, 32);
        }
        let back = read_trace(dir.path()).unwrap();
        assert_eq!(back.layers.len(), 3);
        assert!(back.layers.iter().all(|l| l.matrix.shape() == (2, 4)));
        assert_eq!(back, small_trace());
    }

    #[test]
    fn payload_is_row_major_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&small_trace(), dir.path()).unwrap();
        let bytes = fs::read(dir.path().join("layer_0001.bin")).unwrap();
        // Row 0, col 1 of layer 1 is (8 + 1) * 0.25 - 1 = 1.25.
        assert_eq!(&bytes[4..8], &1.25f32.to_le_bytes());
        // Row 1, col 0 is (8 + 4) * 0.25 - 1 = 2.0.
        assert_eq!(&bytes[16..20], &2.0f32.to_le_bytes());
    }

    #[test]
    fn truncated_layer_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&small_trace(), dir.path()).unwrap();
        let path = dir.path().join("layer_0002.bin");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..31]).unwrap();
        let err = read_trace(dir.path()).unwrap_err();
        assert_eq!(err.kind(), "FormatError", "{err}");
    }

    #[test]
    fn missing_layer_and_manifest_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&small_trace(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("layer_0001.bin")).unwrap();
        assert_eq!(read_trace(dir.path()).unwrap_err().kind(), "FormatError");

        let empty = tempfile::tempdir().unwrap();
        assert_eq!(read_trace(empty.path()).unwrap_err().kind(), "FormatError");
    }

    #[test]
    fn extra_layer_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&small_trace(), dir.path()).unwrap();
        fs::write(dir.path().join("layer_0003.bin"), [0u8; 32]).unwrap();
        assert_eq!(read_trace(dir.path()).unwrap_err().kind(), "FormatError");
    }

    #[test]
    fn nan_payload_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&small_trace(), dir.path()).unwrap();
        let path = dir.path().join("layer_0000.bin");
        let mut bytes = fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert_eq!(read_trace(dir.path()).unwrap_err().kind(), "DataError");
    }

    #[test]
    fn duplicate_index_rejected_before_io() {
        let mut trace = small_trace();
        trace.layers[2].index = 1;
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        let err = write_trace(&trace, &target).unwrap_err();
        assert_eq!(err.kind(), "FormatError");
        assert!(!target.exists());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let err = write_trace(&small_trace(), blocker.join("sub")).unwrap_err();
        assert_eq!(err.kind(), "IoError");
    }

    #[test]
    fn manifest_json_uses_wire_names() {
        let mut m = Manifest::new("m", 2, 3, 4);
        m.excluded_token_positions = vec![0];
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["dtype"], "f32");
        assert_eq!(v["byte_order"], "le");
        assert_eq!(v["layer_count"], 2);
        assert_eq!(v["excluded_token_positions"], serde_json::json!([0]));
        assert!(v.get("tokenizer_note").is_none());
    }

    #[test]
    fn manifest_invariants() {
        assert!(Manifest::new("m", 1, 2, 2).validate().is_err());
        assert!(Manifest::new("m", 2, 1, 2).validate().is_err());
        assert!(Manifest::new("m", 2, 2, 1).validate().is_err());
        let mut m = Manifest::new("m", 2, 2, 2);
        m.excluded_token_positions = vec![2];
        assert!(m.validate().is_err());
    }

    #[test]
    fn layer_name_parsing() {
        assert_eq!(layer_file_name(7), "layer_0007.bin");
        assert_eq!(parse_layer_file_name("layer_0012.bin"), Some(12));
        assert_eq!(parse_layer_file_name("layer_12.bin"), None);
        assert_eq!(parse_layer_file_name("layer_0012.bin.tmp"), None);
    }
}
