//! Weight ingestion: manifest parsing, raw little-endian tensor files and
//! 4-D addressing.
//!
//! A manifest is a TOML document:
//!
//! ```toml
//! exclude = ["bn*"]
//!
//! [[tensor]]
//! name = "conv1"
//! shape = [64, 3, 3, 3]
//! dtype = "f16"
//! path = "conv1.bin"
//! ```
//!
//! Shapes with fewer than four dimensions are padded with trailing 1s.
//! Paths are resolved relative to the manifest's directory.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorShape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl TensorShape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidShape(format!(
                "dimensions must be positive, got ({n}, {c}, {h}, {w})"
            )));
        }
        Ok(Self { n, c, h, w })
    }

    /// Pads a 1- to 4-D shape with trailing 1s.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(Error::InvalidShape(format!(
                "expected 1 to 4 dimensions, got {}",
                dims.len()
            )));
        }
        let mut d = [1usize; 4];
        d[..dims.len()].copy_from_slice(dims);
        Self::new(d[0], d[1], d[2], d[3])
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn element_count(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn kernel_area(&self) -> usize {
        self.h * self.w
    }

    /// Row-major flat index of `(n, c, h, w)`.
    pub fn element_index(&self, n: usize, c: usize, h: usize, w: usize) -> Result<usize> {
        if n >= self.n || c >= self.c || h >= self.h || w >= self.w {
            return Err(Error::IndexOutOfRange {
                n,
                c,
                h,
                w,
                shape: self.to_string(),
            });
        }
        Ok(((n * self.c + c) * self.h + h) * self.w + w)
    }

    /// Inverse of [`element_index`](Self::element_index).
    pub fn coords(&self, index: usize) -> [usize; 4] {
        let w = index % self.w;
        let rest = index / self.w;
        let h = rest % self.h;
        let rest = rest / self.h;
        let c = rest % self.c;
        let n = rest / self.c;
        [n, c, h, w]
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

pub fn element_index(shape: &TensorShape, n: usize, c: usize, h: usize, w: usize) -> Result<usize> {
    shape.element_index(n, c, h, w)
}

/// Storage type of the source weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F16,
    F32,
}

impl DType {
    pub fn bits(self) -> u32 {
        match self {
            DType::F16 => 16,
            DType::F32 => 32,
        }
    }

    pub fn byte_width(self) -> usize {
        self.bits() as usize / 8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DType::F16 => "f16",
            DType::F32 => "f32",
        }
    }

    /// Decodes little-endian bytes. `bytes.len()` must be a multiple of the width.
    pub fn decode(self, bytes: &[u8]) -> Vec<f64> {
        match self {
            DType::F16 => bytes
                .chunks_exact(2)
                .map(|b| f16::from_le_bytes([b[0], b[1]]).to_f64())
                .collect(),
            DType::F32 => bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect(),
        }
    }

    /// Encodes values, rounding to nearest at this precision.
    pub fn encode(self, values: &[f64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(values.len() * self.byte_width());
        match self {
            DType::F16 => {
                for &v in values {
                    out.extend_from_slice(&f16::from_f64(v).to_le_bytes());
                }
            }
            DType::F32 => {
                for &v in values {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
        out
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named convolutional weight array held at working (f64) precision.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub name: String,
    pub shape: TensorShape,
    pub values: Vec<f64>,
    pub dtype: DType,
}

impl WeightTensor {
    pub fn new(
        name: impl Into<String>,
        shape: TensorShape,
        values: Vec<f64>,
        dtype: DType,
    ) -> Result<Self> {
        let name = name.into();
        if values.len() != shape.element_count() {
            return Err(Error::ShapeMismatch(format!(
                "tensor `{name}` has {} values but shape {shape} needs {}",
                values.len(),
                shape.element_count()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidValue { name, index, value });
        }
        Ok(Self {
            name,
            shape,
            values,
            dtype,
        })
    }

    pub fn source_precision_bits(&self) -> u32 {
        self.dtype.bits()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.dtype.encode(&self.values)
    }

    pub fn from_bytes(
        name: impl Into<String>,
        shape: TensorShape,
        dtype: DType,
        bytes: &[u8],
    ) -> Result<Self> {
        let name = name.into();
        let expected = shape.element_count() * dtype.byte_width();
        if bytes.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "tensor `{name}`: {} bytes on disk, shape {shape} at {dtype} needs {expected}",
                bytes.len()
            )));
        }
        Self::new(name, shape, dtype.decode(bytes), dtype)
    }
}

/// Loaded model weights plus the set of tensors left unquantized.
#[derive(Debug, Clone, Default)]
pub struct ModelWeights {
    pub tensors: Vec<WeightTensor>,
    pub excluded: BTreeSet<String>,
}

impl ModelWeights {
    pub fn new(tensors: Vec<WeightTensor>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &tensors {
            if !seen.insert(t.name.as_str()) {
                return Err(Error::DuplicateName(t.name.clone()));
            }
        }
        Ok(Self {
            tensors,
            excluded: BTreeSet::new(),
        })
    }

    /// Adds every tensor whose name matches one of the glob patterns to the
    /// exclusion set.
    pub fn exclude_matching<S: AsRef<str>>(&mut self, patterns: &[S]) -> Result<()> {
        let resolved = resolve_exclusions(self.tensors.iter().map(|t| t.name.as_str()), patterns)?;
        self.excluded.extend(resolved);
        Ok(())
    }

    pub fn is_excluded(&self, name: &str) -> bool {
        self.excluded.contains(name)
    }

    pub fn get(&self, name: &str) -> Option<&WeightTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// Names matching any of `patterns` (shell-style globs).
pub fn resolve_exclusions<'a, S: AsRef<str>>(
    names: impl IntoIterator<Item = &'a str>,
    patterns: &[S],
) -> Result<BTreeSet<String>> {
    let compiled = patterns
        .iter()
        .map(|p| {
            glob::Pattern::new(p.as_ref())
                .map_err(|e| Error::Manifest(format!("bad exclude pattern `{}`: {e}", p.as_ref())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(names
        .into_iter()
        .filter(|name| compiled.iter().any(|p| p.matches(name)))
        .map(str::to_owned)
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default, rename = "tensor")]
    pub tensors: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub path: PathBuf,
}

pub fn load_manifest(manifest_path: impl AsRef<Path>) -> Result<ModelWeights> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(manifest_path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let shape = TensorShape::from_dims(&entry.shape)?;
        let path = base.join(&entry.path);
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.clone()),
            _ => Error::Io(e),
        })?;
        tensors.push(WeightTensor::from_bytes(
            entry.name.clone(),
            shape,
            entry.dtype,
            &bytes,
        )?);
    }

    let mut model = ModelWeights::new(tensors)?;
    model.exclude_matching(&manifest.exclude)?;
    Ok(model)
}

/// Writes raw little-endian values of `t` at its source precision.
pub fn write_raw(t: &WeightTensor, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, t.to_bytes())?;
    Ok(())
}

fn file_stem_for(name: &str) -> String {
    let stem: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if stem.is_empty() || stem.starts_with('.') {
        format!("t{stem}")
    } else {
        stem
    }
}

/// Writes a manifest plus one raw binary per tensor next to it.
pub fn write_manifest(model: &ModelWeights, manifest_path: impl AsRef<Path>) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut used = HashSet::new();
    let mut entries = Vec::with_capacity(model.tensors.len());
    for t in &model.tensors {
        let stem = file_stem_for(&t.name);
        let mut file = format!("{stem}.bin");
        let mut i = 1;
        while !used.insert(file.clone()) {
            file = format!("{stem}.{i}.bin");
            i += 1;
        }
        write_raw(t, dir.join(&file))?;
        entries.push(ManifestEntry {
            name: t.name.clone(),
            shape: t.shape.dims().to_vec(),
            dtype: t.dtype,
            path: PathBuf::from(file),
        });
    }
    let manifest = Manifest {
        exclude: model
            .excluded
            .iter()
            .map(|n| glob::Pattern::escape(n))
            .collect(),
        tensors: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Manifest(e.to_string()))?;
    fs::write(manifest_path, text)?;
    Ok(())
}
