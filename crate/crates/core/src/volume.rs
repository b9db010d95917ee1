//! Binary mask volumes and their MetaImage-style on-disk form.
//!
//! A mask is stored as an ASCII header (`.mhd`) plus a raw byte payload
//! (`.raw`) in x-fastest order. Only the six header keys below are
//! accepted; anything else is rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const HEADER_KEYS: [&str; 6] = [
    "ObjectType",
    "NDims",
    "DimSize",
    "ElementSpacing",
    "ElementType",
    "ElementDataFile",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MaskVolume {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<bool>,
}

impl MaskVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<bool>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::invalid(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::PayloadLength {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    /// All-background volume.
    pub fn empty(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, spacing, vec![false; n])
    }

    /// Volume whose foreground is given by `f(x, y, z)`.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, spacing, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn has_foreground(&self) -> bool {
        self.data.iter().any(|&v| v)
    }

    /// Same grid, new spacing.
    pub fn with_spacing(&self, spacing: [f64; 3]) -> Result<Self> {
        Self::new(self.dims, spacing, self.data.clone())
    }

    fn is_boundary_index(&self, idx: usize) -> bool {
        if !self.data[idx] {
            return false;
        }
        let [x, y, z] = self.coords(idx);
        let [nx, ny, nz] = self.dims;
        let stride_y = nx;
        let stride_z = nx * ny;
        x == 0
            || x + 1 == nx
            || y == 0
            || y + 1 == ny
            || z == 0
            || z + 1 == nz
            || !self.data[idx - 1]
            || !self.data[idx + 1]
            || !self.data[idx - stride_y]
            || !self.data[idx + stride_y]
            || !self.data[idx - stride_z]
            || !self.data[idx + stride_z]
    }

    /// Flat indices of surface voxels, ascending.
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.data.len())
            .filter(|&i| self.is_boundary_index(i))
            .collect()
    }

    /// Foreground voxels with at least one face neighbour that is background
    /// or outside the grid, in ascending flat-index order.
    pub fn boundary_voxels(&self) -> Vec<[usize; 3]> {
        self.boundary_indices()
            .into_iter()
            .map(|i| self.coords(i))
            .collect()
    }
}

/// Paths of the header/payload pair for `stem` inside `dir`.
pub fn mask_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{stem}.mhd")),
        dir.join(format!("{stem}.raw")),
    )
}

fn parse_triple<T: std::str::FromStr>(key: &str, value: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Header(format!(
            "{key} expects 3 values, got {:?}",
            value
        )));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(
            p.parse::<T>()
                .map_err(|_| Error::Header(format!("{key}: cannot parse {p:?}")))?,
        );
    }
    let mut it = out.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

/// Read a mask from its header file; payload bytes > 0 are foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskVolume> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;

    let mut values: [Option<String>; 6] = Default::default();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Header(format!("line {}: expected `Key = Value`", lineno + 1)))?;
        let key = key.trim();
        let slot = HEADER_KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| Error::Header(format!("unknown key {key:?}")))?;
        if values[slot].is_some() {
            return Err(Error::Header(format!("duplicate key {key:?}")));
        }
        values[slot] = Some(value.trim().to_string());
    }
    let mut fields = Vec::with_capacity(6);
    for (key, value) in HEADER_KEYS.iter().zip(values) {
        fields.push(value.ok_or_else(|| Error::Header(format!("missing key {key:?}")))?);
    }

    if fields[0] != "Image" {
        return Err(Error::Header(format!(
            "ObjectType must be Image, got {:?}",
            fields[0]
        )));
    }
    if fields[1] != "3" {
        return Err(Error::Header(format!(
            "NDims must be 3, got {:?}",
            fields[1]
        )));
    }
    let dims: [usize; 3] = parse_triple("DimSize", &fields[2])?;
    let spacing: [f64; 3] = parse_triple("ElementSpacing", &fields[3])?;
    if fields[4] != "MET_UCHAR" {
        return Err(Error::Header(format!(
            "ElementType must be MET_UCHAR, got {:?}",
            fields[4]
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Header(format!("DimSize must be >= 1, got {dims:?}")));
    }
    if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::Header(format!(
            "ElementSpacing must be positive, got {spacing:?}"
        )));
    }

    let raw_path = path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&fields[5]);
    let payload = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let expected = dims[0] * dims[1] * dims[2];
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: payload.len(),
        });
    }
    MaskVolume::new(dims, spacing, payload.into_iter().map(|b| b > 0).collect())
}

/// Header text for `vol` pointing at `data_file`.
pub fn header_text(vol: &MaskVolume, data_file: &str) -> String {
    let [nx, ny, nz] = vol.dims;
    let [sx, sy, sz] = vol.spacing;
    let mut s = String::new();
    let _ = writeln!(s, "ObjectType = Image");
    let _ = writeln!(s, "NDims = 3");
    let _ = writeln!(s, "DimSize = {nx} {ny} {nz}");
    let _ = writeln!(s, "ElementSpacing = {sx} {sy} {sz}");
    let _ = writeln!(s, "ElementType = MET_UCHAR");
    let _ = writeln!(s, "ElementDataFile = {data_file}");
    s
}

/// Write `vol` as `<path>` (header) plus a sibling `.raw` payload.
pub fn write_mask(vol: &MaskVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw_path = path.with_extension("raw");
    let raw_name = raw_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::invalid(format!("bad mask path {}", path.display())))?
        .to_string();
    let payload: Vec<u8> = vol.data.iter().map(|&v| u8::from(v)).collect();
    fs::write(&raw_path, payload).map_err(|e| Error::io(&raw_path, e))?;
    fs::write(path, header_text(vol, &raw_name)).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw_pair(dir: &Path, header: &str, payload: &[u8]) -> PathBuf {
        let h = dir.join("m.mhd");
        fs::write(&h, header).unwrap();
        fs::write(dir.join("m.raw"), payload).unwrap();
        h
    }

    const HDR_221: &str = "ObjectType = Image\nNDims = 3\nDimSize = 2 2 1\n\
        ElementSpacing = 1 1 1\nElementType = MET_UCHAR\nElementDataFile = m.raw\n";

    #[test]
    fn decode_small_payload() {
        let dir = tempfile::tempdir().unwrap();
        let h = write_raw_pair(dir.path(), HDR_221, &[1, 0, 0, 1]);
        let vol = read_mask(&h).unwrap();
        assert_eq!(vol.dims(), [2, 2, 1]);
        assert_eq!(vol.foreground_count(), 2);
        assert!(vol.get(0, 0, 0));
        assert!(vol.get(1, 1, 0));
        assert!(!vol.get(1, 0, 0));
    }

    #[test]
    fn label_255_is_foreground() {
        let dir = tempfile::tempdir().unwrap();
        let h = write_raw_pair(dir.path(), HDR_221, &[255, 0, 0, 0]);
        assert_eq!(read_mask(&h).unwrap().foreground_count(), 1);
    }

    #[test]
    fn truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let h = write_raw_pair(dir.path(), HDR_221, &[1, 0, 0]);
        let err = read_mask(&h).unwrap_err();
        assert!(err.to_string().contains("payload length mismatch"), "{err}");
    }

    #[test]
    fn header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let unknown = format!("{HDR_221}Offset = 0 0 0\n");
        let h = write_raw_pair(dir.path(), &unknown, &[0; 4]);
        assert!(matches!(read_mask(&h), Err(Error::Header(_))));

        let bad_spacing = HDR_221.replace("ElementSpacing = 1 1 1", "ElementSpacing = 1 0 1");
        let h = write_raw_pair(dir.path(), &bad_spacing, &[0; 4]);
        assert!(matches!(read_mask(&h), Err(Error::Header(_))));

        let missing = HDR_221.replace("NDims = 3\n", "");
        let h = write_raw_pair(dir.path(), &missing, &[0; 4]);
        assert!(matches!(read_mask(&h), Err(Error::Header(_))));

        let garbage = HDR_221.replace("DimSize = 2 2 1", "DimSize = 2 two 1");
        let h = write_raw_pair(dir.path(), &garbage, &[0; 4]);
        assert!(matches!(read_mask(&h), Err(Error::Header(_))));
    }

    #[test]
    fn missing_file() {
        let err = read_mask("/nonexistent/nowhere.mhd").unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn empty_and_full_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let empty = MaskVolume::empty([4, 4, 4], [1.0; 3]).unwrap();
        let p = dir.path().join("empty.mhd");
        write_mask(&empty, &p).unwrap();
        assert_eq!(
            fs::read(dir.path().join("empty.raw")).unwrap(),
            vec![0u8; 64]
        );

        let full = MaskVolume::new([2, 1, 1], [1.0; 3], vec![true, true]).unwrap();
        let p = dir.path().join("full.mhd");
        write_mask(&full, &p).unwrap();
        assert_eq!(fs::read(dir.path().join("full.raw")).unwrap(), vec![1u8, 1]);
        assert_eq!(read_mask(&p).unwrap(), full);
    }

    #[test]
    fn header_layout() {
        let vol = MaskVolume::empty([3, 4, 5], [0.5, 0.75, 2.0]).unwrap();
        let text = header_text(&vol, "a.raw");
        assert_eq!(
            text,
            "ObjectType = Image\nNDims = 3\nDimSize = 3 4 5\nElementSpacing = 0.5 0.75 2\n\
             ElementType = MET_UCHAR\nElementDataFile = a.raw\n"
        );
    }

    #[test]
    fn single_voxel_boundary() {
        let mut vol = MaskVolume::empty([3, 3, 3], [1.0; 3]).unwrap();
        vol.set(1, 1, 1, true);
        assert_eq!(vol.boundary_voxels(), vec![[1, 1, 1]]);
    }

    #[test]
    fn cube_surface() {
        let vol = MaskVolume::from_fn([5, 5, 5], [1.0; 3], |x, y, z| {
            (1..4).contains(&x) && (1..4).contains(&y) && (1..4).contains(&z)
        })
        .unwrap();
        let b = vol.boundary_voxels();
        assert_eq!(b.len(), 26);
        assert!(!b.contains(&[2, 2, 2]));
    }

    #[test]
    fn grid_edge_counts_as_outside() {
        let vol = MaskVolume::new([3, 1, 1], [1.0; 3], vec![true; 3]).unwrap();
        assert_eq!(vol.boundary_voxels().len(), 3);
    }

    #[test]
    fn invalid_construction() {
        assert!(MaskVolume::new([0, 1, 1], [1.0; 3], vec![]).is_err());
        assert!(MaskVolume::new([1, 1, 1], [1.0, f64::NAN, 1.0], vec![false]).is_err());
        assert!(MaskVolume::new([2, 1, 1], [1.0; 3], vec![false]).is_err());
    }
}
