//! MR volume and segmentation mask loading.
//!
//! Two on-disk formats are understood:
//!
//! * NIfTI-1 single-file images (`.nii`, optionally gzip-wrapped as `.nii.gz`).
//!   Only the fields needed for co-registered, isotropic inputs are honored:
//!   `dim[1..3]`, `pixdim[1..3]`, `datatype`, `vox_offset`, `scl_slope` and
//!   `scl_inter`. No affine reorientation is performed.
//! * A raw payload described by a text sidecar (`.rvol`). See [`RawHeader`].
//!
//! Voxels are stored x-fastest: the voxel at `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const NIFTI1_HEADER_SIZE: usize = 348;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid mask label {0}")]
    InvalidLabel(i64),
    #[error("slice index {index} out of range (depth {depth})")]
    IndexOutOfRange { index: usize, depth: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, VolumeError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VolumeError + '_ {
    move |source| VolumeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The four MR sequences shipped per subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    T1,
    T1ce,
    T2,
    Flair,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::T1, Modality::T1ce, Modality::T2, Modality::Flair];

    /// File-name suffix used by the BraTS distribution (`<id>_<suffix>.nii.gz`).
    pub fn suffix(self) -> &'static str {
        match self {
            Modality::T1 => "t1",
            Modality::T1ce => "t1ce",
            Modality::T2 => "t2",
            Modality::Flair => "flair",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.suffix())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(Modality::T1),
            "t1ce" | "t1c" | "t1gd" => Ok(Modality::T1ce),
            "t2" => Ok(Modality::T2),
            "flair" => Ok(Modality::Flair),
            other => Err(format!("unknown modality '{other}'")),
        }
    }
}

/// Voxel counts along x, y, z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane_len(&self) -> usize {
        self.nx * self.ny
    }
}

/// Millimetres per voxel along x, y, z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl Default for Spacing {
    fn default() -> Self {
        Spacing {
            sx: 1.0,
            sy: 1.0,
            sz: 1.0,
        }
    }
}

fn validate_geometry(dims: Dims, spacing: Spacing, len: usize) -> Result<()> {
    if dims.nx == 0 || dims.ny == 0 || dims.nz == 0 {
        return Err(VolumeError::CorruptHeader(format!(
            "dimensions must be positive, got {}x{}x{}",
            dims.nx, dims.ny, dims.nz
        )));
    }
    for s in [spacing.sx, spacing.sy, spacing.sz] {
        if !(s.is_finite() && s > 0.0) {
            return Err(VolumeError::CorruptHeader(format!(
                "voxel spacing must be positive, got {s}"
            )));
        }
    }
    if len != dims.len() {
        return Err(VolumeError::DimMismatch(format!(
            "header describes {} voxels, payload holds {len}",
            dims.len()
        )));
    }
    Ok(())
}

/// One MR modality as a voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f64>,
    modality: Modality,
}

impl Volume3D {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f64>, modality: Modality) -> Result<Self> {
        validate_geometry(dims, spacing, data.len())?;
        Ok(Volume3D {
            dims,
            spacing,
            data,
            modality,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The `z`-th axial plane, in the volume's own x/y order.
    pub fn axial_slice(&self, z: usize) -> Result<Slice2D> {
        if z >= self.dims.nz {
            return Err(VolumeError::IndexOutOfRange {
                index: z,
                depth: self.dims.nz,
            });
        }
        let plane = self.dims.plane_len();
        Ok(Slice2D {
            width: self.dims.nx,
            height: self.dims.ny,
            pixels: self.data[z * plane..(z + 1) * plane].to_vec(),
            z_index: z,
        })
    }
}

/// Free-function form of [`Volume3D::axial_slice`].
pub fn axial_slice(vol: &Volume3D, z: usize) -> Result<Slice2D> {
    vol.axial_slice(z)
}

/// BraTS segmentation labels: 0 background, 1 necrotic core, 2 edema, 4 enhancing tumor.
pub const VALID_LABELS: [u8; 4] = [0, 1, 2, 4];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskVolume {
    dims: Dims,
    labels: Vec<u8>,
}

impl MaskVolume {
    pub fn new(dims: Dims, labels: Vec<u8>) -> Result<Self> {
        validate_geometry(dims, Spacing::default(), labels.len())?;
        if let Some(&bad) = labels.iter().find(|l| !VALID_LABELS.contains(l)) {
            return Err(VolumeError::InvalidLabel(i64::from(bad)));
        }
        Ok(MaskVolume { dims, labels })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn axial_labels(&self, z: usize) -> Result<LabelSlice> {
        if z >= self.dims.nz {
            return Err(VolumeError::IndexOutOfRange {
                index: z,
                depth: self.dims.nz,
            });
        }
        let plane = self.dims.plane_len();
        Ok(LabelSlice {
            width: self.dims.nx,
            height: self.dims.ny,
            labels: self.labels[z * plane..(z + 1) * plane].to_vec(),
            z_index: z,
        })
    }

    /// Number of nonzero voxels in plane `z`.
    pub fn tumor_count(&self, z: usize) -> usize {
        let plane = self.dims.plane_len();
        self.labels[z * plane..(z + 1) * plane]
            .iter()
            .filter(|&&l| l != 0)
            .count()
    }
}

/// One axial plane of intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub z_index: usize,
}

impl Slice2D {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>, z_index: usize) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count must equal width*height");
        Slice2D {
            width,
            height,
            pixels,
            z_index,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// One axial plane of segmentation labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSlice {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
    pub z_index: usize,
}

// ---------------------------------------------------------------------------
// Format dispatch
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Nifti,
    Raw,
}

fn detect_format(path: &Path) -> Result<Format> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    if name.ends_with(".nii") || name.ends_with(".nii.gz") {
        Ok(Format::Nifti)
    } else if name.ends_with(".rvol") {
        Ok(Format::Raw)
    } else {
        Err(VolumeError::UnsupportedFormat(format!(
            "{}: expected .nii, .nii.gz or .rvol",
            path.display()
        )))
    }
}

/// Decoded image before it is typed as intensities or labels.
struct RawImage {
    dims: Dims,
    spacing: Spacing,
    values: Vec<f64>,
}

fn read_image(path: &Path) -> Result<RawImage> {
    match detect_format(path)? {
        Format::Nifti => read_nifti(path),
        Format::Raw => read_raw(path),
    }
}

/// Load one modality from a NIfTI-1 or raw-sidecar file.
pub fn load_volume(path: impl AsRef<Path>, modality: Modality) -> Result<Volume3D> {
    let img = read_image(path.as_ref())?;
    Volume3D::new(img.dims, img.spacing, img.values, modality)
}

/// Load a segmentation mask, rejecting any label outside {0, 1, 2, 4}.
pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskVolume> {
    let img = read_image(path.as_ref())?;
    let mut labels = Vec::with_capacity(img.values.len());
    for v in img.values {
        if v.fract() != 0.0 || !v.is_finite() {
            return Err(VolumeError::InvalidLabel(v as i64));
        }
        let l = v as i64;
        if !(0..=4).contains(&l) || !VALID_LABELS.contains(&(l as u8)) {
            return Err(VolumeError::InvalidLabel(l));
        }
        labels.push(l as u8);
    }
    MaskVolume::new(img.dims, labels)
}

// ---------------------------------------------------------------------------
// Sample types
// ---------------------------------------------------------------------------

/// Payload sample type, shared by both formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    U8,
    I16,
    I32,
    F32,
    F64,
}

impl DataType {
    fn nifti_code(self) -> i16 {
        match self {
            DataType::U8 => 2,
            DataType::I16 => 4,
            DataType::I32 => 8,
            DataType::F32 => 16,
            DataType::F64 => 64,
        }
    }

    fn from_nifti_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => DataType::U8,
            4 => DataType::I16,
            8 => DataType::I32,
            16 => DataType::F32,
            64 => DataType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::I32 | DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }

    fn name(self) -> &'static str {
        match self {
            DataType::U8 => "u8",
            DataType::I16 => "i16",
            DataType::I32 => "i32",
            DataType::F32 => "f32",
            DataType::F64 => "f64",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "u8" | "uint8" => DataType::U8,
            "i16" | "int16" => DataType::I16,
            "i32" | "int32" => DataType::I32,
            "f32" | "float32" => DataType::F32,
            "f64" | "float64" => DataType::F64,
            _ => return None,
        })
    }
}

fn decode_samples(bytes: &[u8], dtype: DataType, big_endian: bool) -> Vec<f64> {
    macro_rules! decode {
        ($t:ty, $n:expr) => {
            bytes
                .chunks_exact($n)
                .map(|c| {
                    let arr: [u8; $n] = c.try_into().unwrap();
                    let v = if big_endian {
                        <$t>::from_be_bytes(arr)
                    } else {
                        <$t>::from_le_bytes(arr)
                    };
                    v as f64
                })
                .collect()
        };
    }
    match dtype {
        DataType::U8 => bytes.iter().map(|&b| f64::from(b)).collect(),
        DataType::I16 => decode!(i16, 2),
        DataType::I32 => decode!(i32, 4),
        DataType::F32 => decode!(f32, 4),
        DataType::F64 => decode!(f64, 8),
    }
}

fn encode_samples(values: &[f64], dtype: DataType) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * dtype.size());
    for &v in values {
        match dtype {
            DataType::U8 => out.push(v as u8),
            DataType::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            DataType::I32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            DataType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            DataType::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// NIfTI-1
// ---------------------------------------------------------------------------

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(io_err(path))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| VolumeError::CorruptHeader(format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct HeaderReader<'a> {
    buf: &'a [u8],
    big_endian: bool,
}

impl HeaderReader<'_> {
    fn i16(&self, off: usize) -> i16 {
        let b = [self.buf[off], self.buf[off + 1]];
        if self.big_endian {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }

    fn f32(&self, off: usize) -> f32 {
        let b: [u8; 4] = self.buf[off..off + 4].try_into().unwrap();
        if self.big_endian {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }
}

fn read_nifti(path: &Path) -> Result<RawImage> {
    let bytes = read_all(path)?;
    parse_nifti(&bytes)
}

fn parse_nifti(bytes: &[u8]) -> Result<RawImage> {
    if bytes.len() < NIFTI1_HEADER_SIZE {
        return Err(VolumeError::CorruptHeader(format!(
            "file holds {} bytes, shorter than a NIfTI-1 header",
            bytes.len()
        )));
    }
    let sizeof_hdr: [u8; 4] = bytes[0..4].try_into().unwrap();
    let big_endian = if i32::from_le_bytes(sizeof_hdr) == 348 {
        false
    } else if i32::from_be_bytes(sizeof_hdr) == 348 {
        true
    } else {
        return Err(VolumeError::CorruptHeader("sizeof_hdr is not 348".into()));
    };
    match &bytes[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(VolumeError::UnsupportedFormat(
                "two-file NIfTI (.hdr/.img) is not supported".into(),
            ))
        }
        _ => return Err(VolumeError::CorruptHeader("bad NIfTI-1 magic".into())),
    }
    let h = HeaderReader {
        buf: bytes,
        big_endian,
    };

    let ndim = h.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(VolumeError::CorruptHeader(format!("dim[0] = {ndim}")));
    }
    let mut dim = [1usize; 7];
    for (i, d) in dim.iter_mut().enumerate().take(ndim as usize) {
        let v = h.i16(42 + 2 * i);
        if v < 1 {
            return Err(VolumeError::CorruptHeader(format!("dim[{}] = {v}", i + 1)));
        }
        *d = v as usize;
    }
    if dim[3..].iter().any(|&d| d != 1) {
        return Err(VolumeError::UnsupportedFormat(
            "only 3-D volumes are supported".into(),
        ));
    }
    let dims = Dims::new(dim[0], dim[1], dim[2]);

    let code = h.i16(70);
    let dtype = DataType::from_nifti_code(code)
        .ok_or_else(|| VolumeError::UnsupportedFormat(format!("NIfTI datatype code {code}")))?;

    let pix = |i: usize| -> f64 {
        let v = f64::from(h.f32(76 + 4 * i)).abs();
        // A zero pixdim on a missing axis is common; treat it as unit spacing.
        if v == 0.0 {
            1.0
        } else {
            v
        }
    };
    let spacing = Spacing {
        sx: pix(1),
        sy: pix(2),
        sz: pix(3),
    };

    let vox_offset = h.f32(108);
    if !(vox_offset.is_finite() && vox_offset >= NIFTI1_HEADER_SIZE as f32) {
        return Err(VolumeError::CorruptHeader(format!(
            "vox_offset = {vox_offset}"
        )));
    }
    let start = vox_offset as usize;
    let slope = f64::from(h.f32(112));
    let inter = f64::from(h.f32(116));

    let payload = bytes.get(start..).unwrap_or(&[]);
    let available = payload.len() / dtype.size();
    if available < dims.len() {
        return Err(VolumeError::DimMismatch(format!(
            "header describes {} voxels, payload holds {available}",
            dims.len()
        )));
    }
    let mut values = decode_samples(&payload[..dims.len() * dtype.size()], dtype, big_endian);
    if slope != 0.0 && slope.is_finite() && (slope != 1.0 || inter != 0.0) {
        for v in &mut values {
            *v = *v * slope + inter;
        }
    }
    validate_geometry(dims, spacing, values.len())?;
    Ok(RawImage {
        dims,
        spacing,
        values,
    })
}

/// Minimal NIfTI-1 writer (little-endian, single file, identity scaling).
///
/// The output is gzip-compressed when the file name ends in `.gz`.
pub fn write_nifti(
    path: impl AsRef<Path>,
    dims: Dims,
    spacing: Spacing,
    values: &[f64],
    dtype: DataType,
) -> Result<()> {
    let path = path.as_ref();
    validate_geometry(dims, spacing, values.len())?;
    for d in [dims.nx, dims.ny, dims.nz] {
        if d > i16::MAX as usize {
            return Err(VolumeError::UnsupportedFormat(format!(
                "dimension {d} exceeds NIfTI-1 limit"
            )));
        }
    }
    let mut hdr = vec![0u8; NIFTI1_HEADER_SIZE];
    hdr[0..4].copy_from_slice(&348i32.to_le_bytes());
    let dim: [i16; 8] = [3, dims.nx as i16, dims.ny as i16, dims.nz as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        hdr[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
    }
    hdr[70..72].copy_from_slice(&dtype.nifti_code().to_le_bytes());
    hdr[72..74].copy_from_slice(&((dtype.size() * 8) as i16).to_le_bytes());
    let pixdim: [f32; 8] = [
        1.0,
        spacing.sx as f32,
        spacing.sy as f32,
        spacing.sz as f32,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        hdr[76 + 4 * i..80 + 4 * i].copy_from_slice(&p.to_le_bytes());
    }
    hdr[108..112].copy_from_slice(&352f32.to_le_bytes());
    hdr[112..116].copy_from_slice(&1f32.to_le_bytes());
    hdr[344..348].copy_from_slice(b"n+1\0");

    let mut bytes = hdr;
    bytes.extend_from_slice(&[0u8; 4]); // empty extension block
    bytes.extend_from_slice(&encode_samples(values, dtype));

    let file = File::create(path).map_err(io_err(path))?;
    let gz = path
        .file_name()
        .is_some_and(|n| n.to_string_lossy().to_ascii_lowercase().ends_with(".gz"));
    if gz {
        let mut enc = GzEncoder::new(file, Compression::fast());
        enc.write_all(&bytes).map_err(io_err(path))?;
        enc.finish().map_err(io_err(path))?;
    } else {
        let mut file = file;
        file.write_all(&bytes).map_err(io_err(path))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Raw + sidecar
// ---------------------------------------------------------------------------

/// Text sidecar for the raw format.
///
/// ```text
/// # comment lines and blank lines are ignored
/// dims = 240 240 155
/// spacing = 1 1 1
/// dtype = f32            # u8 | i16 | i32 | f32 | f64
/// data = volume.bin      # optional, relative to the sidecar
/// ```
///
/// The payload is little-endian and x-fastest. When `data` is omitted the
/// payload is the sidecar path with its extension replaced by `.bin`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawHeader {
    pub dims: Dims,
    pub spacing: Spacing,
    pub dtype: DataType,
    pub data: Option<String>,
}

impl RawHeader {
    pub fn parse(text: &str) -> Result<Self> {
        let mut dims = None;
        let mut spacing = None;
        let mut dtype = None;
        let mut data = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                VolumeError::CorruptHeader(format!("sidecar line {}: expected key = value", n + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "dims" => {
                    let v = parse_triple::<usize>(value, n)?;
                    dims = Some(Dims::new(v[0], v[1], v[2]));
                }
                "spacing" => {
                    let v = parse_triple::<f64>(value, n)?;
                    spacing = Some(Spacing {
                        sx: v[0],
                        sy: v[1],
                        sz: v[2],
                    });
                }
                "dtype" => {
                    dtype = Some(DataType::from_name(value).ok_or_else(|| {
                        VolumeError::UnsupportedFormat(format!("raw dtype '{value}'"))
                    })?)
                }
                "data" => data = Some(value.to_string()),
                other => {
                    return Err(VolumeError::CorruptHeader(format!(
                        "sidecar line {}: unknown key '{other}'",
                        n + 1
                    )))
                }
            }
        }
        let missing = |k: &str| VolumeError::CorruptHeader(format!("sidecar lacks '{k}'"));
        Ok(RawHeader {
            dims: dims.ok_or_else(|| missing("dims"))?,
            spacing: spacing.unwrap_or_default(),
            dtype: dtype.ok_or_else(|| missing("dtype"))?,
            data,
        })
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "dims = {} {} {}\nspacing = {:?} {:?} {:?}\ndtype = {}\n",
            self.dims.nx,
            self.dims.ny,
            self.dims.nz,
            self.spacing.sx,
            self.spacing.sy,
            self.spacing.sz,
            self.dtype.name()
        );
        if let Some(d) = &self.data {
            s.push_str(&format!("data = {d}\n"));
        }
        s
    }

    fn payload_path(&self, sidecar: &Path) -> PathBuf {
        match &self.data {
            Some(d) => sidecar.parent().unwrap_or(Path::new("")).join(d),
            None => sidecar.with_extension("bin"),
        }
    }
}

fn parse_triple<T: FromStr>(value: &str, line: usize) -> Result<[T; 3]> {
    let parts: Vec<T> = value
        .split_whitespace()
        .map(|p| p.parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| VolumeError::CorruptHeader(format!("sidecar line {}: bad number", line + 1)))?;
    <[T; 3]>::try_from(parts).map_err(|_| {
        VolumeError::CorruptHeader(format!("sidecar line {}: expected 3 values", line + 1))
    })
}

fn read_raw(path: &Path) -> Result<RawImage> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let header = RawHeader::parse(&text)?;
    let payload_path = header.payload_path(path);
    let bytes = std::fs::read(&payload_path).map_err(io_err(&payload_path))?;
    if bytes.len() % header.dtype.size() != 0 {
        return Err(VolumeError::DimMismatch(format!(
            "payload of {} bytes is not a whole number of {} samples",
            bytes.len(),
            header.dtype.name()
        )));
    }
    let values = decode_samples(&bytes, header.dtype, false);
    validate_geometry(header.dims, header.spacing, values.len())?;
    Ok(RawImage {
        dims: header.dims,
        spacing: header.spacing,
        values,
    })
}

/// Write `values` as a raw payload plus `.rvol` sidecar. `sidecar` must end in `.rvol`.
pub fn write_raw(
    sidecar: impl AsRef<Path>,
    dims: Dims,
    spacing: Spacing,
    values: &[f64],
    dtype: DataType,
) -> Result<()> {
    let sidecar = sidecar.as_ref();
    if detect_format(sidecar)? != Format::Raw {
        return Err(VolumeError::UnsupportedFormat(format!(
            "{}: raw sidecar must end in .rvol",
            sidecar.display()
        )));
    }
    validate_geometry(dims, spacing, values.len())?;
    let header = RawHeader {
        dims,
        spacing,
        dtype,
        data: None,
    };
    std::fs::write(sidecar, header.render()).map_err(io_err(sidecar))?;
    let payload = header.payload_path(sidecar);
    std::fs::write(&payload, encode_samples(values, dtype)).map_err(io_err(&payload))?;
    Ok(())
}

/// Bit-exact raw writer for a whole volume (payload stored as f64).
pub fn write_volume_raw(sidecar: impl AsRef<Path>, vol: &Volume3D) -> Result<()> {
    write_raw(sidecar, vol.dims, vol.spacing, &vol.data, DataType::F64)
}
