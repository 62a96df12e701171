//! JSON persistence: per-image mask files, scene fixtures and reports.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::amg::MaskRecord;
use crate::mask::{rle_decode, rle_encode, BBox, BinaryMask, RleMask};
use crate::scene::SceneSpec;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: annotation {index}: {message}")]
    Record {
        path: PathBuf,
        index: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageHeader {
    pub id: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleJson {
    /// `[height, width]`.
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

impl From<&RleMask> for RleJson {
    fn from(r: &RleMask) -> Self {
        Self {
            size: [r.height, r.width],
            counts: r.counts.clone(),
        }
    }
}

impl RleJson {
    pub fn to_rle(&self) -> RleMask {
        RleMask {
            width: self.size[1],
            height: self.size[0],
            counts: self.counts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sa1bStyleRecord {
    pub id: u64,
    pub segmentation: RleJson,
    /// `[x, y, w, h]`; all zero for an empty mask.
    pub bbox: [u32; 4],
    pub area: u64,
    pub predicted_iou: f64,
    pub stability_score: f64,
    pub crop_box: [u32; 4],
    pub point_coords: Vec<[f64; 2]>,
}

impl Sa1bStyleRecord {
    pub fn from_mask_record(id: u64, r: &MaskRecord) -> Self {
        Self {
            id,
            segmentation: (&rle_encode(&r.mask)).into(),
            bbox: r.mask.bbox_or_empty().to_array(),
            area: r.mask.area() as u64,
            predicted_iou: r.predicted_iou,
            stability_score: r.stability,
            crop_box: r.crop.rect.to_array(),
            point_coords: vec![[r.source_point.0, r.source_point.1]],
        }
    }

    pub fn decode(&self) -> Result<BinaryMask, String> {
        rle_decode(&self.segmentation.to_rle()).map_err(|e| e.to_string())
    }

    fn check(&self, header: &ImageHeader) -> Result<(), String> {
        let [h, w] = self.segmentation.size;
        if (w, h) != (header.width, header.height) {
            return Err(format!(
                "segmentation size {w}x{h} in a {}x{} image",
                header.width, header.height
            ));
        }
        let mask = self.decode()?;
        let area = mask.area() as u64;
        if area != self.area {
            return Err(format!(
                "area {} but the segmentation has {area} pixels",
                self.area
            ));
        }
        let bbox = mask.bbox_or_empty().to_array();
        if bbox != self.bbox {
            return Err(format!(
                "bbox {:?} but the segmentation spans {bbox:?}",
                self.bbox
            ));
        }
        if !self.predicted_iou.is_finite() || !self.stability_score.is_finite() {
            return Err("non-finite score".into());
        }
        let [cx, cy, cw, ch] = self.crop_box;
        if cx as u64 + cw as u64 > w as u64 || cy as u64 + ch as u64 > h as u64 {
            return Err(format!("crop box {:?} outside the image", self.crop_box));
        }
        Ok(())
    }
}

/// One image's worth of annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFile {
    pub image: ImageHeader,
    pub annotations: Vec<Sa1bStyleRecord>,
}

impl MaskFile {
    pub fn from_records(image_id: u64, width: u32, height: u32, records: &[MaskRecord]) -> Self {
        Self {
            image: ImageHeader {
                id: image_id,
                width,
                height,
            },
            annotations: records
                .iter()
                .enumerate()
                .map(|(i, r)| Sa1bStyleRecord::from_mask_record(i as u64, r))
                .collect(),
        }
    }

    pub fn masks(&self) -> Result<Vec<BinaryMask>, String> {
        self.annotations
            .iter()
            .map(Sa1bStyleRecord::decode)
            .collect()
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let io_err = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Mask files are written compactly; RLE count arrays dominate their size.
pub fn write_mask_file(path: &Path, file: &MaskFile) -> Result<(), IoError> {
    for (index, r) in file.annotations.iter().enumerate() {
        r.check(&file.image).map_err(|message| IoError::Record {
            path: path.to_path_buf(),
            index,
            message,
        })?;
    }
    let mut bytes = serde_json::to_vec(file).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_mask_file(path: &Path) -> Result<MaskFile, IoError> {
    let file: MaskFile = read_json(path)?;
    for (index, r) in file.annotations.iter().enumerate() {
        r.check(&file.image).map_err(|message| IoError::Record {
            path: path.to_path_buf(),
            index,
            message,
        })?;
    }
    Ok(file)
}

pub fn write_scene(path: &Path, scene: &SceneSpec) -> Result<(), IoError> {
    write_json(path, scene)
}

pub fn read_scene(path: &Path) -> Result<SceneSpec, IoError> {
    let scene: SceneSpec = read_json(path)?;
    scene.validate().map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(scene)
}

/// `*.json` files directly under `dir`, sorted by name.
pub fn list_json_files(dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let io_err = |source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn bbox_from_array(a: [u32; 4]) -> BBox {
    BBox::new(a[0], a[1], a[2], a[3])
}
