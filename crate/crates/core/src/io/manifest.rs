//! Line-oriented JSON dataset manifests.
//!
//! The first line is a header object, every later non-empty line one entry:
//!
//! ```text
//! {"version":1,"n_landmarks":19,"mirror_map":[5,4,3,...]}
//! {"image":"images/000000.png","bbox":[30.5,22.0,97.2,101.8],"landmarks":[41.0,35.5,...]}
//! ```
//!
//! Image paths are resolved relative to the manifest's directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::MirrorMap;
use crate::error::{Error, Result};
use crate::io::{atomic_write, create_dir, read_file};
use crate::raster::GrayImage;
use crate::shape::{BoundingBox, Sample, Shape};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    n_landmarks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mirror_map: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Shape>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub n_landmarks: usize,
    pub mirror_map: Option<MirrorMap>,
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative image paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.image.is_absolute() {
            entry.image.clone()
        } else {
            self.base_dir.join(&entry.image)
        }
    }
}

fn entry_error(index: usize, path: &Path, message: impl Into<String>) -> Error {
    Error::ManifestEntry {
        index,
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<DatasetManifest> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::Manifest("missing header line".into()))?;
    let header: Header = serde_json::from_str(first)
        .map_err(|e| Error::Manifest(format!("header: {e}")))?;
    if header.version != MANIFEST_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported manifest version {} (expected {MANIFEST_VERSION})",
            header.version
        )));
    }
    let l = header.n_landmarks;
    if l < 3 {
        return Err(Error::Manifest(format!("n_landmarks must be at least 3, got {l}")));
    }
    let mirror_map = header
        .mirror_map
        .map(|m| {
            if m.len() != l {
                return Err(Error::Manifest(format!(
                    "mirror_map has {} entries for {l} landmarks",
                    m.len()
                )));
            }
            MirrorMap::new(m).map_err(|e| Error::Manifest(e.to_string()))
        })
        .transpose()?;

    let mut entries = Vec::new();
    for (index, (line_no, line)) in lines.enumerate() {
        #[derive(Deserialize)]
        struct Raw {
            image: PathBuf,
            bbox: serde_json::Value,
            #[serde(default)]
            landmarks: Option<Vec<f64>>,
        }
        let raw: Raw = serde_json::from_str(line).map_err(|e| {
            Error::Manifest(format!("entry {index} (line {}): {e}", line_no + 1))
        })?;
        let bbox: BoundingBox = serde_json::from_value(raw.bbox)
            .map_err(|e| entry_error(index, &raw.image, format!("malformed box: {e}")))?;
        let landmarks = match raw.landmarks {
            None => None,
            Some(v) if v.len() != 2 * l => {
                return Err(entry_error(
                    index,
                    &raw.image,
                    format!("{} landmarks, expected {l}", v.len() / 2),
                ))
            }
            Some(v) => Some(Shape::new(v).map_err(|e| entry_error(index, &raw.image, e.to_string()))?),
        };
        entries.push(ManifestEntry {
            image: raw.image,
            bbox,
            landmarks,
        });
    }
    Ok(DatasetManifest {
        n_landmarks: l,
        mirror_map,
        entries,
        base_dir: base_dir.to_path_buf(),
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Manifest(format!("{} is not UTF-8", path.display())))?;
    parse_manifest(&text, &parent_dir(path))
}

pub fn render_manifest(m: &DatasetManifest) -> Result<String> {
    let header = Header {
        version: MANIFEST_VERSION,
        n_landmarks: m.n_landmarks,
        mirror_map: m.mirror_map.clone().map(Vec::from),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for e in &m.entries {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_manifest(path: &Path, m: &DatasetManifest) -> Result<()> {
    atomic_write(path, render_manifest(m)?.as_bytes())
}

/// Loads every image of the manifest (in parallel, in manifest order).
pub fn load_dataset(path: &Path) -> Result<(DatasetManifest, Vec<Sample>)> {
    let manifest = load_manifest(path)?;
    let samples = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(index, e)| {
            let image = GrayImage::open(&manifest.resolve(e))
                .map_err(|err| entry_error(index, &e.image, err.to_string()))?;
            Ok(Sample::new(image, e.bbox, e.landmarks.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, samples))
}

/// Writes images as `images/NNNNNN.png` next to the manifest.
pub fn write_dataset(
    manifest_path: &Path,
    samples: &[Sample],
    n_landmarks: usize,
    mirror_map: Option<MirrorMap>,
) -> Result<DatasetManifest> {
    let base_dir = parent_dir(manifest_path);
    let image_dir = base_dir.join("images");
    create_dir(&image_dir)?;
    let entries = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            if let Some(gt) = &s.gt_shape {
                if gt.num_landmarks() != n_landmarks {
                    return Err(Error::InvalidInput(format!(
                        "sample {i} has {} landmarks, expected {n_landmarks}",
                        gt.num_landmarks()
                    )));
                }
            }
            let rel = PathBuf::from("images").join(format!("{i:06}.png"));
            let mut png = Vec::new();
            s.image
                .to_luma8()
                .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
                .map_err(|source| Error::Image {
                    path: rel.clone(),
                    source,
                })?;
            atomic_write(&base_dir.join(&rel), &png)?;
            Ok(ManifestEntry {
                image: rel,
                bbox: s.bbox,
                landmarks: s.gt_shape.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        n_landmarks,
        mirror_map,
        entries,
        base_dir,
    };
    save_manifest(manifest_path, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"{"version":1,"n_landmarks":3,"mirror_map":[1,0,2]}"#;

    #[test]
    fn empty_manifest_is_empty_dataset() {
        let m = parse_manifest(HEADER, Path::new(".")).unwrap();
        assert!(m.entries.is_empty());
        assert_eq!(m.mirror_map.unwrap().as_slice(), &[1, 0, 2]);
    }

    #[test]
    fn wrong_landmark_count_names_entry() {
        let text = format!(
            "{HEADER}\n{}\n{}\n",
            r#"{"image":"a.png","bbox":[0,0,10,10],"landmarks":[1,1,2,2,3,1]}"#,
            r#"{"image":"b.png","bbox":[0,0,10,10],"landmarks":[1,1,2,2]}"#
        );
        match parse_manifest(&text, Path::new(".")) {
            Err(Error::ManifestEntry { index, path, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(path, PathBuf::from("b.png"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_box_and_header_rejected() {
        let text = format!("{HEADER}\n{}\n", r#"{"image":"a.png","bbox":[5,0,1,10]}"#);
        assert!(matches!(
            parse_manifest(&text, Path::new(".")),
            Err(Error::ManifestEntry { index: 0, .. })
        ));
        assert!(parse_manifest(r#"{"version":1,"n_landmarks":3,"mirror_map":[1,2,0]}"#, Path::new(".")).is_err());
        assert!(parse_manifest(r#"{"version":9,"n_landmarks":3}"#, Path::new(".")).is_err());
        assert!(parse_manifest("", Path::new(".")).is_err());
    }

    #[test]
    fn render_parse_round_trip() {
        let m = DatasetManifest {
            n_landmarks: 3,
            mirror_map: Some(MirrorMap::new(vec![1, 0, 2]).unwrap()),
            entries: vec![
                ManifestEntry {
                    image: "x.png".into(),
                    bbox: BoundingBox::new(0.1, 0.2, 30.3, 40.7).unwrap(),
                    landmarks: Some(Shape::new(vec![1.0 / 3.0, 2.5, 7.125, 9.0, 1e-7, 4.0]).unwrap()),
                },
                ManifestEntry {
                    image: "y.png".into(),
                    bbox: BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap(),
                    landmarks: None,
                },
            ],
            base_dir: ".".into(),
        };
        let back = parse_manifest(&render_manifest(&m).unwrap(), Path::new(".")).unwrap();
        assert_eq!(back, m);
    }
}
