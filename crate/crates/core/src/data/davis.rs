use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, Frame, LabelMap};

pub const FRAMES_DIR: &str = "JPEGImages";
pub const ANNOTATIONS_DIR: &str = "Annotations";

/// One video with its annotations. Frame indices are 1-based; annotation 1
/// is always present.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    pub name: String,
    pub frames: Vec<Frame>,
    pub annotations: BTreeMap<usize, LabelMap>,
    pub object_ids: Vec<u8>,
}

impl VideoSequence {
    /// Checks the invariants and takes the object ids from annotation 1.
    pub fn new(name: impl Into<String>, frames: Vec<Frame>, annotations: BTreeMap<usize, LabelMap>) -> Result<Self> {
        let name = name.into();
        let first = frames.first().ok_or(Error::NoFrames)?;
        let dims = first.dims();
        if let Some(i) = frames.iter().position(|f| f.dims() != dims) {
            return Err(Error::DimensionMismatch(format!("{name}: frame {} is {:?}, frame 1 is {dims:?}", i + 1, frames[i].dims())));
        }
        let first_ann = annotations
            .get(&1)
            .ok_or_else(|| Error::Data(format!("{name}: first frame has no annotation")))?;
        for (&i, a) in &annotations {
            if i == 0 || i > frames.len() {
                return Err(Error::Data(format!("{name}: annotation for frame {i} outside 1..={}", frames.len())));
            }
            if a.dims() != dims {
                return Err(Error::DimensionMismatch(format!("{name}: annotation {i} is {:?}, frames are {dims:?}", a.dims())));
            }
        }
        let object_ids = first_ann.object_ids();
        Ok(Self {
            name,
            frames,
            annotations,
            object_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn frame(&self, index: usize) -> &Frame {
        &self.frames[index - 1]
    }

    pub fn first_annotation(&self) -> &LabelMap {
        &self.annotations[&1]
    }

    /// True when every frame carries an annotation.
    pub fn fully_annotated(&self) -> bool {
        self.annotations.len() == self.frames.len()
    }

    /// Ground-truth label maps for all frames, if every frame is annotated.
    pub fn ground_truth(&self) -> Option<Vec<LabelMap>> {
        self.fully_annotated().then(|| self.annotations.values().cloned().collect())
    }

    /// Ground-truth masks of one object for all frames, if fully annotated.
    pub fn object_masks(&self, id: u8) -> Option<Vec<BinaryMask>> {
        self.fully_annotated().then(|| self.annotations.values().map(|a| a.mask_of(id)).collect())
    }
}

/// On-disk image formats: the DAVIS pair (JPEG frames, palette PNG
/// annotations) or lossless netpbm (PPM frames, PGM annotations).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageFormat {
    Davis,
    #[default]
    Netpbm,
}

impl ImageFormat {
    pub fn frame_ext(self) -> &'static str {
        match self {
            ImageFormat::Davis => "jpg",
            ImageFormat::Netpbm => "ppm",
        }
    }

    pub fn label_ext(self) -> &'static str {
        match self {
            ImageFormat::Davis => "png",
            ImageFormat::Netpbm => "pgm",
        }
    }
}

/// File stem of 1-based frame `index`: DAVIS numbers from `00000`.
pub fn frame_stem(index: usize) -> String {
    format!("{:05}", index - 1)
}

fn list_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if ext.is_some_and(|e| exts.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::format(path, e))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    Frame::from_rgb(w as usize, h as usize, img.into_raw())
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    let (w, h) = frame.dims();
    let img = RgbImage::from_raw(w as u32, h as u32, frame.rgb().to_vec()).expect("frame buffer matches dims");
    img.save(path).map_err(|e| Error::format(path, e))
}

/// Reads an annotation where pixel value is the object id: palette PNGs are
/// read by palette index, grey PNG and PGM by grey level.
pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if !is_png {
        let img = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::format(path, e))?;
        if !matches!(img.color(), image::ColorType::L8) {
            return Err(Error::format(path, format!("expected 8-bit grey, found {:?}", img.color())));
        }
        let img = img.into_luma8();
        let (w, h) = img.dimensions();
        return LabelMap::from_labels(w as usize, h as usize, img.into_raw());
    }

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = png::Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| Error::format(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let bits = match (info.color_type, info.bit_depth) {
        (png::ColorType::Indexed | png::ColorType::Grayscale, d) if (d as u8) <= 8 => d as u8 as usize,
        (c, d) => return Err(Error::format(path, format!("unsupported annotation PNG: {c:?} at {d:?} bits"))),
    };
    let per_byte = 8 / bits;
    let mask = ((1u16 << bits) - 1) as u8;
    let mut labels = Vec::with_capacity(w * h);
    for row in buf.chunks(info.line_size).take(h) {
        for x in 0..w {
            let byte = row[x / per_byte];
            let shift = 8 - bits * (x % per_byte + 1);
            labels.push((byte >> shift) & mask);
        }
    }
    LabelMap::from_labels(w, h, labels)
}

/// Colour of each id in written palette PNGs: the PASCAL/DAVIS bit-spread map.
pub fn davis_palette() -> [u8; 768] {
    let mut pal = [0u8; 768];
    for i in 0..256usize {
        let mut c = i;
        let mut rgb = [0u8; 3];
        for bit in 0..8 {
            for (ch, v) in rgb.iter_mut().enumerate() {
                *v |= (((c >> ch) & 1) as u8) << (7 - bit);
            }
            c >>= 3;
        }
        pal[3 * i..3 * i + 3].copy_from_slice(&rgb);
    }
    pal
}

pub fn write_label_map(path: &Path, map: &LabelMap) -> Result<()> {
    let (w, h) = map.dims();
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if !is_png {
        let img = GrayImage::from_raw(w as u32, h as u32, map.labels().to_vec()).expect("label buffer matches dims");
        return img.save(path).map_err(|e| Error::format(path, e));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(davis_palette().to_vec());
    let mut writer = enc.write_header().map_err(|e| Error::format(path, e))?;
    writer.write_image_data(map.labels()).map_err(|e| Error::format(path, e))?;
    writer.finish().map_err(|e| Error::format(path, e))
}

/// Reads label maps keyed by 1-based frame index, mapping file stems onto
/// the positions of `frame_stems`.
pub fn read_label_dir(dir: &Path, frame_stems: &[String]) -> Result<BTreeMap<usize, LabelMap>> {
    let mut out = BTreeMap::new();
    for path in list_files(dir, &["png", "pgm"])? {
        let s = stem(&path);
        let index = frame_stems
            .iter()
            .position(|f| *f == s)
            .ok_or_else(|| Error::format(&path, "annotation does not match any frame"))?;
        if out.insert(index + 1, read_label_map(&path)?).is_some() {
            return Err(Error::format(&path, "duplicate annotation for frame"));
        }
    }
    Ok(out)
}

/// Reads frames (lexicographic order) and annotations of one sequence. The
/// sequence is named after the frames directory.
pub fn read_davis_sequence(frames_dir: &Path, annotations_dir: &Path) -> Result<VideoSequence> {
    let name = frames_dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let files = list_files(frames_dir, &["jpg", "jpeg", "ppm", "png"])?;
    if files.is_empty() {
        return Err(Error::format(frames_dir, "no frames"));
    }
    let stems: Vec<String> = files.iter().map(|p| stem(p)).collect();
    let frames = files.iter().map(|p| read_frame(p)).collect::<Result<Vec<_>>>()?;
    let annotations = read_label_dir(annotations_dir, &stems)?;
    if !annotations.contains_key(&1) {
        return Err(Error::format(annotations_dir, format!("missing annotation for first frame {}", stems[0])));
    }
    let dims = frames[0].dims();
    if let Some((i, a)) = annotations.iter().find(|(_, a)| a.dims() != dims) {
        return Err(Error::DimensionMismatch(format!(
            "{}: annotation {} is {:?}, frame is {dims:?}",
            annotations_dir.display(),
            stems[i - 1],
            a.dims()
        )));
    }
    VideoSequence::new(name, frames, annotations)
}

/// Sequence names under `<root>/JPEGImages`, sorted.
pub fn list_sequences(root: &Path) -> Result<Vec<String>> {
    let dir = root.join(FRAMES_DIR);
    let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

pub fn read_sequence(root: &Path, name: &str) -> Result<VideoSequence> {
    read_davis_sequence(&root.join(FRAMES_DIR).join(name), &root.join(ANNOTATIONS_DIR).join(name))
}

/// Writes one label map per frame into `dir`, named like DAVIS frames.
pub fn write_label_maps(dir: &Path, maps: &[LabelMap], format: ImageFormat) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, m) in maps.iter().enumerate() {
        write_label_map(&dir.join(format!("{}.{}", frame_stem(i + 1), format.label_ext())), m)?;
    }
    Ok(())
}

/// Reads every label map in `dir` in file-name order.
pub fn read_label_maps(dir: &Path) -> Result<Vec<LabelMap>> {
    list_files(dir, &["png", "pgm"])?.iter().map(|p| read_label_map(p)).collect()
}

/// Writes a sequence in DAVIS layout under `root`.
pub fn write_sequence(root: &Path, seq: &VideoSequence, format: ImageFormat) -> Result<()> {
    let fdir = root.join(FRAMES_DIR).join(&seq.name);
    let adir = root.join(ANNOTATIONS_DIR).join(&seq.name);
    for d in [&fdir, &adir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for (i, f) in seq.frames.iter().enumerate() {
        write_frame(&fdir.join(format!("{}.{}", frame_stem(i + 1), format.frame_ext())), f)?;
    }
    for (&i, a) in &seq.annotations {
        write_label_map(&adir.join(format!("{}.{}", frame_stem(i), format.label_ext())), a)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_map(w: usize, h: usize, ids: u8, seed: u64) -> LabelMap {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        LabelMap::from_labels(w, h, (0..w * h).map(|_| rng.random_range(0..=ids)).collect()).unwrap()
    }

    #[test]
    fn label_maps_round_trip_in_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        for (i, ext) in ["png", "pgm"].iter().enumerate() {
            for (j, map) in [random_map(33, 17, 3, i as u64), LabelMap::new(8, 5), random_map(20, 20, 255, 7)]
                .iter()
                .enumerate()
            {
                let p = dir.path().join(format!("{j}.{ext}"));
                write_label_map(&p, map).unwrap();
                assert_eq!(&read_label_map(&p).unwrap(), map);
            }
        }
    }

    #[test]
    fn palette_starts_like_davis() {
        let p = davis_palette();
        assert_eq!(&p[..12], &[0, 0, 0, 128, 0, 0, 0, 128, 0, 128, 128, 0]);
    }

    #[test]
    fn low_bit_depth_palette_png_is_read_by_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let (w, h) = (5u32, 2u32);
        let file = File::create(&path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Two);
        enc.set_palette(davis_palette()[..12].to_vec());
        let mut wr = enc.write_header().unwrap();
        // Row 0: 0 1 2 3 1, row 1: 3 3 0 0 2 (2 bits per pixel, padded rows).
        wr.write_image_data(&[0b0001_1011, 0b0100_0000, 0b1111_0000, 0b1000_0000]).unwrap();
        wr.finish().unwrap();
        let m = read_label_map(&path).unwrap();
        assert_eq!(m.labels(), &[0, 1, 2, 3, 1, 3, 3, 0, 0, 2]);
    }

    fn blank_sequence(name: &str, ids: &[u8], n: usize) -> VideoSequence {
        let mut ann = LabelMap::new(24, 16);
        for (k, &id) in ids.iter().enumerate() {
            ann.set(2 + 4 * k, 3, id);
        }
        let frames = (0..n).map(|i| Frame::filled(24, 16, [i as u8 * 20, 10, 200])).collect();
        VideoSequence::new(name, frames, BTreeMap::from([(1, ann)])).unwrap()
    }

    #[test]
    fn sequence_round_trip_and_ids() {
        let dir = tempfile::tempdir().unwrap();
        let seq = blank_sequence("clip", &[1], 2);
        write_sequence(dir.path(), &seq, ImageFormat::Netpbm).unwrap();
        assert_eq!(list_sequences(dir.path()).unwrap(), vec!["clip".to_string()]);
        let back = read_sequence(dir.path(), "clip").unwrap();
        assert_eq!(back, seq);
        assert_eq!(back.object_ids, vec![1]);

        let seq = blank_sequence("multi", &[1, 2, 3], 3);
        write_sequence(dir.path(), &seq, ImageFormat::Davis).unwrap();
        let back = read_sequence(dir.path(), "multi").unwrap();
        assert_eq!(back.object_ids, vec![1, 2, 3]);
        assert_eq!(back.annotations, seq.annotations);
        assert_eq!(back.len(), 3);
    }

    #[test]
    fn missing_first_annotation_and_size_mismatch_fail() {
        let dir = tempfile::tempdir().unwrap();
        let seq = blank_sequence("a", &[1], 2);
        write_sequence(dir.path(), &seq, ImageFormat::Netpbm).unwrap();
        let adir = dir.path().join(ANNOTATIONS_DIR).join("a");
        std::fs::rename(adir.join("00000.pgm"), adir.join("00001.pgm")).unwrap();
        assert!(read_sequence(dir.path(), "a").is_err());

        std::fs::remove_file(adir.join("00001.pgm")).unwrap();
        write_label_map(&adir.join("00000.pgm"), &LabelMap::new(10, 10)).unwrap();
        assert!(matches!(read_sequence(dir.path(), "a"), Err(Error::DimensionMismatch(_))));
    }
}
