//! Binary PPM (P6, maxval 255) frames and the frame manifest.
//!
//! A manifest lists one frame path per line, relative paths being resolved
//! against the manifest's directory. Blank lines and lines starting with
//! `#` are skipped; line numbers in errors count every line.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub index: usize,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(index: usize, width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != 3 * width * height {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} frame needs {} bytes, got {}",
                3 * width * height,
                pixels.len()
            )));
        }
        Ok(Frame {
            index,
            width,
            height,
            pixels,
        })
    }

    pub fn filled(index: usize, width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let pixels = rgb.iter().copied().cycle().take(3 * width * height).collect();
        Frame::new(index, width, height, pixels).expect("consistent size")
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Planar `[1, 3, H, W]` tensor of raw 0..=255 values.
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.width * self.height;
        let mut data = vec![0f32; 3 * plane];
        for (p, rgb) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + p] = f32::from(rgb[c]);
            }
        }
        Tensor::new(vec![1, 3, self.height, self.width], data).expect("consistent size")
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Parses a P6 image. Header tokens may be separated by any whitespace and
/// interleaved with `#` comments.
pub fn parse_ppm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PPM header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "P6" {
        return Err(format!("not a binary PPM (magic {magic:?})"));
    }
    let mut number = |what: &str| -> std::result::Result<usize, String> {
        let t = token()?;
        t.parse().map_err(|_| format!("bad {what} {t:?} in PPM header"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("empty {width}x{height} image"));
    }
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    let raster = pos + 1;
    let need = 3 * width * height;
    if bytes.len() < raster + need {
        return Err(format!("raster holds {} bytes, expected {need}", bytes.len().saturating_sub(raster)));
    }
    Ok((width, height, bytes[raster..raster + need].to_vec()))
}

pub fn write_ppm(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&frame.to_ppm()))
        .map_err(|e| Error::io(path, e))
}

/// One manifest entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameEntry {
    /// 1-based manifest line.
    pub line: usize,
    pub path: PathBuf,
}

#[derive(Clone, Debug)]
pub struct Manifest {
    pub path: PathBuf,
    pub entries: Vec<FrameEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Manifest::parse(&text, path))
    }

    pub fn parse(text: &str, path: &Path) -> Self {
        let base = path.parent().unwrap_or(Path::new(""));
        let entries = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.trim();
                (!l.is_empty() && !l.starts_with('#')).then(|| FrameEntry {
                    line: i + 1,
                    path: base.join(l),
                })
            })
            .collect();
        Manifest {
            path: path.to_path_buf(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads frame `index` (its position among the entries).
    pub fn read_frame(&self, index: usize) -> Result<Frame> {
        let entry = &self.entries[index];
        let fail = |message: String| Error::Frame {
            path: self.path.clone(),
            line: entry.line,
            message,
        };
        let bytes =
            std::fs::read(&entry.path).map_err(|e| fail(format!("cannot read {}: {e}", entry.path.display())))?;
        let (width, height, pixels) =
            parse_ppm(&bytes).map_err(|m| fail(format!("{}: {m}", entry.path.display())))?;
        Frame::new(index, width, height, pixels).map_err(|e| fail(e.to_string()))
    }
}

/// Frames in manifest order, indexed from 0.
pub fn read_frames(manifest: impl AsRef<Path>) -> Result<impl Iterator<Item = Result<Frame>>> {
    let manifest = Manifest::load(manifest)?;
    Ok((0..manifest.len()).map(move |i| manifest.read_frame(i)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_pixel_ppm() {
        let bytes = b"P6\n2 1\n255\n\xff\x00\x00\x00\x00\xff";
        let (w, h, px) = parse_ppm(bytes).unwrap();
        let f = Frame::new(0, w, h, px).unwrap();
        assert_eq!((f.width, f.height), (2, 1));
        assert_eq!(f.pixel(0, 0), [255, 0, 0]);
        assert_eq!(f.pixel(1, 0), [0, 0, 255]);
        assert_eq!(f.to_ppm(), bytes.to_vec());
    }

    #[test]
    fn header_comments_and_whitespace() {
        let bytes = b"P6 # comment\n# another\n 1\t1 255 \x01\x02\x03";
        assert_eq!(parse_ppm(bytes).unwrap(), (1, 1, vec![1, 2, 3]));
    }

    #[test]
    fn malformed_headers_rejected() {
        assert!(parse_ppm(b"P3\n1 1\n255\n1 2 3").unwrap_err().contains("magic"));
        assert!(parse_ppm(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00").unwrap_err().contains("maxval"));
        assert!(parse_ppm(b"P6\n2 2\n255\n\x00").unwrap_err().contains("raster"));
        assert!(parse_ppm(b"P6\n2").is_err());
        assert!(parse_ppm(b"P6\nx 2 255\n").unwrap_err().contains("width"));
    }

    #[test]
    fn tensor_is_planar() {
        let f = Frame::new(0, 2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(f.to_tensor().data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn manifest_order_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        for (i, name) in ["a.ppm", "b.ppm", "c.ppm"].iter().enumerate() {
            write_ppm(&Frame::filled(0, 3, 2, [i as u8; 3]), dir.path().join(name)).unwrap();
        }
        let manifest = dir.path().join("frames.txt");
        std::fs::write(&manifest, "a.ppm\n\nb.ppm\n# skipped\nc.ppm\n").unwrap();
        let frames: Vec<Frame> = read_frames(&manifest).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(frames.iter().map(|f| f.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(frames[2].pixel(0, 0), [2, 2, 2]);

        std::fs::write(&manifest, "").unwrap();
        assert_eq!(read_frames(&manifest).unwrap().count(), 0);

        std::fs::write(&manifest, "a.ppm\nmissing.ppm\n").unwrap();
        let results: Vec<_> = read_frames(&manifest).unwrap().collect();
        assert!(results[0].is_ok());
        match &results[1] {
            Err(Error::Frame { line, .. }) => assert_eq!(*line, 2),
            other => panic!("{other:?}"),
        }
    }
}
