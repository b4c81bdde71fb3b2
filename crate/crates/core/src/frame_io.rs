//! Frame ingestion from YUV4MPEG2 streams and raw RGB24 files.
//!
//! Compressed video is out of scope: decode externally and pipe Y4M, e.g.
//! `ffmpeg -i in.mp4 -f yuv4mpegpipe - | fragvqa extract -`.
//!
//! Y4M frames are converted with the BT.601 full-range matrix, rounding half
//! away from zero and clamping to `[0, 255]`. Subsampled chroma is upsampled
//! by nearest neighbour.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::buffer::RgbBuffer;
use crate::error::{Error, Result};

/// One decoded picture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    index: u64,
    image: RgbBuffer,
}

impl Frame {
    pub fn new(index: u64, width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Ok(Self {
            index,
            image: RgbBuffer::new(width, height, pixels)?,
        })
    }

    pub fn from_image(index: u64, image: RgbBuffer) -> Self {
        Self { index, image }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn pixels(&self) -> &[u8] {
        self.image.as_bytes()
    }

    pub fn image(&self) -> &RgbBuffer {
        &self.image
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Rational {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::Format(format!("invalid frame rate {num}:{den}")));
        }
        Ok(Self { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Nearest whole number of frames per second, never below 1.
    pub fn rounded(self) -> usize {
        ((self.num as u64 + self.den as u64 / 2) / self.den as u64).max(1) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VideoMeta {
    pub width: usize,
    pub height: usize,
    pub frame_rate: Rational,
    /// Unknown for pipes.
    pub frame_count: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chroma {
    C420,
    C422,
    C444,
}

impl Chroma {
    fn parse(tag: &str) -> Result<Self> {
        match tag {
            "420" | "420jpeg" | "420paldv" | "420mpeg2" => Ok(Chroma::C420),
            "422" => Ok(Chroma::C422),
            "444" => Ok(Chroma::C444),
            other => Err(Error::Unsupported(format!("Y4M colorspace tag C{other}"))),
        }
    }

    fn plane_dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            Chroma::C420 => (width.div_ceil(2), height.div_ceil(2)),
            Chroma::C422 => (width.div_ceil(2), height),
            Chroma::C444 => (width, height),
        }
    }

    fn shifts(self) -> (usize, usize) {
        match self {
            Chroma::C420 => (1, 1),
            Chroma::C422 => (1, 0),
            Chroma::C444 => (0, 0),
        }
    }
}

#[inline]
fn clamp_round(v: f64) -> u8 {
    // f64::round rounds half away from zero.
    v.round().clamp(0.0, 255.0) as u8
}

/// BT.601 full-range YCbCr to RGB for one sample.
#[inline]
pub fn yuv_to_rgb(y: u8, u: u8, v: u8) -> [u8; 3] {
    let y = y as f64;
    let cb = u as f64 - 128.0;
    let cr = v as f64 - 128.0;
    [
        clamp_round(y + 1.402 * cr),
        clamp_round(y - 0.344_136 * cb - 0.714_136 * cr),
        clamp_round(y + 1.772 * cb),
    ]
}

/// BT.601 full-range RGB to YCbCr for one sample.
#[inline]
pub fn rgb_to_yuv(rgb: [u8; 3]) -> [u8; 3] {
    let [r, g, b] = rgb.map(f64::from);
    [
        clamp_round(0.299 * r + 0.587 * g + 0.114 * b),
        clamp_round(128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b),
        clamp_round(128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b),
    ]
}

/// Streaming decoder over a YUV4MPEG2 byte stream.
pub struct Y4mReader<R> {
    inner: R,
    width: usize,
    height: usize,
    chroma: Chroma,
    offset: u64,
    next_index: u64,
    failed: bool,
    y: Vec<u8>,
    u: Vec<u8>,
    v: Vec<u8>,
}

fn read_line<R: BufRead>(r: &mut R, offset: u64, limit: usize) -> Result<Option<Vec<u8>>> {
    let mut line = Vec::new();
    let n = r.by_ref().take(limit as u64).read_until(b'\n', &mut line)?;
    if n == 0 {
        return Ok(None);
    }
    if line.last() != Some(&b'\n') {
        return Err(Error::Parse {
            offset: offset + n as u64,
            message: "unterminated header line".into(),
        });
    }
    line.pop();
    Ok(Some(line))
}

/// Opens a Y4M stream, parsing the header eagerly.
pub fn open_y4m<R: Read>(reader: R) -> Result<(VideoMeta, Y4mReader<BufReader<R>>)> {
    let mut inner = BufReader::new(reader);
    let line = read_line(&mut inner, 0, 4096)?.ok_or(Error::Parse {
        offset: 0,
        message: "empty stream".into(),
    })?;
    let header_len = line.len() as u64 + 1;
    let text = std::str::from_utf8(&line).map_err(|e| Error::Parse {
        offset: e.valid_up_to() as u64,
        message: "header is not ASCII".into(),
    })?;

    let mut fields = text.split(' ');
    if fields.next() != Some("YUV4MPEG2") {
        return Err(Error::Parse {
            offset: 0,
            message: "missing YUV4MPEG2 signature".into(),
        });
    }
    let mut width = None;
    let mut height = None;
    let mut rate = None;
    let mut chroma = Chroma::C420;
    let mut pos = "YUV4MPEG2".len() as u64;
    for field in fields {
        pos += 1;
        let bad = |what: &str| Error::Parse {
            offset: pos,
            message: format!("malformed {what} field '{field}'"),
        };
        let (tag, value) = field.split_at(field.len().min(1));
        match tag {
            "W" => width = Some(value.parse::<usize>().map_err(|_| bad("width"))?),
            "H" => height = Some(value.parse::<usize>().map_err(|_| bad("height"))?),
            "F" => {
                let (n, d) = value.split_once(':').ok_or_else(|| bad("frame rate"))?;
                let n = n.parse().map_err(|_| bad("frame rate"))?;
                let d = d.parse().map_err(|_| bad("frame rate"))?;
                rate = Some(Rational::new(n, d).map_err(|_| bad("frame rate"))?);
            }
            "C" => chroma = Chroma::parse(value)?,
            "X" => {
                if let Some(depth) = value.strip_prefix("YSCSS=") {
                    if !matches!(depth, "420JPEG" | "420PALDV" | "420MPEG2" | "422" | "444") {
                        return Err(Error::Unsupported(format!("Y4M extension X{value}")));
                    }
                }
            }
            "I" | "A" => {}
            "" => {}
            _ => return Err(bad("header")),
        }
        pos += field.len() as u64;
    }
    let (width, height) = match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => (w, h),
        _ => {
            return Err(Error::Parse {
                offset: 0,
                message: "header lacks positive W and H".into(),
            })
        }
    };
    let frame_rate = rate.ok_or(Error::Parse {
        offset: 0,
        message: "header lacks F field".into(),
    })?;
    let (cw, ch) = chroma.plane_dims(width, height);
    let meta = VideoMeta {
        width,
        height,
        frame_rate,
        frame_count: None,
    };
    Ok((
        meta,
        Y4mReader {
            inner,
            width,
            height,
            chroma,
            offset: header_len,
            next_index: 0,
            failed: false,
            y: vec![0; width * height],
            u: vec![0; cw * ch],
            v: vec![0; cw * ch],
        },
    ))
}

impl<R: BufRead> Y4mReader<R> {
    fn read_plane(&mut self, which: usize, expected: usize, received: &mut usize) -> Result<()> {
        let buf = match which {
            0 => &mut self.y,
            1 => &mut self.u,
            _ => &mut self.v,
        };
        let mut filled = 0;
        while filled < buf.len() {
            let n = self.inner.read(&mut buf[filled..])?;
            if n == 0 {
                return Err(Error::Truncated {
                    frame: self.next_index,
                    expected,
                    received: *received + filled,
                });
            }
            filled += n;
        }
        *received += filled;
        self.offset += filled as u64;
        Ok(())
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        let Some(line) = read_line(&mut self.inner, self.offset, 1024)? else {
            return Ok(None);
        };
        if !line.starts_with(b"FRAME") {
            return Err(Error::Parse {
                offset: self.offset,
                message: "expected FRAME marker".into(),
            });
        }
        self.offset += line.len() as u64 + 1;

        let expected = self.y.len() + self.u.len() + self.v.len();
        let mut received = 0;
        for plane in 0..3 {
            self.read_plane(plane, expected, &mut received)?;
        }

        let (sx, sy) = self.chroma.shifts();
        let cw = self.chroma.plane_dims(self.width, self.height).0;
        let mut pixels = Vec::with_capacity(self.width * self.height * 3);
        for row in 0..self.height {
            let crow = (row >> sy) * cw;
            for col in 0..self.width {
                let c = crow + (col >> sx);
                pixels.extend_from_slice(&yuv_to_rgb(
                    self.y[row * self.width + col],
                    self.u[c],
                    self.v[c],
                ));
            }
        }
        let frame = Frame::new(self.next_index, self.width, self.height, pixels)?;
        self.next_index += 1;
        Ok(Some(frame))
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let out = self.next_frame().transpose();
        if matches!(out, Some(Err(_))) {
            self.failed = true;
        }
        out
    }
}

/// Writes frames as a 4:4:4 Y4M stream.
pub fn write_y4m<W: Write>(mut out: W, frame_rate: Rational, frames: &[Frame]) -> Result<()> {
    let Some(first) = frames.first() else {
        return Err(Error::EmptyVideo);
    };
    let (w, h) = (first.width(), first.height());
    writeln!(
        out,
        "YUV4MPEG2 W{w} H{h} F{}:{} Ip A1:1 C444",
        frame_rate.num, frame_rate.den
    )?;
    let mut planes = vec![0u8; w * h * 3];
    for frame in frames {
        if frame.width() != w || frame.height() != h {
            return Err(Error::Shape("frames differ in size".into()));
        }
        for (i, px) in frame.pixels().chunks_exact(3).enumerate() {
            let [y, u, v] = rgb_to_yuv([px[0], px[1], px[2]]);
            planes[i] = y;
            planes[w * h + i] = u;
            planes[2 * w * h + i] = v;
        }
        out.write_all(b"FRAME\n")?;
        out.write_all(&planes)?;
    }
    out.flush()?;
    Ok(())
}

/// Sidecar metadata for raw RGB24 files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMeta {
    pub width: usize,
    pub height: usize,
    pub fps_num: u32,
    pub fps_den: u32,
}

impl RawMeta {
    pub fn to_meta(self, frame_count: Option<u64>) -> Result<VideoMeta> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Format("raw sidecar has zero width or height".into()));
        }
        Ok(VideoMeta {
            width: self.width,
            height: self.height,
            frame_rate: Rational::new(self.fps_num, self.fps_den)?,
            frame_count,
        })
    }
}

/// Sidecar path for a raw file: `clip.rgb` → `clip.rgb.json`.
pub fn raw_sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub struct RawRgbReader<R> {
    inner: R,
    width: usize,
    height: usize,
    remaining: u64,
    next_index: u64,
}

impl<R: Read> Iterator for RawRgbReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let mut buf = vec![0u8; self.width * self.height * 3];
        if let Err(e) = self.inner.read_exact(&mut buf) {
            self.remaining = 0;
            return Some(Err(e.into()));
        }
        let frame = Frame::new(self.next_index, self.width, self.height, buf);
        self.next_index += 1;
        Some(frame)
    }
}

/// Opens a raw RGB24 file; `meta.frame_count` is replaced by the count implied
/// by the file size.
pub fn open_raw_rgb(
    path: &Path,
    meta: VideoMeta,
) -> Result<(VideoMeta, RawRgbReader<BufReader<File>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let frame_bytes = (meta.width * meta.height * 3) as u64;
    if frame_bytes == 0 || len % frame_bytes != 0 {
        return Err(Error::Format(format!(
            "{}: size {len} is not a multiple of the {}x{} RGB frame size {frame_bytes}",
            path.display(),
            meta.width,
            meta.height
        )));
    }
    let count = len / frame_bytes;
    let meta = VideoMeta {
        frame_count: Some(count),
        ..meta
    };
    Ok((
        meta,
        RawRgbReader {
            inner: BufReader::new(file),
            width: meta.width,
            height: meta.height,
            remaining: count,
            next_index: 0,
        },
    ))
}

/// Writes frames back to back plus the JSON sidecar.
pub fn write_raw_rgb(path: &Path, frame_rate: Rational, frames: &[Frame]) -> Result<()> {
    let Some(first) = frames.first() else {
        return Err(Error::EmptyVideo);
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for frame in frames {
        if frame.width() != first.width() || frame.height() != first.height() {
            return Err(Error::Shape("frames differ in size".into()));
        }
        out.write_all(frame.pixels()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    let sidecar = RawMeta {
        width: first.width(),
        height: first.height(),
        fps_num: frame_rate.num,
        fps_den: frame_rate.den,
    };
    let side = raw_sidecar_path(path);
    std::fs::write(&side, serde_json::to_vec_pretty(&sidecar).expect("plain struct"))
        .map_err(|e| Error::io(&side, e))?;
    Ok(())
}

/// Boxed frame stream for format-agnostic callers.
pub type FrameStream = Box<dyn Iterator<Item = Result<Frame>> + Send>;

/// Opens `path` by extension: `-` reads Y4M from stdin, `.y4m` is Y4M, and
/// anything else is treated as raw RGB24 with a `<path>.json` sidecar.
pub fn open_video(path: &Path) -> Result<(VideoMeta, FrameStream)> {
    if path.as_os_str() == "-" {
        let (meta, frames) = open_y4m(std::io::stdin())?;
        return Ok((meta, Box::new(frames)));
    }
    let is_y4m = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("y4m"));
    if is_y4m {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (meta, frames) = open_y4m(file)?;
        Ok((meta, Box::new(frames)))
    } else {
        let side = raw_sidecar_path(path);
        let text = std::fs::read(&side).map_err(|e| Error::io(&side, e))?;
        let raw: RawMeta = serde_json::from_slice(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
        let (meta, frames) = open_raw_rgb(path, raw.to_meta(None)?)?;
        Ok((meta, Box::new(frames)))
    }
}
