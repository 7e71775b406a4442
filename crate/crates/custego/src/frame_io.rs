//! Raw and Y4M frame ingestion, CTU padding, and synthetic test frames.
//!
//! Only the luma plane is processed; chroma bytes of 4:2:0 sources are
//! skipped on load.

use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const CTU_SIZE: u32 = 64;

/// One 8-bit luma plane.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Frame {
    width: u32,
    height: u32,
    luma: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, luma: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        if luma.len() != (width as usize) * (height as usize) {
            return Err(Error::invalid(format!(
                "luma length {} does not match {}x{}",
                luma.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, luma })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    #[inline]
    pub fn sample(&self, x: u32, y: u32) -> u8 {
        self.luma[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set_sample(&mut self, x: u32, y: u32, v: u8) {
        self.luma[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        &self.luma[y as usize * w..(y as usize + 1) * w]
    }

    /// Extracts the top-left `w` x `h` region.
    pub fn crop(&self, w: u32, h: u32) -> Result<Frame> {
        if w > self.width || h > self.height {
            return Err(Error::invalid("crop larger than frame"));
        }
        let mut luma = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            luma.extend_from_slice(&self.row(y)[..w as usize]);
        }
        Frame::new(w, h, luma)
    }
}

/// Ordered frames of identical dimensions.
#[derive(Clone, Debug)]
pub struct VideoSequence {
    pub name: String,
    pub frames: Vec<Frame>,
}

impl VideoSequence {
    pub fn new(name: impl Into<String>, frames: Vec<Frame>) -> Result<Self> {
        let name = name.into();
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("video sequence must be non-empty"))?;
        let (w, h) = (first.width(), first.height());
        if frames.iter().any(|f| f.width() != w || f.height() != h) {
            return Err(Error::invalid("frames have heterogeneous dimensions"));
        }
        Ok(Self { name, frames })
    }

    pub fn width(&self) -> u32 {
        self.frames[0].width()
    }

    pub fn height(&self) -> u32 {
        self.frames[0].height()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VideoFormat {
    Y4m,
    /// Planar file with explicit dimensions; `chroma420` skips U/V planes.
    Raw {
        width: u32,
        height: u32,
        chroma420: bool,
    },
}

pub fn load_video(path: &Path, format: VideoFormat) -> Result<VideoSequence> {
    let data = fs::read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into());
    match format {
        VideoFormat::Y4m => parse_y4m(&data, name),
        VideoFormat::Raw { width, height, chroma420 } => {
            parse_raw(&data, width, height, chroma420, name)
        }
    }
}

fn parse_raw(data: &[u8], w: u32, h: u32, chroma420: bool, name: String) -> Result<VideoSequence> {
    if w == 0 || h == 0 {
        return Err(Error::format("zero dimensions"));
    }
    let luma_size = (w as usize) * (h as usize);
    let frame_size = if chroma420 { luma_size * 3 / 2 } else { luma_size };
    if data.is_empty() || data.len() % frame_size != 0 {
        return Err(Error::format(format!(
            "truncated frame: file size {} is not a multiple of frame size {}",
            data.len(),
            frame_size
        )));
    }
    let frames = data
        .chunks_exact(frame_size)
        .map(|chunk| Frame::new(w, h, chunk[..luma_size].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(name, frames)
}

fn parse_y4m(data: &[u8], name: String) -> Result<VideoSequence> {
    let header_end = data
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format("y4m: missing header terminator"))?;
    let header = std::str::from_utf8(&data[..header_end])
        .map_err(|_| Error::format("y4m: non-utf8 header"))?;
    if !header.starts_with("YUV4MPEG2") {
        return Err(Error::format("y4m: bad magic"));
    }
    let mut width = 0u32;
    let mut height = 0u32;
    let mut colorspace = "420".to_string();
    for tok in header.split_whitespace().skip(1) {
        match tok.as_bytes()[0] {
            b'W' => width = tok[1..].parse().map_err(|_| Error::format("y4m: bad W"))?,
            b'H' => height = tok[1..].parse().map_err(|_| Error::format("y4m: bad H"))?,
            b'C' => colorspace = tok[1..].to_string(),
            _ => {}
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::format("y4m: zero dimensions"));
    }
    let luma_size = (width as usize) * (height as usize);
    let chroma_size = if colorspace.starts_with("420") {
        luma_size / 2
    } else if colorspace.starts_with("422") {
        luma_size
    } else if colorspace.starts_with("444") {
        luma_size * 2
    } else if colorspace.starts_with("mono") {
        0
    } else {
        return Err(Error::format(format!("y4m: unsupported colorspace {colorspace}")));
    };

    let mut frames = Vec::new();
    let mut pos = header_end + 1;
    while pos < data.len() {
        let line_end = data[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("y4m: missing FRAME terminator"))?
            + pos;
        if !data[pos..].starts_with(b"FRAME") {
            return Err(Error::format("y4m: expected FRAME marker"));
        }
        pos = line_end + 1;
        if pos + luma_size + chroma_size > data.len() {
            return Err(Error::format("y4m: truncated frame"));
        }
        frames.push(Frame::new(width, height, data[pos..pos + luma_size].to_vec())?);
        pos += luma_size + chroma_size;
    }
    VideoSequence::new(name, frames)
}

/// Writes a sequence as Y4M with flat gray chroma (4:2:0).
pub fn write_y4m(path: &Path, video: &VideoSequence) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(
        format!(
            "YUV4MPEG2 W{} H{} F30:1 Ip A1:1 C420jpeg\n",
            video.width(),
            video.height()
        )
        .as_bytes(),
    );
    let chroma = (video.width() as usize * video.height() as usize) / 2;
    for frame in &video.frames {
        out.extend_from_slice(b"FRAME\n");
        out.extend_from_slice(frame.luma());
        out.extend(std::iter::repeat(128u8).take(chroma));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Rounds dimensions up to multiples of the CTU size by edge replication.
pub fn pad_to_ctu(frame: &Frame) -> Frame {
    let pw = frame.width().div_ceil(CTU_SIZE) * CTU_SIZE;
    let ph = frame.height().div_ceil(CTU_SIZE) * CTU_SIZE;
    if pw == frame.width() && ph == frame.height() {
        return frame.clone();
    }
    let mut luma = Vec::with_capacity((pw * ph) as usize);
    for y in 0..ph {
        let sy = y.min(frame.height() - 1);
        let row = frame.row(sy);
        luma.extend_from_slice(row);
        let last = *row.last().unwrap();
        luma.extend(std::iter::repeat(last).take((pw - frame.width()) as usize));
    }
    Frame::new(pw, ph, luma).expect("padded frame is well-formed")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SynthKind {
    Flat(u8),
    Gradient,
    Checker(u32),
    Noise(u64),
}

/// Deterministic synthetic test frame. `w` and `h` must be multiples of 8.
pub fn synth_frame(kind: SynthKind, w: u32, h: u32) -> Result<Frame> {
    if w == 0 || h == 0 || w % 8 != 0 || h % 8 != 0 {
        return Err(Error::invalid("synth dimensions must be positive multiples of 8"));
    }
    let mut luma = vec![0u8; (w * h) as usize];
    match kind {
        SynthKind::Flat(v) => luma.fill(v),
        SynthKind::Gradient => {
            let denom = (w + h - 2).max(1);
            for y in 0..h {
                for x in 0..w {
                    luma[(y * w + x) as usize] = ((x + y) * 255 / denom) as u8;
                }
            }
        }
        SynthKind::Checker(p) => {
            if p == 0 {
                return Err(Error::invalid("checker period must be positive"));
            }
            for y in 0..h {
                for x in 0..w {
                    let on = ((x / p) + (y / p)) % 2 == 0;
                    luma[(y * w + x) as usize] = if on { 0 } else { 255 };
                }
            }
        }
        SynthKind::Noise(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.fill_bytes(&mut luma);
        }
    }
    Frame::new(w, h, luma)
}
