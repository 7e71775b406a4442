//! Four-mode intra prediction over the reconstructed plane.

use crate::frame_io::Frame;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Dc,
    Planar,
    Horizontal,
    Vertical,
}

pub const ALL_MODES: [Mode; 4] = [Mode::Dc, Mode::Planar, Mode::Horizontal, Mode::Vertical];

impl Mode {
    pub fn index(self) -> u8 {
        match self {
            Mode::Dc => 0,
            Mode::Planar => 1,
            Mode::Horizontal => 2,
            Mode::Vertical => 3,
        }
    }

    pub fn from_index(i: u8) -> Option<Mode> {
        match i {
            0 => Some(Mode::Dc),
            1 => Some(Mode::Planar),
            2 => Some(Mode::Horizontal),
            3 => Some(Mode::Vertical),
            _ => None,
        }
    }
}

/// Predicts an `n` x `n` block at (x, y) from the already-reconstructed
/// top row and left column. References outside the frame substitute 128.
pub fn predict(recon: &Frame, x: u32, y: u32, n: u32, mode: Mode) -> Vec<u8> {
    let n = n as usize;
    let above = y > 0;
    let left = x > 0;
    let mut top = vec![128u8; n];
    let mut lft = vec![128u8; n];
    if above {
        for i in 0..n {
            top[i] = recon.sample(x + i as u32, y - 1);
        }
    }
    if left {
        for j in 0..n {
            lft[j] = recon.sample(x - 1, y + j as u32);
        }
    }

    let mut out = vec![0u8; n * n];
    match mode {
        Mode::Dc => {
            let (sum, count): (u32, u32) = match (above, left) {
                (true, true) => (
                    top.iter().map(|&v| v as u32).sum::<u32>()
                        + lft.iter().map(|&v| v as u32).sum::<u32>(),
                    2 * n as u32,
                ),
                (true, false) => (top.iter().map(|&v| v as u32).sum(), n as u32),
                (false, true) => (lft.iter().map(|&v| v as u32).sum(), n as u32),
                (false, false) => (128, 1),
            };
            let dc = ((sum + count / 2) / count) as u8;
            out.fill(dc);
        }
        Mode::Planar => {
            let tr = top[n - 1] as u32;
            let bl = lft[n - 1] as u32;
            let log2n = n.trailing_zeros();
            for j in 0..n {
                for i in 0..n {
                    let h = (n as u32 - 1 - i as u32) * lft[j] as u32 + (i as u32 + 1) * tr;
                    let v = (n as u32 - 1 - j as u32) * top[i] as u32 + (j as u32 + 1) * bl;
                    out[j * n + i] = ((h + v + n as u32) >> (log2n + 1)) as u8;
                }
            }
        }
        Mode::Horizontal => {
            for j in 0..n {
                out[j * n..(j + 1) * n].fill(lft[j]);
            }
        }
        Mode::Vertical => {
            for j in 0..n {
                out[j * n..(j + 1) * n].copy_from_slice(&top);
            }
        }
    }
    out
}
