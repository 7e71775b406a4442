//! Syndrome-trellis codes: minimize total additive cost subject to a
//! syndrome constraint H * stego = message over GF(2).
//!
//! H is built by sliding an h-bit column pattern down a staircase of
//! per-message-bit blocks; embedding runs the Viterbi algorithm over the
//! 2^h-state trellis and is exactly optimal for the additive cost model.

use crate::error::{Error, Result};

/// Sentinel cost for positions that must never be flipped.
pub const WET: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq)]
pub struct StcParams {
    /// Constraint height, 2..=12.
    pub h: u8,
    /// Column pattern, hhat[0] is row 0 of the sliding block. First and
    /// last bits must be 1 so the full constraint length is used.
    pub hhat: Vec<u8>,
    /// Recorded in stego headers; the column layout itself is a pure
    /// function of (n, m, h, hhat).
    pub seed: u64,
}

impl StcParams {
    pub fn new(h: u8, hhat: Vec<u8>, seed: u64) -> Result<Self> {
        if !(2..=12).contains(&h) {
            return Err(Error::invalid("stc constraint height must be in 2..=12"));
        }
        if hhat.len() != h as usize {
            return Err(Error::invalid("hhat length must equal h"));
        }
        if hhat.iter().any(|&b| b > 1) {
            return Err(Error::invalid("hhat entries must be bits"));
        }
        if hhat[0] != 1 || hhat[h as usize - 1] != 1 {
            return Err(Error::invalid("hhat must start and end with 1"));
        }
        Ok(Self { h, hhat, seed })
    }

    /// h = 7 with the repeating 1,1,0 pattern.
    pub fn default_production(seed: u64) -> Self {
        Self::new(7, vec![1, 1, 0, 1, 1, 0, 1], seed).expect("valid default")
    }

    fn hhat_mask(&self) -> u32 {
        self.hhat
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &b)| acc | ((b as u32) << i))
    }
}

/// Banded parity-check matrix layout: for each column its block (message
/// row) index and the hhat mask truncated at row m.
#[derive(Clone, Debug)]
pub struct ParityMatrix {
    pub n: usize,
    pub m: usize,
    pub h: u8,
    /// (block index, truncated column mask) per cover position.
    cols: Vec<(usize, u32)>,
    /// Number of columns in each block.
    block_widths: Vec<usize>,
}

impl ParityMatrix {
    /// Rows set in column `j`, as absolute row indices.
    pub fn column_rows(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let (block, mask) = self.cols[j];
        (0..32u32)
            .filter(move |k| mask >> k & 1 == 1)
            .map(move |k| block + k as usize)
    }

    pub fn block_widths(&self) -> &[usize] {
        &self.block_widths
    }

    /// H * x over GF(2).
    pub fn syndrome(&self, x: &[u8]) -> Vec<u8> {
        let mut syn = vec![0u8; self.m];
        for (j, &bit) in x.iter().enumerate() {
            if bit == 1 {
                for row in self.column_rows(j) {
                    syn[row] ^= 1;
                }
            }
        }
        syn
    }
}

/// Places hhat-derived blocks along the diagonal: block i holds
/// floor(n/m) columns, with the remainder spread over the first n mod m
/// blocks; the column pattern is truncated where it would run past row m.
pub fn build_parity(n: usize, m: usize, params: &StcParams) -> Result<ParityMatrix> {
    if m == 0 {
        return Err(Error::invalid("message length must be positive"));
    }
    if m > n {
        return Err(Error::invalid(format!("message length {m} exceeds cover length {n}")));
    }
    let base = n / m;
    let extra = n % m;
    let mask_full = params.hhat_mask();
    let mut cols = Vec::with_capacity(n);
    let mut block_widths = Vec::with_capacity(m);
    for block in 0..m {
        let w = base + (block < extra) as usize;
        block_widths.push(w);
        let remaining = m - block;
        let mask = if remaining >= params.h as usize {
            mask_full
        } else {
            mask_full & ((1u32 << remaining) - 1)
        };
        for _ in 0..w {
            cols.push((block, mask));
        }
    }
    Ok(ParityMatrix { n, m, h: params.h, cols, block_widths })
}

/// Minimum-cost embedding: returns stego bits and the total cost of the
/// flipped positions. WET positions are never flipped; if no finite-cost
/// solution exists the embed fails rather than corrupting the cover.
pub fn stc_embed(
    cover: &[u8],
    costs: &[f64],
    message: &[u8],
    params: &StcParams,
) -> Result<(Vec<u8>, f64)> {
    let n = cover.len();
    let m = message.len();
    if costs.len() != n {
        return Err(Error::invalid("cost vector length mismatch"));
    }
    if costs.iter().any(|&c| c < 0.0 || c.is_nan()) {
        return Err(Error::invalid("costs must be non-negative"));
    }
    if m == 0 {
        return Ok((cover.to_vec(), 0.0));
    }
    if m > n {
        return Err(Error::Capacity { needed: m, available: n });
    }
    let parity = build_parity(n, m, params)?;

    // clamp WET above any feasible finite path sum so comparisons stay total
    let finite_sum: f64 = costs.iter().filter(|c| c.is_finite()).sum();
    let wet_cost = finite_sum + 1.0;
    let rho: Vec<f64> = costs
        .iter()
        .map(|&c| if c.is_finite() { c } else { wet_cost })
        .collect();

    let n_states = 1usize << params.h;
    let mut weights = vec![f64::INFINITY; n_states];
    weights[0] = 0.0;
    // per column, chosen stego bit per arrival state
    let mut decisions: Vec<Vec<u8>> = Vec::with_capacity(n);

    let mut col = 0usize;
    for (block, &width) in parity.block_widths().iter().enumerate() {
        for _ in 0..width {
            let (_, mask) = parity.cols[col];
            let mask = mask as usize;
            let x = cover[col];
            let cost = rho[col];
            let mut next = vec![f64::INFINITY; n_states];
            let mut dec = vec![0u8; n_states];
            for state in 0..n_states {
                let w_y0 = weights[state] + if x == 1 { cost } else { 0.0 };
                let w_y1 = weights[state ^ mask] + if x == 0 { cost } else { 0.0 };
                // prefer keeping the cover bit on exact ties
                let take_one = if (w_y1 - w_y0).abs() == 0.0 { x == 1 } else { w_y1 < w_y0 };
                if take_one {
                    next[state] = w_y1;
                    dec[state] = 1;
                } else {
                    next[state] = w_y0;
                    dec[state] = 0;
                }
            }
            weights = next;
            decisions.push(dec);
            col += 1;
        }
        // consume message bit `block`: constrain the window LSB, shift down
        let bit = message[block] as usize;
        let mut next = vec![f64::INFINITY; n_states];
        for (state, slot) in next.iter_mut().enumerate().take(n_states >> 1) {
            *slot = weights[(state << 1) | bit];
        }
        weights = next;
    }

    let total = weights[0];
    if !total.is_finite() {
        return Err(Error::Infeasible("no path satisfies the syndrome".into()));
    }
    if total >= wet_cost {
        return Err(Error::Infeasible("syndrome requires flipping a wet position".into()));
    }

    // backtrack
    let mut stego = vec![0u8; n];
    let mut state = 0usize;
    let mut col = n;
    for block in (0..parity.m).rev() {
        state = (state << 1) | message[block] as usize;
        for _ in 0..parity.block_widths()[block] {
            col -= 1;
            let y = decisions[col][state];
            stego[col] = y;
            if y == 1 {
                state ^= parity.cols[col].1 as usize;
            }
        }
    }
    debug_assert_eq!(state, 0);
    debug_assert_eq!(parity.syndrome(&stego), message);

    let actual: f64 = stego
        .iter()
        .zip(cover)
        .zip(costs)
        .filter(|((s, c), _)| s != c)
        .map(|(_, &cost)| cost)
        .sum();
    if !actual.is_finite() {
        return Err(Error::Infeasible("syndrome requires flipping a wet position".into()));
    }
    Ok((stego, actual))
}

/// Extraction is the syndrome itself: H * stego.
pub fn stc_extract(stego: &[u8], m: usize, params: &StcParams) -> Result<Vec<u8>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    if m > stego.len() {
        return Err(Error::Extraction(format!(
            "message length {m} exceeds stego length {}",
            stego.len()
        )));
    }
    let parity = build_parity(stego.len(), m, params)?;
    Ok(parity.syndrome(stego))
}
