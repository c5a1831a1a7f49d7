//! Gray-labelled square QAM alphabets.
//!
//! Points are stored by label: `points()[b]` is the symbol that carries the bit
//! pattern `b` (most significant bit first). The upper half of the label picks
//! the in-phase level and the lower half the quadrature level, each through a
//! binary-reflected Gray code, and the alphabet is scaled to unit average
//! energy so that a per-symbol SNR is simply `1 / sigma^2`.

use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<C64>,
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

impl Constellation {
    /// Square M-QAM for `order` in {4, 16, 64, ...}.
    pub fn qam(order: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || order.trailing_zeros() % 2 != 0 {
            return Err(Error::invalid(format!(
                "QAM order must be an even power of two (4, 16, 64, ...), got {order}"
            )));
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        let half = bits_per_symbol / 2;
        let side = 1usize << half;
        let mask = side - 1;
        // levels -(side-1), ..., side-1 in steps of 2; mean energy 2(M-1)/3
        let scale = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        let level = |g: usize| (2.0 * gray_to_binary(g) as f64 - (side as f64 - 1.0)) * scale;
        let points = (0..order)
            .map(|label| C64::new(level(label >> half), level(label & mask)))
            .collect();
        Ok(Constellation { order, bits_per_symbol, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn max_energy(&self) -> f64 {
        self.points.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max)
    }

    /// Bit pattern of the point with index `index`, MSB first.
    pub fn label_bits(&self, index: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.bits_per_symbol).rev().map(move |b| (index >> b) & 1 == 1)
    }

    pub fn map_bits(&self, bits: &[bool]) -> Result<Vec<C64>> {
        if bits.len() % self.bits_per_symbol != 0 {
            return Err(Error::invalid(format!(
                "{} bits is not a multiple of {} bits per symbol",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        Ok(bits
            .chunks(self.bits_per_symbol)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                self.points[label]
            })
            .collect())
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn slice_index(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            let d = (z - a).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Nearest point and its bit label.
    pub fn slice(&self, z: C64) -> (C64, Vec<bool>) {
        let i = self.slice_index(z);
        (self.points[i], self.label_bits(i).collect())
    }

    /// Hard-decides every entry and appends the labels to one bit vector.
    pub fn demap_hard(&self, symbols: impl IntoIterator<Item = C64>) -> Vec<bool> {
        let mut bits = Vec::new();
        for z in symbols {
            bits.extend(self.label_bits(self.slice_index(z)));
        }
        bits
    }
}
