//! Bitwise CRC over unaligned bit strings, MSB first, zero initial state.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crc {
    /// Generator without its leading `x^len` term.
    pub poly: u32,
    pub len: usize,
}

impl Crc {
    /// `x^12 + x^11 + x^3 + x^2 + x + 1`.
    pub const CRC12: Crc = Crc { poly: 0x80F, len: 12 };
    /// CCITT `x^16 + x^12 + x^5 + 1`.
    pub const CRC16: Crc = Crc { poly: 0x1021, len: 16 };

    pub fn with_len(len: usize) -> Option<Crc> {
        match len {
            12 => Some(Self::CRC12),
            16 => Some(Self::CRC16),
            _ => None,
        }
    }

    /// `payload(x) · x^len mod g(x)`, most significant bit first.
    pub fn remainder(&self, payload: &[u8]) -> Vec<u8> {
        let mask = (1u32 << self.len) - 1;
        let mut reg = 0u32;
        for &b in payload {
            let feedback = ((reg >> (self.len - 1)) & 1) ^ (b as u32 & 1);
            reg = (reg << 1) & mask;
            if feedback == 1 {
                reg ^= self.poly;
            }
        }
        (0..self.len).map(|i| ((reg >> (self.len - 1 - i)) & 1) as u8).collect()
    }

    /// `payload ‖ remainder`.
    pub fn append(&self, payload: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(payload.len() + self.len);
        out.extend_from_slice(payload);
        out.extend(self.remainder(payload));
        out
    }

    /// Whether the last `len` bits of `word` are the remainder of the rest.
    pub fn check(&self, word: &[u8]) -> bool {
        if word.len() < self.len {
            return false;
        }
        let (payload, tail) = word.split_at(word.len() - self.len);
        self.remainder(payload) == tail
    }
}
