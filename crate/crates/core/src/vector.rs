//! Vector register values: a VLEN-bit little-endian bit vector with
//! per-SEW element views and a 32-bit IEEE-754 view.

use std::fmt;

/// Selected element width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sew {
    E8,
    E16,
    E32,
}

impl Sew {
    pub fn bits(self) -> usize {
        match self {
            Sew::E8 => 8,
            Sew::E16 => 16,
            Sew::E32 => 32,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() / 8
    }

    pub fn from_bits(bits: usize) -> Option<Sew> {
        match bits {
            8 => Some(Sew::E8),
            16 => Some(Sew::E16),
            32 => Some(Sew::E32),
            _ => None,
        }
    }
}

/// One VLEN-bit register value. Element 0 occupies the lowest-addressed
/// bytes; integers are two's-complement little-endian.
#[derive(Clone, PartialEq, Eq)]
pub struct VectorValue {
    bytes: Vec<u8>,
}

impl VectorValue {
    /// All-zero value of the given width (must be a positive multiple of 32).
    pub fn zero(vlen_bits: usize) -> VectorValue {
        assert!(vlen_bits > 0 && vlen_bits % 32 == 0);
        VectorValue {
            bytes: vec![0; vlen_bits / 8],
        }
    }

    pub fn from_bytes(bytes: Vec<u8>) -> VectorValue {
        assert!(!bytes.is_empty() && bytes.len() % 4 == 0);
        VectorValue { bytes }
    }

    pub fn vlen_bits(&self) -> usize {
        self.bytes.len() * 8
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Element count for the given SEW.
    pub fn elems(&self, sew: Sew) -> usize {
        self.vlen_bits() / sew.bits()
    }

    /// Reads element `i` as a sign-extended integer.
    pub fn get_int(&self, sew: Sew, i: usize) -> i64 {
        let off = i * sew.bytes();
        match sew {
            Sew::E8 => self.bytes[off] as i8 as i64,
            Sew::E16 => i16::from_le_bytes([self.bytes[off], self.bytes[off + 1]]) as i64,
            Sew::E32 => i32::from_le_bytes([
                self.bytes[off],
                self.bytes[off + 1],
                self.bytes[off + 2],
                self.bytes[off + 3],
            ]) as i64,
        }
    }

    /// Writes element `i`, truncating `v` to the element width.
    pub fn set_int(&mut self, sew: Sew, i: usize, v: i64) {
        let off = i * sew.bytes();
        match sew {
            Sew::E8 => self.bytes[off] = v as u8,
            Sew::E16 => self.bytes[off..off + 2].copy_from_slice(&(v as i16).to_le_bytes()),
            Sew::E32 => self.bytes[off..off + 4].copy_from_slice(&(v as i32).to_le_bytes()),
        }
    }

    /// Reads 32-bit element `i` as an IEEE-754 single.
    pub fn get_f32(&self, i: usize) -> f32 {
        f32::from_bits(self.get_int(Sew::E32, i) as u32)
    }

    /// Writes 32-bit element `i` as an IEEE-754 single.
    pub fn set_f32(&mut self, i: usize, v: f32) {
        self.set_int(Sew::E32, i, v.to_bits() as i64);
    }

    /// Mask-layout bit for element `i` (bit `i` of the register).
    pub fn mask_bit(&self, i: usize) -> bool {
        (self.bytes[i / 8] >> (i % 8)) & 1 != 0
    }

    pub fn set_mask_bit(&mut self, i: usize, b: bool) {
        if b {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }
}

impl fmt::Debug for VectorValue {
    // Hex dump, lowest byte first, matching the little-endian element order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v[")?;
        for b in &self.bytes {
            write!(f, "{b:02x}")?;
        }
        write!(f, "]")
    }
}
