//! Floating-point scalar abstraction shared by the metric, loss and model code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the numeric core is generic over.
///
/// Implemented for `f32` and `f64`. Checkpoints record [`Scalar::BYTES`] so a
/// file written with one width is rejected when loaded with the other.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    const BYTES: usize;

    fn write_le(self, out: &mut Vec<u8>);

    /// Reads one value from the first `BYTES` bytes of `bytes`.
    fn read_le(bytes: &[u8]) -> Self;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const BYTES: usize = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().unwrap())
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Scalar>(v: T) -> T {
        let mut buf = Vec::new();
        v.write_le(&mut buf);
        assert_eq!(buf.len(), T::BYTES);
        T::read_le(&buf)
    }

    #[test]
    fn le_roundtrip_is_bit_exact() {
        assert_eq!(roundtrip(0.1f32).to_bits(), 0.1f32.to_bits());
        assert_eq!(roundtrip(-3.5e-300f64).to_bits(), (-3.5e-300f64).to_bits());
    }
}
