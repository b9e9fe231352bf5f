use serde::{Deserialize, Serialize};

use super::{ByteOrder, CanError, CanSignalDef};

/// What the encoder does with a physical value outside the signal range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangePolicy {
    #[default]
    Clamp,
    Strict,
}

/// Frame position (`byte * 8 + bit`) of raw bit `i` (0 = LSB), or `None`
/// past the eighth byte.
pub(crate) fn bit_position(def: &CanSignalDef, i: u32) -> Option<u32> {
    let start = def.start_bit as u32;
    let pos = match def.byte_order {
        ByteOrder::LittleEndian => start + i,
        ByteOrder::BigEndian => {
            // walk the MSB-first linear order, then map back to sawtooth numbering
            let linear = (start / 8) * 8 + (7 - start % 8) + (def.bit_length as u32 - 1 - i);
            (linear / 8) * 8 + (7 - linear % 8)
        }
    };
    (pos < 64).then_some(pos)
}

fn layout_error(def: &CanSignalDef, reason: &str) -> CanError {
    CanError::InvalidSignal {
        signal: def.name.clone(),
        reason: reason.to_string(),
    }
}

fn check_layout(def: &CanSignalDef, frame_len: usize) -> Result<(), CanError> {
    if !(1..=64).contains(&def.bit_length) {
        return Err(layout_error(def, "bit length outside 1..=64"));
    }
    // positions are monotone in the raw bit index, so the ends bound the field
    for i in [0, def.bit_length as u32 - 1] {
        match bit_position(def, i) {
            Some(p) if (p / 8) < frame_len as u32 => {}
            _ => return Err(layout_error(def, "field does not fit the frame")),
        }
    }
    Ok(())
}

/// Writes the low `bit_length` bits of `raw` into the field, leaving every
/// other bit of the frame untouched.
pub fn encode_raw(def: &CanSignalDef, raw: u64, frame: &mut [u8]) -> Result<(), CanError> {
    check_layout(def, frame.len())?;
    for i in 0..def.bit_length as u32 {
        let p = bit_position(def, i).expect("checked");
        let mask = 1u8 << (p % 8);
        if (raw >> i) & 1 == 1 {
            frame[(p / 8) as usize] |= mask;
        } else {
            frame[(p / 8) as usize] &= !mask;
        }
    }
    Ok(())
}

/// Reads the field's bits, zero-extended.
pub fn decode_raw(def: &CanSignalDef, frame: &[u8]) -> Result<u64, CanError> {
    check_layout(def, frame.len())?;
    let mut raw = 0u64;
    for i in 0..def.bit_length as u32 {
        let p = bit_position(def, i).expect("checked");
        if frame[(p / 8) as usize] >> (p % 8) & 1 == 1 {
            raw |= 1 << i;
        }
    }
    Ok(raw)
}

/// Encodes `value` as `round((value - offset) / scale)`, two's complement
/// for signed fields, and returns the raw integer.
///
/// Physical values are `f64`, so fields wider than 53 bits cannot hold
/// every raw value to within `scale / 2`.
pub fn encode_signal(def: &CanSignalDef, value: f64, frame: &mut [u8], policy: RangePolicy) -> Result<i128, CanError> {
    let (min, max) = def.physical_range();
    let out_of_range = || CanError::ValueOutOfRange {
        signal: def.name.clone(),
        value,
        min,
        max,
    };
    if !value.is_finite() {
        return Err(out_of_range());
    }
    let v = if value < min || value > max {
        match policy {
            RangePolicy::Strict => return Err(out_of_range()),
            RangePolicy::Clamp => value.clamp(min, max),
        }
    } else {
        value
    };
    let (lo, hi) = def.raw_limits();
    let raw = (((v - def.offset) / def.scale).round() as i128).clamp(lo, hi);
    encode_raw(def, raw as u64, frame)?;
    Ok(raw)
}

pub fn decode_signal(def: &CanSignalDef, frame: &[u8]) -> Result<f64, CanError> {
    let bits = decode_raw(def, frame)?;
    let n = def.bit_length as u32;
    let raw = if def.signed && n < 64 && (bits >> (n - 1)) & 1 == 1 {
        bits as i128 - (1i128 << n)
    } else if def.signed {
        bits as i64 as i128
    } else {
        bits as i128
    };
    Ok(raw as f64 * def.scale + def.offset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(start: u8, len: u8, order: ByteOrder, signed: bool, scale: f64) -> CanSignalDef {
        CanSignalDef {
            name: "s".into(),
            start_bit: start,
            bit_length: len,
            byte_order: order,
            signed,
            scale,
            offset: 0.0,
            min: 0.0,
            max: 0.0,
            unit: String::new(),
        }
    }

    #[test]
    fn speed_packs_little_endian() {
        let mut def = sig(0, 16, ByteOrder::LittleEndian, false, 0.01);
        def.max = 655.35;
        let mut f = [0u8; 8];
        assert_eq!(encode_signal(&def, 100.0, &mut f, RangePolicy::Strict).unwrap(), 10000);
        assert_eq!(f, [0x10, 0x27, 0, 0, 0, 0, 0, 0]);
        assert!((decode_signal(&def, &f).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn offset_value_is_all_zero() {
        let mut def = sig(4, 12, ByteOrder::LittleEndian, false, 0.25);
        def.offset = -40.0;
        let mut f = [0xFFu8; 8];
        encode_signal(&def, -40.0, &mut f, RangePolicy::Strict).unwrap();
        assert_eq!(decode_raw(&def, &f).unwrap(), 0);
        assert_eq!(f, [0x0F, 0x00, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF]);
    }

    #[test]
    fn signed_minus_one_is_ff() {
        let def = sig(8, 8, ByteOrder::LittleEndian, true, 1.0);
        let mut f = [0u8; 8];
        encode_signal(&def, -1.0, &mut f, RangePolicy::Strict).unwrap();
        assert_eq!(f[1], 0xFF);
        assert_eq!(decode_signal(&def, &f).unwrap(), -1.0);
    }

    #[test]
    fn motorola_msb_first() {
        // 12-bit field, MSB at bit 7 of byte 0, ends at bit 4 of byte 1
        let def = sig(7, 12, ByteOrder::BigEndian, false, 1.0);
        let mut f = [0u8; 8];
        encode_raw(&def, 0xABC, &mut f).unwrap();
        assert_eq!(&f[..2], &[0xAB, 0xC0]);
        assert_eq!(decode_raw(&def, &f).unwrap(), 0xABC);
        // mid-byte start crosses into the next byte's top bits
        let def = sig(3, 8, ByteOrder::BigEndian, false, 1.0);
        let mut f = [0u8; 8];
        encode_raw(&def, 0xFF, &mut f).unwrap();
        assert_eq!(&f[..2], &[0x0F, 0xF0]);
    }

    #[test]
    fn sixty_four_bit_fields_round_trip_raw() {
        for order in [ByteOrder::LittleEndian, ByteOrder::BigEndian] {
            let start = if order == ByteOrder::LittleEndian { 0 } else { 7 };
            let def = sig(start, 64, order, true, 1.0);
            let mut f = [0u8; 8];
            encode_raw(&def, 0x8123_4567_89AB_CDEF, &mut f).unwrap();
            assert_eq!(decode_raw(&def, &f).unwrap(), 0x8123_4567_89AB_CDEF);
        }
    }

    #[test]
    fn clamp_and_strict() {
        let mut def = sig(0, 8, ByteOrder::LittleEndian, false, 0.5);
        def.max = 100.0;
        let mut f = [0u8; 8];
        assert_eq!(encode_signal(&def, 250.0, &mut f, RangePolicy::Clamp).unwrap(), 200);
        assert!(matches!(
            encode_signal(&def, 250.0, &mut f, RangePolicy::Strict),
            Err(CanError::ValueOutOfRange { .. })
        ));
        assert!(encode_signal(&def, f64::NAN, &mut f, RangePolicy::Clamp).is_err());
    }

    #[test]
    fn short_frame_is_rejected() {
        let def = sig(8, 8, ByteOrder::LittleEndian, false, 1.0);
        assert!(matches!(decode_raw(&def, &[0u8; 1]), Err(CanError::InvalidSignal { .. })));
        assert_eq!(decode_raw(&def, &[0, 7]).unwrap(), 7);
    }
}
