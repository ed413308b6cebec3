//! Bit-exact payload framing and XOR masking of repetition offsets.
//!
//! Everything here is fixed MSB-first / big-endian so that two independent
//! implementations produce identical bytes. A 64-bit group splits into
//! 18+18+18+10 bit fields matching the four augmented subset widths.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SUBJECT_WIDTH: u8 = 18;
pub const PREDICATE_WIDTH: u8 = 18;
pub const OBJECT_WIDTH: u8 = 18;
pub const EMOTION_WIDTH: u8 = 10;
pub const GROUP_BITS: usize = 64;

const MASK_18: u32 = (1 << 18) - 1;
const MASK_10: u32 = (1 << 10) - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CipherError {
    #[error("bitstream truncated: need {need} bytes, have {have}")]
    TruncatedStream { need: usize, have: usize },
    #[error("non-zero bits in frame padding")]
    PaddingNonZero,
    #[error("bitstream length {0} bits is not a multiple of 64")]
    LengthNotMultipleOf64(usize),
    #[error("invalid timecode field {field}={value}")]
    InvalidTimeCode { field: &'static str, value: u32 },
    #[error("field value {value} exceeds {width}-bit width")]
    FieldTooWide { value: u32, width: u8 },
}

/// A framed payload: 32-bit big-endian byte length, payload bytes, zero
/// padding to a multiple of 64 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretFrame {
    bytes: Vec<u8>,
}

impl SecretFrame {
    /// Frame bytes, MSB-first. Always a positive multiple of 8 bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }

    /// Wrap an already-framed bitstream (for the decode path).
    pub fn from_bytes(bytes: Vec<u8>) -> Result<SecretFrame, CipherError> {
        if bytes.is_empty() || bytes.len() % 8 != 0 {
            return Err(CipherError::LengthNotMultipleOf64(bytes.len() * 8));
        }
        Ok(SecretFrame { bytes })
    }
}

/// Frame a payload into a 64-bit-aligned bitstream.
pub fn frame(payload: &[u8]) -> SecretFrame {
    assert!(payload.len() < u32::MAX as usize, "payload too large");
    let mut bytes = Vec::with_capacity(4 + payload.len() + 8);
    bytes.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    bytes.extend_from_slice(payload);
    while bytes.len() % 8 != 0 {
        bytes.push(0);
    }
    SecretFrame { bytes }
}

/// Recover the payload, validating length and zero padding.
pub fn deframe(frame: &SecretFrame) -> Result<Vec<u8>, CipherError> {
    let bytes = &frame.bytes;
    if bytes.len() < 4 {
        return Err(CipherError::TruncatedStream {
            need: 4,
            have: bytes.len(),
        });
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let need = 4 + len;
    if bytes.len() < need {
        return Err(CipherError::TruncatedStream {
            need,
            have: bytes.len(),
        });
    }
    if bytes[need..].iter().any(|&b| b != 0) {
        return Err(CipherError::PaddingNonZero);
    }
    Ok(bytes[4..need].to_vec())
}

/// One sentence's worth of secret bits: 18+18+18+10.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkGroup {
    pub subject_idx: u32,
    pub predicate_idx: u32,
    pub object_idx: u32,
    pub emotion_idx: u32,
}

impl ChunkGroup {
    pub fn from_u64(v: u64) -> ChunkGroup {
        ChunkGroup {
            subject_idx: ((v >> 46) as u32) & MASK_18,
            predicate_idx: ((v >> 28) as u32) & MASK_18,
            object_idx: ((v >> 10) as u32) & MASK_18,
            emotion_idx: (v as u32) & MASK_10,
        }
    }

    pub fn to_u64(self) -> u64 {
        ((self.subject_idx as u64 & MASK_18 as u64) << 46)
            | ((self.predicate_idx as u64 & MASK_18 as u64) << 28)
            | ((self.object_idx as u64 & MASK_18 as u64) << 10)
            | (self.emotion_idx as u64 & MASK_10 as u64)
    }
}

/// Slice a framed bitstream into 64-bit chunk groups.
pub fn split_chunks(frame: &SecretFrame) -> Vec<ChunkGroup> {
    frame
        .bytes
        .chunks_exact(8)
        .map(|c| ChunkGroup::from_u64(u64::from_be_bytes(c.try_into().unwrap())))
        .collect()
}

/// Inverse of [`split_chunks`].
pub fn join_chunks(chunks: &[ChunkGroup]) -> Result<SecretFrame, CipherError> {
    let mut bytes = Vec::with_capacity(chunks.len() * 8);
    for c in chunks {
        bytes.extend_from_slice(&c.to_u64().to_be_bytes());
    }
    SecretFrame::from_bytes(bytes)
}

/// Release time of a stego unit, packed big-endian one byte per field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeCode {
    pub yy: u8,
    pub mm: u8,
    pub dd: u8,
    pub hh: u8,
    pub mi: u8,
    pub ss: u8,
}

impl TimeCode {
    pub fn new(yy: u8, mm: u8, dd: u8, hh: u8, mi: u8, ss: u8) -> Result<TimeCode, CipherError> {
        let checks: [(&'static str, u32, u32, u32); 6] = [
            ("yy", yy as u32, 0, 99),
            ("mm", mm as u32, 1, 12),
            ("dd", dd as u32, 1, 31),
            ("hh", hh as u32, 0, 23),
            ("mi", mi as u32, 0, 59),
            ("ss", ss as u32, 0, 59),
        ];
        for (field, value, lo, hi) in checks {
            if value < lo || value > hi {
                return Err(CipherError::InvalidTimeCode { field, value });
            }
        }
        Ok(TimeCode {
            yy,
            mm,
            dd,
            hh,
            mi,
            ss,
        })
    }

    /// 48-bit packed value: yy‖mm‖dd‖hh‖mi‖ss, one byte each.
    pub fn packed(self) -> u64 {
        ((self.yy as u64) << 40)
            | ((self.mm as u64) << 32)
            | ((self.dd as u64) << 24)
            | ((self.hh as u64) << 16)
            | ((self.mi as u64) << 8)
            | (self.ss as u64)
    }

    pub fn unpack(packed: u64) -> Result<TimeCode, CipherError> {
        TimeCode::new(
            (packed >> 40) as u8,
            (packed >> 32) as u8,
            (packed >> 24) as u8,
            (packed >> 16) as u8,
            (packed >> 8) as u8,
            packed as u8,
        )
    }

    /// "YY-MM-DD HH:MM:SS" wire form.
    pub fn format(self) -> String {
        format!(
            "{:02}-{:02}-{:02} {:02}:{:02}:{:02}",
            self.yy, self.mm, self.dd, self.hh, self.mi, self.ss
        )
    }

    pub fn parse(s: &str) -> Result<TimeCode, CipherError> {
        let bad = || CipherError::InvalidTimeCode {
            field: "format",
            value: 0,
        };
        let bytes = s.as_bytes();
        if bytes.len() != 17 || bytes[2] != b'-' || bytes[5] != b'-' || bytes[8] != b' '
            || bytes[11] != b':' || bytes[14] != b':'
        {
            return Err(bad());
        }
        let two = |i: usize| -> Result<u8, CipherError> {
            s[i..i + 2].parse::<u8>().map_err(|_| bad())
        };
        TimeCode::new(two(0)?, two(3)?, two(6)?, two(9)?, two(12)?, two(15)?)
    }
}

/// Pre-shared 64-bit key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrivateKey {
    pub k64: u64,
}

impl PrivateKey {
    pub fn from_hex(s: &str) -> Option<PrivateKey> {
        let s = s.trim();
        if s.len() != 16 {
            return None;
        }
        u64::from_str_radix(s, 16).ok().map(|k64| PrivateKey { k64 })
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.k64)
    }
}

/// Per-field XOR masks derived from key and release time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSet {
    pub subject: u32,
    pub predicate: u32,
    pub object: u32,
    pub emotion: u32,
}

/// Masked repetition offsets as they travel in the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StampSet {
    pub subject: u32,
    pub predicate: u32,
    pub object: u32,
    pub emotion: u32,
}

impl StampSet {
    pub fn new(
        subject: u32,
        predicate: u32,
        object: u32,
        emotion: u32,
    ) -> Result<StampSet, CipherError> {
        for (value, width) in [
            (subject, SUBJECT_WIDTH),
            (predicate, PREDICATE_WIDTH),
            (object, OBJECT_WIDTH),
            (emotion, EMOTION_WIDTH),
        ] {
            if value >> width != 0 {
                return Err(CipherError::FieldTooWide { value, width });
            }
        }
        Ok(StampSet {
            subject,
            predicate,
            object,
            emotion,
        })
    }

    /// Lowercase hex, 5+5+5+3 digits: "sssss.ppppp.ooooo.eee".
    pub fn format(self) -> String {
        format!(
            "{:05x}.{:05x}.{:05x}.{:03x}",
            self.subject, self.predicate, self.object, self.emotion
        )
    }

    pub fn parse(s: &str) -> Option<StampSet> {
        let parts: Vec<&str> = s.split('.').collect();
        if parts.len() != 4
            || parts[0].len() != 5
            || parts[1].len() != 5
            || parts[2].len() != 5
            || parts[3].len() != 3
        {
            return None;
        }
        let f = |p: &str| u32::from_str_radix(p, 16).ok();
        StampSet::new(f(parts[0])?, f(parts[1])?, f(parts[2])?, f(parts[3])?).ok()
    }
}

/// Key schedule: KS = k64 XOR packed-timecode (low 48 bits), then the same
/// 18/18/18/10 MSB-first slicing as a chunk group.
pub fn derive_mask(key: PrivateKey, t: TimeCode) -> MaskSet {
    let ks = key.k64 ^ t.packed();
    let c = ChunkGroup::from_u64(ks);
    MaskSet {
        subject: c.subject_idx,
        predicate: c.predicate_idx,
        object: c.object_idx,
        emotion: c.emotion_idx,
    }
}

/// Repetition offsets in chunk-group shape (Re-Idx per role).
pub type OffsetGroup = ChunkGroup;

pub fn encrypt_offsets(offsets: OffsetGroup, key: PrivateKey, t: TimeCode) -> StampSet {
    let m = derive_mask(key, t);
    StampSet {
        subject: offsets.subject_idx ^ m.subject,
        predicate: offsets.predicate_idx ^ m.predicate,
        object: offsets.object_idx ^ m.object,
        emotion: offsets.emotion_idx ^ m.emotion,
    }
}

pub fn decrypt_offsets(stamps: StampSet, key: PrivateKey, t: TimeCode) -> OffsetGroup {
    let m = derive_mask(key, t);
    ChunkGroup {
        subject_idx: stamps.subject ^ m.subject,
        predicate_idx: stamps.predicate ^ m.predicate,
        object_idx: stamps.object ^ m.object,
        emotion_idx: stamps.emotion ^ m.emotion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_payload_frames_to_one_zero_group() {
        let f = frame(&[]);
        assert_eq!(f.as_bytes(), &[0u8; 8]);
        assert_eq!(deframe(&f).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn hi_payload_layout() {
        let f = frame(b"Hi");
        assert_eq!(
            f.as_bytes(),
            &[0x00, 0x00, 0x00, 0x02, 0x48, 0x69, 0x00, 0x00]
        );
        assert_eq!(deframe(&f).unwrap(), b"Hi".to_vec());
    }

    #[test]
    fn nonzero_padding_rejected() {
        let mut bytes = frame(b"Hi").as_bytes().to_vec();
        *bytes.last_mut().unwrap() = 1;
        let f = SecretFrame::from_bytes(bytes).unwrap();
        assert_eq!(deframe(&f).unwrap_err(), CipherError::PaddingNonZero);
    }

    #[test]
    fn truncated_stream_rejected() {
        // Claims 100 payload bytes but only one group present.
        let mut bytes = vec![0u8; 8];
        bytes[3] = 100;
        let f = SecretFrame::from_bytes(bytes).unwrap();
        assert!(matches!(
            deframe(&f).unwrap_err(),
            CipherError::TruncatedStream { .. }
        ));
    }

    #[test]
    fn zero_group_splits_to_zero_chunk() {
        let f = SecretFrame::from_bytes(vec![0u8; 8]).unwrap();
        assert_eq!(
            split_chunks(&f),
            vec![ChunkGroup {
                subject_idx: 0,
                predicate_idx: 0,
                object_idx: 0,
                emotion_idx: 0
            }]
        );
    }

    #[test]
    fn hi_group_slices_per_field() {
        // Brute-force oracle: slice the 64 bits one at a time.
        let v: u64 = 0x0000000248690000;
        let mut fields = [0u64; 4];
        let widths = [18usize, 18, 18, 10];
        let mut bit = 0;
        for (f, &w) in fields.iter_mut().zip(&widths) {
            for _ in 0..w {
                *f = (*f << 1) | ((v >> (63 - bit)) & 1);
                bit += 1;
            }
        }
        let c = ChunkGroup::from_u64(v);
        assert_eq!(c.subject_idx as u64, fields[0]);
        assert_eq!(c.predicate_idx as u64, fields[1]);
        assert_eq!(c.object_idx as u64, fields[2]);
        assert_eq!(c.emotion_idx as u64, fields[3]);
        assert_eq!(c.subject_idx, 0);
    }

    #[test]
    fn timecode_pack_unpack() {
        let t = TimeCode::new(24, 5, 17, 23, 59, 58).unwrap();
        assert_eq!(TimeCode::unpack(t.packed()).unwrap(), t);
        assert_eq!(t.format(), "24-05-17 23:59:58");
        assert_eq!(TimeCode::parse("24-05-17 23:59:58").unwrap(), t);
        assert!(TimeCode::new(24, 13, 1, 0, 0, 0).is_err());
        assert!(TimeCode::parse("24-05-17T23:59:58").is_err());
    }

    fn t0() -> TimeCode {
        TimeCode::new(0, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn zero_key_zeroish_time_masks() {
        // packed timecode of 00-01-01 00:00:00 only sets mm/dd bytes; build a
        // key that cancels them so KS is all zero.
        let key = PrivateKey { k64: t0().packed() };
        let m = derive_mask(key, t0());
        assert_eq!(m, MaskSet { subject: 0, predicate: 0, object: 0, emotion: 0 });
    }

    #[test]
    fn all_ones_key_full_masks() {
        let key = PrivateKey { k64: u64::MAX ^ t0().packed() };
        let m = derive_mask(key, t0());
        assert_eq!(m.subject, MASK_18);
        assert_eq!(m.predicate, MASK_18);
        assert_eq!(m.object, MASK_18);
        assert_eq!(m.emotion, MASK_10);
    }

    #[test]
    fn single_key_bit_flips_single_mask_bit() {
        let t = TimeCode::new(24, 5, 17, 12, 30, 45).unwrap();
        let key = PrivateKey { k64: 0x0123456789abcdef };
        let base = derive_mask(key, t);
        for bit in 0..64 {
            let flipped = derive_mask(PrivateKey { k64: key.k64 ^ (1u64 << bit) }, t);
            let diff = (base.subject ^ flipped.subject).count_ones()
                + (base.predicate ^ flipped.predicate).count_ones()
                + (base.object ^ flipped.object).count_ones()
                + (base.emotion ^ flipped.emotion).count_ones();
            assert_eq!(diff, 1, "bit {bit}");
        }
    }

    #[test]
    fn zero_offsets_stamps_equal_masks() {
        let t = TimeCode::new(24, 5, 17, 12, 30, 45).unwrap();
        let key = PrivateKey { k64: 0xdeadbeefcafef00d };
        let m = derive_mask(key, t);
        let s = encrypt_offsets(ChunkGroup::from_u64(0), key, t);
        assert_eq!((s.subject, s.predicate, s.object, s.emotion),
                   (m.subject, m.predicate, m.object, m.emotion));
    }

    #[test]
    fn identity_mask_passes_offsets_through() {
        let t = t0();
        let key = PrivateKey { k64: t.packed() };
        let offsets = ChunkGroup {
            subject_idx: 0x155aa,
            predicate_idx: 0x2a55,
            object_idx: 0x3ffff,
            emotion_idx: 0x2aa,
        };
        let s = encrypt_offsets(offsets, key, t);
        assert_eq!((s.subject, s.predicate, s.object, s.emotion),
                   (offsets.subject_idx, offsets.predicate_idx,
                    offsets.object_idx, offsets.emotion_idx));
    }

    #[test]
    fn stamp_hex_round_trip() {
        let s = StampSet::new(0x3ffff, 0, 0x12345, 0x3ff).unwrap();
        assert_eq!(s.format(), "3ffff.00000.12345.3ff");
        assert_eq!(StampSet::parse(&s.format()).unwrap(), s);
        assert!(StampSet::parse("3ffff.00000.12345").is_none());
        assert!(StampSet::new(1 << 18, 0, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn frame_deframe_inverse(payload in proptest::collection::vec(any::<u8>(), 0..512)) {
            prop_assert_eq!(deframe(&frame(&payload)).unwrap(), payload);
        }

        #[test]
        fn split_join_inverse(groups in proptest::collection::vec(any::<u64>(), 1..32)) {
            let bytes: Vec<u8> = groups.iter().flat_map(|g| g.to_be_bytes()).collect();
            let f = SecretFrame::from_bytes(bytes.clone()).unwrap();
            let joined = join_chunks(&split_chunks(&f)).unwrap();
            prop_assert_eq!(joined.as_bytes(), &bytes[..]);
        }

        #[test]
        fn encrypt_decrypt_involution(
            v in any::<u64>(),
            k in any::<u64>(),
            packed in (0u64..100 << 40),
        ) {
            // Clamp the packed value into valid field ranges.
            let t = TimeCode::new(
                ((packed >> 40) % 100) as u8,
                (((packed >> 32) % 12) + 1) as u8,
                (((packed >> 24) % 31) + 1) as u8,
                ((packed >> 16) % 24) as u8,
                ((packed >> 8) % 60) as u8,
                (packed % 60) as u8,
            ).unwrap();
            let key = PrivateKey { k64: k };
            let offsets = ChunkGroup::from_u64(v);
            let back = decrypt_offsets(encrypt_offsets(offsets, key, t), key, t);
            prop_assert_eq!(back, offsets);
        }
    }
}
