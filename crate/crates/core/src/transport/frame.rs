//! Wire framing shared by every backend.
//!
//! A frame is `len: u32 LE | round_tag: u32 LE | payload`, where `len` counts
//! payload bytes only.

/// Size of the fixed frame header in bytes.
pub const HEADER_LEN: usize = 8;

pub fn encode(round_tag: u32, payload: &[u8]) -> Vec<u8> {
    let len = u32::try_from(payload.len()).expect("payload exceeds u32::MAX bytes");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&round_tag.to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Parses the header of a frame, returning `(payload_len, round_tag)`.
pub fn decode_header(header: &[u8; HEADER_LEN]) -> (usize, u32) {
    let len = u32::from_le_bytes(header[0..4].try_into().unwrap());
    let tag = u32::from_le_bytes(header[4..8].try_into().unwrap());
    (len as usize, tag)
}

/// Splits a complete frame into `(round_tag, payload)`.
pub fn decode(frame: &[u8]) -> Result<(u32, &[u8]), String> {
    if frame.len() < HEADER_LEN {
        return Err(format!("frame of {} bytes is shorter than its header", frame.len()));
    }
    let header: &[u8; HEADER_LEN] = frame[..HEADER_LEN].try_into().unwrap();
    let (len, tag) = decode_header(header);
    let payload = &frame[HEADER_LEN..];
    if payload.len() != len {
        return Err(format!("length prefix {} but {} payload bytes", len, payload.len()));
    }
    Ok((tag, payload))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_little_endian() {
        let f = encode(0x0102_0304, &[0xaa, 0xbb]);
        assert_eq!(f, vec![2, 0, 0, 0, 4, 3, 2, 1, 0xaa, 0xbb]);
        assert_eq!(decode(&f).unwrap(), (0x0102_0304, &[0xaa, 0xbb][..]));
    }

    #[test]
    fn truncated_frames_are_rejected() {
        assert!(decode(&[1, 0, 0]).is_err());
        let mut f = encode(7, &[1, 2, 3]);
        f.pop();
        assert!(decode(&f).is_err());
    }
}
