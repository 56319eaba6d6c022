//! Binary (P5) portable graymap reading and writing.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Graymap {
    pub fn encode(&self) -> Vec<u8> {
        self.encode_with_comment(None)
    }

    /// P5 bytes with an optional `# ...` header line after the magic.
    pub fn encode_with_comment(&self, comment: Option<&str>) -> Vec<u8> {
        let mut out = b"P5\n".to_vec();
        if let Some(c) = comment {
            for line in c.lines() {
                out.extend_from_slice(format!("# {line}\n").as_bytes());
            }
        }
        out.extend_from_slice(format!("{} {}\n255\n", self.width, self.height).as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8], origin: &str) -> Result<Graymap> {
        let corrupt = |what: &str| Error::Corrupt(format!("{origin}: {what}"));
        let mut pos = 0usize;
        let token = |pos: &mut usize| -> Option<String> {
            loop {
                while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                    *pos += 1;
                }
                if *pos < bytes.len() && bytes[*pos] == b'#' {
                    while *pos < bytes.len() && bytes[*pos] != b'\n' {
                        *pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = *pos;
            while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
        };
        if token(&mut pos).as_deref() != Some("P5") {
            return Err(corrupt("missing P5 magic"));
        }
        let num = |pos: &mut usize, what: &str| -> Result<usize> {
            token(pos)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| corrupt(&format!("bad {what}")))
        };
        let width = num(&mut pos, "width")?;
        let height = num(&mut pos, "height")?;
        let maxval = num(&mut pos, "maxval")?;
        if maxval != 255 {
            return Err(corrupt("only maxval 255 is supported"));
        }
        if width == 0 || height == 0 {
            return Err(corrupt("zero dimension"));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let need = width * height;
        if bytes.len() < pos + need {
            return Err(corrupt(&format!(
                "raster truncated ({} of {need} bytes)",
                bytes.len().saturating_sub(pos)
            )));
        }
        Ok(Graymap {
            width,
            height,
            pixels: bytes[pos..pos + need].to_vec(),
        })
    }

    pub fn read(path: &Path) -> Result<Graymap> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_comment() {
        let g = Graymap {
            width: 3,
            height: 2,
            pixels: vec![0, 10, 255, 128, 127, 32],
        };
        assert_eq!(Graymap::decode(&g.encode(), "m").unwrap(), g);
        let mut commented = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(&g.pixels);
        assert_eq!(Graymap::decode(&commented, "m").unwrap(), g);
        assert_eq!(Graymap::decode(&g.encode_with_comment(Some("a\nb")), "m").unwrap(), g);
    }

    #[test]
    fn truncated_raster_is_corrupt() {
        let mut bytes = Graymap {
            width: 4,
            height: 4,
            pixels: vec![1; 16],
        }
        .encode();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(Graymap::decode(&bytes, "t"), Err(Error::Corrupt(_))));
        assert!(Graymap::decode(b"P2\n1 1\n255\n0", "t").is_err());
    }
}
