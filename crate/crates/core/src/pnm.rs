//! Plain-text netpbm tokenizer shared by the PBM (P1) and PGM (P2) codecs.

use crate::error::{Error, Result};

pub(crate) struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Tokens { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    /// Next whitespace-delimited token and its starting offset.
    pub(crate) fn next_token(&mut self) -> Option<(usize, &'a [u8])> {
        self.skip_space();
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        Some((start, &self.bytes[start..self.pos]))
    }

    /// P1 allows pixel digits without separators, so bit rasters are read one
    /// character at a time.
    pub(crate) fn next_bit_char(&mut self) -> Option<(usize, u8)> {
        self.skip_space();
        let c = *self.bytes.get(self.pos)?;
        let at = self.pos;
        self.pos += 1;
        Some((at, c))
    }

    pub(crate) fn expect_magic(&mut self, magic: &str) -> Result<()> {
        match self.next_token() {
            Some((_, t)) if t == magic.as_bytes() => Ok(()),
            Some((at, t)) => Err(Error::parse(
                at,
                format!(
                    "expected magic {magic}, found {:?}",
                    String::from_utf8_lossy(t)
                ),
            )),
            None => Err(Error::parse(0, "empty payload")),
        }
    }

    pub(crate) fn expect_uint(&mut self, what: &str) -> Result<usize> {
        let end = self.bytes.len();
        let (at, tok) = self
            .next_token()
            .ok_or_else(|| Error::parse(end, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::parse(
                    at,
                    format!("invalid {what}: {:?}", String::from_utf8_lossy(tok)),
                )
            })
    }

    pub(crate) fn expect_end(&mut self, expected: usize) -> Result<()> {
        match self.next_token() {
            None => Ok(()),
            Some((at, _)) => Err(Error::parse(
                at,
                format!("token count mismatch: more than {expected} samples"),
            )),
        }
    }
}
