/// Append-only bit stream of fixed-width codes, packed LSB-first into `u64` words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackedBits {
    words: Vec<u64>,
    len: usize,
}

impl PackedBits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self { words: Vec::with_capacity(bits.div_ceil(64)), len: 0 }
    }

    /// Length in bits.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn push(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        if width == 0 {
            return;
        }
        let value = if width == 64 { value } else { value & ((1u64 << width) - 1) };
        let offset = (self.len % 64) as u32;
        if offset == 0 {
            self.words.push(value);
        } else {
            *self.words.last_mut().expect("non-empty") |= value << offset;
            let spill = offset + width;
            if spill > 64 {
                self.words.push(value >> (64 - offset));
            }
        }
        self.len += width as usize;
    }

    /// Reads `width` bits starting at bit `pos`.
    pub fn get(&self, pos: usize, width: u32) -> u64 {
        debug_assert!(pos + width as usize <= self.len);
        if width == 0 {
            return 0;
        }
        let w = pos / 64;
        let offset = (pos % 64) as u32;
        let mut v = self.words[w] >> offset;
        if offset + width > 64 {
            v |= self.words[w + 1] << (64 - offset);
        }
        if width == 64 {
            v
        } else {
            v & ((1u64 << width) - 1)
        }
    }

    /// Iterator over consecutive codes of one width.
    pub fn codes(&self, width: u32) -> impl Iterator<Item = u64> + '_ {
        let n = if width == 0 { 0 } else { self.len / width as usize };
        (0..n).map(move |i| self.get(i * width as usize, width))
    }

    #[cfg(test)]
    pub(crate) fn truncate(&mut self, bits: usize) {
        self.len = bits.min(self.len);
        self.words.truncate(self.len.div_ceil(64));
    }
}
