//! First-order Reed-Muller RM(1,6): 7 data bits to a 64-bit codeword,
//! minimum distance 32, corrects up to 15 bit errors.
//!
//! A symbol is `c << 6 | u` with `u` in 0..64. Codeword bit `j` (bit `j` of
//! the `u64`) is `parity(u & j) ^ c`, so bit 6 is the complement bit.

pub const SYMBOL_BITS: u32 = 7;
pub const CODEWORD_BITS: usize = 64;
pub const CORRECTABLE: u32 = 15;

pub fn encode(symbol: u8) -> u64 {
    debug_assert!(symbol < 128, "symbol out of range: {symbol}");
    let u = (symbol & 0x3f) as u64;
    let complement = if symbol & 0x40 != 0 { u64::MAX } else { 0 };
    let mut word = 0u64;
    for j in 0..64u64 {
        word |= (((u & j).count_ones() & 1) as u64) << j;
    }
    word ^ complement
}

/// In-place fast Walsh-Hadamard transform.
pub fn fwht(data: &mut [i32; 64]) {
    let mut h = 1;
    while h < 64 {
        for start in (0..64).step_by(2 * h) {
            for i in start..start + h {
                let (x, y) = (data[i], data[i + h]);
                data[i] = x + y;
                data[i + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// Maximum-correlation decoding. Returns the symbol of the nearest
/// codeword; ties go to the lowest symbol value.
pub fn decode(word: u64) -> u8 {
    let mut corr = [0i32; 64];
    for (j, c) in corr.iter_mut().enumerate() {
        *c = if (word >> j) & 1 == 0 { 1 } else { -1 };
    }
    fwht(&mut corr);
    // Correlation with codeword (c, u) is (-1)^c * corr[u]; symbols are
    // scanned in increasing order so the first maximum wins ties.
    let mut best = (i32::MIN, 0u8);
    for symbol in 0..128u8 {
        let u = (symbol & 0x3f) as usize;
        let score = if symbol & 0x40 == 0 {
            corr[u]
        } else {
            -corr[u]
        };
        if score > best.0 {
            best = (score, symbol);
        }
    }
    best.1
}
