//! Textbook Trivium over a plain 288-cell bit array, 1-indexed as in the
//! cipher's specification. Slow and obvious on purpose.

/// (key, iv, first 64 keystream bytes), eSTREAM reference output.
pub const VECTORS: [(&str, &str, &str); 3] = [
    (
        "80000000000000000000",
        "00000000000000000000",
        "38EB86FF730D7A9CAF8DF13A4420540DBB7B651464C87501552041C249F29A64D2FBF515610921EBE06C8F92CECF7F8098FF20CCCC6A62B97BE8EF7454FC80F9",
    ),
    (
        "0053A6F94C9FF24598EB",
        "0D74DB42A91077DE45AC",
        "F4CD954A717F26A7D6930830C4E7CF0819F80E03F25F342C64ADC66ABA7F8A8E6EAA49F23632AE3CD41A7BD290A0132F81C6D4043B6E397D7388F3A03B5FE358",
    ),
    (
        "00000000000000000000",
        "00000000000000000000",
        "FBE0BF265859051B517A2E4E239FC97F563203161907CF2DE7A8790FA1B2E9CDF75292030268B7382B4C1A759AA2599A285549986E74805903801A4CB5A5D4F2",
    ),
];

pub fn keystream_bytes(key: &[u8; 10], iv: &[u8; 10], n: usize) -> Vec<u8> {
    let mut s = [0u8; 289];
    // s1..s80 <- K80..K1, s94..s173 <- IV80..IV1; bit k of the 80-bit
    // little-endian integer is bit k%8 of byte k/8.
    for i in 1..=80 {
        let k = 80 - i;
        s[i] = (key[k / 8] >> (k % 8)) & 1;
        s[93 + i] = (iv[k / 8] >> (k % 8)) & 1;
    }
    s[286] = 1;
    s[287] = 1;
    s[288] = 1;
    let round = |s: &mut [u8; 289]| -> u8 {
        let mut t1 = s[66] ^ s[93];
        let mut t2 = s[162] ^ s[177];
        let mut t3 = s[243] ^ s[288];
        let z = t1 ^ t2 ^ t3;
        t1 ^= (s[91] & s[92]) ^ s[171];
        t2 ^= (s[175] & s[176]) ^ s[264];
        t3 ^= (s[286] & s[287]) ^ s[69];
        for i in (2..=93).rev() {
            s[i] = s[i - 1];
        }
        s[1] = t3;
        for i in (95..=177).rev() {
            s[i] = s[i - 1];
        }
        s[94] = t1;
        for i in (179..=288).rev() {
            s[i] = s[i - 1];
        }
        s[178] = t2;
        z
    };
    for _ in 0..4 * 288 {
        round(&mut s);
    }
    (0..n)
        .map(|_| (0..8).fold(0u8, |byte, j| byte | (round(&mut s) << j)))
        .collect()
}
