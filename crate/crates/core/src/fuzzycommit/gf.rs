//! GF(2^7) with primitive polynomial x^7 + x^3 + 1.

pub const ORDER: usize = 128;
/// Multiplicative group order.
pub const GROUP: usize = ORDER - 1;
const POLY: u16 = 0b1000_1001;

const fn build_tables() -> ([u8; 2 * GROUP], [u8; ORDER]) {
    let mut exp = [0u8; 2 * GROUP];
    let mut log = [0u8; ORDER];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < GROUP {
        exp[i] = x as u8;
        exp[i + GROUP] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x80 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    (exp, log)
}

const TABLES: ([u8; 2 * GROUP], [u8; ORDER]) = build_tables();
const EXP: [u8; 2 * GROUP] = TABLES.0;
const LOG: [u8; ORDER] = TABLES.1;

#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
}

#[inline]
pub fn div(a: u8, b: u8) -> u8 {
    assert!(b != 0, "division by zero in GF(128)");
    if a == 0 {
        return 0;
    }
    EXP[LOG[a as usize] as usize + GROUP - LOG[b as usize] as usize]
}

#[inline]
pub fn inv(a: u8) -> u8 {
    div(1, a)
}

/// alpha^e for any integer exponent.
#[inline]
pub fn alpha_pow(e: i64) -> u8 {
    EXP[e.rem_euclid(GROUP as i64) as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Schoolbook multiply-and-reduce, independent of the tables.
    fn slow_mul(a: u8, b: u8) -> u8 {
        let mut acc: u16 = 0;
        for i in 0..7 {
            if (b >> i) & 1 == 1 {
                acc ^= (a as u16) << i;
            }
        }
        for bit in (7..14).rev() {
            if (acc >> bit) & 1 == 1 {
                acc ^= POLY << (bit - 7);
            }
        }
        acc as u8
    }

    #[test]
    fn tables_match_schoolbook_multiplication() {
        for a in 0..128u8 {
            for b in 0..128u8 {
                assert_eq!(mul(a, b), slow_mul(a, b), "{a} * {b}");
            }
        }
    }

    #[test]
    fn alpha_is_primitive() {
        let mut seen = [false; ORDER];
        for e in 0..GROUP as i64 {
            let v = alpha_pow(e);
            assert!(!seen[v as usize]);
            seen[v as usize] = true;
        }
        assert!(!seen[0]);
        assert_eq!(alpha_pow(GROUP as i64), 1);
        assert_eq!(alpha_pow(-1), inv(2));
    }

    #[test]
    fn every_nonzero_element_has_an_inverse() {
        for a in 1..128u8 {
            assert_eq!(mul(a, inv(a)), 1);
        }
    }
}
