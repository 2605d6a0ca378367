#![allow(dead_code)]

use num_bigint::BigUint;

fn split(a: u64, b: u64) -> (BigUint, BigUint) {
    // sum_{k=a+1}^{b} a!/k! = p/q with q = (a+1)(a+2)...b
    if b - a == 1 {
        return (BigUint::from(1u32), BigUint::from(b));
    }
    let m = (a + b) / 2;
    let (p1, q1) = split(a, m);
    let (p2, q2) = split(m, b);
    (p1 * &q2 + p2, q1 * q2)
}

/// First `n` binary digits of e, starting with the integer part `10`.
pub fn e_bits(n: usize) -> Vec<bool> {
    let mut terms = 2u64;
    let mut log2_fact = 0.0f64;
    while log2_fact < n as f64 + 64.0 {
        terms += 1;
        log2_fact += (terms as f64).log2();
    }
    let (p, q) = split(0, terms);
    // e = 1 + p/q; scale by 2^(n-2) so the integer part has n bits
    let x = ((&q + p) << (n - 2)) / q;
    let digits = x.to_str_radix(2);
    assert_eq!(digits.len(), n);
    digits.bytes().map(|c| c == b'1').collect()
}

pub fn bits(s: &str) -> Vec<bool> {
    s.bytes().filter(|c| !c.is_ascii_whitespace()).map(|c| c == b'1').collect()
}

/// 100-bit sequence used by several worked examples.
pub const EPS100: &str = "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";

/// 128-bit longest-run example.
pub const EPS128: &str = concat!(
    "11001100000101010110110001001100111000000000001001001101010100010001",
    "001111010110100000001101011111001100111001101101100010110010"
);
