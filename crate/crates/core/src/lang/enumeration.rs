use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};

use crate::error::{Error, Result};
use crate::gale::Word;
use crate::rational::Rational;

/// `s_n` in the length-lexicographic enumeration λ, 0, 1, 00, 01, 10, 11, 000, …
pub fn index_to_string(n: u64) -> Word {
    // s_n has length L = ⌊log2(n+1)⌋ and binary value n+1−2^L.
    let m = n as u128 + 1;
    let len = 127 - m.leading_zeros() as usize;
    (0..len).rev().map(|i| ((m >> i) & 1) as u8).collect()
}

pub fn string_to_index(x: &[u8]) -> Result<u64> {
    if x.len() >= 64 {
        return Err(Error::IndexOverflow(x.len()));
    }
    let m = x.iter().fold(1u64, |acc, &b| (acc << 1) | b as u64);
    Ok(m - 1)
}

/// Order of the standard enumeration: shorter first, then lexicographic.
pub fn cmp_enumeration(a: &[u8], b: &[u8]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Self-delimiting pairing: every bit of `a` doubled, then `01`, then `b`.
pub fn pair(a: &[u8], b: &[u8]) -> Word {
    let mut out = Vec::with_capacity(2 * a.len() + 2 + b.len());
    for &bit in a {
        out.push(bit);
        out.push(bit);
    }
    out.extend_from_slice(&[0, 1]);
    out.extend_from_slice(b);
    out
}

pub fn unpair(z: &[u8]) -> Result<(Word, Word)> {
    let mut a = Vec::new();
    let mut i = 0;
    while i + 1 < z.len() {
        match (z[i], z[i + 1]) {
            (0, 0) => a.push(0),
            (1, 1) => a.push(1),
            (0, 1) => return Ok((a, z[i + 2..].to_vec())),
            _ => return Err(Error::Decode(show(z))),
        }
        i += 2;
    }
    Err(Error::Decode(show(z)))
}

/// The dyadic rational 0.x1 (binary point, sentinel 1 appended). Injective on strings.
pub fn val(x: &[u8]) -> Rational {
    let mut numer = BigUint::from(0u32);
    for &b in x {
        numer = (numer << 1u32) | BigUint::from(b);
    }
    let numer = (numer << 1u32) | BigUint::from(1u32);
    Rational::new(BigInt::from(numer), BigInt::from(BigUint::from(1u32) << (x.len() + 1)))
}

/// Left-cut membership `val(x) < θ`.
pub fn val_below(x: &[u8], theta: &Rational) -> bool {
    val(x) < *theta
}

/// Printable form of a bit string; λ for the empty string.
pub fn show(x: &[u8]) -> String {
    if x.is_empty() {
        "λ".to_string()
    } else {
        x.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn first_strings() {
        let got: Vec<String> = (0..8).map(|n| show(&index_to_string(n))).collect();
        assert_eq!(got, ["λ", "0", "1", "00", "01", "10", "11", "000"]);
        assert_eq!(index_to_string(3), vec![0, 0]);
        assert_eq!(index_to_string(6), vec![1, 1]);
    }

    #[test]
    fn enumeration_is_a_bijection_below_2_16() {
        for n in 0..(1u64 << 16) {
            assert_eq!(string_to_index(&index_to_string(n)).unwrap(), n);
        }
    }

    #[test]
    fn index_order_matches_enumeration_order() {
        for n in 0..500u64 {
            let a = index_to_string(n);
            let b = index_to_string(n + 1);
            assert_eq!(cmp_enumeration(&a, &b), Ordering::Less);
        }
    }

    #[test]
    fn pair_of_empty_strings() {
        assert_eq!(pair(&[], &[]), vec![0, 1]);
        assert_eq!(unpair(&pair(&[1, 0], &[0])).unwrap(), (vec![1, 0], vec![0]));
    }

    fn all_strings(max_len: usize) -> Vec<Word> {
        let count = (1u64 << (max_len + 1)) - 1;
        (0..count).map(index_to_string).collect()
    }

    #[test]
    fn pair_is_injective_up_to_length_4() {
        let strings = all_strings(4);
        assert_eq!(strings.len(), 31);
        let mut seen = std::collections::HashSet::new();
        for a in &strings {
            for b in &strings {
                assert!(seen.insert(pair(a, b)));
            }
        }
        assert_eq!(seen.len(), 961);
    }

    #[test]
    fn pair_roundtrip_and_length_bound_up_to_length_6() {
        let strings = all_strings(6);
        for a in &strings {
            for b in &strings {
                let z = pair(a, b);
                assert!(z.len() <= 2 * (a.len() + b.len()) + 2);
                assert_eq!(unpair(&z).unwrap(), (a.clone(), b.clone()));
            }
        }
    }

    #[test]
    fn unpair_rejects_non_codewords() {
        assert!(unpair(&[]).is_err());
        assert!(unpair(&[1, 0]).is_err());
        assert!(unpair(&[0, 0, 1]).is_err());
    }

    #[test]
    fn val_appends_a_sentinel_bit() {
        assert_eq!(val(&[]), rat(1, 2));
        assert_eq!(val(&[0]), rat(1, 4));
        assert_eq!(val(&[1]), rat(3, 4));
        assert_eq!(val(&[0, 1]), rat(3, 8));
        assert!(!val_below(&[], &rat(1, 2)));
    }

    #[test]
    fn val_is_injective() {
        let strings = all_strings(8);
        let vals: std::collections::HashSet<_> = strings.iter().map(|x| val(x)).collect();
        assert_eq!(vals.len(), strings.len());
    }
}
