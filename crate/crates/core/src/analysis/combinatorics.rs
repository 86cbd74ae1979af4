//! Exact counting of odd compositions.

use num_bigint::{BigInt, BigUint, Sign};

/// `Σ_{i_1+…+i_k=i, all i_j odd} i! / (i_1! ⋯ i_k!)`.
///
/// This counts length-`i` words over `k` letters in which every letter occurs
/// an odd number of times, and equals
/// `2^{-k} Σ_{j=0}^{k} (-1)^j C(k, j) (k - 2j)^i`, evaluated exactly.
pub fn odd_composition_multinomial_sum(i: u32, k: u32) -> BigUint {
    let mut total = BigInt::from(0);
    let mut binom = BigInt::from(1);
    for j in 0..=k {
        let base = BigInt::from(i64::from(k) - 2 * i64::from(j));
        let term = &binom * base.pow(i);
        if j % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
        binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
    }
    let (sign, mag) = (total >> k as usize).into_parts();
    debug_assert!(sign != Sign::Minus);
    mag
}

/// `true` exactly when the odd-composition sum is nonzero.
pub fn odd_composition_is_positive(i: u32, k: u32) -> bool {
    i >= k && (i - k) % 2 == 0
}

/// Natural logarithm of a positive big integer.
pub fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return f64_of(x).ln();
    }
    let shift = bits - 64;
    f64_of(&(x >> shift)).ln() + shift as f64 * std::f64::consts::LN_2
}

fn f64_of(x: &BigUint) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::INFINITY)
}

/// `num / den` as a double, accurate even when both overflow `f64`.
pub fn big_ratio(num: &BigUint, den: &BigUint) -> f64 {
    if num.bits() == 0 {
        return 0.0;
    }
    (big_ln(num) - big_ln(den)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sums multinomials over every composition with odd parts.
    fn brute_force(i: u32, k: u32) -> BigUint {
        fn rec(
            remaining: u32,
            parts_left: u32,
            acc: &BigUint,
            fact: &[BigUint],
            out: &mut BigUint,
        ) {
            if parts_left == 0 {
                if remaining == 0 {
                    *out += acc;
                }
                return;
            }
            let mut p = 1;
            while p <= remaining {
                rec(
                    remaining - p,
                    parts_left - 1,
                    &(acc / &fact[p as usize]),
                    fact,
                    out,
                );
                p += 2;
            }
        }
        let mut fact = vec![BigUint::from(1u32)];
        for n in 1..=i {
            let next = &fact[n as usize - 1] * n;
            fact.push(next);
        }
        // Work with i!/(∏ i_j!) by dividing i! successively; exact since each
        // partial quotient is an integer multinomial times remaining factorials.
        let mut out = BigUint::from(0u32);
        rec(i, k, &fact[i as usize], &fact, &mut out);
        out
    }

    #[test]
    fn small_values() {
        assert_eq!(odd_composition_multinomial_sum(2, 2), BigUint::from(2u32));
        assert_eq!(odd_composition_multinomial_sum(4, 2), BigUint::from(8u32));
        assert_eq!(odd_composition_multinomial_sum(3, 3), BigUint::from(6u32));
        assert_eq!(odd_composition_multinomial_sum(2, 3), BigUint::from(0u32));
        assert_eq!(odd_composition_multinomial_sum(0, 1), BigUint::from(0u32));
    }

    #[test]
    fn matches_brute_force() {
        for k in 1..=6 {
            for i in 0..=12 {
                let fast = odd_composition_multinomial_sum(i, k);
                assert_eq!(fast, brute_force(i, k), "i={i} k={k}");
                assert_eq!(
                    fast.bits() > 0,
                    odd_composition_is_positive(i, k),
                    "i={i} k={k}"
                );
            }
        }
    }

    #[test]
    fn ratio_of_huge_numbers() {
        let a = BigUint::from(3u32).pow(1000);
        let b = BigUint::from(3u32).pow(1001);
        assert!((big_ratio(&a, &b) - 1.0 / 3.0).abs() < 1e-13);
        assert!((big_ln(&a) - 1000.0 * 3f64.ln()).abs() < 1e-9);
    }
}
