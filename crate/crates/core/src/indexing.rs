//! Digit arithmetic on chunk indices.
//!
//! Chunk indices are read as base-`s` numbers with `t` digits; digit position
//! `v` carries weight `s^v`. All code paths manipulate chunks through digit
//! substitution rather than additive offsets.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("value {value} out of range for {t} base-{s} digits")]
    ValueOutOfRange { value: usize, s: usize, t: usize },
    #[error("digit position {v} out of range for {t} digits")]
    PositionOutOfRange { v: usize, t: usize },
    #[error("digit value {u} out of range for radix {s}")]
    DigitOutOfRange { u: usize, s: usize },
}

fn pow(s: usize, t: usize) -> usize {
    s.checked_pow(t as u32).expect("radix power overflow")
}

/// Base-`s` digits of `a`, most significant first.
pub fn digits(a: usize, s: usize, t: usize) -> Result<Vec<usize>, IndexError> {
    if s < 1 || a >= pow(s, t) {
        return Err(IndexError::ValueOutOfRange { value: a, s, t });
    }
    let mut out = vec![0; t];
    let mut rest = a;
    for i in (0..t).rev() {
        out[t - 1 - i] = rest / pow(s, i);
        rest %= pow(s, i);
    }
    Ok(out)
}

/// Recombines digits produced by [`digits`] (most significant first).
pub fn compose(digits: &[usize], s: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * s + d)
}

/// Digit at position `v` (weight `s^v`).
#[inline]
pub fn digit_at(a: usize, v: usize, s: usize) -> usize {
    if s == 1 {
        return 0;
    }
    a / pow(s, v) % s
}

/// The index whose digit `v` is `u` and whose other digits equal those of `a`.
pub fn replace_digit(
    a: usize,
    v: usize,
    u: usize,
    s: usize,
    t: usize,
) -> Result<usize, IndexError> {
    if a >= pow(s, t) {
        return Err(IndexError::ValueOutOfRange { value: a, s, t });
    }
    if v >= t {
        return Err(IndexError::PositionOutOfRange { v, t });
    }
    if u >= s {
        return Err(IndexError::DigitOutOfRange { u, s });
    }
    Ok(replace_digit_unchecked(a, v, u, s))
}

/// [`replace_digit`] without range checks; callers guarantee validity.
#[inline]
pub fn replace_digit_unchecked(a: usize, v: usize, u: usize, s: usize) -> usize {
    if s == 1 {
        return a;
    }
    let w = pow(s, v);
    a - digit_at(a, v, s) * w + u * w
}

/// `j mod n`, the wrap used for column indices past the last group.
#[inline]
pub fn wrap_index(j: usize, n: usize) -> usize {
    debug_assert!(n >= 1);
    j % n
}

/// All k-element subsets of `{0, .., n-1}` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}
