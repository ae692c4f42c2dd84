//! Reference arithmetic used to check the in-memory results: plain modular
//! operations, Barrett and Montgomery multiplication, the O(n^2) transform
//! and schoolbook polynomial multiplication.
//!
//! Nothing here is constant time; these are oracles, not the artifact under
//! test.

use thiserror::Error;

use crate::params::{bit_length, inv_mod, mul_mod, pow_mod, NttParams, RingMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("operands use different moduli ({0} and {1})")]
    ModulusMismatch(u64, u64),
    #[error("value {value} is not reduced modulo {q}")]
    OutOfRange { value: u64, q: u64 },
    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("modulus {0} is not usable here")]
    InvalidModulus(u64),
}

/// An element of `Z_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResidueElement {
    value: u64,
    q: u64,
}

impl ResidueElement {
    pub fn new(value: u64, q: u64) -> Result<Self, ArithError> {
        if q < 2 {
            return Err(ArithError::InvalidModulus(q));
        }
        if value >= q {
            return Err(ArithError::OutOfRange { value, q });
        }
        Ok(ResidueElement { value, q })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }
}

fn same_modulus(x: &ResidueElement, y: &ResidueElement) -> Result<u64, ArithError> {
    if x.q != y.q {
        return Err(ArithError::ModulusMismatch(x.q, y.q));
    }
    Ok(x.q)
}

pub fn ref_mod_add(x: ResidueElement, y: ResidueElement) -> Result<ResidueElement, ArithError> {
    let q = same_modulus(&x, &y)?;
    let sum = x.value as u128 + y.value as u128;
    let value = if sum >= q as u128 { sum - q as u128 } else { sum };
    Ok(ResidueElement {
        value: value as u64,
        q,
    })
}

pub fn ref_mod_sub(x: ResidueElement, y: ResidueElement) -> Result<ResidueElement, ArithError> {
    let q = same_modulus(&x, &y)?;
    let value = if x.value >= y.value {
        x.value - y.value
    } else {
        q - (y.value - x.value)
    };
    Ok(ResidueElement { value, q })
}

pub fn ref_mod_mul(x: ResidueElement, y: ResidueElement) -> Result<ResidueElement, ArithError> {
    let q = same_modulus(&x, &y)?;
    Ok(ResidueElement {
        value: mul_mod(x.value, y.value, q),
        q,
    })
}

/// `floor(a * b / 2^shift)` for a 128-bit `a`, exact over the 192-bit product.
fn mul_shr(a: u128, b: u64, shift: u32) -> u128 {
    let (a_lo, a_hi) = (a as u64 as u128, a >> 64);
    let lo = a_lo * b as u128;
    // a_hi < 2^64 so the high partial product cannot overflow 128 bits
    let hi = a_hi * b as u128 + (lo >> 64);
    let low_word = lo as u64 as u128;
    if shift >= 64 {
        hi >> (shift - 64)
    } else {
        (hi << (64 - shift)) | (low_word >> shift)
    }
}

/// Precomputed constants for Barrett reduction, `k = 2 * bitlength(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarrettContext {
    q: u64,
    k: u32,
    m: u128,
}

impl BarrettContext {
    pub fn new(q: u64) -> Result<Self, ArithError> {
        if !(2..1 << 63).contains(&q) {
            return Err(ArithError::InvalidModulus(q));
        }
        let k = 2 * bit_length(q);
        let m = (1u128 << k) / q as u128;
        Ok(BarrettContext { q, k, m })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn m(&self) -> u128 {
        self.m
    }

    /// `z - floor(z * m / 2^k) * q`, before the final conditional subtract.
    pub fn partial_reduce(&self, z: u128) -> u128 {
        // m < 2^(k/2 + 1) <= 2^64
        let t = mul_shr(z, self.m as u64, self.k);
        z - t * self.q as u128
    }

    pub fn mul(&self, x: ResidueElement, y: ResidueElement) -> Result<ResidueElement, ArithError> {
        if x.q != self.q {
            return Err(ArithError::ModulusMismatch(self.q, x.q));
        }
        if y.q != self.q {
            return Err(ArithError::ModulusMismatch(self.q, y.q));
        }
        let z = self.partial_reduce(x.value as u128 * y.value as u128);
        let z = if z >= self.q as u128 { z - self.q as u128 } else { z };
        Ok(ResidueElement {
            value: z as u64,
            q: self.q,
        })
    }
}

pub fn barrett_mul(
    ctx: &BarrettContext,
    x: ResidueElement,
    y: ResidueElement,
) -> Result<ResidueElement, ArithError> {
    ctx.mul(x, y)
}

/// Montgomery constants with `r` the smallest power of two above `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MontgomeryContext {
    q: u64,
    r: u128,
    /// `(r * r_inv - 1) / q`, i.e. `-q^-1 mod r`.
    k: u128,
    r_inv: u64,
}

impl MontgomeryContext {
    /// `q` must be odd (coprime to `r`).
    pub fn new(q: u64) -> Result<Self, ArithError> {
        if q < 3 || q.is_multiple_of(2) || q >= 1 << 63 {
            return Err(ArithError::InvalidModulus(q));
        }
        let r = 1u128 << bit_length(q);
        let r_mod_q = (r % q as u128) as u64;
        let r_inv = inv_mod(r_mod_q, q).ok_or(ArithError::InvalidModulus(q))?;
        let k = (r * r_inv as u128 - 1) / q as u128;
        Ok(MontgomeryContext { q, r, k, r_inv })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn r(&self) -> u128 {
        self.r
    }

    pub fn k(&self) -> u128 {
        self.k
    }

    pub fn r_inv(&self) -> u64 {
        self.r_inv
    }

    pub fn to_montgomery(&self, x: u64) -> u64 {
        ((x as u128 * self.r) % self.q as u128) as u64
    }

    pub fn from_montgomery(&self, x: u64) -> u64 {
        mul_mod(x, self.r_inv, self.q)
    }

    /// `x * r^-1 mod q` for `x < q * r`.
    pub fn reduce(&self, x: u128) -> u64 {
        let mask = self.r - 1;
        let s = ((x & mask) * self.k) & mask;
        let t = x + s * self.q as u128;
        let u = t / self.r;
        let u = if u >= self.q as u128 { u - self.q as u128 } else { u };
        u as u64
    }

    pub fn mul(&self, x: ResidueElement, y: ResidueElement) -> Result<ResidueElement, ArithError> {
        if x.q != self.q {
            return Err(ArithError::ModulusMismatch(self.q, x.q));
        }
        if y.q != self.q {
            return Err(ArithError::ModulusMismatch(self.q, y.q));
        }
        let a_bar = self.to_montgomery(x.value);
        let b_bar = self.to_montgomery(y.value);
        let c_bar = self.reduce(a_bar as u128 * b_bar as u128);
        Ok(ResidueElement {
            value: self.from_montgomery(c_bar),
            q: self.q,
        })
    }
}

pub fn montgomery_mul(
    ctx: &MontgomeryContext,
    x: ResidueElement,
    y: ResidueElement,
) -> Result<ResidueElement, ArithError> {
    ctx.mul(x, y)
}

/// Coefficient vector of a polynomial over `Z_q`, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial(Vec<u64>);

impl Polynomial {
    /// Coefficients must already be reduced modulo `q`.
    pub fn new(coeffs: Vec<u64>, q: u64) -> Result<Self, ArithError> {
        if let Some(&value) = coeffs.iter().find(|&&c| c >= q) {
            return Err(ArithError::OutOfRange { value, q });
        }
        Ok(Polynomial(coeffs))
    }

    /// Reduce every coefficient modulo `q`.
    pub fn reduced(coeffs: impl IntoIterator<Item = u64>, q: u64) -> Self {
        Polynomial(coeffs.into_iter().map(|c| c % q).collect())
    }

    pub fn zero(n: usize) -> Self {
        Polynomial(vec![0; n])
    }

    pub fn random<R: rand::Rng + ?Sized>(n: usize, q: u64, rng: &mut R) -> Self {
        Polynomial((0..n).map(|_| rng.gen_range(0..q)).collect())
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.0
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Coefficient-wise product.
    pub fn pointwise(&self, other: &Polynomial, q: u64) -> Result<Polynomial, ArithError> {
        check_len(other, self.len())?;
        Ok(Polynomial(
            self.0.iter().zip(&other.0).map(|(a, b)| mul_mod(*a, *b, q)).collect(),
        ))
    }
}

impl From<Polynomial> for Vec<u64> {
    fn from(p: Polynomial) -> Self {
        p.0
    }
}

fn check_len(a: &Polynomial, n: usize) -> Result<(), ArithError> {
    if a.len() != n {
        return Err(ArithError::LengthMismatch {
            expected: n,
            got: a.len(),
        });
    }
    Ok(())
}

fn dft(a: &Polynomial, root: u64, q: u64) -> Polynomial {
    let n = a.len();
    Polynomial(
        (0..n)
            .map(|j| {
                let wj = pow_mod(root, j as u64, q);
                let mut acc = 0u64;
                let mut power = 1u64;
                for &ai in &a.0 {
                    acc = (acc + mul_mod(ai, power, q)) % q;
                    power = mul_mod(power, wj, q);
                }
                acc
            })
            .collect(),
    )
}

/// `a_hat_j = sum_i a_i w^(ij) mod q`, natural order.
pub fn direct_ntt(params: &NttParams, a: &Polynomial) -> Result<Polynomial, ArithError> {
    check_len(a, params.n())?;
    Ok(dft(a, params.w(), params.q()))
}

/// `a_j = n^-1 sum_i a_hat_i w^(-ij) mod q`.
pub fn direct_intt(params: &NttParams, a_hat: &Polynomial) -> Result<Polynomial, ArithError> {
    check_len(a_hat, params.n())?;
    let q = params.q();
    let raw = dft(a_hat, params.w_inv(), q);
    Ok(Polynomial(
        raw.0.into_iter().map(|c| mul_mod(c, params.n_inv(), q)).collect(),
    ))
}

/// Product in `Z_q[x]/(x^n - 1)` or `Z_q[x]/(x^n + 1)` depending on the mode.
pub fn schoolbook_polymul(
    params: &NttParams,
    a: &Polynomial,
    s: &Polynomial,
) -> Result<Polynomial, ArithError> {
    let n = params.n();
    check_len(a, n)?;
    check_len(s, n)?;
    let q = params.q();
    let mut out = vec![0u64; n];
    for (i, &ai) in a.0.iter().enumerate() {
        for (j, &sj) in s.0.iter().enumerate() {
            let term = mul_mod(ai, sj, q);
            let k = i + j;
            if k < n {
                out[k] = (out[k] + term) % q;
            } else if params.mode() == RingMode::Cyclic {
                out[k - n] = (out[k - n] + term) % q;
            } else {
                out[k - n] = (out[k - n] + q - term) % q;
            }
        }
    }
    Ok(Polynomial(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{min_width, validate_params};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(v: u64, q: u64) -> ResidueElement {
        ResidueElement::new(v, q).unwrap()
    }

    fn add(x: u64, y: u64, q: u64) -> u64 {
        ref_mod_add(r(x, q), r(y, q)).unwrap().value()
    }

    fn sub(x: u64, y: u64, q: u64) -> u64 {
        ref_mod_sub(r(x, q), r(y, q)).unwrap().value()
    }

    fn mul(x: u64, y: u64, q: u64) -> u64 {
        ref_mod_mul(r(x, q), r(y, q)).unwrap().value()
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(add(0, 0, 17), 0);
        assert_eq!(add(9, 15, 17), 7);
        assert_eq!(add(16, 1, 17), 0);
        assert_eq!(sub(5, 5, 17), 0);
        assert_eq!(sub(3, 9, 17), 11);
        assert_eq!(sub(9, 3, 17), 6);
        assert_eq!(mul(0, 13, 17), 0);
        assert_eq!(mul(1, 13, 17), 13);
        assert_eq!(mul(5, 13, 17), 14);
    }

    #[test]
    fn residue_errors() {
        assert_eq!(
            ref_mod_add(r(1, 17), r(1, 13)),
            Err(ArithError::ModulusMismatch(17, 13))
        );
        assert!(ref_mod_mul(r(1, 17), r(1, 13)).is_err());
        assert_eq!(
            ResidueElement::new(17, 17),
            Err(ArithError::OutOfRange { value: 17, q: 17 })
        );
        assert_eq!(
            Polynomial::new(vec![1, 20], 17),
            Err(ArithError::OutOfRange { value: 20, q: 17 })
        );
    }

    #[test]
    fn barrett_examples() {
        let c13 = BarrettContext::new(13).unwrap();
        assert_eq!((c13.k(), c13.m()), (8, 19));
        assert_eq!(barrett_mul(&c13, r(5, 13), r(7, 13)).unwrap().value(), 9);
        assert_eq!(barrett_mul(&c13, r(0, 13), r(7, 13)).unwrap().value(), 0);
        let c17 = BarrettContext::new(17).unwrap();
        assert_eq!((c17.k(), c17.m()), (10, 60));
        assert_eq!(barrett_mul(&c17, r(16, 17), r(16, 17)).unwrap().value(), 1);
        assert_eq!(c17.partial_reduce(256), 1);
        // the quotient estimate can fall one short, leaving z in [q, 2q)
        let z = (0..17u128 * 17).find(|&z| c17.partial_reduce(z) >= 17).unwrap();
        assert!(c17.partial_reduce(z) < 34);
        assert_eq!(barrett_mul(&c17, r(1, 17), r(z as u64 % 17, 17)).unwrap().value(), z as u64 % 17);
    }

    #[test]
    fn montgomery_examples() {
        let c17 = MontgomeryContext::new(17).unwrap();
        assert_eq!(c17.r(), 32);
        assert_eq!((c17.r() * c17.r_inv() as u128 - 1) % 17, 0);
        assert_eq!(montgomery_mul(&c17, r(1, 17), r(1, 17)).unwrap().value(), 1);
        assert_eq!(montgomery_mul(&c17, r(5, 17), r(13, 17)).unwrap().value(), 14);
        let c13 = MontgomeryContext::new(13).unwrap();
        assert_eq!(c13.r(), 16);
        assert_eq!(montgomery_mul(&c13, r(12, 13), r(12, 13)).unwrap().value(), 1);
        assert!(MontgomeryContext::new(16).is_err());
    }

    #[test]
    fn reduction_oracles_agree_exhaustively() {
        for q in [3u64, 13, 17, 97, 257, 769, 3329, 4093] {
            let b = BarrettContext::new(q).unwrap();
            let m = MontgomeryContext::new(q).unwrap();
            for x in 0..q {
                for y in 0..q {
                    let z = (x * y) as u128;
                    assert!(b.partial_reduce(z) < 2 * q as u128);
                    let expected = x * y % q;
                    assert_eq!(b.mul(r(x, q), r(y, q)).unwrap().value(), expected);
                    assert_eq!(m.mul(r(x, q), r(y, q)).unwrap().value(), expected);
                }
            }
        }
    }

    #[test]
    fn wide_helper_is_exact() {
        let a = (1u128 << 125) + 12345;
        let b = u64::MAX - 7;
        // reference split by hand: (a * b) >> 126
        let expected = {
            let hi = (a >> 64) * b as u128;
            let lo = (a as u64 as u128) * b as u128;
            (hi + (lo >> 64)) >> 62
        };
        assert_eq!(mul_shr(a, b, 126), expected);
        assert_eq!(mul_shr(1000, 3, 2), 750);
    }

    proptest! {
        #[test]
        fn reduction_oracles_agree_wide(
            q in prop::sample::select(vec![7681u64, 12289, 2013265921, 4611686018427387847, 9223372036854775783]),
            x in any::<u64>(),
            y in any::<u64>(),
        ) {
            let (x, y) = (x % q, y % q);
            let b = BarrettContext::new(q).unwrap();
            let m = MontgomeryContext::new(q).unwrap();
            let expected = mul(x, y, q);
            prop_assert!(b.partial_reduce(x as u128 * y as u128) < 2 * q as u128);
            prop_assert_eq!(b.mul(r(x, q), r(y, q)).unwrap().value(), expected);
            prop_assert_eq!(m.mul(r(x, q), r(y, q)).unwrap().value(), expected);
        }

        #[test]
        fn add_sub_roundtrip(x in 0u64..7681, y in 0u64..7681) {
            prop_assert_eq!(sub(add(x, y, 7681), y, 7681), x);
        }
    }

    fn toy() -> NttParams {
        validate_params(17, 8, 7, RingMode::Cyclic).unwrap()
    }

    #[test]
    fn transform_examples() {
        let p = toy();
        assert_eq!(direct_ntt(&p, &Polynomial::zero(8)).unwrap(), Polynomial::zero(8));
        let delta = Polynomial::new(vec![1, 0, 0, 0, 0, 0, 0, 0], 17).unwrap();
        assert_eq!(direct_ntt(&p, &delta).unwrap().coeffs(), &[1; 8]);
        let a = Polynomial::new(vec![1, 1, 0, 0, 0, 0, 0, 0], 17).unwrap();
        let a_hat = direct_ntt(&p, &a).unwrap();
        assert_eq!(a_hat.coeffs(), &[2, 3, 5, 9, 0, 16, 14, 10]);
        assert_eq!(direct_intt(&p, &a_hat).unwrap(), a);
        assert_eq!(direct_intt(&p, &Polynomial::zero(8)).unwrap(), Polynomial::zero(8));
        assert_eq!(
            direct_ntt(&p, &Polynomial::zero(4)),
            Err(ArithError::LengthMismatch {
                expected: 8,
                got: 4
            })
        );
    }

    #[test]
    fn schoolbook_examples() {
        let cyc = validate_params(17, 2, 7, RingMode::Cyclic).unwrap();
        let x = Polynomial::new(vec![0, 1], 17).unwrap();
        assert_eq!(schoolbook_polymul(&cyc, &x, &x).unwrap().coeffs(), &[1, 0]);
        let p = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Polynomial::random(8, 17, &mut rng);
        let delta = Polynomial::new(vec![1, 0, 0, 0, 0, 0, 0, 0], 17).unwrap();
        assert_eq!(schoolbook_polymul(&p, &delta, &s).unwrap(), s);
    }

    #[test]
    fn negacyclic_wrap_sign() {
        // 17 = 1 mod 4, so a negacyclic n = 2 transform exists
        let neg = validate_params(17, 2, 7, RingMode::Negacyclic).unwrap();
        let x = Polynomial::new(vec![0, 1], 17).unwrap();
        assert_eq!(schoolbook_polymul(&neg, &x, &x).unwrap().coeffs(), &[16, 0]);
    }

    #[test]
    fn inverse_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (q, n) in [(17u64, 8usize), (7681, 256), (12289, 64)] {
            let p = validate_params(q, n, min_width(q), RingMode::Cyclic).unwrap();
            let a = Polynomial::random(n, q, &mut rng);
            let s = Polynomial::random(n, q, &mut rng);
            assert_eq!(direct_intt(&p, &direct_ntt(&p, &a).unwrap()).unwrap(), a);
            let (alpha, beta) = (3, q - 5);
            let combo = Polynomial::reduced(
                a.coeffs()
                    .iter()
                    .zip(s.coeffs())
                    .map(|(x, y)| (mul_mod(alpha, *x, q) + mul_mod(beta, *y, q)) % q),
                q,
            );
            let lhs = direct_ntt(&p, &combo).unwrap();
            let (na, ns) = (direct_ntt(&p, &a).unwrap(), direct_ntt(&p, &s).unwrap());
            for j in 0..n {
                let rhs = (mul_mod(alpha, na.coeffs()[j], q) + mul_mod(beta, ns.coeffs()[j], q)) % q;
                assert_eq!(lhs.coeffs()[j], rhs);
            }
        }
    }

    fn weighted(a: &Polynomial, root: u64, q: u64) -> Polynomial {
        Polynomial::reduced(
            a.coeffs().iter().enumerate().map(|(i, &c)| mul_mod(c, pow_mod(root, i as u64, q), q)),
            q,
        )
    }

    #[test]
    fn convolution_theorem() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (q, n) in [(17u64, 8usize), (7681, 128), (12289, 256)] {
            let p = validate_params(q, n, min_width(q), RingMode::Cyclic).unwrap();
            let a = Polynomial::random(n, q, &mut rng);
            let s = Polynomial::random(n, q, &mut rng);
            let prod = direct_ntt(&p, &a)
                .unwrap()
                .pointwise(&direct_ntt(&p, &s).unwrap(), q)
                .unwrap();
            assert_eq!(direct_intt(&p, &prod).unwrap(), schoolbook_polymul(&p, &a, &s).unwrap());

            let neg = validate_params(q, n, min_width(q), RingMode::Negacyclic).unwrap();
            let psi = neg.psi().unwrap();
            let prod = direct_ntt(&neg, &weighted(&a, psi, q))
                .unwrap()
                .pointwise(&direct_ntt(&neg, &weighted(&s, psi, q)).unwrap(), q)
                .unwrap();
            let back = weighted(&direct_intt(&neg, &prod).unwrap(), neg.psi_inv().unwrap(), q);
            assert_eq!(back, schoolbook_polymul(&neg, &a, &s).unwrap());
        }
    }
}
