//! Prime-field arithmetic over moduli below 2^63.
//!
//! Products are formed in `u128`, so every modulus that fits the range can be
//! used without Montgomery tricks. Elements carry their modulus; mixing
//! elements of different fields is a programming error and panics.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::Rng;

use super::SharingError;

/// `2^31 - 1`, the default modulus for scenarios.
pub const MERSENNE_31: u64 = (1 << 31) - 1;

/// Largest accepted modulus (exclusive).
pub const MAX_MODULUS: u64 = 1 << 63;

/// A prime field `Z/pZ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeField {
    modulus: u64,
}

impl PrimeField {
    /// Builds the field, rejecting composite or out-of-range moduli.
    pub fn new(modulus: u64) -> Result<Self, SharingError> {
        if modulus >= MAX_MODULUS {
            return Err(SharingError::InvalidParams(format!(
                "modulus {modulus} must be below 2^63"
            )));
        }
        if !is_prime(modulus) {
            return Err(SharingError::InvalidParams(format!(
                "modulus {modulus} is not prime"
            )));
        }
        Ok(Self { modulus })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Reduces `value` into the field.
    pub fn element(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.modulus,
            modulus: self.modulus,
        }
    }

    /// Embeds a signed integer; `-1` maps to `p - 1`.
    pub fn from_i64(&self, value: i64) -> FieldElement {
        let m = self.modulus as i128;
        let v = (value as i128).rem_euclid(m);
        self.element(v as u64)
    }

    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    /// Uniform draw from `[0, p)`.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        self.element(rng.gen_range(0..self.modulus))
    }

    /// Checks that `element` belongs to this field.
    pub fn contains(&self, element: &FieldElement) -> bool {
        element.modulus == self.modulus
    }
}

/// A residue in `[0, p)` together with its modulus.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    /// Canonical representative in `[0, p)`.
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn field(&self) -> PrimeField {
        PrimeField {
            modulus: self.modulus,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    /// Representative in `(-p/2, p/2]`; residues above `p/2` read as negative.
    pub fn to_signed(&self) -> i64 {
        if self.value > self.modulus / 2 {
            -((self.modulus - self.value) as i64)
        } else {
            self.value as i64
        }
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = self.field().one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat's little theorem; `None` for zero.
    pub fn inverse(self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(self.pow(self.modulus - 2))
        }
    }

    fn check_same_field(&self, other: &Self) {
        assert_eq!(
            self.modulus, other.modulus,
            "arithmetic across different prime fields"
        );
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for FieldElement {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        self.check_same_field(&rhs);
        let sum = (self.value as u128 + rhs.value as u128) % self.modulus as u128;
        Self {
            value: sum as u64,
            modulus: self.modulus,
        }
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for FieldElement {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for FieldElement {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            value: (self.modulus - self.value) % self.modulus,
            modulus: self.modulus,
        }
    }
}

impl Mul for FieldElement {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        self.check_same_field(&rhs);
        let prod = (self.value as u128 * rhs.value as u128) % self.modulus as u128;
        Self {
            value: prod as u64,
            modulus: self.modulus,
        }
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; these witnesses are exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
