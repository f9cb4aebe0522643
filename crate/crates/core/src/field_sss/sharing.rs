use std::collections::BTreeSet;

use rand::Rng;

use super::field::{FieldElement, PrimeField};
use super::SharingError;

/// Encoded size of a [`Share`]: modulus, x, y as `u64`, degree as `u32`.
pub const SHARE_BYTES: usize = 8 + 8 + 8 + 4;

/// One evaluation `(x, f(x))` of a sharing polynomial of known degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Share {
    eval_point: FieldElement,
    value: FieldElement,
    degree: usize,
}

impl Share {
    pub fn new(
        eval_point: FieldElement,
        value: FieldElement,
        degree: usize,
    ) -> Result<Self, SharingError> {
        if eval_point.is_zero() {
            return Err(SharingError::InvalidParams(
                "evaluation point 0 is reserved for the secret".into(),
            ));
        }
        if eval_point.modulus() != value.modulus() {
            return Err(SharingError::Misaligned(
                "evaluation point and value live in different fields".into(),
            ));
        }
        Ok(Self {
            eval_point,
            value,
            degree,
        })
    }

    /// Share of zero at `eval_point`; the neutral start of a running sum.
    pub fn zero(eval_point: FieldElement, degree: usize) -> Result<Self, SharingError> {
        Self::new(eval_point, eval_point.field().zero(), degree)
    }

    pub fn eval_point(&self) -> FieldElement {
        self.eval_point
    }

    pub fn value(&self) -> FieldElement {
        self.value
    }

    /// Degree of the polynomial this share was evaluated from.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn field(&self) -> PrimeField {
        self.value.field()
    }

    /// Same point and degree, value shifted by `offset`.
    pub fn offset_by(&self, offset: FieldElement) -> Self {
        Self {
            value: self.value + offset,
            ..*self
        }
    }

    /// Big-endian `modulus | x | y | degree`.
    pub fn to_bytes(&self) -> [u8; SHARE_BYTES] {
        let mut out = [0u8; SHARE_BYTES];
        out[0..8].copy_from_slice(&self.value.modulus().to_be_bytes());
        out[8..16].copy_from_slice(&self.eval_point.value().to_be_bytes());
        out[16..24].copy_from_slice(&self.value.value().to_be_bytes());
        out[24..28].copy_from_slice(&(self.degree as u32).to_be_bytes());
        out
    }

    /// Strict inverse of [`Share::to_bytes`]: non-canonical residues are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SharingError> {
        if bytes.len() != SHARE_BYTES {
            return Err(SharingError::Encoding(format!(
                "share must be {SHARE_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let word = |i: usize| u64::from_be_bytes(bytes[i..i + 8].try_into().unwrap());
        let (modulus, x, y) = (word(0), word(8), word(16));
        let degree = u32::from_be_bytes(bytes[24..28].try_into().unwrap()) as usize;
        let field = PrimeField::new(modulus)?;
        if x >= modulus || y >= modulus {
            return Err(SharingError::Encoding("non-canonical residue".into()));
        }
        Self::new(field.element(x), field.element(y), degree)
    }
}

/// Threshold `t`, share count `n` and the public evaluation points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharingParams {
    threshold: usize,
    field: PrimeField,
    eval_points: Vec<FieldElement>,
}

impl SharingParams {
    /// `eval_points[j]` belongs to worker `j`. Requires `1 <= t <= n < p`,
    /// distinct nonzero points, and `n >= 2t - 1` so that squared shares can
    /// still be recombined.
    pub fn new(
        threshold: usize,
        field: PrimeField,
        eval_points: Vec<FieldElement>,
    ) -> Result<Self, SharingError> {
        let n = eval_points.len();
        if threshold == 0 || threshold > n {
            return Err(SharingError::InvalidParams(format!(
                "threshold {threshold} must lie in [1, n = {n}]"
            )));
        }
        if n as u64 >= field.modulus() {
            return Err(SharingError::InvalidParams(format!(
                "share count {n} must be below the modulus {}",
                field.modulus()
            )));
        }
        if n < 2 * threshold - 1 {
            return Err(SharingError::InvalidParams(format!(
                "n = {n} < 2t - 1 = {}: checksum shares would be unrecoverable",
                2 * threshold - 1
            )));
        }
        let mut seen = BTreeSet::new();
        for x in &eval_points {
            if !field.contains(x) {
                return Err(SharingError::Misaligned(
                    "evaluation point from another field".into(),
                ));
            }
            if x.is_zero() {
                return Err(SharingError::InvalidParams(
                    "evaluation point 0 is reserved for the secret".into(),
                ));
            }
            if !seen.insert(x.value()) {
                return Err(SharingError::DuplicateEvalPoint(x.value()));
            }
        }
        Ok(Self {
            threshold,
            field,
            eval_points,
        })
    }

    /// Worker `j` (0-based) gets `x = j + 1`.
    pub fn sequential(threshold: usize, n: usize, field: PrimeField) -> Result<Self, SharingError> {
        let points = (1..=n as u64).map(|x| field.element(x)).collect();
        Self::new(threshold, field, points)
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn share_count(&self) -> usize {
        self.eval_points.len()
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn eval_points(&self) -> &[FieldElement] {
        &self.eval_points
    }

    /// Degree of fresh ballot shares, `t - 1`.
    pub fn share_degree(&self) -> usize {
        self.threshold - 1
    }

    /// Degree after one local squaring, `2(t - 1)`.
    pub fn squared_degree(&self) -> usize {
        2 * (self.threshold - 1)
    }
}

/// Dense polynomial, lowest coefficient first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    coefficients: Vec<FieldElement>,
}

impl Polynomial {
    pub fn from_coefficients(coefficients: Vec<FieldElement>) -> Self {
        assert!(!coefficients.is_empty(), "polynomial needs a constant term");
        Self { coefficients }
    }

    /// `f(0) = secret`, the other `degree` coefficients uniform over the field.
    pub fn random<R: Rng + ?Sized>(secret: FieldElement, degree: usize, rng: &mut R) -> Self {
        let field = secret.field();
        let mut coefficients = Vec::with_capacity(degree + 1);
        coefficients.push(secret);
        coefficients.extend((0..degree).map(|_| field.random(rng)));
        Self { coefficients }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn evaluate(&self, x: FieldElement) -> FieldElement {
        self.coefficients
            .iter()
            .rev()
            .fold(x.field().zero(), |acc, &c| acc * x + c)
    }

    /// Evaluations at every point of `params`, in worker order.
    pub fn shares(&self, params: &SharingParams) -> Vec<Share> {
        params
            .eval_points
            .iter()
            .map(|&x| Share {
                eval_point: x,
                value: self.evaluate(x),
                degree: self.degree(),
            })
            .collect()
    }
}

/// Splits `secret` into `n` shares of a random degree-`(t-1)` polynomial.
pub fn share_secret<R: Rng + ?Sized>(
    secret: FieldElement,
    params: &SharingParams,
    rng: &mut R,
) -> Result<Vec<Share>, SharingError> {
    if !params.field.contains(&secret) {
        return Err(SharingError::Misaligned("secret from another field".into()));
    }
    Ok(Polynomial::random(secret, params.share_degree(), rng).shares(params))
}

/// Evaluates the interpolant through `points` at `x`.
pub(crate) fn lagrange_at(points: &[(FieldElement, FieldElement)], x: FieldElement) -> FieldElement {
    let field = x.field();
    let mut acc = field.zero();
    for (i, &(xi, yi)) in points.iter().enumerate() {
        let mut num = field.one();
        let mut den = field.one();
        for (j, &(xj, _)) in points.iter().enumerate() {
            if i != j {
                num = num * (x - xj);
                den = den * (xi - xj);
            }
        }
        let den_inv = den.inverse().expect("evaluation points are distinct");
        acc += yi * num * den_inv;
    }
    acc
}

/// Common validation for operations consuming a share vector.
pub(crate) fn check_share_set(shares: &[Share], degree: usize) -> Result<(), SharingError> {
    let Some(first) = shares.first() else {
        return Ok(());
    };
    let mut seen = BTreeSet::new();
    for s in shares {
        if s.value.modulus() != first.value.modulus() {
            return Err(SharingError::Misaligned("shares from different fields".into()));
        }
        if s.degree != degree {
            return Err(SharingError::Misaligned(format!(
                "share at x = {} has degree {}, expected {degree}",
                s.eval_point, s.degree
            )));
        }
        if !seen.insert(s.eval_point.value()) {
            return Err(SharingError::DuplicateEvalPoint(s.eval_point.value()));
        }
    }
    Ok(())
}

/// `f(0)` of the degree-`degree` polynomial through the first `degree + 1` shares.
pub fn reconstruct(shares: &[Share], degree: usize) -> Result<FieldElement, SharingError> {
    if shares.len() < degree + 1 {
        return Err(SharingError::InsufficientShares {
            needed: degree + 1,
            got: shares.len(),
        });
    }
    check_share_set(shares, degree)?;
    let points: Vec<_> = shares[..=degree]
        .iter()
        .map(|s| (s.eval_point, s.value))
        .collect();
    Ok(lagrange_at(&points, shares[0].field().zero()))
}

/// Pointwise sum of two shares held by the same worker.
pub fn add_shares(a: &Share, b: &Share) -> Result<Share, SharingError> {
    if a.eval_point != b.eval_point {
        return Err(SharingError::Misaligned(format!(
            "evaluation points differ: {} vs {}",
            a.eval_point, b.eval_point
        )));
    }
    if a.degree != b.degree {
        return Err(SharingError::Misaligned(format!(
            "degrees differ: {} vs {}",
            a.degree, b.degree
        )));
    }
    Ok(Share {
        value: a.value + b.value,
        ..*a
    })
}

/// Local squaring. The result lies on a polynomial of degree `2(t-1)` and
/// needs `2t - 1` points to recombine; squaring twice is refused.
pub fn square_share(a: &Share, params: &SharingParams) -> Result<Share, SharingError> {
    if a.degree != params.share_degree() {
        return Err(SharingError::DegreeOverflow {
            degree: a.degree,
            limit: params.share_degree(),
        });
    }
    Ok(Share {
        value: a.value.square(),
        degree: params.squared_degree(),
        ..*a
    })
}

/// Pointwise sum of equally long share vectors (one vector per secret).
pub fn add_share_vectors(vectors: &[Vec<Share>]) -> Result<Vec<Share>, SharingError> {
    let Some((first, rest)) = vectors.split_first() else {
        return Ok(Vec::new());
    };
    let mut acc = first.clone();
    for v in rest {
        if v.len() != acc.len() {
            return Err(SharingError::Misaligned("share vectors differ in length".into()));
        }
        for (a, b) in acc.iter_mut().zip(v) {
            *a = add_shares(a, b)?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                go(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(0, n, k, &mut Vec::new(), &mut out);
        out
    }

    fn f13() -> PrimeField {
        PrimeField::new(13).unwrap()
    }

    fn share(f: PrimeField, x: u64, y: u64, degree: usize) -> Share {
        Share::new(f.element(x), f.element(y), degree).unwrap()
    }

    #[test]
    fn threshold_one_gives_constant_shares() {
        let f = f13();
        let params = SharingParams::sequential(1, 3, f).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let shares = share_secret(f.element(5), &params, &mut rng).unwrap();
        assert!(shares.iter().all(|s| s.value() == f.element(5)));
    }

    #[test]
    fn fixed_polynomial_evaluations() {
        // f(x) = 5 + 3x over GF(13) at x = 1, 2, 3: 8, 11, 14 mod 13 = 1.
        let f = f13();
        let params = SharingParams::sequential(2, 3, f).unwrap();
        let poly = Polynomial::from_coefficients(vec![f.element(5), f.element(3)]);
        let values: Vec<u64> = poly.shares(&params).iter().map(|s| s.value().value()).collect();
        assert_eq!(values, vec![8, 11, 1]);
    }

    #[test]
    fn random_polynomial_draws_coefficients_from_the_rng_in_order() {
        let f = f13();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let poly = Polynomial::random(f.element(5), 2, &mut rng);
        let mut replay = ChaCha20Rng::seed_from_u64(9);
        let expected = vec![f.element(5), f.random(&mut replay), f.random(&mut replay)];
        assert_eq!(poly, Polynomial::from_coefficients(expected));
    }

    #[test]
    fn hand_lagrange_example() {
        // l1(0) = 2, l2(0) = -1, so 8*2 - 11 = 5.
        let f = f13();
        let shares = [share(f, 1, 8, 1), share(f, 2, 11, 1)];
        assert_eq!(reconstruct(&shares, 1).unwrap(), f.element(5));
    }

    #[test]
    fn constant_polynomial_reconstructs_any_value() {
        let f = f13();
        for s in 0..13 {
            let shares = [share(f, 1, s, 0), share(f, 2, s, 0), share(f, 3, s, 0)];
            assert_eq!(reconstruct(&shares, 0).unwrap().value(), s);
        }
    }

    #[test]
    fn every_three_subset_of_five_recovers_and_two_do_not_determine() {
        let f = f13();
        let params = SharingParams::sequential(3, 5, f).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let shares = share_secret(f.element(7), &params, &mut rng).unwrap();
        for subset in subsets(5, 3) {
            let picked: Vec<Share> = subset.iter().map(|&i| shares[i]).collect();
            assert_eq!(reconstruct(&picked, 2).unwrap(), f.element(7));
        }
        // Two shares are consistent with every candidate secret: for each s
        // there is a degree-2 polynomial through (0, s) and both points.
        for pair in subsets(5, 2) {
            let (a, b) = (shares[pair[0]], shares[pair[1]]);
            for s in 0..13 {
                let pts = [
                    (f.zero(), f.element(s)),
                    (a.eval_point(), a.value()),
                    (b.eval_point(), b.value()),
                ];
                assert_eq!(lagrange_at(&pts, f.zero()), f.element(s));
            }
            assert_eq!(
                reconstruct(&[a, b], 2),
                Err(SharingError::InsufficientShares { needed: 3, got: 2 })
            );
        }
    }

    #[test]
    fn addition_is_homomorphic() {
        let f = f13();
        let params = SharingParams::sequential(2, 3, f).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = share_secret(f.element(5), &params, &mut rng).unwrap();
        let b = share_secret(f.element(3), &params, &mut rng).unwrap();
        let zero = share_secret(f.zero(), &params, &mut rng).unwrap();
        let sum = add_share_vectors(&[a.clone(), b]).unwrap();
        assert_eq!(reconstruct(&sum, 1).unwrap(), f.element(8));
        let same = add_share_vectors(&[a, zero]).unwrap();
        assert_eq!(reconstruct(&same, 1).unwrap(), f.element(5));
    }

    #[test]
    fn ballots_sum_to_signed_tally() {
        let f = PrimeField::new(crate::field_sss::MERSENNE_31).unwrap();
        let params = SharingParams::sequential(2, 3, f).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let votes = [1i64, 1, -1];
        let vectors: Vec<_> = votes
            .iter()
            .map(|&v| share_secret(f.from_i64(v), &params, &mut rng).unwrap())
            .collect();
        let sum = add_share_vectors(&vectors).unwrap();
        assert_eq!(reconstruct(&sum, 1).unwrap().to_signed(), 1);
    }

    #[test]
    fn squaring_doubles_degree() {
        let f = f13();
        let params = SharingParams::sequential(2, 3, f).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for (secret, expected) in [(2, 4), (12, 1)] {
            let shares = share_secret(f.element(secret), &params, &mut rng).unwrap();
            let squared: Vec<_> = shares
                .iter()
                .map(|s| square_share(s, &params).unwrap())
                .collect();
            assert!(squared.iter().all(|s| s.degree() == 2));
            assert_eq!(reconstruct(&squared, 2).unwrap(), f.element(expected));
            assert_eq!(
                reconstruct(&squared[..2], 2),
                Err(SharingError::InsufficientShares { needed: 3, got: 2 })
            );
        }
    }

    #[test]
    fn squaring_twice_is_refused() {
        let f = f13();
        let params = SharingParams::sequential(2, 3, f).unwrap();
        let s = share(f, 1, 4, 1);
        let sq = square_share(&s, &params).unwrap();
        assert_eq!(
            square_share(&sq, &params),
            Err(SharingError::DegreeOverflow { degree: 2, limit: 1 })
        );
    }

    #[test]
    fn misaligned_shares_are_rejected() {
        let f = f13();
        assert!(matches!(
            add_shares(&share(f, 1, 2, 1), &share(f, 2, 2, 1)),
            Err(SharingError::Misaligned(_))
        ));
        assert!(matches!(
            add_shares(&share(f, 1, 2, 1), &share(f, 1, 2, 2)),
            Err(SharingError::Misaligned(_))
        ));
        assert_eq!(
            reconstruct(&[share(f, 1, 2, 1), share(f, 1, 3, 1)], 1),
            Err(SharingError::DuplicateEvalPoint(1))
        );
        assert!(matches!(
            reconstruct(&[share(f, 1, 2, 2), share(f, 2, 3, 2), share(f, 3, 3, 2)], 1),
            Err(SharingError::Misaligned(_))
        ));
    }

    #[test]
    fn params_validation() {
        let f = f13();
        assert!(SharingParams::sequential(4, 3, f).is_err());
        assert!(SharingParams::sequential(0, 3, f).is_err());
        assert!(SharingParams::sequential(3, 4, f).is_err()); // n < 2t - 1
        assert!(SharingParams::sequential(2, 13, f).is_err()); // n >= p
        assert_eq!(
            SharingParams::new(2, f, vec![f.element(1), f.element(2), f.element(1)]),
            Err(SharingError::DuplicateEvalPoint(1))
        );
        assert!(SharingParams::new(2, f, vec![f.element(0), f.element(1), f.element(2)]).is_err());
        assert!(Share::new(f.zero(), f.one(), 0).is_err());
    }

    #[test]
    fn share_bytes_reject_noncanonical_values() {
        let f = f13();
        let s = share(f, 3, 9, 1);
        assert_eq!(Share::from_bytes(&s.to_bytes()).unwrap(), s);
        let mut bytes = s.to_bytes();
        bytes[23] = 13; // y = 13 is not a residue mod 13
        assert!(Share::from_bytes(&bytes).is_err());
        bytes[7] = 12; // composite modulus
        assert!(Share::from_bytes(&bytes).is_err());
        assert!(Share::from_bytes(&s.to_bytes()[..27]).is_err());
    }
}
