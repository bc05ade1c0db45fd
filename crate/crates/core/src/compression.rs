//! Compression operators for belief exchange.
//!
//! An operator Q with quality factor omega in (0, 1] contracts the
//! compression error: E‖Q(x) - x‖^2 <= (1 - omega)‖x‖^2, the expectation
//! taken over the operator's own randomness. Deterministic operators are
//! expected to satisfy the bound per draw, though nearest-level quantization
//! only does so when the level count is large enough relative to the
//! dimension (see `deterministic_quantizer_breaks_contract_when_coarse`).
//!
//! Sparsifiers transmit k of m coordinates as (index, value) pairs; the
//! quantizer transmits every coordinate as a signed level together with one
//! full-precision norm.

use rand::Rng;

use crate::error::{Error, Result};

/// Operator family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompressionKind {
    /// Identity: the whole vector at full precision.
    Full,
    /// k coordinates chosen uniformly without replacement.
    RandK,
    /// The k coordinates of largest magnitude.
    TopK,
    /// Norm-scaled uniform quantization with stochastic rounding.
    QsgdRandomized,
    /// Norm-scaled uniform quantization rounding to the nearest level.
    QsgdDeterministic,
}

/// An operator family with its parameters.
///
/// `k` is the kept-coordinate count for sparsifiers and the per-coordinate
/// bit width for quantizers; `Full` ignores it. `scalar_bits` is the cost of
/// one uncompressed scalar in the bit accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompressionSpec {
    pub kind: CompressionKind,
    pub k: usize,
    pub scalar_bits: u32,
}

/// One compressed message.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedVector {
    /// Dimension of the original vector.
    pub dimension: usize,
    /// Wire cost of this message under its operator's encoding.
    pub encoded_bits: u64,
    pub payload: Payload,
}

/// Wire content of a compressed message.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// (index, value) pairs with strictly increasing indices, all < dimension.
    Sparse(Vec<(usize, f64)>),
    /// Signed levels in [-u, u]; coordinate i reconstructs to
    /// `scale * levels[i]` with scale = omega * norm / u.
    Quantized {
        norm: f64,
        scale: f64,
        levels: Vec<i64>,
    },
}

impl CompressionSpec {
    /// Identity operator; omega = 1.
    pub fn full(scalar_bits: u32) -> Self {
        CompressionSpec {
            kind: CompressionKind::Full,
            k: 0,
            scalar_bits,
        }
    }

    /// Uniform random k-sparsification. Requires k >= 1; k <= m is checked
    /// against each compressed vector.
    pub fn rand_k(k: usize, scalar_bits: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::BadSparsity { k, m: usize::MAX });
        }
        Ok(CompressionSpec {
            kind: CompressionKind::RandK,
            k,
            scalar_bits,
        })
    }

    /// Largest-magnitude k-sparsification, ties broken toward lower indices.
    pub fn top_k(k: usize, scalar_bits: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::BadSparsity { k, m: usize::MAX });
        }
        Ok(CompressionSpec {
            kind: CompressionKind::TopK,
            k,
            scalar_bits,
        })
    }

    /// Stochastic-rounding quantizer with `bits` per coordinate,
    /// u = 2^(bits-1) - 1 positive levels.
    pub fn qsgd(bits: u32, scalar_bits: u32) -> Result<Self> {
        Self::quantizer(CompressionKind::QsgdRandomized, bits, scalar_bits)
    }

    /// Nearest-level quantizer with `bits` per coordinate.
    pub fn qsgd_deterministic(bits: u32, scalar_bits: u32) -> Result<Self> {
        Self::quantizer(CompressionKind::QsgdDeterministic, bits, scalar_bits)
    }

    fn quantizer(kind: CompressionKind, bits: u32, scalar_bits: u32) -> Result<Self> {
        if bits < 2 || bits > scalar_bits || bits > 64 {
            return Err(Error::BadQuantizerBits { bits, scalar_bits });
        }
        Ok(CompressionSpec {
            kind,
            k: bits as usize,
            scalar_bits,
        })
    }

    /// True when compression consumes no randomness.
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self.kind,
            CompressionKind::Full | CompressionKind::TopK | CompressionKind::QsgdDeterministic
        )
    }

    /// Number of positive quantization levels, u = 2^(bits-1) - 1.
    pub fn quantizer_levels(&self) -> u64 {
        debug_assert!(matches!(
            self.kind,
            CompressionKind::QsgdRandomized | CompressionKind::QsgdDeterministic
        ));
        (1u64 << (self.k - 1)) - 1
    }

    /// Quality factor omega in (0, 1] at dimension m.
    pub fn omega(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Err(Error::EmptyVector);
        }
        match self.kind {
            CompressionKind::Full => Ok(1.0),
            CompressionKind::RandK | CompressionKind::TopK => {
                if self.k > m {
                    return Err(Error::BadSparsity { k: self.k, m });
                }
                Ok(self.k as f64 / m as f64)
            }
            CompressionKind::QsgdRandomized | CompressionKind::QsgdDeterministic => {
                let u = self.quantizer_levels() as f64;
                let mf = m as f64;
                Ok(1.0 / (1.0 + (mf / (u * u)).min(mf.sqrt() / u)))
            }
        }
    }

    /// Wire cost in bits of one message at dimension m.
    ///
    /// Sparsifiers pay k values plus k indices of ceil(log2 m) bits each;
    /// quantizers pay one level per coordinate plus one full-precision norm;
    /// `Full` pays m scalars.
    pub fn encoded_bits(&self, m: usize) -> Result<u64> {
        if m == 0 {
            return Err(Error::EmptyVector);
        }
        let b = self.scalar_bits as u64;
        match self.kind {
            CompressionKind::Full => Ok(m as u64 * b),
            CompressionKind::RandK | CompressionKind::TopK => {
                if self.k > m {
                    return Err(Error::BadSparsity { k: self.k, m });
                }
                Ok(self.k as u64 * (b + ceil_log2(m)))
            }
            CompressionKind::QsgdRandomized | CompressionKind::QsgdDeterministic => {
                Ok(m as u64 * self.k as u64 + b)
            }
        }
    }
}

/// Smallest j with 2^j >= m; index width for one of m coordinates.
fn ceil_log2(m: usize) -> u64 {
    let m = m as u64;
    if m <= 1 {
        0
    } else {
        64 - (m - 1).leading_zeros() as u64
    }
}

fn validate_input(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyVector);
    }
    for (i, v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(())
}

/// Compresses `x` under `spec`. Randomized operators draw from `rng`;
/// deterministic ones leave it untouched.
pub fn compress<R: Rng + ?Sized>(
    spec: &CompressionSpec,
    x: &[f64],
    rng: &mut R,
) -> Result<CompressedVector> {
    validate_input(x)?;
    let m = x.len();
    let encoded_bits = spec.encoded_bits(m)?;
    let payload = match spec.kind {
        CompressionKind::Full => Payload::Sparse(x.iter().copied().enumerate().collect()),
        CompressionKind::TopK => Payload::Sparse(top_k_pairs(x, spec.k)),
        CompressionKind::RandK => Payload::Sparse(rand_k_pairs(x, spec.k, rng)),
        CompressionKind::QsgdRandomized => quantize(x, spec, |rng| rng.random::<f64>(), rng),
        CompressionKind::QsgdDeterministic => quantize(x, spec, |_| 0.5, rng),
    };
    Ok(CompressedVector {
        dimension: m,
        encoded_bits,
        payload,
    })
}

/// Indices of the k largest magnitudes, ties toward the lower index,
/// returned in increasing index order.
fn top_k_pairs(x: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        x[b].abs()
            .partial_cmp(&x[a].abs())
            .expect("finite by validation")
            .then(a.cmp(&b))
    });
    let mut kept = order[..k].to_vec();
    kept.sort_unstable();
    kept.into_iter().map(|i| (i, x[i])).collect()
}

/// Uniform k-subset via a Fisher-Yates prefix, returned in increasing
/// index order.
fn rand_k_pairs<R: Rng + ?Sized>(x: &[f64], k: usize, rng: &mut R) -> Vec<(usize, f64)> {
    let m = x.len();
    let mut idx: Vec<usize> = (0..m).collect();
    for j in 0..k {
        let pick = j + rng.random_range(0..m - j);
        idx.swap(j, pick);
    }
    let mut kept = idx[..k].to_vec();
    kept.sort_unstable();
    kept.into_iter().map(|i| (i, x[i])).collect()
}

/// Norm-scaled uniform quantization: level_i = floor(u|x_i|/‖x‖ + zeta_i),
/// reconstruction (omega ‖x‖ / u) * sign(x_i) * level_i. The zero vector
/// maps to an exact zero message.
fn quantize<R: Rng + ?Sized>(
    x: &[f64],
    spec: &CompressionSpec,
    zeta: impl Fn(&mut R) -> f64,
    rng: &mut R,
) -> Payload {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Payload::Quantized {
            norm: 0.0,
            scale: 0.0,
            levels: vec![0; x.len()],
        };
    }
    let u = spec.quantizer_levels();
    let uf = u as f64;
    let omega = spec
        .omega(x.len())
        .expect("dimension validated by compress");
    let levels = x
        .iter()
        .map(|&v| {
            // |v|/norm <= 1 up to roundoff; clamp so levels stay in [-u, u].
            let level = ((uf * v.abs() / norm + zeta(rng)).floor() as u64).min(u);
            level as i64 * v.signum() as i64
        })
        .collect();
    Payload::Quantized {
        norm,
        scale: omega * norm / uf,
        levels,
    }
}

/// Reconstructs the dense vector a message encodes.
pub fn densify(cv: &CompressedVector) -> Vec<f64> {
    match &cv.payload {
        Payload::Sparse(pairs) => {
            let mut out = vec![0.0; cv.dimension];
            for &(i, v) in pairs {
                out[i] = v;
            }
            out
        }
        Payload::Quantized { scale, levels, .. } => {
            levels.iter().map(|&l| scale * l as f64).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, PURPOSE_COMPRESS};
    use approx::assert_relative_eq;

    fn residual_sq(spec: &CompressionSpec, x: &[f64], rng: &mut impl Rng) -> f64 {
        let q = densify(&compress(spec, x, rng).unwrap());
        x.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn norm_sq(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn test_rng(tag: u64) -> rand_chacha::ChaCha8Rng {
        derive_rng(0xc0_ffee, PURPOSE_COMPRESS, tag, 0, 0)
    }

    #[test]
    fn top_k_keeps_largest_magnitude() {
        let spec = CompressionSpec::top_k(1, 64).unwrap();
        let x = [3.0, -4.0, 1.0];
        let cv = compress(&spec, &x, &mut test_rng(0)).unwrap();
        assert_eq!(cv.payload, Payload::Sparse(vec![(1, -4.0)]));
        let r = residual_sq(&spec, &x, &mut test_rng(0));
        assert_relative_eq!(r, 10.0);
        assert!(r <= (1.0 - 1.0 / 3.0) * norm_sq(&x) + 1e-12);
    }

    #[test]
    fn top_k_ties_go_to_lower_index() {
        let spec = CompressionSpec::top_k(1, 64).unwrap();
        let cv = compress(&spec, &[2.0, -2.0, 1.0], &mut test_rng(0)).unwrap();
        assert_eq!(cv.payload, Payload::Sparse(vec![(0, 2.0)]));
        let spec2 = CompressionSpec::top_k(2, 64).unwrap();
        let cv2 = compress(&spec2, &[1.0, 1.0, 1.0, 1.0], &mut test_rng(0)).unwrap();
        assert_eq!(cv2.payload, Payload::Sparse(vec![(0, 1.0), (1, 1.0)]));
    }

    #[test]
    fn k_equal_m_is_lossless() {
        for spec in [
            CompressionSpec::top_k(4, 64).unwrap(),
            CompressionSpec::rand_k(4, 64).unwrap(),
            CompressionSpec::full(64),
        ] {
            let x = [0.5, -2.0, 0.0, 9.25];
            let cv = compress(&spec, &x, &mut test_rng(1)).unwrap();
            assert_eq!(densify(&cv), x.to_vec());
            assert_relative_eq!(spec.omega(4).unwrap(), 1.0);
        }
    }

    #[test]
    fn rand_k_selects_uniformly() {
        // Each index should appear in roughly k/m of 20000 draws.
        let spec = CompressionSpec::rand_k(2, 64).unwrap();
        let x = [1.0; 5];
        let mut counts = [0u32; 5];
        let mut rng = test_rng(2);
        let draws = 20_000;
        for _ in 0..draws {
            let cv = compress(&spec, &x, &mut rng).unwrap();
            if let Payload::Sparse(pairs) = cv.payload {
                for (i, _) in pairs {
                    counts[i] += 1;
                }
            }
        }
        let expected = draws as f64 * 2.0 / 5.0;
        for c in counts {
            // 5 sigma of a Binomial(20000, 0.4).
            assert!((c as f64 - expected).abs() < 5.0 * (draws as f64 * 0.4 * 0.6).sqrt());
        }
    }

    #[test]
    fn quantizer_omega_matches_closed_form() {
        // u = 1, m = 400: min(400, 20) = 20, omega = 1/21.
        let spec = CompressionSpec::qsgd(2, 64).unwrap();
        assert_relative_eq!(spec.omega(400).unwrap(), 1.0 / 21.0, max_relative = 1e-15);
        // u = 15, m = 9: min(9/225, 3/15) = 0.04, the m/u^2 branch.
        let spec = CompressionSpec::qsgd(5, 64).unwrap();
        assert_relative_eq!(spec.omega(9).unwrap(), 1.0 / 1.04, max_relative = 1e-15);
    }

    #[test]
    fn quantizer_zero_vector_is_exact() {
        for spec in [
            CompressionSpec::qsgd(3, 64).unwrap(),
            CompressionSpec::qsgd_deterministic(3, 64).unwrap(),
        ] {
            let cv = compress(&spec, &[0.0; 7], &mut test_rng(3)).unwrap();
            match &cv.payload {
                Payload::Quantized {
                    norm,
                    scale,
                    levels,
                } => {
                    assert_eq!(*norm, 0.0);
                    assert_eq!(*scale, 0.0);
                    assert!(levels.iter().all(|&l| l == 0));
                }
                _ => panic!("quantizer must produce a quantized payload"),
            }
            assert_eq!(densify(&cv), vec![0.0; 7]);
        }
    }

    #[test]
    fn quantizer_levels_stay_in_range() {
        let spec = CompressionSpec::qsgd(3, 64).unwrap();
        let u = spec.quantizer_levels() as i64;
        let mut rng = test_rng(4);
        for trial in 0..200 {
            let x: Vec<f64> = (0..16)
                .map(|i| ((trial * 31 + i * 7) % 13) as f64 - 6.0)
                .collect();
            let cv = compress(&spec, &x, &mut rng).unwrap();
            if let Payload::Quantized { levels, .. } = &cv.payload {
                for (&l, &v) in levels.iter().zip(&x) {
                    assert!(l.abs() <= u);
                    assert!(l == 0 || (l > 0) == (v > 0.0));
                }
            }
        }
    }

    #[test]
    fn quantizer_single_coordinate_scales_by_omega() {
        // With one nonzero coordinate the level saturates at u, so the
        // reconstruction is exactly omega * x.
        let spec = CompressionSpec::qsgd_deterministic(4, 64).unwrap();
        let x = [0.0, -3.5, 0.0];
        let omega = spec.omega(3).unwrap();
        let q = densify(&compress(&spec, &x, &mut test_rng(5)).unwrap());
        assert_relative_eq!(q[1], omega * x[1], max_relative = 1e-15);
        assert_eq!(q[0], 0.0);
        assert_eq!(q[2], 0.0);
    }

    #[test]
    fn deterministic_quantizer_breaks_contract_when_coarse() {
        // Nearest-level rounding zeroes every coordinate whose scaled
        // magnitude is below half a level. With u = 1 and several equal
        // coordinates the whole vector vanishes and the error equals
        // ‖x‖^2 > (1 - omega)‖x‖^2. This regime is excluded from the
        // contract tests on purpose.
        let spec = CompressionSpec::qsgd_deterministic(2, 64).unwrap();
        let x = [1.0; 5];
        let omega = spec.omega(5).unwrap();
        let r = residual_sq(&spec, &x, &mut test_rng(6));
        assert_relative_eq!(r, norm_sq(&x), max_relative = 1e-12);
        assert!(r > (1.0 - omega) * norm_sq(&x));
    }

    #[test]
    fn encoded_bits_match_table() {
        let m = 400;
        assert_eq!(
            CompressionSpec::top_k(20, 64)
                .unwrap()
                .encoded_bits(m)
                .unwrap(),
            1460
        );
        assert_eq!(
            CompressionSpec::rand_k(20, 64)
                .unwrap()
                .encoded_bits(m)
                .unwrap(),
            1460
        );
        assert_eq!(
            CompressionSpec::qsgd(2, 64)
                .unwrap()
                .encoded_bits(m)
                .unwrap(),
            864
        );
        assert_eq!(CompressionSpec::full(64).encoded_bits(m).unwrap(), 25600);
        // Index width collapses to zero at m = 1.
        assert_eq!(
            CompressionSpec::top_k(1, 7)
                .unwrap()
                .encoded_bits(1)
                .unwrap(),
            7
        );
    }

    #[test]
    fn ceil_log2_small_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(256), 8);
        assert_eq!(ceil_log2(257), 9);
        assert_eq!(ceil_log2(400), 9);
    }

    #[test]
    fn same_seed_reproduces_the_message() {
        let spec = CompressionSpec::rand_k(3, 64).unwrap();
        let x: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let a = compress(&spec, &x, &mut test_rng(7)).unwrap();
        let b = compress(&spec, &x, &mut test_rng(7)).unwrap();
        assert_eq!(a, b);
        let qspec = CompressionSpec::qsgd(3, 64).unwrap();
        let a = compress(&qspec, &x, &mut test_rng(8)).unwrap();
        let b = compress(&qspec, &x, &mut test_rng(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(CompressionSpec::top_k(0, 64).is_err());
        assert!(CompressionSpec::rand_k(0, 64).is_err());
        assert!(CompressionSpec::qsgd(1, 64).is_err());
        assert!(CompressionSpec::qsgd(65, 64).is_err());
        assert!(CompressionSpec::qsgd(33, 32).is_err());
        let spec = CompressionSpec::top_k(4, 64).unwrap();
        assert!(matches!(
            compress(&spec, &[1.0, 2.0], &mut test_rng(9)),
            Err(Error::BadSparsity { k: 4, m: 2 })
        ));
        assert!(matches!(
            compress(&spec, &[], &mut test_rng(9)),
            Err(Error::EmptyVector)
        ));
        assert!(matches!(
            compress(
                &CompressionSpec::full(64),
                &[1.0, f64::NAN],
                &mut test_rng(9)
            ),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn sparse_indices_strictly_increase() {
        let mut rng = test_rng(10);
        for spec in [
            CompressionSpec::rand_k(5, 64).unwrap(),
            CompressionSpec::top_k(5, 64).unwrap(),
            CompressionSpec::full(64),
        ] {
            let x: Vec<f64> = (0..12).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
            let cv = compress(&spec, &x, &mut rng).unwrap();
            if let Payload::Sparse(pairs) = &cv.payload {
                for w in pairs.windows(2) {
                    assert!(w[0].0 < w[1].0);
                }
                assert!(pairs.iter().all(|&(i, _)| i < x.len()));
                for &(i, v) in pairs {
                    assert_eq!(v, x[i]);
                }
            } else {
                panic!("sparsifier must produce a sparse payload");
            }
        }
    }
}
