//! Element-wise uniform quantization of complex values.
//!
//! Real and imaginary parts are clipped to `[-A, A]` and mapped to the
//! nearest of `2^B` midrise levels `-A + (m + 0.5) 2A / 2^B`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_BITS: u32 = 24;
pub const MIN_FIT_SAMPLES: usize = 100;
pub const RANGE_FLOOR: f64 = 1e-6;
pub const DEFAULT_KAPPA: f64 = 3.0;
/// Payload width of an unquantized (`f64`) real dimension.
pub const LOSSLESS_BITS_PER_DIMENSION: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantizerFamily {
    Midrise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    bits: u32,
    range: f64,
    family: QuantizerFamily,
}

impl QuantizerSpec {
    pub fn midrise(bits: u32, range: f64) -> Result<Self> {
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(Error::Domain(format!("bits must lie in [1, {MAX_BITS}], got {bits}")));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::Domain(format!("range must be positive, got {range}")));
        }
        Ok(Self { bits, range, family: QuantizerFamily::Midrise })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn family(&self) -> QuantizerFamily {
        self.family
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    /// Cell width `2A / 2^B`.
    pub fn step(&self) -> f64 {
        2.0 * self.range / f64::from(self.levels())
    }

    /// Reconstruction level of index `m`.
    pub fn level(&self, m: u32) -> f64 {
        -self.range + (f64::from(m) + 0.5) * self.step()
    }

    /// Payload bits of one complex scalar.
    pub fn bits_per_scalar(&self) -> u64 {
        2 * u64::from(self.bits)
    }

    /// Error variance of an unclipped complex scalar under the uniform
    /// high-resolution model, `2 * step^2 / 12`.
    pub fn error_variance(&self) -> f64 {
        self.step() * self.step() / 6.0
    }

    fn index(&self, x: f64) -> u32 {
        let top = self.levels() - 1;
        let x = x.clamp(-self.range, self.range);
        let guess = ((x + self.range) / self.step()).ceil() - 1.0;
        let guess = guess.clamp(0.0, f64::from(top)) as u32;
        // Resolve rounding at cell edges by direct comparison; ties go low.
        let lo = guess.saturating_sub(1);
        let hi = (guess + 1).min(top);
        let mut best = lo;
        let mut best_dist = (x - self.level(lo)).abs();
        for m in lo + 1..=hi {
            let d = (x - self.level(m)).abs();
            if d < best_dist {
                best = m;
                best_dist = d;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedValue {
    pub real_index: u32,
    pub imag_index: u32,
    pub spec: QuantizerSpec,
}

pub fn quantize(z: Complex64, spec: &QuantizerSpec) -> Result<QuantizedValue> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("cannot quantize non-finite value {z}")));
    }
    Ok(QuantizedValue { real_index: spec.index(z.re), imag_index: spec.index(z.im), spec: *spec })
}

pub fn dequantize(q: &QuantizedValue, spec: &QuantizerSpec) -> Result<Complex64> {
    if q.spec != *spec {
        return Err(Error::Contract("quantized value was produced by a different quantizer".into()));
    }
    let top = spec.levels() - 1;
    if q.real_index > top || q.imag_index > top {
        return Err(Error::Contract(format!(
            "index ({}, {}) out of range for {} bits",
            q.real_index, q.imag_index, spec.bits
        )));
    }
    Ok(Complex64::new(spec.level(q.real_index), spec.level(q.imag_index)))
}

/// `kappa` times the standard deviation of the pooled real and imaginary
/// parts, floored at [`RANGE_FLOOR`].
pub fn fit_range(samples: &[Complex64], kappa: f64) -> Result<f64> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Contract(format!(
            "range fitting needs at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Domain("range fitting samples must be finite".into()));
    }
    let count = 2.0 * samples.len() as f64;
    let mean = samples.iter().map(|z| z.re + z.im).sum::<f64>() / count;
    let var = samples
        .iter()
        .map(|z| (z.re - mean).powi(2) + (z.im - mean).powi(2))
        .sum::<f64>()
        / count;
    Ok((kappa * var.sqrt()).max(RANGE_FLOOR))
}

/// Packs values LSB-first: for each value, `B` bits of the real index then
/// `B` bits of the imaginary index.
pub fn pack_bits(values: &[QuantizedValue]) -> Vec<u8> {
    let total: u64 = values.iter().map(|v| v.spec.bits_per_scalar()).sum();
    let mut out = vec![0u8; total.div_ceil(8) as usize];
    let mut pos = 0usize;
    for v in values {
        for index in [v.real_index, v.imag_index] {
            for b in 0..v.spec.bits {
                if (index >> b) & 1 == 1 {
                    out[pos / 8] |= 1 << (pos % 8);
                }
                pos += 1;
            }
        }
    }
    out
}

/// Inverse of [`pack_bits`] for `count` values of one spec.
pub fn unpack_bits(bytes: &[u8], spec: &QuantizerSpec, count: usize) -> Result<Vec<QuantizedValue>> {
    let needed = (count as u64 * spec.bits_per_scalar()).div_ceil(8) as usize;
    if bytes.len() < needed {
        return Err(Error::Contract(format!(
            "payload of {} bytes is too short for {count} values ({needed} bytes)",
            bytes.len()
        )));
    }
    let mut pos = 0usize;
    let mut read = || {
        let mut index = 0u32;
        for b in 0..spec.bits {
            if (bytes[pos / 8] >> (pos % 8)) & 1 == 1 {
                index |= 1 << b;
            }
            pos += 1;
        }
        index
    };
    Ok((0..count)
        .map(|_| {
            let real_index = read();
            let imag_index = read();
            QuantizedValue { real_index, imag_index, spec: *spec }
        })
        .collect())
}

/// How the clipping range of a uniform quantizer is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeRule {
    Fixed(f64),
    /// [`fit_range`] over calibration samples.
    Fitted { kappa: f64 },
}

/// Compression requested for one feedback stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compression {
    Uniform { bits: u32, range: RangeRule },
    /// Full-precision floats, the infinite-bit limit.
    Lossless,
}

impl Compression {
    pub fn uniform(bits: u32, kappa: f64) -> Self {
        Compression::Uniform { bits, range: RangeRule::Fitted { kappa } }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Compression::Uniform { bits, range } => {
                if !(1..=MAX_BITS).contains(&bits) {
                    return Err(Error::Domain(format!(
                        "bits must lie in [1, {MAX_BITS}], got {bits}"
                    )));
                }
                match range {
                    RangeRule::Fixed(a) if !(a > 0.0 && a.is_finite()) => {
                        Err(Error::Domain(format!("range must be positive, got {a}")))
                    }
                    RangeRule::Fitted { kappa } if !(kappa > 0.0 && kappa.is_finite()) => {
                        Err(Error::Domain(format!("kappa must be positive, got {kappa}")))
                    }
                    _ => Ok(()),
                }
            }
            Compression::Lossless => Ok(()),
        }
    }

    /// Resolves the range, fitting it on `calibration` when required.
    pub fn resolve(&self, calibration: &[Complex64]) -> Result<Codec> {
        self.validate()?;
        match *self {
            Compression::Uniform { bits, range } => {
                let a = match range {
                    RangeRule::Fixed(a) => a,
                    RangeRule::Fitted { kappa } => fit_range(calibration, kappa)?,
                };
                Ok(Codec::Uniform(QuantizerSpec::midrise(bits, a)?))
            }
            Compression::Lossless => Ok(Codec::Lossless),
        }
    }
}

/// A compression with every parameter fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Codec {
    Uniform(QuantizerSpec),
    Lossless,
}

/// One reported scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    Quantized(QuantizedValue),
    Unquantized(Complex64),
}

impl Codec {
    pub fn encode(&self, z: Complex64) -> Result<Payload> {
        match self {
            Codec::Uniform(spec) => quantize(z, spec).map(Payload::Quantized),
            Codec::Lossless => {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::Domain(format!("cannot encode non-finite value {z}")));
                }
                Ok(Payload::Unquantized(z))
            }
        }
    }

    pub fn decode(&self, payload: &Payload) -> Result<Complex64> {
        match (self, payload) {
            (Codec::Uniform(spec), Payload::Quantized(q)) => dequantize(q, spec),
            (Codec::Lossless, Payload::Unquantized(z)) => Ok(*z),
            _ => Err(Error::Contract("payload does not match the codec".into())),
        }
    }

    pub fn bits_per_scalar(&self) -> u64 {
        match self {
            Codec::Uniform(spec) => spec.bits_per_scalar(),
            Codec::Lossless => 2 * LOSSLESS_BITS_PER_DIMENSION,
        }
    }

    /// Reconstruction error variance per complex scalar (0 when lossless).
    pub fn error_variance(&self) -> f64 {
        match self {
            Codec::Uniform(spec) => spec.error_variance(),
            Codec::Lossless => 0.0,
        }
    }

    pub fn spec(&self) -> Option<&QuantizerSpec> {
        match self {
            Codec::Uniform(spec) => Some(spec),
            Codec::Lossless => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(bits: u32, range: f64) -> QuantizerSpec {
        QuantizerSpec::midrise(bits, range).unwrap()
    }

    /// Nearest level by scanning every index, ties to the lower one.
    fn enumerate_nearest(x: f64, bits: u32, range: f64) -> u32 {
        let levels = 1u32 << bits;
        let x = x.clamp(-range, range);
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for m in 0..levels {
            let level = -range + (f64::from(m) + 0.5) * (2.0 * range / f64::from(levels));
            let d = (x - level).abs();
            if d < best_dist {
                best = m;
                best_dist = d;
            }
        }
        best
    }

    #[test]
    fn spec_validation() {
        assert!(QuantizerSpec::midrise(0, 1.0).is_err());
        assert!(QuantizerSpec::midrise(25, 1.0).is_err());
        assert!(QuantizerSpec::midrise(4, 0.0).is_err());
        assert!(QuantizerSpec::midrise(24, 1.0).is_ok());
    }

    #[test]
    fn one_bit_examples() {
        let s = spec(1, 1.0);
        let q = quantize(Complex64::new(0.3, 0.0), &s).unwrap();
        assert_eq!(q.real_index, 1);
        assert_eq!(dequantize(&q, &s).unwrap().re, 0.5);
        let clipped = quantize(Complex64::new(5.0, 5.0), &s).unwrap();
        assert_eq!(dequantize(&clipped, &s).unwrap(), Complex64::new(0.5, 0.5));
        let lowest = QuantizedValue { real_index: 0, imag_index: 0, spec: s };
        assert_eq!(dequantize(&lowest, &s).unwrap(), Complex64::new(-0.5, -0.5));
    }

    #[test]
    fn ties_go_low() {
        let s = spec(1, 1.0);
        assert_eq!(quantize(Complex64::new(0.0, 0.0), &s).unwrap().real_index, 0);
        let s = spec(2, 1.0);
        // edge between levels -0.25 and 0.25
        assert_eq!(quantize(Complex64::new(0.0, 0.5), &s).unwrap().real_index, 1);
        assert_eq!(quantize(Complex64::new(0.0, 0.5), &s).unwrap().imag_index, 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = spec(3, 1.0);
        assert!(matches!(quantize(Complex64::new(f64::NAN, 0.0), &s), Err(Error::Domain(_))));
        let bad = QuantizedValue { real_index: 8, imag_index: 0, spec: s };
        assert!(matches!(dequantize(&bad, &s), Err(Error::Contract(_))));
        let other = QuantizedValue { real_index: 0, imag_index: 0, spec: spec(3, 2.0) };
        assert!(matches!(dequantize(&other, &s), Err(Error::Contract(_))));
    }

    #[test]
    fn sixteen_bits_is_nearly_exact() {
        let s = spec(16, 3.0);
        for &z in &[Complex64::new(0.123, -2.5), Complex64::new(-1.0, 0.77)] {
            let back = dequantize(&quantize(z, &s).unwrap(), &s).unwrap();
            assert!((back - z).norm() < 1e-4);
        }
    }

    #[test]
    fn fit_range_rules() {
        let zeros = vec![Complex64::new(0.0, 0.0); 200];
        assert_eq!(fit_range(&zeros, 3.0).unwrap(), RANGE_FLOOR);
        assert!(fit_range(&zeros[..99], 3.0).is_err());
        assert!(fit_range(&zeros, 0.0).is_err());
        // alternating +-1 on both axes has unit std
        let pm: Vec<Complex64> =
            (0..200).map(|i| if i % 2 == 0 { Complex64::new(1.0, -1.0) } else { Complex64::new(-1.0, 1.0) }).collect();
        assert_abs_diff_eq!(fit_range(&pm, 3.0).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn pack_layout_is_lsb_first() {
        let s = spec(3, 1.0);
        let v = QuantizedValue { real_index: 0b101, imag_index: 0b011, spec: s };
        // bits in order: 1,0,1, 1,1,0 -> 0b011101
        assert_eq!(pack_bits(&[v]), vec![0b0001_1101]);
        assert_eq!(unpack_bits(&[0b0001_1101], &s, 1).unwrap(), vec![v]);
        assert!(unpack_bits(&[], &s, 1).is_err());
    }

    #[test]
    fn codec_accounting() {
        let lossless = Compression::Lossless.resolve(&[]).unwrap();
        assert_eq!(lossless.bits_per_scalar(), 128);
        assert_eq!(lossless.error_variance(), 0.0);
        let z = Complex64::new(0.1, 0.2);
        assert_eq!(lossless.decode(&lossless.encode(z).unwrap()).unwrap(), z);
        let fixed = Compression::Uniform { bits: 2, range: RangeRule::Fixed(1.0) }.resolve(&[]).unwrap();
        assert_eq!(fixed.bits_per_scalar(), 4);
        assert!(fixed.decode(&Payload::Unquantized(z)).is_err());
        assert!(Compression::uniform(3, 3.0).resolve(&[]).is_err());
        assert!(Compression::uniform(0, 3.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn matches_enumeration(bits in 1u32..=8, range in 0.01f64..10.0, re in -20.0f64..20.0, im in -20.0f64..20.0) {
            let s = spec(bits, range);
            let q = quantize(Complex64::new(re, im), &s).unwrap();
            prop_assert_eq!(q.real_index, enumerate_nearest(re, bits, range));
            prop_assert_eq!(q.imag_index, enumerate_nearest(im, bits, range));
        }

        #[test]
        fn round_trip_within_cell(bits in 1u32..=24, range in 0.01f64..10.0, u in -1.0f64..1.0, v in -1.0f64..1.0) {
            let s = spec(bits, range);
            let z = Complex64::new(u * range, v * range);
            let back = dequantize(&quantize(z, &s).unwrap(), &s).unwrap();
            let half = range / f64::from(s.levels());
            prop_assert!((back.re - z.re).abs() <= half * (1.0 + 1e-9));
            prop_assert!((back.im - z.im).abs() <= half * (1.0 + 1e-9));
        }

        #[test]
        fn levels_are_fixed_points(bits in 1u32..=12, range in 0.01f64..10.0, m in 0u32..4096, k in 0u32..4096) {
            let s = spec(bits, range);
            let (m, k) = (m % s.levels(), k % s.levels());
            let z = Complex64::new(s.level(m), s.level(k));
            let q = quantize(z, &s).unwrap();
            prop_assert_eq!((q.real_index, q.imag_index), (m, k));
            prop_assert_eq!(dequantize(&q, &s).unwrap(), z);
        }

        #[test]
        fn pack_round_trip(bits in 1u32..=24, raw in proptest::collection::vec((any::<u32>(), any::<u32>()), 0..20)) {
            let s = spec(bits, 1.0);
            let mask = s.levels() - 1;
            let values: Vec<QuantizedValue> = raw
                .iter()
                .map(|&(a, b)| QuantizedValue { real_index: a & mask, imag_index: b & mask, spec: s })
                .collect();
            let bytes = pack_bits(&values);
            prop_assert_eq!(bytes.len() as u64, (values.len() as u64 * 2 * u64::from(bits)).div_ceil(8));
            prop_assert_eq!(unpack_bits(&bytes, &s, values.len()).unwrap(), values);
        }
    }
}
