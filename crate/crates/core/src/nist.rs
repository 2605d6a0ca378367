//! Eight tests from the NIST SP 800-22 battery.
//!
//! Each test function returns `None` when the input is too short for its
//! statistic to exist at all. [`run_suite`] additionally applies the
//! battery's recommended minimum lengths and reports shorter inputs as not
//! applicable.

use std::fmt;

use rustfft::FftPlanner;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::bits::BitKey;
use num_complex::Complex64;

pub const SIGNIFICANCE: f64 = 0.01;

pub const DEFAULT_BLOCK_FREQUENCY_LEN: usize = 128;
pub const DEFAULT_TEMPLATE: &str = "000000001";
pub const DEFAULT_TEMPLATE_BLOCKS: usize = 8;
pub const DEFAULT_APEN_M: usize = 2;
pub const DEFAULT_LINEAR_COMPLEXITY_LEN: usize = 500;

/// Upper regularized incomplete gamma `Q(a, x)`.
fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(a, x).clamp(0.0, 1.0)
}

/// Standard normal CDF.
fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        0.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

pub fn frequency_test(bits: &[bool]) -> Option<f64> {
    let n = bits.len();
    if n == 0 {
        return None;
    }
    let s: i64 = bits.iter().map(|&b| if b { 1 } else { -1 }).sum();
    Some(clamp_p(erfc(s.unsigned_abs() as f64 / (2.0 * n as f64).sqrt())))
}

pub fn block_frequency_test(bits: &[bool], block_len: usize) -> Option<f64> {
    if block_len == 0 {
        return None;
    }
    let blocks = bits.len() / block_len;
    if blocks == 0 {
        return None;
    }
    let chi2: f64 = bits
        .chunks_exact(block_len)
        .map(|b| {
            let pi = b.iter().filter(|&&x| x).count() as f64 / block_len as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * block_len as f64;
    Some(clamp_p(igamc(blocks as f64 / 2.0, chi2 / 2.0)))
}

/// Forward cumulative sums.
pub fn cumulative_sums_test(bits: &[bool]) -> Option<f64> {
    let n = bits.len() as i64;
    if n == 0 {
        return None;
    }
    let mut s = 0i64;
    let mut z = 0i64;
    for &b in bits {
        s += if b { 1 } else { -1 };
        z = z.max(s.abs());
    }
    if z == 0 {
        return Some(1.0);
    }
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    // integer bounds truncate toward zero, as in the reference code
    let mut sum1 = 0.0;
    let mut k = (-n / z + 1) / 4;
    while k <= (n / z - 1) / 4 {
        let kf = k as f64;
        sum1 += normal_cdf((4.0 * kf + 1.0) * zf / sqrt_n) - normal_cdf((4.0 * kf - 1.0) * zf / sqrt_n);
        k += 1;
    }
    let mut sum2 = 0.0;
    let mut k = (-n / z - 3) / 4;
    while k <= (n / z - 1) / 4 {
        let kf = k as f64;
        sum2 += normal_cdf((4.0 * kf + 3.0) * zf / sqrt_n) - normal_cdf((4.0 * kf + 1.0) * zf / sqrt_n);
        k += 1;
    }
    Some(clamp_p(1.0 - sum1 + sum2))
}

/// Longest run of ones within blocks; block length follows `n`.
pub fn longest_run_test(bits: &[bool]) -> Option<f64> {
    let n = bits.len();
    if n < 128 {
        return None;
    }
    let (m, first, probs): (usize, usize, &[f64]) = if n < 6272 {
        (8, 1, &[0.21484375, 0.3671875, 0.23046875, 0.1875])
    } else if n < 750_000 {
        (
            128,
            4,
            &[0.1174035788, 0.242955959, 0.249363483, 0.17517706, 0.102701071, 0.112398847],
        )
    } else {
        (10_000, 10, &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727])
    };
    let k = probs.len() - 1;
    let blocks = n / m;
    let mut counts = vec![0usize; probs.len()];
    for block in bits.chunks_exact(m) {
        let mut longest = 0usize;
        let mut run = 0usize;
        for &b in block {
            run = if b { run + 1 } else { 0 };
            longest = longest.max(run);
        }
        let slot = longest.clamp(first, first + k) - first;
        counts[slot] += 1;
    }
    let nf = blocks as f64;
    let chi2: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| (c as f64 - nf * p).powi(2) / (nf * p))
        .sum();
    Some(clamp_p(igamc(k as f64 / 2.0, chi2 / 2.0)))
}

/// Discrete Fourier transform (spectral) test.
pub fn spectral_fft_test(bits: &[bool]) -> Option<f64> {
    let n = bits.len();
    if n < 2 {
        return None;
    }
    let mut x: Vec<Complex64> = bits
        .iter()
        .map(|&b| Complex64::new(if b { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut x);
    let nf = n as f64;
    let bound = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let below = x[..n / 2].iter().filter(|c| c.norm() < bound).count() as f64;
    let expected = 0.95 * nf / 2.0;
    let d = (below - expected) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    Some(clamp_p(erfc(d.abs() / std::f64::consts::SQRT_2)))
}

/// Non-overlapping template matching over `blocks` equal blocks.
pub fn non_overlapping_template_test(bits: &[bool], template: &[bool], blocks: usize) -> Option<f64> {
    let m = template.len();
    if m == 0 || blocks == 0 {
        return None;
    }
    let block_len = bits.len() / blocks;
    if block_len < m {
        return None;
    }
    let mf = m as f64;
    let big_m = block_len as f64;
    let mean = (big_m - mf + 1.0) / 2f64.powi(m as i32);
    let variance = big_m * (1.0 / 2f64.powi(m as i32) - (2.0 * mf - 1.0) / 2f64.powi(2 * m as i32));
    let chi2: f64 = bits
        .chunks_exact(block_len)
        .take(blocks)
        .map(|block| {
            let mut hits = 0usize;
            let mut j = 0;
            while j + m <= block_len {
                if &block[j..j + m] == template {
                    hits += 1;
                    j += m;
                } else {
                    j += 1;
                }
            }
            (hits as f64 - mean).powi(2) / variance
        })
        .sum();
    Some(clamp_p(igamc(blocks as f64 / 2.0, chi2 / 2.0)))
}

fn phi(bits: &[bool], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mut counts = vec![0usize; 1 << m];
    for i in 0..n {
        let mut pattern = 0usize;
        for j in 0..m {
            pattern = (pattern << 1) | bits[(i + j) % n] as usize;
        }
        counts[pattern] += 1;
    }
    let nf = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            p * p.ln()
        })
        .sum()
}

pub fn approximate_entropy_test(bits: &[bool], m: usize) -> Option<f64> {
    let n = bits.len();
    if m == 0 || n <= m {
        return None;
    }
    let apen = phi(bits, m) - phi(bits, m + 1);
    let chi2 = 2.0 * n as f64 * (std::f64::consts::LN_2 - apen);
    Some(clamp_p(igamc(2f64.powi(m as i32 - 1), chi2 / 2.0)))
}

/// Length of the shortest LFSR generating `bits` (Berlekamp-Massey over GF(2)).
pub fn linear_complexity(bits: &[bool]) -> usize {
    let n = bits.len();
    let mut c = vec![false; n + 1];
    let mut b = vec![false; n + 1];
    c[0] = true;
    b[0] = true;
    let mut l = 0usize;
    let mut m: isize = -1;
    for i in 0..n {
        let mut d = bits[i];
        for j in 1..=l {
            d ^= c[j] & bits[i - j];
        }
        if d {
            let t = c.clone();
            let shift = (i as isize - m) as usize;
            for j in 0..=n - shift {
                c[j + shift] ^= b[j];
            }
            if l <= i / 2 {
                l = i + 1 - l;
                m = i as isize;
                b = t;
            }
        }
    }
    l
}

pub fn linear_complexity_test(bits: &[bool], block_len: usize) -> Option<f64> {
    if block_len == 0 {
        return None;
    }
    let blocks = bits.len() / block_len;
    if blocks == 0 {
        return None;
    }
    // first class as in the reference implementation
    const PROBS: [f64; 7] = [0.01047, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833];
    let m = block_len as f64;
    let sign = if block_len % 2 == 0 { 1.0 } else { -1.0 };
    let mean = m / 2.0 + (9.0 - sign) / 36.0 - (m / 3.0 + 2.0 / 9.0) / 2f64.powf(m);
    let mut counts = [0usize; 7];
    for block in bits.chunks_exact(block_len) {
        let t = sign * (linear_complexity(block) as f64 - mean) + 2.0 / 9.0;
        let slot = if t <= -2.5 {
            0
        } else if t <= -1.5 {
            1
        } else if t <= -0.5 {
            2
        } else if t <= 0.5 {
            3
        } else if t <= 1.5 {
            4
        } else if t <= 2.5 {
            5
        } else {
            6
        };
        counts[slot] += 1;
    }
    let nf = blocks as f64;
    let chi2: f64 = counts
        .iter()
        .zip(PROBS)
        .map(|(&c, p)| (c as f64 - nf * p).powi(2) / (nf * p))
        .sum();
    Some(clamp_p(igamc(3.0, chi2 / 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NistTest {
    Frequency,
    BlockFrequency,
    CumulativeSums,
    LongestRun,
    Fft,
    NonOverlappingTemplate,
    ApproximateEntropy,
    LinearComplexity,
}

impl NistTest {
    pub const ALL: [NistTest; 8] = [
        NistTest::Frequency,
        NistTest::BlockFrequency,
        NistTest::CumulativeSums,
        NistTest::LongestRun,
        NistTest::Fft,
        NistTest::NonOverlappingTemplate,
        NistTest::ApproximateEntropy,
        NistTest::LinearComplexity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NistTest::Frequency => "frequency",
            NistTest::BlockFrequency => "block_frequency",
            NistTest::CumulativeSums => "cumulative_sums",
            NistTest::LongestRun => "longest_run",
            NistTest::Fft => "fft",
            NistTest::NonOverlappingTemplate => "non_overlapping_template",
            NistTest::ApproximateEntropy => "approximate_entropy",
            NistTest::LinearComplexity => "linear_complexity",
        }
    }

    /// Recommended minimum input length under the default parameters.
    pub fn min_len(self) -> usize {
        match self {
            NistTest::Frequency | NistTest::BlockFrequency | NistTest::CumulativeSums => 100,
            NistTest::LongestRun => 128,
            NistTest::Fft => 1000,
            NistTest::NonOverlappingTemplate => 10_000,
            // m < floor(log2 n) - 5
            NistTest::ApproximateEntropy => 1 << (DEFAULT_APEN_M + 6),
            // at least 200 blocks
            NistTest::LinearComplexity => 200 * DEFAULT_LINEAR_COMPLEXITY_LEN,
        }
    }

    fn run(self, bits: &[bool]) -> Option<f64> {
        match self {
            NistTest::Frequency => frequency_test(bits),
            NistTest::BlockFrequency => block_frequency_test(bits, DEFAULT_BLOCK_FREQUENCY_LEN),
            NistTest::CumulativeSums => cumulative_sums_test(bits),
            NistTest::LongestRun => longest_run_test(bits),
            NistTest::Fft => spectral_fft_test(bits),
            NistTest::NonOverlappingTemplate => {
                let template: Vec<bool> = DEFAULT_TEMPLATE.bytes().map(|c| c == b'1').collect();
                non_overlapping_template_test(bits, &template, DEFAULT_TEMPLATE_BLOCKS)
            }
            NistTest::ApproximateEntropy => approximate_entropy_test(bits, DEFAULT_APEN_M),
            NistTest::LinearComplexity => linear_complexity_test(bits, DEFAULT_LINEAR_COMPLEXITY_LEN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub test: NistTest,
    /// `None` when the test is not applicable.
    pub p_value: Option<f64>,
}

impl TestResult {
    pub fn applicable(&self) -> bool {
        self.p_value.is_some()
    }

    pub fn passed(&self) -> bool {
        self.p_value.is_some_and(|p| p >= SIGNIFICANCE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NistReport {
    pub results: Vec<TestResult>,
    pub bits: usize,
}

impl NistReport {
    pub fn get(&self, test: NistTest) -> Option<&TestResult> {
        self.results.iter().find(|r| r.test == test)
    }

    pub fn verdict(&self) -> Verdict {
        let applicable: Vec<_> = self.results.iter().filter(|r| r.applicable()).collect();
        if applicable.is_empty() {
            Verdict::InsufficientData
        } else if applicable.iter().all(|r| r.passed()) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Pass
    }

    /// `test_name,p_value,applicable,pass` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("test_name,p_value,applicable,pass\n");
        for r in &self.results {
            let p = r.p_value.map_or_else(|| "NA".to_string(), |p| format!("{p:.6}"));
            out.push_str(&format!("{},{},{},{}\n", r.test.name(), p, r.applicable(), r.passed()));
        }
        out
    }
}

impl fmt::Display for NistReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}

/// Runs all eight tests with their default parameters.
pub fn run_suite(bits: &BitKey) -> NistReport {
    let b = bits.bits();
    let results = NistTest::ALL
        .iter()
        .map(|&test| TestResult {
            test,
            p_value: if b.len() >= test.min_len() { test.run(b) } else { None },
        })
        .collect();
    NistReport { results, bits: b.len() }
}
