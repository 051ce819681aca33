use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ImageChip;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 256;

/// Per-channel intensity histogram on a quantized grid of `bin_count` levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_count: usize,
    pub counts: Vec<u64>,
    #[serde(default)]
    pub channel: usize,
}

impl Histogram {
    pub fn new(counts: Vec<u64>, channel: usize) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::invalid("a histogram needs at least 2 bins"));
        }
        Ok(Self {
            bin_count: counts.len(),
            counts,
            channel,
        })
    }

    /// Equal mass in every bin.
    pub fn uniform(bin_count: usize) -> Result<Self> {
        Self::new(vec![1; bin_count], 0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Running sums of `counts`.
    pub fn cumulative(&self) -> Vec<u64> {
        self.counts
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }

    /// Normalized cumulative distribution.
    pub fn cdf(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.cumulative()
            .into_iter()
            .map(|c| c as f64 / total)
            .collect()
    }

    /// Loads a target histogram stored as JSON (`{"bin_count":..,"counts":[..]}`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let hist: Histogram = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        if hist.counts.len() != hist.bin_count || hist.bin_count < 2 {
            return Err(Error::invalid(format!(
                "{}: bin_count {} does not match {} counts",
                path.display(),
                hist.bin_count,
                hist.counts.len()
            )));
        }
        Ok(hist)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Bin index of an intensity: round-half-up on the `bins - 1` step grid.
#[inline]
pub(crate) fn bin_of(v: f64, bins: usize) -> usize {
    let b = (v * (bins - 1) as f64 + 0.5).floor();
    (b.max(0.0) as usize).min(bins - 1)
}

pub fn compute_histogram(img: &ImageChip, channel: usize, bins: usize) -> Result<Histogram> {
    if channel >= img.channels() {
        return Err(Error::invalid(format!(
            "channel {channel} out of range for {}-channel image",
            img.channels()
        )));
    }
    if bins < 2 {
        return Err(Error::invalid("bins must be at least 2"));
    }
    let mut counts = vec![0u64; bins];
    for v in img.data().iter().skip(channel).step_by(img.channels()) {
        counts[bin_of(*v, bins)] += 1;
    }
    Ok(Histogram {
        bin_count: bins,
        counts,
        channel,
    })
}

/// Snaps every intensity onto the `bins`-level grid.
pub fn quantize(img: &ImageChip, bins: usize) -> ImageChip {
    let step = (bins - 1) as f64;
    img.map(|v| bin_of(v, bins) as f64 / step)
}

/// CDF matching: every source level maps to the smallest target level whose
/// normalized target CDF reaches the source CDF. Three-channel images are
/// matched channel by channel against the same target.
pub fn histogram_specification(img: &ImageChip, target: &Histogram) -> Result<ImageChip> {
    let bins = target.bin_count;
    if bins < 2 || target.counts.len() != bins {
        return Err(Error::invalid("malformed target histogram"));
    }
    let target_total = target.total();
    if target_total == 0 {
        return Err(Error::invalid("target histogram is empty"));
    }
    let target_cum = target.cumulative();
    let step = (bins - 1) as f64;
    let channels = img.channels();
    let mut out = img.data().to_vec();
    for c in 0..channels {
        let source = compute_histogram(img, c, bins)?;
        let source_total = source.total() as u128;
        let source_cum = source.cumulative();
        // Compare cum_t / N_t >= cum_s / N_s exactly in integers.
        let mut lut = vec![0usize; bins];
        let mut t = 0usize;
        for (s, &cs) in source_cum.iter().enumerate() {
            let need = cs as u128 * target_total as u128;
            while t + 1 < bins && (target_cum[t] as u128) * source_total < need {
                t += 1;
            }
            lut[s] = t;
        }
        for v in out.iter_mut().skip(c).step_by(channels) {
            *v = lut[bin_of(*v, bins)] as f64 / step;
        }
    }
    Ok(ImageChip::from_raw(
        img.width(),
        img.height(),
        channels,
        out,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray(w: usize, h: usize, data: Vec<f64>) -> ImageChip {
        ImageChip::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn histogram_examples() {
        let h = compute_histogram(&ImageChip::filled(4, 4, 1, 0.0).unwrap(), 0, 256).unwrap();
        assert_eq!(h.counts[0], 16);
        assert_eq!(h.total(), 16);

        let h = compute_histogram(&gray(2, 1, vec![0.0, 1.0]), 0, 2).unwrap();
        assert_eq!(h.counts, vec![1, 1]);

        let h = compute_histogram(&gray(4, 1, vec![0.1, 0.1, 0.9, 0.3]), 0, 256).unwrap();
        let nonzero: Vec<(usize, u64)> = h
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
            .collect();
        assert_eq!(nonzero, vec![(26, 2), (77, 1), (230, 1)]);
    }

    #[test]
    fn histogram_rejects_bad_channel() {
        let img = gray(1, 1, vec![0.5]);
        assert!(matches!(
            compute_histogram(&img, 1, 256),
            Err(Error::InvalidArgument(_))
        ));
        assert!(compute_histogram(&img, 0, 1).is_err());
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageChip {
        gray(w, h, (0..w * h).map(|_| rng.gen::<f64>()).collect())
    }

    #[test]
    fn self_specification_is_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let img = random_image(&mut rng, 16, 12);
            let own = compute_histogram(&img, 0, 256).unwrap();
            let out = histogram_specification(&img, &own).unwrap();
            assert_eq!(out, quantize(&img, 256));
        }
    }

    // Equalization written as the textbook level map t = ceil(L * cdf) - 1.
    fn equalize_oracle(img: &ImageChip, levels: usize) -> Vec<f64> {
        let n = img.data().len();
        let mut counts = vec![0usize; levels];
        for &v in img.data() {
            let idx = ((v * (levels - 1) as f64) + 0.5).floor() as usize;
            counts[idx] += 1;
        }
        let mut cum = vec![0usize; levels];
        let mut acc = 0;
        for i in 0..levels {
            acc += counts[i];
            cum[i] = acc;
        }
        img.data()
            .iter()
            .map(|&v| {
                let idx = ((v * (levels - 1) as f64) + 0.5).floor() as usize;
                let t = (levels * cum[idx]).div_ceil(n) - 1;
                t as f64 / (levels - 1) as f64
            })
            .collect()
    }

    #[test]
    fn uniform_target_equals_equalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let img = random_image(&mut rng, 8, 8);
            let out = histogram_specification(&img, &Histogram::uniform(256).unwrap()).unwrap();
            assert_eq!(out.data(), equalize_oracle(&img, 256).as_slice());
        }
    }

    #[test]
    fn binary_image_to_two_bin_target() {
        let data: Vec<f64> = (0..10).map(|i| if i < 3 { 0.0 } else { 1.0 }).collect();
        let img = gray(10, 1, data);
        let mut counts = vec![0u64; 256];
        counts[100] = 5;
        counts[200] = 5;
        let out = histogram_specification(&img, &Histogram::new(counts, 0).unwrap()).unwrap();
        for (i, v) in out.data().iter().enumerate() {
            let expected = if i < 3 { 100.0 } else { 200.0 } / 255.0;
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn empty_target_is_rejected() {
        let img = gray(1, 1, vec![0.5]);
        let empty = Histogram::new(vec![0; 256], 0).unwrap();
        assert!(matches!(
            histogram_specification(&img, &empty),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn three_channel_matched_per_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..8 * 8 * 3).map(|_| rng.gen()).collect();
        let img = ImageChip::new(8, 8, 3, data).unwrap();
        let target = Histogram::uniform(256).unwrap();
        let out = histogram_specification(&img, &target).unwrap();
        for c in 0..3 {
            let single = histogram_specification(&img.channel(c).unwrap(), &target).unwrap();
            assert_eq!(out.channel(c).unwrap(), single);
        }
    }

    #[test]
    fn target_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("target.json");
        let mut counts = vec![0u64; 256];
        counts[10] = 3;
        counts[250] = 9;
        let hist = Histogram::new(counts, 0).unwrap();
        hist.save(&path).unwrap();
        assert_eq!(Histogram::load(&path).unwrap(), hist);
    }

    proptest::proptest! {
        #[test]
        fn specification_cdf_within_quantization_bound(
            data in proptest::collection::vec(0.0f64..=1.0, 64),
            target in proptest::collection::vec(0u64..20, 256),
        ) {
            proptest::prop_assume!(target.iter().sum::<u64>() > 0);
            let img = gray(8, 8, data);
            let target = Histogram::new(target, 0).unwrap();
            let out = histogram_specification(&img, &target).unwrap();
            proptest::prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
            let source = compute_histogram(&img, 0, 256).unwrap();
            let largest = *source.counts.iter().max().unwrap() as f64 / 64.0;
            let got = compute_histogram(&out, 0, 256).unwrap().cdf();
            let want = target.cdf();
            for (a, b) in got.iter().zip(&want) {
                proptest::prop_assert!((a - b).abs() <= 1.0 / 256.0 + largest + 1e-12);
            }
        }
    }
}
