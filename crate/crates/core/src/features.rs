//! Per-channel grayscale distribution features of a bean: the raw 256-bin
//! occurrence histogram, its Gaussian mean/std fit, and the three feature
//! schemes built from them (single-channel pair, six-tuple, concatenated
//! 768-dim frequency vector).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::{Channel, MaskedBean};

/// Occurrence count of each grayscale value over a bean's masked pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelHistogram {
    pub channel: Channel,
    pub counts: [u64; 256],
    pub total: u64,
}

impl ChannelHistogram {
    /// Frequency view: counts divided by the masked pixel total.
    pub fn frequencies(&self) -> [f64; 256] {
        let mut out = [0.0; 256];
        for (o, &c) in out.iter_mut().zip(self.counts.iter()) {
            *o = c as f64 / self.total as f64;
        }
        out
    }
}

/// Grayscale distribution curve of one channel: counts[v] is the number of
/// masked pixels whose channel value equals v.
pub fn histogram(bean: &MaskedBean, channel: Channel) -> Result<ChannelHistogram> {
    let mut counts = [0u64; 256];
    let mut total = 0u64;
    for p in bean.masked_pixels() {
        counts[p.channel(channel) as usize] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(ChannelHistogram { channel, counts, total })
}

/// Mean and standard deviation of the Gaussian approximating a channel
/// distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    pub mean: f64,
    pub std: f64,
}

/// Maximum-likelihood Gaussian fit of a histogram: sample mean and the
/// divide-by-n standard deviation (not the n-1 variant).
pub fn fit_gaussian_mle(h: &ChannelHistogram) -> Result<GaussianFit> {
    if h.total == 0 {
        return Err(Error::EmptyRegion);
    }
    let n = h.total as f64;
    let mut sum = 0.0;
    for (v, &c) in h.counts.iter().enumerate() {
        sum += v as f64 * c as f64;
    }
    let mean = sum / n;
    let mut sq = 0.0;
    for (v, &c) in h.counts.iter().enumerate() {
        let d = v as f64 - mean;
        sq += c as f64 * d * d;
    }
    Ok(GaussianFit {
        mean,
        std: (sq / n).sqrt(),
    })
}

/// The three published feature schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureScheme {
    /// (mean, std) of one channel's distribution.
    TwoChannel(Channel),
    /// (mean_R, mean_G, mean_B, std_R, std_G, std_B).
    SixStat,
    /// Concatenated per-channel frequency vectors, 3 x 256 components.
    Hist768,
}

impl FeatureScheme {
    pub fn dimension(self) -> usize {
        match self {
            FeatureScheme::TwoChannel(_) => 2,
            FeatureScheme::SixStat => 6,
            FeatureScheme::Hist768 => 768,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureScheme::TwoChannel(Channel::Red) => "two-r",
            FeatureScheme::TwoChannel(Channel::Green) => "two-g",
            FeatureScheme::TwoChannel(Channel::Blue) => "two-b",
            FeatureScheme::SixStat => "six",
            FeatureScheme::Hist768 => "hist768",
        }
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-r" => Ok(FeatureScheme::TwoChannel(Channel::Red)),
            "two-g" => Ok(FeatureScheme::TwoChannel(Channel::Green)),
            "two-b" => Ok(FeatureScheme::TwoChannel(Channel::Blue)),
            "six" => Ok(FeatureScheme::SixStat),
            "hist768" => Ok(FeatureScheme::Hist768),
            other => Err(Error::InvalidInput(format!(
                "unknown scheme `{other}` (expected two-r|two-g|two-b|six|hist768)"
            ))),
        }
    }
}

/// A bean's feature values under one scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub scheme: FeatureScheme,
    pub values: Vec<f64>,
    pub bean_id: String,
}

impl FeatureVector {
    pub fn new(scheme: FeatureScheme, values: Vec<f64>, bean_id: impl Into<String>) -> Result<Self> {
        if values.len() != scheme.dimension() {
            return Err(Error::InvalidInput(format!(
                "scheme {scheme} needs {} components, got {}",
                scheme.dimension(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature component in bean `{}`",
                bean_id.into()
            )));
        }
        Ok(FeatureVector {
            scheme,
            values,
            bean_id: bean_id.into(),
        })
    }
}

/// Scheme B: [mean, std] of the requested channel.
pub fn extract_two(bean: &MaskedBean, channel: Channel) -> Result<FeatureVector> {
    let fit = fit_gaussian_mle(&histogram(bean, channel)?)?;
    FeatureVector::new(
        FeatureScheme::TwoChannel(channel),
        vec![fit.mean, fit.std],
        bean.id.clone(),
    )
}

/// Scheme A: [mean_R, mean_G, mean_B, std_R, std_G, std_B].
pub fn extract_six(bean: &MaskedBean) -> Result<FeatureVector> {
    let mut means = [0.0; 3];
    let mut stds = [0.0; 3];
    for ch in Channel::ALL {
        let fit = fit_gaussian_mle(&histogram(bean, ch)?)?;
        means[ch.index()] = fit.mean;
        stds[ch.index()] = fit.std;
    }
    FeatureVector::new(
        FeatureScheme::SixStat,
        vec![means[0], means[1], means[2], stds[0], stds[1], stds[2]],
        bean.id.clone(),
    )
}

/// Scheme S: normalized Red frequencies, then Green, then Blue. The 768
/// components sum to 3.
pub fn extract_hist768(bean: &MaskedBean) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(768);
    for ch in Channel::ALL {
        let h = histogram(bean, ch)?;
        values.extend_from_slice(&h.frequencies());
    }
    FeatureVector::new(FeatureScheme::Hist768, values, bean.id.clone())
}

/// Scheme dispatcher.
pub fn extract(bean: &MaskedBean, scheme: FeatureScheme) -> Result<FeatureVector> {
    match scheme {
        FeatureScheme::TwoChannel(ch) => extract_two(bean, ch),
        FeatureScheme::SixStat => extract_six(bean),
        FeatureScheme::Hist768 => extract_hist768(bean),
    }
}
