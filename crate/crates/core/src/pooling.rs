//! Pooling operators that turn feature maps into global descriptors.
//!
//! * [`gem_pool`]: generalized mean over all spatial positions, per channel.
//! * [`regional_lp_map`]: windowed generalized mean producing a map of the
//!   same shape (reflection padding at the borders).
//! * [`regional_gem`]: GeM over the average of a map and its regional map,
//!   followed by whitening.
//! * [`scale_gem`]: generalized mean across per-scale descriptors, shifted so
//!   every entry is non-negative.
//! * [`extract_descriptor`]: the full single-image pipeline.
//!
//! Generalized means are evaluated as `s · mean((x/s)^p)^(1/p)` with `s` the
//! largest magnitude in the reduction. This keeps large powers from
//! underflowing and makes the mean of a constant exactly that constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{self, Descriptor, FeatureMap, WhiteningParams};

/// Tunable pooling scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolingConfig {
    /// GeM power.
    pub p: f64,
    /// Power of the regional Lp aggregation.
    pub p_r: f64,
    /// Multi-scale power; `f64::INFINITY` selects the elementwise max.
    #[serde(with = "power_or_inf")]
    pub p_ms: f64,
    /// Generalized ReLU threshold applied to every input map.
    pub alpha: f64,
    /// Side of the square regional window, odd.
    pub region_window: usize,
    pub regional_enabled: bool,
    pub scale_gem_enabled: bool,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        Self {
            p: 4.6,
            p_r: 2.5,
            p_ms: f64::INFINITY,
            alpha: 0.014,
            region_window: 3,
            regional_enabled: true,
            scale_gem_enabled: true,
        }
    }
}

impl PoolingConfig {
    /// Plain GeM with a learned-style power and single-scale averaging: the
    /// configuration the refinements are compared against.
    pub fn baseline(p: f64) -> Self {
        Self {
            p,
            alpha: 0.0,
            regional_enabled: false,
            scale_gem_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_power("p", self.p)?;
        check_power("p_r", self.p_r)?;
        if !(self.p_ms > 0.0) || self.p_ms.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "p_ms must be positive or inf, got {}",
                self.p_ms
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        check_window(self.region_window)
    }
}

fn check_power(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} must be finite and positive, got {p}"
        )))
    }
}

fn check_window(window: usize) -> Result<()> {
    if window % 2 == 1 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "region window must be odd and >= 1, got {window}"
        )))
    }
}

/// `p_ms` is written as a number, or as `"inf"` for the max-pooling limit.
mod power_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// One image observed at `N ≥ 1` scales. Spatial sizes may differ between
/// scales; the channel count may not.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    maps: Vec<FeatureMap>,
}

impl ScaleSet {
    pub fn new(maps: Vec<FeatureMap>) -> Result<Self> {
        let first = maps.first().ok_or(Error::EmptyScaleSet)?;
        let c = first.channels();
        if let Some(bad) = maps.iter().find(|m| m.channels() != c) {
            return Err(Error::DimMismatch(format!(
                "scale with {} channels in a set of {c}",
                bad.channels()
            )));
        }
        Ok(Self { maps })
    }

    pub fn maps(&self) -> &[FeatureMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.maps[0].channels()
    }
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0
}

fn check_activations(m: &FeatureMap, p: f64) -> Result<()> {
    if is_integer(p) {
        return Ok(());
    }
    match m.data().iter().find(|&&v| v < 0.0) {
        Some(&value) => Err(Error::NegativeActivation { value, power: p }),
        None => Ok(()),
    }
}

#[inline]
fn pow(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if is_integer(p) && p.abs() < i32::MAX as f64 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// `mean^(1/p)`, keeping the sign for odd integer powers of negative means.
#[inline]
fn root(mean: f64, p: f64) -> f64 {
    if p == 1.0 {
        mean
    } else if mean < 0.0 {
        -(-mean).powf(1.0 / p)
    } else {
        mean.powf(1.0 / p)
    }
}

/// Per-channel generalized mean over all `H·W` positions.
pub fn gem_pool(m: &FeatureMap, p: f64) -> Result<Vec<f64>> {
    check_power("p", p)?;
    check_activations(m, p)?;
    let c = m.channels();
    let mut scale = vec![0.0f64; c];
    for px in m.data().chunks_exact(c) {
        for (s, &v) in scale.iter_mut().zip(px) {
            *s = s.max((v as f64).abs());
        }
    }
    let mut sums = vec![0.0f64; c];
    for px in m.data().chunks_exact(c) {
        for ((acc, &v), &s) in sums.iter_mut().zip(px).zip(&scale) {
            if s > 0.0 {
                *acc += pow(v as f64 / s, p);
            }
        }
    }
    let n = m.positions() as f64;
    Ok(sums
        .into_iter()
        .zip(scale)
        .map(|(sum, s)| if s > 0.0 { s * root(sum / n, p) } else { 0.0 })
        .collect())
}

/// `W·v + b`.
pub fn whiten(v: &[f64], w: &WhiteningParams) -> Result<Descriptor> {
    if v.len() != w.in_dim() {
        return Err(Error::DimMismatch(format!(
            "whitening expects {} inputs, got {}",
            w.in_dim(),
            v.len()
        )));
    }
    let out: Vec<f64> = (0..w.out_dim())
        .map(|i| {
            let row = w.row(i);
            row.iter().zip(v).map(|(&a, &x)| a as f64 * x).sum::<f64>() + w.bias()[i] as f64
        })
        .collect();
    Descriptor::from_f64(&out)
}

/// Reflect an out-of-range coordinate back into `0..n` without repeating
/// the edge sample (`[a b c]` pads as `b a b c b`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// Windowed generalized mean: each output position holds the power mean of
/// the `window × window` neighbourhood around it, per channel.
pub fn regional_lp_map(m: &FeatureMap, p_r: f64, window: usize) -> Result<FeatureMap> {
    check_power("p_r", p_r)?;
    check_window(window)?;
    check_activations(m, p_r)?;
    if window == 1 {
        return Ok(m.clone());
    }
    let (h, w, c) = (m.height(), m.width(), m.channels());
    let r = (window / 2) as isize;

    let mut scale = vec![0.0f64; c];
    for px in m.data().chunks_exact(c) {
        for (s, &v) in scale.iter_mut().zip(px) {
            *s = s.max((v as f64).abs());
        }
    }
    let powered: Vec<f64> = m
        .data()
        .chunks_exact(c)
        .flat_map(|px| {
            px.iter().zip(&scale).map(|(&v, &s)| {
                if s > 0.0 {
                    pow(v as f64 / s, p_r)
                } else {
                    0.0
                }
            })
        })
        .collect();

    // Box sums are separable: rows first, then columns.
    let mut rows = vec![0.0f64; h * w * c];
    for y in 0..h {
        for x in 0..w {
            let dst = &mut rows[(y * w + x) * c..(y * w + x + 1) * c];
            for dx in -r..=r {
                let sx = reflect(x as isize + dx, w);
                let src = &powered[(y * w + sx) * c..(y * w + sx + 1) * c];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
    }
    let mut boxed = vec![0.0f64; h * w * c];
    for y in 0..h {
        for dy in -r..=r {
            let sy = reflect(y as isize + dy, h);
            for x in 0..w {
                let dst = &mut boxed[(y * w + x) * c..(y * w + x + 1) * c];
                let src = &rows[(sy * w + x) * c..(sy * w + x + 1) * c];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
    }

    let count = (window * window) as f64;
    let data = boxed
        .chunks_exact(c)
        .flat_map(|px| {
            px.iter()
                .zip(&scale)
                .map(|(&sum, &s)| if s > 0.0 { (s * root(sum / count, p_r)) as f32 } else { 0.0 })
        })
        .collect();
    Ok(FeatureMap::from_parts_unchecked(h, w, c, data))
}

/// GeM over `(M + D) / 2` where `M` is the regional map of `D`, then
/// whitening. With regional aggregation disabled this is `whiten(gem_pool(D))`.
pub fn regional_gem(m: &FeatureMap, cfg: &PoolingConfig, w: &WhiteningParams) -> Result<Descriptor> {
    if !cfg.regional_enabled {
        return whiten(&gem_pool(m, cfg.p)?, w);
    }
    let regional = regional_lp_map(m, cfg.p_r, cfg.region_window)?;
    let blended: Vec<f32> = regional
        .data()
        .iter()
        .zip(m.data())
        .map(|(&a, &b)| ((a as f64 + b as f64) / 2.0) as f32)
        .collect();
    let blended = FeatureMap::from_parts_unchecked(m.height(), m.width(), m.channels(), blended);
    whiten(&gem_pool(&blended, cfg.p)?, w)
}

/// Generalized mean across per-scale descriptors.
///
/// All scales share one shift `ζ = max(0, -min over every entry)` so the
/// powered values are non-negative; the shift is removed afterwards. At
/// `p_ms = ∞` this is the elementwise maximum.
pub fn scale_gem(descs: &[Descriptor], p_ms: f64) -> Result<Descriptor> {
    let first = descs.first().ok_or(Error::EmptyScaleSet)?;
    let dim = first.dim();
    if let Some(bad) = descs.iter().find(|d| d.dim() != dim) {
        return Err(Error::DimMismatch(format!(
            "scale descriptor of length {} among length {dim}",
            bad.dim()
        )));
    }
    if !(p_ms > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "p_ms must be positive or inf, got {p_ms}"
        )));
    }
    if descs.len() == 1 {
        return Ok(first.clone());
    }
    if p_ms.is_infinite() {
        let mut out = first.as_slice().to_vec();
        for d in &descs[1..] {
            for (o, &v) in out.iter_mut().zip(d.as_slice()) {
                *o = o.max(v);
            }
        }
        return Descriptor::new(out);
    }

    let min = descs
        .iter()
        .flat_map(|d| d.as_slice())
        .fold(f64::INFINITY, |acc, &v| acc.min(v as f64));
    let shift = (-min).max(0.0);
    let n = descs.len() as f64;
    let out: Vec<f64> = (0..dim)
        .map(|i| {
            let scale = descs
                .iter()
                .map(|d| d.as_slice()[i] as f64 + shift)
                .fold(0.0f64, f64::max);
            if scale == 0.0 {
                return -shift;
            }
            let sum: f64 = descs
                .iter()
                .map(|d| pow((d.as_slice()[i] as f64 + shift) / scale, p_ms))
                .sum();
            scale * root(sum / n, p_ms) - shift
        })
        .collect();
    Descriptor::from_f64(&out)
}

/// Full single-image pipeline: threshold each scale, Regional-GeM per scale,
/// aggregate across scales, L2-normalize.
pub fn extract_descriptor(
    scales: &ScaleSet,
    cfg: &PoolingConfig,
    w: &WhiteningParams,
) -> Result<Descriptor> {
    cfg.validate()?;
    if scales.channels() != w.in_dim() {
        return Err(Error::DimMismatch(format!(
            "feature maps have {} channels, whitening expects {}",
            scales.channels(),
            w.in_dim()
        )));
    }
    let per_scale = scales
        .maps()
        .iter()
        .map(|m| {
            let act = tensor::relu_threshold(m, cfg.alpha as f32)?;
            regional_gem(&act, cfg, w)
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = if cfg.scale_gem_enabled {
        scale_gem(&per_scale, cfg.p_ms)?
    } else {
        mean_descriptor(&per_scale)?
    };
    tensor::l2_normalize(&merged)
}

/// [`extract_descriptor`] over many images, in parallel. Output order
/// matches input order.
pub fn extract_batch(
    images: &[ScaleSet],
    cfg: &PoolingConfig,
    w: &WhiteningParams,
) -> Result<Vec<Descriptor>> {
    images
        .par_iter()
        .map(|s| extract_descriptor(s, cfg, w))
        .collect()
}

fn mean_descriptor(descs: &[Descriptor]) -> Result<Descriptor> {
    let first = descs.first().ok_or(Error::EmptyScaleSet)?;
    let mut acc = vec![0.0f64; first.dim()];
    for d in descs {
        if d.dim() != acc.len() {
            return Err(Error::DimMismatch("scale descriptors differ in length".into()));
        }
        for (a, &v) in acc.iter_mut().zip(d.as_slice()) {
            *a += v as f64;
        }
    }
    let n = descs.len() as f64;
    Descriptor::from_f64(&acc.iter().map(|a| a / n).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(h: usize, w: usize, c: usize, v: &[f32]) -> FeatureMap {
        FeatureMap::new(h, w, c, v.to_vec()).unwrap()
    }

    fn desc(v: &[f32]) -> Descriptor {
        Descriptor::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gem_of_one_and_three() {
        let out = gem_pool(&map(1, 2, 1, &[1.0, 3.0]), 2.0).unwrap();
        assert!((out[0] - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gem_large_power_approaches_max() {
        let out = gem_pool(&map(1, 2, 1, &[0.2, 0.9]), 100.0).unwrap();
        assert!((out[0] - 0.9).abs() < 1e-2);
    }

    #[test]
    fn gem_rejects_negative_with_fractional_power() {
        let m = map(1, 2, 1, &[-0.1, 0.5]);
        assert!(matches!(
            gem_pool(&m, 2.5),
            Err(Error::NegativeActivation { .. })
        ));
        assert!(gem_pool(&m, 2.0).is_ok());
    }

    #[test]
    fn gem_zero_channel_is_zero() {
        let out = gem_pool(&map(2, 1, 2, &[0.0, 1.0, 0.0, 2.0]), 3.0).unwrap();
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn whiten_examples() {
        let w = WhiteningParams::new(2, 2, vec![1.0, 1.0, 0.0, 2.0], vec![0.5, 0.0]).unwrap();
        let out = whiten(&[1.0, 2.0], &w).unwrap();
        assert_eq!(out.as_slice(), &[3.5, 4.0]);

        let id = WhiteningParams::identity(3);
        assert_eq!(whiten(&[0.25, 1.0, 2.0], &id).unwrap().as_slice(), &[0.25, 1.0, 2.0]);

        let w = WhiteningParams::new(2, 4, vec![0.0; 8], vec![0.0; 2]).unwrap();
        assert!(matches!(whiten(&[1.0, 2.0, 3.0], &w), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn reflect_indices() {
        let idx: Vec<usize> = (-2..5).map(|i| reflect(i, 3)).collect();
        assert_eq!(idx, vec![2, 1, 0, 1, 2, 1, 0]);
        assert_eq!(reflect(-1, 1), 0);
        assert_eq!(reflect(2, 2), 0);
    }

    #[test]
    fn regional_map_hand_example() {
        let out = regional_lp_map(&map(3, 1, 1, &[0.0, 1.0, 2.0]), 2.0, 3).unwrap();
        // Reflect-padded column [1, 0, 1, 2, 1].
        let expected = [(2.0f64 / 3.0).sqrt(), (5.0f64 / 3.0).sqrt(), 2f64.sqrt()];
        for (o, e) in out.data().iter().zip(expected) {
            assert!((*o as f64 - e).abs() < 1e-6, "{o} vs {e}");
        }
    }

    #[test]
    fn regional_window_one_is_identity() {
        let m = map(2, 2, 2, &[0.1, 0.7, 0.3, 0.2, 0.9, 0.4, 0.5, 0.6]);
        assert_eq!(regional_lp_map(&m, 3.3, 1).unwrap(), m);
    }

    #[test]
    fn regional_rejects_even_window() {
        let m = map(1, 1, 1, &[1.0]);
        assert!(regional_lp_map(&m, 2.0, 2).is_err());
    }

    #[test]
    fn regional_gem_hand_example() {
        let cfg = PoolingConfig {
            p: 2.0,
            p_r: 1.0,
            region_window: 3,
            ..PoolingConfig::default()
        };
        let out = regional_gem(&map(1, 2, 1, &[1.0, 3.0]), &cfg, &WhiteningParams::identity(1)).unwrap();
        assert!((out.as_slice()[0] as f64 - (37.0f64 / 9.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn regional_gem_of_constant() {
        let cfg = PoolingConfig::default();
        let m = FeatureMap::filled(4, 5, 3, 0.37).unwrap();
        let out = regional_gem(&m, &cfg, &WhiteningParams::identity(3)).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.37));
    }

    #[test]
    fn scale_gem_examples() {
        let g1 = desc(&[0.1, -0.2]);
        let g2 = desc(&[0.3, -0.4]);
        let out = scale_gem(&[g1.clone(), g2.clone()], f64::INFINITY).unwrap();
        assert_eq!(out.as_slice(), &[0.3, -0.2]);

        assert_eq!(scale_gem(&[g1.clone()], 3.0).unwrap(), g1);

        let mean = scale_gem(&[g1, g2], 1.0).unwrap();
        assert!((mean.as_slice()[0] - 0.2).abs() < 1e-6);
        assert!((mean.as_slice()[1] + 0.3).abs() < 1e-6);

        assert!(matches!(scale_gem(&[], 2.0), Err(Error::EmptyScaleSet)));
        assert!(matches!(
            scale_gem(&[desc(&[1.0]), desc(&[1.0, 2.0])], 2.0),
            Err(Error::DimMismatch(_))
        ));
    }

    #[test]
    fn extract_constant_map_single_scale() {
        let cfg = PoolingConfig::default();
        let set = ScaleSet::new(vec![FeatureMap::filled(3, 3, 4, 0.5).unwrap()]).unwrap();
        let d = extract_descriptor(&set, &cfg, &WhiteningParams::identity(4)).unwrap();
        for v in d.as_slice() {
            assert!((v - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn extract_without_scale_gem_averages() {
        let cfg = PoolingConfig {
            scale_gem_enabled: false,
            regional_enabled: false,
            alpha: 0.0,
            p: 1.0,
            ..PoolingConfig::default()
        };
        let a = map(1, 1, 2, &[1.0, 0.0]);
        let b = map(1, 1, 2, &[0.0, 3.0]);
        let set = ScaleSet::new(vec![a, b]).unwrap();
        let d = extract_descriptor(&set, &cfg, &WhiteningParams::identity(2)).unwrap();
        let n = (0.25f64 + 2.25).sqrt();
        assert!((d.as_slice()[0] as f64 - 0.5 / n).abs() < 1e-6);
        assert!((d.as_slice()[1] as f64 - 1.5 / n).abs() < 1e-6);
    }

    #[test]
    fn config_json_accepts_inf() {
        let cfg: PoolingConfig = serde_json::from_str(r#"{"p": 3.0, "p_ms": "inf"}"#).unwrap();
        assert_eq!(cfg.p, 3.0);
        assert!(cfg.p_ms.is_infinite());
        assert_eq!(cfg.p_r, 2.5);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains(r#""p_ms":"inf""#));
        let cfg: PoolingConfig = serde_json::from_str(r#"{"p_ms": 7}"#).unwrap();
        assert_eq!(cfg.p_ms, 7.0);
    }

    fn random_map() -> impl Strategy<Value = FeatureMap> {
        (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(h, w, c)| {
            prop::collection::vec(0.0f32..2.0, h * w * c)
                .prop_map(move |v| FeatureMap::new(h, w, c, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn gem_is_monotone_in_power(m in random_map()) {
            let outs: Vec<Vec<f64>> = [1.0, 2.0, 4.0, 8.0]
                .iter()
                .map(|&p| gem_pool(&m, p).unwrap())
                .collect();
            for pair in outs.windows(2) {
                for (lo, hi) in pair[0].iter().zip(&pair[1]) {
                    prop_assert!(*lo <= *hi + 1e-9);
                }
            }
        }

        #[test]
        fn regional_map_keeps_shape(m in random_map(), p_r in 0.5f64..5.0, half in 0usize..3) {
            let out = regional_lp_map(&m, p_r, 2 * half + 1).unwrap();
            prop_assert_eq!(
                (out.height(), out.width(), out.channels()),
                (m.height(), m.width(), m.channels())
            );
        }

        #[test]
        fn regional_map_keeps_constants(h in 1usize..6, w in 1usize..6, v in 0.0f32..3.0, p_r in 0.5f64..5.0, half in 0usize..4) {
            let m = FeatureMap::filled(h, w, 2, v).unwrap();
            let out = regional_lp_map(&m, p_r, 2 * half + 1).unwrap();
            prop_assert_eq!(out, m);
        }

        #[test]
        fn scale_gem_is_bounded(
            rows in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 4), 1..5),
            p_ms in 1.0f64..12.0,
        ) {
            let descs: Vec<Descriptor> = rows.iter().map(|r| desc(r)).collect();
            let out = scale_gem(&descs, p_ms).unwrap();
            for i in 0..4 {
                let lo = rows.iter().map(|r| r[i]).fold(f32::INFINITY, f32::min);
                let hi = rows.iter().map(|r| r[i]).fold(f32::NEG_INFINITY, f32::max);
                prop_assert!(out.as_slice()[i] >= lo - 1e-6 && out.as_slice()[i] <= hi + 1e-6);
            }
        }

        #[test]
        fn scale_gem_max_ignores_order_and_shift(
            rows in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 4), 1..5),
            shift in -0.5f32..0.5,
        ) {
            let descs: Vec<Descriptor> = rows.iter().map(|r| desc(r)).collect();
            let out = scale_gem(&descs, f64::INFINITY).unwrap();
            let mut reversed = descs.clone();
            reversed.reverse();
            prop_assert_eq!(&scale_gem(&reversed, f64::INFINITY).unwrap(), &out);
            let shifted: Vec<Descriptor> = rows
                .iter()
                .map(|r| desc(&r.iter().map(|v| v + shift).collect::<Vec<_>>()))
                .collect();
            let out_shifted = scale_gem(&shifted, f64::INFINITY).unwrap();
            for (a, b) in out_shifted.as_slice().iter().zip(out.as_slice()) {
                prop_assert_eq!(*a, b + shift);
            }
        }

        #[test]
        fn extract_is_unit_norm(m in random_map(), p in 1.0f64..6.0) {
            let cfg = PoolingConfig { p, ..PoolingConfig::default() };
            let c = m.channels();
            let set = ScaleSet::new(vec![m]).unwrap();
            let d = extract_descriptor(&set, &cfg, &WhiteningParams::identity(c)).unwrap();
            prop_assert!(d.is_unit(1e-5));
        }
    }
}
