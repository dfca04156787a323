//! Dense feature-map and descriptor types plus the elementwise primitives
//! shared by pooling, retrieval and reranking.
//!
//! Storage is always `f32`. Reductions (norms, dot products, pooling sums)
//! accumulate in `f64`.

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// An `H × W × C` activation tensor for one image at one scale, stored
/// row-major in `(h, w, c)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::DimMismatch(format!(
                "feature map dims must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimMismatch(format!(
                "feature map {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// A map with every entry equal to `value`.
    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of spatial positions, `H · W`.
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, h: usize, w: usize, c: usize) -> f32 {
        self.data[(h * self.width + w) * self.channels + c]
    }

    /// The `C` activations at spatial position `(h, w)`.
    pub fn pixel(&self, h: usize, w: usize) -> &[f32] {
        let start = (h * self.width + w) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }
}

/// A global feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    data: Vec<f32>,
}

impl Descriptor {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::DimMismatch("descriptor must be non-empty".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("descriptor"));
        }
        Ok(Self { data })
    }

    /// Narrows `f64` values to storage precision.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn dot(&self, other: &Descriptor) -> f64 {
        dot(&self.data, &other.data)
    }
}

/// `N` descriptors of equal dimension packed row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    data: Vec<f32>,
}

impl DescriptorSet {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::DimMismatch(format!(
                "{} values cannot be split into rows of {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("descriptor set"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_descriptors(descs: &[Descriptor]) -> Result<Self> {
        let first = descs.first().ok_or(Error::EmptyInput)?;
        let dim = first.dim();
        let mut data = Vec::with_capacity(dim * descs.len());
        for d in descs {
            if d.dim() != dim {
                return Err(Error::DimMismatch(format!(
                    "descriptor of length {} in a set of dimension {dim}",
                    d.dim()
                )));
            }
            data.extend_from_slice(d.as_slice());
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn descriptor(&self, i: usize) -> Descriptor {
        Descriptor {
            data: self.row(i).to_vec(),
        }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Affine projection `W·v + b` with `W` of shape `C_g × C_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningParams {
    out_dim: usize,
    in_dim: usize,
    matrix: Vec<f32>,
    bias: Vec<f32>,
}

impl WhiteningParams {
    /// `matrix` is row-major `out_dim × in_dim`; `bias` has `out_dim` entries.
    pub fn new(out_dim: usize, in_dim: usize, matrix: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if out_dim == 0 || in_dim == 0 || matrix.len() != out_dim * in_dim {
            return Err(Error::DimMismatch(format!(
                "whitening matrix {out_dim}x{in_dim} needs {} values, got {}",
                out_dim * in_dim,
                matrix.len()
            )));
        }
        if bias.len() != out_dim {
            return Err(Error::DimMismatch(format!(
                "whitening bias has {} entries, matrix has {out_dim} rows",
                bias.len()
            )));
        }
        if matrix.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("whitening parameters"));
        }
        Ok(Self {
            out_dim,
            in_dim,
            matrix,
            bias,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Self {
            out_dim: dim,
            in_dim: dim,
            matrix,
            bias: vec![0.0; dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.in_dim..(i + 1) * self.in_dim]
    }
}

/// Element types a dot product widens to `f64` exactly.
pub(crate) trait Widen: Copy {
    fn widen(self) -> f64;
}

impl Widen for f32 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self as f64
    }
}

impl Widen for f64 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self
    }
}

/// Eight independent lanes, then a fixed pairwise reduction. Every dot
/// product goes through this body so equal inputs give equal bits on any
/// instruction set.
#[inline(always)]
fn dot_lanes<B: Widen>(a: &[f32], b: &[B]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] as f64 * y[l].widen();
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x as f64 * y.widen();
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dot_lanes_avx2<B: Widen>(a: &[f32], b: &[B]) -> f64 {
    dot_lanes(a, b)
}

#[inline]
pub(crate) fn dot_widen<B: Widen>(a: &[f32], b: &[B]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2.
            return unsafe { dot_lanes_avx2(a, b) };
        }
    }
    dot_lanes(a, b)
}

/// Dot product of two `f32` slices with `f64` accumulation.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    dot_widen(a, b)
}

pub fn norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `d` to unit Euclidean norm.
pub fn l2_normalize(d: &Descriptor) -> Result<Descriptor> {
    Ok(Descriptor {
        data: normalized(d.as_slice())?,
    })
}

pub(crate) fn normalized(v: &[f32]) -> Result<Vec<f32>> {
    let n = norm(v);
    if !(n >= ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|&x| (x as f64 / n) as f32).collect())
}

pub(crate) fn normalized_f64(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n >= ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Generalized ReLU, `max(x, alpha)` elementwise. `alpha = 0` is the vanilla
/// ReLU. The output is strictly non-negative.
pub fn relu_threshold(m: &FeatureMap, alpha: f32) -> Result<FeatureMap> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "relu threshold must be finite and >= 0, got {alpha}"
        )));
    }
    let data = m.data.iter().map(|&x| x.max(alpha)).collect();
    Ok(FeatureMap::from_parts_unchecked(
        m.height, m.width, m.channels, data,
    ))
}
