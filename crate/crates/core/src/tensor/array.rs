use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use crate::error::{Error, Result};

/// Element types that appear in tensor files and label volumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    F64,
    I32,
    U8,
}

impl DType {
    pub fn size_of(self) -> usize {
        match self {
            DType::F32 | DType::I32 => 4,
            DType::F64 => 8,
            DType::U8 => 1,
        }
    }
}

/// Floating point element type of differentiable arrays.
///
/// Implemented for `f32` (training) and `f64` (gradient checking); every kernel
/// is generic over it so both paths run the same code.
pub trait Float:
    num_traits::Float
    + Copy
    + Send
    + Sync
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const DTYPE: DType;

    fn from_f(v: f64) -> Self;
    fn to_f(self) -> f64;
}

impl Float for f32 {
    const DTYPE: DType = DType::F32;

    #[inline]
    fn from_f(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f(self) -> f64 {
        self as f64
    }
}

impl Float for f64 {
    const DTYPE: DType = DType::F64;

    #[inline]
    fn from_f(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f(self) -> f64 {
        self
    }
}

/// Dense row-major n-dimensional array.
#[derive(Clone, PartialEq)]
pub struct Array<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Debug> Debug for Array<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Array")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides for `shape`.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl<T: Copy> Array<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::shape(
                "array",
                format!("extents must be positive, got {shape:?}"),
            ));
        }
        if numel(shape) != data.len() {
            return Err(Error::shape(
                "array",
                format!(
                    "shape {shape:?} holds {} elements but {} were given",
                    numel(shape),
                    data.len()
                ),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: (0..numel(shape)).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> T {
        let st = strides(&self.shape);
        let off: usize = index.iter().zip(&st).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Self> {
        if numel(new_shape) != self.len() || new_shape.contains(&0) {
            return Err(Error::shape(
                "reshape",
                format!("cannot reshape {:?} into {:?}", self.shape, new_shape),
            ));
        }
        Ok(Self {
            shape: new_shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Reorders axes: output axis `i` is input axis `order[i]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.ndim())?;
        let in_strides = strides(&self.shape);
        let out_shape: Vec<usize> = order.iter().map(|&a| self.shape[a]).collect();
        let src_strides: Vec<usize> = order.iter().map(|&a| in_strides[a]).collect();
        let n = self.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; out_shape.len()];
        let mut src = 0usize;
        for _ in 0..n {
            data.push(self.data[src]);
            for ax in (0..out_shape.len()).rev() {
                idx[ax] += 1;
                src += src_strides[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                src -= src_strides[ax] * out_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            shape: out_shape,
            data,
        })
    }

    /// Reverses the order of elements along `axis`.
    pub fn flip(&self, axis: usize) -> Result<Self> {
        if axis >= self.ndim() {
            return Err(Error::InvalidArgument(format!(
                "flip axis {axis} out of range for rank {}",
                self.ndim()
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let len = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(self.len());
        for o in 0..outer {
            for i in (0..len).rev() {
                let base = (o * len + i) * inner;
                data.extend_from_slice(&self.data[base..base + inner]);
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Array<U> {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

pub(crate) fn check_permutation(order: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    if order.len() != rank {
        return Err(Error::shape(
            "permute",
            format!("axis order {order:?} has length {} for rank {rank}", order.len()),
        ));
    }
    for &a in order {
        if a >= rank || seen[a] {
            return Err(Error::InvalidArgument(format!(
                "axis order {order:?} is not a permutation of 0..{rank}"
            )));
        }
        seen[a] = true;
    }
    Ok(())
}

pub(crate) fn inverse_permutation(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (i, &a) in order.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

impl<T: Float> Array<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Float>(&self) -> Array<U> {
        self.map(|v| U::from_f(v.to_f()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f() - b.to_f()).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Dynamically typed array, the unit stored in tensor files.
#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    F32(Array<f32>),
    F64(Array<f64>),
    I32(Array<i32>),
    U8(Array<u8>),
}

impl Tensor {
    pub fn dtype(&self) -> DType {
        match self {
            Tensor::F32(_) => DType::F32,
            Tensor::F64(_) => DType::F64,
            Tensor::I32(_) => DType::I32,
            Tensor::U8(_) => DType::U8,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Tensor::F32(a) => a.shape(),
            Tensor::F64(a) => a.shape(),
            Tensor::I32(a) => a.shape(),
            Tensor::U8(a) => a.shape(),
        }
    }

    pub fn into_f32(self) -> Result<Array<f32>> {
        match self {
            Tensor::F32(a) => Ok(a),
            other => Err(Error::UnsupportedDtype(format!(
                "expected float32, found {:?}",
                other.dtype()
            ))),
        }
    }

    /// Label volumes may be stored as int32 or uint8.
    pub fn into_labels(self) -> Result<Array<i32>> {
        match self {
            Tensor::I32(a) => Ok(a),
            Tensor::U8(a) => Ok(a.map(i32::from)),
            other => Err(Error::UnsupportedDtype(format!(
                "expected an integer label volume, found {:?}",
                other.dtype()
            ))),
        }
    }
}

impl From<Array<f32>> for Tensor {
    fn from(a: Array<f32>) -> Self {
        Tensor::F32(a)
    }
}

impl From<Array<f64>> for Tensor {
    fn from(a: Array<f64>) -> Self {
        Tensor::F64(a)
    }
}

impl From<Array<i32>> for Tensor {
    fn from(a: Array<i32>) -> Self {
        Tensor::I32(a)
    }
}

impl From<Array<u8>> for Tensor {
    fn from(a: Array<u8>) -> Self {
        Tensor::U8(a)
    }
}
