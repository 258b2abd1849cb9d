//! Dense row-major tensors, clipping-group views, and deterministic
//! reductions.
//!
//! Every quantization routine in this crate operates on [`Tensor`] through a
//! [`GroupView`]: the partition of elements into groups that share one
//! clipping scalar. Per-tensor scaling is the single-group view; per-row
//! scaling groups elements by their index along one axis.

use crate::error::{Error, Result};

/// Dense tensor of 64-bit floats in row-major order.
///
/// Files may store 32-bit payloads, but all in-memory compute is performed in
/// f64; the loader widens on read and enforces finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    data: Vec<f64>,
    shape: Vec<usize>,
}

impl Tensor {
    /// Builds a tensor from a flat row-major buffer and its shape.
    ///
    /// The shape must have rank >= 1, every dimension >= 1, and the buffer
    /// length must equal the product of the dimensions.
    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::EmptyTensor);
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                shape: shape.to_vec(),
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            data,
            shape: shape.to_vec(),
        })
    }

    /// Rank-1 convenience constructor.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::from_vec(values.to_vec(), &[values.len()])
    }

    /// Flat row-major element buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the flat buffer. The shape is fixed at construction.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Dimension sizes.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of axes.
    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Total element count (always >= 1).
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Never true for a constructed tensor; present for API completeness.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// How elements are partitioned into clipping groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// One clipping scalar for the whole tensor.
    PerTensor,
    /// One clipping scalar per index along the given axis. Axis 0 on a
    /// `[rows, cols]` weight matrix is per-output-row scaling.
    PerRow(usize),
}

/// A validated partition of a tensor's elements into clipping groups.
///
/// Group `g` enumerates exactly the elements whose index along the group axis
/// equals `g` (or all elements, for per-tensor granularity). Groups are
/// disjoint and exhaustive by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupView {
    granularity: Granularity,
    group_count: usize,
    group_size: usize,
    /// Contiguous run length: elements of one group arrive in runs of this
    /// length, `outer` times.
    inner: usize,
    /// Number of contiguous runs per group.
    outer: usize,
}

/// Builds the group view for a tensor under the requested granularity.
///
/// Fails with [`Error::AxisOutOfRange`] when a per-row axis is not a valid
/// axis of the tensor.
pub fn group_view(t: &Tensor, granularity: Granularity) -> Result<GroupView> {
    GroupView::for_shape(t.shape(), granularity)
}

impl GroupView {
    /// Builds a view directly from a shape.
    pub fn for_shape(shape: &[usize], granularity: Granularity) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::EmptyTensor);
        }
        let len: usize = shape.iter().product();
        match granularity {
            Granularity::PerTensor => Ok(Self {
                granularity,
                group_count: 1,
                group_size: len,
                inner: len,
                outer: 1,
            }),
            Granularity::PerRow(axis) => {
                if axis >= shape.len() {
                    return Err(Error::AxisOutOfRange {
                        axis,
                        rank: shape.len(),
                    });
                }
                let group_count = shape[axis];
                let inner: usize = shape[axis + 1..].iter().product();
                let outer: usize = shape[..axis].iter().product();
                Ok(Self {
                    granularity,
                    group_count,
                    group_size: inner * outer,
                    inner,
                    outer,
                })
            }
        }
    }

    /// The granularity this view was built with.
    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    /// Number of groups (1 for per-tensor).
    pub fn group_count(&self) -> usize {
        self.group_count
    }

    /// Elements per group. Identical for every group.
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// Total element count covered by the view.
    pub fn len(&self) -> usize {
        self.group_count * self.group_size
    }

    /// True only for views over nothing, which cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Group index of a flat row-major element index.
    pub fn group_of(&self, flat: usize) -> usize {
        match self.granularity {
            Granularity::PerTensor => 0,
            Granularity::PerRow(_) => (flat / self.inner) % self.group_count,
        }
    }

    /// Checks that the view covers exactly the tensor's elements.
    pub fn check_matches(&self, t: &Tensor) -> Result<()> {
        if self.len() != t.len() {
            return Err(Error::ViewMismatch {
                view_len: self.len(),
                tensor_len: t.len(),
            });
        }
        Ok(())
    }

    /// Visits every contiguous run of the tensor in storage order as
    /// `(group, start, values)`. Each group receives `outer` runs of `inner`
    /// elements; concatenating a group's runs in visit order is the group's
    /// canonical element order.
    pub fn for_each_run<'a, F>(&self, t: &'a Tensor, mut f: F)
    where
        F: FnMut(usize, usize, &'a [f64]),
    {
        let data = t.data();
        match self.granularity {
            Granularity::PerTensor => f(0, 0, data),
            Granularity::PerRow(_) => {
                let mut start = 0;
                for _ in 0..self.outer {
                    for g in 0..self.group_count {
                        f(g, start, &data[start..start + self.inner]);
                        start += self.inner;
                    }
                }
            }
        }
    }

    /// Collects one group's elements in canonical order.
    pub fn collect_group(&self, t: &Tensor, group: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.group_size);
        self.for_each_run(t, |g, _, run| {
            if g == group {
                out.extend_from_slice(run);
            }
        });
        out
    }

    /// Collects every group into its own buffer, in canonical order.
    pub fn collect_groups(&self, t: &Tensor) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::with_capacity(self.group_size); self.group_count];
        self.for_each_run(t, |g, _, run| out[g].extend_from_slice(run));
        out
    }
}

/// Block size below which the pairwise reduction sums sequentially.
const PAIRWISE_BLOCK: usize = 512;

/// Deterministic sum of a slice via a fixed-order pairwise tree.
///
/// Blocks of up to [`PAIRWISE_BLOCK`] elements are folded sequentially and the
/// halves of larger slices are combined recursively, so the result depends
/// only on the input values and their order, never on chunking or thread
/// count. The empty slice sums to 0.
pub fn reduce_sum(values: &[f64]) -> f64 {
    pairwise_map_sum(values, |x| x)
}

/// Pairwise-tree sum of `f(x)` over the slice; same reduction order as
/// [`reduce_sum`].
pub fn pairwise_map_sum<F>(values: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Copy,
{
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for &x in values {
            acc += f(x);
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_map_sum(&values[..mid], f) + pairwise_map_sum(&values[mid..], f)
}
