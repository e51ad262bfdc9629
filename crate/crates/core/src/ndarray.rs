//! Small growable d-dimensional arrays in row-major order (axis 0 slowest).
//!
//! Used both for Boolean tensor masks and for integer location matrices.
//! Indices outside the stored shape are treated as holding a caller-supplied
//! "no value" (inactive / unassigned).

/// Visits every multi-index of `shape` in row-major order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.iter().any(|&s| s == 0) {
        return;
    }
    let mut index = vec![0; shape.len()];
    loop {
        f(&index);
        let mut axis = shape.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < shape[axis] {
                break;
            }
            index[axis] = 0;
        }
    }
}

/// Copy of `index` with `value` inserted at position `axis`.
pub fn insert_entry(index: &[usize], axis: usize, value: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(index.len() + 1);
    out.extend_from_slice(&index[..axis]);
    out.push(value);
    out.extend_from_slice(&index[axis..]);
    out
}

/// Copy of `index` without position `axis`.
pub fn remove_entry(index: &[usize], axis: usize) -> Vec<usize> {
    index
        .iter()
        .enumerate()
        .filter(|&(a, _)| a != axis)
        .map(|(_, &v)| v)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NdArray<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Copy> NdArray<T> {
    pub fn filled(shape: &[usize], value: T) -> Self {
        let size = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; size],
        }
    }

    /// Array of dimension `dim` with shape all zero.
    pub fn empty(dim: usize) -> Self {
        Self {
            shape: vec![0; dim],
            data: Vec::new(),
        }
    }

    pub fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Option<Self> {
        (shape.iter().product::<usize>() == data.len()).then_some(Self { shape, data })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn contains_index(&self, index: &[usize]) -> bool {
        index.iter().zip(&self.shape).all(|(&i, &s)| i < s)
    }

    fn flat(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn get(&self, index: &[usize]) -> Option<T> {
        self.contains_index(index).then(|| self.data[self.flat(index)])
    }

    /// Value at `index`, or `default` outside the stored shape.
    pub fn get_or(&self, index: &[usize], default: T) -> T {
        self.get(index).unwrap_or(default)
    }

    /// Panics if `index` is outside the shape.
    pub fn set(&mut self, index: &[usize], value: T) {
        assert!(self.contains_index(index), "index {index:?} outside {:?}", self.shape);
        let flat = self.flat(index);
        self.data[flat] = value;
    }

    /// Grows the shape so that `index` exists; new slots hold `fill`.
    pub fn grow_to_include(&mut self, index: &[usize], fill: T) {
        if self.contains_index(index) {
            return;
        }
        let new_shape: Vec<usize> = self
            .shape
            .iter()
            .zip(index)
            .map(|(&s, &i)| s.max(i + 1))
            .collect();
        let mut grown = Self::filled(&new_shape, fill);
        let old = std::mem::take(self);
        for_each_index(&old.shape, |i| grown.set(i, old.data[old.flat(i)]));
        *self = grown;
    }

    /// Overwrites every stored entry of slice `(axis, position)` with `value`.
    pub fn fill_slice(&mut self, axis: usize, position: usize, value: T) {
        if self.shape[axis] <= position {
            return;
        }
        let reduced = remove_entry(&self.shape, axis);
        for_each_index(&reduced, |i| self.set(&insert_entry(i, axis, position), value));
    }
}

impl<T> Default for NdArray<T> {
    fn default() -> Self {
        Self {
            shape: Vec::new(),
            data: Vec::new(),
        }
    }
}

/// Compares slice `(axis, 1)` of `first` with slice `(axis, 0)` of `second`
/// entry by entry and writes `op(v0, v1)` back into both, growing either array
/// when the result differs from its implicit `no_value`.
pub fn operate_on_interface<T, F>(
    first: &mut NdArray<T>,
    second: &mut NdArray<T>,
    axis: usize,
    no_value: T,
    op: F,
) where
    T: Copy + PartialEq,
    F: Fn(T, T) -> T,
{
    debug_assert_eq!(first.dim(), second.dim());
    let s0 = remove_entry(first.shape(), axis);
    let s1 = remove_entry(second.shape(), axis);
    let extent: Vec<usize> = s0.iter().zip(&s1).map(|(&a, &b)| a.max(b)).collect();

    for_each_index(&extent, |reduced| {
        let i0 = insert_entry(reduced, axis, 1);
        let i1 = insert_entry(reduced, axis, 0);
        let e0 = first.contains_index(&i0);
        let e1 = second.contains_index(&i1);
        let v0 = if e0 { first.get(&i0).unwrap() } else { no_value };
        let v1 = if e1 { second.get(&i1).unwrap() } else { no_value };
        let r = op(v0, v1);
        if v0 != r {
            if !e0 {
                first.grow_to_include(&i0, no_value);
            }
            first.set(&i0, r);
        }
        if v1 != r {
            if !e1 {
                second.grow_to_include(&i1, no_value);
            }
            second.set(&i1, r);
        }
    });
}

/// Mutable references to two distinct elements of a slice.
pub(crate) fn pair_mut<T>(items: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (left, right) = items.split_at_mut(b);
        (&mut left[a], &mut right[0])
    } else {
        let (left, right) = items.split_at_mut(a);
        (&mut right[0], &mut left[b])
    }
}
