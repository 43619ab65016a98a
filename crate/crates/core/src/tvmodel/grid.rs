use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::manifolds::Manifold;

/// Row-major `d1 × d2` grid. Serialized as nested arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<V> {
    d1: usize,
    d2: usize,
    data: Vec<V>,
}

pub type PrimalImage<T, M> = Grid<<M as Manifold<T>>::Point>;
pub type TangentGrid<T, M> = Grid<<M as Manifold<T>>::Tangent>;

impl<V: Clone> Grid<V> {
    pub fn filled(d1: usize, d2: usize, v: V) -> Self {
        Grid {
            d1,
            d2,
            data: vec![v; d1 * d2],
        }
    }
}

impl<V> Grid<V> {
    /// Panics unless `data.len() == d1 * d2`.
    pub fn from_vec(d1: usize, d2: usize, data: Vec<V>) -> Self {
        assert_eq!(data.len(), d1 * d2, "grid data length");
        Grid { d1, d2, data }
    }

    pub fn from_fn(d1: usize, d2: usize, mut f: impl FnMut(usize, usize) -> V) -> Self {
        let mut data = Vec::with_capacity(d1 * d2);
        for i in 0..d1 {
            for j in 0..d2 {
                data.push(f(i, j));
            }
        }
        Grid { d1, d2, data }
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.d1, self.d2]
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.d2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &V {
        &self.data[i * self.d2 + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut V {
        &mut self.data[i * self.d2 + j]
    }

    pub fn as_slice(&self) -> &[V] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, V> {
        self.data.iter()
    }

    pub fn map<W>(&self, f: impl FnMut(&V) -> W) -> Grid<W> {
        Grid {
            d1: self.d1,
            d2: self.d2,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Pixel coordinates of linear index `idx`.
    pub fn coords_of(&self, idx: usize) -> (usize, usize) {
        (idx / self.d2, idx % self.d2)
    }
}

impl<V: Serialize> Serialize for Grid<V> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[V]> = self.data.chunks(self.d2.max(1)).collect();
        rows.serialize(s)
    }
}

impl<'de, V: DeserializeOwned> Deserialize<'de> for Grid<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<V>> = Vec::deserialize(d)?;
        let d1 = rows.len();
        let d2 = rows.first().map_or(0, Vec::len);
        if d1 == 0 || d2 == 0 || rows.iter().any(|r| r.len() != d2) {
            return Err(serde::de::Error::custom(
                "grid must be a non-empty rectangular array of rows",
            ));
        }
        Ok(Grid {
            d1,
            d2,
            data: rows.into_iter().flatten().collect(),
        })
    }
}

/// Tangent vectors on the `d1 × d2 × 2` forward-difference stencil.
///
/// Channel `k = 0` pairs pixel `(i, j)` with `(i+1, j)`, channel `k = 1`
/// with `(i, j+1)`. Entries whose neighbor falls outside the image are
/// boundary entries and are kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DualField<V> {
    d1: usize,
    d2: usize,
    data: Vec<V>,
}

impl<V: Copy> DualField<V> {
    pub fn filled(d1: usize, d2: usize, v: V) -> Self {
        DualField {
            d1,
            d2,
            data: vec![v; d1 * d2 * 2],
        }
    }
}

impl<V> DualField<V> {
    pub fn from_fn(d1: usize, d2: usize, mut f: impl FnMut(usize, usize, usize) -> V) -> Self {
        let mut data = Vec::with_capacity(d1 * d2 * 2);
        for i in 0..d1 {
            for j in 0..d2 {
                for k in 0..2 {
                    data.push(f(i, j, k));
                }
            }
        }
        DualField { d1, d2, data }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.d1, self.d2, 2]
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> &V {
        &self.data[(i * self.d2 + j) * 2 + k]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize, k: usize) -> &mut V {
        &mut self.data[(i * self.d2 + j) * 2 + k]
    }

    /// Both channels of pixel `(i, j)`.
    #[inline]
    pub fn pixel(&self, i: usize, j: usize) -> &[V] {
        let o = (i * self.d2 + j) * 2;
        &self.data[o..o + 2]
    }

    pub fn as_slice(&self) -> &[V] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [V] {
        &mut self.data
    }

    /// Whether entry `(i, j, k)` has a neighbor inside the image.
    #[inline]
    pub fn is_free(&self, i: usize, j: usize, k: usize) -> bool {
        is_free_entry(self.d1, self.d2, i, j, k)
    }

    pub fn map<W>(&self, f: impl FnMut(&V) -> W) -> DualField<W> {
        DualField {
            d1: self.d1,
            d2: self.d2,
            data: self.data.iter().map(f).collect(),
        }
    }
}

#[inline]
pub(crate) fn is_free_entry(d1: usize, d2: usize, i: usize, j: usize, k: usize) -> bool {
    if k == 0 {
        i + 1 < d1
    } else {
        j + 1 < d2
    }
}

#[inline]
pub(crate) fn neighbor(i: usize, j: usize, k: usize) -> (usize, usize) {
    if k == 0 {
        (i + 1, j)
    } else {
        (i, j + 1)
    }
}

impl<V: Copy + PartialEq + Default> DualField<V> {
    /// Field of `V::default()`, which is the zero vector for tangent types.
    pub fn zeros(d1: usize, d2: usize) -> Self {
        Self::filled(d1, d2, V::default())
    }

    /// True when every boundary entry equals `V::default()`.
    pub fn boundary_is_zero(&self) -> bool {
        let z = V::default();
        (0..self.d1).all(|i| {
            (0..self.d2).all(|j| (0..2).all(|k| self.is_free(i, j, k) || *self.get(i, j, k) == z))
        })
    }
}

impl<V: Serialize> Serialize for DualField<V> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<&[V]>> = self
            .data
            .chunks((self.d2 * 2).max(1))
            .map(|r| r.chunks(2).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de, V: DeserializeOwned> Deserialize<'de> for DualField<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<Vec<V>>> = Vec::deserialize(d)?;
        let d1 = rows.len();
        let d2 = rows.first().map_or(0, Vec::len);
        if d1 == 0
            || d2 == 0
            || rows
                .iter()
                .any(|r| r.len() != d2 || r.iter().any(|c| c.len() != 2))
        {
            return Err(serde::de::Error::custom(
                "dual field must be a non-empty d1 × d2 × 2 array",
            ));
        }
        Ok(DualField {
            d1,
            d2,
            data: rows.into_iter().flatten().flatten().collect(),
        })
    }
}

/// Primal tangent grid together with a dual field: values of the optimality
/// vector field and Newton directions.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPair<V> {
    pub primal: Grid<V>,
    pub dual: DualField<V>,
}
