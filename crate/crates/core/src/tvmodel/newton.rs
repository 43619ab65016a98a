use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::jacobi::{d_exp_arg, d_exp_base, d_geodesic_start, d_log_arg, d_log_base, d_transport_target};
use crate::manifolds::{from_coords, geodesic, GeometryError, Manifold, TangentSpace};
use crate::scalar::Real;

use super::grid::{is_free_entry, neighbor, DualField, FieldPair, Grid, PrimalImage, TangentGrid};
use super::ops::{cost, d_prox_dual_pixel, forward_diff, forward_diff_adjoint, prox_dual, prox_dual_pixel};
use super::{ModelError, TvParams};

/// Bijection between Newton-system rows and (pixel, channel, basis index).
///
/// Primal pixels come first in row-major order, then the free dual entries
/// `(i, j, k)` in row-major order; each occupies `dim` consecutive rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMap {
    d1: usize,
    d2: usize,
    dim: usize,
    free: Vec<(usize, usize, usize)>,
    slot: Vec<Option<usize>>,
}

/// What a row of the Newton system refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Primal { i: usize, j: usize, b: usize },
    Dual { i: usize, j: usize, k: usize, b: usize },
}

impl IndexMap {
    pub fn new(d1: usize, d2: usize, dim: usize) -> Self {
        let mut free = Vec::new();
        let mut slot = vec![None; d1 * d2 * 2];
        for i in 0..d1 {
            for j in 0..d2 {
                for k in 0..2 {
                    if is_free_entry(d1, d2, i, j, k) {
                        slot[(i * d2 + j) * 2 + k] = Some(free.len());
                        free.push((i, j, k));
                    }
                }
            }
        }
        IndexMap {
            d1,
            d2,
            dim,
            free,
            slot,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_pixels(&self) -> usize {
        self.d1 * self.d2
    }

    pub fn n_free_dual(&self) -> usize {
        self.free.len()
    }

    /// Order of the Newton system.
    pub fn order(&self) -> usize {
        self.dim * (self.n_pixels() + self.n_free_dual())
    }

    #[inline]
    pub fn primal_row(&self, i: usize, j: usize) -> usize {
        (i * self.d2 + j) * self.dim
    }

    /// First row of dual entry `(i, j, k)`, or `None` on the boundary.
    #[inline]
    pub fn dual_row(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        self.slot[(i * self.d2 + j) * 2 + k].map(|e| (self.n_pixels() + e) * self.dim)
    }

    pub fn free_entries(&self) -> &[(usize, usize, usize)] {
        &self.free
    }

    pub fn locate(&self, row: usize) -> Option<Slot> {
        let b = row % self.dim;
        let block = row / self.dim;
        if block < self.n_pixels() {
            Some(Slot::Primal {
                i: block / self.d2,
                j: block % self.d2,
                b,
            })
        } else {
            self.free
                .get(block - self.n_pixels())
                .map(|&(i, j, k)| Slot::Dual { i, j, k, b })
        }
    }
}

/// Dense Newton system `V d = −X` in stacked orthonormal coordinates.
#[derive(Clone, Debug)]
pub struct NewtonSystem<T> {
    pub matrix: DenseMatrix<T>,
    pub rhs: Vec<T>,
    pub index_map: IndexMap,
}

/// Intermediate points of the primal component at one pixel.
#[derive(Clone, Copy, Debug)]
struct PixelChain<P, V> {
    /// `P_{p←m} w`, the transported dual contribution.
    z: V,
    /// `exp_p z`.
    r: P,
    /// Data prox of `r`.
    s: P,
    /// `−log_p s`.
    x1: V,
}

/// Coordinates (row-major `dim × dim`) of the per-pixel blocks.
struct PixelBlocks<T> {
    /// Primal-primal block.
    pp: Vec<T>,
    /// Map from a dual contribution `δw` at `m` to the primal residual.
    k: Vec<T>,
    /// `D_p log_m p` expressed at `m`.
    g: Vec<T>,
}

/// A denoising problem: data image and model parameters.
#[derive(Clone, Debug)]
pub struct TvProblem<T: Real, M: Manifold<T>> {
    pub data: PrimalImage<T, M>,
    pub params: TvParams<T, M>,
}

impl<T: Real, M: Manifold<T>> TvProblem<T, M> {
    pub fn new(data: PrimalImage<T, M>, params: TvParams<T, M>) -> Result<Self, ModelError> {
        params.validate()?;
        for (idx, p) in data.iter().enumerate() {
            let (i, j) = data.coords_of(idx);
            M::validate(p).map_err(ModelError::at(i, j))?;
        }
        Ok(TvProblem { data, params })
    }

    pub fn shape(&self) -> [usize; 2] {
        self.data.shape()
    }

    pub fn index_map(&self) -> IndexMap {
        IndexMap::new(self.data.d1(), self.data.d2(), M::DIM)
    }

    pub fn zero_dual(&self) -> DualField<M::Tangent> {
        DualField::filled(self.data.d1(), self.data.d2(), M::Tangent::zero())
    }

    pub fn cost(&self, p: &PrimalImage<T, M>) -> Result<T, ModelError> {
        cost::<T, M>(p, &self.data, &self.params)
    }

    fn check_shapes(
        &self,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
    ) -> Result<(), ModelError> {
        let s = self.data.shape();
        if p.shape() != s || [xi.d1(), xi.d2()] != s {
            return Err(ModelError::Shape(format!(
                "data {:?}, iterate {:?}, dual {:?}",
                s,
                p.shape(),
                xi.shape()
            )));
        }
        Ok(())
    }

    /// `log_m p` pixelwise.
    pub fn log_base(&self, p: &PrimalImage<T, M>) -> Result<TangentGrid<T, M>, ModelError> {
        let m = &self.params.base_point;
        let data = (0..p.len())
            .map(|idx| {
                let (i, j) = p.coords_of(idx);
                M::log(m, p.get(i, j)).map_err(ModelError::at(i, j))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Grid::from_vec(p.d1(), p.d2(), data))
    }

    /// Argument `ξ + τ A[log_m p]` of the dual prox.
    pub fn dual_argument(
        &self,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
    ) -> Result<DualField<M::Tangent>, ModelError> {
        let a = forward_diff(&self.log_base(p)?);
        let tau = self.params.tau;
        let mut out = xi.clone();
        for (o, ai) in out.as_mut_slice().iter_mut().zip(a.as_slice()) {
            *o = *o + *ai * tau;
        }
        Ok(out)
    }

    /// `−σ A*ξ`, the dual contribution to the primal step, at `m`.
    pub fn primal_push(&self, xi: &DualField<M::Tangent>) -> Grid<M::Tangent> {
        let sigma = self.params.sigma;
        forward_diff_adjoint(xi).map(|v| *v * (-sigma))
    }

    fn chain(
        &self,
        p: &M::Point,
        h: &M::Point,
        w: &M::Tangent,
    ) -> Result<PixelChain<M::Point, M::Tangent>, GeometryError> {
        let m = &self.params.base_point;
        let z = M::transport(m, p, w)?;
        let r = M::exp(p, &z);
        let s = geodesic::<T, M>(&r, h, self.params.data_weight())?;
        let x1 = -M::log(p, &s)?;
        Ok(PixelChain { z, r, s, x1 })
    }

    fn chains(
        &self,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
    ) -> Result<Vec<PixelChain<M::Point, M::Tangent>>, ModelError> {
        let push = self.primal_push(xi);
        (0..p.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = p.coords_of(idx);
                self.chain(p.get(i, j), self.data.get(i, j), push.get(i, j))
                    .map_err(ModelError::at(i, j))
            })
            .collect()
    }

    /// The reduced optimality vector field
    /// `X₁ = −log_p prox_σF(exp_p P_{p←m}(−σA*ξ))`,
    /// `X₂ = ξ − prox_τG*(ξ + τA[log_m p])`.
    pub fn vector_field(
        &self,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
    ) -> Result<FieldPair<M::Tangent>, ModelError> {
        self.check_shapes(p, xi)?;
        let chains = self.chains(p, xi)?;
        let primal = Grid::from_vec(p.d1(), p.d2(), chains.iter().map(|c| c.x1).collect());
        let arg = self.dual_argument(p, xi)?;
        let prm = &self.params;
        let pr = prox_dual::<T, M>(&arg, &prm.base_point, prm.tau, prm.beta, prm.q);
        let mut dual = xi.clone();
        for (d, v) in dual.as_mut_slice().iter_mut().zip(pr.as_slice()) {
            *d = *d - *v;
        }
        Ok(FieldPair { primal, dual })
    }

    /// `(Σ ‖X₁‖²_p + Σ ‖X₂‖²_m)^{1/2}`.
    pub fn field_norm(&self, p: &PrimalImage<T, M>, x: &FieldPair<M::Tangent>) -> T {
        let m = &self.params.base_point;
        let mut s = T::zero();
        for (pi, v) in p.iter().zip(x.primal.iter()) {
            s += M::inner(pi, v, v);
        }
        for v in x.dual.as_slice() {
            s += M::inner(m, v, v);
        }
        s.sqrt()
    }

    /// Stacked coordinates of a field pair in the Newton row order.
    pub fn field_coords(&self, p: &PrimalImage<T, M>, x: &FieldPair<M::Tangent>) -> Vec<T> {
        let map = self.index_map();
        let m = &self.params.base_point;
        let onb_m = M::onb(m);
        let mut out = vec![T::zero(); map.order()];
        for idx in 0..p.len() {
            let (i, j) = p.coords_of(idx);
            let pi = p.get(i, j);
            let c = M::coords(pi, &M::onb(pi), x.primal.get(i, j));
            let r = map.primal_row(i, j);
            out[r..r + M::DIM].copy_from_slice(&c);
        }
        for &(i, j, k) in map.free_entries() {
            let c = M::coords(m, &onb_m, x.dual.get(i, j, k));
            let r = map.dual_row(i, j, k).expect("free entry");
            out[r..r + M::DIM].copy_from_slice(&c);
        }
        out
    }

    /// Inverse of [`TvProblem::field_coords`].
    pub fn field_from_coords(&self, p: &PrimalImage<T, M>, c: &[T]) -> FieldPair<M::Tangent> {
        let map = self.index_map();
        let onb_m = M::onb(&self.params.base_point);
        let primal = Grid::from_fn(p.d1(), p.d2(), |i, j| {
            let r = map.primal_row(i, j);
            from_coords(&M::onb(p.get(i, j)), &c[r..r + M::DIM])
        });
        let dual = DualField::from_fn(p.d1(), p.d2(), |i, j, k| match map.dual_row(i, j, k) {
            Some(r) => from_coords(&onb_m, &c[r..r + M::DIM]),
            None => M::Tangent::zero(),
        });
        FieldPair { primal, dual }
    }

    /// Applies a Newton direction: `p ← exp_p(δp)`, `ξ ← ξ + δξ`.
    pub fn apply_step(
        &self,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
        d: &FieldPair<M::Tangent>,
    ) -> (PrimalImage<T, M>, DualField<M::Tangent>) {
        let data: Vec<M::Point> = p
            .as_slice()
            .par_iter()
            .zip(d.primal.as_slice())
            .map(|(pi, v)| M::exp(pi, v))
            .collect();
        let mut xi_new = xi.clone();
        for (a, b) in xi_new.as_mut_slice().iter_mut().zip(d.dual.as_slice()) {
            *a = *a + *b;
        }
        (Grid::from_vec(p.d1(), p.d2(), data), xi_new)
    }

    /// Primal residual change for a dual contribution `δw` at `m`.
    fn k_apply(
        &self,
        p: &M::Point,
        h: &M::Point,
        c: &PixelChain<M::Point, M::Tangent>,
        dw: &M::Tangent,
    ) -> Result<M::Tangent, GeometryError> {
        let m = &self.params.base_point;
        let t = self.params.data_weight();
        let dz = M::transport(m, p, dw)?;
        let dr = d_exp_arg::<T, M>(p, &c.z, &dz);
        let ds = d_geodesic_start::<T, M>(&c.r, h, t, &dr)?;
        Ok(-d_log_arg::<T, M>(p, &c.s, &ds)?)
    }

    /// Covariant derivative of `X₁` at one pixel in direction `y`.
    fn pp_apply(
        &self,
        p: &M::Point,
        h: &M::Point,
        w: &M::Tangent,
        c: &PixelChain<M::Point, M::Tangent>,
        y: &M::Tangent,
    ) -> Result<M::Tangent, GeometryError> {
        let m = &self.params.base_point;
        let t = self.params.data_weight();
        let dz = d_transport_target::<T, M>(m, p, w, y)?;
        let dr = d_exp_base::<T, M>(p, &c.z, y) + d_exp_arg::<T, M>(p, &c.z, &dz);
        let ds = d_geodesic_start::<T, M>(&c.r, h, t, &dr)?;
        Ok(-d_log_base::<T, M>(p, &c.s, y)? - d_log_arg::<T, M>(p, &c.s, &ds)?)
    }

    fn pixel_blocks(
        &self,
        p: &M::Point,
        h: &M::Point,
        w: &M::Tangent,
        c: &PixelChain<M::Point, M::Tangent>,
        onb_m: &[M::Tangent],
    ) -> Result<PixelBlocks<T>, GeometryError> {
        let m = &self.params.base_point;
        let dim = M::DIM;
        let onb_p = M::onb(p);
        let mut pp = vec![T::zero(); dim * dim];
        let mut k = vec![T::zero(); dim * dim];
        let mut g = vec![T::zero(); dim * dim];
        for b in 0..dim {
            let col = M::coords(p, &onb_p, &self.pp_apply(p, h, w, c, &onb_p[b])?);
            let kcol = M::coords(p, &onb_p, &self.k_apply(p, h, c, &onb_m[b])?);
            let gcol = M::coords(m, onb_m, &d_log_arg::<T, M>(m, p, &onb_p[b])?);
            for r in 0..dim {
                pp[r * dim + b] = col[r];
                k[r * dim + b] = kcol[r];
                g[r * dim + b] = gcol[r];
            }
        }
        Ok(PixelBlocks { pp, k, g })
    }

    /// Dual prox derivative at one pixel as a `2·dim × 2·dim` coordinate
    /// matrix in `onb(m)`; rows and columns of boundary channels are zero.
    fn pixel_prox_jacobian(
        &self,
        arg: &[M::Tangent],
        free: [bool; 2],
        onb_m: &[M::Tangent],
    ) -> Vec<T> {
        let prm = &self.params;
        let m = &prm.base_point;
        let dim = M::DIM;
        let n = 2 * dim;
        let thr = prm.dual_threshold();
        let mut jac = vec![T::zero(); n * n];
        for kc in 0..2 {
            if !free[kc] {
                continue;
            }
            for b in 0..dim {
                let mut eta = [M::Tangent::zero(); 2];
                eta[kc] = onb_m[b];
                let out = d_prox_dual_pixel::<T, M>(m, arg, &eta, free, thr, prm.q);
                for kr in 0..2 {
                    let c = M::coords(m, onb_m, &out[kr]);
                    for r in 0..dim {
                        jac[(kr * dim + r) * n + kc * dim + b] = c[r];
                    }
                }
            }
        }
        jac
    }

    /// Assembles the Newton matrix and right-hand side `−X` at `(p, ξ)`.
    pub fn newton_system(
        &self,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
    ) -> Result<NewtonSystem<T>, ModelError> {
        self.check_shapes(p, xi)?;
        let map = self.index_map();
        let (d1, d2) = (p.d1(), p.d2());
        let dim = M::DIM;
        let prm = &self.params;
        let m = &prm.base_point;
        let onb_m = M::onb(m);
        let push = self.primal_push(xi);
        let chains = self.chains(p, xi)?;
        let blocks: Vec<PixelBlocks<T>> = (0..p.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = p.coords_of(idx);
                self.pixel_blocks(p.get(i, j), self.data.get(i, j), push.get(i, j), &chains[idx], &onb_m)
                    .map_err(ModelError::at(i, j))
            })
            .collect::<Result<_, _>>()?;
        let arg = self.dual_argument(p, xi)?;
        let jacs: Vec<Vec<T>> = (0..p.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = p.coords_of(idx);
                let free = [is_free_entry(d1, d2, i, j, 0), is_free_entry(d1, d2, i, j, 1)];
                self.pixel_prox_jacobian(arg.pixel(i, j), free, &onb_m)
            })
            .collect();

        let n = map.order();
        let mut a = DenseMatrix::zeros(n, n);
        let sigma = prm.sigma;
        let tau = prm.tau;
        let n2 = 2 * dim;

        for idx in 0..p.len() {
            let (i, j) = p.coords_of(idx);
            let row = map.primal_row(i, j);
            let blk = &blocks[idx];
            for r in 0..dim {
                for c in 0..dim {
                    a[(row + r, row + c)] = blk.pp[r * dim + c];
                }
            }
        }

        // Primal rows, dual columns: δξ_e moves δw by +σ at the source pixel
        // and by −σ at the neighbor.
        for &(i, j, k) in map.free_entries() {
            let col = map.dual_row(i, j, k).expect("free entry");
            let (a_i, a_j) = neighbor(i, j, k);
            for (pi, pj, sign) in [(i, j, sigma), (a_i, a_j, -sigma)] {
                let pidx = p.index(pi, pj);
                let row = map.primal_row(pi, pj);
                let kb = &blocks[pidx].k;
                for r in 0..dim {
                    for c in 0..dim {
                        a[(row + r, col + c)] = sign * kb[r * dim + c];
                    }
                }
            }
        }

        // Dual rows, primal columns: −τ J A[G] with G = D_p log_m p.
        for idx in 0..p.len() {
            let (i, j) = p.coords_of(idx);
            let col = map.primal_row(i, j);
            let g = &blocks[idx].g;
            // Channels receiving ±G: (pixel, channel, sign).
            let mut touched: Vec<(usize, usize, usize, T)> = Vec::with_capacity(4);
            for k in 0..2 {
                if is_free_entry(d1, d2, i, j, k) {
                    touched.push((i, j, k, -T::one()));
                }
            }
            if i > 0 {
                touched.push((i - 1, j, 0, T::one()));
            }
            if j > 0 {
                touched.push((i, j - 1, 1, T::one()));
            }
            for &(ti, tj, tk, sign) in &touched {
                let jac = &jacs[p.index(ti, tj)];
                for kr in 0..2 {
                    let Some(row) = map.dual_row(ti, tj, kr) else {
                        continue;
                    };
                    for r in 0..dim {
                        for c in 0..dim {
                            let mut s = T::zero();
                            for l in 0..dim {
                                s += jac[(kr * dim + r) * n2 + tk * dim + l] * g[l * dim + c];
                            }
                            a[(row + r, col + c)] += -tau * sign * s;
                        }
                    }
                }
            }
        }

        // Dual-dual: I − J, block diagonal over pixels.
        for idx in 0..p.len() {
            let (i, j) = p.coords_of(idx);
            let jac = &jacs[idx];
            for kr in 0..2 {
                let Some(row) = map.dual_row(i, j, kr) else {
                    continue;
                };
                for kc in 0..2 {
                    let Some(col) = map.dual_row(i, j, kc) else {
                        continue;
                    };
                    for r in 0..dim {
                        for c in 0..dim {
                            let id = if kr == kc && r == c { T::one() } else { T::zero() };
                            a[(row + r, col + c)] = id - jac[(kr * dim + r) * n2 + kc * dim + c];
                        }
                    }
                }
            }
        }

        let x = self.assemble_field(p, xi, &chains, &arg);
        let rhs = self.field_coords(p, &x).into_iter().map(|v| -v).collect();
        Ok(NewtonSystem {
            matrix: a,
            rhs,
            index_map: map,
        })
    }

    /// Central finite-difference approximation of the Newton matrix: primal
    /// columns vary `p` along geodesics and transport the perturbed `X₁`
    /// back before taking coordinates.
    pub fn finite_difference_matrix(
        &self,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
        h: T,
    ) -> Result<DenseMatrix<T>, ModelError> {
        let map = self.index_map();
        let n = map.order();
        let dim = M::DIM;
        let onb_m = M::onb(&self.params.base_point);
        let half_inv = T::one() / (T::lit(2.0) * h);
        let mut a = DenseMatrix::zeros(n, n);
        for idx in 0..p.len() {
            let (i, j) = p.coords_of(idx);
            let pi = *p.get(i, j);
            let onb_p = M::onb(&pi);
            for b in 0..dim {
                let eval = |eps: T| -> Result<Vec<T>, ModelError> {
                    let mut q = p.clone();
                    let moved = M::exp(&pi, &(onb_p[b] * eps));
                    *q.get_mut(i, j) = moved;
                    let mut x = self.vector_field(&q, xi)?;
                    let back = M::transport(&moved, &pi, x.primal.get(i, j))
                        .map_err(ModelError::at(i, j))?;
                    *x.primal.get_mut(i, j) = back;
                    Ok(self.field_coords(p, &x))
                };
                let plus = eval(h)?;
                let minus = eval(-h)?;
                let col: Vec<T> = plus.iter().zip(&minus).map(|(a, b)| (*a - *b) * half_inv).collect();
                a.set_column(map.primal_row(i, j) + b, &col);
            }
        }
        for &(i, j, k) in map.free_entries() {
            for b in 0..dim {
                let eval = |eps: T| -> Result<Vec<T>, ModelError> {
                    let mut z = xi.clone();
                    *z.get_mut(i, j, k) = *z.get(i, j, k) + onb_m[b] * eps;
                    Ok(self.field_coords(p, &self.vector_field(p, &z)?))
                };
                let plus = eval(h)?;
                let minus = eval(-h)?;
                let col: Vec<T> = plus.iter().zip(&minus).map(|(a, b)| (*a - *b) * half_inv).collect();
                a.set_column(map.dual_row(i, j, k).expect("free entry") + b, &col);
            }
        }
        Ok(a)
    }

    fn assemble_field(
        &self,
        p: &PrimalImage<T, M>,
        xi: &DualField<M::Tangent>,
        chains: &[PixelChain<M::Point, M::Tangent>],
        arg: &DualField<M::Tangent>,
    ) -> FieldPair<M::Tangent> {
        let prm = &self.params;
        let primal = Grid::from_vec(p.d1(), p.d2(), chains.iter().map(|c| c.x1).collect());
        let (d1, d2) = (p.d1(), p.d2());
        let thr = prm.dual_threshold();
        let dual = DualField::from_fn(d1, d2, |i, j, k| {
            let free = [is_free_entry(d1, d2, i, j, 0), is_free_entry(d1, d2, i, j, 1)];
            let pr = prox_dual_pixel::<T, M>(&prm.base_point, arg.pixel(i, j), free, thr, prm.q);
            *xi.get(i, j, k) - pr[k]
        });
        FieldPair { primal, dual }
    }
}
