//! Dense tensors, PARAFAC factors and the contractions used by the Gibbs kernels.
//!
//! Storage is row-major with the last index varying fastest. Every module
//! (samplers, file formats, oracles) shares this single vectorization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A D-way real array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let expected = dims.iter().product::<usize>();
        if values.len() != expected {
            return Err(Error::Structure(format!(
                "tensor with dims {dims:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            values: vec![0.0; dims.iter().product()],
        })
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for v in t.values.iter_mut() {
            *v = f(&idx);
            increment_index(&mut idx, dims);
        }
        Ok(t)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &p)| acc * p + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.offset(idx)]
    }

    pub fn frobenius_sq(&self) -> f64 {
        compensated_dot(&self.values, &self.values)
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::Structure("tensor needs at least one mode".into()));
    }
    if dims.contains(&0) {
        return Err(Error::Structure(format!("zero-length mode in dims {dims:?}")));
    }
    Ok(())
}

fn increment_index(idx: &mut [usize], dims: &[usize]) {
    for k in (0..dims.len()).rev() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return;
        }
        idx[k] = 0;
    }
}

/// Rank-R set of margin vectors; margin `(j, r)` has length `dims[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParafacFactors {
    dims: Vec<usize>,
    rank: usize,
    /// Indexed `r * D + j`.
    margins: Vec<Vec<f64>>,
}

impl ParafacFactors {
    /// `margins[r][j]` is the mode-`j` vector of component `r`.
    pub fn new(dims: Vec<usize>, margins: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        check_dims(&dims)?;
        if margins.is_empty() {
            return Err(Error::Structure("PARAFAC rank must be at least 1".into()));
        }
        let rank = margins.len();
        let mut flat = Vec::with_capacity(rank * dims.len());
        for (r, comp) in margins.into_iter().enumerate() {
            if comp.len() != dims.len() {
                return Err(Error::Structure(format!(
                    "component {r} has {} margins, expected {}",
                    comp.len(),
                    dims.len()
                )));
            }
            for (j, m) in comp.into_iter().enumerate() {
                if m.len() != dims[j] {
                    return Err(Error::Structure(format!(
                        "margin ({j},{r}) has length {}, expected {}",
                        m.len(),
                        dims[j]
                    )));
                }
                flat.push(m);
            }
        }
        Ok(Self {
            dims,
            rank,
            margins: flat,
        })
    }

    pub fn zeros(dims: &[usize], rank: usize) -> Result<Self> {
        check_dims(dims)?;
        if rank == 0 {
            return Err(Error::Structure("PARAFAC rank must be at least 1".into()));
        }
        let margins = (0..rank).flat_map(|_| dims.iter().map(|&p| vec![0.0; p])).collect();
        Ok(Self {
            dims: dims.to_vec(),
            rank,
            margins,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn margin(&self, j: usize, r: usize) -> &[f64] {
        &self.margins[r * self.dims.len() + j]
    }

    pub fn margin_mut(&mut self, j: usize, r: usize) -> &mut [f64] {
        let d = self.dims.len();
        &mut self.margins[r * d + j]
    }

    pub fn set_margin(&mut self, j: usize, r: usize, values: &[f64]) -> Result<()> {
        if j >= self.ndim() || r >= self.rank {
            return Err(Error::Structure(format!("margin index ({j},{r}) out of range")));
        }
        let m = self.margin_mut(j, r);
        if m.len() != values.len() {
            return Err(Error::Structure(format!(
                "margin ({j},{r}) has length {}, got {}",
                m.len(),
                values.len()
            )));
        }
        m.copy_from_slice(values);
        Ok(())
    }

    /// Outer product of the margins of component `r` alone.
    pub fn component(&self, r: usize) -> DenseTensor {
        let mut cells = vec![1.0];
        for j in 0..self.ndim() {
            let m = self.margin(j, r);
            let mut next = Vec::with_capacity(cells.len() * m.len());
            for &c in &cells {
                next.extend(m.iter().map(|&b| c * b));
            }
            cells = next;
        }
        DenseTensor {
            dims: self.dims.clone(),
            values: cells,
        }
    }
}

/// Sum of the R rank-1 outer products.
pub fn parafac_compose(factors: &ParafacFactors) -> DenseTensor {
    let mut out = factors.component(0);
    for r in 1..factors.rank() {
        let c = factors.component(r);
        for (o, v) in out.values.iter_mut().zip(c.values) {
            *o += v;
        }
    }
    out
}

/// Element-wise product sum of two tensors of equal shape.
pub fn tensor_inner(x: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if x.dims != b.dims {
        return Err(Error::Structure(format!(
            "inner product of dims {:?} and {:?}",
            x.dims, b.dims
        )));
    }
    Ok(compensated_dot(&x.values, &b.values))
}

/// Row `h` of the mode-`j` design for component `r`: `h · β_j^{(r)}` equals
/// `⟨X, β_1^{(r)} ∘ ⋯ ∘ β_D^{(r)}⟩`. Writes into `out` (length `p_j`).
pub fn mode_design_row_into(x: &DenseTensor, factors: &ParafacFactors, j: usize, r: usize, out: &mut [f64]) {
    let dims = factors.dims();
    debug_assert_eq!(x.dims(), dims);
    let pj = dims[j];
    let pre: usize = dims[..j].iter().product();
    let post: usize = dims[j + 1..].iter().product();
    let wpre = outer_of(factors, r, 0..j);
    let wpost = outer_of(factors, r, j + 1..dims.len());
    out.iter_mut().for_each(|h| *h = 0.0);
    let xs = x.values();
    if post == 1 {
        // Trailing modes all have length 1; their margins reduce to a scalar.
        let tail = wpost[0];
        for (a, &wa) in wpre.iter().enumerate() {
            let wa = wa * tail;
            if wa == 0.0 {
                continue;
            }
            let row = &xs[a * pj..(a + 1) * pj];
            for (h, &v) in out.iter_mut().zip(row) {
                *h += wa * v;
            }
        }
    } else {
        for (a, &wa) in wpre.iter().enumerate().take(pre) {
            if wa == 0.0 {
                continue;
            }
            let block = &xs[a * pj * post..(a + 1) * pj * post];
            for (h, fiber) in out.iter_mut().zip(block.chunks_exact(post)) {
                *h += wa * plain_dot(fiber, &wpost);
            }
        }
    }
}

pub fn mode_design_row(x: &DenseTensor, factors: &ParafacFactors, j: usize, r: usize) -> Result<Vec<f64>> {
    if x.dims() != factors.dims() {
        return Err(Error::Structure(format!(
            "covariate dims {:?} do not match factor dims {:?}",
            x.dims(),
            factors.dims()
        )));
    }
    if j >= factors.ndim() || r >= factors.rank() {
        return Err(Error::Structure(format!("mode/component ({j},{r}) out of range")));
    }
    let mut h = vec![0.0; factors.dims()[j]];
    mode_design_row_into(x, factors, j, r, &mut h);
    Ok(h)
}

/// Flattened outer product of margins `modes` of component `r` (`[1.0]` when empty).
fn outer_of(factors: &ParafacFactors, r: usize, modes: std::ops::Range<usize>) -> Vec<f64> {
    let mut w = vec![1.0];
    for l in modes {
        let m = factors.margin(l, r);
        let mut next = Vec::with_capacity(w.len() * m.len());
        for &c in &w {
            next.extend(m.iter().map(|&b| c * b));
        }
        w = next;
    }
    w
}

/// `⟨X, B_r⟩` without materializing the component.
pub fn rank1_inner(x: &DenseTensor, factors: &ParafacFactors, r: usize) -> f64 {
    let last = factors.ndim() - 1;
    let mut h = vec![0.0; factors.dims()[last]];
    mode_design_row_into(x, factors, last, r, &mut h);
    compensated_dot(&h, factors.margin(last, r))
}

/// `⟨X, B⟩ + z·γ` summed over rank-1 components.
pub fn linear_predictor(x: &DenseTensor, z: &[f64], factors: &ParafacFactors, gamma: &[f64]) -> Result<f64> {
    if x.dims() != factors.dims() {
        return Err(Error::Structure(format!(
            "covariate dims {:?} do not match factor dims {:?}",
            x.dims(),
            factors.dims()
        )));
    }
    if z.len() != gamma.len() {
        return Err(Error::Structure(format!(
            "scalar covariates have length {}, coefficients {}",
            z.len(),
            gamma.len()
        )));
    }
    let mut acc = NeumaierSum::default();
    for r in 0..factors.rank() {
        acc.add(rank1_inner(x, factors, r));
    }
    acc.add(compensated_dot(z, gamma));
    Ok(acc.value())
}

#[inline]
pub(crate) fn plain_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product with Neumaier compensation.
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_factors(rng: &mut ChaCha8Rng, dims: &[usize], rank: usize) -> ParafacFactors {
        let margins = (0..rank)
            .map(|_| {
                dims.iter()
                    .map(|&p| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        ParafacFactors::new(dims.to_vec(), margins).unwrap()
    }

    fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
        DenseTensor::from_fn(dims, |_| rng.random_range(-2.0..2.0)).unwrap()
    }

    #[test]
    fn rank_one_outer_product() {
        let f = ParafacFactors::new(vec![2, 2], vec![vec![vec![1.0, 2.0], vec![3.0, 4.0]]]).unwrap();
        assert_eq!(parafac_compose(&f).values(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn zero_margin_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut f = random_factors(&mut rng, &[3, 4, 2], 3);
        for r in 0..3 {
            let j = r % 3;
            let p = f.dims()[j];
            f.set_margin(j, r, &vec![0.0; p]).unwrap();
        }
        assert!(parafac_compose(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn compose_matches_explicit_outer_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_factors(&mut rng, &[5, 7], 3);
        let b = parafac_compose(&f);
        for i in 0..5 {
            for k in 0..7 {
                let mut expect = 0.0;
                for r in 0..3 {
                    expect += f.margin(0, r)[i] * f.margin(1, r)[k];
                }
                assert!((b.get(&[i, k]) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, &[4, 4]);
        let y = random_tensor(&mut rng, &[4, 4]);
        let zero = DenseTensor::zeros(&[4, 4]).unwrap();
        assert_eq!(tensor_inner(&x, &zero).unwrap(), 0.0);
        let fro: f64 = x.values().iter().map(|v| v * v).sum();
        assert!((tensor_inner(&x, &x).unwrap() - fro).abs() < 1e-12);
        let naive: f64 = x.values().iter().zip(y.values()).map(|(a, b)| a * b).sum();
        assert!((tensor_inner(&x, &y).unwrap() - naive).abs() < 1e-12);
        let other = DenseTensor::zeros(&[4, 5]).unwrap();
        assert!(matches!(tensor_inner(&x, &other), Err(Error::Structure(_))));
    }

    #[test]
    fn design_row_indicator_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tensor(&mut rng, &[6, 5]);
        let mut e1 = vec![0.0; 5];
        e1[0] = 1.0;
        let f = ParafacFactors::new(vec![6, 5], vec![vec![vec![1.0; 6], e1]]).unwrap();
        let h = mode_design_row(&x, &f, 0, 0).unwrap();
        let col: Vec<f64> = (0..6).map(|i| x.get(&[i, 0])).collect();
        assert_eq!(h, col);
    }

    #[test]
    fn design_row_zero_covariate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_factors(&mut rng, &[3, 4, 5], 2);
        let x = DenseTensor::zeros(&[3, 4, 5]).unwrap();
        for j in 0..3 {
            assert!(mode_design_row(&x, &f, j, 1).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn design_row_identity_all_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for dims in [vec![7usize], vec![6, 9], vec![3, 4, 5]] {
            let x = random_tensor(&mut rng, &dims);
            let f = random_factors(&mut rng, &dims, 3);
            for r in 0..3 {
                let direct = tensor_inner(&x, &f.component(r)).unwrap();
                for j in 0..dims.len() {
                    let h = mode_design_row(&x, &f, j, r).unwrap();
                    assert!((compensated_dot(&h, f.margin(j, r)) - direct).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn linear_predictor_cases() {
        let f = ParafacFactors::zeros(&[3, 3], 2).unwrap();
        let x = DenseTensor::from_fn(&[3, 3], |i| (i[0] + i[1]) as f64).unwrap();
        assert_eq!(linear_predictor(&x, &[1.0, 2.0], &f, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(linear_predictor(&x, &[1.0, 2.0], &f, &[0.5, 1.0]).unwrap(), 2.5);
        assert!(linear_predictor(&x, &[1.0], &f, &[0.5, 1.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_tensor(&mut rng, &[8, 6]);
        let f = random_factors(&mut rng, &[8, 6], 3);
        let z = [1.0, -0.3, 2.0];
        let g = [0.2, 0.7, -1.1];
        let naive = tensor_inner(&x, &parafac_compose(&f)).unwrap() + z.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        assert!((linear_predictor(&x, &z, &f, &g).unwrap() - naive).abs() < 1e-10);
    }

    #[test]
    fn malformed_factors_rejected() {
        assert!(ParafacFactors::new(vec![2, 3], vec![vec![vec![1.0, 2.0], vec![1.0]]]).is_err());
        assert!(ParafacFactors::new(vec![2, 3], vec![vec![vec![1.0, 2.0]]]).is_err());
        assert!(ParafacFactors::new(vec![2, 3], vec![]).is_err());
        assert!(DenseTensor::new(vec![], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn trailing_unit_modes_keep_their_margin() {
        let f = ParafacFactors::new(vec![2, 1, 1], vec![vec![vec![1.0, 2.0], vec![3.0], vec![-0.5]]]).unwrap();
        let x = DenseTensor::new(vec![2, 1, 1], vec![4.0, 5.0]).unwrap();
        // ⟨X, B⟩ = (4 + 10) * 3 * -0.5
        assert_eq!(rank1_inner(&x, &f, 0), -21.0);
        assert_eq!(mode_design_row(&x, &f, 0, 0).unwrap(), vec![-6.0, -7.5]);
    }
}
