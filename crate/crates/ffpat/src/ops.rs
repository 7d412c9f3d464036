//! Matrix-free linear operators with weighted inner products.
//!
//! Operators are characterized only by their action `apply` and a declared
//! adjoint `apply_adjoint`; nothing is ever assembled. Each operator names
//! its domain and range as a [`Space`]: a tensor shape plus the inner
//! product taken there. Numerical verification lives here too: the adjoint
//! dot-product test and a power-iteration norm estimate, both driven by a
//! seeded counter-based PRNG so every report is reproducible.

use std::fmt;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FfpatError, Result};

/// Guard added to dot-test denominators so the zero operator stays well-defined.
const DOT_TEST_EPS: f64 = 1e-300;

/// Symmetric positive transform defining a non-diagonal inner product.
pub type GramFn = Arc<dyn Fn(&ArrayD<f64>) -> ArrayD<f64> + Send + Sync>;

/// A vector space: tensor shape plus the inner product taken on it.
///
/// The inner product is `<u, v> = measure * sum_i w_i (G u)_i v_i` with
/// optional per-sample weights `w` (all strictly positive) and an optional
/// symmetric positive-semidefinite Gram transform `G`. Uniform weight 1 and
/// `G = I` are the defaults.
#[derive(Clone)]
pub struct Space {
    shape: Vec<usize>,
    measure: f64,
    weight: Option<Arc<ArrayD<f64>>>,
    gram: Option<GramFn>,
}

impl fmt::Debug for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Space")
            .field("shape", &self.shape)
            .field("measure", &self.measure)
            .field("weighted", &self.weight.is_some())
            .field("gram", &self.gram.is_some())
            .finish()
    }
}

impl Space {
    /// Uniform-weight space with the given cell measure.
    pub fn uniform(shape: &[usize], measure: f64) -> Result<Self> {
        if !(measure > 0.0) {
            return Err(FfpatError::Validation(format!(
                "cell measure must be positive, got {measure}"
            )));
        }
        Ok(Space {
            shape: shape.to_vec(),
            measure,
            weight: None,
            gram: None,
        })
    }

    /// Space with a strictly positive per-sample weight field.
    pub fn weighted(shape: &[usize], measure: f64, weight: ArrayD<f64>) -> Result<Self> {
        let mut space = Space::uniform(shape, measure)?;
        if weight.shape() != space.shape.as_slice() {
            return Err(FfpatError::shape(
                &space.shape,
                weight.shape(),
                "space weight",
            ));
        }
        if !weight.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return Err(FfpatError::Validation(
                "space weights must be strictly positive and finite".into(),
            ));
        }
        space.weight = Some(Arc::new(weight));
        Ok(space)
    }

    /// Attach a symmetric positive-semidefinite Gram transform.
    pub fn with_gram(mut self, gram: GramFn) -> Self {
        self.gram = Some(gram);
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self, x: &ArrayD<f64>, context: &str) -> Result<()> {
        if x.shape() != self.shape.as_slice() {
            return Err(FfpatError::shape(&self.shape, x.shape(), context));
        }
        Ok(())
    }

    /// Inner product of the space.
    pub fn inner(&self, u: &ArrayD<f64>, v: &ArrayD<f64>) -> f64 {
        let gu;
        let u_eff = match &self.gram {
            Some(g) => {
                gu = g(u);
                &gu
            }
            None => u,
        };
        let raw: f64 = match &self.weight {
            Some(w) => u_eff
                .iter()
                .zip(v.iter())
                .zip(w.iter())
                .map(|((a, b), w)| w * a * b)
                .sum(),
            None => u_eff.iter().zip(v.iter()).map(|(a, b)| a * b).sum(),
        };
        self.measure * raw
    }

    pub fn norm(&self, u: &ArrayD<f64>) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Seeded standard-normal sample of this space's shape.
    pub fn sample_standard_normal(&self, rng: &mut ChaCha8Rng) -> ArrayD<f64> {
        let data: Vec<f64> = (0..self.len())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        ArrayD::from_shape_vec(IxDyn(&self.shape), data).expect("shape/len agree")
    }
}

/// Matrix-free linear map between two [`Space`]s.
///
/// `apply_adjoint` must be the adjoint of `apply` with respect to the
/// declared inner products; [`dot_test`] measures how well it is. All
/// implementations are pure given immutable operator state, so concurrent
/// read-only invocation is safe.
pub trait LinearOperator: Send + Sync {
    fn domain(&self) -> &Space;
    fn range(&self) -> &Space;
    fn apply(&self, x: &ArrayD<f64>) -> Result<ArrayD<f64>>;
    fn apply_adjoint(&self, y: &ArrayD<f64>) -> Result<ArrayD<f64>>;
}

/// Result of the adjoint dot-product test.
#[derive(Debug, Clone)]
pub struct DotTestReport {
    pub trials: usize,
    /// Max over trials of `|<Au,v> - <u,A*v>| / (||Au|| ||v|| + eps)`.
    pub max_rel_discrepancy: f64,
}

/// Adjoint verification: draws seeded standard-normal `u`, `v` and compares
/// `<A u, v>` in the range against `<u, A* v>` in the domain.
pub fn dot_test(op: &dyn LinearOperator, trials: usize, seed: u64) -> Result<DotTestReport> {
    if trials == 0 {
        return Err(FfpatError::Validation("dot_test needs trials >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel = 0.0_f64;
    for _ in 0..trials {
        let u = op.domain().sample_standard_normal(&mut rng);
        let v = op.range().sample_standard_normal(&mut rng);
        let au = op.apply(&u)?;
        op.range().check(&au, "apply output")?;
        let atv = op.apply_adjoint(&v)?;
        op.domain().check(&atv, "apply_adjoint output")?;
        let lhs = op.range().inner(&au, &v);
        let rhs = op.domain().inner(&u, &atv);
        let denom = op.range().norm(&au) * op.range().norm(&v) + DOT_TEST_EPS;
        max_rel = max_rel.max((lhs - rhs).abs() / denom);
    }
    Ok(DotTestReport {
        trials,
        max_rel_discrepancy: max_rel,
    })
}

/// Operator-norm estimate by power iteration on `A* A`.
///
/// Returns the square root of the Rayleigh quotient after `iters` steps;
/// the estimate is non-decreasing in `iters` up to round-off. The zero
/// operator reports 0.
pub fn power_iter_norm(op: &dyn LinearOperator, iters: usize, seed: u64) -> Result<f64> {
    if iters == 0 {
        return Err(FfpatError::Validation(
            "power_iter_norm needs iters >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = op.domain().sample_standard_normal(&mut rng);
    let mut nv = op.domain().norm(&v);
    if nv == 0.0 {
        return Ok(0.0);
    }
    v.mapv_inplace(|x| x / nv);
    let mut lambda = 0.0_f64;
    for _ in 0..iters {
        let av = op.apply(&v)?;
        let w = op.apply_adjoint(&av)?;
        lambda = op.domain().inner(&w, &v);
        let nw = op.domain().norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w;
        nv = nw;
        v.mapv_inplace(|x| x / nv);
    }
    Ok(lambda.max(0.0).sqrt())
}

/// Composition `outer o inner`; adjoint is the reversed composition.
pub struct ComposedOp {
    inner: Arc<dyn LinearOperator>,
    outer: Arc<dyn LinearOperator>,
}

/// Compose two operators, failing fast on shape mismatch at the seam.
pub fn compose(
    outer: Arc<dyn LinearOperator>,
    inner: Arc<dyn LinearOperator>,
) -> Result<ComposedOp> {
    if outer.domain().shape() != inner.range().shape() {
        return Err(FfpatError::shape(
            outer.domain().shape(),
            inner.range().shape(),
            "composition seam",
        ));
    }
    Ok(ComposedOp { inner, outer })
}

impl LinearOperator for ComposedOp {
    fn domain(&self) -> &Space {
        self.inner.domain()
    }

    fn range(&self) -> &Space {
        self.outer.range()
    }

    fn apply(&self, x: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.outer.apply(&self.inner.apply(x)?)
    }

    fn apply_adjoint(&self, y: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.inner.apply_adjoint(&self.outer.apply_adjoint(y)?)
    }
}

/// Identity on a space; useful as a test stand-in.
pub struct IdentityOp {
    space: Space,
}

impl IdentityOp {
    pub fn new(space: Space) -> Self {
        IdentityOp { space }
    }
}

impl LinearOperator for IdentityOp {
    fn domain(&self) -> &Space {
        &self.space
    }

    fn range(&self) -> &Space {
        &self.space
    }

    fn apply(&self, x: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.space.check(x, "identity input")?;
        Ok(x.clone())
    }

    fn apply_adjoint(&self, y: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.space.check(y, "identity input")?;
        Ok(y.clone())
    }
}

/// Dense reference operator for small verification problems.
///
/// Flattens the domain in row-major order, multiplies by an explicit
/// matrix, and uses the transpose as the adjoint (exact under uniform
/// weights with equal measures).
pub struct DenseOp {
    matrix: ndarray::Array2<f64>,
    domain: Space,
    range: Space,
}

impl DenseOp {
    /// Operator on flat `[ncols] -> [nrows]` spaces with uniform unit measure.
    pub fn from_matrix(matrix: ndarray::Array2<f64>) -> Self {
        let (rows, cols) = matrix.dim();
        DenseOp {
            matrix,
            domain: Space::uniform(&[cols], 1.0).expect("unit measure"),
            range: Space::uniform(&[rows], 1.0).expect("unit measure"),
        }
    }
}

impl LinearOperator for DenseOp {
    fn domain(&self) -> &Space {
        &self.domain
    }

    fn range(&self) -> &Space {
        &self.range
    }

    fn apply(&self, x: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.domain.check(x, "dense op input")?;
        let flat = x.iter().cloned().collect::<ndarray::Array1<f64>>();
        Ok(self.matrix.dot(&flat).into_dyn())
    }

    fn apply_adjoint(&self, y: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.range.check(y, "dense op adjoint input")?;
        let flat = y.iter().cloned().collect::<ndarray::Array1<f64>>();
        Ok(self.matrix.t().dot(&flat).into_dyn())
    }
}

/// Diagonal scaling by a fixed field; self-adjoint under uniform weights.
pub struct DiagOp {
    scale: ArrayD<f64>,
    space: Space,
}

impl DiagOp {
    pub fn new(space: Space, scale: ArrayD<f64>) -> Result<Self> {
        space.check(&scale, "diagonal scale")?;
        Ok(DiagOp { scale, space })
    }
}

impl LinearOperator for DiagOp {
    fn domain(&self) -> &Space {
        &self.space
    }

    fn range(&self) -> &Space {
        &self.space
    }

    fn apply(&self, x: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.space.check(x, "diag op input")?;
        Ok(x * &self.scale)
    }

    fn apply_adjoint(&self, y: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.apply(y)
    }
}
