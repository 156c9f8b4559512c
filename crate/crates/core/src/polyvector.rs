//! PolyVector frame fields: a frame `{±u, ±v}` is stored as the
//! coefficients of `f(z) = z^4 + c2 z^2 + c0`, whose roots are the four
//! directions. The fitting energy is quadratic in `(c0, c2)`.

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optim;
use crate::raster::NarrowBand;

/// Two direction pairs `{±u}` and `{±v}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub u: Complex64,
    pub v: Complex64,
}

impl Frame {
    pub fn new(u: Complex64, v: Complex64) -> Self {
        Self { u, v }
    }

    /// The four roots `u, -u, v, -v`.
    pub fn roots(&self) -> [Complex64; 4] {
        [self.u, -self.u, self.v, -self.v]
    }

    /// Whether `{±u, ±v}` equals `{±other.u, ±other.v}` as sets, up to `tol`
    /// relative to the larger root.
    pub fn same_directions(&self, other: &Frame, tol: f64) -> bool {
        let scale = self.u.norm().max(self.v.norm()).max(other.u.norm()).max(other.v.norm()).max(1e-300);
        let close = |a: Complex64, b: Complex64| (a - b).norm() <= tol * scale || (a + b).norm() <= tol * scale;
        (close(self.u, other.u) && close(self.v, other.v)) || (close(self.u, other.v) && close(self.v, other.u))
    }
}

/// `(c0, c2)` of the frame `{±u, ±v}`.
pub fn frame_to_coeffs(u: Complex64, v: Complex64) -> (Complex64, Complex64) {
    let (u2, v2) = (u * u, v * v);
    (u2 * v2, -(u2 + v2))
}

/// Roots of `z^4 + c2 z^2 + c0`, using principal square roots.
pub fn coeffs_to_frame(c0: Complex64, c2: Complex64) -> Frame {
    let d = (c2 * c2 - 4.0 * c0).sqrt();
    let u2 = -0.5 * (c2 + d);
    let v2 = -0.5 * (c2 - d);
    Frame::new(u2.sqrt(), v2.sqrt())
}

/// `f(z) = z^4 + c2 z^2 + c0`.
#[inline]
pub fn eval_poly(z: Complex64, c0: Complex64, c2: Complex64) -> Complex64 {
    let z2 = z * z;
    z2 * z2 + c2 * z2 + c0
}

/// Coefficient pair per narrow-band pixel, indexed like the band.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVectorField {
    c0: Vec<Complex64>,
    c2: Vec<Complex64>,
}

impl PolyVectorField {
    pub fn new(c0: Vec<Complex64>, c2: Vec<Complex64>) -> Result<Self> {
        if c0.len() != c2.len() {
            return Err(Error::Field(format!(
                "coefficient arrays differ in length ({} vs {})",
                c0.len(),
                c2.len()
            )));
        }
        if c0.iter().chain(&c2).any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Field("non-finite coefficient".into()));
        }
        Ok(Self { c0, c2 })
    }

    /// The same frame at every one of `n` pixels.
    pub fn constant(n: usize, frame: Frame) -> Self {
        let (c0, c2) = frame_to_coeffs(frame.u, frame.v);
        Self {
            c0: vec![c0; n],
            c2: vec![c2; n],
        }
    }

    /// Axis-aligned cross field `u = 1, v = i`, i.e. `(c0, c2) = (-1, 0)`.
    pub fn axis_aligned(n: usize) -> Self {
        Self::constant(n, Frame::new(Complex64::new(1.0, 0.0), Complex64::i()))
    }

    pub fn len(&self) -> usize {
        self.c0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c0.is_empty()
    }

    pub fn c0(&self) -> &[Complex64] {
        &self.c0
    }

    pub fn c2(&self) -> &[Complex64] {
        &self.c2
    }

    #[inline]
    pub fn coeffs(&self, i: usize) -> (Complex64, Complex64) {
        (self.c0[i], self.c2[i])
    }

    pub fn set(&mut self, i: usize, c0: Complex64, c2: Complex64) {
        self.c0[i] = c0;
        self.c2[i] = c2;
    }

    #[inline]
    pub fn frame(&self, i: usize) -> Frame {
        coeffs_to_frame(self.c0[i], self.c2[i])
    }

    pub fn frames(&self) -> Vec<Frame> {
        (0..self.len()).map(|i| self.frame(i)).collect()
    }

    /// Stacked real coordinates `[re c0, im c0, re c2, im c2]` per pixel.
    pub fn to_real(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(4 * self.len());
        for (a, b) in self.c0.iter().zip(&self.c2) {
            x.extend_from_slice(&[a.re, a.im, b.re, b.im]);
        }
        x
    }

    pub fn from_real(x: &[f64]) -> Result<Self> {
        if x.len() % 4 != 0 {
            return Err(Error::Field(format!("{} real unknowns is not a multiple of 4", x.len())));
        }
        let (c0, c2) = x
            .chunks_exact(4)
            .map(|q| (Complex64::new(q[0], q[1]), Complex64::new(q[2], q[3])))
            .unzip();
        Self::new(c0, c2)
    }
}

/// Which minimizer [`optimize`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    Lbfgs,
    /// Conjugate gradients on the (quadratic) energy.
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Smoothness weight.
    pub lambda: f64,
    /// Weight of the soft preference for a root along the gradient.
    pub mu: f64,
    pub lbfgs_history: usize,
    /// Gradient-norm tolerance; `None` means `1e-6` per real unknown.
    pub grad_tol: Option<f64>,
    pub max_iters: usize,
    pub solver: Solver,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda: 50.0,
            mu: 0.1,
            lbfgs_history: 6,
            grad_tol: None,
            max_iters: 10_000,
            solver: Solver::Lbfgs,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("mu must be >= 0, got {}", self.mu)));
        }
        if self.lbfgs_history == 0 {
            return Err(Error::Config("L-BFGS history must be at least 1".into()));
        }
        Ok(())
    }

    /// Effective gradient tolerance for a band of `pixels` pixels.
    pub fn tolerance(&self, pixels: usize) -> f64 {
        self.grad_tol.unwrap_or(1e-6 * (4 * pixels) as f64)
    }
}

/// Precomputed data for evaluating the energy on a band.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    align: Vec<(f64, Complex64)>,
    regular: Vec<(f64, Complex64)>,
    pairs: Vec<(usize, usize, f64)>,
    lambda: f64,
    mu: f64,
}

impl EnergyModel {
    pub fn new(band: &NarrowBand, params: &SolverParams) -> Self {
        let n = band.len();
        let mut align = Vec::with_capacity(n);
        let mut regular = Vec::with_capacity(n);
        for i in 0..n {
            let tau = band.tangent()[i];
            align.push((band.align_weight()[i], tau));
            if band.has_tangent(i) {
                let g = band.gradient()[i];
                regular.push((1.0, g / g.norm()));
            } else {
                regular.push((0.0, Complex64::new(0.0, 0.0)));
            }
        }
        let mut pairs = Vec::new();
        let smooth = band.smooth_weight();
        for (i, &(c, r)) in band.pixels().iter().enumerate() {
            for (nc, nr) in [(c + 1, r), (c, r + 1)] {
                if let Some(j) = band.index_of(nc, nr) {
                    pairs.push((i, j, 0.5 * (smooth[i] + smooth[j])));
                }
            }
        }
        Self {
            align,
            regular,
            pairs,
            lambda: params.lambda,
            mu: params.mu,
        }
    }

    pub fn len(&self) -> usize {
        self.align.len()
    }

    pub fn is_empty(&self) -> bool {
        self.align.is_empty()
    }

    /// Adjacent in-band pixel pairs with their averaged smoothness weight.
    pub fn pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    /// Energy and gradient over stacked real coordinates (see
    /// [`PolyVectorField::to_real`]).
    pub fn eval_real(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let at = |i: usize| {
            (
                Complex64::new(x[4 * i], x[4 * i + 1]),
                Complex64::new(x[4 * i + 2], x[4 * i + 3]),
            )
        };
        let mut e = 0.0;
        for i in 0..self.len() {
            let (c0, c2) = at(i);
            let mut g0 = Complex64::new(0.0, 0.0);
            let mut g2 = Complex64::new(0.0, 0.0);
            for (w, z) in [
                (self.align[i].0, self.align[i].1),
                (self.mu * self.regular[i].0, self.regular[i].1),
            ] {
                if w == 0.0 {
                    continue;
                }
                let f = eval_poly(z, c0, c2);
                e += w * f.norm_sqr();
                g0 += 2.0 * w * f;
                g2 += 2.0 * w * f * (z * z).conj();
            }
            grad[4 * i] += g0.re;
            grad[4 * i + 1] += g0.im;
            grad[4 * i + 2] += g2.re;
            grad[4 * i + 3] += g2.im;
        }
        if self.lambda != 0.0 {
            for &(i, j, s) in &self.pairs {
                let w = self.lambda * s;
                if w == 0.0 {
                    continue;
                }
                for k in 0..4 {
                    let d = x[4 * i + k] - x[4 * j + k];
                    e += w * d * d;
                    grad[4 * i + k] += 2.0 * w * d;
                    grad[4 * j + k] -= 2.0 * w * d;
                }
            }
        }
        e
    }
}

/// Energy and its gradient. The gradient is reported per pixel as
/// `dE/d(re c) + i dE/d(im c)` for `c0` and `c2`.
pub fn energy_and_gradient(
    field: &PolyVectorField,
    band: &NarrowBand,
    params: &SolverParams,
) -> Result<(f64, PolyVectorField)> {
    if field.len() != band.len() {
        return Err(Error::Field(format!(
            "field has {} pixels, band has {}",
            field.len(),
            band.len()
        )));
    }
    let model = EnergyModel::new(band, params);
    let x = field.to_real();
    let mut g = vec![0.0; x.len()];
    let e = model.eval_real(&x, &mut g);
    Ok((e, PolyVectorField::from_real(&g)?))
}

/// Statistics of a field optimization.
#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub initial_energy: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes the energy starting from the axis-aligned cross field.
pub fn optimize(band: &NarrowBand, params: &SolverParams) -> Result<PolyVectorField> {
    optimize_from(band, params, PolyVectorField::axis_aligned(band.len())).map(|(f, _)| f)
}

/// Minimizes the energy from an arbitrary starting field.
pub fn optimize_from(
    band: &NarrowBand,
    params: &SolverParams,
    start: PolyVectorField,
) -> Result<(PolyVectorField, OptimizeReport)> {
    params.validate()?;
    if band.is_empty() {
        return Err(Error::EmptyBand);
    }
    if start.len() != band.len() {
        return Err(Error::Field(format!(
            "start field has {} pixels, band has {}",
            start.len(),
            band.len()
        )));
    }
    let model = EnergyModel::new(band, params);
    let x0 = start.to_real();
    let mut scratch = vec![0.0; x0.len()];
    let initial_energy = model.eval_real(&x0, &mut scratch);
    let tol = params.tolerance(band.len());
    let mut objective = |x: &[f64], g: &mut [f64]| model.eval_real(x, g);
    let min = match params.solver {
        Solver::Lbfgs => optim::lbfgs(x0, &mut objective, params.lbfgs_history, tol, params.max_iters)?,
        Solver::ConjugateGradient => optim::conjugate_gradient(x0, &mut objective, tol, params.max_iters)?,
    };
    let field = PolyVectorField::from_real(&min.x)?;
    log::debug!(
        "field: {} iterations, energy {:.6e} -> {:.6e}, |grad| {:.3e}",
        min.iterations,
        initial_energy,
        min.value,
        min.grad_norm
    );
    Ok((
        field,
        OptimizeReport {
            initial_energy,
            energy: min.value,
            grad_norm: min.grad_norm,
            iterations: min.iterations,
            converged: min.converged,
        },
    ))
}

/// Discriminant threshold relative to `max(1, |c2|^2)`.
const DISCRIMINANT_TOL: f64 = 1e-6;

/// Least-angle matching of the labeled pair `(a, b)` onto `frame`.
///
/// Returns the matched pair. Ties prefer keeping labels.
pub fn match_frame(a: Complex64, b: Complex64, frame: &Frame) -> (Complex64, Complex64) {
    let cost = |x: Complex64, y: Complex64| crate::geom::line_angle(x, y);
    let keep = cost(a, frame.u) + cost(b, frame.v);
    let swap = cost(a, frame.v) + cost(b, frame.u);
    let orient = |x: Complex64, target: Complex64| {
        if crate::geom::dot(x, target) < 0.0 {
            -target
        } else {
            target
        }
    };
    if swap < keep {
        (orient(a, frame.v), orient(b, frame.u))
    } else {
        (orient(a, frame.u), orient(b, frame.v))
    }
}

/// Pixels where the frame is degenerate or has nontrivial holonomy.
///
/// A pixel is flagged when its discriminant nearly vanishes, when one of its
/// roots is zero, or when it belongs to a 2x2 pixel loop around which
/// least-angle matching does not return the starting labeled frame.
pub fn detect_singularities(field: &PolyVectorField, band: &NarrowBand) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let frames = field.frames();
    for i in 0..field.len() {
        let (c0, c2) = field.coeffs(i);
        let disc = (c2 * c2 - 4.0 * c0).norm();
        let f = &frames[i];
        if disc < DISCRIMINANT_TOL * c2.norm_sqr().max(1.0) || f.u.norm() == 0.0 || f.v.norm() == 0.0 {
            out.insert(i);
        }
    }
    for (i, &(c, r)) in band.pixels().iter().enumerate() {
        let loop_ids = [
            Some(i),
            band.index_of(c + 1, r),
            band.index_of(c + 1, r + 1),
            band.index_of(c, r + 1),
        ];
        let Some(ids) = loop_ids.into_iter().collect::<Option<Vec<_>>>() else {
            continue;
        };
        if ids.iter().any(|k| out.contains(k) && degenerate(&frames[*k])) {
            continue;
        }
        let start = frames[ids[0]];
        let (mut a, mut b) = (start.u, start.v);
        for &k in ids[1..].iter().chain(std::iter::once(&ids[0])) {
            (a, b) = match_frame(a, b, &frames[k]);
        }
        if a != start.u || b != start.v {
            out.extend(ids);
        }
    }
    out
}

fn degenerate(f: &Frame) -> bool {
    f.u.norm() == 0.0 || f.v.norm() == 0.0
}

/// Result of the alignment relaxation loop.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub field: PolyVectorField,
    /// Singular pixels remaining after the last round.
    pub singular: BTreeSet<usize>,
    /// Pixels whose alignment weight was zeroed.
    pub zeroed: BTreeSet<usize>,
    /// Number of re-optimizations after the first solve.
    pub rounds: usize,
}

/// Optimizes, then repeatedly zeroes the alignment weight on singular pixels
/// and re-optimizes until no singular pixel with a nonzero weight remains.
pub fn relax_singularities(band: &NarrowBand, params: &SolverParams) -> Result<Relaxation> {
    let mut current = band.clone();
    let (mut field, _) = optimize_from(&current, params, PolyVectorField::axis_aligned(band.len()))?;
    let mut zeroed = BTreeSet::new();
    let mut rounds = 0;
    loop {
        let singular = detect_singularities(&field, &current);
        let fresh: Vec<usize> = singular
            .iter()
            .copied()
            .filter(|&i| current.align_weight()[i] > 0.0)
            .collect();
        if fresh.is_empty() {
            return Ok(Relaxation {
                field,
                singular,
                zeroed,
                rounds,
            });
        }
        zeroed.extend(fresh.iter().copied());
        current = current.with_alignment_zeroed(fresh);
        rounds += 1;
        field = optimize_from(&current, params, field)?.0;
    }
}
