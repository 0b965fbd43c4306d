//! Contractive recurrent operator `w_{[0,t]} -> u_t` with a finite l2 gain
//! for every parameter vector.
//!
//! ```text
//!   z_t      = s * w_t
//!   u_t      = C x_t + D z_t
//!   x_{t+1}  = A x_t + tanh(B z_t + b .* (B z_t))
//!   A        = kappa * A_raw / max(1, 1.05 * sigma(A_raw))
//! ```
//!
//! `sigma` is a power-iteration estimate of the spectral norm, so the
//! effective state matrix has norm at most `kappa < 1` whatever the raw
//! parameters are. The bias is gated by the input path, hence `w = 0`
//! implies `x = 0` and `u = 0` for all time.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Safety factor applied to the power-iteration spectral norm estimate.
pub const SPECTRAL_SAFETY: f64 = 1.05;

const POWER_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorDims {
    pub n_in: usize,
    pub n_state: usize,
    pub n_out: usize,
}

impl OperatorDims {
    pub fn new(n_in: usize, n_state: usize, n_out: usize) -> Self {
        Self { n_in, n_state, n_out }
    }

    pub fn layout(&self) -> ThetaLayout {
        ThetaLayout::new(*self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().len()
    }
}

/// Offsets of each block inside the flat parameter vector. Block order is
/// `A_raw, B, C, D, b`, each matrix row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThetaLayout {
    pub dims: OperatorDims,
    pub a_raw: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    pub bias: usize,
    len: usize,
}

impl ThetaLayout {
    pub fn new(dims: OperatorDims) -> Self {
        let OperatorDims { n_in, n_state, n_out } = dims;
        let a_raw = 0;
        let b = a_raw + n_state * n_state;
        let c = b + n_state * n_in;
        let d = c + n_out * n_state;
        let bias = d + n_out * n_in;
        let len = bias + n_state;
        Self {
            dims,
            a_raw,
            b,
            c,
            d,
            bias,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    layout: ThetaLayout,
    values: Vec<f64>,
}

impl ThetaVector {
    pub fn new(dims: OperatorDims, values: Vec<f64>) -> Result<Self> {
        let layout = dims.layout();
        if values.len() != layout.len() {
            return Err(Error::mismatch("theta length", layout.len(), values.len()));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(dims: OperatorDims) -> Self {
        let layout = dims.layout();
        Self {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn dims(&self) -> OperatorDims {
        self.layout.dims
    }

    pub fn layout(&self) -> &ThetaLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn a_raw(&self) -> &[f64] {
        &self.values[self.layout.a_raw..self.layout.b]
    }

    pub fn b(&self) -> &[f64] {
        &self.values[self.layout.b..self.layout.c]
    }

    pub fn c(&self) -> &[f64] {
        &self.values[self.layout.c..self.layout.d]
    }

    pub fn d(&self) -> &[f64] {
        &self.values[self.layout.d..self.layout.bias]
    }

    pub fn bias(&self) -> &[f64] {
        &self.values[self.layout.bias..]
    }

    pub fn a_raw_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.layout.a_raw, self.layout.b);
        &mut self.values[s..e]
    }

    pub fn b_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.layout.b, self.layout.c);
        &mut self.values[s..e]
    }

    pub fn c_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.layout.c, self.layout.d);
        &mut self.values[s..e]
    }

    pub fn d_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.layout.d, self.layout.bias);
        &mut self.values[s..e]
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        let s = self.layout.bias;
        &mut self.values[s..]
    }
}

/// i.i.d. `N(0, std^2)` draws from a seeded ChaCha stream.
pub fn init_params(dims: OperatorDims, std: f64, seed: u64) -> Result<ThetaVector> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "init std must be finite and non-negative, got {std}"
        )));
    }
    let mut theta = ThetaVector::zeros(dims);
    if std == 0.0 {
        return Ok(theta);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("validated std");
    for v in theta.as_mut_slice() {
        *v = normal.sample(&mut rng);
    }
    Ok(theta)
}

fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let mut acc = 0.0;
        for j in 0..cols {
            acc += m[i * cols + j] * v[j];
        }
        out[i] = acc;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Power-iteration estimate of the largest singular value of a row-major
/// `rows x cols` matrix, with the converged right singular vector.
///
/// The iteration runs on `M^T M`, starting from its largest column so the
/// start vector always has a non-trivial component along the top singular
/// direction.
pub fn spectral_estimate(m: &[f64], rows: usize, cols: usize) -> (f64, Vec<f64>) {
    assert_eq!(m.len(), rows * cols);
    let mut gram = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = 0.0;
            for k in 0..rows {
                acc += m[k * cols + i] * m[k * cols + j];
            }
            gram[i * cols + j] = acc;
        }
    }
    let best = (0..cols)
        .map(|j| {
            let col_norm = (0..cols).map(|i| gram[i * cols + j].powi(2)).sum::<f64>();
            (j, col_norm)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let mut v = vec![0.0; cols];
    match best {
        Some((j, n)) if n > 0.0 => {
            for i in 0..cols {
                v[i] = gram[i * cols + j];
            }
        }
        _ => {
            if cols > 0 {
                v[0] = 1.0;
            }
            return (0.0, v);
        }
    }
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut next = vec![0.0; cols];
    for _ in 0..POWER_ITERS {
        matvec(&gram, cols, cols, &v, &mut next);
        let n = norm(&next);
        if n == 0.0 {
            break;
        }
        next.iter_mut().for_each(|x| *x /= n);
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut next);
        if diff < POWER_TOL {
            break;
        }
    }
    let mut mv = vec![0.0; rows];
    matvec(m, rows, cols, &v, &mut mv);
    (norm(&mv), v)
}

/// Exact spectral norm via SVD; used only for a-priori bounds and checks.
pub fn spectral_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    DMatrix::from_row_slice(rows, cols, m)
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `kappa / max(1, 1.05 * sigma)` written exactly as the tape evaluates it,
/// so both paths agree to the bit.
fn contraction_scale(kappa: f64, sigma: f64) -> f64 {
    let excess = SPECTRAL_SAFETY * sigma - 1.0;
    let excess = if excess > 0.0 { excess } else { 0.0 };
    kappa * (1.0 / (excess + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractiveOperator {
    pub kappa: f64,
    pub prescale: f64,
    theta: ThetaVector,
}

impl ContractiveOperator {
    pub fn new(theta: ThetaVector, kappa: f64, prescale: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "contraction margin must lie in (0, 1), got {kappa}"
            )));
        }
        if !(prescale > 0.0 && prescale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "prescale must be positive, got {prescale}"
            )));
        }
        Ok(Self { kappa, prescale, theta })
    }

    pub fn dims(&self) -> OperatorDims {
        self.theta.dims()
    }

    pub fn theta(&self) -> &ThetaVector {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: ThetaVector) -> Result<()> {
        if theta.dims() != self.dims() {
            return Err(Error::mismatch("operator parameters", self.theta.len(), theta.len()));
        }
        self.theta = theta;
        Ok(())
    }

    /// Effective (contracted) state matrix, row-major `n_state x n_state`.
    pub fn effective_state_matrix(&self) -> Vec<f64> {
        let n = self.dims().n_state;
        let (sigma, _) = spectral_estimate(self.theta.a_raw(), n, n);
        let k = contraction_scale(self.kappa, sigma);
        self.theta.a_raw().iter().map(|a| k * a).collect()
    }

    fn check_dims(&self, state: &[f64], w: &[f64]) -> Result<()> {
        let dims = self.dims();
        if state.len() != dims.n_state {
            return Err(Error::mismatch("operator state", dims.n_state, state.len()));
        }
        if w.len() != dims.n_in {
            return Err(Error::mismatch("operator input", dims.n_in, w.len()));
        }
        Ok(())
    }

    /// One step of the recursion: returns `(next_state, u_t)`.
    pub fn step(&self, state: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.effective_state_matrix();
        self.step_with(&a, state, w)
    }

    fn step_with(&self, a: &[f64], state: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dims(state, w)?;
        let OperatorDims { n_in, n_state, n_out } = self.dims();
        let z: Vec<f64> = w.iter().map(|x| self.prescale * x).collect();

        let mut cx = vec![0.0; n_out];
        let mut dz = vec![0.0; n_out];
        matvec(self.theta.c(), n_out, n_state, state, &mut cx);
        matvec(self.theta.d(), n_out, n_in, &z, &mut dz);
        let u = cx.iter().zip(&dz).map(|(p, q)| p + q).collect();

        let mut ax = vec![0.0; n_state];
        let mut bz = vec![0.0; n_state];
        matvec(a, n_state, n_state, state, &mut ax);
        matvec(self.theta.b(), n_state, n_in, &z, &mut bz);
        let next = (0..n_state)
            .map(|i| {
                let gated = bz[i] + self.theta.bias()[i] * bz[i];
                ax[i] + gated.tanh()
            })
            .collect();
        Ok((next, u))
    }

    /// Runs the operator from a zero internal state over a whole sequence.
    pub fn simulate(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let a = self.effective_state_matrix();
        let mut state = vec![0.0; self.dims().n_state];
        let mut out = Vec::with_capacity(inputs.len());
        for w in inputs {
            let (next, u) = self.step_with(&a, &state, w)?;
            out.push(u);
            state = next;
        }
        Ok(out)
    }

    /// A-priori l2 gain bound
    /// `s * (|D| + |C| |B| (1 + |b|_inf) / (1 - kappa))` with spectral norms.
    /// It is also an incremental (Lipschitz) bound since tanh is 1-Lipschitz
    /// and the gated bias is linear in the input.
    pub fn gain_bound(&self) -> f64 {
        let OperatorDims { n_in, n_state, n_out } = self.dims();
        let d = spectral_norm(self.theta.d(), n_out, n_in);
        let c = spectral_norm(self.theta.c(), n_out, n_state);
        let b = spectral_norm(self.theta.b(), n_state, n_in);
        let bias_inf = self.theta.bias().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.prescale * (d + c * b * (1.0 + bias_inf) / (1.0 - self.kappa))
    }

    /// Registers the parameters on `tape` and builds the effective matrices.
    pub fn on_tape(&self, tape: &mut Tape) -> TapeOperator {
        let dims = self.dims();
        let OperatorDims { n_in, n_state, n_out } = dims;
        let a_raw = tape.param(self.theta.a_raw(), n_state, n_state);
        let b = tape.param(self.theta.b(), n_state, n_in);
        let c = tape.param(self.theta.c(), n_out, n_state);
        let d = tape.param(self.theta.d(), n_out, n_in);
        let bias = tape.param(self.theta.bias(), n_state, 1);

        // The singular vector is held fixed; at convergence the estimate is
        // stationary in it, so this gives the gradient of sigma itself.
        let (_, v) = spectral_estimate(self.theta.a_raw(), n_state, n_state);
        let v = tape.vector(&v);
        let av = tape.matvec(a_raw, v);
        let sq = tape.norm_sq(av);
        let sigma = tape.sqrt(sq);
        let scaled = tape.scale(sigma, SPECTRAL_SAFETY);
        let shifted = tape.offset(scaled, -1.0);
        let excess = tape.max0(shifted);
        let denom = tape.offset(excess, 1.0);
        let inv = tape.recip(denom);
        let k = tape.scale(inv, self.kappa);
        let a = tape.scalar_mul(k, a_raw);

        TapeOperator {
            dims,
            prescale: self.prescale,
            params: [a_raw, b, c, d, bias],
            a,
            b,
            c,
            d,
            bias,
        }
    }
}

/// Operator matrices living on a tape; parameters in flat-theta order.
#[derive(Debug, Clone, Copy)]
pub struct TapeOperator {
    pub dims: OperatorDims,
    prescale: f64,
    params: [Var; 5],
    a: Var,
    b: Var,
    c: Var,
    d: Var,
    bias: Var,
}

impl TapeOperator {
    /// Parameter handles in flat-theta order, for `Tape::backward`.
    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn zero_state(&self, tape: &mut Tape) -> Var {
        tape.zeros(self.dims.n_state, 1)
    }

    pub fn step(&self, tape: &mut Tape, state: Var, w: Var) -> (Var, Var) {
        let z = tape.scale(w, self.prescale);
        let cx = tape.matvec(self.c, state);
        let dz = tape.matvec(self.d, z);
        let u = tape.add(cx, dz);

        let ax = tape.matvec(self.a, state);
        let bz = tape.matvec(self.b, z);
        let gate = tape.mul(self.bias, bz);
        let pre = tape.add(bz, gate);
        let act = tape.tanh(pre);
        let next = tape.add(ax, act);
        (next, u)
    }
}
