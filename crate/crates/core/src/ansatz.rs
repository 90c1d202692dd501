//! Classical correction factors `ψ^c_θ(z) = exp(φ_θ(z))`.
//!
//! All parameters are real. A complex Jastrow coefficient occupies two
//! consecutive slots (real part, imaginary part). The partitioned ansatz
//! multiplies a Jastrow factor on the quantum sites with a normalized
//! mean-field bath whose fields come from a one-hidden-layer tanh network of
//! the quantum configuration.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CqdError, Result};
use crate::pauli::SpinConfig;
use crate::rng;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default standard deviation of the random hidden-layer initialization.
pub const DEFAULT_INIT_SIGMA: f64 = 0.1;

/// Named contiguous run of parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ansatz {
    /// Jastrow factor on `n` sites.
    Jastrow { n: usize },
    /// Jastrow on `n_q` quantum sites times a network mean-field on `n_c` bath sites.
    Partitioned { n_q: usize, n_c: usize },
}

#[inline]
fn spin(idx: u64, n: usize, site: usize) -> f64 {
    if (idx >> (n - 1 - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn spins_into(idx: u64, n: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..n).map(|i| spin(idx, n, i)));
}

/// Number of real Jastrow parameters on `n` sites.
pub fn jastrow_len(n: usize) -> usize {
    2 * (n + n * n.saturating_sub(1) / 2)
}

impl Ansatz {
    pub fn n_quantum(&self) -> usize {
        match *self {
            Ansatz::Jastrow { n } => n,
            Ansatz::Partitioned { n_q, .. } => n_q,
        }
    }

    pub fn n_bath(&self) -> usize {
        match *self {
            Ansatz::Jastrow { .. } => 0,
            Ansatz::Partitioned { n_c, .. } => n_c,
        }
    }

    fn hidden(&self) -> usize {
        2 * self.n_bath()
    }

    fn net_len(&self) -> usize {
        let (nq, h) = (self.n_quantum(), self.hidden());
        h * nq + h + 2 * self.n_bath() * h + 2 * self.n_bath()
    }

    pub fn n_params(&self) -> usize {
        jastrow_len(self.n_quantum()) + self.net_len()
    }

    pub fn layout(&self) -> Vec<Block> {
        let n = self.n_quantum();
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name: &str, len: usize| {
            blocks.push(Block {
                name: name.to_string(),
                offset,
                len,
            });
            offset += len;
        };
        push("jastrow_one_body", 2 * n);
        push("jastrow_two_body", n * n.saturating_sub(1));
        if let Ansatz::Partitioned { .. } = self {
            let (h, nc) = (self.hidden(), self.n_bath());
            push("hidden_weights", h * n);
            push("hidden_bias", h);
            push("output_weights", 2 * nc * h);
            push("output_bias", 2 * nc);
        }
        blocks
    }

    /// Initial parameters: zero Jastrow and output layer, Gaussian hidden layer.
    pub fn init(&self, seed: u64, sigma: f64) -> Result<AnsatzState> {
        let mut theta = vec![0.0; self.n_params()];
        if self.net_len() > 0 {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| CqdError::precondition(format!("invalid init sigma {sigma}: {e}")))?;
            let mut r = rng::stream(seed);
            let start = jastrow_len(self.n_quantum());
            let hidden_len = self.hidden() * (self.n_quantum() + 1);
            for x in &mut theta[start..start + hidden_len] {
                *x = normal.sample(&mut r);
            }
        }
        Ok(AnsatzState {
            ansatz: *self,
            theta,
        })
    }
}

/// `init_params` for both ansatz kinds.
pub fn init_params(ansatz: Ansatz, seed: u64) -> Result<AnsatzState> {
    ansatz.init(seed, DEFAULT_INIT_SIGMA)
}

/// Parameters together with the ansatz that interprets them.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzState {
    pub ansatz: Ansatz,
    theta: Vec<f64>,
}

impl AnsatzState {
    pub fn new(ansatz: Ansatz, theta: Vec<f64>) -> Result<Self> {
        CqdError::check_len(ansatz.n_params(), theta.len())?;
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(CqdError::NonFinite("ansatz parameters"));
        }
        Ok(Self { ansatz, theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn layout(&self) -> Vec<Block> {
        self.ansatz.layout()
    }

    /// `θ + h·v`.
    pub fn advanced(&self, v: &[f64], h: f64) -> Result<Self> {
        CqdError::check_len(self.theta.len(), v.len())?;
        let theta = self.theta.iter().zip(v).map(|(a, b)| a + h * b).collect();
        Self::new(self.ansatz, theta)
    }

    fn jastrow_part(&self) -> &[f64] {
        &self.theta[..jastrow_len(self.ansatz.n_quantum())]
    }

    fn net(&self) -> MeanFieldNet<'_> {
        MeanFieldNet::new(
            self.ansatz.n_quantum(),
            self.ansatz.n_bath(),
            &self.theta[jastrow_len(self.ansatz.n_quantum())..],
        )
    }

    /// `φ^{c₁}(z_q)` from the raw index.
    pub fn quantum_log(&self, zq: u64) -> Complex64 {
        jastrow_log_raw(self.jastrow_part(), self.ansatz.n_quantum(), zq)
    }

    /// Bath fields `λ(z_q)`; empty without a bath.
    pub fn lambda(&self, zq: u64) -> Vec<Complex64> {
        if self.ansatz.n_bath() == 0 {
            return Vec::new();
        }
        self.net().forward(zq).lambda()
    }

    /// `φ(z_q, z_c)` and `∂φ/∂θ_k` for every parameter.
    pub fn log_and_grad(&self, zq: u64, zc: u64) -> (Complex64, Vec<Complex64>) {
        let mut grad = vec![Complex64::new(0.0, 0.0); self.theta.len()];
        let phi = self.log_and_grad_into(zq, zc, &mut grad);
        (phi, grad)
    }

    /// As [`log_and_grad`](Self::log_and_grad), writing into `grad`.
    pub fn log_and_grad_into(&self, zq: u64, zc: u64, grad: &mut [Complex64]) -> Complex64 {
        let nq = self.ansatz.n_quantum();
        let jl = jastrow_len(nq);
        jastrow_grad_raw(nq, zq, &mut grad[..jl]);
        let mut phi = jastrow_log_raw(self.jastrow_part(), nq, zq);
        if self.ansatz.n_bath() > 0 {
            let net = self.net();
            let fwd = net.forward(zq);
            let lambda = fwd.lambda();
            phi += meanfield_log_raw(&lambda, zc);
            let g_out = meanfield_output_grad(&lambda, zc);
            net.backprop(&fwd, &g_out, &mut grad[jl..]);
        }
        phi
    }
}

/// Jastrow log-amplitude `Σ θ_i z_i + Σ_{i<j} 2θ_ij z_i z_j`.
pub fn jastrow_log(theta: &[f64], z: SpinConfig) -> Result<Complex64> {
    CqdError::check_len(jastrow_len(z.len()), theta.len())?;
    Ok(jastrow_log_raw(theta, z.len(), z.index()))
}

/// Per-parameter derivatives of [`jastrow_log`] (independent of `θ`).
pub fn jastrow_grad(theta: &[f64], z: SpinConfig) -> Result<Vec<Complex64>> {
    CqdError::check_len(jastrow_len(z.len()), theta.len())?;
    let mut g = vec![Complex64::new(0.0, 0.0); theta.len()];
    jastrow_grad_raw(z.len(), z.index(), &mut g);
    Ok(g)
}

fn jastrow_log_raw(theta: &[f64], n: usize, idx: u64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut p = 0;
    for i in 0..n {
        let s = spin(idx, n, i);
        acc += Complex64::new(theta[2 * p], theta[2 * p + 1]) * s;
        p += 1;
    }
    for i in 0..n {
        let si = spin(idx, n, i);
        for j in i + 1..n {
            let m = 2.0 * si * spin(idx, n, j);
            acc += Complex64::new(theta[2 * p], theta[2 * p + 1]) * m;
            p += 1;
        }
    }
    acc
}

fn jastrow_grad_raw(n: usize, idx: u64, out: &mut [Complex64]) {
    let mut p = 0;
    let mut put = |m: f64| {
        out[2 * p] = Complex64::new(m, 0.0);
        out[2 * p + 1] = Complex64::new(0.0, m);
        p += 1;
    };
    for i in 0..n {
        put(spin(idx, n, i));
    }
    for i in 0..n {
        let si = spin(idx, n, i);
        for j in i + 1..n {
            put(2.0 * si * spin(idx, n, j));
        }
    }
}

/// Borrowed view of the network parameters.
struct MeanFieldNet<'a> {
    n_q: usize,
    n_c: usize,
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
}

struct Forward {
    input: Vec<f64>,
    hidden: Vec<f64>,
    out: Vec<f64>,
}

impl Forward {
    fn lambda(&self) -> Vec<Complex64> {
        self.out
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect()
    }
}

impl<'a> MeanFieldNet<'a> {
    fn new(n_q: usize, n_c: usize, params: &'a [f64]) -> Self {
        let h = 2 * n_c;
        let (w1, rest) = params.split_at(h * n_q);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(2 * n_c * h);
        Self {
            n_q,
            n_c,
            w1,
            b1,
            w2,
            b2,
        }
    }

    fn forward(&self, zq: u64) -> Forward {
        let h = 2 * self.n_c;
        let mut input = Vec::with_capacity(self.n_q);
        spins_into(zq, self.n_q, &mut input);
        let hidden: Vec<f64> = (0..h)
            .map(|r| {
                let row = &self.w1[r * self.n_q..(r + 1) * self.n_q];
                let pre: f64 = row.iter().zip(&input).map(|(w, s)| w * s).sum::<f64>() + self.b1[r];
                pre.tanh()
            })
            .collect();
        let out = (0..2 * self.n_c)
            .map(|o| {
                let row = &self.w2[o * h..(o + 1) * h];
                row.iter().zip(&hidden).map(|(w, a)| w * a).sum::<f64>() + self.b2[o]
            })
            .collect();
        Forward { input, hidden, out }
    }

    /// Chain rule from `∂φ/∂out` to every network parameter.
    fn backprop(&self, fwd: &Forward, g_out: &[Complex64], grad: &mut [Complex64]) {
        let h = 2 * self.n_c;
        let (g_w1, rest) = grad.split_at_mut(h * self.n_q);
        let (g_b1, rest) = rest.split_at_mut(h);
        let (g_w2, g_b2) = rest.split_at_mut(2 * self.n_c * h);
        let mut g_hidden = vec![Complex64::new(0.0, 0.0); h];
        for (o, &g) in g_out.iter().enumerate() {
            g_b2[o] = g;
            for r in 0..h {
                g_w2[o * h + r] = g * fwd.hidden[r];
                g_hidden[r] += g * self.w2[o * h + r];
            }
        }
        for r in 0..h {
            let g_pre = g_hidden[r] * (1.0 - fwd.hidden[r] * fwd.hidden[r]);
            g_b1[r] = g_pre;
            for j in 0..self.n_q {
                g_w1[r * self.n_q + j] = g_pre * fwd.input[j];
            }
        }
    }
}

fn network_slice(theta: &AnsatzState) -> Result<()> {
    match theta.ansatz {
        Ansatz::Partitioned { .. } => Ok(()),
        Ansatz::Jastrow { .. } => Err(CqdError::precondition("the jastrow ansatz has no bath network")),
    }
}

/// Bath fields `λ = W₂ tanh(W₁ s + b₁) + b₂` with consecutive outputs paired
/// into complex numbers.
pub fn mlp_lambda(theta: &AnsatzState, z_q: SpinConfig) -> Result<Vec<Complex64>> {
    network_slice(theta)?;
    CqdError::check_len(theta.ansatz.n_quantum(), z_q.len())?;
    Ok(theta.lambda(z_q.index()))
}

/// `½ ln(e^{2x} + e^{-2x})` without overflow.
#[inline]
fn log_cosh_norm(x: f64) -> f64 {
    let a = x.abs();
    a + 0.5 * (-4.0 * a).exp().ln_1p()
}

/// `Σ_i [λ_i z_i - ½ ln(e^{2Re λ_i} + e^{-2Re λ_i})]`.
pub fn meanfield_log(lambda: &[Complex64], z_c: SpinConfig) -> Result<Complex64> {
    CqdError::check_len(lambda.len(), z_c.len())?;
    Ok(meanfield_log_raw(lambda, z_c.index()))
}

pub(crate) fn meanfield_log_raw(lambda: &[Complex64], zc: u64) -> Complex64 {
    let n = lambda.len();
    lambda
        .iter()
        .enumerate()
        .map(|(i, l)| l * spin(zc, n, i) - log_cosh_norm(l.re))
        .sum()
}

/// `∂φ^{c₂}/∂out`: the real slot gets `z_i - tanh(2 Re λ_i)`, the imaginary slot `i z_i`.
fn meanfield_output_grad(lambda: &[Complex64], zc: u64) -> Vec<Complex64> {
    let n = lambda.len();
    let mut g = Vec::with_capacity(2 * n);
    for (i, l) in lambda.iter().enumerate() {
        let s = spin(zc, n, i);
        g.push(Complex64::new(s - (2.0 * l.re).tanh(), 0.0));
        g.push(I * s);
    }
    g
}

/// Probability that bath site `i` is `+1`.
#[inline]
pub fn bath_up_probability(lambda: Complex64) -> f64 {
    // e^{2x} / (e^{2x} + e^{-2x}) = 1 / (1 + e^{-4x})
    1.0 / (1.0 + (-4.0 * lambda.re).exp())
}

/// Independent per-site draws from `|ψ^{c₂}(·, z_q)|²`.
pub fn sample_bath(lambda: &[Complex64], n_samples: usize, seed: u64) -> Result<Vec<SpinConfig>> {
    if n_samples == 0 {
        return Err(CqdError::precondition("at least one bath sample is required"));
    }
    let n = lambda.len();
    sample_bath_raw(lambda, n_samples, seed)
        .into_iter()
        .map(|i| SpinConfig::new(i, n))
        .collect()
}

pub(crate) fn sample_bath_raw(lambda: &[Complex64], n_samples: usize, seed: u64) -> Vec<u64> {
    let n = lambda.len();
    let p_up: Vec<f64> = lambda.iter().map(|&l| bath_up_probability(l)).collect();
    let mut r = rng::stream(seed);
    (0..n_samples)
        .map(|_| {
            p_up.iter().enumerate().fold(0u64, |acc, (i, &p)| {
                let up = r.random::<f64>() < p;
                if up {
                    acc
                } else {
                    acc | 1 << (n - 1 - i)
                }
            })
        })
        .collect()
}

/// `φ^{c₁}(z_q) + φ^{c₂}(z_c, z_q)` and its gradient over all parameters.
pub fn partitioned_log_and_grad(
    theta: &AnsatzState,
    z_q: SpinConfig,
    z_c: SpinConfig,
) -> Result<(Complex64, Vec<Complex64>)> {
    network_slice(theta)?;
    CqdError::check_len(theta.ansatz.n_quantum(), z_q.len())?;
    CqdError::check_len(theta.ansatz.n_bath(), z_c.len())?;
    Ok(theta.log_and_grad(z_q.index(), z_c.index()))
}
