//! Masked autoregressive flow built from MADE conditioners.
//!
//! Each block maps `x` to `u` with
//!
//! ```text
//! u_d = (x_d - mu_d(x_<d)) * exp(-alpha_d(x_<d))
//! ```
//!
//! where `<d` means "earlier in the block's ordering". The Jacobian is
//! triangular under that ordering, so `log|det du/dx| = -sum_d alpha_d`.
//! The base distribution is a standard normal.
//!
//! Conditioner shape: one tanh hidden layer of width `H` with MADE masks, or
//! (for `H = 0`) direct masked linear heads from inputs to outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-scales are clamped to `[-ALPHA_CLAMP, ALPHA_CLAMP]`.
pub const ALPHA_CLAMP: f64 = 7.0;

/// Half-width of the uniform range used for hidden-layer initialization.
pub const HIDDEN_INIT_SCALE: f64 = 0.1;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard-normal log-density of a vector.
pub fn standard_normal_log_density(u: &[f64]) -> f64 {
    -(u.len() as f64) * HALF_LN_2PI - 0.5 * u.iter().map(|v| v * v).sum::<f64>()
}

/// Intermediate values of one block's forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct BlockTrace {
    x: Vec<f64>,
    hidden: Vec<f64>,
    alpha_raw: Vec<f64>,
    alpha: Vec<f64>,
    u: Vec<f64>,
}

impl BlockTrace {
    pub fn output(&self) -> &[f64] {
        &self.u
    }

    pub fn logdet(&self) -> f64 {
        -self.alpha.iter().sum::<f64>()
    }
}

/// One autoregressive affine layer with a MADE conditioner.
#[derive(Debug, Clone, PartialEq)]
pub struct MadeBlock {
    dim: usize,
    hidden: usize,
    /// `order[i]` is the input index at position `i`.
    order: Vec<usize>,
    /// Inverse of `order`.
    rank: Vec<usize>,
    // Row-major: w_in is H x D; w_mu and w_alpha are D x H, or D x D when H = 0.
    w_in: Vec<f64>,
    b_in: Vec<f64>,
    w_mu: Vec<f64>,
    b_mu: Vec<f64>,
    w_alpha: Vec<f64>,
    b_alpha: Vec<f64>,
    mask_in: Vec<bool>,
    mask_out: Vec<bool>,
}

impl MadeBlock {
    /// Identity-initialized block: all weights and biases zero.
    pub fn new(dim: usize, hidden: usize, order: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("flow dimension must be positive".into()));
        }
        let mut seen = vec![false; dim];
        if order.len() != dim || order.iter().any(|&i| i >= dim || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::Config(format!(
                "ordering {order:?} is not a permutation of 0..{dim}"
            )));
        }
        let mut rank = vec![0; dim];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos;
        }
        let out_cols = if hidden == 0 { dim } else { hidden };
        let (mask_in, mask_out) = build_masks(dim, hidden, &rank);
        Ok(MadeBlock {
            dim,
            hidden,
            order,
            rank,
            w_in: vec![0.0; hidden * dim],
            b_in: vec![0.0; hidden],
            w_mu: vec![0.0; dim * out_cols],
            b_mu: vec![0.0; dim],
            w_alpha: vec![0.0; dim * out_cols],
            b_alpha: vec![0.0; dim],
            mask_in,
            mask_out,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Uniform hidden weights in `[-scale, scale]` on unmasked entries.
    fn init_hidden<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        for (w, &m) in self.w_in.iter_mut().zip(&self.mask_in) {
            *w = if m { rng.random_range(-scale..=scale) } else { 0.0 };
        }
    }

    /// Fills every trainable scalar with uniform values in `[-scale, scale]`.
    pub fn randomize<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        let mask = self.trainable_mask();
        let mut params = self.params();
        for (p, m) in params.iter_mut().zip(mask) {
            *p = if m { rng.random_range(-scale..=scale) } else { 0.0 };
        }
        self.set_params(&params);
    }

    /// Total number of stored scalars, masked entries included.
    pub fn n_slots(&self) -> usize {
        self.w_in.len() + self.b_in.len() + self.w_mu.len() + self.b_mu.len() + self.w_alpha.len() + self.b_alpha.len()
    }

    /// Flattened parameters in the layout `w_in, b_in, w_mu, b_mu, w_alpha, b_alpha`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_slots());
        for part in [&self.w_in, &self.b_in, &self.w_mu, &self.b_mu, &self.w_alpha, &self.b_alpha] {
            out.extend_from_slice(part);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_slots(), "parameter slice length mismatch");
        let mut rest = flat;
        for part in [
            &mut self.w_in,
            &mut self.b_in,
            &mut self.w_mu,
            &mut self.b_mu,
            &mut self.w_alpha,
            &mut self.b_alpha,
        ] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
    }

    /// Which slots of [`MadeBlock::params`] are free parameters (biases always are).
    pub fn trainable_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.n_slots());
        out.extend_from_slice(&self.mask_in);
        out.extend(std::iter::repeat_n(true, self.hidden));
        out.extend_from_slice(&self.mask_out);
        out.extend(std::iter::repeat_n(true, self.dim));
        out.extend_from_slice(&self.mask_out);
        out.extend(std::iter::repeat_n(true, self.dim));
        out
    }

    pub fn param_count(&self) -> usize {
        self.trainable_mask().iter().filter(|&&m| m).count()
    }

    /// Returns `(mu, alpha_raw, hidden)` for input `x`.
    fn conditioner(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let (src, cols): (Vec<f64>, usize) = if self.hidden == 0 {
            (x.to_vec(), d)
        } else {
            let h = (0..self.hidden)
                .map(|j| {
                    let row = &self.w_in[j * d..(j + 1) * d];
                    let a = self.b_in[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                    a.tanh()
                })
                .collect();
            (h, self.hidden)
        };
        let head = |w: &[f64], b: &[f64]| -> Vec<f64> {
            (0..d)
                .map(|i| b[i] + w[i * cols..(i + 1) * cols].iter().zip(&src).map(|(w, v)| w * v).sum::<f64>())
                .collect()
        };
        let mu = head(&self.w_mu, &self.b_mu);
        let alpha_raw = head(&self.w_alpha, &self.b_alpha);
        let hidden = if self.hidden == 0 { Vec::new() } else { src };
        (mu, alpha_raw, hidden)
    }

    /// Shift and clamped log-scale heads, exposed for mask checks.
    pub fn heads(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mu, alpha_raw, _) = self.conditioner(x);
        (mu, alpha_raw.into_iter().map(clamp_alpha).collect())
    }

    pub fn forward_traced(&self, x: &[f64]) -> Result<BlockTrace> {
        assert_eq!(x.len(), self.dim, "input dimension mismatch");
        let (mu, alpha_raw, hidden) = self.conditioner(x);
        let alpha: Vec<f64> = alpha_raw.iter().map(|&a| clamp_alpha(a)).collect();
        let u: Vec<f64> = (0..self.dim)
            .map(|i| (x[i] - mu[i]) * (-alpha[i]).exp())
            .collect();
        if u.iter().chain(&alpha).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "non-finite value in flow block forward pass".into(),
            ));
        }
        Ok(BlockTrace {
            x: x.to_vec(),
            hidden,
            alpha_raw,
            alpha,
            u,
        })
    }

    /// Returns `(u, log|det du/dx|)`.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let trace = self.forward_traced(x)?;
        let logdet = trace.logdet();
        Ok((trace.u, logdet))
    }

    /// Sequential inverse: one conditioner pass per dimension, in ordering.
    pub fn inverse(&self, u: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(u.len(), self.dim, "input dimension mismatch");
        let mut x = vec![0.0; self.dim];
        for &i in &self.order {
            let (mu, alpha_raw, _) = self.conditioner(&x);
            x[i] = u[i] * clamp_alpha(alpha_raw[i]).exp() + mu[i];
            if !x[i].is_finite() {
                return Err(Error::Numeric(
                    "non-finite value in flow block inverse".into(),
                ));
            }
        }
        Ok(x)
    }

    /// Reverse-mode pass through one block.
    ///
    /// `grad_u` is dL/du and `grad_logdet` is dL/dlogdet. Parameter gradients are
    /// accumulated into `grad_params` (layout of [`MadeBlock::params`]) and
    /// dL/dx is returned.
    pub fn backward(
        &self,
        trace: &BlockTrace,
        grad_u: &[f64],
        grad_logdet: f64,
        grad_params: &mut [f64],
    ) -> Vec<f64> {
        let d = self.dim;
        let hd = self.hidden;
        let cols = if hd == 0 { d } else { hd };
        let mut g_mu = vec![0.0; d];
        let mut g_alpha_raw = vec![0.0; d];
        let mut g_x = vec![0.0; d];
        for i in 0..d {
            let inv_scale = (-trace.alpha[i]).exp();
            g_mu[i] = -grad_u[i] * inv_scale;
            g_x[i] = grad_u[i] * inv_scale;
            let g_alpha = -grad_u[i] * trace.u[i] - grad_logdet;
            if trace.alpha_raw[i].abs() <= ALPHA_CLAMP {
                g_alpha_raw[i] = g_alpha;
            }
        }

        let (gw_in, rest) = grad_params.split_at_mut(self.w_in.len());
        let (gb_in, rest) = rest.split_at_mut(self.b_in.len());
        let (gw_mu, rest) = rest.split_at_mut(self.w_mu.len());
        let (gb_mu, rest) = rest.split_at_mut(self.b_mu.len());
        let (gw_alpha, gb_alpha) = rest.split_at_mut(self.w_alpha.len());

        let src: &[f64] = if hd == 0 { &trace.x } else { &trace.hidden };
        let mut g_src = vec![0.0; cols];
        for i in 0..d {
            gb_mu[i] += g_mu[i];
            gb_alpha[i] += g_alpha_raw[i];
            for j in 0..cols {
                let k = i * cols + j;
                if self.mask_out[k] {
                    gw_mu[k] += g_mu[i] * src[j];
                    gw_alpha[k] += g_alpha_raw[i] * src[j];
                    g_src[j] += self.w_mu[k] * g_mu[i] + self.w_alpha[k] * g_alpha_raw[i];
                }
            }
        }

        if hd == 0 {
            for (gx, gs) in g_x.iter_mut().zip(&g_src) {
                *gx += gs;
            }
        } else {
            for j in 0..hd {
                let h = trace.hidden[j];
                let g_pre = g_src[j] * (1.0 - h * h);
                gb_in[j] += g_pre;
                for (i, gx) in g_x.iter_mut().enumerate() {
                    let k = j * d + i;
                    if self.mask_in[k] {
                        gw_in[k] += g_pre * trace.x[i];
                        *gx += self.w_in[k] * g_pre;
                    }
                }
            }
        }
        g_x
    }

    fn to_file(&self) -> BlockFile {
        let cols = if self.hidden == 0 { self.dim } else { self.hidden };
        let rows = |v: &[f64], width: usize| -> Vec<Vec<f64>> {
            if width == 0 {
                Vec::new()
            } else {
                v.chunks(width).map(<[f64]>::to_vec).collect()
            }
        };
        BlockFile {
            w_in: rows(&self.w_in, self.dim),
            b_in: self.b_in.clone(),
            w_mu: rows(&self.w_mu, cols),
            b_mu: self.b_mu.clone(),
            w_alpha: rows(&self.w_alpha, cols),
            b_alpha: self.b_alpha.clone(),
        }
    }

    fn from_file(dim: usize, hidden: usize, order: Vec<usize>, file: BlockFile) -> Result<Self> {
        let mut block = MadeBlock::new(dim, hidden, order)?;
        let flat = |rows: Vec<Vec<f64>>| rows.into_iter().flatten().collect::<Vec<f64>>();
        let mut params = Vec::with_capacity(block.n_slots());
        params.extend(flat(file.w_in));
        params.extend(file.b_in);
        params.extend(flat(file.w_mu));
        params.extend(file.b_mu);
        params.extend(flat(file.w_alpha));
        params.extend(file.b_alpha);
        if params.len() != block.n_slots() {
            return Err(Error::Validation(format!(
                "flow block has {} stored values, expected {} for D={dim}, H={hidden}",
                params.len(),
                block.n_slots()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("flow block contains non-finite weights".into()));
        }
        let mask = block.trainable_mask();
        if params.iter().zip(&mask).any(|(&p, &m)| !m && p != 0.0) {
            return Err(Error::Validation(
                "flow block has non-zero weights on masked connections".into(),
            ));
        }
        block.set_params(&params);
        Ok(block)
    }
}

fn clamp_alpha(a: f64) -> f64 {
    a.clamp(-ALPHA_CLAMP, ALPHA_CLAMP)
}

/// MADE connectivity for 0-based ordering ranks.
///
/// Hidden unit `j` gets degree `j mod (D - 1)` and sees inputs with rank <= degree;
/// output `i` sees hidden units with degree < rank(i). With `H = 0`, output `i`
/// sees inputs of strictly smaller rank. For `D = 1` nothing is connected.
fn build_masks(dim: usize, hidden: usize, rank: &[usize]) -> (Vec<bool>, Vec<bool>) {
    if hidden == 0 {
        let mut out = vec![false; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = rank[j] < rank[i];
            }
        }
        return (Vec::new(), out);
    }
    if dim == 1 {
        return (vec![false; hidden], vec![false; hidden]);
    }
    let degree: Vec<usize> = (0..hidden).map(|j| j % (dim - 1)).collect();
    let mut mask_in = vec![false; hidden * dim];
    for j in 0..hidden {
        for i in 0..dim {
            mask_in[j * dim + i] = rank[i] <= degree[j];
        }
    }
    let mut mask_out = vec![false; dim * hidden];
    for i in 0..dim {
        for j in 0..hidden {
            mask_out[i * hidden + j] = degree[j] < rank[i];
        }
    }
    (mask_in, mask_out)
}

/// A stack of MADE blocks; block orderings alternate natural and reversed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MafFile", into = "MafFile")]
pub struct Maf {
    blocks: Vec<MadeBlock>,
}

impl Maf {
    /// Identity-initialized output heads, hidden weights uniform in `[-0.1, 0.1]`.
    pub fn new<R: Rng + ?Sized>(dim: usize, n_blocks: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut maf = Maf::identity(dim, n_blocks, hidden)?;
        for block in &mut maf.blocks {
            block.init_hidden(HIDDEN_INIT_SCALE, rng);
        }
        Ok(maf)
    }

    /// All weights zero: the flow is the identity map.
    pub fn identity(dim: usize, n_blocks: usize, hidden: usize) -> Result<Self> {
        if n_blocks == 0 {
            return Err(Error::Config("flow needs at least one block".into()));
        }
        let blocks = (0..n_blocks)
            .map(|k| {
                let mut order: Vec<usize> = (0..dim).collect();
                if k % 2 == 1 {
                    order.reverse();
                }
                MadeBlock::new(dim, hidden, order)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Maf { blocks })
    }

    pub fn from_blocks(blocks: Vec<MadeBlock>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::Config("flow needs at least one block".into()));
        };
        let dim = first.dim;
        if blocks.iter().any(|b| b.dim != dim) {
            return Err(Error::Config("all flow blocks must share one dimension".into()));
        }
        Ok(Maf { blocks })
    }

    /// Every trainable scalar uniform in `[-scale, scale]`.
    pub fn randomize<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        for block in &mut self.blocks {
            block.randomize(scale, rng);
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim
    }

    pub fn hidden(&self) -> usize {
        self.blocks[0].hidden
    }

    pub fn blocks(&self) -> &[MadeBlock] {
        &self.blocks
    }

    pub fn n_slots(&self) -> usize {
        self.blocks.iter().map(MadeBlock::n_slots).sum()
    }

    /// Number of free scalars (unmasked weights and all biases).
    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(MadeBlock::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(MadeBlock::params).collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_slots(), "parameter slice length mismatch");
        let mut rest = flat;
        for block in &mut self.blocks {
            let (head, tail) = rest.split_at(block.n_slots());
            block.set_params(head);
            rest = tail;
        }
    }

    pub fn trainable_mask(&self) -> Vec<bool> {
        self.blocks.iter().flat_map(MadeBlock::trainable_mask).collect()
    }

    /// Maps data to the base space, returning `(z, total log-determinant)`.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut cur = x.to_vec();
        let mut logdet = 0.0;
        for block in &self.blocks {
            let (u, ld) = block.forward(&cur)?;
            cur = u;
            logdet += ld;
        }
        Ok((cur, logdet))
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut cur = z.to_vec();
        for block in self.blocks.iter().rev() {
            cur = block.inverse(&cur)?;
        }
        Ok(cur)
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Validation(format!(
                "input has dimension {}, flow expects {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite input to log_prob".into()));
        }
        let (z, logdet) = self.forward(x)?;
        let lp = standard_normal_log_density(&z) + logdet;
        if !lp.is_finite() {
            return Err(Error::Numeric("log_prob is not finite".into()));
        }
        Ok(lp)
    }

    /// Adds `weight * d(-log p(x))/dtheta` into `grad` and returns `-log p(x)`.
    pub fn accumulate_nll_grad(&self, x: &[f64], weight: f64, grad: &mut [f64]) -> Result<f64> {
        assert_eq!(grad.len(), self.n_slots(), "gradient buffer length mismatch");
        let mut traces = Vec::with_capacity(self.blocks.len());
        let mut cur = x.to_vec();
        for block in &self.blocks {
            let trace = block.forward_traced(&cur)?;
            cur = trace.u.clone();
            traces.push(trace);
        }
        let logdet: f64 = traces.iter().map(BlockTrace::logdet).sum();
        let nll = -(standard_normal_log_density(&cur) + logdet);
        if !nll.is_finite() {
            return Err(Error::Numeric("negative log-likelihood is not finite".into()));
        }
        // d(-log N(z))/dz = z, and d(nll)/d(logdet_k) = -1 for every block.
        let mut g: Vec<f64> = cur.iter().map(|z| z * weight).collect();
        let mut offsets = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for block in &self.blocks {
            offsets.push(off);
            off += block.n_slots();
        }
        for (k, block) in self.blocks.iter().enumerate().rev() {
            let slice = &mut grad[offsets[k]..offsets[k] + block.n_slots()];
            g = block.backward(&traces[k], &g, -weight, slice);
        }
        Ok(nll)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlockFile {
    w_in: Vec<Vec<f64>>,
    b_in: Vec<f64>,
    w_mu: Vec<Vec<f64>>,
    b_mu: Vec<f64>,
    w_alpha: Vec<Vec<f64>>,
    b_alpha: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MafFile {
    #[serde(rename = "D")]
    dim: usize,
    #[serde(rename = "K")]
    n_blocks: usize,
    #[serde(rename = "H")]
    hidden: usize,
    orderings: Vec<Vec<usize>>,
    blocks: Vec<BlockFile>,
}

impl From<Maf> for MafFile {
    fn from(maf: Maf) -> Self {
        MafFile {
            dim: maf.dim(),
            n_blocks: maf.blocks.len(),
            hidden: maf.hidden(),
            orderings: maf.blocks.iter().map(|b| b.order.clone()).collect(),
            blocks: maf.blocks.iter().map(MadeBlock::to_file).collect(),
        }
    }
}

impl TryFrom<MafFile> for Maf {
    type Error = Error;

    fn try_from(file: MafFile) -> Result<Self> {
        if file.blocks.len() != file.n_blocks || file.orderings.len() != file.n_blocks {
            return Err(Error::Validation(format!(
                "flow declares K={} but stores {} blocks and {} orderings",
                file.n_blocks,
                file.blocks.len(),
                file.orderings.len()
            )));
        }
        let blocks = file
            .blocks
            .into_iter()
            .zip(file.orderings)
            .map(|(b, order)| MadeBlock::from_file(file.dim, file.hidden, order, b))
            .collect::<Result<Vec<_>>>()?;
        Maf::from_blocks(blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_block_is_identity() {
        let block = MadeBlock::new(4, 3, vec![0, 1, 2, 3]).unwrap();
        let x = [0.5, -1.0, 2.0, 3.5];
        let (u, ld) = block.forward(&x).unwrap();
        assert_eq!(u, x.to_vec());
        assert_eq!(ld, 0.0);
        assert_eq!(block.inverse(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn bias_only_affine_block() {
        let mut block = MadeBlock::new(1, 0, vec![0]).unwrap();
        // Layout: w_mu (1), b_mu (1), w_alpha (1), b_alpha (1).
        block.set_params(&[0.0, 1.0, 0.0, 2f64.ln()]);
        let (u, ld) = block.forward(&[5.0]).unwrap();
        assert!((u[0] - 2.0).abs() < 1e-15);
        assert!((ld + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_prob_anchors() {
        let one = Maf::identity(1, 1, 0).unwrap();
        assert!((one.log_prob(&[0.0]).unwrap() + 0.918_938_5).abs() < 1e-7);
        let two = Maf::identity(2, 3, 4).unwrap();
        assert!((two.log_prob(&[0.0, 0.0]).unwrap() + 1.837_877_1).abs() < 1e-7);
    }

    #[test]
    fn param_count_bias_only() {
        let maf = Maf::identity(1, 1, 0).unwrap();
        assert_eq!(maf.param_count(), 2);
        let a = Maf::identity(6, 2, 5).unwrap();
        let b = Maf::identity(6, 4, 5).unwrap();
        assert_eq!(b.param_count(), 2 * a.param_count());
    }

    #[test]
    fn first_ordered_output_is_constant() {
        for hidden in [0, 4] {
            let mut block = MadeBlock::new(5, hidden, vec![3, 1, 4, 0, 2]).unwrap();
            block.randomize(0.5, &mut rng(1));
            let (mu_a, al_a) = block.heads(&[1.0, 2.0, 3.0, 4.0, 5.0]);
            let (mu_b, al_b) = block.heads(&[-7.0, 0.1, 9.0, -2.0, 0.0]);
            assert_eq!(mu_a[3], mu_b[3]);
            assert_eq!(al_a[3], al_b[3]);
        }
    }

    #[test]
    fn masked_slots_stay_zero_after_randomize() {
        let mut maf = Maf::identity(5, 2, 6).unwrap();
        maf.randomize(0.3, &mut rng(2));
        for (p, m) in maf.params().iter().zip(maf.trainable_mask()) {
            if !m {
                assert_eq!(*p, 0.0);
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        for (dim, hidden) in [(1, 0), (3, 0), (4, 6), (7, 3)] {
            let mut maf = Maf::identity(dim, 3, hidden).unwrap();
            maf.randomize(0.4, &mut rng(dim as u64));
            let mut r = rng(99);
            for _ in 0..50 {
                let x: Vec<f64> = (0..dim).map(|_| r.random_range(-3.0..3.0)).collect();
                let (z, _) = maf.forward(&x).unwrap();
                let back = maf.inverse(&z).unwrap();
                for (a, b) in back.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn alpha_is_clamped() {
        let mut block = MadeBlock::new(1, 0, vec![0]).unwrap();
        block.set_params(&[0.0, 0.0, 0.0, 50.0]);
        let (_, ld) = block.forward(&[1.0]).unwrap();
        assert_eq!(ld, -ALPHA_CLAMP);
    }

    #[test]
    fn rejects_bad_ordering() {
        assert!(MadeBlock::new(3, 2, vec![0, 0, 1]).is_err());
        assert!(MadeBlock::new(3, 2, vec![0, 1]).is_err());
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let mut maf = Maf::new(6, 3, 4, &mut rng(5)).unwrap();
        maf.randomize(0.2, &mut rng(6));
        let text = serde_json::to_string(&maf).unwrap();
        let back: Maf = serde_json::from_str(&text).unwrap();
        assert_eq!(back, maf);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["D"], 6);
        assert_eq!(v["K"], 3);
        assert_eq!(v["orderings"][1][0], 5);
    }

    #[test]
    fn deserialize_rejects_weights_on_masked_connections() {
        let maf = Maf::identity(2, 1, 0).unwrap();
        let mut v = serde_json::to_value(&maf).unwrap();
        // w_mu[0][0] connects output 0 to itself.
        v["blocks"][0]["w_mu"][0][0] = serde_json::json!(1.0);
        assert!(serde_json::from_value::<Maf>(v).is_err());
    }
}
