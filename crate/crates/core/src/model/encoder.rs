//! Encoder forward pass with cached activations, and its exact backward pass.

use rand::Rng;

use super::params::{LayerOffsets, ParameterSet};
use super::tensor::{
    affine, col_sum_acc, gelu, gelu_grad, layer_norm, layer_norm_backward, masked_softmax,
    matmul_a_bt_acc, matmul_acc, matmul_at_b_acc, NormCache, Real,
};
use super::Model;
use crate::error::{Error, Result};
use crate::signal::PAD_ID;

#[derive(Debug, Clone)]
pub(crate) struct EmbedCache<T> {
    ids: Vec<u32>,
    norm: NormCache<T>,
    drop: Option<Vec<T>>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<T> {
    x: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    probs: Vec<T>,
    ctx: Vec<T>,
    hfc: Option<Vec<T>>,
    rescale_norm: Option<NormCache<T>>,
    drop_mix: Option<Vec<T>>,
    mix_norm: NormCache<T>,
    y1: Vec<T>,
    u: Vec<T>,
    g: Vec<T>,
    drop_ffn: Option<Vec<T>>,
    ffn_norm: NormCache<T>,
}

/// Everything the backward pass needs for one window.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    embed: EmbedCache<T>,
    layers: Vec<LayerCache<T>>,
    allowed: Vec<bool>,
    states: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    /// Final hidden states, `max_len x hidden`, row-major.
    pub fn states(&self) -> &[T] {
        &self.states
    }

    pub fn into_states(self) -> Vec<T> {
        self.states
    }
}

/// Attention-branch and rescaler-branch outputs of one layer before mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct Branches<T> {
    pub attention: Vec<T>,
    pub rescaler: Option<Vec<T>>,
}

fn dropout_mask<T: Real, R: Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

fn apply_mask<T: Real>(x: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(m) = mask {
        for (v, &s) in x.iter_mut().zip(m) {
            *v *= s;
        }
    }
}

/// Causal mask that also hides zero-padding keys. A query whose causal
/// prefix is all padding falls back to the plain causal prefix.
pub fn attention_mask(window: &[u32]) -> Vec<bool> {
    let len = window.len();
    let mut allowed = vec![false; len * len];
    for t in 0..len {
        let row = &mut allowed[t * len..(t + 1) * len];
        let mut any = false;
        for s in 0..=t {
            row[s] = window[s] != PAD_ID;
            any |= row[s];
        }
        if !any {
            row[..=t].iter_mut().for_each(|a| *a = true);
        }
    }
    allowed
}

impl<T: Real> Model<T> {
    fn check_window(&self, window: &[u32]) -> Result<()> {
        let cfg = &self.config;
        if window.len() != cfg.max_len {
            return Err(Error::Shape(format!(
                "window has {} positions, model expects {}",
                window.len(),
                cfg.max_len
            )));
        }
        let n = self.params.layout().num_items as u32;
        if let Some(bad) = window.iter().find(|&&id| id > n) {
            return Err(Error::InvalidInput(format!(
                "item id {bad} outside vocabulary of {n} items"
            )));
        }
        Ok(())
    }

    fn embed_forward<R: Rng>(
        &self,
        window: &[u32],
        rng: Option<&mut R>,
    ) -> (Vec<T>, EmbedCache<T>) {
        let p = &self.params;
        let lay = p.layout();
        let h = lay.hidden;
        let mut e0 = Vec::with_capacity(window.len() * h);
        let pos = p.get(&lay.embed.positions);
        for (t, &id) in window.iter().enumerate() {
            let item = p.item_row(id);
            e0.extend(
                item.iter()
                    .zip(&pos[t * h..(t + 1) * h])
                    .map(|(&a, &b)| a + b),
            );
        }
        let (mut x, norm) = layer_norm(
            &e0,
            p.get(&lay.embed.norm_gain),
            p.get(&lay.embed.norm_bias),
            h,
        );
        let drop = match rng {
            Some(r) if self.config.dropout > 0.0 => {
                Some(dropout_mask(x.len(), self.config.dropout, r))
            }
            _ => None,
        };
        apply_mask(&mut x, &drop);
        (
            x,
            EmbedCache {
                ids: window.to_vec(),
                norm,
                drop,
            },
        )
    }

    /// Returns `(output, q, k, v, probs, ctx)`.
    #[allow(clippy::type_complexity)]
    fn attention_forward(
        &self,
        x: &[T],
        off: &LayerOffsets,
        allowed: &[bool],
    ) -> (Vec<T>, Vec<T>, Vec<T>, Vec<T>, Vec<T>, Vec<T>) {
        let p = &self.params;
        let len = self.config.max_len;
        let h = self.config.hidden_size;
        let heads = self.config.num_heads;
        let dh = self.config.head_dim();
        let q = affine(x, p.get(&off.wq), p.get(&off.bq), len, h, h);
        let k = affine(x, p.get(&off.wk), p.get(&off.bk), len, h, h);
        let v = affine(x, p.get(&off.wv), p.get(&off.bv), len, h, h);
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut probs = vec![T::zero(); heads * len * len];
        let mut ctx = vec![T::zero(); len * h];
        for head in 0..heads {
            let cols = head * dh..(head + 1) * dh;
            for t in 0..len {
                let mask = &allowed[t * len..(t + 1) * len];
                let row = &mut probs[(head * len + t) * len..(head * len + t + 1) * len];
                let qt = &q[t * h + cols.start..t * h + cols.end];
                for s in 0..len {
                    if mask[s] {
                        let ks = &k[s * h + cols.start..s * h + cols.end];
                        row[s] = super::tensor::dot(qt, ks) * scale;
                    }
                }
                masked_softmax(row, mask);
                let out = &mut ctx[t * h + cols.start..t * h + cols.end];
                for s in 0..len {
                    let w = row[s];
                    if w != T::zero() {
                        for (o, &vv) in out.iter_mut().zip(&v[s * h + cols.start..s * h + cols.end])
                        {
                            *o += w * vv;
                        }
                    }
                }
            }
        }
        let out = affine(&ctx, p.get(&off.wo), p.get(&off.bo), len, h, h);
        (out, q, k, v, probs, ctx)
    }

    /// Returns `(normalized branch output, hfc, norm cache)`.
    fn rescaler_forward(&self, x: &[T], off: &LayerOffsets) -> (Vec<T>, Vec<T>, NormCache<T>) {
        let p = &self.params;
        let len = self.config.max_len;
        let h = self.config.hidden_size;
        let mut lfc = vec![T::zero(); len * h];
        matmul_acc(&self.lowpass, x, len, len, h, &mut lfc);
        let beta = p.get(&off.beta);
        let mut hfc = Vec::with_capacity(len * h);
        let mut rescaled = Vec::with_capacity(len * h);
        for t in 0..len {
            for j in 0..h {
                let lo = lfc[t * h + j];
                let hi = x[t * h + j] - lo;
                hfc.push(hi);
                rescaled.push(lo + beta[j] * hi);
            }
        }
        let (out, norm) = layer_norm(
            &rescaled,
            p.get(&off.rescale_gain),
            p.get(&off.rescale_bias),
            h,
        );
        (out, hfc, norm)
    }

    fn layer_forward<R: Rng>(
        &self,
        x: Vec<T>,
        layer: usize,
        allowed: &[bool],
        mut rng: Option<&mut R>,
    ) -> (Vec<T>, LayerCache<T>) {
        let p = &self.params;
        let off = &p.layout().layers[layer];
        let len = self.config.max_len;
        let h = self.config.hidden_size;
        let f = self.config.ffn_inner();
        let rate = self.config.dropout;
        let alpha = T::of(self.config.alpha);
        let one_minus = T::one() - alpha;

        let (attn, q, k, v, probs, ctx) = self.attention_forward(&x, off, allowed);
        let mut mix: Vec<T> = attn.iter().map(|&a| one_minus * a).collect();
        let (hfc, rescale_norm) = if self.config.include_rescaler {
            let (branch, hfc, norm) = self.rescaler_forward(&x, off);
            for (m, &b) in mix.iter_mut().zip(&branch) {
                *m += alpha * b;
            }
            (Some(hfc), Some(norm))
        } else {
            (None, None)
        };

        let mut draw = |n: usize| match rng.as_deref_mut() {
            Some(r) if rate > 0.0 => Some(dropout_mask::<T, R>(n, rate, r)),
            _ => None,
        };
        let drop_mix = draw(len * h);
        apply_mask(&mut mix, &drop_mix);
        let z1: Vec<T> = x.iter().zip(&mix).map(|(&a, &b)| a + b).collect();
        let (y1, mix_norm) = layer_norm(&z1, p.get(&off.mix_gain), p.get(&off.mix_bias), h);

        let u = affine(&y1, p.get(&off.w1), p.get(&off.b1), len, h, f);
        let g: Vec<T> = u.iter().map(|&v| gelu(v)).collect();
        let mut ffn = affine(&g, p.get(&off.w2), p.get(&off.b2), len, f, h);
        let drop_ffn = draw(len * h);
        apply_mask(&mut ffn, &drop_ffn);
        let z2: Vec<T> = y1.iter().zip(&ffn).map(|(&a, &b)| a + b).collect();
        let (y2, ffn_norm) = layer_norm(&z2, p.get(&off.ffn_gain), p.get(&off.ffn_bias), h);

        let cache = LayerCache {
            x,
            q,
            k,
            v,
            probs,
            ctx,
            hfc,
            rescale_norm,
            drop_mix,
            mix_norm,
            y1,
            u,
            g,
            drop_ffn,
            ffn_norm,
        };
        (y2, cache)
    }

    /// Full forward pass. Passing an RNG enables dropout.
    pub fn forward<R: Rng>(
        &self,
        window: &[u32],
        mut rng: Option<&mut R>,
    ) -> Result<ForwardCache<T>> {
        self.check_window(window)?;
        let allowed = attention_mask(window);
        let (mut x, embed) = self.embed_forward(window, rng.as_deref_mut());
        let mut layers = Vec::with_capacity(self.config.num_layers);
        for l in 0..self.config.num_layers {
            let (y, cache) = self.layer_forward(x, l, &allowed, rng.as_deref_mut());
            layers.push(cache);
            x = y;
        }
        Ok(ForwardCache {
            embed,
            layers,
            allowed,
            states: x,
        })
    }

    /// Embedding output without dropout, `max_len x hidden`.
    pub fn embed(&self, window: &[u32]) -> Result<Vec<T>> {
        self.check_window(window)?;
        Ok(self
            .embed_forward::<rand_chacha::ChaCha8Rng>(window, None)
            .0)
    }

    /// Attention branch of `layer` on input `x` (output projection included).
    pub fn causal_self_attention(&self, x: &[T], layer: usize, window: &[u32]) -> Result<Vec<T>> {
        self.check_input(x, layer, window)?;
        let allowed = attention_mask(window);
        Ok(self
            .attention_forward(x, &self.params.layout().layers[layer], &allowed)
            .0)
    }

    /// Layer-normalized rescaler output of `layer` on input `x`.
    pub fn rescaler_branch(&self, x: &[T], layer: usize) -> Result<Vec<T>> {
        self.check_shape(x, layer)?;
        Ok(self
            .rescaler_forward(x, &self.params.layout().layers[layer])
            .0)
    }

    /// Both branch outputs at the mixing point of `layer`.
    pub fn branches(&self, x: &[T], layer: usize, window: &[u32]) -> Result<Branches<T>> {
        self.check_input(x, layer, window)?;
        let allowed = attention_mask(window);
        let off = &self.params.layout().layers[layer];
        Ok(Branches {
            attention: self.attention_forward(x, off, &allowed).0,
            rescaler: self
                .config
                .include_rescaler
                .then(|| self.rescaler_forward(x, off).0),
        })
    }

    /// `(1 - alpha) * attention + alpha * rescaler`, before the residual.
    pub fn mix_point(&self, x: &[T], layer: usize, window: &[u32]) -> Result<Vec<T>> {
        let b = self.branches(x, layer, window)?;
        let alpha = T::of(self.config.alpha);
        let mut mix: Vec<T> = b
            .attention
            .iter()
            .map(|&a| (T::one() - alpha) * a)
            .collect();
        if let Some(r) = b.rescaler {
            mix.iter_mut().zip(&r).for_each(|(m, &v)| *m += alpha * v);
        }
        Ok(mix)
    }

    /// One full layer (mix, residual, norms, feed-forward) without dropout.
    pub fn bsa_layer(&self, x: &[T], layer: usize, window: &[u32]) -> Result<Vec<T>> {
        self.check_input(x, layer, window)?;
        let allowed = attention_mask(window);
        Ok(self
            .layer_forward::<rand_chacha::ChaCha8Rng>(x.to_vec(), layer, &allowed, None)
            .0)
    }

    fn check_shape(&self, x: &[T], layer: usize) -> Result<()> {
        if layer >= self.config.num_layers {
            return Err(Error::Shape(format!(
                "layer {layer} of {}",
                self.config.num_layers
            )));
        }
        if x.len() != self.config.max_len * self.config.hidden_size {
            return Err(Error::Shape(format!(
                "input has {} values, expected {}x{}",
                x.len(),
                self.config.max_len,
                self.config.hidden_size
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &[T], layer: usize, window: &[u32]) -> Result<()> {
        self.check_shape(x, layer)?;
        self.check_window(window)
    }

    /// Accumulates parameter gradients for `d_states` (gradient w.r.t. the
    /// final states) into `grads`.
    pub fn backward(&self, cache: &ForwardCache<T>, d_states: &[T], grads: &mut ParameterSet<T>) {
        let mut dx = d_states.to_vec();
        for l in (0..self.config.num_layers).rev() {
            dx = self.layer_backward(&cache.layers[l], l, &cache.allowed, dx, grads);
        }
        self.embed_backward(&cache.embed, dx, grads);
    }

    fn embed_backward(&self, cache: &EmbedCache<T>, mut dx: Vec<T>, grads: &mut ParameterSet<T>) {
        let p = &self.params;
        let lay = p.layout().clone();
        let h = lay.hidden;
        apply_mask(&mut dx, &cache.drop);
        let (dgain, dbias) = grads.pair_mut(&lay.embed.norm_gain, &lay.embed.norm_bias);
        let de0 = layer_norm_backward(
            &dx,
            &cache.norm,
            p.get(&lay.embed.norm_gain),
            h,
            dgain,
            dbias,
        );
        let items_start = lay.embed.items.start;
        let pos_start = lay.embed.positions.start;
        let g = grads.as_mut_slice();
        for (t, &id) in cache.ids.iter().enumerate() {
            let row = &de0[t * h..(t + 1) * h];
            let item = items_start + id as usize * h;
            for (o, &d) in g[item..item + h].iter_mut().zip(row) {
                *o += d;
            }
            let pos = pos_start + t * h;
            for (o, &d) in g[pos..pos + h].iter_mut().zip(row) {
                *o += d;
            }
        }
    }

    fn layer_backward(
        &self,
        c: &LayerCache<T>,
        layer: usize,
        allowed: &[bool],
        dy2: Vec<T>,
        grads: &mut ParameterSet<T>,
    ) -> Vec<T> {
        let p = &self.params;
        let lay = p.layout().clone();
        let off = &lay.layers[layer];
        let len = self.config.max_len;
        let h = self.config.hidden_size;
        let f = self.config.ffn_inner();
        let alpha = T::of(self.config.alpha);

        // feed-forward block
        let (dg, db) = grads.pair_mut(&off.ffn_gain, &off.ffn_bias);
        let dz2 = layer_norm_backward(&dy2, &c.ffn_norm, p.get(&off.ffn_gain), h, dg, db);
        let mut dy1 = dz2.clone();
        let mut dffn = dz2;
        apply_mask(&mut dffn, &c.drop_ffn);
        matmul_at_b_acc(&c.g, &dffn, len, f, h, grads.get_mut(&off.w2));
        col_sum_acc(&dffn, h, grads.get_mut(&off.b2));
        let mut dg_act = vec![T::zero(); len * f];
        matmul_a_bt_acc(&dffn, p.get(&off.w2), len, h, f, &mut dg_act);
        let du: Vec<T> = dg_act
            .iter()
            .zip(&c.u)
            .map(|(&d, &u)| d * gelu_grad(u))
            .collect();
        matmul_at_b_acc(&c.y1, &du, len, h, f, grads.get_mut(&off.w1));
        col_sum_acc(&du, f, grads.get_mut(&off.b1));
        matmul_a_bt_acc(&du, p.get(&off.w1), len, f, h, &mut dy1);

        // residual around the mix
        let (dg, db) = grads.pair_mut(&off.mix_gain, &off.mix_bias);
        let dz1 = layer_norm_backward(&dy1, &c.mix_norm, p.get(&off.mix_gain), h, dg, db);
        let mut dx = dz1.clone();
        let mut dmix = dz1;
        apply_mask(&mut dmix, &c.drop_mix);

        // rescaler branch
        if let (Some(hfc), Some(norm)) = (&c.hfc, &c.rescale_norm) {
            let dbranch: Vec<T> = dmix.iter().map(|&d| alpha * d).collect();
            let (dg, db) = grads.pair_mut(&off.rescale_gain, &off.rescale_bias);
            let drs = layer_norm_backward(&dbranch, norm, p.get(&off.rescale_gain), h, dg, db);
            let beta = p.get(&off.beta);
            let dbeta = grads.get_mut(&off.beta);
            let mut dlow = vec![T::zero(); len * h];
            for t in 0..len {
                for j in 0..h {
                    let d = drs[t * h + j];
                    dbeta[j] += d * hfc[t * h + j];
                    dx[t * h + j] += beta[j] * d;
                    dlow[t * h + j] = (T::one() - beta[j]) * d;
                }
            }
            matmul_acc(&self.lowpass_t, &dlow, len, len, h, &mut dx);
        }

        // attention branch
        let one_minus = T::one() - alpha;
        let dattn: Vec<T> = dmix.iter().map(|&d| one_minus * d).collect();
        matmul_at_b_acc(&c.ctx, &dattn, len, h, h, grads.get_mut(&off.wo));
        col_sum_acc(&dattn, h, grads.get_mut(&off.bo));
        let mut dctx = vec![T::zero(); len * h];
        matmul_a_bt_acc(&dattn, p.get(&off.wo), len, h, h, &mut dctx);

        let heads = self.config.num_heads;
        let dh = self.config.head_dim();
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut dq = vec![T::zero(); len * h];
        let mut dk = vec![T::zero(); len * h];
        let mut dv = vec![T::zero(); len * h];
        let mut dp = vec![T::zero(); len];
        for head in 0..heads {
            let c0 = head * dh;
            for t in 0..len {
                let probs = &c.probs[(head * len + t) * len..(head * len + t + 1) * len];
                let dct = &dctx[t * h + c0..t * h + c0 + dh];
                let mut weighted = T::zero();
                for s in 0..len {
                    if !allowed[t * len + s] {
                        dp[s] = T::zero();
                        continue;
                    }
                    dp[s] = super::tensor::dot(dct, &c.v[s * h + c0..s * h + c0 + dh]);
                    weighted += probs[s] * dp[s];
                    for (o, &d) in dv[s * h + c0..s * h + c0 + dh].iter_mut().zip(dct) {
                        *o += probs[s] * d;
                    }
                }
                for s in 0..len {
                    if !allowed[t * len + s] {
                        continue;
                    }
                    let ds = probs[s] * (dp[s] - weighted) * scale;
                    if ds == T::zero() {
                        continue;
                    }
                    for i in 0..dh {
                        dq[t * h + c0 + i] += ds * c.k[s * h + c0 + i];
                        dk[s * h + c0 + i] += ds * c.q[t * h + c0 + i];
                    }
                }
            }
        }
        for (dproj, w, b) in [
            (&dq, &off.wq, &off.bq),
            (&dk, &off.wk, &off.bk),
            (&dv, &off.wv, &off.bv),
        ] {
            matmul_at_b_acc(&c.x, dproj, len, h, h, grads.get_mut(w));
            col_sum_acc(dproj, h, grads.get_mut(b));
            matmul_a_bt_acc(dproj, p.get(w), len, h, h, &mut dx);
        }
        dx
    }
}
