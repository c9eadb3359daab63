//! Flat parameter storage with a named layout.

use std::ops::Range;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::tensor::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub shape: Vec<usize>,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOffsets {
    pub items: Range<usize>,
    pub positions: Range<usize>,
    pub norm_gain: Range<usize>,
    pub norm_bias: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOffsets {
    pub wq: Range<usize>,
    pub bq: Range<usize>,
    pub wk: Range<usize>,
    pub bk: Range<usize>,
    pub wv: Range<usize>,
    pub bv: Range<usize>,
    pub wo: Range<usize>,
    pub bo: Range<usize>,
    pub beta: Range<usize>,
    pub rescale_gain: Range<usize>,
    pub rescale_bias: Range<usize>,
    pub mix_gain: Range<usize>,
    pub mix_bias: Range<usize>,
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
    pub ffn_gain: Range<usize>,
    pub ffn_bias: Range<usize>,
}

/// Where every tensor lives inside the flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub num_items: usize,
    pub hidden: usize,
    pub max_len: usize,
    pub ffn_inner: usize,
    pub groups: Vec<Group>,
    pub embed: EmbedOffsets,
    pub layers: Vec<LayerOffsets>,
    pub total: usize,
}

struct Builder {
    groups: Vec<Group>,
    next: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: &[usize]) -> Range<usize> {
        let len: usize = shape.iter().product();
        let range = self.next..self.next + len;
        self.next += len;
        self.groups.push(Group {
            name,
            shape: shape.to_vec(),
            range: range.clone(),
        });
        range
    }
}

impl Layout {
    /// `num_items` excludes the pad row.
    pub fn new(config: &ModelConfig, num_items: usize) -> Self {
        let h = config.hidden_size;
        let f = config.ffn_inner();
        let mut b = Builder {
            groups: Vec::new(),
            next: 0,
        };
        let embed = EmbedOffsets {
            items: b.add("item_embeddings".into(), &[num_items + 1, h]),
            positions: b.add("position_embeddings".into(), &[config.max_len, h]),
            norm_gain: b.add("embedding_norm.gain".into(), &[h]),
            norm_bias: b.add("embedding_norm.bias".into(), &[h]),
        };
        let layers = (0..config.num_layers)
            .map(|l| {
                let mut add =
                    |name: &str, shape: &[usize]| b.add(format!("layers.{l}.{name}"), shape);
                LayerOffsets {
                    wq: add("attention.query.weight", &[h, h]),
                    bq: add("attention.query.bias", &[h]),
                    wk: add("attention.key.weight", &[h, h]),
                    bk: add("attention.key.bias", &[h]),
                    wv: add("attention.value.weight", &[h, h]),
                    bv: add("attention.value.bias", &[h]),
                    wo: add("attention.output.weight", &[h, h]),
                    bo: add("attention.output.bias", &[h]),
                    beta: add("rescaler.beta", &[h]),
                    rescale_gain: add("rescaler.norm.gain", &[h]),
                    rescale_bias: add("rescaler.norm.bias", &[h]),
                    mix_gain: add("mix_norm.gain", &[h]),
                    mix_bias: add("mix_norm.bias", &[h]),
                    w1: add("ffn.inner.weight", &[h, f]),
                    b1: add("ffn.inner.bias", &[f]),
                    w2: add("ffn.outer.weight", &[f, h]),
                    b2: add("ffn.outer.bias", &[h]),
                    ffn_gain: add("ffn_norm.gain", &[h]),
                    ffn_bias: add("ffn_norm.bias", &[h]),
                }
            })
            .collect();
        Layout {
            num_items,
            hidden: h,
            max_len: config.max_len,
            ffn_inner: f,
            total: b.next,
            groups: b.groups,
            embed,
            layers,
        }
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// The pad row of the item table, which stays at zero.
    pub fn pad_row(&self) -> Range<usize> {
        self.embed.items.start..self.embed.items.start + self.hidden
    }
}

/// All learnable values of one model, or a gradient with the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    layout: Arc<Layout>,
    data: Vec<T>,
}

impl<T: Real> ParameterSet<T> {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let data = vec![T::zero(); layout.total];
        ParameterSet { layout, data }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.layout.clone())
    }

    pub fn from_vec(layout: Arc<Layout>, data: Vec<T>) -> Option<Self> {
        (data.len() == layout.total).then_some(ParameterSet { layout, data })
    }

    /// Normal(0, init_std) weights and embeddings, zero biases, unit norm
    /// gains, and rescaler weights drawn as squared standard normals.
    pub fn init(layout: Arc<Layout>, init_std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, init_std).expect("positive std");
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut p = Self::zeros(layout.clone());
        let fill_normal = |p: &mut Self, r: &Range<usize>, rng: &mut ChaCha8Rng| {
            for v in &mut p.data[r.clone()] {
                *v = T::of(normal.sample(rng));
            }
        };
        fill_normal(&mut p, &layout.embed.items, &mut rng);
        fill_normal(&mut p, &layout.embed.positions, &mut rng);
        p.fill(&layout.embed.norm_gain, T::one());
        for l in &layout.layers {
            for r in [&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2] {
                fill_normal(&mut p, r, &mut rng);
            }
            for v in &mut p.data[l.beta.clone()] {
                let z: f64 = unit.sample(&mut rng);
                *v = T::of(z * z);
            }
            for g in [&l.rescale_gain, &l.mix_gain, &l.ffn_gain] {
                p.fill(g, T::one());
            }
        }
        p.project();
        p
    }

    fn fill(&mut self, r: &Range<usize>, v: T) {
        self.data[r.clone()].iter_mut().for_each(|x| *x = v);
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, r: &Range<usize>) -> &[T] {
        &self.data[r.clone()]
    }

    pub fn get_mut(&mut self, r: &Range<usize>) -> &mut [T] {
        &mut self.data[r.clone()]
    }

    /// Two disjoint mutable groups; `a` must lie before `b`.
    pub fn pair_mut(&mut self, a: &Range<usize>, b: &Range<usize>) -> (&mut [T], &mut [T]) {
        assert!(
            a.end <= b.start,
            "pair_mut ranges overlap or are out of order"
        );
        let (head, tail) = self.data.split_at_mut(b.start);
        (&mut head[a.clone()], &mut tail[..b.len()])
    }

    pub fn group(&self, name: &str) -> Option<&[T]> {
        self.layout.group(name).map(|g| &self.data[g.range.clone()])
    }

    pub fn item_row(&self, id: u32) -> &[T] {
        let h = self.layout.hidden;
        let start = self.layout.embed.items.start + id as usize * h;
        &self.data[start..start + h]
    }

    /// Clamps every rescaler weight to `[0, inf)` and re-zeros the pad row.
    pub fn project(&mut self) {
        for l in &self.layout.layers {
            for b in &mut self.data[l.beta.clone()] {
                if *b < T::zero() {
                    *b = T::zero();
                }
            }
        }
        let pad = self.layout.pad_row();
        self.data[pad].iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn set_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.layout, other.layout);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        ParameterSet {
            layout: self.layout.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}
