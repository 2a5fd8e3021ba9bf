//! The bidirectional recurrent-convolutional classifier.
//!
//! Each direction has its own RCNN: a word LSTM and a relation LSTM run
//! along the path, every pair of neighbouring words plus the relation
//! between them forms a dependency unit `[h_a ; r_ab ; h_b]`, a tanh
//! convolution maps each unit to `conv_dim` features, and max pooling
//! collapses the units into one vector `G`. The backward RCNN reads the
//! inverted path, so its relation inputs use the reverse-direction rows of
//! the relation table.
//!
//! Heads: a fine `(2K+1)`-way softmax per direction and a coarse `(K+1)`-way
//! softmax over `[G_fwd ; G_bwd]`.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use super::config::{ConfigError, ModelConfig};
use super::labels::{z_index, z_map, RelationLabel};
use super::lstm::{glorot, lstm_sequence, LstmCell};
use super::vocab::{PathFeatures, Vocab};
use crate::depgraph::{DependencyTree, SdpPath};
use crate::numcore::{dropout_mask, mix_seed, Gradients, NumError, ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("path has no nodes")]
    EmptyPath,
    #[error("relation type {kind} is outside the {k} configured types")]
    UnknownLabel { kind: usize, k: usize },
    #[error("missing parameter {0:?}")]
    MissingParam(String),
    #[error("embedding file has dimension {found}, model expects {expected}")]
    EmbeddingDim { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathDirection {
    Forward,
    Backward,
}

/// Whether dropout masks are drawn, and from which seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    fn register(
        store: &mut ParamStore,
        prefix: &str,
        out: usize,
        inp: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        Ok(Linear {
            w: store.add(format!("{prefix}.w"), glorot(rng, out, inp))?,
            b: store.add(format!("{prefix}.b"), Tensor::zeros(&[out]))?,
        })
    }

    fn lookup(store: &ParamStore, prefix: &str) -> Option<Self> {
        Some(Linear {
            w: store.id(&format!("{prefix}.w"))?,
            b: store.id(&format!("{prefix}.b"))?,
        })
    }

    fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var, NumError> {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        let wx = tape.matmul(w, x)?;
        tape.add(wx, b)
    }
}

/// `W_con` and `b_con` of one direction.
pub type ConvLayer = Linear;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rcnn {
    pub word_lstm: LstmCell,
    pub rel_lstm: LstmCell,
    pub conv: ConvLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifierHeads {
    pub fine_fwd: Linear,
    /// Same as `fine_fwd` when heads are shared.
    pub fine_bwd: Linear,
    pub coarse: Linear,
}

/// Both reading directions of one path, plus the gold label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub forward: PathFeatures,
    pub backward: PathFeatures,
    pub gold: RelationLabel,
}

/// Output distributions for one example.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub y_fwd: Vec<f64>,
    pub y_bwd: Vec<f64>,
    pub y_coarse: Vec<f64>,
    /// Set by [`decode`].
    pub y_test: Option<Vec<f64>>,
}

/// Tape handles of the three softmax outputs.
#[derive(Clone, Copy, Debug)]
pub struct Outputs {
    pub y_fwd: Var,
    pub y_bwd: Var,
    pub y_coarse: Var,
}

/// Result of one forward/backward pass.
#[derive(Clone, Debug)]
pub struct Objective {
    /// Sum of the three cross-entropies.
    pub data_loss: f64,
    /// `lambda * ||theta||^2`, not included in `grads`.
    pub penalty: f64,
    pub grads: Gradients,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.data_loss + self.penalty
    }
}

#[derive(Clone, Debug)]
pub struct Brcnn {
    config: ModelConfig,
    vocab: Vocab,
    store: ParamStore,
    word_emb: ParamId,
    rel_emb: ParamId,
    fwd: Rcnn,
    bwd: Rcnn,
    heads: ClassifierHeads,
}

pub fn is_embedding(name: &str) -> bool {
    name.starts_with("emb.")
}

impl Brcnn {
    /// Fresh parameters: embeddings uniform in `[-0.1, 0.1]`, weight
    /// matrices Glorot-uniform, biases zero.
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (wd, rd, cd) = (config.word_dim, config.rel_dim, config.conv_dim);

        let uniform = |rows: usize, cols: usize, rng: &mut Xoshiro256PlusPlus| {
            let data = (0..rows * cols).map(|_| rng.gen_range(-0.1..=0.1)).collect();
            Tensor::matrix(rows, cols, data).expect("positive dims")
        };
        let word_emb = store.add("emb.word", uniform(vocab.word_rows(), wd, &mut rng))?;
        let rel_emb = store.add("emb.rel", uniform(vocab.relation_rows(), rd, &mut rng))?;

        let rcnn = |dir: &str, store: &mut ParamStore, rng: &mut Xoshiro256PlusPlus| -> Result<Rcnn, NumError> {
            Ok(Rcnn {
                word_lstm: LstmCell::register(store, &format!("{dir}.word_lstm"), wd, wd, rng)?,
                rel_lstm: LstmCell::register(store, &format!("{dir}.rel_lstm"), rd, rd, rng)?,
                conv: Linear::register(store, &format!("{dir}.conv"), cd, config.unit_dim(), rng)?,
            })
        };
        let fwd = rcnn("fwd", &mut store, &mut rng)?;
        let bwd = rcnn("bwd", &mut store, &mut rng)?;

        let fine_fwd = Linear::register(&mut store, "head.fine_fwd", config.fine_classes(), cd, &mut rng)?;
        let fine_bwd = if config.share_fine_heads {
            fine_fwd
        } else {
            Linear::register(&mut store, "head.fine_bwd", config.fine_classes(), cd, &mut rng)?
        };
        let coarse = Linear::register(&mut store, "head.coarse", config.coarse_classes(), 2 * cd, &mut rng)?;

        Ok(Brcnn {
            config,
            vocab,
            store,
            word_emb,
            rel_emb,
            fwd,
            bwd,
            heads: ClassifierHeads {
                fine_fwd,
                fine_bwd,
                coarse,
            },
        })
    }

    /// Reassembles a model around an existing parameter store.
    pub fn from_parts(config: ModelConfig, vocab: Vocab, store: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        let missing = |n: &str| ModelError::MissingParam(n.to_string());
        let id = |n: &str| store.id(n).ok_or_else(|| missing(n));
        let rcnn = |dir: &str| -> Result<Rcnn, ModelError> {
            let cell = |c: &str| {
                let p = format!("{dir}.{c}");
                LstmCell::lookup(&store, &p).ok_or_else(|| missing(&p))
            };
            Ok(Rcnn {
                word_lstm: cell("word_lstm")?,
                rel_lstm: cell("rel_lstm")?,
                conv: Linear::lookup(&store, &format!("{dir}.conv")).ok_or_else(|| missing(dir))?,
            })
        };
        let lin = |p: &str| Linear::lookup(&store, p).ok_or_else(|| missing(p));
        let fine_fwd = lin("head.fine_fwd")?;
        let fine_bwd = if config.share_fine_heads {
            fine_fwd
        } else {
            lin("head.fine_bwd")?
        };
        let model = Brcnn {
            word_emb: id("emb.word")?,
            rel_emb: id("emb.rel")?,
            fwd: rcnn("fwd")?,
            bwd: rcnn("bwd")?,
            heads: ClassifierHeads {
                fine_fwd,
                fine_bwd,
                coarse: lin("head.coarse")?,
            },
            config,
            vocab,
            store,
        };
        let expect = |id: ParamId, shape: &[usize]| -> Result<(), ModelError> {
            let got = model.store.value(id).shape();
            if got != shape {
                return Err(NumError::ShapeMismatch {
                    op: "from_parts",
                    left: got.to_vec(),
                    right: shape.to_vec(),
                }
                .into());
            }
            Ok(())
        };
        let c = &model.config;
        expect(model.word_emb, &[model.vocab.word_rows(), c.word_dim])?;
        expect(model.rel_emb, &[model.vocab.relation_rows(), c.rel_dim])?;
        expect(model.heads.coarse.w, &[c.coarse_classes(), 2 * c.conv_dim])?;
        expect(model.heads.fine_fwd.w, &[c.fine_classes(), c.conv_dim])?;
        expect(model.fwd.conv.w, &[c.conv_dim, c.unit_dim()])?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn into_parts(self) -> (ModelConfig, Vocab, ParamStore) {
        (self.config, self.vocab, self.store)
    }

    pub fn rcnn(&self, direction: PathDirection) -> &Rcnn {
        match direction {
            PathDirection::Forward => &self.fwd,
            PathDirection::Backward => &self.bwd,
        }
    }

    pub fn heads(&self) -> &ClassifierHeads {
        &self.heads
    }

    /// Copies pre-trained vectors into the word table. Returns how many
    /// vocabulary words were found.
    pub fn load_word_vectors(
        &mut self,
        vectors: &std::collections::HashMap<String, Vec<f64>>,
    ) -> Result<usize, ModelError> {
        let dim = self.config.word_dim;
        if let Some(v) = vectors.values().next() {
            if v.len() != dim {
                return Err(ModelError::EmbeddingDim {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        let mut hits = 0;
        for row in 1..self.vocab.word_rows() {
            if let Some(v) = vectors.get(self.vocab.word(row)) {
                self.store.value_mut(self.word_emb).row_mut(row).copy_from_slice(v);
                hits += 1;
            }
        }
        Ok(hits)
    }

    pub fn features(&self, path: &SdpPath, tree: &DependencyTree) -> PathFeatures {
        PathFeatures::new(path, tree, &self.vocab)
    }

    /// Features for both reading directions of `path`.
    pub fn example(&self, path: &SdpPath, tree: &DependencyTree, gold: RelationLabel) -> Example {
        Example {
            forward: self.features(path, tree),
            backward: self.features(&path.inverted(), tree),
            gold,
        }
    }

    fn embed(
        &self,
        tape: &mut Tape,
        table: ParamId,
        row: usize,
        mode: Mode,
        stream: &mut u64,
    ) -> Result<Var, NumError> {
        let v = tape.row(table, row)?;
        match mode {
            Mode::Train { seed } if self.config.keep_prob < 1.0 => {
                let dim = tape.value(v).len();
                let mask = dropout_mask(&[dim], self.config.keep_prob, mix_seed(seed, *stream));
                *stream += 1;
                let m = tape.constant(mask);
                tape.mul(v, m)
            }
            _ => Ok(v),
        }
    }

    /// Word-channel and relation-channel hidden states along one path. For
    /// [`PathDirection::Backward`], `features` must already describe the
    /// inverted path.
    pub fn encode_features(
        &self,
        tape: &mut Tape,
        features: &PathFeatures,
        direction: PathDirection,
        mode: Mode,
        stream: &mut u64,
    ) -> Result<(Vec<Var>, Vec<Var>), ModelError> {
        if features.words.is_empty() {
            return Err(ModelError::EmptyPath);
        }
        let rcnn = *self.rcnn(direction);
        let words = features
            .words
            .iter()
            .map(|&w| self.embed(tape, self.word_emb, w, mode, stream))
            .collect::<Result<Vec<_>, _>>()?;
        let rels = features
            .relations
            .iter()
            .map(|&r| self.embed(tape, self.rel_emb, r, mode, stream))
            .collect::<Result<Vec<_>, _>>()?;
        let v = self.config.lstm_variant;
        let h = lstm_sequence(tape, &rcnn.word_lstm, v, &words)?;
        let r = lstm_sequence(tape, &rcnn.rel_lstm, v, &rels)?;
        Ok((h, r))
    }

    /// Encodes `path` read in `direction`; the backward reading inverts it
    /// first.
    pub fn encode_path(
        &self,
        tape: &mut Tape,
        path: &SdpPath,
        tree: &DependencyTree,
        direction: PathDirection,
        mode: Mode,
    ) -> Result<(Vec<Var>, Vec<Var>), ModelError> {
        let path = match direction {
            PathDirection::Forward => path.clone(),
            PathDirection::Backward => path.inverted(),
        };
        let feats = self.features(&path, tree);
        let mut stream = 0;
        self.encode_features(tape, &feats, direction, mode, &mut stream)
    }

    /// Convolution over dependency units followed by elementwise max.
    /// A single-node path is treated as one unit `[h ; 0 ; h]`.
    pub fn conv_pool(
        &self,
        tape: &mut Tape,
        direction: PathDirection,
        words: &[Var],
        rels: &[Var],
    ) -> Result<Var, ModelError> {
        let conv = self.rcnn(direction).conv;
        let mut units = Vec::new();
        if words.len() == 1 {
            let zero = tape.constant(Tensor::zeros(&[self.config.rel_dim]));
            units.push(tape.concat(&[words[0], zero, words[0]])?);
        } else {
            for (ab, rel) in words.windows(2).zip(rels) {
                units.push(tape.concat(&[ab[0], *rel, ab[1]])?);
            }
        }
        let mut feats = Vec::with_capacity(units.len());
        for u in units {
            let z = conv.apply(tape, u)?;
            feats.push(tape.tanh(z));
        }
        Ok(tape.max_over(&feats)?)
    }

    pub fn classify(&self, tape: &mut Tape, g_fwd: Var, g_bwd: Var) -> Result<Outputs, ModelError> {
        let zf = self.heads.fine_fwd.apply(tape, g_fwd)?;
        let zb = self.heads.fine_bwd.apply(tape, g_bwd)?;
        let both = tape.concat(&[g_fwd, g_bwd])?;
        let zc = self.heads.coarse.apply(tape, both)?;
        Ok(Outputs {
            y_fwd: tape.softmax(zf)?,
            y_bwd: tape.softmax(zb)?,
            y_coarse: tape.softmax(zc)?,
        })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        forward: &PathFeatures,
        backward: &PathFeatures,
        mode: Mode,
    ) -> Result<Outputs, ModelError> {
        let mut stream = 0;
        let (hf, rf) = self.encode_features(tape, forward, PathDirection::Forward, mode, &mut stream)?;
        let g_fwd = self.conv_pool(tape, PathDirection::Forward, &hf, &rf)?;
        let (hb, rb) = self.encode_features(tape, backward, PathDirection::Backward, mode, &mut stream)?;
        let g_bwd = self.conv_pool(tape, PathDirection::Backward, &hb, &rb)?;
        self.classify(tape, g_fwd, g_bwd)
    }

    fn check_label(&self, gold: RelationLabel) -> Result<(), ModelError> {
        let k = self.config.num_relations;
        match gold.kind() {
            Some(kind) if kind >= k => Err(ModelError::UnknownLabel { kind, k }),
            _ => Ok(()),
        }
    }

    /// Cross-entropy part of the objective: forward head against the gold
    /// fine class, backward head against its direction-swapped class, and
    /// the coarse head against the undirected type.
    pub fn data_loss(&self, tape: &mut Tape, out: &Outputs, gold: RelationLabel) -> Result<Var, ModelError> {
        self.check_label(gold)?;
        let k = self.config.num_relations;
        let t = gold.fine_index(k);
        let a = tape.cross_entropy(out.y_fwd, t)?;
        let b = tape.cross_entropy(out.y_bwd, z_index(t, k))?;
        let c = tape.cross_entropy(out.y_coarse, gold.coarse_index(k))?;
        Ok(tape.sum_scalars(&[a, b, c])?)
    }

    pub fn penalty(&self) -> f64 {
        let emb = self.config.l2_embeddings;
        self.store.l2_penalty(self.config.lambda, |n| emb || !is_embedding(n))
    }

    /// Adds the L2 term's gradient `2 lambda theta` to the store.
    pub fn accumulate_penalty_grad(&mut self) {
        let emb = self.config.l2_embeddings;
        let lambda = self.config.lambda;
        self.store.accumulate_l2_grad(lambda, |n| emb || !is_embedding(n));
    }

    pub fn objective(&self, ex: &Example, mode: Mode) -> Result<Objective, ModelError> {
        let mut tape = Tape::new(&self.store);
        let out = self.forward(&mut tape, &ex.forward, &ex.backward, mode)?;
        let loss = self.data_loss(&mut tape, &out, ex.gold)?;
        let data_loss = tape.value(loss).item();
        let grads = tape.backward(loss)?;
        Ok(Objective {
            data_loss,
            penalty: self.penalty(),
            grads,
        })
    }

    pub fn predict_features(&self, forward: &PathFeatures, backward: &PathFeatures) -> Result<Prediction, ModelError> {
        let mut tape = Tape::new(&self.store);
        let out = self.forward(&mut tape, forward, backward, Mode::Eval)?;
        Ok(Prediction {
            y_fwd: tape.value(out.y_fwd).data().to_vec(),
            y_bwd: tape.value(out.y_bwd).data().to_vec(),
            y_coarse: tape.value(out.y_coarse).data().to_vec(),
            y_test: None,
        })
    }

    pub fn predict(&self, ex: &Example) -> Result<Prediction, ModelError> {
        self.predict_features(&ex.forward, &ex.backward)
    }
}

/// The full objective evaluated on finished distributions:
/// `CE(y_fwd, t) + CE(y_bwd, z(t)) + CE(y_coarse, coarse(t)) + penalty`.
pub fn loss(pred: &Prediction, gold: RelationLabel, penalty: f64) -> Result<f64, ModelError> {
    let k = pred.y_coarse.len() - 1;
    if let Some(kind) = gold.kind() {
        if kind >= k {
            return Err(ModelError::UnknownLabel { kind, k });
        }
    }
    let ce = |p: &[f64], t: usize| -p[t].max(f64::MIN_POSITIVE).ln();
    let t = gold.fine_index(k);
    let mut total = 0.0;
    total += ce(&pred.y_fwd, t);
    total += ce(&pred.y_bwd, z_index(t, k));
    total += ce(&pred.y_coarse, gold.coarse_index(k));
    Ok(total + penalty)
}

/// `y_test = alpha * y_fwd + (1 - alpha) * z(y_bwd)`; returns its argmax
/// (lowest index on ties) and stores `y_test` on the prediction.
pub fn decode(pred: &mut Prediction, alpha: f64) -> usize {
    let zb = z_map(&pred.y_bwd);
    let y: Vec<f64> = pred
        .y_fwd
        .iter()
        .zip(&zb)
        .map(|(f, b)| alpha * f + (1.0 - alpha) * b)
        .collect();
    let mut best = 0;
    for (i, &v) in y.iter().enumerate() {
        if v > y[best] {
            best = i;
        }
    }
    pred.y_test = Some(y);
    best
}
