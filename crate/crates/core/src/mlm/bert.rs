//! BERT masked-LM inference on the CPU.
//!
//! Loads a model directory holding `config.json` (Hugging Face BERT config),
//! `model.safetensors` (f32 weights, Hugging Face tensor names), `vocab.txt`
//! and an optional `descriptor.json`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use safetensors::{Dtype, SafeTensors};
use serde::Deserialize;

use super::tokenizer::WordPieceTokenizer;
use super::vocab::{ModelDescriptor, Vocab};
use super::{EncodedInput, MaskedLanguageModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BertConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_act")]
    pub hidden_act: String,
}

fn default_type_vocab() -> usize {
    2
}

fn default_eps() -> f64 {
    1e-12
}

fn default_act() -> String {
    "gelu".into()
}

#[derive(Debug, Clone, Copy)]
enum Activation {
    Gelu,
    GeluTanh,
}

impl Activation {
    fn parse(name: &str) -> Result<Self> {
        match name {
            "gelu" => Ok(Activation::Gelu),
            "gelu_new" | "gelu_pytorch_tanh" | "gelu_fast" => Ok(Activation::GeluTanh),
            other => Err(Error::Model(format!("unsupported activation {other}"))),
        }
    }

    fn apply(self, x: &mut Array2<f32>) {
        match self {
            Activation::Gelu => x.mapv_inplace(|v| 0.5 * v * (1.0 + libm::erff(v * std::f32::consts::FRAC_1_SQRT_2))),
            Activation::GeluTanh => {
                let c = (2.0f32 / std::f32::consts::PI).sqrt();
                x.mapv_inplace(|v| 0.5 * v * (1.0 + libm::tanhf(c * (v + 0.044715 * v * v * v))))
            }
        }
    }
}

#[derive(Debug)]
struct Linear {
    /// `[out, in]`, as stored by PyTorch.
    weight: Array2<f32>,
    bias: Array1<f32>,
}

impl Linear {
    fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

#[derive(Debug)]
struct LayerNorm {
    gamma: Array1<f32>,
    beta: Array1<f32>,
    eps: f32,
}

impl LayerNorm {
    fn forward(&self, mut x: Array2<f32>) -> Array2<f32> {
        let width = x.ncols() as f32;
        for mut row in x.rows_mut() {
            let mean = row.sum() / width;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / width;
            let inv = 1.0 / (var + self.eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            row *= &self.gamma;
            row += &self.beta;
        }
        x
    }
}

#[derive(Debug)]
struct EncoderLayer {
    query: Linear,
    key: Linear,
    value: Linear,
    attention_out: Linear,
    attention_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    output_norm: LayerNorm,
}

/// BERT encoder plus masked-LM head.
pub struct BertBackend {
    config: BertConfig,
    tokenizer: WordPieceTokenizer,
    max_length: usize,
    activation: Activation,
    word_embeddings: Array2<f32>,
    position_embeddings: Array2<f32>,
    type_embeddings: Array2<f32>,
    embedding_norm: LayerNorm,
    layers: Vec<EncoderLayer>,
    head_transform: Linear,
    head_norm: LayerNorm,
    /// `[vocab, hidden]`; tied to the word embeddings when not stored.
    decoder: Option<Array2<f32>>,
    decoder_bias: Array1<f32>,
}

impl std::fmt::Debug for BertBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BertBackend")
            .field("config", &self.config)
            .field("max_length", &self.max_length)
            .finish_non_exhaustive()
    }
}

impl BertBackend {
    pub const WEIGHTS_FILE: &'static str = "model.safetensors";
    pub const CONFIG_FILE: &'static str = "config.json";

    pub fn load(dir: &Path) -> Result<Self> {
        let descriptor = ModelDescriptor::load_dir(dir)?;
        let vocab = Vocab::load(&dir.join(Vocab::FILE_NAME), &descriptor)?;

        let config_path = dir.join(Self::CONFIG_FILE);
        let config_text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let config: BertConfig = serde_json::from_str(&config_text)
            .map_err(|e| Error::parse(config_path.display().to_string(), e.line(), e.to_string()))?;

        let weights_path = dir.join(Self::WEIGHTS_FILE);
        let bytes = fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
        let tensors =
            SafeTensors::deserialize(&bytes).map_err(|e| Error::Model(format!("{}: {e}", weights_path.display())))?;

        Self::from_tensors(config, descriptor, vocab, &tensors)
    }

    fn from_tensors(
        config: BertConfig,
        descriptor: ModelDescriptor,
        vocab: Vocab,
        tensors: &SafeTensors<'_>,
    ) -> Result<Self> {
        if vocab.len() != config.vocab_size {
            return Err(Error::Model(format!(
                "vocabulary has {} entries but the model expects {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        if config.num_attention_heads == 0 || !config.hidden_size.is_multiple_of(config.num_attention_heads) {
            return Err(Error::Model("hidden size must be a multiple of the head count".into()));
        }
        let w = Weights { tensors };
        let h = config.hidden_size;
        let eps = config.layer_norm_eps as f32;
        let linear = |prefix: &str, out: usize, input: usize| -> Result<Linear> {
            Ok(Linear {
                weight: w.matrix(&format!("{prefix}.weight"), out, input)?,
                bias: w.vector(&format!("{prefix}.bias"), out)?,
            })
        };
        let norm = |prefix: &str| -> Result<LayerNorm> {
            Ok(LayerNorm {
                gamma: w.vector_any(&[&format!("{prefix}.weight"), &format!("{prefix}.gamma")], h)?,
                beta: w.vector_any(&[&format!("{prefix}.bias"), &format!("{prefix}.beta")], h)?,
                eps,
            })
        };

        let mut layers = Vec::with_capacity(config.num_hidden_layers);
        for i in 0..config.num_hidden_layers {
            let p = format!("bert.encoder.layer.{i}");
            layers.push(EncoderLayer {
                query: linear(&format!("{p}.attention.self.query"), h, h)?,
                key: linear(&format!("{p}.attention.self.key"), h, h)?,
                value: linear(&format!("{p}.attention.self.value"), h, h)?,
                attention_out: linear(&format!("{p}.attention.output.dense"), h, h)?,
                attention_norm: norm(&format!("{p}.attention.output.LayerNorm"))?,
                intermediate: linear(&format!("{p}.intermediate.dense"), config.intermediate_size, h)?,
                output: linear(&format!("{p}.output.dense"), h, config.intermediate_size)?,
                output_norm: norm(&format!("{p}.output.LayerNorm"))?,
            });
        }

        let word_embeddings = w.matrix("bert.embeddings.word_embeddings.weight", config.vocab_size, h)?;
        let decoder = if w.has("cls.predictions.decoder.weight") {
            Some(w.matrix("cls.predictions.decoder.weight", config.vocab_size, h)?)
        } else {
            None
        };
        let decoder_bias = w.vector_any(
            &["cls.predictions.bias", "cls.predictions.decoder.bias"],
            config.vocab_size,
        )?;

        let max_length = descriptor.max_length.min(config.max_position_embeddings);
        Ok(Self {
            activation: Activation::parse(&config.hidden_act)?,
            word_embeddings,
            position_embeddings: w.matrix(
                "bert.embeddings.position_embeddings.weight",
                config.max_position_embeddings,
                h,
            )?,
            type_embeddings: w.matrix(
                "bert.embeddings.token_type_embeddings.weight",
                config.type_vocab_size,
                h,
            )?,
            embedding_norm: norm("bert.embeddings.LayerNorm")?,
            layers,
            head_transform: linear("cls.predictions.transform.dense", h, h)?,
            head_norm: norm("cls.predictions.transform.LayerNorm")?,
            decoder,
            decoder_bias,
            tokenizer: WordPieceTokenizer::new(Arc::new(vocab), descriptor.lowercase),
            max_length,
            config,
        })
    }

    pub fn config(&self) -> &BertConfig {
        &self.config
    }

    fn check(&self, input: &EncodedInput) -> Result<()> {
        let n = input.ids.len();
        if n == 0 || n != input.type_ids.len() {
            return Err(Error::MalformedInput(
                "ids and segment ids must be non-empty and equal length".into(),
            ));
        }
        if n > self.max_length {
            return Err(Error::SequenceTooLong {
                required: n,
                allowed: self.max_length,
            });
        }
        if input.position >= n {
            return Err(Error::PositionOutOfRange {
                position: input.position,
                len: n,
            });
        }
        if input.ids.iter().any(|&id| id as usize >= self.config.vocab_size) {
            return Err(Error::MalformedInput("token id outside the vocabulary".into()));
        }
        if input
            .type_ids
            .iter()
            .any(|&t| t as usize >= self.config.type_vocab_size)
        {
            return Err(Error::MalformedInput("segment id outside the type vocabulary".into()));
        }
        Ok(())
    }

    /// Final hidden states of every row of every input, stacked.
    fn encode(&self, batch: &[EncodedInput]) -> Array2<f32> {
        let h = self.config.hidden_size;
        let rows: usize = batch.iter().map(|b| b.ids.len()).sum();
        let mut x = Array2::<f32>::zeros((rows, h));
        let mut r = 0;
        for input in batch {
            for (pos, (&id, &ty)) in input.ids.iter().zip(&input.type_ids).enumerate() {
                let mut row = x.row_mut(r);
                row += &self.word_embeddings.row(id as usize);
                row += &self.position_embeddings.row(pos);
                row += &self.type_embeddings.row(ty as usize);
                r += 1;
            }
        }
        let mut x = self.embedding_norm.forward(x);

        let heads = self.config.num_attention_heads;
        let head_dim = h / heads;
        let scale = 1.0 / (head_dim as f32).sqrt();
        for layer in &self.layers {
            let q = layer.query.forward(&x);
            let k = layer.key.forward(&x);
            let v = layer.value.forward(&x);
            let mut context = Array2::<f32>::zeros((rows, h));
            let mut start = 0;
            for input in batch {
                let end = start + input.ids.len();
                for head in 0..heads {
                    let cols = head * head_dim..(head + 1) * head_dim;
                    let qh = q.slice(s![start..end, cols.clone()]);
                    let kh = k.slice(s![start..end, cols.clone()]);
                    let vh = v.slice(s![start..end, cols.clone()]);
                    let mut scores = qh.dot(&kh.t()) * scale;
                    softmax_rows(&mut scores);
                    context.slice_mut(s![start..end, cols]).assign(&scores.dot(&vh));
                }
                start = end;
            }
            let attended = layer.attention_out.forward(&context) + &x;
            let attended = layer.attention_norm.forward(attended);
            let mut inner = layer.intermediate.forward(&attended);
            self.activation.apply(&mut inner);
            let out = layer.output.forward(&inner) + &attended;
            x = layer.output_norm.forward(out);
        }
        x
    }
}

impl MaskedLanguageModel for BertBackend {
    fn tokenizer(&self) -> &WordPieceTokenizer {
        &self.tokenizer
    }

    fn max_length(&self) -> usize {
        self.max_length
    }

    fn mask_logits(&self, batch: &[EncodedInput]) -> Result<Vec<Vec<f64>>> {
        for input in batch {
            self.check(input)?;
        }
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let hidden = self.encode(batch);
        let mut offsets = Vec::with_capacity(batch.len());
        let mut start = 0;
        for input in batch {
            offsets.push(start + input.position);
            start += input.ids.len();
        }
        let picked = hidden.select(Axis(0), &offsets);
        let mut transformed = self.head_transform.forward(&picked);
        self.activation.apply(&mut transformed);
        let transformed = self.head_norm.forward(transformed);
        let decoder: ArrayView2<'_, f32> = match &self.decoder {
            Some(d) => d.view(),
            None => self.word_embeddings.view(),
        };
        let logits = transformed.dot(&decoder.t()) + &self.decoder_bias;
        Ok(logits
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&v| f64::from(v)).collect())
            .collect())
    }
}

fn softmax_rows(x: &mut Array2<f32>) {
    for mut row in x.rows_mut() {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        row.mapv_inplace(|v| libm::expf(v - max));
        let sum = row.sum();
        row /= sum;
    }
}

struct Weights<'a, 'b> {
    tensors: &'a SafeTensors<'b>,
}

impl Weights<'_, '_> {
    // Checkpoints exported from the bare encoder lack the "bert." prefix.
    fn resolve(&self, name: &str) -> Option<String> {
        let names = self.tensors.names();
        if names.contains(&name) {
            return Some(name.to_string());
        }
        let bare = name.strip_prefix("bert.")?;
        names.contains(&bare).then(|| bare.to_string())
    }

    fn has(&self, name: &str) -> bool {
        self.resolve(name).is_some()
    }

    fn data(&self, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
        let resolved = self
            .resolve(name)
            .ok_or_else(|| Error::Model(format!("missing tensor {name}")))?;
        let view = self
            .tensors
            .tensor(&resolved)
            .map_err(|e| Error::Model(format!("{resolved}: {e}")))?;
        if view.dtype() != Dtype::F32 {
            return Err(Error::Model(format!(
                "{resolved}: expected F32, found {:?}",
                view.dtype()
            )));
        }
        if view.shape() != shape {
            return Err(Error::Model(format!(
                "{resolved}: expected shape {shape:?}, found {:?}",
                view.shape()
            )));
        }
        Ok(view
            .data()
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Array2<f32>> {
        let data = self.data(name, &[rows, cols])?;
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Model(format!("{name}: {e}")))
    }

    fn vector(&self, name: &str, len: usize) -> Result<Array1<f32>> {
        Ok(Array1::from(self.data(name, &[len])?))
    }

    fn vector_any(&self, names: &[&str], len: usize) -> Result<Array1<f32>> {
        for name in names {
            if self.has(name) {
                return self.vector(name, len);
            }
        }
        Err(Error::Model(format!("missing tensor {}", names[0])))
    }
}
