use std::path::{Path, PathBuf};

use tract_onnx::prelude::*;

use super::{Backend, TileContext};
use crate::error::{Error, Result};
use crate::raster::{ProbMap, RgbImage};

/// Model metadata key declaring whether the graph output is already a
/// probability.
pub const ACTIVATION_KEY: &str = "output_activation";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    /// Output is already in `[0, 1]`.
    SigmoidIncluded,
    /// Output is an unbounded score; a logistic is applied.
    Logits,
}

impl OutputActivation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sigmoid_included" => Some(Self::SigmoidIncluded),
            "logits" => Some(Self::Logits),
            _ => None,
        }
    }
}

type Plan = std::sync::Arc<TypedRunnableModel>;

/// Runs an ONNX segmentation graph on each tile.
///
/// Input: one `1x3xHxW` float tensor with RGB scaled to `[0, 1]`.
/// Output: one tensor whose trailing dimensions are `HxW` (e.g. `1x1xHxW`).
pub struct NeuralBackend {
    path: PathBuf,
    plan: Plan,
    input_dims: (usize, usize),
    activation: OutputActivation,
}

impl std::fmt::Debug for NeuralBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeuralBackend")
            .field("path", &self.path)
            .field("input_dims", &self.input_dims)
            .field("activation", &self.activation)
            .finish()
    }
}

impl NeuralBackend {
    /// Loads the model at `path` and specializes it for `width`x`height`
    /// tiles. Fails when the file is missing or malformed, when the
    /// activation metadata is absent, or when the graph cannot accept tiles
    /// of that size.
    pub fn load(path: impl AsRef<Path>, (width, height): (usize, usize)) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let fail = |reason: String| Error::Model {
            path: path.clone(),
            reason,
        };
        if !path.is_file() {
            return Err(fail("file not found".into()));
        }
        let onnx = tract_onnx::onnx();
        let proto = onnx
            .proto_model_for_path(&path)
            .map_err(|e| fail(format!("not a readable ONNX file: {e}")))?;
        let activation = proto
            .metadata_props
            .iter()
            .find(|p| p.key == ACTIVATION_KEY)
            .ok_or_else(|| fail(format!("metadata key `{ACTIVATION_KEY}` missing")))
            .and_then(|p| {
                OutputActivation::parse(&p.value)
                    .ok_or_else(|| fail(format!("unsupported {ACTIVATION_KEY} `{}`", p.value)))
            })?;
        let model = onnx
            .model_for_proto_model(&proto)
            .map_err(|e| fail(format!("invalid graph: {e:#}")))?;
        if model.inputs.len() != 1 || model.outputs.len() != 1 {
            return Err(fail(format!(
                "expected one input and one output, found {} and {}",
                model.inputs.len(),
                model.outputs.len()
            )));
        }
        let plan = model
            .with_input_fact(0, f32::fact([1, 3, height, width]).into())
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| fail(format!("cannot run on 1x3x{height}x{width} tiles: {e:#}")))?;
        Ok(Self {
            path,
            plan,
            input_dims: (width, height),
            activation,
        })
    }

    pub fn activation(&self) -> OutputActivation {
        self.activation
    }

    pub fn input_dims(&self) -> (usize, usize) {
        self.input_dims
    }
}

impl Backend for NeuralBackend {
    fn predict(&self, tile: &RgbImage, ctx: &TileContext) -> Result<ProbMap> {
        tile.ensure_channels(3)?;
        let (w, h) = tile.dims();
        let fail = |reason: String| Error::Tile {
            index: ctx.index,
            x: ctx.origin.0,
            y: ctx.origin.1,
            reason,
        };
        if (w, h) != self.input_dims {
            return Err(fail(format!(
                "tile is {w}x{h} but the model was prepared for {}x{}",
                self.input_dims.0, self.input_dims.1
            )));
        }
        let data = tile.data();
        let input: Tensor = tract_ndarray::Array4::from_shape_fn((1, 3, h, w), |(_, c, y, x)| {
            data[(y * w + x) * 3 + c] as f32 / 255.0
        })
        .into();
        let outputs = self
            .plan
            .run(tvec!(input.into()))
            .map_err(|e| fail(format!("inference failed: {e:#}")))?;
        let view = outputs[0]
            .to_plain_array_view::<f32>()
            .map_err(|e| fail(format!("output is not f32: {e:#}")))?;
        let shape = view.shape();
        let trailing_ok = shape.len() >= 2 && shape[shape.len() - 2..] == [h, w];
        if !trailing_ok || view.len() != w * h {
            return Err(fail(format!("output shape {shape:?}, expected [.., {h}, {w}]")));
        }
        let mut values = Vec::with_capacity(w * h);
        for &v in view.iter() {
            let p = match self.activation {
                OutputActivation::SigmoidIncluded => v,
                OutputActivation::Logits => 1.0 / (1.0 + (-v).exp()),
            };
            if !p.is_finite() {
                return Err(fail(format!("non-finite model output {v}")));
            }
            values.push(p.clamp(0.0, 1.0));
        }
        ProbMap::new(w, h, 1, values)
    }

    fn name(&self) -> &str {
        "neural"
    }
}
