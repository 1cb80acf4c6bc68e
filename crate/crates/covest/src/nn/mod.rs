//! Minimal feed-forward network engine: dense and 2-D convolution
//! layers (valid padding, stride 1), ReLU, MAE loss, reverse-mode
//! gradients, and Adam. Exactly the layer set the estimator
//! architectures need, nothing more.
//!
//! The arithmetic is generic over `f32`/`f64`: training runs in single
//! precision for throughput, gradient checks instantiate the same code
//! in double precision.

mod adam;
mod net;
mod weights;

pub use adam::AdamState;
pub use net::{mae_loss, Batch, Gradients, Network, NnScalar};
pub use weights::{TrainMeta, WeightStore, WEIGHT_FORMAT_VERSION};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn tag(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

/// One layer of a sequential model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel_h: usize,
        kernel_w: usize,
        activation: Activation,
    },
    Dense {
        units: usize,
        activation: Activation,
    },
    Flatten,
}

/// Shape of the tensor flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Height × width × channels.
    Image(usize, usize, usize),
    Vector(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match self {
            Shape::Image(h, w, c) => h * w * c,
            Shape::Vector(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Image(h, w, c) => write!(f, "{h}x{w}x{c}"),
            Shape::Vector(n) => write!(f, "{n}"),
        }
    }
}

/// Architecture description: input shape plus an ordered layer list.
/// The final layer always has two linear units, the scaled (log Λ̂, Θ̂).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

/// Known architectures, used to tag weight files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Nf,
    Nv,
    Nv30,
}

impl Architecture {
    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::Nf => "NF",
            Architecture::Nv => "NV",
            Architecture::Nv30 => "NV30",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NF" => Ok(Architecture::Nf),
            "NV" => Ok(Architecture::Nv),
            "NV30" => Ok(Architecture::Nv30),
            other => Err(Error::input(format!("unknown architecture '{other}'"))),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Architecture::Nf => build_nf(),
            Architecture::Nv => build_nv(),
            Architecture::Nv30 => build_nv30(),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The convolutional field model: three conv layers, flatten, two dense
/// layers, 635742 trainable parameters on a 16×16×1 input.
pub fn build_nf() -> ModelSpec {
    ModelSpec {
        input: Shape::Image(16, 16, 1),
        layers: vec![
            LayerSpec::Conv2d {
                filters: 128,
                kernel_h: 10,
                kernel_w: 10,
                activation: Activation::Relu,
            },
            LayerSpec::Conv2d {
                filters: 128,
                kernel_h: 5,
                kernel_w: 5,
                activation: Activation::Relu,
            },
            LayerSpec::Conv2d {
                filters: 128,
                kernel_h: 3,
                kernel_w: 3,
                activation: Activation::Relu,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                units: 500,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                units: 2,
                activation: Activation::Linear,
            },
        ],
    }
}

fn dense_tower(input_len: usize) -> ModelSpec {
    ModelSpec {
        input: Shape::Vector(input_len),
        layers: vec![
            LayerSpec::Dense {
                units: 3000,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                units: 1000,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                units: 2,
                activation: Activation::Linear,
            },
        ],
    }
}

/// The single-variogram model: dense 3000 → 1000 → 2 on 119 inputs.
pub fn build_nv() -> ModelSpec {
    dense_tower(119)
}

/// The 30-replicate variogram model: identical layer stack, but the
/// input is the row-major flattened 30×119 variogram stack.
pub fn build_nv30() -> ModelSpec {
    dense_tower(30 * 119)
}

impl ModelSpec {
    /// Output shape of every layer, validating shape propagation
    /// (valid convolution: out = in − kernel + 1, stride 1).
    pub fn output_shapes(&self) -> Result<Vec<Shape>> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match (layer, cur) {
                (
                    LayerSpec::Conv2d {
                        filters,
                        kernel_h,
                        kernel_w,
                        ..
                    },
                    Shape::Image(h, w, _),
                ) => {
                    if *kernel_h > h || *kernel_w > w {
                        return Err(Error::input(format!(
                            "layer {i}: kernel {kernel_h}x{kernel_w} exceeds input {h}x{w}"
                        )));
                    }
                    Shape::Image(h - kernel_h + 1, w - kernel_w + 1, *filters)
                }
                (LayerSpec::Conv2d { .. }, Shape::Vector(_)) => {
                    return Err(Error::input(format!(
                        "layer {i}: convolution needs an image input"
                    )));
                }
                (LayerSpec::Flatten, s) => Shape::Vector(s.len()),
                (LayerSpec::Dense { units, .. }, Shape::Vector(_)) => Shape::Vector(*units),
                (LayerSpec::Dense { .. }, Shape::Image(..)) => {
                    return Err(Error::input(format!(
                        "layer {i}: dense layer needs a flattened input"
                    )));
                }
            };
            shapes.push(cur);
        }
        match shapes.last() {
            Some(Shape::Vector(2)) => Ok(shapes),
            other => Err(Error::input(format!(
                "model must end in 2 linear units, ends in {other:?}"
            ))),
        }
    }

    /// Trainable parameters per layer (weights + biases).
    pub fn layer_params(&self) -> Result<Vec<usize>> {
        let shapes = self.output_shapes()?;
        let mut counts = Vec::with_capacity(self.layers.len());
        let mut cur = self.input;
        for (layer, out) in self.layers.iter().zip(&shapes) {
            let count = match (layer, cur) {
                (
                    LayerSpec::Conv2d {
                        filters,
                        kernel_h,
                        kernel_w,
                        ..
                    },
                    Shape::Image(_, _, c),
                ) => filters * (kernel_h * kernel_w * c) + filters,
                (LayerSpec::Dense { units, .. }, Shape::Vector(n)) => units * n + units,
                (LayerSpec::Flatten, _) => 0,
                _ => unreachable!("validated by output_shapes"),
            };
            counts.push(count);
            cur = *out;
        }
        Ok(counts)
    }

    pub fn total_params(&self) -> Result<usize> {
        Ok(self.layer_params()?.iter().sum())
    }

    /// Canonical text form, hashed into weight files so a file trained
    /// for one architecture cannot be loaded into another.
    pub fn canonical_string(&self) -> String {
        let mut s = format!("input:{};", self.input);
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv2d {
                    filters,
                    kernel_h,
                    kernel_w,
                    activation,
                } => {
                    s.push_str(&format!(
                        "conv2d({filters},{kernel_h}x{kernel_w},{});",
                        activation.tag()
                    ));
                }
                LayerSpec::Dense { units, activation } => {
                    s.push_str(&format!("dense({units},{});", activation.tag()));
                }
                LayerSpec::Flatten => s.push_str("flatten;"),
            }
        }
        s
    }

    /// FNV-1a hash of the canonical form.
    pub fn spec_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical_string().as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nf_shapes_match_published_table() {
        let spec = build_nf();
        let shapes = spec.output_shapes().unwrap();
        assert_eq!(
            shapes,
            vec![
                Shape::Image(7, 7, 128),
                Shape::Image(3, 3, 128),
                Shape::Image(1, 1, 128),
                Shape::Vector(128),
                Shape::Vector(500),
                Shape::Vector(2),
            ]
        );
    }

    #[test]
    fn nf_parameter_counts() {
        let spec = build_nf();
        assert_eq!(
            spec.layer_params().unwrap(),
            vec![12928, 409728, 147584, 0, 64500, 1002]
        );
        assert_eq!(spec.total_params().unwrap(), 635_742);
    }

    #[test]
    fn nv_parameter_counts() {
        let spec = build_nv();
        // The 1000 → 2 output layer has 2002 parameters; the published
        // per-layer table lists 1002 there, but its own total (3363002)
        // and the layer dimensions both give 2002.
        assert_eq!(spec.layer_params().unwrap(), vec![360_000, 3_001_000, 2002]);
        assert_eq!(spec.total_params().unwrap(), 3_363_002);
    }

    #[test]
    fn nv30_parameter_counts() {
        let spec = build_nv30();
        assert_eq!(
            spec.layer_params().unwrap(),
            vec![10_713_000, 3_001_000, 2002]
        );
        assert_eq!(spec.total_params().unwrap(), 13_716_002);
    }

    #[test]
    fn nv_and_nv30_differ_only_in_input_width() {
        let nv = build_nv();
        let nv30 = build_nv30();
        assert_eq!(nv.layers, nv30.layers);
        assert_eq!(nv.input, Shape::Vector(119));
        assert_eq!(nv30.input, Shape::Vector(3570));
    }

    #[test]
    fn spec_hashes_distinguish_architectures() {
        let hashes = [
            build_nf().spec_hash(),
            build_nv().spec_hash(),
            build_nv30().spec_hash(),
        ];
        assert_ne!(hashes[0], hashes[1]);
        assert_ne!(hashes[1], hashes[2]);
        assert_ne!(hashes[0], hashes[2]);
    }

    #[test]
    fn invalid_stacks_are_rejected() {
        // dense before flatten on an image input
        let bad = ModelSpec {
            input: Shape::Image(4, 4, 1),
            layers: vec![LayerSpec::Dense {
                units: 2,
                activation: Activation::Linear,
            }],
        };
        assert!(bad.output_shapes().is_err());

        // kernel larger than input
        let bad = ModelSpec {
            input: Shape::Image(4, 4, 1),
            layers: vec![
                LayerSpec::Conv2d {
                    filters: 2,
                    kernel_h: 5,
                    kernel_w: 5,
                    activation: Activation::Relu,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 2,
                    activation: Activation::Linear,
                },
            ],
        };
        assert!(bad.output_shapes().is_err());

        // wrong output arity
        let bad = ModelSpec {
            input: Shape::Vector(8),
            layers: vec![LayerSpec::Dense {
                units: 3,
                activation: Activation::Linear,
            }],
        };
        assert!(bad.output_shapes().is_err());
    }
}
