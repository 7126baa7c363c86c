use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::generator::GeneratorNet;
use super::heads::{DiscriminatorNet, PerceptualNet};
use crate::data::PartialView;
use crate::diffcore::{prefixed, Module, Parameter};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::tensor::argmax;

/// Ablation wiring of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Pooled segment features only.
    Scp,
    /// LSTM over the raw segment features.
    Lstm,
    /// LSTM over the pooled features.
    LstmScp,
    /// Pooled feature plus LSTM-estimated residual.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Scp, Variant::Lstm, Variant::LstmScp, Variant::Full];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Scp => "scp",
            Variant::Lstm => "lstm",
            Variant::LstmScp => "lstm-scp",
            Variant::Full => "full",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Variant> {
        Variant::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}' (expected scp, lstm, lstm-scp or full)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_raw: usize,
    /// Hidden width of the segment encoder.
    pub d_enc: usize,
    pub d_feat: usize,
    pub d_hidden: usize,
    /// Hidden widths shared by the discriminator and perceptual heads.
    pub head_widths: [usize; 2],
    pub classes: usize,
    pub segments: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d_raw: 32,
            d_enc: 64,
            d_feat: 64,
            d_hidden: 64,
            head_widths: [128, 64],
            classes: 8,
            segments: 10,
        }
    }
}

impl ModelDims {
    /// Widths used with 1024-d CNN segment features: 1024-d LSTM state and
    /// 4096/1024 head layers.
    pub fn paper_scale(d_raw: usize, classes: usize) -> Self {
        ModelDims {
            d_raw,
            d_enc: 1024,
            d_feat: 1024,
            d_hidden: 1024,
            head_widths: [4096, 1024],
            classes,
            segments: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d_raw,
            self.d_enc,
            self.d_feat,
            self.d_hidden,
            self.head_widths[0],
            self.head_widths[1],
            self.classes,
            self.segments,
        ];
        if all.contains(&0) {
            return Err(Error::Config(format!("all model dimensions must be >= 1: {self:?}")));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        Ok(())
    }
}

/// Generator, discriminator and perceptual head with their shared sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub dims: ModelDims,
    variant: Variant,
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub perceptual: PerceptualNet,
}

const INIT_TAG: u64 = 0x1417;

impl ModelBundle {
    /// Random initialisation. Each component draws from its own stream, so
    /// bundles of different variants built from one seed share encoder,
    /// heads and recurrent weights.
    pub fn new(dims: ModelDims, variant: Variant, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut enc = stream(seed, INIT_TAG, 0);
        let mut lstm = stream(seed, INIT_TAG, 1);
        let mut res = stream(seed, INIT_TAG, 2);
        let mut disc = stream(seed, INIT_TAG, 3);
        let mut perc = stream(seed, INIT_TAG, 4);
        Ok(ModelBundle {
            dims,
            variant,
            generator: GeneratorNet::new(
                dims.d_raw,
                dims.d_enc,
                dims.d_feat,
                dims.d_hidden,
                variant,
                &mut enc,
                &mut lstm,
                &mut res,
            ),
            discriminator: DiscriminatorNet::new(dims.d_feat, dims.head_widths, &mut disc),
            perceptual: PerceptualNet::new(dims.d_feat, dims.head_widths, dims.classes, &mut perc),
        })
    }

    pub fn zeros(dims: ModelDims, variant: Variant) -> Result<Self> {
        dims.validate()?;
        Ok(ModelBundle {
            dims,
            variant,
            generator: GeneratorNet::zeros(dims.d_raw, dims.d_enc, dims.d_feat, dims.d_hidden, variant),
            discriminator: DiscriminatorNet::zeros(dims.d_feat, dims.head_widths),
            perceptual: PerceptualNet::zeros(dims.d_feat, dims.head_widths, dims.classes),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Same weights rewired as another variant.
    pub fn with_variant(&self, variant: Variant) -> Self {
        let mut b = self.clone();
        b.variant = variant;
        b.generator.variant = variant;
        b
    }

    /// The complete-sequence feature: prefix mean over all segments, no residual.
    pub fn full_video_feature(&self, segments: &crate::Tensor) -> Result<Vec<f64>> {
        if segments.rows() != self.dims.segments {
            return Err(Error::Mismatch(format!(
                "full-sequence feature needs {} segments, got {}",
                self.dims.segments,
                segments.rows()
            )));
        }
        Ok(self.generator.encode(segments)?.last_pooled().to_vec())
    }
}

impl Module for ModelBundle {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        let mut v = prefixed("generator", self.generator.named_params());
        v.extend(prefixed("discriminator", self.discriminator.named_params()));
        v.extend(prefixed("perceptual", self.perceptual.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.generator.params_mut();
        v.extend(self.discriminator.params_mut());
        v.extend(self.perceptual.params_mut());
        v
    }
}

/// Label and class scores for a partial view. Reads only the generator and
/// the perceptual head.
pub fn predict(view: &PartialView, bundle: &ModelBundle) -> Result<(usize, Vec<f64>)> {
    let feat = bundle.generator.generate(&view.segments)?;
    let scores = bundle.perceptual.scores_row(&feat);
    Ok((argmax(&scores), scores))
}

/// Late fusion by summing two score vectors.
pub fn fuse_scores(a: &[f64], b: &[f64]) -> Result<(usize, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(Error::shape("fuse_scores", &[a.len()], &[b.len()]));
    }
    let fused: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    Ok((argmax(&fused), fused))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dims() -> ModelDims {
        ModelDims {
            d_raw: 5,
            d_enc: 6,
            d_feat: 4,
            d_hidden: 3,
            head_widths: [7, 5],
            classes: 3,
            segments: 4,
        }
    }

    #[test]
    fn discriminator_param_count_closed_form() {
        let d = small_dims();
        let b = ModelBundle::new(d, Variant::Full, 1).unwrap();
        let [h1, h2] = d.head_widths;
        let expect = d.d_feat * h1 + h1 + h1 * h2 + h2 + h2 + 1;
        assert_eq!(b.discriminator.param_count(), expect);
        let expect_p = d.d_feat * h1 + h1 + h1 * h2 + h2 + h2 * d.classes + d.classes;
        assert_eq!(b.perceptual.param_count(), expect_p);
        // two LSTM layers: d_feat -> d_hidden -> d_feat
        let l1 = 4 * d.d_hidden * (d.d_feat + d.d_hidden + 1);
        let l2 = 4 * d.d_feat * (d.d_hidden + d.d_feat + 1);
        assert_eq!(b.generator.lstm.param_count(), l1 + l2);
    }

    #[test]
    fn variants_share_initialisation() {
        let a = ModelBundle::new(small_dims(), Variant::Scp, 9).unwrap();
        let b = ModelBundle::new(small_dims(), Variant::Full, 9).unwrap();
        assert_eq!(a.flat_values(), b.flat_values());
    }

    #[test]
    fn fuse_examples() {
        let (label, fused) = fuse_scores(&[0.6, 0.4], &[0.1, 0.9]).unwrap();
        assert_eq!(label, 1);
        assert!((fused[0] - 0.7).abs() < 1e-15 && (fused[1] - 1.3).abs() < 1e-15);
        let s = [0.2, 0.5, 0.3];
        assert_eq!(fuse_scores(&s, &s).unwrap().0, 1);
        assert!(fuse_scores(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn variant_tags_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.tag().parse::<Variant>().unwrap(), v);
            assert_eq!(Variant::from_code(v.code()), Some(v));
        }
        assert!("ours".parse::<Variant>().is_err());
    }

    #[test]
    fn zero_dims_rejected() {
        let mut d = small_dims();
        d.d_hidden = 0;
        assert!(ModelBundle::new(d, Variant::Full, 0).is_err());
    }
}
