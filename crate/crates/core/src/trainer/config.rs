use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FusionError, Result};
use crate::losses::LossWeights;
use crate::params::Ablation;

/// Training hyperparameters. Serialized as plain `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    /// Multiplicative learning-rate factor applied once per epoch.
    pub lr_decay: f64,
    pub loss_weights: LossWeights,
    pub seed: u64,
    pub ablation: Ablation,
    pub patch_size: usize,
    /// Stop after this many optimizer steps, if set.
    pub max_steps: Option<usize>,
    /// Use only the first `subset` pairs of the dataset, if set.
    pub subset: Option<usize>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            batch_size: 30,
            epochs: 4,
            lr0: 1e-3,
            lr_decay: 0.95,
            loss_weights: LossWeights::default(),
            seed: 0,
            ablation: Ablation::None,
            patch_size: 256,
            max_steps: None,
            subset: None,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(FusionError::Config(msg.to_string()));
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if !(self.lr0.is_finite() && self.lr0 >= 0.0) {
            return bad("lr0 must be finite and nonnegative");
        }
        if self.patch_size < crate::le2::MIN_SIDE {
            return bad("patch_size must be at least 8");
        }
        if self.subset == Some(0) {
            return bad("subset must be at least 1");
        }
        LossWeights::new(self.loss_weights.lambda1, self.loss_weights.lambda2, self.loss_weights.lambda3)?;
        Ok(())
    }

    /// Loss weights after applying objective ablations.
    pub fn effective_loss_weights(&self) -> LossWeights {
        let mut w = self.loss_weights;
        if self.ablation == Ablation::NoRegionLoss {
            w.lambda2 = 0.0;
        }
        w
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * self.lr_decay.powi(epoch as i32)
    }

    /// Parses `key=value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = FusionConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| FusionError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let err = |what: &str| FusionError::Config(format!("line {}: invalid {key} '{value}': {what}", lineno + 1));
            let uint = || value.parse::<usize>().map_err(|e| err(&e.to_string()));
            let real = || value.parse::<f64>().map_err(|e| err(&e.to_string()));
            let optional = || -> Result<Option<usize>> {
                if value.eq_ignore_ascii_case("none") {
                    Ok(None)
                } else {
                    uint().map(Some)
                }
            };
            match key {
                "batch_size" => c.batch_size = uint()?,
                "epochs" => c.epochs = uint()?,
                "lr0" => c.lr0 = real()?,
                "lr_decay" => c.lr_decay = real()?,
                "lambda1" => c.loss_weights.lambda1 = real()?,
                "lambda2" => c.loss_weights.lambda2 = real()?,
                "lambda3" => c.loss_weights.lambda3 = real()?,
                "seed" => c.seed = value.parse().map_err(|e: std::num::ParseIntError| err(&e.to_string()))?,
                "ablation" => c.ablation = value.parse()?,
                "patch_size" => c.patch_size = uint()?,
                "max_steps" => c.max_steps = optional()?,
                "subset" => c.subset = optional()?,
                other => return Err(FusionError::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FusionError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let opt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |n| n.to_string());
        let mut s = String::new();
        writeln!(s, "batch_size={}", self.batch_size).unwrap();
        writeln!(s, "epochs={}", self.epochs).unwrap();
        writeln!(s, "lr0={}", self.lr0).unwrap();
        writeln!(s, "lr_decay={}", self.lr_decay).unwrap();
        writeln!(s, "lambda1={}", self.loss_weights.lambda1).unwrap();
        writeln!(s, "lambda2={}", self.loss_weights.lambda2).unwrap();
        writeln!(s, "lambda3={}", self.loss_weights.lambda3).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        writeln!(s, "ablation={}", self.ablation).unwrap();
        writeln!(s, "patch_size={}", self.patch_size).unwrap();
        writeln!(s, "max_steps={}", opt(self.max_steps)).unwrap();
        writeln!(s, "subset={}", opt(self.subset)).unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = FusionConfig::default();
        assert_eq!((c.batch_size, c.epochs, c.lr0, c.patch_size), (30, 4, 1e-3, 256));
        assert_eq!(c.loss_weights, LossWeights::new(3.0, 7.0, 49.0).unwrap());
        c.validate().unwrap();
    }

    #[test]
    fn parse_and_print() {
        let c = FusionConfig::parse("# toy\nbatch_size = 2\nepochs=1\nablation=no_mra\nmax_steps=5\n").unwrap();
        assert_eq!((c.batch_size, c.epochs, c.ablation, c.max_steps), (2, 1, Ablation::NoMra, Some(5)));
        assert_eq!(FusionConfig::parse(&c.to_kv_string()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["batch_size=0", "epochs=0", "lr_decay=0", "lr_decay=1.5", "colour=red", "seed", "lambda2=-1"] {
            assert!(matches!(FusionConfig::parse(text), Err(FusionError::Config(_))), "{text}");
        }
    }

    #[test]
    fn region_ablation_zeroes_lambda2() {
        let c = FusionConfig {
            ablation: Ablation::NoRegionLoss,
            ..Default::default()
        };
        assert_eq!(c.effective_loss_weights().lambda2, 0.0);
        assert_eq!(c.learning_rate(2), 1e-3 * 0.95 * 0.95);
    }
}
