use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl Task {
    pub fn rank(self) -> usize {
        match self {
            Task::TwoD => 2,
            Task::ThreeD => 3,
        }
    }
}

/// Where xLSTM blocks are placed. `Bot` has one in the bottleneck only;
/// `Enc` adds one after every encoder stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Bot,
    Enc,
}

fn default_heads() -> usize {
    4
}

fn default_expansion() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub task: Task,
    pub in_channels: usize,
    pub num_classes: usize,
    pub num_stages: usize,
    pub base_channels: usize,
    pub channel_cap: usize,
    pub variant: Variant,
    pub patch_size: Vec<usize>,
    #[serde(default = "default_heads")]
    pub heads: usize,
    #[serde(default = "default_expansion")]
    pub expansion: usize,
    #[serde(default)]
    pub seed: u64,
}

impl NetworkConfig {
    /// Small 2D network: 4 stages, base 8 capped at 64, 64×64 patches.
    pub fn desk_2d(num_classes: usize, variant: Variant) -> Self {
        Self {
            task: Task::TwoD,
            in_channels: 1,
            num_classes,
            num_stages: 4,
            base_channels: 8,
            channel_cap: 64,
            variant,
            patch_size: vec![64, 64],
            heads: 4,
            expansion: 2,
            seed: 0,
        }
    }

    /// Small 3D network with 32×64×64 patches.
    pub fn desk_3d(num_classes: usize, variant: Variant) -> Self {
        Self {
            task: Task::ThreeD,
            patch_size: vec![32, 64, 64],
            ..Self::desk_2d(num_classes, variant)
        }
    }

    /// Channels produced by encoder stage `i`.
    pub fn stage_channels(&self, i: usize) -> usize {
        (self.base_channels << i.min(40)).min(self.channel_cap)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| {
            Err(Error::Config {
                field: field.to_string(),
                msg,
            })
        };
        let rank = self.task.rank();
        if self.patch_size.len() != rank {
            return bad(
                "patch_size",
                format!("{} axes given for a {rank}D task", self.patch_size.len()),
            );
        }
        if self.num_classes < 2 {
            return bad("num_classes", format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.num_stages < 2 {
            return bad("num_stages", format!("need at least 2 stages, got {}", self.num_stages));
        }
        if self.num_stages > 16 {
            return bad("num_stages", format!("{} stages is not supported", self.num_stages));
        }
        if self.in_channels == 0 {
            return bad("in_channels", "must be positive".into());
        }
        if self.base_channels == 0 || self.channel_cap < self.base_channels {
            return bad(
                "channel_cap",
                format!(
                    "need 0 < base_channels ({}) <= channel_cap ({})",
                    self.base_channels, self.channel_cap
                ),
            );
        }
        if self.heads == 0 || self.expansion == 0 {
            return bad("heads", "heads and expansion must be positive".into());
        }
        let factor = 1usize << self.num_stages;
        if let Some(&p) = self.patch_size.iter().find(|&&p| p == 0 || p % factor != 0) {
            return bad(
                "patch_size",
                format!(
                    "{:?} is not divisible by 2^{} = {factor} (extent {p})",
                    self.patch_size, self.num_stages
                ),
            );
        }
        for i in 0..self.num_stages {
            let c = self.stage_channels(i);
            if !(c * self.expansion).is_multiple_of(self.heads) {
                return bad(
                    "heads",
                    format!(
                        "inner width {} of stage {i} is not divisible by {} heads",
                        c * self.expansion,
                        self.heads
                    ),
                );
            }
        }
        Ok(())
    }

    /// Number of xLSTM blocks the network will contain.
    pub fn expected_xlstm_blocks(&self) -> usize {
        match self.variant {
            Variant::Bot => 1,
            Variant::Enc => self.num_stages + 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_plan() {
        let c = NetworkConfig::desk_2d(3, Variant::Bot);
        let plan: Vec<_> = (0..6).map(|i| c.stage_channels(i)).collect();
        assert_eq!(plan, [8, 16, 32, 64, 64, 64]);
    }

    #[test]
    fn rejects_indivisible_patch_and_single_class() {
        let mut c = NetworkConfig::desk_2d(3, Variant::Enc);
        c.validate().unwrap();
        c.patch_size = vec![64, 40];
        assert!(matches!(c.validate(), Err(Error::Config { ref field, .. }) if field == "patch_size"));
        let mut c = NetworkConfig::desk_2d(1, Variant::Enc);
        assert!(c.validate().is_err());
        c.num_classes = 2;
        c.task = Task::ThreeD;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = NetworkConfig::desk_3d(2, Variant::Enc);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"3d\"") && s.contains("\"enc\""));
        let back: NetworkConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
