//! Pattern events: volume-centred range bars and price levels.

mod levels;
mod profile;
mod vcrb;

pub use levels::{extract_price_levels, PriceLevelConfig};
pub use profile::{LevelAggregate, VolumeProfile};
pub use vcrb::extract_vcrb;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternKind {
    Vcrb,
    PriceLevel,
}

/// Where the target sits relative to the market price when the pattern forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    TargetAbove,
    TargetBelow,
}

impl Side {
    pub fn of(target: i64, market: i64) -> Side {
        if target > market {
            Side::TargetAbove
        } else {
            Side::TargetBelow
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
    Excluded,
    #[default]
    Unresolved,
}

/// One extracted pattern instance, indexed into its batch's tick sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEvent {
    pub kind: PatternKind,
    pub target_price_idx: i64,
    /// First tick contributing to the profile (buffer start or extremum tick).
    pub first_tick_index: usize,
    pub formation_tick_index: usize,
    pub side: Side,
    pub profile: VolumeProfile,
    pub trigger_tick_index: Option<usize>,
    pub touch_tick_index: Option<usize>,
    pub resolution_tick_index: Option<usize>,
    /// +1 when the target was approached from above, -1 from below.
    pub approach_sign: Option<i64>,
    pub label: Label,
    pub features: Option<FeatureVector>,
}

impl PatternEvent {
    pub fn new(
        kind: PatternKind,
        target_price_idx: i64,
        first_tick_index: usize,
        formation_tick_index: usize,
        side: Side,
        profile: VolumeProfile,
    ) -> Self {
        PatternEvent {
            kind,
            target_price_idx,
            first_tick_index,
            formation_tick_index,
            side,
            profile,
            trigger_tick_index: None,
            touch_tick_index: None,
            resolution_tick_index: None,
            approach_sign: None,
            label: Label::Unresolved,
            features: None,
        }
    }
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(format!("unknown {}: '{other}'", stringify!($ty))),
                }
            }
        }
    };
}

text_enum!(PatternKind { Vcrb => "vcrb", PriceLevel => "level" });
text_enum!(Side { TargetAbove => "above", TargetBelow => "below" });
text_enum!(Label {
    Positive => "positive",
    Negative => "negative",
    Excluded => "excluded",
    Unresolved => "unresolved",
});
