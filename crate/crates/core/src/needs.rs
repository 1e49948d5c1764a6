//! Physiological and social needs: decay, restoration and well-being classification.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Upper bound of every need value.
pub const NEED_MAX: f64 = 100.0;

/// Current need levels of one agent. Declining needs start at 100; bladder
/// starts at 0 and rises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedsState {
    pub fullness: f64,
    pub hydration: f64,
    pub energy: f64,
    pub social_fulfillment: f64,
    pub bladder: f64,
}

impl Default for NeedsState {
    fn default() -> Self {
        Self {
            fullness: NEED_MAX,
            hydration: NEED_MAX,
            energy: NEED_MAX,
            social_fulfillment: NEED_MAX,
            bladder: 0.0,
        }
    }
}

/// Named need, as reported by well-being classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Need {
    Thirst,
    Hunger,
    Bladder,
    Fatigue,
    Loneliness,
}

impl Need {
    /// Planning tie-break order.
    pub const PRIORITY: [Need; 5] = [
        Need::Thirst,
        Need::Hunger,
        Need::Bladder,
        Need::Fatigue,
        Need::Loneliness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Need::Thirst => "thirst",
            Need::Hunger => "hunger",
            Need::Bladder => "bladder",
            Need::Fatigue => "fatigue",
            Need::Loneliness => "loneliness",
        }
    }

    /// Name of the state variable backing this need.
    pub fn variable(self) -> &'static str {
        match self {
            Need::Thirst => "hydration",
            Need::Hunger => "fullness",
            Need::Bladder => "bladder",
            Need::Fatigue => "energy",
            Need::Loneliness => "social_fulfillment",
        }
    }
}

impl fmt::Display for Need {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Actions that restore a need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Restoration {
    Eat,
    Drink,
    Rest,
    UseRestroom,
    Chat,
}

impl Restoration {
    pub fn from_verb(verb: &str) -> Option<Self> {
        match verb {
            "eat" | "fetch_meal" => Some(Restoration::Eat),
            "drink" | "refill_supplies" => Some(Restoration::Drink),
            "rest" => Some(Restoration::Rest),
            "use_restroom" => Some(Restoration::UseRestroom),
            "stay_chat" => Some(Restoration::Chat),
            _ => None,
        }
    }
}

/// Decay, restoration and threshold parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeedsModel {
    pub hydration_decay: f64,
    pub fullness_decay: f64,
    pub energy_decay: f64,
    pub social_decay: f64,
    pub bladder_rise: f64,
    pub eat_restore: f64,
    pub drink_restore: f64,
    pub drink_bladder: f64,
    pub rest_restore: f64,
    pub chat_restore: f64,
    /// A declining need is unmet below this value.
    pub unmet_below: f64,
    /// Bladder is unmet above this value.
    pub bladder_unmet_above: f64,
}

impl Default for NeedsModel {
    fn default() -> Self {
        Self {
            hydration_decay: 0.25,
            fullness_decay: 0.15,
            energy_decay: 0.10,
            social_decay: 0.10,
            bladder_rise: 0.05,
            eat_restore: 40.0,
            drink_restore: 40.0,
            drink_bladder: 20.0,
            rest_restore: 30.0,
            chat_restore: 5.0,
            unmet_below: 30.0,
            bladder_unmet_above: 70.0,
        }
    }
}

impl NeedsModel {
    /// Checks that rates are non-negative and thresholds lie strictly inside (0, 100).
    pub fn check(&self) -> Result<(), String> {
        let rates = [
            ("hydration_decay", self.hydration_decay),
            ("fullness_decay", self.fullness_decay),
            ("energy_decay", self.energy_decay),
            ("social_decay", self.social_decay),
            ("bladder_rise", self.bladder_rise),
            ("eat_restore", self.eat_restore),
            ("drink_restore", self.drink_restore),
            ("drink_bladder", self.drink_bladder),
            ("rest_restore", self.rest_restore),
            ("chat_restore", self.chat_restore),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        for (name, v) in [
            ("unmet_below", self.unmet_below),
            ("bladder_unmet_above", self.bladder_unmet_above),
        ] {
            if !(v > 0.0 && v < NEED_MAX) {
                return Err(format!("{name} must lie in (0, 100), got {v}"));
            }
        }
        Ok(())
    }

    /// How far a need is past its threshold; positive means unmet.
    pub fn deficit(&self, needs: &NeedsState, need: Need) -> f64 {
        match need {
            Need::Bladder => needs.bladder - self.bladder_unmet_above,
            other => self.unmet_below - needs.value(other),
        }
    }

    pub fn is_unmet(&self, needs: &NeedsState, need: Need) -> bool {
        match need {
            Need::Bladder => needs.bladder > self.bladder_unmet_above,
            other => needs.value(other) < self.unmet_below,
        }
    }
}

impl NeedsState {
    pub fn value(&self, need: Need) -> f64 {
        match need {
            Need::Thirst => self.hydration,
            Need::Hunger => self.fullness,
            Need::Bladder => self.bladder,
            Need::Fatigue => self.energy,
            Need::Loneliness => self.social_fulfillment,
        }
    }

    pub fn clamped(self) -> Self {
        let c = |v: f64| v.clamp(0.0, NEED_MAX);
        Self {
            fullness: c(self.fullness),
            hydration: c(self.hydration),
            energy: c(self.energy),
            social_fulfillment: c(self.social_fulfillment),
            bladder: c(self.bladder),
        }
    }
}

/// Well-being at one instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Wellbeing {
    Optimal,
    Unmet(BTreeSet<Need>),
}

impl Wellbeing {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Wellbeing::Optimal)
    }

    pub fn unmet(&self) -> BTreeSet<Need> {
        match self {
            Wellbeing::Optimal => BTreeSet::new(),
            Wellbeing::Unmet(set) => set.clone(),
        }
    }
}

/// Applies `dt` ticks of decay: declining needs drop, bladder rises.
pub fn tick_decay(needs: &NeedsState, model: &NeedsModel, dt: u64) -> NeedsState {
    if dt == 0 {
        return *needs;
    }
    let dt = dt as f64;
    NeedsState {
        fullness: needs.fullness - model.fullness_decay * dt,
        hydration: needs.hydration - model.hydration_decay * dt,
        energy: needs.energy - model.energy_decay * dt,
        social_fulfillment: needs.social_fulfillment - model.social_decay * dt,
        bladder: needs.bladder + model.bladder_rise * dt,
    }
    .clamped()
}

pub fn classify(needs: &NeedsState, model: &NeedsModel) -> Wellbeing {
    let unmet: BTreeSet<Need> = Need::PRIORITY
        .into_iter()
        .filter(|&n| model.is_unmet(needs, n))
        .collect();
    if unmet.is_empty() {
        Wellbeing::Optimal
    } else {
        Wellbeing::Unmet(unmet)
    }
}

pub fn apply_restoration(needs: &NeedsState, kind: Restoration, model: &NeedsModel) -> NeedsState {
    let mut out = *needs;
    match kind {
        Restoration::Eat => out.fullness += model.eat_restore,
        Restoration::Drink => {
            out.hydration += model.drink_restore;
            out.bladder += model.drink_bladder;
        }
        Restoration::Rest => out.energy += model.rest_restore,
        Restoration::UseRestroom => out.bladder = 0.0,
        Restoration::Chat => out.social_fulfillment += model.chat_restore,
    }
    out.clamped()
}
