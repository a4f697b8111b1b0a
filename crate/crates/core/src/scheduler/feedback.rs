use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{AdId, PersonId, Timestamp};
use crate::error::{Error, Result};
use crate::scheduler::policy::Ad;

/// Ad weights never drop below this.
pub const WEIGHT_FLOOR: f64 = 1e-6;
pub const DEFAULT_DECAY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Silent,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub person: PersonId,
    pub ad: AdId,
    pub polarity: Polarity,
    pub time: Timestamp,
}

/// Multiplies an ad's weight by `decay` for each negative event. Positive and
/// silent events keep the ad as it is.
pub fn apply_feedback(ads: &[Ad], events: &[FeedbackEvent], decay: f64) -> Result<Vec<Ad>> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::Config(format!("feedback decay {decay} outside (0, 1]")));
    }
    let index: HashMap<AdId, usize> = ads.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
    let mut out = ads.to_vec();
    for e in events {
        let &i = index.get(&e.ad).ok_or(Error::UnknownAd(e.ad.0))?;
        if e.polarity == Polarity::Negative {
            out[i].weight = (out[i].weight * decay).max(WEIGHT_FLOOR);
        }
    }
    Ok(out)
}
