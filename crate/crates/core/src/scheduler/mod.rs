//! Screen ad selection, time-on-screen allocation and feedback adaptation.

pub mod apportion;
pub mod feedback;
pub mod plan;
pub mod policy;

pub use apportion::apportion;
pub use feedback::{apply_feedback, FeedbackEvent, Polarity, WEIGHT_FLOOR};
pub use plan::{ads_for_world, build_day_schedule, building_visitor_estimate, DayPlan, ScheduleParams};
pub use policy::{
    best_ad, fallback_schedule, policy_audience_ratio, policy_building_ratio, policy_max_audience,
    policy_nearest_buildings, Ad, AdSchedule, Policy, ScheduleEntry, HOUSE_AD,
};
