use serde::{Deserialize, Serialize};

use crate::ltl::Valuation;

/// Every proposition name a valuation carries, local ones first.
pub const PROPOSITIONS: [&str; 11] = [
    "in_stop_region",
    "has_entered_stop_region",
    "has_stopped_in_stop_region",
    "in_intersection",
    "in_goal_region",
    "stopped_now",
    "over_speed_limit",
    "intersection_is_clear",
    "highest_priority",
    "veh_ahead",
    "veh_ahead_too_close",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LocalProps {
    pub in_stop_region: bool,
    pub has_entered_stop_region: bool,
    pub has_stopped_in_stop_region: bool,
    pub in_intersection: bool,
    pub in_goal_region: bool,
    pub stopped_now: bool,
    pub over_speed_limit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GlobalProps {
    pub intersection_is_clear: bool,
    pub highest_priority: bool,
    pub veh_ahead: bool,
    pub veh_ahead_too_close: bool,
}

/// Full valuation of one vehicle. Serializes as a flat object keyed by
/// proposition name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Props {
    pub in_stop_region: bool,
    pub has_entered_stop_region: bool,
    pub has_stopped_in_stop_region: bool,
    pub in_intersection: bool,
    pub in_goal_region: bool,
    pub stopped_now: bool,
    pub over_speed_limit: bool,
    pub intersection_is_clear: bool,
    pub highest_priority: bool,
    pub veh_ahead: bool,
    pub veh_ahead_too_close: bool,
}

impl Props {
    pub fn new(local: LocalProps, global: GlobalProps) -> Self {
        Props {
            in_stop_region: local.in_stop_region,
            has_entered_stop_region: local.has_entered_stop_region,
            has_stopped_in_stop_region: local.has_stopped_in_stop_region,
            in_intersection: local.in_intersection,
            in_goal_region: local.in_goal_region,
            stopped_now: local.stopped_now,
            over_speed_limit: local.over_speed_limit,
            intersection_is_clear: global.intersection_is_clear,
            highest_priority: global.highest_priority,
            veh_ahead: global.veh_ahead,
            veh_ahead_too_close: global.veh_ahead_too_close,
        }
    }

    pub fn local(&self) -> LocalProps {
        LocalProps {
            in_stop_region: self.in_stop_region,
            has_entered_stop_region: self.has_entered_stop_region,
            has_stopped_in_stop_region: self.has_stopped_in_stop_region,
            in_intersection: self.in_intersection,
            in_goal_region: self.in_goal_region,
            stopped_now: self.stopped_now,
            over_speed_limit: self.over_speed_limit,
        }
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        Some(match name {
            "in_stop_region" => self.in_stop_region,
            "has_entered_stop_region" => self.has_entered_stop_region,
            "has_stopped_in_stop_region" => self.has_stopped_in_stop_region,
            "in_intersection" => self.in_intersection,
            "in_goal_region" => self.in_goal_region,
            "stopped_now" => self.stopped_now,
            "over_speed_limit" => self.over_speed_limit,
            "intersection_is_clear" => self.intersection_is_clear,
            "highest_priority" => self.highest_priority,
            "veh_ahead" => self.veh_ahead,
            "veh_ahead_too_close" => self.veh_ahead_too_close,
            _ => return None,
        })
    }

    pub fn to_map(&self) -> std::collections::BTreeMap<String, bool> {
        PROPOSITIONS
            .iter()
            .map(|name| (name.to_string(), self.get(name).unwrap_or(false)))
            .collect()
    }
}

impl Valuation for Props {
    fn lookup(&self, atom: &str) -> Option<bool> {
        self.get(atom)
    }
}
