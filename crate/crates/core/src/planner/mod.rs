//! Deployment planning: forecast rates to VM counts, and VM counts to
//! concrete provider offers.

mod capacity;
mod offers;

pub use capacity::{plan_window, required_vms, QosPolicy, ResourceRequirement, OVERRIDE_TRANSIENCY};
pub use offers::{select_offers, PlanItem, ProviderOffer, ProvisioningPlan, EXACT_SEARCH_LIMIT};
