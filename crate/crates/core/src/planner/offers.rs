use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::capacity::ResourceRequirement;
use crate::error::{Error, Result};

/// Above this many candidate combinations the selector falls back to greedy.
pub const EXACT_SEARCH_LIMIT: u128 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderOffer {
    pub id: String,
    pub cores: u32,
    pub ram_gb: f64,
    pub price_per_hour: f64,
    pub boot_delay: f64,
    pub available_count: u32,
}

impl ProviderOffer {
    /// How many requirement-shaped VMs one instance of this offer hosts.
    pub fn slots_for(&self, req: &ResourceRequirement) -> u32 {
        let by_cores = self.cores / req.cores_per_vm.max(1);
        if req.ram_per_vm > 0.0 {
            by_cores.min((self.ram_gb / req.ram_per_vm + 1e-9).floor() as u32)
        } else {
            by_cores
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.price_per_hour >= 0.0) || !(self.boot_delay >= 0.0) || !(self.ram_gb >= 0.0) {
            return Err(Error::invalid(format!("offer {} has a negative price, delay or RAM", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanItem {
    pub offer_id: String,
    /// Instances of the offer to rent.
    pub vm_count: u32,
    /// Requirement-shaped VMs those instances host.
    pub slots: u32,
    /// When to ask the provider so the instances are up at the window start.
    pub start_request_time: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisioningPlan {
    pub items: Vec<PlanItem>,
    pub total_hourly_cost: f64,
    /// False when the catalog was too large for exhaustive search.
    pub optimal: bool,
}

struct Candidate<'a> {
    offer: &'a ProviderOffer,
    slots: u32,
    max_count: u32,
}

/// Cheapest mix of offers whose instances host `req.vm_count` VMs and boot
/// within `deadline_seconds`.
///
/// Equal-cost mixes prefer the smaller worst-case boot delay, then the
/// lexicographically smaller list of offer ids.
pub fn select_offers(
    req: &ResourceRequirement,
    catalog: &[ProviderOffer],
    deadline_seconds: f64,
) -> Result<ProvisioningPlan> {
    if catalog.is_empty() {
        return Err(Error::invalid("offer catalog is empty"));
    }
    for offer in catalog {
        offer.validate()?;
    }
    if req.vm_count == 0 {
        return Ok(ProvisioningPlan { items: Vec::new(), total_hourly_cost: 0.0, optimal: true });
    }

    let shaped: Vec<&ProviderOffer> = catalog.iter().filter(|o| o.slots_for(req) > 0).collect();
    if shaped.is_empty() {
        return Err(Error::Infeasible(format!(
            "shape: no offer hosts a VM of {} cores and {} GB",
            req.cores_per_vm, req.ram_per_vm
        )));
    }
    let timely: Vec<&ProviderOffer> = shaped.into_iter().filter(|o| o.boot_delay <= deadline_seconds).collect();
    if timely.is_empty() {
        return Err(Error::Infeasible(format!("deadline: no suitable offer boots within {deadline_seconds} s")));
    }
    let need = req.vm_count;
    let mut candidates: Vec<Candidate> = timely
        .into_iter()
        .filter(|o| o.available_count > 0)
        .map(|offer| {
            let slots = offer.slots_for(req);
            Candidate { offer, slots, max_count: offer.available_count.min(need.div_ceil(slots)) }
        })
        .collect();
    let capacity: u64 = candidates.iter().map(|c| u64::from(c.slots) * u64::from(c.offer.available_count)).sum();
    if capacity < u64::from(need) {
        return Err(Error::Infeasible(format!(
            "availability: {need} VMs needed, qualifying offers host {capacity}"
        )));
    }
    candidates.sort_by(|a, b| a.offer.id.cmp(&b.offer.id));

    let combinations: u128 = candidates.iter().map(|c| u128::from(c.max_count) + 1).product();
    let (counts, optimal) = if combinations <= EXACT_SEARCH_LIMIT {
        (exhaustive(&candidates, need), true)
    } else {
        (greedy(&candidates, need), false)
    };

    let mut items = Vec::new();
    let mut total = 0.0;
    for (c, &n) in candidates.iter().zip(&counts) {
        if n == 0 {
            continue;
        }
        total += f64::from(n) * c.offer.price_per_hour;
        items.push(PlanItem {
            offer_id: c.offer.id.clone(),
            vm_count: n,
            slots: n * c.slots,
            start_request_time: req.valid_from - c.offer.boot_delay.ceil() as i64,
        });
    }
    Ok(ProvisioningPlan { items, total_hourly_cost: total, optimal })
}

/// (cost, worst boot delay) of an assignment; ids are compared by position
/// since candidates are sorted by id.
fn key(candidates: &[Candidate], counts: &[u32]) -> (f64, f64) {
    let cost = candidates.iter().zip(counts).map(|(c, n)| f64::from(*n) * c.offer.price_per_hour).sum();
    let boot = candidates.iter().zip(counts).filter(|(_, n)| **n > 0).map(|(c, _)| c.offer.boot_delay).fold(0.0, f64::max);
    (cost, boot)
}

fn better(candidates: &[Candidate], a: &[u32], b: &[u32]) -> bool {
    let (ca, ba) = key(candidates, a);
    let (cb, bb) = key(candidates, b);
    let tol = 1e-9 * ca.abs().max(cb.abs()).max(1.0);
    if (ca - cb).abs() > tol {
        return ca < cb;
    }
    match ba.total_cmp(&bb) {
        Ordering::Less => return true,
        Ordering::Greater => return false,
        Ordering::Equal => {}
    }
    // Lexicographic comparison of the used offer ids (with multiplicity).
    let ids = |counts: &[u32]| -> Vec<(usize, u32)> {
        counts.iter().enumerate().filter(|(_, n)| **n > 0).map(|(i, n)| (i, *n)).collect()
    };
    let (ia, ib) = (ids(a), ids(b));
    let flat = |v: &[(usize, u32)]| -> Vec<usize> { v.iter().flat_map(|(i, n)| std::iter::repeat(*i).take(*n as usize)).collect() };
    flat(&ia) < flat(&ib)
}

fn exhaustive(candidates: &[Candidate], need: u32) -> Vec<u32> {
    fn walk(
        candidates: &[Candidate],
        need: u32,
        idx: usize,
        covered: u64,
        counts: &mut Vec<u32>,
        best: &mut Option<Vec<u32>>,
    ) {
        if idx == candidates.len() {
            if covered >= u64::from(need) && best.as_ref().is_none_or(|b| better(candidates, counts, b)) {
                *best = Some(counts.clone());
            }
            return;
        }
        let c = &candidates[idx];
        for n in 0..=c.max_count {
            counts[idx] = n;
            walk(candidates, need, idx + 1, covered + u64::from(n) * u64::from(c.slots), counts, best);
        }
        counts[idx] = 0;
    }
    let mut counts = vec![0; candidates.len()];
    let mut best = None;
    walk(candidates, need, 0, 0, &mut counts, &mut best);
    best.expect("capacity was checked")
}

fn greedy(candidates: &[Candidate], need: u32) -> Vec<u32> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        let pa = ca.offer.price_per_hour / f64::from(ca.slots);
        let pb = cb.offer.price_per_hour / f64::from(cb.slots);
        pa.total_cmp(&pb).then(ca.offer.boot_delay.total_cmp(&cb.offer.boot_delay)).then(a.cmp(&b))
    });
    let mut counts = vec![0; candidates.len()];
    let mut remaining = u64::from(need);
    for i in order {
        if remaining == 0 {
            break;
        }
        let c = &candidates[i];
        let n = (remaining.div_ceil(u64::from(c.slots))).min(u64::from(c.offer.available_count)) as u32;
        counts[i] = n;
        remaining = remaining.saturating_sub(u64::from(n) * u64::from(c.slots));
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offer(id: &str, cores: u32, price: f64, boot: f64, avail: u32) -> ProviderOffer {
        ProviderOffer { id: id.into(), cores, ram_gb: 2.0 * f64::from(cores), price_per_hour: price, boot_delay: boot, available_count: avail }
    }

    fn req(n: u32) -> ResourceRequirement {
        ResourceRequirement { vm_count: n, cores_per_vm: 1, ram_per_vm: 2.0, valid_from: 1000, valid_until: 1300 }
    }

    #[test]
    fn single_offer_takes_everything() {
        let plan = select_offers(&req(4), &[offer("a", 1, 0.1, 60.0, 10)], 120.0).unwrap();
        assert_eq!(plan.items.len(), 1);
        assert_eq!(plan.items[0].vm_count, 4);
        assert_eq!(plan.items[0].start_request_time, 940);
        assert!((plan.total_hourly_cost - 0.4).abs() < 1e-12);
        assert!(plan.optimal);
    }

    #[test]
    fn cheaper_offer_dominates() {
        let plan = select_offers(&req(5), &[offer("b", 1, 2.0, 0.0, 50), offer("a", 1, 1.0, 0.0, 50)], 120.0).unwrap();
        assert_eq!(plan.items, vec![PlanItem { offer_id: "a".into(), vm_count: 5, slots: 5, start_request_time: 1000 }]);
    }

    #[test]
    fn bigger_instances_can_be_cheaper_per_vm() {
        let catalog = [offer("small", 1, 1.0, 0.0, 10), offer("large", 4, 3.0, 0.0, 10)];
        let plan = select_offers(&req(5), &catalog, 120.0).unwrap();
        // One large (4 slots, 3.0) plus one small (1.0) beats two larges or five smalls.
        assert!((plan.total_hourly_cost - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_faster_boot_then_id() {
        let catalog = [offer("z", 1, 1.0, 30.0, 10), offer("y", 1, 1.0, 90.0, 10), offer("x", 1, 1.0, 30.0, 10)];
        let plan = select_offers(&req(3), &catalog, 120.0).unwrap();
        assert_eq!(plan.items.len(), 1);
        assert_eq!(plan.items[0].offer_id, "x");
    }

    #[test]
    fn infeasibility_names_the_constraint() {
        let slow = [offer("a", 1, 1.0, 500.0, 10)];
        let err = select_offers(&req(1), &slow, 120.0).unwrap_err().to_string();
        assert!(err.contains("deadline"), "{err}");
        let scarce = [offer("a", 1, 1.0, 0.0, 2)];
        let err = select_offers(&req(3), &scarce, 120.0).unwrap_err().to_string();
        assert!(err.contains("availability"), "{err}");
        let tiny = [ProviderOffer { ram_gb: 1.0, ..offer("a", 1, 1.0, 0.0, 9) }];
        let err = select_offers(&req(1), &tiny, 120.0).unwrap_err().to_string();
        assert!(err.contains("shape"), "{err}");
        assert!(select_offers(&req(1), &[], 120.0).is_err());
    }

    #[test]
    fn zero_requirement_is_empty() {
        let plan = select_offers(&req(0), &[offer("a", 1, 1.0, 0.0, 1)], 0.0).unwrap();
        assert!(plan.items.is_empty());
        assert_eq!(plan.total_hourly_cost, 0.0);
    }

    #[test]
    fn large_catalogs_fall_back_to_greedy() {
        let catalog: Vec<_> = (0..8).map(|i| offer(&format!("o{i}"), 1, 1.0 + i as f64, 0.0, 100)).collect();
        let plan = select_offers(&req(50), &catalog, 120.0).unwrap();
        assert!(!plan.optimal);
        assert_eq!(plan.items[0].offer_id, "o0");
        assert_eq!(plan.items[0].vm_count, 50);
    }
}
