//! Multi-cloud environment catalog: providers, regions, VM instance types,
//! prices, transfer costs, and capacity quotas.
//!
//! The catalog is immutable after construction; every operation here is a
//! pure read, so an environment can be shared freely across threads.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::units::{RatioMicros, TimeMicros, UsdMicros};

/// GPU/vCPU capacity limit. Unbounded is explicit so catalogs with "infinite"
/// limits round-trip losslessly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quota {
    Unbounded,
    Limited(u64),
}

impl Quota {
    pub fn allows(&self, used: u64) -> bool {
        match self {
            Quota::Unbounded => true,
            Quota::Limited(n) => used <= *n,
        }
    }
}

/// Pricing model for a VM assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pricing {
    OnDemand,
    Spot,
}

impl fmt::Display for Pricing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pricing::OnDemand => write!(f, "on-demand"),
            Pricing::Spot => write!(f, "spot"),
        }
    }
}

/// One VM instance type offered in a region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmTypeSpec {
    pub id: String,
    pub vcpus: u64,
    pub gpus: u64,
    /// On-demand price in micro-dollars per hour.
    pub on_demand_price: UsdMicros,
    /// Spot price in micro-dollars per hour; derived as 30% of on-demand when
    /// the input file does not supply one.
    pub spot_price: UsdMicros,
    /// Time the FL server's aggregation step takes on this VM.
    pub aggregation_time: TimeMicros,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub id: String,
    pub vm_types: Vec<VmTypeSpec>,
    pub gpu_quota: Quota,
    pub vcpu_quota: Quota,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub id: String,
    pub regions: Vec<RegionSpec>,
    /// Cost in micro-dollars per gigabyte for any message leaving a VM of
    /// this provider.
    pub transfer_cost_per_gb: UsdMicros,
    pub gpu_quota: Quota,
    pub vcpu_quota: Quota,
}

/// Canonical key for one VM instance type: provider/region/type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VmAddress {
    pub provider: String,
    pub region: String,
    pub vm_type: String,
}

impl VmAddress {
    pub fn new(provider: &str, region: &str, vm_type: &str) -> Self {
        Self {
            provider: provider.to_string(),
            region: region.to_string(),
            vm_type: vm_type.to_string(),
        }
    }

    /// Parses the compact `provider/region/type` form used in config files.
    pub fn parse(s: &str) -> Option<Self> {
        let mut parts = s.splitn(3, '/');
        Some(Self {
            provider: parts.next()?.to_string(),
            region: parts.next()?.to_string(),
            vm_type: parts.next()?.to_string(),
        })
    }

    pub fn region_key(&self) -> (String, String) {
        (self.provider.clone(), self.region.clone())
    }
}

impl fmt::Display for VmAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.provider, self.region, self.vm_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiCloudEnv {
    pub providers: Vec<ProviderSpec>,
}

/// A resolved view of one VM type together with its location.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedVm<'a> {
    pub provider: &'a ProviderSpec,
    pub region: &'a RegionSpec,
    pub vm: &'a VmTypeSpec,
}

impl<'a> ResolvedVm<'a> {
    pub fn price(&self, pricing: Pricing) -> UsdMicros {
        match pricing {
            Pricing::OnDemand => self.vm.on_demand_price,
            Pricing::Spot => self.vm.spot_price,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum CloudError {
    #[error("unresolvable VM address {0}")]
    UnresolvableAddress(String),
}

/// One invariant violation found by validation, with a path to the offending
/// element. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl MultiCloudEnv {
    pub fn resolve(&self, addr: &VmAddress) -> Result<ResolvedVm<'_>, CloudError> {
        self.providers
            .iter()
            .find(|p| p.id == addr.provider)
            .and_then(|p| {
                p.regions
                    .iter()
                    .find(|r| r.id == addr.region)
                    .and_then(|r| {
                        r.vm_types
                            .iter()
                            .find(|v| v.id == addr.vm_type)
                            .map(|v| ResolvedVm {
                                provider: p,
                                region: r,
                                vm: v,
                            })
                    })
            })
            .ok_or_else(|| CloudError::UnresolvableAddress(addr.to_string()))
    }

    pub fn provider(&self, id: &str) -> Option<&ProviderSpec> {
        self.providers.iter().find(|p| p.id == id)
    }

    pub fn region(&self, provider: &str, region: &str) -> Option<&RegionSpec> {
        self.provider(provider)?.regions.iter().find(|r| r.id == region)
    }

    /// Iterates every VM address in catalog order (providers, then regions,
    /// then types, as listed).
    pub fn vm_addresses(&self) -> impl Iterator<Item = VmAddress> + '_ {
        self.providers.iter().flat_map(|p| {
            p.regions.iter().flat_map(move |r| {
                r.vm_types
                    .iter()
                    .map(move |v| VmAddress::new(&p.id, &r.id, &v.id))
            })
        })
    }

    pub fn vm_count(&self) -> usize {
        self.providers
            .iter()
            .flat_map(|p| &p.regions)
            .map(|r| r.vm_types.len())
            .sum()
    }
}

/// Per-second price of a VM under the given pricing model, in dollars.
/// Internal cost arithmetic stays on the exact hourly micro-dollar figure;
/// this is the user-facing rate.
pub fn price_of(
    env: &MultiCloudEnv,
    addr: &VmAddress,
    pricing: Pricing,
) -> Result<f64, CloudError> {
    let resolved = env.resolve(addr)?;
    Ok(resolved.price(pricing) as f64 / 1e6 / 3600.0)
}

/// Derives a spot price when the input data does not carry one: a 70%
/// discount on the on-demand price.
pub fn default_spot_price(on_demand: UsdMicros) -> UsdMicros {
    crate::units::div_round(on_demand as i128 * 3, 10) as UsdMicros
}

/// vCPU/GPU totals, grouped by provider and by region.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CapacityUsage {
    /// provider id -> (vcpus, gpus)
    pub per_provider: BTreeMap<String, (u64, u64)>,
    /// (provider id, region id) -> (vcpus, gpus)
    pub per_region: BTreeMap<(String, String), (u64, u64)>,
}

impl CapacityUsage {
    pub fn add(&mut self, other: &CapacityUsage) {
        for (k, (c, g)) in &other.per_provider {
            let e = self.per_provider.entry(k.clone()).or_insert((0, 0));
            e.0 += c;
            e.1 += g;
        }
        for (k, (c, g)) in &other.per_region {
            let e = self.per_region.entry(k.clone()).or_insert((0, 0));
            e.0 += c;
            e.1 += g;
        }
    }

    pub fn add_vm(&mut self, addr: &VmAddress, vcpus: u64, gpus: u64) {
        let p = self
            .per_provider
            .entry(addr.provider.clone())
            .or_insert((0, 0));
        p.0 += vcpus;
        p.1 += gpus;
        let r = self
            .per_region
            .entry((addr.provider.clone(), addr.region.clone()))
            .or_insert((0, 0));
        r.0 += vcpus;
        r.1 += gpus;
    }
}

/// Exact vCPU/GPU sums over every assigned task (clients plus server).
pub fn capacity_usage(
    env: &MultiCloudEnv,
    assignment: &crate::assign::Assignment,
) -> Result<CapacityUsage, CloudError> {
    let mut usage = CapacityUsage::default();
    for addr in assignment
        .client_vm
        .values()
        .chain(std::iter::once(&assignment.server_vm))
    {
        let vm = env.resolve(addr)?;
        usage.add_vm(addr, vm.vm.vcpus, vm.vm.gpus);
    }
    Ok(usage)
}

/// Checks every catalog invariant and returns the full list of violations.
/// An empty report means the environment is valid.
pub fn validate_env(env: &MultiCloudEnv) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Violation { path, message });

    if env.providers.is_empty() {
        push("env".into(), "environment has no providers".into());
    }
    let mut provider_ids = BTreeMap::new();
    let mut any_vm = false;
    for (pi, p) in env.providers.iter().enumerate() {
        let ppath = format!("providers[{}]({})", pi, p.id);
        if let Some(prev) = provider_ids.insert(p.id.clone(), pi) {
            push(
                ppath.clone(),
                format!("duplicate provider id (also providers[{prev}])"),
            );
        }
        if p.transfer_cost_per_gb < 0 {
            push(
                format!("{ppath}.transfer_cost_per_gb"),
                "transfer cost must be >= 0".into(),
            );
        }
        if p.regions.is_empty() {
            push(ppath.clone(), "provider has no regions".into());
        }
        let mut region_ids = BTreeMap::new();
        for (ri, r) in p.regions.iter().enumerate() {
            let rpath = format!("{}.regions[{}]({})", ppath, ri, r.id);
            if let Some(prev) = region_ids.insert(r.id.clone(), ri) {
                push(
                    rpath.clone(),
                    format!("duplicate region id (also regions[{prev}])"),
                );
            }
            if let (Quota::Limited(rq), Quota::Limited(pq)) = (r.gpu_quota, p.gpu_quota) {
                if rq > pq {
                    push(
                        format!("{rpath}.gpu_quota"),
                        format!("region GPU quota {rq} exceeds provider quota {pq}"),
                    );
                }
            }
            if let (Quota::Limited(rq), Quota::Limited(pq)) = (r.vcpu_quota, p.vcpu_quota) {
                if rq > pq {
                    push(
                        format!("{rpath}.vcpu_quota"),
                        format!("region vCPU quota {rq} exceeds provider quota {pq}"),
                    );
                }
            }
            let mut vm_ids = BTreeMap::new();
            for (vi, v) in r.vm_types.iter().enumerate() {
                any_vm = true;
                let vpath = format!("{}.vm_types[{}]({})", rpath, vi, v.id);
                if let Some(prev) = vm_ids.insert(v.id.clone(), vi) {
                    push(
                        vpath.clone(),
                        format!("duplicate vm type id (also vm_types[{prev}])"),
                    );
                }
                if v.on_demand_price <= 0 {
                    push(
                        format!("{vpath}.on_demand_price"),
                        "on-demand price must be > 0".into(),
                    );
                }
                if v.spot_price <= 0 {
                    push(format!("{vpath}.spot_price"), "spot price must be > 0".into());
                }
                if v.spot_price > v.on_demand_price {
                    push(
                        format!("{vpath}.spot_price"),
                        format!(
                            "spot price {} exceeds on-demand price {}",
                            v.spot_price, v.on_demand_price
                        ),
                    );
                }
                if v.vcpus == 0 {
                    push(format!("{vpath}.vcpus"), "vCPU count must be positive".into());
                }
                if v.aggregation_time < 0 {
                    push(
                        format!("{vpath}.aggregation_time"),
                        "aggregation time must be >= 0".into(),
                    );
                }
            }
        }
    }
    if !env.providers.is_empty() && !any_vm {
        push("env".into(), "environment has no VM types".into());
    }
    out
}

/// Builder used by tests and synthetic catalogs.
pub fn vm_type(
    id: &str,
    vcpus: u64,
    gpus: u64,
    on_demand_price: UsdMicros,
    spot_price: Option<UsdMicros>,
    aggregation_time: TimeMicros,
) -> VmTypeSpec {
    VmTypeSpec {
        id: id.to_string(),
        vcpus,
        gpus,
        on_demand_price,
        spot_price: spot_price.unwrap_or_else(|| default_spot_price(on_demand_price)),
        aggregation_time,
    }
}

/// Interned flat view of the catalog used by the solver and simulator. The
/// index order is the deterministic catalog order.
#[derive(Debug, Clone)]
pub struct FlatCatalog {
    pub vms: Vec<FlatVm>,
    index: BTreeMap<VmAddress, usize>,
}

#[derive(Debug, Clone)]
pub struct FlatVm {
    pub addr: VmAddress,
    pub vcpus: u64,
    pub gpus: u64,
    pub on_demand_price: UsdMicros,
    pub spot_price: UsdMicros,
    pub aggregation_time: TimeMicros,
    pub transfer_cost_per_gb: UsdMicros,
}

impl FlatVm {
    pub fn price(&self, pricing: Pricing) -> UsdMicros {
        match pricing {
            Pricing::OnDemand => self.on_demand_price,
            Pricing::Spot => self.spot_price,
        }
    }
}

impl FlatCatalog {
    pub fn new(env: &MultiCloudEnv) -> Self {
        let mut vms = Vec::new();
        let mut index = BTreeMap::new();
        for p in &env.providers {
            for r in &p.regions {
                for v in &r.vm_types {
                    let addr = VmAddress::new(&p.id, &r.id, &v.id);
                    index.insert(addr.clone(), vms.len());
                    vms.push(FlatVm {
                        addr,
                        vcpus: v.vcpus,
                        gpus: v.gpus,
                        on_demand_price: v.on_demand_price,
                        spot_price: v.spot_price,
                        aggregation_time: v.aggregation_time,
                        transfer_cost_per_gb: p.transfer_cost_per_gb,
                    });
                }
            }
        }
        Self { vms, index }
    }

    pub fn lookup(&self, addr: &VmAddress) -> Option<usize> {
        self.index.get(addr).copied()
    }

    pub fn len(&self) -> usize {
        self.vms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vms.is_empty()
    }
}

/// Ratio helper re-exported for congestion-free imports in fixtures/tests.
pub fn slowdown(v: f64) -> RatioMicros {
    crate::units::ratio_to_micros(v)
}
