//! Slowdown tables and expected-time prediction.
//!
//! A slowdown is the dimensionless ratio of a VM's (or region pair's)
//! measured time to the baseline's. One measurement per VM converts a
//! client's baseline times into predictions for every placement. Execution
//! slowdowns depend on where the measured dataset lived (storage access is
//! part of the measured time), so the table set is keyed by dataset
//! location; a table without a location key applies to every client.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app::{ClientSpec, FlApplication};
use crate::cloud::VmAddress;
use crate::units::{scale_time, RatioMicros, TimeMicros, MICROS_PER_UNIT};

/// A (provider id, region id) pair naming where a dataset lives.
pub type DatasetLocation = (String, String);

/// Canonical unordered pair of regions; `(a, b)` and `(b, a)` compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionPair {
    lo: (String, String),
    hi: (String, String),
}

impl RegionPair {
    pub fn new(a: (String, String), b: (String, String)) -> Self {
        if a <= b {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        }
    }

    pub fn of(a: &(String, String), b: &(String, String)) -> Self {
        Self::new(a.clone(), b.clone())
    }

    pub fn sides(&self) -> (&(String, String), &(String, String)) {
        (&self.lo, &self.hi)
    }
}

/// Raw two-round timing of the dummy workload on one VM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecMeasurement {
    pub vm: VmAddress,
    pub round1_train: TimeMicros,
    pub round1_test: TimeMicros,
    pub round2_train: TimeMicros,
    pub round2_test: TimeMicros,
}

impl ExecMeasurement {
    fn steady_state(&self) -> TimeMicros {
        self.round2_train + self.round2_test
    }
}

/// Raw message-exchange timing between a pair of regions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommMeasurement {
    pub region_pair: RegionPair,
    pub train_time: TimeMicros,
    pub test_time: TimeMicros,
}

impl CommMeasurement {
    fn total(&self) -> TimeMicros {
        self.train_time + self.test_time
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SlowdownError {
    #[error("baseline measurement sums to zero")]
    ZeroBaseline,
    #[error("no execution slowdown for VM {vm} with dataset in {provider}/{region}")]
    MissingExecEntry {
        vm: String,
        provider: String,
        region: String,
    },
    #[error("no communication slowdown for region pair {0}/{1} <-> {2}/{3}")]
    MissingCommEntry(String, String, String, String),
}

/// Execution slowdowns measured with the dummy dataset stored at one
/// location. `dataset_location = None` marks the default table used for any
/// client location not matched explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecTable {
    pub dataset_location: Option<(String, String)>,
    pub entries: BTreeMap<VmAddress, RatioMicros>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlowdownTables {
    pub exec: Vec<ExecTable>,
    pub comm: BTreeMap<RegionPair, RatioMicros>,
    pub baseline_vm: VmAddress,
    pub baseline_pair: RegionPair,
}

impl SlowdownTables {
    /// The execution table applicable to a dataset location: an exact match
    /// wins, otherwise the location-less default table.
    pub fn exec_table_for(&self, location: &(String, String)) -> Option<&ExecTable> {
        self.exec
            .iter()
            .find(|t| t.dataset_location.as_ref() == Some(location))
            .or_else(|| self.exec.iter().find(|t| t.dataset_location.is_none()))
    }

    pub fn exec_slowdown_for(
        &self,
        location: &(String, String),
        vm: &VmAddress,
    ) -> Result<RatioMicros, SlowdownError> {
        self.exec_table_for(location)
            .and_then(|t| t.entries.get(vm).copied())
            .ok_or_else(|| SlowdownError::MissingExecEntry {
                vm: vm.to_string(),
                provider: location.0.clone(),
                region: location.1.clone(),
            })
    }

    pub fn comm_slowdown_for(
        &self,
        a: &(String, String),
        b: &(String, String),
    ) -> Result<RatioMicros, SlowdownError> {
        let pair = RegionPair::of(a, b);
        self.comm.get(&pair).copied().ok_or_else(|| {
            SlowdownError::MissingCommEntry(a.0.clone(), a.1.clone(), b.0.clone(), b.1.clone())
        })
    }

    /// Every VM that has an execution slowdown usable by the given client.
    pub fn client_vms<'a>(
        &'a self,
        location: &(String, String),
    ) -> impl Iterator<Item = &'a VmAddress> + 'a {
        self.exec_table_for(location)
            .into_iter()
            .flat_map(|t| t.entries.keys())
    }
}

/// Ratio of second-round execution time to the baseline's, in millionths.
pub fn exec_slowdown(
    m: &ExecMeasurement,
    baseline: &ExecMeasurement,
) -> Result<RatioMicros, SlowdownError> {
    let denom = baseline.steady_state();
    if denom <= 0 {
        return Err(SlowdownError::ZeroBaseline);
    }
    Ok(crate::units::div_round(
        m.steady_state() as i128 * MICROS_PER_UNIT as i128,
        denom as i128,
    ) as RatioMicros)
}

/// Ratio of combined train+test exchange time to the baseline pair's.
pub fn comm_slowdown(
    m: &CommMeasurement,
    baseline: &CommMeasurement,
) -> Result<RatioMicros, SlowdownError> {
    let denom = baseline.total();
    if denom <= 0 {
        return Err(SlowdownError::ZeroBaseline);
    }
    Ok(crate::units::div_round(
        m.total() as i128 * MICROS_PER_UNIT as i128,
        denom as i128,
    ) as RatioMicros)
}

/// Expected per-round execution time of a client on a VM:
/// (train + test baseline) scaled by the VM's slowdown.
pub fn expected_exec_time(
    client: &ClientSpec,
    vm: &VmAddress,
    tables: &SlowdownTables,
) -> Result<TimeMicros, SlowdownError> {
    let sl = tables.exec_slowdown_for(&client.dataset_location, vm)?;
    Ok(scale_time(client.baseline_total(), sl))
}

/// Expected per-round communication time between two regions: the
/// application's baseline communication time scaled by the pair's slowdown.
pub fn expected_comm_time(
    region_a: &(String, String),
    region_b: &(String, String),
    app: &FlApplication,
    tables: &SlowdownTables,
) -> Result<TimeMicros, SlowdownError> {
    let sl = tables.comm_slowdown_for(region_a, region_b)?;
    Ok(scale_time(app.baseline_comm_time, sl))
}

/// Total runtime from the first two epoch timings: the first epoch runs
/// once, every later epoch is assumed to match the second.
pub fn extrapolate_total_runtime(ep1: TimeMicros, ep2: TimeMicros, n_ep: u32) -> TimeMicros {
    ep1 + (n_ep.max(1) as i64 - 1) * ep2
}

/// Builds slowdown tables from raw measurements. Each measurement set is
/// tagged with the dataset location it was collected under.
pub fn tables_from_measurements(
    exec_sets: &[(Option<DatasetLocation>, Vec<ExecMeasurement>)],
    comm: &[CommMeasurement],
    baseline_vm: &VmAddress,
    baseline_pair: &RegionPair,
) -> Result<SlowdownTables, SlowdownError> {
    let mut exec_tables = Vec::new();
    for (location, set) in exec_sets {
        let baseline = set
            .iter()
            .find(|m| &m.vm == baseline_vm)
            .ok_or(SlowdownError::ZeroBaseline)?;
        let mut entries = BTreeMap::new();
        for m in set {
            entries.insert(m.vm.clone(), exec_slowdown(m, baseline)?);
        }
        exec_tables.push(ExecTable {
            dataset_location: location.clone(),
            entries,
        });
    }
    let comm_baseline = comm
        .iter()
        .find(|m| &m.region_pair == baseline_pair)
        .ok_or(SlowdownError::ZeroBaseline)?;
    let mut comm_entries = BTreeMap::new();
    for m in comm {
        comm_entries.insert(m.region_pair.clone(), comm_slowdown(m, comm_baseline)?);
    }
    Ok(SlowdownTables {
        exec: exec_tables,
        comm: comm_entries,
        baseline_vm: baseline_vm.clone(),
        baseline_pair: baseline_pair.clone(),
    })
}
