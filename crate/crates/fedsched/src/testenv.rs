//! Shared unit-test environment: the two-provider commercial catalog and its
//! measured slowdown tables, built in code so module tests do not depend on
//! fixture files.

use std::collections::BTreeMap;

use crate::app::{ClientSpec, FlApplication, MessageProfile};
use crate::assign::Assignment;
use crate::cloud::{
    vm_type, MultiCloudEnv, Pricing, ProviderSpec, Quota, RegionSpec, VmAddress,
};
use crate::slowdowns::{ExecTable, RegionPair, SlowdownTables};
use crate::units::{gb_to_bytes, ratio_to_micros, secs_to_micros, usd_to_micros};

pub fn aws_gcp_env() -> MultiCloudEnv {
    let aws_aggreg = secs_to_micros(0.3);
    let gcp_aggreg = secs_to_micros(0.2);
    MultiCloudEnv {
        providers: vec![
            ProviderSpec {
                id: "aws".into(),
                transfer_cost_per_gb: usd_to_micros(0.09),
                gpu_quota: Quota::Unbounded,
                vcpu_quota: Quota::Unbounded,
                regions: vec![
                    RegionSpec {
                        id: "us-east-1".into(),
                        gpu_quota: Quota::Unbounded,
                        vcpu_quota: Quota::Unbounded,
                        vm_types: vec![
                            vm_type("g4dn.2xlarge", 8, 1, usd_to_micros(0.752), None, aws_aggreg),
                            vm_type("g3.4xlarge", 16, 1, usd_to_micros(1.14), None, aws_aggreg),
                            vm_type("t2.xlarge", 4, 0, usd_to_micros(0.1856), None, aws_aggreg),
                        ],
                    },
                    RegionSpec {
                        id: "us-west-2".into(),
                        gpu_quota: Quota::Unbounded,
                        vcpu_quota: Quota::Unbounded,
                        vm_types: vec![
                            vm_type("g4dn.2xlarge", 8, 1, usd_to_micros(0.752), None, aws_aggreg),
                            vm_type("g3.4xlarge", 16, 1, usd_to_micros(1.14), None, aws_aggreg),
                            vm_type("t2.xlarge", 4, 0, usd_to_micros(0.1856), None, aws_aggreg),
                        ],
                    },
                ],
            },
            ProviderSpec {
                id: "gcp".into(),
                transfer_cost_per_gb: usd_to_micros(0.12),
                gpu_quota: Quota::Unbounded,
                vcpu_quota: Quota::Unbounded,
                regions: vec![
                    RegionSpec {
                        id: "us-central1".into(),
                        gpu_quota: Quota::Unbounded,
                        vcpu_quota: Quota::Unbounded,
                        vm_types: vec![
                            vm_type("n1-standard-8-t4", 8, 1, usd_to_micros(0.73), None, gcp_aggreg),
                            vm_type("n1-standard-16-p4", 16, 1, usd_to_micros(1.36), None, gcp_aggreg),
                            vm_type("n1-standard-8-v100", 8, 1, usd_to_micros(2.86), None, gcp_aggreg),
                            vm_type("e2-standard-4", 4, 0, usd_to_micros(0.134), None, gcp_aggreg),
                        ],
                    },
                    RegionSpec {
                        id: "us-west1".into(),
                        gpu_quota: Quota::Unbounded,
                        vcpu_quota: Quota::Unbounded,
                        vm_types: vec![
                            vm_type("n1-standard-8-t4", 8, 1, usd_to_micros(0.73), None, gcp_aggreg),
                            vm_type("n1-standard-8-v100", 8, 1, usd_to_micros(2.86), None, gcp_aggreg),
                            vm_type("e2-standard-4", 4, 0, usd_to_micros(0.134), None, gcp_aggreg),
                        ],
                    },
                ],
            },
        ],
    }
}

fn region(p: &str, r: &str) -> (String, String) {
    (p.to_string(), r.to_string())
}

type SlRow = (VmAddress, f64);

pub fn measured_tables() -> SlowdownTables {
    let addr = |p: &str, r: &str, v: &str| VmAddress::new(p, r, v);
    let aws_ds: Vec<SlRow> = vec![
        (addr("aws", "us-east-1", "g4dn.2xlarge"), 1.00),
        (addr("aws", "us-east-1", "g3.4xlarge"), 5.09),
        (addr("aws", "us-west-2", "g4dn.2xlarge"), 0.99),
        (addr("aws", "us-west-2", "g3.4xlarge"), 4.44),
        (addr("gcp", "us-central1", "n1-standard-8-t4"), 1.03),
        (addr("gcp", "us-central1", "n1-standard-16-p4"), 1.28),
        (addr("gcp", "us-central1", "n1-standard-8-v100"), 1.04),
        (addr("gcp", "us-west1", "n1-standard-8-t4"), 1.07),
        (addr("gcp", "us-west1", "n1-standard-8-v100"), 1.10),
    ];
    let gcp_ds: Vec<SlRow> = vec![
        (addr("aws", "us-east-1", "g4dn.2xlarge"), 1.00),
        (addr("aws", "us-east-1", "g3.4xlarge"), 1.52),
        (addr("aws", "us-west-2", "g4dn.2xlarge"), 1.36),
        (addr("aws", "us-west-2", "g3.4xlarge"), 1.92),
        (addr("gcp", "us-central1", "n1-standard-8-t4"), 0.84),
        (addr("gcp", "us-central1", "n1-standard-16-p4"), 0.89),
        (addr("gcp", "us-central1", "n1-standard-8-v100"), 0.42),
        (addr("gcp", "us-west1", "n1-standard-8-t4"), 0.99),
        (addr("gcp", "us-west1", "n1-standard-8-v100"), 0.90),
    ];
    type CommRow = ((&'static str, &'static str), (&'static str, &'static str), f64);
    let comm: Vec<CommRow> = vec![
        (("aws", "us-east-1"), ("aws", "us-east-1"), 1.00),
        (("aws", "us-east-1"), ("aws", "us-west-2"), 5.84),
        (("aws", "us-east-1"), ("gcp", "us-central1"), 3.40),
        (("aws", "us-east-1"), ("gcp", "us-west1"), 4.78),
        (("aws", "us-west-2"), ("aws", "us-west-2"), 0.97),
        (("aws", "us-west-2"), ("gcp", "us-central1"), 4.65),
        (("aws", "us-west-2"), ("gcp", "us-west1"), 3.04),
        (("gcp", "us-central1"), ("gcp", "us-central1"), 0.34),
        (("gcp", "us-central1"), ("gcp", "us-west1"), 1.09),
        (("gcp", "us-west1"), ("gcp", "us-west1"), 0.62),
    ];
    let to_entries = |v: Vec<SlRow>| {
        v.into_iter()
            .map(|(a, s)| (a, ratio_to_micros(s)))
            .collect::<BTreeMap<_, _>>()
    };
    SlowdownTables {
        exec: vec![
            ExecTable {
                dataset_location: Some(region("aws", "us-east-1")),
                entries: to_entries(aws_ds),
            },
            ExecTable {
                dataset_location: Some(region("gcp", "us-central1")),
                entries: to_entries(gcp_ds),
            },
        ],
        comm: comm
            .into_iter()
            .map(|(a, b, s)| {
                (
                    RegionPair::new(region(a.0, a.1), region(b.0, b.1)),
                    ratio_to_micros(s),
                )
            })
            .collect(),
        baseline_vm: addr("aws", "us-east-1", "g4dn.2xlarge"),
        baseline_pair: RegionPair::new(region("aws", "us-east-1"), region("aws", "us-east-1")),
    }
}

pub fn til_messages() -> MessageProfile {
    MessageProfile {
        server_train_msg: gb_to_bytes(0.54),
        server_aggreg_msg: gb_to_bytes(0.54),
        client_train_msg: gb_to_bytes(0.54),
        client_test_msg: gb_to_bytes(0.00000181),
    }
}

fn base_app(clients: Vec<ClientSpec>) -> FlApplication {
    FlApplication {
        clients,
        n_rounds: 1,
        epochs_per_round: 5,
        messages: til_messages(),
        budget: usd_to_micros(30_000.0),
        deadline: secs_to_micros(10_000.0),
        alpha: 500_000,
        baseline_comm_time: secs_to_micros(27.26),
    }
}

fn aws_client(id: &str) -> ClientSpec {
    ClientSpec {
        id: id.into(),
        dataset_location: region("aws", "us-east-1"),
        baseline_train_time: secs_to_micros(412.94),
        baseline_test_time: secs_to_micros(182.77),
    }
}

fn gcp_client(id: &str) -> ClientSpec {
    ClientSpec {
        id: id.into(),
        dataset_location: region("gcp", "us-central1"),
        baseline_train_time: secs_to_micros(183.53),
        baseline_test_time: secs_to_micros(49.47),
    }
}

/// `n` identical clients with datasets stored in AWS.
pub fn aws_app(n: usize) -> FlApplication {
    base_app((1..=n).map(|i| aws_client(&format!("c{i:02}"))).collect())
}

/// `n` identical clients with datasets stored in GCP.
pub fn gcp_app(n: usize) -> FlApplication {
    base_app((1..=n).map(|i| gcp_client(&format!("c{i:02}"))).collect())
}

/// Half AWS-stored, half GCP-stored clients.
pub fn mixed_app(n_aws: usize, n_gcp: usize) -> FlApplication {
    let mut clients: Vec<ClientSpec> = (1..=n_aws)
        .map(|i| aws_client(&format!("aws-c{i:02}")))
        .collect();
    clients.extend((1..=n_gcp).map(|i| gcp_client(&format!("gcp-c{i:02}"))));
    base_app(clients)
}

/// Puts every client on `client_vm` and the server on `server_vm`.
pub fn uniform_assignment(
    app: &FlApplication,
    client_vm: &VmAddress,
    server_vm: &VmAddress,
) -> Assignment {
    Assignment {
        client_vm: app
            .clients
            .iter()
            .map(|c| (c.id.clone(), client_vm.clone()))
            .collect(),
        server_vm: server_vm.clone(),
        pricing: Pricing::OnDemand,
    }
}
