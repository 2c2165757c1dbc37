//! The FL application being scheduled: clients, baselines, message sizes,
//! round structure, and the user's budget/deadline/objective weight.

use serde::{Deserialize, Serialize};

use crate::cloud::{MultiCloudEnv, Violation};
use crate::units::{RatioMicros, TimeMicros, UsdMicros, MICROS_PER_UNIT};

/// One FL client. Baseline times are the client's measured train/test
/// durations on the baseline VM; its dataset stays wherever it was stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSpec {
    pub id: String,
    /// (provider id, region id) of the storage holding this client's dataset.
    pub dataset_location: (String, String),
    pub baseline_train_time: TimeMicros,
    pub baseline_test_time: TimeMicros,
}

impl ClientSpec {
    pub fn baseline_total(&self) -> TimeMicros {
        self.baseline_train_time + self.baseline_test_time
    }
}

/// Sizes of the four messages exchanged in one round, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageProfile {
    pub server_train_msg: u64,
    pub server_aggreg_msg: u64,
    pub client_train_msg: u64,
    pub client_test_msg: u64,
}

impl MessageProfile {
    /// Bytes leaving the server per client per round.
    pub fn server_bytes(&self) -> u64 {
        self.server_train_msg + self.server_aggreg_msg
    }

    /// Bytes leaving a client per round.
    pub fn client_bytes(&self) -> u64 {
        self.client_train_msg + self.client_test_msg
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlApplication {
    pub clients: Vec<ClientSpec>,
    pub n_rounds: u32,
    pub epochs_per_round: u32,
    pub messages: MessageProfile,
    /// Whole-application budget in micro-dollars.
    pub budget: UsdMicros,
    /// Whole-application deadline in microseconds.
    pub deadline: TimeMicros,
    /// Cost-vs-makespan weight in millionths (0 = pure makespan, 1e6 = pure cost).
    pub alpha: RatioMicros,
    /// Combined train+test communication time in the baseline region pair.
    pub baseline_comm_time: TimeMicros,
}

impl FlApplication {
    pub fn client(&self, id: &str) -> Option<&ClientSpec> {
        self.clients.iter().find(|c| c.id == id)
    }
}

/// Per-round budget and deadline obtained by dividing the user limits by the
/// number of rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLimits {
    pub budget_per_round: UsdMicros,
    pub deadline_per_round: TimeMicros,
}

/// Divides budget and deadline across rounds. Division is exact down to the
/// micro unit (floor).
pub fn round_limits(app: &FlApplication) -> RoundLimits {
    let n = app.n_rounds.max(1) as i64;
    RoundLimits {
        budget_per_round: app.budget / n,
        deadline_per_round: app.deadline / n,
    }
}

/// Reports unresolvable dataset locations, an out-of-range alpha, and
/// non-positive limits. Violations are data, not failures.
pub fn validate_app(app: &FlApplication, env: &MultiCloudEnv) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Violation { path, message });

    if app.clients.is_empty() {
        push("app.clients".into(), "application has no clients".into());
    }
    if app.n_rounds == 0 {
        push("app.n_rounds".into(), "round count must be >= 1".into());
    }
    if app.epochs_per_round == 0 {
        push("app.epochs_per_round".into(), "epoch count must be >= 1".into());
    }
    if app.budget <= 0 {
        push("app.budget".into(), "budget must be > 0".into());
    }
    if app.deadline <= 0 {
        push("app.deadline".into(), "deadline must be > 0".into());
    }
    if app.alpha > MICROS_PER_UNIT as u64 {
        push(
            "app.alpha".into(),
            format!(
                "alpha must lie in [0, 1], got {}",
                app.alpha as f64 / MICROS_PER_UNIT as f64
            ),
        );
    }
    if app.baseline_comm_time < 0 {
        push(
            "app.baseline_comm_time".into(),
            "baseline communication time must be >= 0".into(),
        );
    }
    let mut seen = std::collections::BTreeSet::new();
    for (i, c) in app.clients.iter().enumerate() {
        let path = format!("app.clients[{}]({})", i, c.id);
        if !seen.insert(c.id.clone()) {
            push(path.clone(), "duplicate client id".into());
        }
        if c.baseline_train_time < 0 || c.baseline_test_time < 0 {
            push(path.clone(), "baseline times must be >= 0".into());
        }
        let (p, r) = &c.dataset_location;
        if env.region(p, r).is_none() {
            push(
                format!("{path}.dataset_location"),
                format!("unknown region {p}/{r}"),
            );
        }
    }
    out
}
