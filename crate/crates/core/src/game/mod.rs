//! The players' game: three-stage strategies, outcome predicates, payoffs and an
//! exhaustive coalition-deviation search.
//!
//! * Stage 0 (registration): register through the player's own EOA or through a
//!   redirecting side contract, and optionally pledge all external coins to
//!   another player (or burn them) conditional on a public outcome predicate.
//! * Stage 1 (pending): keep the shares, or send copies of all of them to one
//!   other player.
//! * Stage 2: inform, steal, comply or withhold. Actions are plans: `Inform` and
//!   `Steal` fall back to `Comply` for a player who ends stage 1 with at most `t`
//!   shares, since stage-2 choices are made after seeing stage 1.
//!
//! Stages 1 and 2 run through the escrow on a chain. `w` is read from the escrow's
//! payouts and routed by the stage-0 registration choice; `y` follows from the
//! pledges and `z` from the chosen illicit-profit model.

mod certify;
mod eval;
mod side;

pub use certify::{
    cpne_certify, lemma_scenarios, Bucket, BucketCounts, CertReport, Counterexample, LemmaCheck, RedeviationScope,
    SearchSpace,
};
pub use eval::{stage_plan, Game, StagePlan, StageResult};
pub use side::Redirector;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest player count the exhaustive search accepts.
pub const MAX_PLAYERS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endowment {
    /// Coins deposited, one share slot each.
    pub a: u64,
    /// Coins kept outside the escrow.
    pub e: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub endowments: Vec<Endowment>,
}

impl Instance {
    pub fn new(a: &[u64], e: &[u64]) -> Self {
        assert_eq!(a.len(), e.len());
        Instance { endowments: a.iter().zip(e).map(|(&a, &e)| Endowment { a, e }).collect() }
    }

    pub fn players(&self) -> usize {
        self.endowments.len()
    }

    pub fn n(&self) -> u64 {
        self.endowments.iter().map(|x| x.a).sum()
    }

    pub fn t(&self) -> u64 {
        2 * self.n() / 3
    }

    pub fn p(&self) -> u64 {
        self.n() - self.t()
    }

    pub fn ell(&self) -> u64 {
        self.n()
    }

    pub fn a(&self, i: usize) -> i64 {
        self.endowments[i].a as i64
    }

    pub fn e(&self, i: usize) -> i64 {
        self.endowments[i].e as i64
    }
}

/// `e_i + a_i <= floor(n/3)` for every player.
pub fn decentralization_check(instance: &Instance) -> bool {
    let cap = instance.n() / 3;
    instance.endowments.iter().all(|x| x.a + x.e <= cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Sec,
    NotSec,
    Rob,
    NotRob,
    Inf,
    NotInf,
}

impl Predicate {
    pub const ALL: [Predicate; 6] =
        [Predicate::Sec, Predicate::NotSec, Predicate::Rob, Predicate::NotRob, Predicate::Inf, Predicate::NotInf];

    pub fn holds(self, sec: bool, rob: bool, inf: bool) -> bool {
        match self {
            Predicate::Sec => sec,
            Predicate::NotSec => !sec,
            Predicate::Rob => rob,
            Predicate::NotRob => !rob,
            Predicate::Inf => inf,
            Predicate::NotInf => !inf,
        }
    }
}

/// Where a player's slots are registered from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Route {
    Eoa,
    /// A side contract owns the slots and forwards returned deposits to `beneficiary`.
    ViaContract {
        beneficiary: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PledgeTarget {
    Player(usize),
    Burn,
}

/// Conditional commitment of all external coins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pledge {
    None,
    All { to: PledgeTarget, when: Predicate },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stage0 {
    pub route: Route,
    pub pledge: Pledge,
}

impl Stage0 {
    pub const NONE: Stage0 = Stage0 { route: Route::Eoa, pledge: Pledge::None };

    pub fn engages(&self) -> bool {
        *self != Stage0::NONE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Action {
    /// The protocol's rule: inform if holding `t + 1` shares, otherwise comply.
    InformWhenAble,
    Comply,
    Withhold,
    Inform,
    /// Profit from knowing the secret early, then comply.
    Steal,
}

impl Stage2Action {
    pub const ALL: [Stage2Action; 5] = [
        Stage2Action::InformWhenAble,
        Stage2Action::Comply,
        Stage2Action::Withhold,
        Stage2Action::Inform,
        Stage2Action::Steal,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|a| *a == self).expect("listed")
    }

    /// Only meaningful with `t + 1` shares.
    pub fn needs_threshold(self) -> bool {
        matches!(self, Stage2Action::Inform | Stage2Action::Steal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub stage0: Stage0,
    /// Recipient of copies of all own shares, if any.
    pub stage1: Option<usize>,
    pub stage2: Stage2Action,
}

impl Strategy {
    pub const DEFAULT: Strategy = Strategy { stage0: Stage0::NONE, stage1: None, stage2: Stage2Action::InformWhenAble };
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage0.route {
            Route::Eoa => f.write_str("eoa")?,
            Route::ViaContract { beneficiary } => write!(f, "via->{}", beneficiary + 1)?,
        }
        match self.stage0.pledge {
            Pledge::None => {}
            Pledge::All { to: PledgeTarget::Burn, when } => write!(f, "/burn-if-{when:?}")?,
            Pledge::All { to: PledgeTarget::Player(j), when } => write!(f, "/pay{}-if-{when:?}", j + 1)?,
        }
        match self.stage1 {
            None => f.write_str("/keep")?,
            Some(j) => write!(f, "/send->{}", j + 1)?,
        }
        write!(f, "/{:?}", self.stage2)
    }
}

pub type StrategyVector = Vec<Strategy>;

pub fn default_strategy(players: usize) -> StrategyVector {
    vec![Strategy::DEFAULT; players]
}

/// The application's illicit-profit rule. Every member keeps the total strictly
/// below `P` (so `P - 1` on integers) and pays nothing when secrecy and
/// robustness both hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZModel {
    ZeroZ,
    /// `P - 1` split among stealers once the secret leaked and was published.
    StealSplit,
    /// `P - 1` split among withholders whenever the run is not robust.
    FallbackSplit,
}

impl ZModel {
    pub const ALL: [ZModel; 3] = [ZModel::ZeroZ, ZModel::StealSplit, ZModel::FallbackSplit];

    pub fn z(self, r: &StageResult, p: u64) -> Vec<i64> {
        let players = r.holdings.len();
        let recipients: Vec<usize> = match self {
            ZModel::ZeroZ => Vec::new(),
            ZModel::StealSplit if !r.sec && (r.rob || r.inf) => r.stealers.clone(),
            ZModel::FallbackSplit if !r.rob => r.withholders.clone(),
            _ => Vec::new(),
        };
        split(p.saturating_sub(1), &recipients, players)
    }
}

/// Even split, remainder to the lowest ids.
fn split(total: u64, recipients: &[usize], players: usize) -> Vec<i64> {
    let mut z = vec![0; players];
    if recipients.is_empty() {
        return z;
    }
    let k = recipients.len() as u64;
    for (pos, &i) in recipients.iter().enumerate() {
        z[i] = (total / k + u64::from((pos as u64) < total % k)) as i64;
    }
    z
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(rename = "INF")]
    pub inf: bool,
    #[serde(rename = "SEC")]
    pub sec: bool,
    #[serde(rename = "ROB")]
    pub rob: bool,
    pub informant: Option<usize>,
    pub z: Vec<i64>,
    pub y: Vec<i64>,
    pub w: Vec<i64>,
    pub u: Vec<i64>,
    /// Whether each player used a side contract in stage 0.
    pub engaged: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bound {
    A1,
    A2,
    E1,
    E2,
    E3,
    D1,
    D2,
    D3,
    D4,
    P1,
    /// `INF` without `not SEC` and `not ROB`.
    Predicates,
    /// `u != z + y + w`.
    Sum,
}

/// Audits an outcome against every postulated bound.
pub fn check_bounds(o: &Outcome, instance: &Instance) -> Vec<Bound> {
    let players = instance.players();
    let n = instance.n() as i64;
    let p = instance.p() as i64;
    let ell = instance.ell() as i64;
    let mut bad = Vec::new();
    let mut flag = |b: Bound, cond: bool| {
        if !cond && !bad.contains(&b) {
            bad.push(b);
        }
    };
    let all = |f: &dyn Fn(usize) -> bool| (0..players).all(f);
    flag(Bound::Predicates, !o.inf || (!o.sec && !o.rob));
    flag(Bound::Sum, all(&|i| o.u[i] == o.z[i] + o.y[i] + o.w[i]));
    flag(Bound::A1, all(&|i| o.z[i] >= 0) && o.z.iter().sum::<i64>() < p);
    flag(Bound::A2, !(o.sec && o.rob) || o.z.iter().all(|&z| z == 0));
    flag(Bound::E1, all(&|i| o.y[i] >= -instance.e(i)));
    flag(Bound::E2, o.y.iter().sum::<i64>() <= 0);
    flag(Bound::E3, all(&|i| o.engaged[i] || o.y[i] >= 0));
    flag(Bound::D1, all(&|i| o.w[i] >= 0) && o.w.iter().sum::<i64>() <= n);
    if o.inf {
        let f = o.informant;
        flag(Bound::D2, f.is_some() && all(&|i| o.w[i] == if Some(i) == f { ell } else { 0 }));
    }
    flag(Bound::D3, o.inf || o.rob || o.w.iter().all(|&w| w == 0));
    flag(Bound::D4, !o.rob || all(&|i| o.engaged[i] || o.w[i] >= instance.a(i)));
    flag(Bound::P1, all(&|i| o.u[i] >= -instance.e(i)) && o.u.iter().sum::<i64>() < n + p);
    bad
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid strategy for player {player}: {reason}")]
    InvalidStrategy { player: usize, reason: String },
    #[error("outcome violates {0:?}")]
    BoundViolation(Vec<Bound>),
    #[error("search over {players} players with {deviations} joint deviations exceeds the budget")]
    SearchBudgetExceeded { players: usize, deviations: u128 },
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
}
