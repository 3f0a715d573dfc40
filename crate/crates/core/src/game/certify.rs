use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    decentralization_check, Game, GameError, Instance, Outcome, Pledge, PledgeTarget, Predicate, Route, Stage0,
    Stage2Action, Strategy, ZModel, MAX_PLAYERS,
};
use crate::scalar::GroupInt;

/// Which unilateral re-deviations count against self-enforcement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedeviationScope {
    /// Side contracts deployed in stage 0 bind their owner: only stages 1 and 2
    /// may change.
    Binding,
    /// Any strategy, stage 0 included.
    Full,
}

/// The discretized strategy space and search options.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub routes: bool,
    pub pledges: bool,
    pub stage1: bool,
    pub stage2: Vec<Stage2Action>,
    pub z_models: Vec<ZModel>,
    /// Also let all players deviate together.
    pub grand_coalition: bool,
    pub redeviation: RedeviationScope,
    /// Upper bound on joint deviations per z model.
    pub max_deviations: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            routes: true,
            pledges: true,
            stage1: true,
            stage2: Stage2Action::ALL.to_vec(),
            z_models: ZModel::ALL.to_vec(),
            grand_coalition: true,
            redeviation: RedeviationScope::Binding,
            max_deviations: 20_000_000,
        }
    }
}

impl SearchSpace {
    /// Every strategy of player `i`. Choices that cannot matter (routing zero
    /// deposits, pledging zero coins, sending zero shares) are left out.
    pub fn strategies(&self, instance: &Instance, i: usize) -> Vec<Strategy> {
        let players = instance.players();
        let others: Vec<usize> = (0..players).filter(|&j| j != i).collect();
        let has_deposit = instance.a(i) > 0;
        let mut routes = vec![Route::Eoa];
        if self.routes && has_deposit {
            routes.extend(others.iter().map(|&j| Route::ViaContract { beneficiary: j }));
        }
        let mut pledges = vec![Pledge::None];
        if self.pledges && instance.e(i) > 0 {
            let targets = others.iter().map(|&j| PledgeTarget::Player(j)).chain([PledgeTarget::Burn]);
            for to in targets {
                pledges.extend(Predicate::ALL.iter().map(|&when| Pledge::All { to, when }));
            }
        }
        let mut sends = vec![None];
        if self.stage1 && has_deposit {
            sends.extend(others.iter().map(|&j| Some(j)));
        }
        let mut out = Vec::new();
        for &route in &routes {
            for &pledge in &pledges {
                for &stage1 in &sends {
                    for &stage2 in &self.stage2 {
                        out.push(Strategy { stage0: Stage0 { route, pledge }, stage1, stage2 });
                    }
                }
            }
        }
        out
    }

    fn coalitions(&self, players: usize) -> Vec<Vec<usize>> {
        let mut cs: Vec<Vec<usize>> = (1u32..(1 << players))
            .map(|mask| (0..players).filter(|i| mask & (1 << i) != 0).collect())
            .filter(|c: &Vec<usize>| self.grand_coalition || c.len() < players)
            .collect();
        cs.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        cs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    /// Some player ends with a negative payoff.
    SMinus,
    /// Secrecy holds.
    Lemma1,
    /// Somebody informed.
    Lemma2,
    /// Secrecy broken without informing.
    Lemma3,
}

impl Bucket {
    pub fn of(o: &Outcome) -> Bucket {
        if o.u.iter().any(|&u| u < 0) {
            Bucket::SMinus
        } else if o.sec {
            Bucket::Lemma1
        } else if o.inf {
            Bucket::Lemma2
        } else {
            Bucket::Lemma3
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub deviations: u64,
    pub s_minus: u64,
    pub lemma1: u64,
    pub lemma2: u64,
    pub lemma3: u64,
    /// Deviations where some member is not better off.
    pub not_better_off: u64,
    /// Deviations where every member gains but one can re-deviate profitably.
    pub not_self_enforcing: u64,
}

impl BucketCounts {
    fn add(&mut self, b: Bucket) {
        self.deviations += 1;
        match b {
            Bucket::SMinus => self.s_minus += 1,
            Bucket::Lemma1 => self.lemma1 += 1,
            Bucket::Lemma2 => self.lemma2 += 1,
            Bucket::Lemma3 => self.lemma3 += 1,
        }
    }

    pub fn all_lemma_buckets_hit(&self) -> bool {
        self.lemma1 > 0 && self.lemma2 > 0 && self.lemma3 > 0
    }
}

/// A deviation where every member strictly gains and no member gains more by
/// re-deviating alone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub z_model: ZModel,
    /// 1-based player ids.
    pub coalition: Vec<usize>,
    pub strategies: Vec<String>,
    pub outcome: Outcome,
    pub default_payoffs: Vec<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub a: Vec<u64>,
    pub e: Vec<u64>,
    pub n: u64,
    pub t: u64,
    #[serde(rename = "P")]
    pub p: u64,
    pub ell: u64,
    pub decentralized: bool,
}

impl From<&Instance> for InstanceSummary {
    fn from(x: &Instance) -> Self {
        InstanceSummary {
            a: x.endowments.iter().map(|e| e.a).collect(),
            e: x.endowments.iter().map(|e| e.e).collect(),
            n: x.n(),
            t: x.t(),
            p: x.p(),
            ell: x.ell(),
            decentralized: decentralization_check(x),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertReport {
    /// States what the search covers; a finite family, not every bounded rule.
    pub family: String,
    pub instance: InstanceSummary,
    pub space: SearchSpace,
    pub checked: BucketCounts,
    pub counterexamples_total: u64,
    /// The first few counterexamples in search order.
    pub counterexamples: Vec<Counterexample>,
    pub chain_runs: usize,
    pub wallclock_ms: u128,
}

impl CertReport {
    pub fn certified(&self) -> bool {
        self.counterexamples_total == 0
    }
}

const KEPT_COUNTEREXAMPLES: usize = 20;

const FAMILY_NOTE: &str = "Certified over a finite family, not over all bounded side-contract rules. \
Stage 0 is a registration route (own EOA, or a side contract forwarding returned deposits to one other player) \
plus an optional pledge of all external coins to one other player or to a burn address, conditional on one \
outcome predicate. Stage 1 keeps the shares or sends copies of all of them to one other player. Stage 2 is \
inform-when-able, comply, withhold, inform or steal; inform and steal fall back to comply without t+1 shares. \
Self-enforcement is tested against unilateral re-deviations in the game restricted to the coalition.";

/// One joint deviation, handed to a visitor.
struct Visit<'a> {
    z: ZModel,
    coalition: &'a [usize],
    sv: &'a [Strategy],
    outcome: Outcome,
}

/// Enumerates every coalition, joint deviation and z model, in that nesting
/// order inside each model.
fn for_each_deviation<T: GroupInt>(
    game: &Game<T>,
    space: &SearchSpace,
    mut visit: impl FnMut(&Visit<'_>) -> Result<(), GameError>,
) -> Result<(), GameError> {
    let players = game.players();
    let per_player: Vec<Vec<Strategy>> = (0..players).map(|i| space.strategies(&game.instance, i)).collect();
    let coalitions = space.coalitions(players);
    let total: u128 = coalitions.iter().map(|c| c.iter().map(|&i| per_player[i].len() as u128).product::<u128>()).sum();
    if players > MAX_PLAYERS || total > u128::from(space.max_deviations) {
        return Err(GameError::SearchBudgetExceeded { players, deviations: total });
    }
    for &z in &space.z_models {
        for c in &coalitions {
            let mut idx = vec![0usize; c.len()];
            let mut sv = super::default_strategy(players);
            loop {
                for (k, &i) in c.iter().enumerate() {
                    sv[i] = per_player[i][idx[k]];
                }
                if c.iter().any(|&i| sv[i] != Strategy::DEFAULT) {
                    let outcome = game.evaluate(&sv, z)?;
                    visit(&Visit { z, coalition: c, sv: &sv, outcome })?;
                }
                // odometer
                let mut k = 0;
                while k < c.len() {
                    idx[k] += 1;
                    if idx[k] < per_player[c[k]].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == c.len() {
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Best unilateral re-deviation of `j` from `sv` within the scope, if it beats
/// `sv` for `j`.
fn profitable_redeviation<T: GroupInt>(
    game: &Game<T>,
    space: &SearchSpace,
    sv: &[Strategy],
    j: usize,
    z: ZModel,
) -> Result<Option<(Strategy, i64)>, GameError> {
    let current = game.payoffs(sv, z)?[j];
    let mut alt = sv.to_vec();
    let mut best: Option<(Strategy, i64)> = None;
    for s in space.strategies(&game.instance, j) {
        if s == sv[j] || (space.redeviation == RedeviationScope::Binding && s.stage0 != sv[j].stage0) {
            continue;
        }
        alt[j] = s;
        let u = game.payoffs(&alt, z)?[j];
        if u > current && best.is_none_or(|(_, b)| u > b) {
            best = Some((s, u));
        }
    }
    Ok(best)
}

fn redeviator<T: GroupInt>(
    game: &Game<T>,
    space: &SearchSpace,
    v: &Visit<'_>,
) -> Result<Option<(usize, Strategy, i64)>, GameError> {
    for &j in v.coalition {
        if let Some((s, u)) = profitable_redeviation(game, space, v.sv, j, v.z)? {
            return Ok(Some((j, s, u)));
        }
    }
    Ok(None)
}

fn default_payoffs<T: GroupInt>(game: &Game<T>, z: ZModel) -> Result<Vec<i64>, GameError> {
    Ok(game.evaluate(&super::default_strategy(game.players()), z)?.u)
}

/// Checks the sufficient condition for the default strategy being a
/// coalition-proof equilibrium: for every deviation some member is not better
/// off, or some member profits by re-deviating alone.
pub fn cpne_certify<T: GroupInt>(game: &Game<T>, space: &SearchSpace) -> Result<CertReport, GameError> {
    let started = Instant::now();
    let mut defaults = Vec::new();
    for &z in &space.z_models {
        defaults.push((z, default_payoffs(game, z)?));
    }
    let mut checked = BucketCounts::default();
    let mut total = 0u64;
    let mut kept = Vec::new();
    for_each_deviation(game, space, |v| {
        let star = &defaults.iter().find(|(z, _)| *z == v.z).expect("listed").1;
        checked.add(Bucket::of(&v.outcome));
        if v.coalition.iter().any(|&j| v.outcome.u[j] <= star[j]) {
            checked.not_better_off += 1;
        } else if redeviator(game, space, v)?.is_some() {
            checked.not_self_enforcing += 1;
        } else {
            total += 1;
            if kept.len() < KEPT_COUNTEREXAMPLES {
                kept.push(Counterexample {
                    z_model: v.z,
                    coalition: v.coalition.iter().map(|i| i + 1).collect(),
                    strategies: v.coalition.iter().map(|&i| format!("{}: {}", i + 1, v.sv[i])).collect(),
                    outcome: v.outcome.clone(),
                    default_payoffs: star.clone(),
                });
            }
        }
        Ok(())
    })?;
    Ok(CertReport {
        family: FAMILY_NOTE.to_string(),
        instance: InstanceSummary::from(&game.instance),
        space: space.clone(),
        checked,
        counterexamples_total: total,
        counterexamples: kept,
        chain_runs: game.chain_runs(),
        wallclock_ms: started.elapsed().as_millis(),
    })
}

/// One lemma's conclusion checked over the deviations its proof quantifies over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    /// Deviations in the family.
    pub family_size: u64,
    /// Deviations where the conclusion failed.
    pub failures: u64,
    /// Named sub-counts (proof cases).
    pub cases: Vec<(String, u64)>,
}

impl LemmaCheck {
    fn new(name: &str, cases: &[&str]) -> Self {
        LemmaCheck {
            name: name.to_string(),
            family_size: 0,
            failures: 0,
            cases: cases.iter().map(|c| (c.to_string(), 0)).collect(),
        }
    }

    fn bump(&mut self, case: &str) {
        self.cases.iter_mut().find(|(c, _)| c == case).expect("declared case").1 += 1;
    }

    pub fn holds(&self) -> bool {
        self.failures == 0 && self.family_size > 0
    }
}

/// Replays the three lemmas behind the main theorem over every deviation of the
/// discretized space, plus the integer form of the informant's advantage.
pub fn lemma_scenarios<T: GroupInt>(game: &Game<T>, space: &SearchSpace) -> Result<Vec<LemmaCheck>, GameError> {
    let inst = &game.instance;
    let (ell, p) = (inst.ell() as i64, inst.p() as i64);
    let t = inst.t() as usize;
    let mut defaults = Vec::new();
    for &z in &space.z_models {
        defaults.push((z, default_payoffs(game, z)?));
    }
    let mut l1 = LemmaCheck::new("lemma1_secrecy_preserving", &["robust", "not_robust"]);
    let mut l2 = LemmaCheck::new("lemma2_informing", &["informant_profits", "informant_in_coalition"]);
    let mut l3 = LemmaCheck::new(
        "lemma3_secrecy_breaking",
        &["informed", "case1_inform_pays", "case2_robust", "not_self_enforcing", "not_better_off"],
    );
    let mut adv = LemmaCheck::new("informant_advantage", &["holder_can_inform"]);

    for_each_deviation(game, space, |v| {
        let star = &defaults.iter().find(|(z, _)| *z == v.z).expect("listed").1;
        let o = &v.outcome;
        let bucket = Bucket::of(o);
        let someone_not_better = v.coalition.iter().any(|&i| star[i] >= o.u[i]);
        let holdings = game.holdings(v.sv);

        if let Some(f) = (0..holdings.len()).find(|&i| holdings[i] > t) {
            adv.family_size += 1;
            adv.bump("holder_can_inform");
            if decentralization_check(inst) && ell - inst.e(f) <= inst.a(f) + p {
                adv.failures += 1;
            }
        }
        match bucket {
            Bucket::SMinus => {}
            Bucket::Lemma1 => {
                l1.family_size += 1;
                l1.bump(if o.rob { "robust" } else { "not_robust" });
                if !someone_not_better {
                    l1.failures += 1;
                }
            }
            Bucket::Lemma2 => {
                l2.family_size += 1;
                let f = o.informant.expect("INF names the informant");
                if o.u[f] > star[f] {
                    l2.bump("informant_profits");
                } else if decentralization_check(inst) {
                    l2.failures += 1;
                }
                if v.coalition.contains(&f) {
                    l2.bump("informant_in_coalition");
                }
                if !someone_not_better {
                    l2.failures += 1;
                }
                l3.family_size += 1;
                l3.bump("informed");
                if !someone_not_better {
                    l3.failures += 1;
                }
            }
            Bucket::Lemma3 => {
                l3.family_size += 1;
                let f = (0..holdings.len()).find(|&i| holdings[i] > t).expect("secrecy broken");
                if o.u[f] <= inst.a(f) + p {
                    l3.bump("case1_inform_pays");
                } else if o.rob {
                    l3.bump("case2_robust");
                }
                if someone_not_better {
                    l3.bump("not_better_off");
                } else if redeviator(game, space, v)?.is_some() {
                    l3.bump("not_self_enforcing");
                } else {
                    l3.failures += 1;
                }
            }
        }
        Ok(())
    })?;
    Ok(vec![l1, l2, l3, adv])
}
