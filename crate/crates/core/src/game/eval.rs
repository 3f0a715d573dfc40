use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use super::{check_bounds, GameError, Instance, Outcome, Pledge, PledgeTarget, Route, Stage2Action, Strategy, ZModel};
use crate::escrow::{EscrowPhase, Settlement};
use crate::groupcrypto::GroupParams;
use crate::protocol::{informant_account, Protocol, Setup};
use crate::scalar::GroupInt;

/// What stages 1 and 2 produce on the chain, before side contracts and `z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageResult {
    pub sec: bool,
    pub inf: bool,
    pub rob: bool,
    pub informant: Option<usize>,
    /// Shares held by each player after stage 1.
    pub holdings: Vec<usize>,
    pub stealers: Vec<usize>,
    pub withholders: Vec<usize>,
    /// Escrow payouts per player (deposit returns or the informant reward),
    /// inform deposit refunds excluded.
    pub escrow_payouts: Vec<u64>,
}

/// The chain actions a strategy vector implies once the commit phase is done.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagePlan {
    /// Slots each player holds after stage 1.
    pub slots: Vec<BTreeSet<u64>>,
    pub informants: Vec<(usize, BTreeSet<u64>)>,
    pub compliers: Vec<(usize, BTreeSet<u64>)>,
    pub stealers: Vec<usize>,
    pub withholders: Vec<usize>,
    pub t: usize,
}

/// Resolves stages 1 and 2 against a started run. `Inform` and `Steal` without
/// `t + 1` shares fall back to complying.
pub fn stage_plan<T: GroupInt>(run: &Protocol<T>, sv: &[Strategy]) -> StagePlan {
    let t = run.params().map_or(0, |p| p.t as usize);
    let mut slots: Vec<BTreeSet<u64>> = (0..sv.len()).map(|i| run.slots_of(i)).collect();
    for (i, s) in sv.iter().enumerate() {
        if let Some(j) = s.stage1 {
            let own = run.slots_of(i);
            slots[j].extend(own);
        }
    }
    let able = |i: usize| slots[i].len() > t;
    let mut plan = StagePlan {
        slots: Vec::new(),
        informants: Vec::new(),
        compliers: Vec::new(),
        stealers: Vec::new(),
        withholders: Vec::new(),
        t,
    };
    for (i, s) in sv.iter().enumerate() {
        match s.stage2 {
            Stage2Action::Withhold => plan.withholders.push(i),
            Stage2Action::Inform | Stage2Action::InformWhenAble if able(i) => {
                plan.informants.push((i, slots[i].clone()))
            }
            Stage2Action::Steal if able(i) => {
                plan.stealers.push(i);
                plan.compliers.push((i, slots[i].clone()));
            }
            _ => plan.compliers.push((i, slots[i].clone())),
        }
    }
    plan.slots = slots;
    plan
}

impl StagePlan {
    /// Informs, then reveals every remaining round.
    pub fn execute<T: GroupInt>(&self, run: &mut Protocol<T>) -> Result<(), GameError> {
        run.inform(&self.informants)?;
        run.reveal_all(&self.compliers)?;
        Ok(())
    }

    pub fn result<T: GroupInt>(&self, run: &Protocol<T>) -> StageResult {
        let players = self.slots.len();
        let informant = match run.contract().settlement() {
            Some(Settlement::Informed { informant }) => (0..players).find(|&i| informant_account(i) == *informant),
            _ => None,
        };
        StageResult {
            sec: self.slots.iter().all(|s| s.len() <= self.t),
            inf: informant.is_some(),
            rob: run.phase() == EscrowPhase::Final,
            informant,
            holdings: self.slots.iter().map(BTreeSet::len).collect(),
            stealers: self.stealers.clone(),
            withholders: self.withholders.clone(),
            escrow_payouts: run.payouts_by_player(),
        }
    }
}

/// An instance ready to be played. The registration and commit phases are the
/// same for every strategy vector (stage 0 only changes who receives returned
/// deposits), so they run once; each distinct stage-1/stage-2 profile replays a
/// clone of that run and is cached.
pub struct Game<T: GroupInt> {
    pub instance: Instance,
    template: Protocol<T>,
    t: usize,
    cache: RefCell<HashMap<u64, Rc<StageResult>>>,
}

impl<T: GroupInt> Game<T> {
    pub fn new(instance: Instance, group: GroupParams<T>, seed: u64) -> Result<Self, GameError> {
        if instance.n() < crate::escrow::MIN_PLAYERS {
            return Err(GameError::Instance(format!("n = {} deposits, need at least 3", instance.n())));
        }
        let a = instance.endowments.iter().map(|x| x.a).collect();
        let mut setup = Setup::new(group, a);
        setup.external = instance.endowments.iter().map(|x| x.e).collect();
        setup.seed = seed;
        let template = Protocol::start(setup)?;
        if template.phase() != EscrowPhase::Pending(1) {
            return Err(GameError::Instance(format!("commit phase ended in {}", template.phase())));
        }
        let t = instance.t() as usize;
        Ok(Game { instance, template, t, cache: RefCell::new(HashMap::new()) })
    }

    pub fn players(&self) -> usize {
        self.instance.players()
    }

    /// Distinct stage-1/stage-2 profiles played on the chain so far.
    pub fn chain_runs(&self) -> usize {
        self.cache.borrow().len()
    }

    /// Share counts after stage 1.
    pub fn holdings(&self, sv: &[Strategy]) -> Vec<usize> {
        let mut h: Vec<usize> = self.instance.endowments.iter().map(|x| x.a as usize).collect();
        for (i, s) in sv.iter().enumerate() {
            if let Some(j) = s.stage1 {
                h[j] += self.instance.endowments[i].a as usize;
            }
        }
        h
    }

    fn key(&self, sv: &[Strategy]) -> u64 {
        let base = (self.players() as u64 + 1) * Stage2Action::ALL.len() as u64;
        sv.iter().rev().fold(0, |acc, s| {
            let s1 = s.stage1.map_or(0, |j| j as u64 + 1);
            acc * base + s1 * Stage2Action::ALL.len() as u64 + s.stage2.index() as u64
        })
    }

    /// Plays stages 1 and 2 through the escrow (cached).
    pub fn stage_result(&self, sv: &[Strategy]) -> Result<Rc<StageResult>, GameError> {
        let key = self.key(sv);
        if let Some(r) = self.cache.borrow().get(&key) {
            return Ok(r.clone());
        }
        let r = Rc::new(self.run_stages(sv)?);
        self.cache.borrow_mut().insert(key, r.clone());
        Ok(r)
    }

    fn run_stages(&self, sv: &[Strategy]) -> Result<StageResult, GameError> {
        let plan = stage_plan(&self.template, sv);
        let mut run = self.template.clone();
        plan.execute(&mut run)?;
        Ok(plan.result(&run))
    }

    /// Plays a strategy vector. `Inform` and `Steal` by a player who ends stage 1
    /// without `t + 1` shares are rejected.
    pub fn play(&self, sv: &[Strategy], z: ZModel) -> Result<Outcome, GameError> {
        self.validate(sv)?;
        let h = self.holdings(sv);
        if let Some(i) = (0..sv.len()).find(|&i| sv[i].stage2.needs_threshold() && h[i] <= self.t) {
            return Err(GameError::InvalidStrategy {
                player: i,
                reason: format!("{:?} needs {} shares, holds {}", sv[i].stage2, self.t + 1, h[i]),
            });
        }
        self.evaluate(sv, z)
    }

    /// Plays a strategy vector with stage-2 actions read as plans: `Inform` and
    /// `Steal` degrade to `Comply` for a player short of `t + 1` shares.
    pub fn evaluate(&self, sv: &[Strategy], z: ZModel) -> Result<Outcome, GameError> {
        self.validate(sv)?;
        let o = self.outcome(sv, z)?;
        let bad = check_bounds(&o, &self.instance);
        if !bad.is_empty() {
            return Err(GameError::BoundViolation(bad));
        }
        Ok(o)
    }

    /// Payoff vector only; the search's hot path.
    pub(super) fn payoffs(&self, sv: &[Strategy], z: ZModel) -> Result<Vec<i64>, GameError> {
        Ok(self.outcome(sv, z)?.u)
    }

    fn outcome(&self, sv: &[Strategy], z_model: ZModel) -> Result<Outcome, GameError> {
        let r = self.stage_result(sv)?;
        let players = self.players();
        let z = z_model.z(&r, self.instance.p());

        let mut y = vec![0i64; players];
        for (i, s) in sv.iter().enumerate() {
            let e = self.instance.e(i);
            if let Pledge::All { to, when } = s.stage0.pledge {
                if e > 0 && when.holds(r.sec, r.rob, r.inf) {
                    y[i] -= e;
                    if let PledgeTarget::Player(j) = to {
                        y[j] += e;
                    }
                }
            }
        }

        let mut w = vec![0i64; players];
        if r.inf {
            for (i, &p) in r.escrow_payouts.iter().enumerate() {
                w[i] = p as i64;
            }
        } else if r.rob {
            for (i, s) in sv.iter().enumerate() {
                let to = match s.stage0.route {
                    Route::Eoa => i,
                    Route::ViaContract { beneficiary } => beneficiary,
                };
                w[to] += self.instance.a(i);
            }
        }

        let u = (0..players).map(|i| z[i] + y[i] + w[i]).collect();
        Ok(Outcome {
            inf: r.inf,
            sec: r.sec,
            rob: r.rob,
            informant: r.informant,
            z,
            y,
            w,
            u,
            engaged: sv.iter().map(|s| s.stage0.engages()).collect(),
        })
    }

    fn validate(&self, sv: &[Strategy]) -> Result<(), GameError> {
        let players = self.players();
        if sv.len() != players {
            return Err(GameError::InvalidStrategy {
                player: sv.len().min(players),
                reason: format!("{} strategies for {players} players", sv.len()),
            });
        }
        let invalid =
            |player: usize, reason: &str| Err(GameError::InvalidStrategy { player, reason: reason.to_string() });
        for (i, s) in sv.iter().enumerate() {
            let other = |j: usize| j < players && j != i;
            if let Route::ViaContract { beneficiary } = s.stage0.route {
                if !other(beneficiary) {
                    return invalid(i, "side contract must forward to another player");
                }
            }
            if let Pledge::All { to: PledgeTarget::Player(j), .. } = s.stage0.pledge {
                if !other(j) {
                    return invalid(i, "pledge recipient must be another player");
                }
            }
            if let Some(j) = s.stage1 {
                if !other(j) {
                    return invalid(i, "shares can only be sent to another player");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{default_strategy, PledgeTarget, Predicate, Stage0};
    use super::*;

    fn game(a: &[u64], e: &[u64]) -> Game<u64> {
        Game::new(Instance::new(a, e), GroupParams::<u64>::tiny(), 5).unwrap()
    }

    #[test]
    fn default_play_repays_deposits() {
        let g = game(&[1, 1, 1], &[0, 0, 0]);
        let o = g.play(&default_strategy(3), ZModel::StealSplit).unwrap();
        assert!(o.sec && o.rob && !o.inf);
        assert_eq!(o.u, vec![1, 1, 1]);
    }

    #[test]
    fn pooling_below_threshold_keeps_secrecy() {
        let g = game(&[2, 2, 2], &[0, 0, 0]);
        let mut sv = default_strategy(3);
        sv[1].stage1 = Some(0);
        let o = g.play(&sv, ZModel::ZeroZ).unwrap();
        assert!(o.sec && o.rob);
        assert_eq!(g.holdings(&sv), vec![4, 2, 2]);
    }

    #[test]
    fn full_pooling_lets_the_holder_inform() {
        let g = game(&[2, 2, 2], &[0, 0, 0]);
        let mut sv = default_strategy(3);
        sv[1].stage1 = Some(0);
        sv[2].stage1 = Some(0);
        sv[0].stage2 = Stage2Action::Inform;
        let o = g.play(&sv, ZModel::ZeroZ).unwrap();
        assert!(o.inf && !o.sec && !o.rob);
        assert_eq!(o.informant, Some(0));
        assert_eq!(o.u, vec![6, 0, 0]);
    }

    #[test]
    fn withholding_coalition_confiscates_everything() {
        let g = game(&[2, 2, 2], &[0, 0, 0]);
        let mut sv = default_strategy(3);
        sv[0].stage2 = Stage2Action::Withhold;
        sv[1].stage2 = Stage2Action::Withhold;
        let o = g.play(&sv, ZModel::FallbackSplit).unwrap();
        assert!(!o.rob && !o.inf && o.sec);
        assert_eq!(o.w, vec![0, 0, 0]);
        // P - 1 = 1 goes to the lower-id withholder
        assert_eq!(o.u, vec![1, 0, 0]);
    }

    #[test]
    fn steal_without_threshold_is_invalid_in_play_but_a_plan_in_evaluate() {
        let g = game(&[1, 1, 1], &[0, 0, 0]);
        let mut sv = default_strategy(3);
        sv[0].stage2 = Stage2Action::Steal;
        assert!(matches!(g.play(&sv, ZModel::ZeroZ), Err(GameError::InvalidStrategy { player: 0, .. })));
        assert_eq!(g.evaluate(&sv, ZModel::ZeroZ).unwrap().u, vec![1, 1, 1]);
    }

    #[test]
    fn pledges_and_routes_move_coins() {
        let g = game(&[1, 1, 1], &[0, 2, 0]);
        let mut sv = default_strategy(3);
        sv[0].stage0 = Stage0 { route: Route::ViaContract { beneficiary: 2 }, pledge: Pledge::None };
        sv[1].stage0.pledge = Pledge::All { to: PledgeTarget::Player(0), when: Predicate::Rob };
        let o = g.play(&sv, ZModel::ZeroZ).unwrap();
        assert_eq!(o.w, vec![0, 1, 2]);
        assert_eq!(o.y, vec![2, -2, 0]);
        assert_eq!(o.u, vec![2, -1, 2]);
    }

    #[test]
    fn outcomes_do_not_depend_on_the_secret() {
        let a = Game::new(Instance::new(&[2, 2, 2], &[1, 0, 0]), GroupParams::<u64>::tiny(), 1).unwrap();
        let b = Game::new(Instance::new(&[2, 2, 2], &[1, 0, 0]), GroupParams::<u64>::tiny(), 99).unwrap();
        assert_ne!(
            a.template.transcript.as_ref().unwrap().public_key,
            b.template.transcript.as_ref().unwrap().public_key
        );
        let mut sv = default_strategy(3);
        sv[1].stage1 = Some(0);
        sv[2].stage1 = Some(0);
        sv[0].stage2 = Stage2Action::Steal;
        for z in ZModel::ALL {
            assert_eq!(a.play(&sv, z).unwrap(), b.play(&sv, z).unwrap());
        }
    }

    #[test]
    fn bad_indices_are_rejected() {
        let g = game(&[1, 1, 1], &[0, 0, 0]);
        let mut sv = default_strategy(3);
        sv[1].stage1 = Some(1);
        assert!(matches!(g.play(&sv, ZModel::ZeroZ), Err(GameError::InvalidStrategy { player: 1, .. })));
        assert!(g.play(&default_strategy(2), ZModel::ZeroZ).is_err());
    }
}
