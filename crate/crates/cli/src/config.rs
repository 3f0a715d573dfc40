//! Scenario files: TOML, one scenario per file. See `scenarios/README.md` for the schema.

use std::path::Path;

use evr_core::dkg::Deviation;
use evr_core::game::{
    decentralization_check, Instance, Pledge, PledgeTarget, Predicate, Route, SearchSpace, Stage0, Stage2Action,
    Strategy, ZModel,
};
use evr_core::groupcrypto::GroupParams;
use evr_core::protocol::{Setup, Timeline};
use evr_core::scalar::GroupInt;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Tiny,
    Standard,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub group_profile: Profile,
    #[serde(default)]
    pub rng_seed: u64,
    pub endowments: Endowments,
    #[serde(default)]
    pub escrow: EscrowOverrides,
    #[serde(default)]
    pub schedule: Schedule,
    /// Per-player plans; players not listed follow the protocol.
    #[serde(default)]
    pub strategy: Vec<PlayerPlan>,
    /// How `z` is scored when reporting a run's payoffs.
    #[serde(default = "default_z")]
    pub z_model: ZModel,
    /// Search directive for `certify` and `lemmas`.
    #[serde(default)]
    pub search: SearchSpace,
    #[serde(default)]
    pub expect_counterexample: bool,
    /// Optional assertion on the decentralization bound.
    pub decentralized: Option<bool>,
    #[serde(default)]
    pub dkg_deviations: Vec<SlotDeviation>,
}

fn default_z() -> ZModel {
    ZModel::StealSplit
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endowments {
    /// `a_i`, coins deposited (one share slot per coin).
    pub deposits: Vec<u64>,
    /// `e_i`, coins kept outside the escrow. Defaults to zeros.
    #[serde(default)]
    pub external: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscrowOverrides {
    pub trigger_at: Option<u64>,
    pub t_com: Option<u64>,
    pub t_rev: Option<u64>,
    pub inform_at: Option<u64>,
    pub inform_delay: Option<u64>,
    pub inform_deposit: Option<u64>,
    pub atomic_inform: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    /// Round count; maturities default to 100, 200, ...
    pub rounds: Option<u32>,
    /// Maturity time of each round's condition.
    pub cnd: Option<Vec<u64>>,
    /// UTF-8 messages, one per round. Defaults to the round index encoding.
    pub messages: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerPlan {
    /// 1-based player id.
    pub player: usize,
    /// Register through a side contract forwarding returned deposits to this player.
    pub route_to: Option<usize>,
    pub pledge: Option<PledgeSpec>,
    /// Hand copies of all own shares to this player.
    pub send_to: Option<usize>,
    #[serde(default = "default_action")]
    pub action: Stage2Action,
}

fn default_action() -> Stage2Action {
    Stage2Action::InformWhenAble
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PledgeSpec {
    /// A 1-based player id or `"burn"`.
    pub to: PledgeTo,
    pub when: Predicate,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum PledgeTo {
    Player(usize),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct SlotDeviation {
    pub slot: u64,
    #[serde(flatten)]
    pub deviation: Deviation,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.check_shape()?;
        Ok(cfg)
    }

    pub fn players(&self) -> usize {
        self.endowments.deposits.len()
    }

    pub fn external(&self) -> Vec<u64> {
        if self.endowments.external.is_empty() {
            vec![0; self.players()]
        } else {
            self.endowments.external.clone()
        }
    }

    pub fn instance(&self) -> Instance {
        Instance::new(&self.endowments.deposits, &self.external())
    }

    /// Structural checks that no flag can override.
    fn check_shape(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let k = self.players();
        if k == 0 {
            return bad("endowments.deposits is empty".into());
        }
        if !self.endowments.external.is_empty() && self.endowments.external.len() != k {
            return bad(format!(
                "endowments.external has {} entries, deposits has {k}",
                self.endowments.external.len()
            ));
        }
        let mut seen = vec![false; k];
        for p in &self.strategy {
            let ids = [
                Some(p.player),
                p.route_to,
                p.send_to,
                p.pledge.as_ref().and_then(|s| match s.to {
                    PledgeTo::Player(j) => Some(j),
                    PledgeTo::Named(_) => None,
                }),
            ];
            if let Some(id) = ids.into_iter().flatten().find(|&id| id == 0 || id > k) {
                return bad(format!("player id {id} out of range 1..={k}"));
            }
            if let Some(PledgeSpec { to: PledgeTo::Named(s), .. }) = &p.pledge {
                if s != "burn" {
                    return bad(format!("pledge target {s:?}: expected a player id or \"burn\""));
                }
            }
            if std::mem::replace(&mut seen[p.player - 1], true) {
                return bad(format!("player {} has two strategy entries", p.player));
            }
        }
        match (&self.schedule.rounds, &self.schedule.cnd) {
            (Some(0), _) => return bad("schedule.rounds must be at least 1".into()),
            (Some(r), Some(c)) if *r as usize != c.len() => {
                return bad(format!("schedule.rounds = {r} but cnd lists {} maturities", c.len()))
            }
            (_, Some(c)) if c.is_empty() => return bad("schedule.cnd is empty".into()),
            _ => {}
        }
        if let Some(m) = &self.schedule.messages {
            if m.len() != self.cnd_at().len() {
                return bad(format!("{} messages for {} rounds", m.len(), self.cnd_at().len()));
            }
        }
        Ok(())
    }

    /// Safety checks that `--allow-unsafe` lifts: `n >= 3` and the decentralization bound.
    pub fn check_safe(&self) -> Result<(), CliError> {
        let inst = self.instance();
        if inst.n() < 3 {
            return Err(CliError::Config(format!("n = {} coins deposited, need at least 3", inst.n())));
        }
        let dec = decentralization_check(&inst);
        if let Some(claimed) = self.decentralized {
            if claimed != dec {
                return Err(CliError::Config(format!(
                    "config says decentralized = {claimed}, the endowments say {dec}"
                )));
            }
        }
        if !dec {
            return Err(CliError::Config(format!(
                "endowments violate a_i + e_i <= n/3 (n = {}); pass --allow-unsafe to run anyway",
                inst.n()
            )));
        }
        Ok(())
    }

    pub fn cnd_at(&self) -> Vec<u64> {
        match (&self.schedule.cnd, self.schedule.rounds) {
            (Some(c), _) => c.clone(),
            (None, Some(r)) => (1..=u64::from(r)).map(|i| 100 * i).collect(),
            (None, None) => Timeline::default().cnd_at,
        }
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let mut sv = vec![Strategy::DEFAULT; self.players()];
        for p in &self.strategy {
            let pledge = match &p.pledge {
                None => Pledge::None,
                Some(PledgeSpec { to, when }) => Pledge::All {
                    to: match to {
                        PledgeTo::Player(j) => PledgeTarget::Player(j - 1),
                        PledgeTo::Named(_) => PledgeTarget::Burn,
                    },
                    when: *when,
                },
            };
            let route = p.route_to.map_or(Route::Eoa, |j| Route::ViaContract { beneficiary: j - 1 });
            sv[p.player - 1] =
                Strategy { stage0: Stage0 { route, pledge }, stage1: p.send_to.map(|j| j - 1), stage2: p.action };
        }
        sv
    }

    pub fn setup<T: GroupInt>(&self, group: GroupParams<T>, seed: u64) -> Setup<T> {
        let mut s = Setup::new(group, self.endowments.deposits.clone());
        s.external = self.external();
        s.seed = seed;
        let e = &self.escrow;
        let tl = &mut s.timeline;
        tl.trigger_at = e.trigger_at.unwrap_or(tl.trigger_at);
        tl.t_com = e.t_com.unwrap_or(tl.t_com);
        tl.t_rev = e.t_rev.unwrap_or(tl.t_rev);
        tl.inform_at = e.inform_at.unwrap_or(tl.inform_at);
        tl.cnd_at = self.cnd_at();
        s.inform_delay = e.inform_delay.unwrap_or(s.inform_delay);
        s.inform_deposit = e.inform_deposit.unwrap_or(s.inform_deposit);
        s.atomic_inform = e.atomic_inform.unwrap_or(false);
        s.messages = self.schedule.messages.as_ref().map(|m| m.iter().map(|x| x.as_bytes().to_vec()).collect());
        s.misbehavior = self.dkg_deviations.iter().map(|d| (d.slot, d.deviation)).collect();
        s.redirect = self
            .strategies()
            .iter()
            .map(|st| match st.stage0.route {
                Route::ViaContract { beneficiary } => Some(beneficiary),
                Route::Eoa => None,
            })
            .collect();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "name = \"m\"\n[endowments]\ndeposits = [1, 1, 1]\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.group_profile, Profile::Tiny);
        assert_eq!(c.external(), vec![0, 0, 0]);
        assert_eq!(c.cnd_at(), vec![100]);
        assert_eq!(c.strategies(), vec![Strategy::DEFAULT; 3]);
        assert_eq!(c.search, SearchSpace::default());
        c.check_safe().unwrap();
    }

    #[test]
    fn plans_are_one_based_in_the_file() {
        let text = format!(
            "{MINIMAL}[[strategy]]\nplayer = 2\nsend_to = 1\nroute_to = 3\naction = \"withhold\"\npledge = {{ to = \"burn\", when = \"inf\" }}\n"
        );
        let sv = ScenarioConfig::parse(&text).unwrap().strategies();
        assert_eq!(sv[1].stage1, Some(0));
        assert_eq!(sv[1].stage0.route, Route::ViaContract { beneficiary: 2 });
        assert_eq!(sv[1].stage0.pledge, Pledge::All { to: PledgeTarget::Burn, when: Predicate::Inf });
        assert_eq!(sv[1].stage2, Stage2Action::Withhold);
    }

    #[test]
    fn rounds_expand_to_maturities() {
        let c = ScenarioConfig::parse(&format!("{MINIMAL}[schedule]\nrounds = 3\n")).unwrap();
        assert_eq!(c.cnd_at(), vec![100, 200, 300]);
        assert_eq!(c.setup(GroupParams::<u64>::tiny(), 0).timeline.cnd_at, vec![100, 200, 300]);
    }

    #[test]
    fn dkg_deviations_parse() {
        let text = format!("{MINIMAL}[[dkg_deviations]]\nslot = 2\nkind = \"corrupt_sub_share\"\nto = 3\n");
        let c = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(c.dkg_deviations[0].deviation, Deviation::CorruptSubShare { to: 3 });
    }

    #[test]
    fn malformed_configs_are_rejected() {
        for bad in [
            "name = 1",
            "name = \"x\"\n[endowments]\ndeposits = []\n",
            "name = \"x\"\nbogus = 1\n[endowments]\ndeposits = [1, 1, 1]\n",
            "name = \"x\"\n[endowments]\ndeposits = [1, 1, 1]\nexternal = [0]\n",
            "name = \"x\"\n[endowments]\ndeposits = [1, 1, 1]\n[[strategy]]\nplayer = 4\n",
            "name = \"x\"\n[endowments]\ndeposits = [1, 1, 1]\n[[strategy]]\nplayer = 1\n[[strategy]]\nplayer = 1\n",
            "name = \"x\"\n[endowments]\ndeposits = [1, 1, 1]\n[[strategy]]\nplayer = 1\npledge = { to = \"moon\", when = \"inf\" }\n",
            "name = \"x\"\n[endowments]\ndeposits = [1, 1, 1]\n[schedule]\nrounds = 2\ncnd = [100]\n",
            "name = \"x\"\n[endowments]\ndeposits = [1, 1, 1]\n[search]\nturbo = true\n",
        ] {
            assert!(matches!(ScenarioConfig::parse(bad), Err(CliError::Config(_))), "accepted: {bad}");
        }
    }

    #[test]
    fn unsafe_instances_need_the_flag() {
        let rich =
            ScenarioConfig::parse("name = \"r\"\n[endowments]\ndeposits = [1, 6, 2]\nexternal = [9, 0, 0]\n").unwrap();
        assert!(rich.check_safe().is_err());
        let small = ScenarioConfig::parse("name = \"s\"\n[endowments]\ndeposits = [1, 1]\n").unwrap();
        assert!(small.check_safe().is_err());
        let lying = format!("decentralized = false\n{MINIMAL}");
        assert!(ScenarioConfig::parse(&lying).unwrap().check_safe().is_err());
    }
}
