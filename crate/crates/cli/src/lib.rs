//! Scenario runner behind the `evr` binary. Every command returns a JSON
//! document plus a pass flag; `main` maps that onto the exit code.

pub mod config;

use std::collections::BTreeSet;
use std::path::PathBuf;

use evr_core::dkg::{dkg_commit_run, dkg_reveal_run, DkgConfig, RevealError};
use evr_core::escrow::{round_message, EscrowPhase};
use evr_core::game::{cpne_certify, lemma_scenarios, stage_plan, Game, GameError};
use evr_core::groupcrypto::{shamir_share, vrf_eval, vrf_keygen, vrf_verify, GroupParams, KnownAnswerVector};
use evr_core::multishot::{extract_randomness, produce_round, RoundSchedule};
use evr_core::protocol::{Protocol, ProtocolError};
use evr_core::scalar::GroupInt;
use evr_core::{SmallGroup, StandardGroup};
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{Profile, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("search budget exceeded: {players} players, {deviations} joint deviations")]
    SearchBudgetExceeded { players: usize, deviations: u128 },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Game(GameError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::SearchBudgetExceeded { players, deviations } => {
                CliError::SearchBudgetExceeded { players, deviations }
            }
            other => CliError::Game(other),
        }
    }
}

impl CliError {
    /// 1 is reserved for a completed command whose checks failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::InvariantViolation(_) => 1,
            CliError::SearchBudgetExceeded { .. } => 3,
            CliError::Protocol(_) | CliError::Game(_) | CliError::Io(_) => 4,
        }
    }
}

/// A finished command: the document to write and whether its checks passed.
#[derive(Debug)]
pub struct Report {
    pub body: Value,
    pub ok: bool,
    /// Human-readable one-liner for stderr.
    pub summary: String,
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub allow_unsafe: bool,
    pub profile: Option<Profile>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Run,
    Certify,
    Lemmas,
    Vectors,
    DkgDemo,
    VrfDemo,
}

struct Resolved {
    cfg: ScenarioConfig,
    seed: u64,
    profile: Profile,
}

fn resolve(opts: &Options, required: bool) -> Result<Resolved, CliError> {
    let cfg = match &opts.config {
        Some(path) => ScenarioConfig::load(path)?,
        None if required => return Err(CliError::Config("this command needs --config".into())),
        None => ScenarioConfig::parse("name = \"default\"\n[endowments]\ndeposits = [1, 1, 1, 1, 1, 1]\n")?,
    };
    if !opts.allow_unsafe {
        cfg.check_safe()?;
    }
    let seed = opts.seed.unwrap_or(cfg.rng_seed);
    let profile = opts.profile.unwrap_or(cfg.group_profile);
    Ok(Resolved { cfg, seed, profile })
}

fn standard() -> Result<StandardGroup, CliError> {
    StandardGroup::standard().ok_or_else(|| CliError::Config("standard group parameters failed validation".into()))
}

/// Dispatches on the group profile.
macro_rules! with_group {
    ($profile:expr, |$g:ident| $body:expr) => {
        match $profile {
            Profile::Tiny => {
                let $g = SmallGroup::tiny();
                $body
            }
            Profile::Standard => {
                let $g = standard()?;
                $body
            }
        }
    };
}

pub fn execute(cmd: Command, opts: &Options) -> Result<Report, CliError> {
    match cmd {
        Command::Run => {
            let r = resolve(opts, true)?;
            with_group!(r.profile, |g| cmd_run(&r, g))
        }
        Command::Certify | Command::Lemmas => {
            let r = resolve(opts, true)?;
            with_group!(r.profile, |g| if cmd == Command::Certify { cmd_certify(&r, g) } else { cmd_lemmas(&r, g) })
        }
        Command::Vectors => {
            let r = resolve(opts, false)?;
            with_group!(r.profile, |g| cmd_vectors(&r, g))
        }
        Command::DkgDemo => {
            let r = resolve(opts, false)?;
            with_group!(r.profile, |g| cmd_dkg_demo(&r, g))
        }
        Command::VrfDemo => {
            let r = resolve(opts, false)?;
            with_group!(r.profile, |g| cmd_vrf_demo(&r, g))
        }
    }
}

fn header(r: &Resolved, command: &str) -> Value {
    json!({
        "command": command,
        "name": r.cfg.name,
        "profile": match r.profile { Profile::Tiny => "tiny", Profile::Standard => "standard" },
        "seed": r.seed,
    })
}

fn to_json<S: serde::Serialize>(x: &S) -> Value {
    serde_json::to_value(x).expect("core types serialize")
}

fn cmd_run<T: GroupInt>(r: &Resolved, group: GroupParams<T>) -> Result<Report, CliError> {
    let sv = r.cfg.strategies();
    let mut run = Protocol::start(r.cfg.setup(group.clone(), r.seed))?;
    let committed = run.phase() == EscrowPhase::Pending(1);
    if committed {
        stage_plan(&run, &sv).execute(&mut run)?;
    }
    // let every remaining deadline pass so nothing is left pending
    let horizon = r.cfg.cnd_at().into_iter().max().unwrap_or(0) + run.setup.timeline.t_rev + run.setup.inform_delay + 1;
    run.advance_to(horizon);

    let violations = run.check_invariants();
    let view = run.view();
    let rounds: Vec<Value> = view
        .rounds
        .iter()
        .map(|rd| {
            let mut v = to_json(rd);
            v["random_bits"] = json!(extract_randomness(&group, &rd.sigma));
            v
        })
        .collect();
    let mut body = header(r, "run");
    body["phase"] = json!(run.phase().to_string());
    body["invariant_violations"] = json!(violations);
    body["rounds"] = json!(rounds);
    body["payouts_by_player"] = json!(run.payouts_by_player());
    body["player_balances"] = json!(run.player_balances().into_values().collect::<Vec<_>>());
    body["strategies"] = json!(sv.iter().map(ToString::to_string).collect::<Vec<_>>());
    if committed {
        // payoffs under the game model, scored on a fresh run with the same seed
        let game = Game::new(r.cfg.instance(), group, r.seed)?;
        body["outcome"] = to_json(&game.evaluate(&sv, r.cfg.z_model)?);
    }
    body["trace"] = Value::Array(
        run.trace_lines().iter().map(|l| serde_json::from_str(l).expect("trace lines are JSON")).collect(),
    );
    let mut summary = format!("run {}: phase {}", r.cfg.name, run.phase());
    if !violations.is_empty() {
        summary = format!("{summary}; {}", CliError::InvariantViolation(violations.join("; ")));
    }
    Ok(Report { summary, body, ok: violations.is_empty() })
}

fn cmd_certify<T: GroupInt>(r: &Resolved, group: GroupParams<T>) -> Result<Report, CliError> {
    let game = Game::new(r.cfg.instance(), group, r.seed)?;
    let report = cpne_certify(&game, &r.cfg.search)?;
    let mut body = header(r, "certify");
    let mut rep = to_json(&report);
    // wall-clock time would make identical runs differ
    rep.as_object_mut().expect("object").remove("wallclock_ms");
    body["report"] = rep;
    body["expect_counterexample"] = json!(r.cfg.expect_counterexample);
    let found = report.counterexamples_total;
    let ok = if r.cfg.expect_counterexample { found > 0 } else { found == 0 };
    let summary = format!(
        "certify {}: {} deviations, {found} counterexamples ({} ms)",
        r.cfg.name, report.checked.deviations, report.wallclock_ms
    );
    Ok(Report { body, ok, summary })
}

fn cmd_lemmas<T: GroupInt>(r: &Resolved, group: GroupParams<T>) -> Result<Report, CliError> {
    let game = Game::new(r.cfg.instance(), group, r.seed)?;
    let checks = lemma_scenarios(&game, &r.cfg.search)?;
    let ok = checks.iter().all(|c| c.holds());
    let mut body = header(r, "lemmas");
    body["checks"] = to_json(&checks);
    let failing: Vec<&str> = checks.iter().filter(|c| !c.holds()).map(|c| c.name.as_str()).collect();
    Ok(Report { body, ok, summary: format!("lemmas {}: {} checks, failing {failing:?}", r.cfg.name, checks.len()) })
}

fn cmd_vectors<T: GroupInt>(r: &Resolved, group: GroupParams<T>) -> Result<Report, CliError> {
    let n = r.cfg.instance().n() as usize;
    let t = 2 * n / 3;
    let messages: Vec<Vec<u8>> = (1..=r.cfg.cnd_at().len() as u32).map(round_message).collect();
    let kav = KnownAnswerVector::generate(&group, t, n, r.seed, &messages).map_err(ProtocolError::from)?;
    let text = serde_json::to_string(&kav).expect("serializes");
    let back: KnownAnswerVector<T> =
        serde_json::from_str(&text).map_err(|e| CliError::InvariantViolation(format!("round trip: {e}")))?;
    let mut failures = back.check();
    if back != kav {
        failures.push("round trip changed the vector".into());
    }
    let mut body = header(r, "vectors");
    body["vector"] = to_json(&kav);
    body["check_failures"] = json!(failures);
    let summary = format!("vectors: n={n} t={t}, {} VRF outputs, {} failures", messages.len(), failures.len());
    Ok(Report { body, ok: failures.is_empty(), summary })
}

fn cmd_dkg_demo<T: GroupInt>(r: &Resolved, group: GroupParams<T>) -> Result<Report, CliError> {
    let n = r.cfg.instance().n();
    let t = 2 * n / 3;
    let mut cfg = DkgConfig::honest(group.clone(), n, t);
    cfg.misbehavior = r.cfg.dkg_deviations.iter().map(|d| (d.slot, d.deviation)).collect();
    let transcript = dkg_commit_run(&cfg, r.seed).map_err(ProtocolError::from)?;
    let everyone: BTreeSet<u64> = (1..=n).collect();
    let reveal = dkg_reveal_run(&transcript, &everyone, t);
    // a clean commit must reconstruct x with g^x = X; a dirty one must refuse to reveal
    let (ok, outcome) = match &reveal {
        Ok(x) => (transcript.is_clean() && group.exp_g(x) == transcript.public_key, json!({ "x": x })),
        Err(RevealError::FailedCommit) => (!transcript.is_clean(), json!({ "error": "failed_commit" })),
        Err(e) => (false, json!({ "error": e.to_string() })),
    };
    let mut body = header(r, "dkg-demo");
    body["n"] = json!(n);
    body["t"] = json!(t);
    body["X"] = to_json(&transcript.public_key);
    body["complaints"] = json!(transcript.complaints);
    body["accused"] = json!(transcript.accused());
    body["fragments"] = json!(transcript.fragments().into_iter().map(|(_, v)| v).collect::<Vec<_>>());
    body["reveal"] = outcome;
    let summary = format!("dkg-demo: n={n} t={t}, {} complaints", transcript.complaints.len());
    Ok(Report { body, ok, summary })
}

fn cmd_vrf_demo<T: GroupInt>(r: &Resolved, group: GroupParams<T>) -> Result<Report, CliError> {
    let n = r.cfg.instance().n() as usize;
    let t = 2 * n / 3;
    let (sk, pk) = vrf_keygen(&group, r.seed);
    let (shares, _) = shamir_share(&group, &sk, t, n, r.seed.wrapping_add(1)).map_err(ProtocolError::from)?;
    let share_keys = shares.iter().map(|s| (s.index, group.exp_g(&s.value))).collect();
    let cnd = r.cfg.cnd_at();
    let mut schedule = RoundSchedule::at_times(&cnd);
    if let Some(m) = &r.cfg.schedule.messages {
        schedule.messages = m.iter().map(|s| s.as_bytes().to_vec()).collect();
    }
    let mut ok = true;
    let mut rounds = Vec::new();
    for i in 1..=schedule.k() {
        let m = schedule.message(i);
        let (sigma, proof) = vrf_eval(&group, &sk, m);
        let verified = vrf_verify(&group, &pk, m, &sigma, &proof);
        // the first t + 1 slots evaluate jointly; the result must match the direct one
        let joint = produce_round(&group, &shares[..=t], &share_keys, t, i, &schedule, &pk)
            .map_err(|e| CliError::InvariantViolation(e.to_string()))?;
        let matches = joint.sigma == sigma;
        ok &= verified && matches;
        rounds.push(json!({
            "round": i,
            "sigma": to_json(&sigma),
            "proof": to_json(&proof),
            "verified": verified,
            "threshold_matches": matches,
            "random_bits": joint.random_bits,
        }));
    }
    let mut body = header(r, "vrf-demo");
    body["PK"] = to_json(&pk);
    body["t"] = json!(t);
    body["n"] = json!(n);
    body["rounds"] = json!(rounds);
    Ok(Report { body, ok, summary: format!("vrf-demo: {} rounds, all verified: {ok}", schedule.k()) })
}
