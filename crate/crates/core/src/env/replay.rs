//! Offline replay over logged cascades.
//!
//! A log maps `(influencer, context_id)` to the activation sets observed
//! when that influencer posted under that context. Each round the replay
//! picks a logged context uniformly, and each chosen influencer contributes
//! one activation set sampled with replacement from its matching records
//! (nothing if there are none).
//!
//! On disk a log is two JSONL files:
//!
//! ```text
//! {"influencer": 17, "context_id": 3, "activations": [4, 9, 12]}
//! {"context_id": 3, "vector": [0.1, 0.0, 0.7]}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticWorld;
use super::{rank_by_score, Context, ContextDraw, Environment, SimRng};
use crate::error::{Error, Result};
use crate::ledger::{ActivationLedger, ArmId, Feedback, NodeId};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayLog {
    pub contexts: BTreeMap<u32, Context>,
    pub records: BTreeMap<(u64, u32), Vec<Vec<NodeId>>>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    influencer: u64,
    context_id: u32,
    activations: Vec<NodeId>,
}

#[derive(Serialize, Deserialize)]
struct ContextLine {
    context_id: u32,
    vector: Vec<f64>,
}

impl ReplayLog {
    pub fn push_record(&mut self, influencer: u64, context_id: u32, mut activations: Vec<NodeId>) {
        activations.sort_unstable();
        activations.dedup();
        self.records
            .entry((influencer, context_id))
            .or_default()
            .push(activations);
    }

    /// Every record key must reference a known context of a consistent dimension.
    pub fn validate(&self) -> Result<()> {
        let mut dims = self.contexts.values().map(Context::dim);
        if let Some(d) = dims.next() {
            if d == 0 || dims.any(|x| x != d) {
                return Err(Error::config("context vectors must share one positive dimension"));
            }
        }
        for &(_, cid) in self.records.keys() {
            if !self.contexts.contains_key(&cid) {
                return Err(Error::UnknownContext(cid));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.contexts.values().next().map_or(0, Context::dim)
    }

    /// Distinct influencer ids ordered by total logged activations, most first.
    pub fn influencers_by_volume(&self) -> Vec<u64> {
        let mut volume: BTreeMap<u64, usize> = BTreeMap::new();
        for (&(inf, _), sets) in &self.records {
            *volume.entry(inf).or_insert(0) += sets.iter().map(Vec::len).sum::<usize>();
        }
        let mut ids: Vec<(u64, usize)> = volume.into_iter().collect();
        ids.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ids.into_iter().map(|(id, _)| id).collect()
    }

    pub fn node_universe(&self) -> BTreeSet<NodeId> {
        self.records.values().flatten().flatten().copied().collect()
    }

    pub fn write_jsonl(&self, records_path: &Path, contexts_path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(records_path)?);
        for (&(influencer, context_id), sets) in &self.records {
            for set in sets {
                let line = RecordLine {
                    influencer,
                    context_id,
                    activations: set.clone(),
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;

        let mut out = BufWriter::new(File::create(contexts_path)?);
        for (&context_id, ctx) in &self.contexts {
            let line = ContextLine {
                context_id,
                vector: ctx.vector.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl(records_path: &Path, contexts_path: &Path) -> Result<Self> {
        let mut log = ReplayLog::default();
        for (line_no, line) in read_lines(contexts_path)? {
            let c: ContextLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: contexts_path.to_path_buf(),
                line: line_no,
                msg: e.to_string(),
            })?;
            log.contexts.insert(
                c.context_id,
                Context {
                    vector: c.vector,
                    context_id: Some(c.context_id),
                },
            );
        }
        for (line_no, line) in read_lines(records_path)? {
            let r: RecordLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: records_path.to_path_buf(),
                line: line_no,
                msg: e.to_string(),
            })?;
            log.records
                .entry((r.influencer, r.context_id))
                .or_default()
                .push(r.activations);
        }
        log.validate()?;
        Ok(log)
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    Ok(lines)
}

/// Replay environment over a [`ReplayLog`] for a fixed set of arms.
#[derive(Debug, Clone)]
pub struct ReplayEnv {
    log: ReplayLog,
    arms: Vec<u64>,
    context_ids: Vec<u32>,
    universe: usize,
}

impl ReplayEnv {
    /// Use the `k` influencers with the largest logged volume as arms.
    pub fn new(log: ReplayLog, k: usize) -> Result<Self> {
        log.validate()?;
        if log.contexts.is_empty() {
            return Err(Error::config("replay log has no contexts"));
        }
        let mut arms = log.influencers_by_volume();
        if arms.len() < k {
            return Err(Error::config(format!(
                "replay log has {} influencers, {k} requested",
                arms.len()
            )));
        }
        arms.truncate(k);
        let context_ids = log.contexts.keys().copied().collect();
        let universe = log.node_universe().len();
        Ok(Self {
            log,
            arms,
            context_ids,
            universe,
        })
    }

    pub fn arms(&self) -> &[u64] {
        &self.arms
    }

    pub fn log(&self) -> &ReplayLog {
        &self.log
    }

    fn sample_record(&self, arm: ArmId, context_id: u32, rng: &mut SimRng) -> &[NodeId] {
        match self.log.records.get(&(self.arms[arm], context_id)) {
            Some(sets) if !sets.is_empty() => &sets[rng.random_range(0..sets.len())],
            _ => &[],
        }
    }

    fn context_id(&self, draw: &ContextDraw) -> Result<u32> {
        let id = draw
            .context
            .context_id
            .ok_or_else(|| Error::config("replay context carries no id"))?;
        if !self.log.contexts.contains_key(&id) {
            return Err(Error::UnknownContext(id));
        }
        Ok(id)
    }
}

impl Environment for ReplayEnv {
    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn dim(&self) -> usize {
        self.log.dim()
    }

    fn universe_size(&self) -> usize {
        self.universe
    }

    fn draw_context(&self, rng: &mut SimRng) -> ContextDraw {
        let id = self.context_ids[rng.random_range(0..self.context_ids.len())];
        let mut ctx = self.log.contexts[&id].clone();
        ctx.context_id = Some(id);
        ContextDraw::plain(ctx)
    }

    fn step(
        &self,
        chosen: &[ArmId],
        draw: &ContextDraw,
        round: u32,
        rng: &mut SimRng,
    ) -> Result<Feedback> {
        let cid = self.context_id(draw)?;
        if let Some(&bad) = chosen.iter().find(|&&a| a >= self.arms.len()) {
            return Err(Error::UnknownArm(bad));
        }
        let mut arms = chosen.to_vec();
        arms.sort_unstable();
        arms.dedup();

        let mut fb = Feedback::new(round);
        let mut taken = BTreeSet::new();
        for &arm in &arms {
            let set = self.sample_record(arm, cid, rng);
            // a node logged under two chosen influencers goes to the lower arm id
            let own: BTreeSet<NodeId> = set.iter().copied().filter(|n| taken.insert(*n)).collect();
            fb.per_influencer.insert(arm, own);
        }
        Ok(fb)
    }

    fn true_ranking(
        &self,
        draw: &ContextDraw,
        ledger: &ActivationLedger,
        seed: u64,
    ) -> Result<Vec<ArmId>> {
        let cid = self.context_id(draw)?;
        let mut rng = SimRng::seed_from_u64(seed);
        let scores: Vec<u64> = (0..self.arms.len())
            .map(|arm| {
                self.sample_record(arm, cid, &mut rng)
                    .iter()
                    .filter(|n| !ledger.contains(**n))
                    .count() as u64
            })
            .collect();
        Ok(rank_by_score(&scores))
    }

    fn regime(&self, draw: &ContextDraw, _arm: ArmId) -> String {
        match draw.context.context_id {
            Some(id) => format!("ctx{id}"),
            None => "ctx?".into(),
        }
    }
}

/// Build a replay log by simulating single-seed cascades in a synthetic world.
///
/// `n_contexts` contexts are drawn from the world's context distribution;
/// each of the `n_records` records pairs a uniformly chosen influencer with a
/// uniformly chosen context.
pub fn loggen_synthesize(
    world: &SyntheticWorld,
    n_contexts: usize,
    n_records: usize,
    seed: u64,
) -> ReplayLog {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut log = ReplayLog::default();
    for id in 0..n_contexts as u32 {
        let mut ctx = world.draw_context(&mut rng).context;
        ctx.context_id = Some(id);
        log.contexts.insert(id, ctx);
    }
    if n_contexts == 0 {
        return log;
    }
    let k = world.influencers().len();
    for _ in 0..n_records {
        let cid = rng.random_range(0..n_contexts as u32);
        let arm = rng.random_range(0..k);
        let seed_node = world.influencers()[arm];
        let ctx = super::synthetic::EffContext::Drawn(&log.contexts[&cid].vector);
        let nodes = world
            .cascade(seed_node, &ctx, &mut rng)
            .into_iter()
            .map(|r| r.node)
            .collect();
        log.push_record(seed_node, cid, nodes);
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::synthetic::SyntheticParams;

    fn toy_log() -> ReplayLog {
        let mut log = ReplayLog::default();
        log.contexts.insert(
            0,
            Context {
                vector: vec![0.5, 0.25],
                context_id: Some(0),
            },
        );
        log.contexts.insert(
            1,
            Context {
                vector: vec![1.0, 0.0],
                context_id: Some(1),
            },
        );
        log.push_record(100, 0, vec![1, 2, 3]);
        log.push_record(200, 0, vec![4]);
        log.push_record(200, 0, vec![5, 6]);
        log.push_record(100, 1, vec![7]);
        log
    }

    fn draw(id: u32, log: &ReplayLog) -> ContextDraw {
        let mut c = log.contexts[&id].clone();
        c.context_id = Some(id);
        ContextDraw::plain(c)
    }

    #[test]
    fn absent_key_gives_empty_set() {
        let log = toy_log();
        let env = ReplayEnv::new(log.clone(), 2).unwrap();
        // influencer 200 (arm order by volume: 100 has 4, 200 has 3) never posted in ctx 1
        assert_eq!(env.arms(), &[100, 200]);
        let fb = env
            .step(&[0, 1], &draw(1, &log), 1, &mut SimRng::seed_from_u64(0))
            .unwrap();
        assert_eq!(fb.nodes_of(1).unwrap().len(), 0);
        assert_eq!(fb.nodes_of(0).unwrap(), &BTreeSet::from([7]));
    }

    #[test]
    fn singleton_record_is_deterministic() {
        let log = toy_log();
        let env = ReplayEnv::new(log.clone(), 2).unwrap();
        for s in 0..20 {
            let fb = env
                .step(&[0], &draw(0, &log), 1, &mut SimRng::seed_from_u64(s))
                .unwrap();
            assert_eq!(fb.nodes_of(0).unwrap(), &BTreeSet::from([1, 2, 3]));
        }
    }

    #[test]
    fn two_records_sampled_evenly() {
        let log = toy_log();
        let env = ReplayEnv::new(log.clone(), 2).unwrap();
        let mut rng = SimRng::seed_from_u64(77);
        let d = draw(0, &log);
        let n = 10_000;
        let mut first = 0;
        for t in 0..n {
            let fb = env.step(&[1], &d, t + 1, &mut rng).unwrap();
            if fb.nodes_of(1).unwrap().contains(&4) {
                first += 1;
            }
        }
        let freq = first as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "frequency {freq}");
    }

    #[test]
    fn unknown_context_rejected() {
        let log = toy_log();
        let env = ReplayEnv::new(log, 1).unwrap();
        let bogus = ContextDraw::plain(Context {
            vector: vec![0.0, 0.0],
            context_id: Some(9),
        });
        assert!(matches!(
            env.step(&[0], &bogus, 1, &mut SimRng::seed_from_u64(0)),
            Err(Error::UnknownContext(9))
        ));
    }

    #[test]
    fn overlapping_records_stay_disjoint() {
        let mut log = toy_log();
        log.push_record(200, 1, vec![7, 8]);
        let env = ReplayEnv::new(log.clone(), 2).unwrap();
        let fb = env
            .step(&[0, 1], &draw(1, &log), 1, &mut SimRng::seed_from_u64(0))
            .unwrap();
        // influencer 200 now has the larger volume, so it is arm 0
        assert_eq!(env.arms(), &[200, 100]);
        assert_eq!(fb.nodes_of(0).unwrap(), &BTreeSet::from([7, 8]));
        assert!(fb.nodes_of(1).unwrap().is_empty());
    }

    #[test]
    fn too_few_influencers() {
        assert!(ReplayEnv::new(toy_log(), 3).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (r, c) = (dir.path().join("log.jsonl"), dir.path().join("ctx.jsonl"));
        let log = toy_log();
        log.write_jsonl(&r, &c).unwrap();
        let back = ReplayLog::read_jsonl(&r, &c).unwrap();
        assert_eq!(back, log);
        let first = std::fs::read_to_string(&r).unwrap();
        assert_eq!(
            first.lines().next().unwrap(),
            r#"{"influencer":100,"context_id":0,"activations":[1,2,3]}"#
        );
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let (r, c) = (dir.path().join("log.jsonl"), dir.path().join("ctx.jsonl"));
        std::fs::write(&c, "{\"context_id\":0,\"vector\":[0.5]}\n").unwrap();
        std::fs::write(&r, "{\"influencer\":1,\"context_id\":0,\"activations\":[1]}\nnot json\n").unwrap();
        match ReplayLog::read_jsonl(&r, &c) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&r, "{\"influencer\":1,\"context_id\":4,\"activations\":[1]}\n").unwrap();
        assert!(matches!(
            ReplayLog::read_jsonl(&r, &c),
            Err(Error::UnknownContext(4))
        ));
    }

    #[test]
    fn loggen_contexts_only_and_invariants() {
        let world = SyntheticWorld::generate(
            SyntheticParams {
                nodes: 300,
                influencers: 4,
                dim: 3,
                ..SyntheticParams::default()
            },
            3,
        )
        .unwrap();
        let empty = loggen_synthesize(&world, 5, 0, 1);
        assert_eq!(empty.contexts.len(), 5);
        assert!(empty.records.is_empty());

        let log = loggen_synthesize(&world, 5, 200, 1);
        assert_eq!(log.records.values().map(Vec::len).sum::<usize>(), 200);
        log.validate().unwrap();

        let dir = tempfile::tempdir().unwrap();
        let (r, c) = (dir.path().join("log.jsonl"), dir.path().join("ctx.jsonl"));
        log.write_jsonl(&r, &c).unwrap();
        assert_eq!(ReplayLog::read_jsonl(&r, &c).unwrap(), log);
    }
}
