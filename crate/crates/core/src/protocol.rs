//! DPB as explicit message passing between UE and AP agents.
//!
//! Arrivals are processed one at a time. An arriving UE probes its `S'`
//! strongest serving APs; each AP answers from its own state with a
//! candidate offer; once all offers are in, the UE picks a pilot and
//! notifies every serving AP. There is no CPU node, and the event loop
//! refuses to carry any AP-to-AP message.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::assignment::{
    priority_select, ApLocalState, AssignContext, CandidateOffer, Dpb, PilotAssignment, SchemeConfig, SchemeId,
    StepStats, TieRule,
};
use crate::error::{Error, Result};
use crate::network::{AssociationMap, NetworkRealization, PowerProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum NodeId {
    Ue(usize),
    Ap(usize),
}

impl NodeId {
    fn is_ap(self) -> bool {
        matches!(self, NodeId::Ap(_))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Ue(t) => write!(f, "ue:{t}"),
            NodeId::Ap(m) => write!(f, "ap:{m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    PilotProbe,
    CandidateOffer,
    PilotNotify,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::PilotProbe => "pilot_probe",
            MessageKind::CandidateOffer => "candidate_offer",
            MessageKind::PilotNotify => "pilot_notify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Probe,
    /// Candidate pilots, best first.
    Offer(Vec<usize>),
    Notify(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: Payload,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self.payload {
            Payload::Probe => MessageKind::PilotProbe,
            Payload::Offer(_) => MessageKind::CandidateOffer,
            Payload::Notify(_) => MessageKind::PilotNotify,
        }
    }

    /// Pilot indices carried.
    pub fn payload_size(&self) -> usize {
        match &self.payload {
            Payload::Probe => 0,
            Payload::Offer(p) => p.len(),
            Payload::Notify(_) => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub arrival_index: usize,
    pub kind: MessageKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload_size: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceLog {
    records: Vec<TraceRecord>,
    kind_counts: BTreeMap<MessageKind, usize>,
    edge_counts: BTreeMap<(NodeId, NodeId), usize>,
}

impl TraceLog {
    pub fn push(&mut self, record: TraceRecord) {
        *self.kind_counts.entry(record.kind).or_default() += 1;
        *self.edge_counts.entry((record.src, record.dst)).or_default() += 1;
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.kind_counts.get(&kind).copied().unwrap_or(0)
    }

    pub fn edge_count(&self, src: NodeId, dst: NodeId) -> usize {
        self.edge_counts.get(&(src, dst)).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &usize)> {
        self.edge_counts.iter()
    }

    /// Counters agree with a recount of the record list.
    pub fn is_consistent(&self) -> bool {
        let mut fresh = TraceLog::default();
        for r in &self.records {
            fresh.push(r.clone());
        }
        fresh.kind_counts == self.kind_counts && fresh.edge_counts == self.edge_counts
    }

    /// A header, then one `arrival_index,kind,src,dst,payload_size` line per
    /// message.
    pub fn export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "arrival_index,kind,src,dst,payload_size")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.arrival_index,
                r.kind.as_str(),
                r.src,
                r.dst,
                r.payload_size
            )?;
        }
        Ok(())
    }
}

struct ApAgent {
    state: ApLocalState,
    delta: f64,
}

impl ApAgent {
    fn handle(&mut self, msg: &Message) -> Result<Vec<Message>> {
        let me = NodeId::Ap(self.state.ap());
        match (&msg.payload, msg.src) {
            (Payload::Probe, NodeId::Ue(t)) => {
                let offer = self.state.offer(t, self.delta, &mut StepStats::default());
                Ok(vec![Message {
                    src: me,
                    dst: msg.src,
                    payload: Payload::Offer(offer.pilots),
                }])
            }
            (Payload::Notify(pilot), NodeId::Ue(t)) => {
                self.state.notify(t, *pilot);
                Ok(Vec::new())
            }
            _ => Err(Error::Protocol(format!(
                "{me} cannot handle {:?} from {}",
                msg.kind(),
                msg.src
            ))),
        }
    }
}

struct UeAgent {
    ue: usize,
    serving: Vec<usize>,
    priority: usize,
    offers: Vec<Option<Vec<usize>>>,
    tie_rule: TieRule,
    seed: u64,
    pilot: Option<usize>,
}

impl UeAgent {
    fn start(&self) -> Vec<Message> {
        self.serving[..self.priority]
            .iter()
            .map(|&m| Message {
                src: NodeId::Ue(self.ue),
                dst: NodeId::Ap(m),
                payload: Payload::Probe,
            })
            .collect()
    }

    fn handle(&mut self, msg: &Message) -> Result<Vec<Message>> {
        let me = NodeId::Ue(self.ue);
        let (NodeId::Ap(m), Payload::Offer(pilots)) = (msg.src, &msg.payload) else {
            return Err(Error::Protocol(format!(
                "{me} cannot handle {:?} from {}",
                msg.kind(),
                msg.src
            )));
        };
        let rank = self.serving[..self.priority]
            .iter()
            .position(|&a| a == m)
            .ok_or_else(|| Error::Protocol(format!("{me} got an unsolicited offer from ap:{m}")))?;
        self.offers[rank] = Some(pilots.clone());
        if self.offers.iter().any(Option::is_none) {
            return Ok(Vec::new());
        }
        let offers: Vec<CandidateOffer> = self
            .offers
            .iter()
            .zip(&self.serving)
            .map(|(p, &ap)| CandidateOffer {
                ap,
                pilots: p.clone().unwrap_or_default(),
            })
            .collect();
        let pilot = priority_select(
            &offers,
            self.tie_rule,
            &mut Dpb::tie_rng(self.seed, self.ue),
            &mut StepStats::default(),
        );
        self.pilot = Some(pilot);
        Ok(self
            .serving
            .iter()
            .map(|&m| Message {
                src: me,
                dst: NodeId::Ap(m),
                payload: Payload::Notify(pilot),
            })
            .collect())
    }
}

/// Runs DPB for the UEs in `arrival_order` (distinct UE indices; a prefix of
/// a permutation is allowed).
pub fn run_protocol(
    real: &NetworkRealization,
    assoc: &AssociationMap,
    scheme: &SchemeConfig,
    powers: &PowerProfile,
    lp: usize,
    arrival_order: &[usize],
) -> Result<(PilotAssignment, TraceLog)> {
    if scheme.scheme != SchemeId::Dpb {
        return Err(Error::InvalidConfig(format!(
            "protocol runs DPB, not {}",
            scheme.scheme
        )));
    }
    scheme.validate()?;
    let num_ues = real.num_ues();
    let ctx = AssignContext {
        beta: real.beta.view(),
        powers,
        assoc,
        lp,
    };
    let mut aps: Vec<ApAgent> = (0..real.num_aps())
        .map(|m| ApAgent {
            state: ApLocalState::from_context(m, &ctx),
            delta: scheme.dpb_delta,
        })
        .collect();

    let mut assignment = PilotAssignment::new(num_ues, lp);
    let mut log = TraceLog::default();
    let mut seen = vec![false; num_ues];
    for (arrival_index, &t) in arrival_order.iter().enumerate() {
        if t >= num_ues || std::mem::replace(&mut seen[t], true) {
            return Err(Error::InvalidConfig(format!("invalid arrival of UE {t}")));
        }
        let serving = assoc.serving_aps[t].clone();
        let priority = scheme.dpb_s.min(serving.len());
        let mut ue = UeAgent {
            ue: t,
            serving,
            priority,
            offers: vec![None; priority],
            tie_rule: scheme.tie_rule,
            seed: scheme.seed,
            pilot: None,
        };

        let mut queue: VecDeque<Message> = VecDeque::new();
        let send = |msg: Message, queue: &mut VecDeque<Message>, log: &mut TraceLog| -> Result<()> {
            if msg.src == msg.dst || (msg.src.is_ap() && msg.dst.is_ap()) {
                return Err(Error::Protocol(format!("illegal message {} -> {}", msg.src, msg.dst)));
            }
            log.push(TraceRecord {
                arrival_index,
                kind: msg.kind(),
                src: msg.src,
                dst: msg.dst,
                payload_size: msg.payload_size(),
            });
            queue.push_back(msg);
            Ok(())
        };
        for msg in ue.start() {
            send(msg, &mut queue, &mut log)?;
        }
        while let Some(msg) = queue.pop_front() {
            let replies = match msg.dst {
                NodeId::Ap(m) => aps[m].handle(&msg)?,
                NodeId::Ue(k) if k == t => ue.handle(&msg)?,
                NodeId::Ue(k) => return Err(Error::Protocol(format!("message for absent ue:{k}"))),
            };
            for reply in replies {
                send(reply, &mut queue, &mut log)?;
            }
        }
        let pilot = ue
            .pilot
            .ok_or_else(|| Error::Protocol(format!("ue:{t} finished without a pilot")))?;
        assignment.assign(t, pilot);
    }
    Ok((assignment, log))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UeBudget {
    pub ue: usize,
    pub probes: usize,
    pub offers: usize,
    pub notifies: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OverheadReport {
    pub per_ue: Vec<UeBudget>,
    pub total_messages: usize,
    pub total_payload: usize,
    pub ap_to_ap: usize,
}

/// Checks that every UE present in the trace used exactly `S'_t` probes,
/// `S'_t` offers and `|M_t|` notifies, and that no AP talked to another AP.
pub fn audit_overhead(log: &TraceLog, assoc: &AssociationMap, s: usize) -> Result<OverheadReport> {
    let ap_to_ap = log.records().iter().filter(|r| r.src.is_ap() && r.dst.is_ap()).count();
    if ap_to_ap > 0 {
        return Err(Error::Protocol(format!("{ap_to_ap} AP-to-AP messages")));
    }
    let mut budgets: BTreeMap<usize, UeBudget> = BTreeMap::new();
    for r in log.records() {
        let ue = match (r.src, r.dst) {
            (NodeId::Ue(t), _) | (_, NodeId::Ue(t)) => t,
            _ => unreachable!("AP-to-AP rejected above"),
        };
        let b = budgets.entry(ue).or_insert(UeBudget {
            ue,
            probes: 0,
            offers: 0,
            notifies: 0,
        });
        match r.kind {
            MessageKind::PilotProbe => b.probes += 1,
            MessageKind::CandidateOffer => b.offers += 1,
            MessageKind::PilotNotify => b.notifies += 1,
        }
    }
    for b in budgets.values() {
        let serving = assoc.serving_aps[b.ue].len();
        let priority = s.min(serving);
        if b.probes != priority || b.offers != priority || b.notifies != serving {
            return Err(Error::BudgetViolation {
                ue: b.ue,
                detail: format!(
                    "expected {priority} probes, {priority} offers, {serving} notifies; got {}, {}, {}",
                    b.probes, b.offers, b.notifies
                ),
            });
        }
    }
    Ok(OverheadReport {
        per_ue: budgets.into_values().collect(),
        total_messages: log.records().len(),
        total_payload: log.records().iter().map(|r| r.payload_size).sum(),
        ap_to_ap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::assign_in_order;
    use crate::network::{generate_drop, normalize_powers, NetworkConfig};

    fn setup(num_ues: usize, seed: u64) -> (NetworkRealization, AssociationMap, PowerProfile) {
        let cfg = NetworkConfig {
            num_aps: 15,
            num_ues,
            ..Default::default()
        };
        let real = generate_drop(&cfg, seed).unwrap();
        let assoc = AssociationMap::build(&real, 0.95);
        (real, assoc, normalize_powers(&cfg))
    }

    #[test]
    fn single_ue_message_count() {
        let (real, assoc, powers) = setup(1, 4);
        let cfg = SchemeConfig::new(SchemeId::Dpb);
        let (pa, log) = run_protocol(&real, &assoc, &cfg, &powers, 7, &[0]).unwrap();
        let serving = assoc.serving_aps[0].len();
        let s = 3.min(serving);
        assert_eq!(log.count(MessageKind::PilotProbe), s);
        assert_eq!(log.count(MessageKind::CandidateOffer), s);
        assert_eq!(log.count(MessageKind::PilotNotify), serving);
        assert!(pa.pilot(0).is_some());
        assert!(log.is_consistent());
    }

    #[test]
    fn uniform_serving_sets_budget() {
        let (real, _, powers) = setup(10, 5);
        let serving: Vec<Vec<usize>> = (0..10)
            .map(|t| {
                let mut aps: Vec<usize> = (0..15).collect();
                aps.sort_by(|&a, &b| real.beta[[b, t]].total_cmp(&real.beta[[a, t]]));
                aps.truncate(5);
                aps
            })
            .collect();
        let assoc = AssociationMap::from_serving(serving, 15);
        let order: Vec<usize> = (0..10).collect();
        let (_, log) = run_protocol(&real, &assoc, &SchemeConfig::new(SchemeId::Dpb), &powers, 7, &order).unwrap();
        assert_eq!(log.count(MessageKind::PilotProbe), 30);
        assert_eq!(log.count(MessageKind::CandidateOffer), 30);
        assert_eq!(log.count(MessageKind::PilotNotify), 50);
        audit_overhead(&log, &assoc, 3).unwrap();

        let cfg = SchemeConfig {
            dpb_s: 1,
            ..SchemeConfig::new(SchemeId::Dpb)
        };
        let (_, log) = run_protocol(&real, &assoc, &cfg, &powers, 7, &order).unwrap();
        assert_eq!(log.count(MessageKind::PilotProbe), 10);
        assert_eq!(log.count(MessageKind::CandidateOffer), 10);
        let report = audit_overhead(&log, &assoc, 1).unwrap();
        assert_eq!(report.ap_to_ap, 0);
        // Wrong S is reported against the first UE.
        assert!(matches!(
            audit_overhead(&log, &assoc, 3),
            Err(Error::BudgetViolation { ue: 0, .. })
        ));
    }

    #[test]
    fn matches_direct_assignment() {
        for seed in 0..5 {
            let (real, assoc, powers) = setup(40, seed);
            let mut order: Vec<usize> = (0..40).collect();
            order.reverse();
            order.swap(3, 17);
            let cfg = SchemeConfig::new(SchemeId::Dpb).with_seed(seed * 31);
            let (proto, log) = run_protocol(&real, &assoc, &cfg, &powers, 7, &order).unwrap();
            let (direct, _) = assign_in_order(&cfg, &real, &assoc, &powers, 7, &order).unwrap();
            assert_eq!(proto, direct);
            audit_overhead(&log, &assoc, 3).unwrap();
            assert!(log.edges().all(|((s, d), _)| !(s.is_ap() && d.is_ap())));
        }
    }

    #[test]
    fn export_lines() {
        let (real, assoc, powers) = setup(2, 9);
        let (_, log) = run_protocol(&real, &assoc, &SchemeConfig::new(SchemeId::Dpb), &powers, 7, &[1, 0]).unwrap();
        let mut buf = Vec::new();
        log.export(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("arrival_index,kind,src,dst,payload_size"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,pilot_probe,ue:1,ap:"), "{first}");
        assert!(first.ends_with(",0"));
        assert_eq!(text.lines().count(), 1 + log.records().len());
    }

    #[test]
    fn rejects_non_dpb_and_bad_orders() {
        let (real, assoc, powers) = setup(3, 1);
        assert!(run_protocol(&real, &assoc, &SchemeConfig::new(SchemeId::Eem), &powers, 7, &[0]).is_err());
        let cfg = SchemeConfig::new(SchemeId::Dpb);
        assert!(run_protocol(&real, &assoc, &cfg, &powers, 7, &[0, 0]).is_err());
        assert!(run_protocol(&real, &assoc, &cfg, &powers, 7, &[5]).is_err());
    }

    #[test]
    fn ap_rejects_foreign_messages() {
        let mut ap = ApAgent {
            state: ApLocalState::new(0, vec![1.0; 2], vec![1.0; 2], 2),
            delta: 0.1,
        };
        let bad = Message {
            src: NodeId::Ap(1),
            dst: NodeId::Ap(0),
            payload: Payload::Probe,
        };
        assert!(ap.handle(&bad).is_err());
    }
}
