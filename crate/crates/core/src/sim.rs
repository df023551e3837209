//! Slot-level simulation of the source-relay-destination random-access
//! protocol.
//!
//! Each slot draws exactly eight uniforms from the generator, in this order:
//! source attempt, relay attempt, source-to-destination decode,
//! source-to-relay decode, flow-controller acceptance, relay-to-destination
//! decode, source arrival, relay arrival. Every coin is drawn every slot
//! whether or not it is needed, so all modes consume the generator at the
//! same pace and runs with equal seeds share a sample path.
//!
//! The generator is xoshiro256++ seeded through SplitMix64
//! (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`); uniforms are the top
//! 53 bits of each output scaled to `[0, 1)`. Both steps are
//! platform-independent.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Result;
use crate::model::{is_probability, validate_params, CooperationPolicy, RatePoint, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    Original,
    /// The source transmits a dummy packet with probability `q1` whenever its
    /// queue is empty.
    DominantSourceDummy,
    /// The relay transmits a dummy packet with probability `q2` whenever its
    /// queue is empty.
    DominantRelayDummy,
    /// The source always has a packet; exogenous source arrivals are drawn
    /// but not queued.
    SourceSaturated,
}

impl SimMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimMode::Original => "original",
            SimMode::DominantSourceDummy => "dominant-source-dummy",
            SimMode::DominantRelayDummy => "dominant-relay-dummy",
            SimMode::SourceSaturated => "source-saturated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: SystemParams,
    pub policy: CooperationPolicy,
    pub rates: RatePoint,
    pub mode: SimMode,
    pub n_slots: u64,
    pub seed: u64,
    /// Queue lengths are sampled at every slot index divisible by this.
    pub sample_stride: u64,
}

impl SimConfig {
    pub fn new(params: SystemParams, policy: CooperationPolicy, rates: RatePoint) -> Self {
        Self {
            params,
            policy,
            rates,
            mode: SimMode::Original,
            n_slots: 1_000_000,
            seed: 1,
            sample_stride: 100,
        }
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_slots(mut self, n_slots: u64) -> Self {
        self.n_slots = n_slots;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stride(mut self, sample_stride: u64) -> Self {
        self.sample_stride = sample_stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_params(&self.params).into_result()?;
        for (name, value) in [
            ("pa", self.policy.pa),
            ("lambda1", self.rates.lambda1),
            ("lambda2", self.rates.lambda2),
        ] {
            if !is_probability(value) {
                return Err(crate::Error::OutOfRange { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Source,
    Relay,
}

#[derive(Debug, Clone)]
pub struct SimState {
    q1_len: u64,
    /// Single FIFO for exogenous and relayed packets; tags are kept only for
    /// accounting.
    relay_queue: VecDeque<Origin>,
    slot: u64,
    rng: Xoshiro256PlusPlus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlotOutcome {
    pub s_transmitted: bool,
    pub r_transmitted: bool,
    pub collision: bool,
    /// A real source packet was decoded by the destination.
    pub s_to_d: bool,
    /// A real source packet was decoded by the relay and accepted.
    pub s_to_r_accepted: bool,
    /// A real relay packet was decoded by the destination.
    pub r_to_d: bool,
    /// The packet delivered by the relay had been taken over from the source.
    pub r_to_d_relayed: bool,
    pub s_arrival: bool,
    pub r_arrival: bool,
    pub s_dummy: bool,
    pub r_dummy: bool,
}

impl SimState {
    pub fn new(seed: u64) -> Self {
        Self {
            q1_len: 0,
            relay_queue: VecDeque::new(),
            slot: 0,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn q1_len(&self) -> u64 {
        self.q1_len
    }

    pub fn q2_len(&self) -> u64 {
        self.relay_queue.len() as u64
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    fn relay_backlog_from_source(&self) -> u64 {
        self.relay_queue
            .iter()
            .filter(|o| **o == Origin::Source)
            .count() as u64
    }

    /// Advances the network by one slot.
    pub fn step(&mut self, config: &SimConfig) -> SlotOutcome {
        let mut u = [0.0f64; 8];
        for x in &mut u {
            *x = self.rng.gen::<f64>();
        }
        let SystemParams { channel, access } = config.params;
        let mode = config.mode;

        let s_has_packet = self.q1_len > 0 || mode == SimMode::SourceSaturated;
        let s_eligible = s_has_packet || mode == SimMode::DominantSourceDummy;
        let s_transmitted = s_eligible && u[0] < access.q1;
        let s_dummy = s_transmitted && !s_has_packet;

        let r_has_packet = !self.relay_queue.is_empty();
        let r_eligible = r_has_packet || mode == SimMode::DominantRelayDummy;
        let r_transmitted = r_eligible && u[1] < access.q2;
        let r_dummy = r_transmitted && !r_has_packet;

        let collision = s_transmitted && r_transmitted;
        let mut out = SlotOutcome {
            s_transmitted,
            r_transmitted,
            collision,
            s_dummy,
            r_dummy,
            ..SlotOutcome::default()
        };

        if s_transmitted && !r_transmitted && !s_dummy {
            if u[2] < channel.p13 {
                out.s_to_d = true;
            } else if u[3] < channel.p12 && u[4] < config.policy.pa {
                out.s_to_r_accepted = true;
            }
        }
        if r_transmitted && !s_transmitted && !r_dummy && u[5] < channel.p23 {
            out.r_to_d = true;
        }

        if (out.s_to_d || out.s_to_r_accepted) && mode != SimMode::SourceSaturated {
            self.q1_len -= 1;
        }
        if out.r_to_d {
            let origin = self.relay_queue.pop_front();
            out.r_to_d_relayed = origin == Some(Origin::Source);
        }
        if out.s_to_r_accepted {
            self.relay_queue.push_back(Origin::Source);
        }

        out.s_arrival = u[6] < config.rates.lambda1;
        out.r_arrival = u[7] < config.rates.lambda2;
        if out.s_arrival && mode != SimMode::SourceSaturated {
            self.q1_len += 1;
        }
        if out.r_arrival {
            self.relay_queue.push_back(Origin::Relay);
        }

        self.slot += 1;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueSample {
    pub slot: u64,
    pub q1_len: u64,
    pub q2_len: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimStats {
    pub source_arrivals: u64,
    pub relay_arrivals: u64,
    pub source_dummy_tx: u64,
    pub relay_dummy_tx: u64,
    /// Source packets decoded directly by the destination.
    pub source_direct_deliveries: u64,
    /// Source packets delivered to the destination by the relay.
    pub relayed_deliveries: u64,
    /// Relay-originated packets delivered to the destination.
    pub relay_own_deliveries: u64,
    pub relay_admissions: u64,
    pub collisions: u64,
    /// Slots that started with a non-empty source queue.
    pub busy_q1_slots: u64,
    /// Slots that started with a non-empty relay queue.
    pub busy_q2_slots: u64,
    pub samples: Vec<QueueSample>,
    pub elapsed_slots: u64,
    pub final_q1_len: u64,
    pub final_q2_len: u64,
    /// Source packets still waiting in the relay queue at the end.
    pub final_relay_backlog_from_source: u64,
}

impl SimStats {
    fn per_slot(&self, count: u64) -> f64 {
        if self.elapsed_slots == 0 {
            0.0
        } else {
            count as f64 / self.elapsed_slots as f64
        }
    }

    /// Source packets that left the source queue (delivered or handed to the
    /// relay), per slot.
    pub fn source_departure_rate(&self) -> f64 {
        self.per_slot(self.source_direct_deliveries + self.relay_admissions)
    }

    /// End-to-end delivery rate of the source flow.
    pub fn source_delivery_rate(&self) -> f64 {
        self.per_slot(self.source_direct_deliveries + self.relayed_deliveries)
    }

    /// End-to-end delivery rate of the relay's own flow.
    pub fn relay_delivery_rate(&self) -> f64 {
        self.per_slot(self.relay_own_deliveries)
    }

    pub fn q1_busy_fraction(&self) -> f64 {
        self.per_slot(self.busy_q1_slots)
    }

    pub fn q2_busy_fraction(&self) -> f64 {
        self.per_slot(self.busy_q2_slots)
    }

    fn record(&mut self, out: &SlotOutcome) {
        self.source_arrivals += u64::from(out.s_arrival);
        self.relay_arrivals += u64::from(out.r_arrival);
        self.source_dummy_tx += u64::from(out.s_dummy);
        self.relay_dummy_tx += u64::from(out.r_dummy);
        self.source_direct_deliveries += u64::from(out.s_to_d);
        self.relay_admissions += u64::from(out.s_to_r_accepted);
        self.collisions += u64::from(out.collision);
        if out.r_to_d {
            if out.r_to_d_relayed {
                self.relayed_deliveries += 1;
            } else {
                self.relay_own_deliveries += 1;
            }
        }
    }
}

/// A simulation in progress: state plus accumulated statistics.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    state: SimState,
    stats: SimStats,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Self {
        Self {
            state: SimState::new(config.seed),
            config,
            stats: SimStats::default(),
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn step(&mut self) -> SlotOutcome {
        let stride = self.config.sample_stride.max(1);
        let (q1, q2) = (self.state.q1_len(), self.state.q2_len());
        if self.state.slot.is_multiple_of(stride) {
            self.stats.samples.push(QueueSample {
                slot: self.state.slot,
                q1_len: q1,
                q2_len: q2,
            });
        }
        self.stats.busy_q1_slots += u64::from(q1 > 0);
        self.stats.busy_q2_slots += u64::from(q2 > 0);
        let out = self.state.step(&self.config);
        self.stats.record(&out);
        self.stats.elapsed_slots += 1;
        out
    }

    pub fn finish(mut self) -> SimStats {
        self.stats.final_q1_len = self.state.q1_len();
        self.stats.final_q2_len = self.state.q2_len();
        self.stats.final_relay_backlog_from_source = self.state.relay_backlog_from_source();
        self.stats
    }
}

/// Runs `config.n_slots` slots from empty queues.
pub fn run(config: &SimConfig) -> SimStats {
    let mut sim = Simulation::new(*config);
    for _ in 0..config.n_slots {
        sim.step();
    }
    sim.finish()
}

pub const TRACE_HEADER: &str = "slot,s_transmitted,r_transmitted,collision,s_to_d,s_to_r_accepted,r_to_d,s_arrival,r_arrival,s_dummy,r_dummy";

/// Like [`run`], additionally writing one CSV record per slot.
pub fn run_traced<W: Write>(config: &SimConfig, out: W) -> io::Result<SimStats> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{TRACE_HEADER}")?;
    let mut sim = Simulation::new(*config);
    for _ in 0..config.n_slots {
        let slot = sim.state().slot();
        let o = sim.step();
        let b = |x: bool| if x { '1' } else { '0' };
        writeln!(
            out,
            "{slot},{},{},{},{},{},{},{},{},{},{}",
            b(o.s_transmitted),
            b(o.r_transmitted),
            b(o.collision),
            b(o.s_to_d),
            b(o.s_to_r_accepted),
            b(o.r_to_d),
            b(o.s_arrival),
            b(o.r_arrival),
            b(o.s_dummy),
            b(o.r_dummy),
        )?;
    }
    out.flush()?;
    Ok(sim.finish())
}

/// Empirical source service rate with a never-empty source queue.
pub fn measure_saturated_service_rate(
    params: &SystemParams,
    policy: &CooperationPolicy,
    lambda2: f64,
    n_slots: u64,
    seed: u64,
) -> f64 {
    let config = SimConfig::new(*params, *policy, RatePoint::new(0.0, lambda2))
        .with_mode(SimMode::SourceSaturated)
        .with_slots(n_slots)
        .with_seed(seed)
        .with_stride(n_slots.max(1));
    run(&config).source_departure_rate()
}
