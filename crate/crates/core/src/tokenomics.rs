// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Epoch reward allocation.
//!
//! A node's claim on an epoch's reward pool is its power index
//! `exp(power) × alive_fraction`, where the alive fraction is the node's
//! cumulative alive time over the total protocol time `epoch_seconds × epoch`.
//! The share is the node's index over the sum of all indices, and the pool is
//! split against the snapshot taken at epoch close in a single pass.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::capability::Capability;
use crate::crypto::PublicKey;
use crate::ids::DeedId;
use crate::token::{Token, TokenError};

/// Power scores are clamped to `[-POWER_BOUND, POWER_BOUND]`.
pub const POWER_BOUND: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TokenomicsError {
    #[error("genesis epoch has no protocol time")]
    GenesisEpoch,
    #[error("epoch length must be positive")]
    ZeroEpochSeconds,
    #[error("protocol time overflow")]
    Overflow,
    #[error("protocol time must be positive")]
    ZeroProtocolTime,
    #[error("no eligible nodes (all alive fractions are zero)")]
    NoEligibleNodes,
    #[error("deed {0} is not in the active set")]
    TargetNotActive(DeedId),
    #[error("deed {0} appears twice in the active set")]
    DuplicateActive(DeedId),
    #[error("unknown deed {0}")]
    UnknownDeed(DeedId),
    #[error("deed {0} is already registered")]
    DuplicateDeed(DeedId),
    #[error("epoch {got} is not the current epoch {current}")]
    EpochMismatch { current: u64, got: u64 },
    #[error("epoch cannot move backwards from {current} to {requested}")]
    EpochRegression { current: u64, requested: u64 },
    #[error("power score must be finite, got {0}")]
    NonFinitePower(f64),
    #[error("deed {} balance {} is below {}", .0.deed, .0.balance, .0.required)]
    InsufficientBalance(Box<Shortfall>),
    #[error(transparent)]
    Token(#[from] TokenError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shortfall {
    pub deed: DeedId,
    pub balance: Token,
    pub required: Token,
}

pub type Result<T, E = TokenomicsError> = std::result::Result<T, E>;

/// Epoch timing. Epoch `E` covers `[genesis + (E-1)·len, genesis + E·len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpochConfig {
    pub epoch_seconds: u64,
    pub genesis_time: u64,
    pub current_epoch: u64,
}

impl EpochConfig {
    pub fn new(epoch_seconds: u64, genesis_time: u64) -> Result<Self> {
        Self::at_epoch(epoch_seconds, genesis_time, 0)
    }

    pub fn at_epoch(epoch_seconds: u64, genesis_time: u64, current_epoch: u64) -> Result<Self> {
        if epoch_seconds == 0 {
            return Err(TokenomicsError::ZeroEpochSeconds);
        }
        Ok(EpochConfig {
            epoch_seconds,
            genesis_time,
            current_epoch,
        })
    }

    pub fn advance_to(&mut self, epoch: u64) -> Result<()> {
        if epoch < self.current_epoch {
            return Err(TokenomicsError::EpochRegression {
                current: self.current_epoch,
                requested: epoch,
            });
        }
        self.current_epoch = epoch;
        Ok(())
    }

    /// The 1-based epoch containing logical time `t`.
    pub fn epoch_containing(&self, t: u64) -> u64 {
        t.saturating_sub(self.genesis_time) / self.epoch_seconds + 1
    }

    pub fn epoch_end(&self, epoch: u64) -> u64 {
        self.genesis_time + self.epoch_seconds * epoch
    }
}

/// `T_P = epoch_seconds × E`.
pub fn total_protocol_time(cfg: &EpochConfig) -> Result<u64> {
    if cfg.current_epoch == 0 {
        return Err(TokenomicsError::GenesisEpoch);
    }
    cfg.epoch_seconds
        .checked_mul(cfg.current_epoch)
        .ok_or(TokenomicsError::Overflow)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AliveFraction {
    pub value: f64,
    /// Set when `T_N > T_P` and the ratio was clamped to 1.
    pub clamped: bool,
}

/// `τ = T_N / T_P`, clamped to `[0, 1]`.
pub fn alive_fraction(total_alive_seconds: u64, protocol_time: u64) -> Result<AliveFraction> {
    if protocol_time == 0 {
        return Err(TokenomicsError::ZeroProtocolTime);
    }
    if total_alive_seconds > protocol_time {
        return Ok(AliveFraction { value: 1.0, clamped: true });
    }
    Ok(AliveFraction {
        value: total_alive_seconds as f64 / protocol_time as f64,
        clamped: false,
    })
}

pub fn clamp_power(power: f64) -> f64 {
    power.clamp(-POWER_BOUND, POWER_BOUND)
}

/// `I = exp(power) × τ`.
pub fn node_power_index(power: f64, tau: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&tau), "alive fraction {tau} outside [0, 1]");
    clamp_power(power).exp() * tau
}

/// Which series feeds the power score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSource {
    /// Configured per-epoch measured scores.
    #[default]
    Measured,
    /// The weighted declared capability score.
    Capability,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeActivity {
    pub deed_id: DeedId,
    pub total_alive_seconds: u64,
    pub power_score_per_epoch: BTreeMap<u64, f64>,
    pub declared_capability: Capability,
}

impl NodeActivity {
    pub fn new(deed_id: DeedId, declared_capability: Capability) -> Self {
        NodeActivity {
            deed_id,
            total_alive_seconds: 0,
            power_score_per_epoch: BTreeMap::new(),
            declared_capability,
        }
    }

    /// Power for `epoch`; epochs without an entry score zero.
    pub fn power_at(&self, epoch: u64) -> f64 {
        self.power_score_per_epoch.get(&epoch).copied().unwrap_or(0.0)
    }

    /// Sets the score for `epoch ≤ current_epoch`. Returns whether it was clamped.
    pub fn set_power(&mut self, epoch: u64, value: f64, current_epoch: u64) -> Result<bool> {
        if epoch > current_epoch {
            return Err(TokenomicsError::EpochMismatch {
                current: current_epoch,
                got: epoch,
            });
        }
        if !value.is_finite() {
            return Err(TokenomicsError::NonFinitePower(value));
        }
        let clamped = clamp_power(value);
        self.power_score_per_epoch.insert(epoch, clamped);
        Ok(clamped != value)
    }
}

/// One node's evaluated claim at epoch close.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeShare {
    pub deed_id: DeedId,
    pub power: f64,
    pub alive_fraction: AliveFraction,
    pub power_index: f64,
    pub share: f64,
}

fn check_unique(active: &[NodeActivity]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for a in active {
        if !seen.insert(&a.deed_id) {
            return Err(TokenomicsError::DuplicateActive(a.deed_id.clone()));
        }
    }
    Ok(())
}

/// Shares of every node in `active` for `cfg.current_epoch`.
pub fn compute_shares(active: &[NodeActivity], cfg: &EpochConfig) -> Result<Vec<NodeShare>> {
    check_unique(active)?;
    let max_alive = total_protocol_time(cfg)?;
    let epoch = cfg.current_epoch;
    let mut evaluated = Vec::with_capacity(active.len());
    let mut fleet_power = 0.0;
    for node in active {
        let tau = alive_fraction(node.total_alive_seconds, max_alive)?;
        let power = clamp_power(node.power_at(epoch));
        let index = node_power_index(power, tau.value);
        fleet_power += index;
        evaluated.push((node, power, tau, index));
    }
    if fleet_power <= 0.0 {
        return Err(TokenomicsError::NoEligibleNodes);
    }
    Ok(evaluated
        .into_iter()
        .map(|(node, power, tau, index)| NodeShare {
            deed_id: node.deed_id.clone(),
            power,
            alive_fraction: tau,
            power_index: index,
            share: index / fleet_power,
        })
        .collect())
}

/// Pool share of `target`: its power index over the fleet's summed index.
pub fn alloc_share(target: &DeedId, active: &[NodeActivity], cfg: &EpochConfig) -> Result<f64> {
    let max_alive = total_protocol_time(cfg)?;
    let epoch = cfg.current_epoch;
    let node = active
        .iter()
        .find(|a| &a.deed_id == target)
        .ok_or_else(|| TokenomicsError::TargetNotActive(target.clone()))?;
    check_unique(active)?;
    let alive = alive_fraction(node.total_alive_seconds, max_alive)?.value;
    let npi = node_power_index(node.power_at(epoch), alive);
    let mut fleet_power = 0.0;
    for x in active {
        let o = alive_fraction(x.total_alive_seconds, max_alive)?.value;
        fleet_power += node_power_index(x.power_at(epoch), o);
    }
    if fleet_power <= 0.0 {
        return Err(TokenomicsError::NoEligibleNodes);
    }
    Ok(npi / fleet_power)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationEntry {
    pub deed_id: DeedId,
    pub share: f64,
    pub amount: Token,
    pub power: f64,
    pub alive_fraction: f64,
    pub alive_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardAllocation {
    pub epoch: u64,
    pub entries: Vec<AllocationEntry>,
}

impl RewardAllocation {
    pub fn total(&self) -> Token {
        self.entries.iter().map(|e| &e.amount).sum()
    }

    pub fn share_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.share).sum()
    }

    pub fn entry(&self, deed: &DeedId) -> Option<&AllocationEntry> {
        self.entries.iter().find(|e| &e.deed_id == deed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloverReason {
    NoActiveNodes,
    NoEligibleNodes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EpochDistribution {
    Allocated(RewardAllocation),
    /// Nothing could be paid out; the snapshot stays in the pool.
    RolledOver { epoch: u64, amount: Token, reason: RolloverReason },
}

/// Splits `pool_snapshot` among `active` in one pass.
///
/// Each amount is `snapshot × share` computed exactly; the rounding residue
/// `snapshot − Σ amounts` goes to the highest-share node, ties broken by the
/// lowest deed id. Nodes with zero alive fraction get nothing.
pub fn distribute_epoch_rewards(
    pool_snapshot: &Token,
    active: &[NodeActivity],
    cfg: &EpochConfig,
) -> Result<EpochDistribution> {
    let epoch = cfg.current_epoch;
    if active.is_empty() {
        return Ok(EpochDistribution::RolledOver {
            epoch,
            amount: pool_snapshot.clone(),
            reason: RolloverReason::NoActiveNodes,
        });
    }
    let shares = match compute_shares(active, cfg) {
        Ok(s) => s,
        Err(TokenomicsError::NoEligibleNodes) => {
            return Ok(EpochDistribution::RolledOver {
                epoch,
                amount: pool_snapshot.clone(),
                reason: RolloverReason::NoEligibleNodes,
            })
        }
        Err(e) => return Err(e),
    };

    let mut entries = Vec::with_capacity(shares.len());
    for s in &shares {
        let amount = if s.alive_fraction.value > 0.0 {
            pool_snapshot.mul_share(s.share)?
        } else {
            Token::zero()
        };
        entries.push(AllocationEntry {
            deed_id: s.deed_id.clone(),
            share: s.share,
            amount,
            power: s.power,
            alive_fraction: s.alive_fraction.value,
            alive_clamped: s.alive_fraction.clamped,
        });
    }

    let top = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.alive_fraction > 0.0)
        .max_by(|(_, a), (_, b)| {
            a.share
                .total_cmp(&b.share)
                .then_with(|| b.deed_id.cmp(&a.deed_id))
        })
        .map(|(i, _)| i)
        .expect("at least one node has positive alive fraction");

    let assigned: Token = entries.iter().map(|e| &e.amount).sum();
    let residue = pool_snapshot.as_rational() - assigned.as_rational();
    let adjusted = entries[top].amount.as_rational() + residue;
    entries[top].amount = Token::from_rational(adjusted)?;

    Ok(EpochDistribution::Allocated(RewardAllocation { epoch, entries }))
}

/// A node deed: identity and token balance.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDeed {
    pub deed_id: DeedId,
    pub owner_key: PublicKey,
    pub balance: Token,
    pub registered_epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyOutcome {
    pub previous: f64,
    pub updated: f64,
    pub clamped: bool,
}

/// All deeds and their activity, keyed by deed id.
#[derive(Debug, Clone, Default)]
pub struct DeedRegistry {
    deeds: BTreeMap<DeedId, NodeDeed>,
    activity: BTreeMap<DeedId, NodeActivity>,
}

impl DeedRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, deed: NodeDeed, capability: Capability) -> Result<()> {
        if self.deeds.contains_key(&deed.deed_id) {
            return Err(TokenomicsError::DuplicateDeed(deed.deed_id));
        }
        self.activity
            .insert(deed.deed_id.clone(), NodeActivity::new(deed.deed_id.clone(), capability));
        self.deeds.insert(deed.deed_id.clone(), deed);
        Ok(())
    }

    pub fn contains(&self, id: &DeedId) -> bool {
        self.deeds.contains_key(id)
    }

    pub fn deed(&self, id: &DeedId) -> Result<&NodeDeed> {
        self.deeds.get(id).ok_or_else(|| TokenomicsError::UnknownDeed(id.clone()))
    }

    pub fn deeds(&self) -> impl Iterator<Item = &NodeDeed> {
        self.deeds.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &DeedId> {
        self.deeds.keys()
    }

    pub fn balance(&self, id: &DeedId) -> Result<&Token> {
        Ok(&self.deed(id)?.balance)
    }

    pub fn credit(&mut self, id: &DeedId, amount: &Token) -> Result<()> {
        let deed = self
            .deeds
            .get_mut(id)
            .ok_or_else(|| TokenomicsError::UnknownDeed(id.clone()))?;
        deed.balance += amount;
        Ok(())
    }

    pub fn debit(&mut self, id: &DeedId, amount: &Token) -> Result<()> {
        let deed = self
            .deeds
            .get_mut(id)
            .ok_or_else(|| TokenomicsError::UnknownDeed(id.clone()))?;
        deed.balance = deed
            .balance
            .checked_sub(amount)
            .ok_or_else(|| {
                TokenomicsError::InsufficientBalance(Box::new(Shortfall {
                    deed: id.clone(),
                    balance: deed.balance.clone(),
                    required: amount.clone(),
                }))
            })?;
        Ok(())
    }

    pub fn total_balance(&self) -> Token {
        self.deeds.values().map(|d| &d.balance).sum()
    }

    pub fn activity(&self, id: &DeedId) -> Result<&NodeActivity> {
        self.activity.get(id).ok_or_else(|| TokenomicsError::UnknownDeed(id.clone()))
    }

    pub fn activity_mut(&mut self, id: &DeedId) -> Result<&mut NodeActivity> {
        self.activity
            .get_mut(id)
            .ok_or_else(|| TokenomicsError::UnknownDeed(id.clone()))
    }

    /// Activity snapshots in deed-id order.
    pub fn activities(&self) -> Vec<NodeActivity> {
        self.activity.values().cloned().collect()
    }

    /// Lowers the power score of `id` in `epoch` by `delta`, clamped at the bound.
    pub fn apply_penalty(&mut self, id: &DeedId, epoch: u64, delta: f64, current_epoch: u64) -> Result<PenaltyOutcome> {
        if epoch != current_epoch {
            return Err(TokenomicsError::EpochMismatch {
                current: current_epoch,
                got: epoch,
            });
        }
        let act = self.activity_mut(id)?;
        let previous = act.power_at(epoch);
        let clamped = act.set_power(epoch, previous - delta, current_epoch)?;
        Ok(PenaltyOutcome {
            previous,
            updated: act.power_at(epoch),
            clamped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(epoch: u64) -> EpochConfig {
        EpochConfig::at_epoch(3600, 0, epoch).unwrap()
    }

    fn node(id: &str, power: f64, alive: u64, epoch: u64) -> NodeActivity {
        let mut a = NodeActivity::new(DeedId::new(id), Capability::default());
        a.total_alive_seconds = alive;
        a.set_power(epoch, power, epoch).unwrap();
        a
    }

    #[test]
    fn protocol_time() {
        assert_eq!(total_protocol_time(&cfg(24)), Ok(86400));
        assert_eq!(total_protocol_time(&EpochConfig::at_epoch(1, 0, 1).unwrap()), Ok(1));
        assert_eq!(total_protocol_time(&cfg(0)), Err(TokenomicsError::GenesisEpoch));
        assert_eq!(EpochConfig::new(0, 0), Err(TokenomicsError::ZeroEpochSeconds));
    }

    #[test]
    fn alive_fraction_cases() {
        assert_eq!(alive_fraction(43200, 86400).unwrap().value, 0.5);
        assert_eq!(alive_fraction(86400, 86400).unwrap(), AliveFraction { value: 1.0, clamped: false });
        assert_eq!(alive_fraction(90000, 86400).unwrap(), AliveFraction { value: 1.0, clamped: true });
        assert_eq!(alive_fraction(1, 0), Err(TokenomicsError::ZeroProtocolTime));
    }

    #[test]
    fn power_index_cases() {
        assert_eq!(node_power_index(0.0, 1.0), 1.0);
        assert_eq!(node_power_index(0.0, 0.0), 0.0);
        // e^-1 / 2, 40-digit reference 0.18393972058572116079776188508073...
        assert!((node_power_index(-1.0, 0.5) - 0.183_939_720_585_721_16).abs() < 1e-16);
        assert!(node_power_index(-50.0, 1e-9) > 0.0);
        assert_eq!(node_power_index(900.0, 1.0), 50f64.exp());
    }

    #[test]
    fn sole_and_symmetric_shares() {
        let c = cfg(1);
        let solo = [node("a", 3.7, 3600, 1)];
        assert_eq!(alloc_share(&DeedId::new("a"), &solo, &c), Ok(1.0));
        let pair = [node("a", 0.2, 1800, 1), node("b", 0.2, 1800, 1)];
        assert_eq!(alloc_share(&DeedId::new("a"), &pair, &c), Ok(0.5));
        assert_eq!(alloc_share(&DeedId::new("b"), &pair, &c), Ok(0.5));
    }

    #[test]
    fn share_errors() {
        let c = cfg(1);
        let dead = [node("a", 1.0, 0, 1), node("b", 2.0, 0, 1)];
        assert_eq!(alloc_share(&DeedId::new("a"), &dead, &c), Err(TokenomicsError::NoEligibleNodes));
        assert!(matches!(
            alloc_share(&DeedId::new("z"), &dead, &c),
            Err(TokenomicsError::TargetNotActive(_))
        ));
        let dup = [node("a", 1.0, 10, 1), node("a", 1.0, 10, 1)];
        assert!(matches!(compute_shares(&dup, &c), Err(TokenomicsError::DuplicateActive(_))));
    }

    #[test]
    fn distribution_of_zero_pool() {
        let c = cfg(1);
        let nodes = [node("a", 1.0, 3600, 1), node("b", -1.0, 100, 1)];
        let EpochDistribution::Allocated(alloc) = distribute_epoch_rewards(&Token::zero(), &nodes, &c).unwrap() else {
            panic!("expected allocation");
        };
        assert!(alloc.entries.iter().all(|e| e.amount.is_zero()));
    }

    #[test]
    fn distribution_symmetric_and_exact() {
        let c = cfg(1);
        let nodes = [node("a", 0.0, 3600, 1), node("b", 0.0, 3600, 1)];
        let pool = Token::from_integer(100);
        let EpochDistribution::Allocated(alloc) = distribute_epoch_rewards(&pool, &nodes, &c).unwrap() else {
            panic!("expected allocation");
        };
        assert_eq!(alloc.entries[0].amount, Token::from_integer(50));
        assert_eq!(alloc.entries[1].amount, Token::from_integer(50));
        assert_eq!(alloc.total(), pool);
    }

    #[test]
    fn residue_goes_to_top_share_and_zero_alive_gets_nothing() {
        let c = cfg(1);
        let nodes = [
            node("a", 0.0, 1200, 1),
            node("b", 0.0, 1200, 1),
            node("c", 0.0, 1200, 1),
            node("d", 9.0, 0, 1),
        ];
        let pool = Token::from_integer(1);
        let EpochDistribution::Allocated(alloc) = distribute_epoch_rewards(&pool, &nodes, &c).unwrap() else {
            panic!("expected allocation");
        };
        assert_eq!(alloc.total(), pool);
        assert!(alloc.entry(&DeedId::new("d")).unwrap().amount.is_zero());
        // Ties on share resolve to the lowest deed id.
        let a = &alloc.entry(&DeedId::new("a")).unwrap().amount;
        let b = &alloc.entry(&DeedId::new("b")).unwrap().amount;
        assert!(a >= b);
    }

    #[test]
    fn rollover_cases() {
        let c = cfg(2);
        let pool = Token::from_integer(7);
        assert!(matches!(
            distribute_epoch_rewards(&pool, &[], &c),
            Ok(EpochDistribution::RolledOver { reason: RolloverReason::NoActiveNodes, .. })
        ));
        let dead = [node("a", 0.0, 0, 2)];
        assert!(matches!(
            distribute_epoch_rewards(&pool, &dead, &c),
            Ok(EpochDistribution::RolledOver { reason: RolloverReason::NoEligibleNodes, .. })
        ));
    }

    fn registry_with(id: &str, power: f64) -> DeedRegistry {
        let mut r = DeedRegistry::new();
        let key = crate::crypto::SigningKey::derive("test", id.as_bytes()).public_key();
        r.register(
            NodeDeed {
                deed_id: DeedId::new(id),
                owner_key: key,
                balance: Token::from_integer(10),
                registered_epoch: 0,
            },
            Capability::default(),
        )
        .unwrap();
        r.activity_mut(&DeedId::new(id)).unwrap().set_power(3, power, 3).unwrap();
        r
    }

    #[test]
    fn penalties() {
        let id = DeedId::new("n");
        let mut r = registry_with("n", 1.0);
        assert_eq!(r.apply_penalty(&id, 3, 2.0, 3).unwrap().updated, -1.0);

        let mut r = registry_with("n", -50.0);
        let out = r.apply_penalty(&id, 3, 10.0, 3).unwrap();
        assert_eq!(out.updated, -50.0);
        assert!(out.clamped);

        let mut r = registry_with("n", 0.5);
        let out = r.apply_penalty(&id, 3, 0.0, 3).unwrap();
        assert_eq!(out.updated, 0.5);
        assert!(!out.clamped);

        assert!(matches!(
            r.apply_penalty(&DeedId::new("x"), 3, 1.0, 3),
            Err(TokenomicsError::UnknownDeed(_))
        ));
        assert!(matches!(
            r.apply_penalty(&id, 2, 1.0, 3),
            Err(TokenomicsError::EpochMismatch { .. })
        ));
    }

    #[test]
    fn debit_guards_balance() {
        let id = DeedId::new("n");
        let mut r = registry_with("n", 0.0);
        assert!(r.debit(&id, &Token::from_integer(11)).is_err());
        assert_eq!(r.balance(&id).unwrap(), &Token::from_integer(10));
        r.debit(&id, &Token::from_integer(10)).unwrap();
        assert!(r.balance(&id).unwrap().is_zero());
    }
}
