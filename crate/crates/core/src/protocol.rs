//! Multi-step drive protocols in the reduced model.
//!
//! A [`BranchTree`] follows every packet of the reduced model through a
//! piecewise-constant drive. At each step time a packet on branch `j` splits
//! into children on both branches of the new drive, with weights given by the
//! squared eigenvector overlaps at its current `z`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::{
    analysis::{detect_packets, Packet, PacketOptions},
    classifier::{classify, DynamicalClass},
    error::{Error, Result},
    model::{make_initial_state, DriveProtocol, InitialKind, SystemParams},
    solver::{evolve, photon_distribution, EvolveOptions},
    variational::{
        default_branch_dt, evolve_branch_from, overlap, turning_point, Branch, BranchOptions, BranchState,
        BranchTrajectory,
    },
};

pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_GUARD_RADIUS: f64 = 0.5;
pub const DEFAULT_SPLIT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub state: BranchState,
    pub parent: Option<usize>,
    /// Index of the drive level under which the node was created.
    pub step: usize,
    /// Branch indices along the path from the root, e.g. `2,1`.
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct TreeOptions {
    pub prune_threshold: f64,
    pub branch: BranchOptions,
    /// Drop leaves that run into the degeneracy disk instead of failing.
    pub drop_degenerate: bool,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self { prune_threshold: DEFAULT_PRUNE_THRESHOLD, branch: BranchOptions::default(), drop_degenerate: false }
    }
}

/// Outcome of splitting one leaf at a step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitRecord {
    pub parent: String,
    pub z_re: f64,
    pub z_im: f64,
    /// Weights handed to the branch-1 and branch-2 children before pruning.
    pub weights: [f64; 2],
    /// Branch index of a pruned child, if any.
    pub pruned: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub tau: f64,
    pub f_old: f64,
    pub f_new: f64,
    pub splits: Vec<SplitRecord>,
}

#[derive(Clone, Debug)]
pub struct BranchTree {
    params: SystemParams,
    nodes: Vec<TreeNode>,
    leaves: Vec<usize>,
    protocol: DriveProtocol,
    time: f64,
    opts: TreeOptions,
    steps: Vec<StepRecord>,
    max_abs2: f64,
    warnings: Vec<String>,
}

/// Packets of the reduced model present at `t = 0` for a given initial state.
pub fn initial_branches(kind: InitialKind) -> Vec<BranchState> {
    match kind {
        InitialKind::Ground => vec![BranchState::origin(Branch::One, 0.5), BranchState::origin(Branch::Two, 0.5)],
        InitialKind::LdsPlus => vec![BranchState::origin(Branch::One, 1.0)],
        InitialKind::LdsMinus => vec![BranchState::origin(Branch::Two, 1.0)],
    }
}

impl BranchTree {
    pub fn new(params: SystemParams, f0: f64, initial: InitialKind, opts: TreeOptions) -> Result<Self> {
        Self::from_roots(params, f0, initial_branches(initial), opts)
    }

    pub fn from_roots(params: SystemParams, f0: f64, roots: Vec<BranchState>, opts: TreeOptions) -> Result<Self> {
        let total: f64 = roots.iter().map(|r| r.weight).sum();
        if roots.is_empty() || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("root weights must sum to 1, got {total}")));
        }
        let max_abs2 = roots.iter().map(|r| r.z.norm_sqr()).fold(0.0, f64::max);
        let nodes: Vec<TreeNode> = roots
            .into_iter()
            .map(|state| TreeNode { label: state.branch.index().to_string(), state, parent: None, step: 0 })
            .collect();
        Ok(Self {
            params,
            leaves: (0..nodes.len()).collect(),
            nodes,
            protocol: DriveProtocol::constant(f0)?,
            time: 0.0,
            opts,
            steps: Vec::new(),
            max_abs2,
            warnings: Vec::new(),
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> + '_ {
        self.leaves.iter().map(|&i| &self.nodes[i])
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf(&self, label: &str) -> Option<&TreeNode> {
        self.leaves().find(|n| n.label == label)
    }

    pub fn protocol(&self) -> &DriveProtocol {
        &self.protocol
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn total_weight(&self) -> f64 {
        self.leaves().map(|n| n.state.weight).sum()
    }

    /// Largest `|z|²` reached by any node so far.
    pub fn max_abs2(&self) -> f64 {
        self.max_abs2
    }

    pub fn current_level(&self) -> f64 {
        self.protocol.last_level().f
    }

    /// Trajectory of one leaf from the current time over `duration` under the
    /// current drive, without modifying the tree.
    pub fn leaf_trajectory(&self, label: &str, duration: f64, opts: &BranchOptions) -> Result<BranchTrajectory> {
        let node = self
            .leaf(label)
            .ok_or_else(|| Error::InvalidParameter(format!("no live packet labelled {label}")))?;
        evolve_branch_from(&node.state, self.time, self.current_level(), &self.params, duration, opts)
    }

    /// Moves every leaf forward to `t` under the current drive level.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.time {
            return Err(Error::InvalidParameter(format!("cannot go back from t = {} to {t}", self.time)));
        }
        if t == self.time {
            return Ok(());
        }
        let f = self.current_level();
        let mut dropped = Vec::new();
        for &i in &self.leaves {
            let node = &mut self.nodes[i];
            match evolve_branch_from(&node.state, self.time, f, &self.params, t - self.time, &self.opts.branch) {
                Ok(traj) => {
                    self.max_abs2 = self.max_abs2.max(traj.max_abs2());
                    node.state = traj.last_state(node.state.weight);
                }
                Err(err @ Error::NearDegeneracy { .. }) if self.opts.drop_degenerate => {
                    let msg = format!("dropped packet {} (weight {:.3e}): {err}", node.label, node.state.weight);
                    log::warn!("{msg}");
                    self.warnings.push(msg);
                    dropped.push(i);
                }
                Err(err) => return Err(err),
            }
        }
        self.leaves.retain(|i| !dropped.contains(i));
        self.time = t;
        Ok(())
    }

    /// Switches the drive to `f_new` at `t_step`, splitting every leaf.
    pub fn apply_step(&mut self, f_new: f64, t_step: f64) -> Result<&StepRecord> {
        if t_step <= self.protocol.last_level().tau {
            return Err(Error::InvalidProtocol(format!(
                "step at {t_step} does not follow the previous step at {}",
                self.protocol.last_level().tau
            )));
        }
        self.advance_to(t_step)?;
        let f_old = self.current_level();
        self.protocol.push_step(t_step, f_new)?;
        let step = self.protocol.levels().len() - 1;
        let mut record = StepRecord { tau: t_step, f_old, f_new, splits: Vec::with_capacity(self.leaves.len()) };
        let mut new_leaves = Vec::with_capacity(2 * self.leaves.len());
        for &i in &self.leaves {
            let parent = self.nodes[i].clone();
            let s = &parent.state;
            let to_one = overlap(s.z, f_old, s.branch, f_new, Branch::One, &self.params)?;
            let w1 = s.weight * to_one;
            let mut weights = [w1, s.weight - w1];
            let mut pruned = None;
            let thr = self.opts.prune_threshold;
            if weights[0] < thr || weights[1] < thr {
                let drop = if weights[0] < weights[1] { 0 } else { 1 };
                weights[1 - drop] = s.weight;
                pruned = Some(drop as u8 + 1);
            }
            for (k, branch) in Branch::BOTH.into_iter().enumerate() {
                if pruned == Some(k as u8 + 1) {
                    continue;
                }
                let w = if pruned.is_some() { s.weight } else { weights[k] };
                self.nodes.push(TreeNode {
                    state: BranchState { branch, z: s.z, weight: w, phase: s.phase },
                    parent: Some(i),
                    step,
                    label: format!("{},{}", parent.label, branch.index()),
                });
                new_leaves.push(self.nodes.len() - 1);
            }
            record.splits.push(SplitRecord {
                parent: parent.label.clone(),
                z_re: s.z.re,
                z_im: s.z.im,
                weights: [w1, s.weight - w1],
                pruned,
            });
        }
        self.leaves = new_leaves;
        self.steps.push(record);
        Ok(self.steps.last().unwrap())
    }

    /// Replays a whole protocol from `t = 0` and advances to `t_end`.
    pub fn replay(
        protocol: &DriveProtocol,
        params: SystemParams,
        initial: InitialKind,
        t_end: f64,
        opts: TreeOptions,
    ) -> Result<Self> {
        let mut tree = Self::new(params, protocol.initial_level(), initial, opts)?;
        for step in &protocol.levels()[1..] {
            if step.tau > t_end {
                break;
            }
            tree.apply_step(step.f, step.tau)?;
        }
        tree.advance_to(t_end.max(tree.time))?;
        Ok(tree)
    }
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Sampling step of the split fraction; `None` uses the branch default.
    pub dt: Option<f64>,
    pub guard_radius: f64,
    pub tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { dt: None, guard_radius: DEFAULT_GUARD_RADIUS, tolerance: DEFAULT_SPLIT_TOLERANCE }
    }
}

/// Fraction of a packet on branch `j` of `f0` that moves to the other branch
/// when the drive switches to `f1` at `z`.
pub fn split_fraction(z: C64, branch: Branch, f0: f64, f1: f64, params: &SystemParams) -> Result<f64> {
    overlap(z, f0, branch, f1, branch.other(), params)
}

/// Time after which a window-search for split crossings gives up by default:
/// two periods of the slowest expected motion.
pub fn default_search_span(f: f64, params: &SystemParams) -> f64 {
    let resonant = 2.0 * TAU * f / (params.g() * params.g());
    if params.delta() > 0.0 {
        2.0 * (TAU / params.delta()).max(resonant)
    } else {
        2.0 * resonant
    }
}

/// First time in `window` at which switching the drive from `f0` to `f1`
/// moves the fraction `target` of `leaf` (valid at `t0`) to the other branch.
pub fn solve_step_time(
    leaf: &BranchState,
    t0: f64,
    f0: f64,
    f1: f64,
    target: f64,
    window: (f64, f64),
    params: &SystemParams,
    opts: &SearchOptions,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidParameter(format!("target overlap must lie in [0, 1], got {target}")));
    }
    let (lo, hi) = window;
    if !(lo >= t0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("search window ({lo}, {hi}) must start at or after {t0}")));
    }
    let dt = opts.dt.unwrap_or_else(|| default_branch_dt(f0, params));
    let bopts = BranchOptions { dt: Some(dt), stride: 1, floor: None };
    let traj = evolve_branch_from(leaf, t0, f0, params, hi - t0, &bopts)?;
    let s_at = |z: C64| split_fraction(z, leaf.branch, f0, f1, params);
    let start = traj.times.partition_point(|&t| t < lo);
    if start >= traj.times.len() {
        return Err(Error::NotAttained { target });
    }
    let (first_t, first_z) = (traj.times[start], traj.z[start]);
    if (s_at(first_z)? - target).abs() <= opts.tolerance {
        return Ok(first_t);
    }
    let mut guarded = false;
    let mut max_re = f64::NEG_INFINITY;
    let mut prev = s_at(first_z)? - target;
    for k in start..traj.times.len() - 1 {
        max_re = max_re.max(traj.z[k].re);
        let next = s_at(traj.z[k + 1])? - target;
        if prev * next <= 0.0 {
            let (tau, z) = bisect_crossing(&traj, k, leaf, f0, params, |z| Ok(s_at(z)? - target))?;
            if (s_at(z)? - target).abs() <= opts.tolerance {
                if (z - f1 / params.g()).norm() >= opts.guard_radius {
                    return Ok(tau);
                }
                guarded = true;
            }
        }
        prev = next;
    }
    if guarded {
        Err(Error::GuardBand { target })
    } else if max_re.max(traj.z.last().unwrap().re) <= f0 / params.g() {
        Err(Error::InfeasibleGeometry(format!(
            "packet {} never passes Re z > f0/g = {} before t = {hi}; the overlap stays small",
            leaf.branch.index(),
            f0 / params.g()
        )))
    } else {
        Err(Error::NotAttained { target })
    }
}

/// Refines a sign change of `g(z(t))` between samples `k` and `k + 1` by
/// bisection, re-integrating from sample `k`.
fn bisect_crossing(
    traj: &BranchTrajectory,
    k: usize,
    leaf: &BranchState,
    f: f64,
    params: &SystemParams,
    g: impl Fn(C64) -> Result<f64>,
) -> Result<(f64, C64)> {
    let t_k = traj.times[k];
    let start = BranchState { branch: leaf.branch, z: traj.z[k], weight: leaf.weight, phase: traj.phase[k] };
    let z_at = |h: f64| -> Result<C64> {
        if h == 0.0 {
            return Ok(start.z);
        }
        let opts = BranchOptions { dt: Some(h), stride: 1, floor: None };
        Ok(*evolve_branch_from(&start, t_k, f, params, h, &opts)?.z.last().unwrap())
    };
    let (mut a, mut b) = (0.0, traj.times[k + 1] - t_k);
    let ga = g(z_at(a)?)?;
    for _ in 0..100 {
        if b - a <= 1e-12 * t_k.abs().max(1.0) {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(z_at(m)?)?;
        if gm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    let h = 0.5 * (a + b);
    Ok((t_k + h, z_at(h)?))
}

/// Real-axis crossings of a trajectory, located by inverse quadratic
/// interpolation of `Im z` over three neighbouring samples.
pub fn real_axis_events(traj: &BranchTrajectory) -> Vec<(f64, C64)> {
    let (t, z) = (&traj.times, &traj.z);
    let mut out = Vec::new();
    for k in 0..z.len().saturating_sub(1) {
        let (y0, y1) = (z[k].im, z[k + 1].im);
        if k == 0 && y0 == 0.0 {
            continue;
        }
        if !(y0 * y1 < 0.0 || (y1 == 0.0 && y0 != 0.0)) {
            continue;
        }
        // three samples around the crossing
        let j = if k + 2 < z.len() { k } else { k.saturating_sub(1) };
        let (ta, tb, tc) = (t[j], t[j + 1], t[(j + 2).min(t.len() - 1)]);
        let (ya, yb, yc) = (z[j].im, z[j + 1].im, z[(j + 2).min(z.len() - 1)].im);
        let lin = t[k] + (t[k + 1] - t[k]) * y0 / (y0 - y1);
        let root = if tc > tb {
            quadratic_root(ta, tb, tc, ya, yb, yc, t[k], t[k + 1]).unwrap_or(lin)
        } else {
            lin
        };
        let s = (root - t[k]) / (t[k + 1] - t[k]);
        out.push((root, z[k] + (z[k + 1] - z[k]) * s));
    }
    out
}

fn quadratic_root(ta: f64, tb: f64, tc: f64, ya: f64, yb: f64, yc: f64, lo: f64, hi: f64) -> Option<f64> {
    // Newton form y = ya + d1 (t − ta) + d2 (t − ta)(t − tb)
    let d1 = (yb - ya) / (tb - ta);
    let d2 = ((yc - yb) / (tc - tb) - d1) / (tc - ta);
    let (a, b, c) = (d2, d1 - d2 * (ta + tb), ya - d1 * ta + d2 * ta * tb);
    let in_range = |r: f64| r >= lo - 1e-12 && r <= hi + 1e-12;
    if a.abs() < 1e-300 {
        let r = -c / b;
        return in_range(r).then_some(r);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    [q / a, c / q].into_iter().find(|&r| in_range(r))
}

/// First real-axis crossing of `traj` after its start at which `|z|` is
/// smaller than at the neighbouring crossing.
pub fn lower_turning_point(traj: &BranchTrajectory) -> Option<(f64, C64)> {
    let ev = real_axis_events(traj);
    for i in 0..ev.len() {
        let here = ev[i].1.norm();
        let prev = if i > 0 { Some(ev[i - 1].1.norm()) } else { None };
        let next = ev.get(i + 1).map(|e| e.1.norm());
        let lower = match (prev, next) {
            (Some(p), Some(n)) => here < p && here < n,
            (None, Some(n)) => here < n,
            (Some(p), None) => here < p,
            (None, None) => false,
        };
        if lower {
            return Some(ev[i]);
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Successive splits, each timed by the target overlap.
    DirectSplit,
    /// Split into class D, return to class B at the lower turning point of
    /// the remaining packet, split again.
    ClassDReturn,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DirectSplit => "direct-split",
            Self::ClassDReturn => "class-D-return",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "direct-split" | "1" => Ok(Self::DirectSplit),
            "class-D-return" | "class-d-return" | "2" => Ok(Self::ClassDReturn),
            other => Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisTarget {
    pub strategy: Strategy,
    /// Packets present at the end, counting the branch-1 packet that a
    /// ground-state start carries from the beginning.
    pub n_packets: usize,
    /// Final weights of the `n_packets − 1` packets grown from the branch-2
    /// packet; empty means equal weights.
    pub weights: Vec<f64>,
    /// Drive levels in order; reused cyclically when more are needed.
    pub f_levels: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SynthesisOptions {
    pub search: SearchOptions,
    /// Search window length after each step; `None` uses
    /// [`default_search_span`].
    pub search_span: Option<f64>,
    pub tree: TreeOptions,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub protocol: DriveProtocol,
    /// Split fraction aimed for at each split step.
    pub targets: Vec<f64>,
    /// Reduced-model tree of the branch-2 sector at the last step.
    pub tree: BranchTree,
    pub warnings: Vec<String>,
}

/// Split targets `w_k / Σ_{j≥k} w_j` for all but the last weight.
pub fn split_targets(weights: &[f64]) -> Vec<f64> {
    let mut rest: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(weights.len().saturating_sub(1));
    for &w in &weights[..weights.len().saturating_sub(1)] {
        out.push(w / rest);
        rest -= w;
    }
    out
}

fn require_class(f: f64, params: &SystemParams, want: &[DynamicalClass], role: &str) -> Result<()> {
    let got = classify(f, params.delta(), params)?.label;
    if want.contains(&got) {
        Ok(())
    } else {
        let names: Vec<&str> = want.iter().map(|c| c.as_str()).collect();
        Err(Error::InfeasibleGeometry(format!(
            "{role} level f = {f} is in class {got}, expected {}",
            names.join(" or ")
        )))
    }
}

/// Builds a protocol that grows `n_packets − 1` packets with the requested
/// weights out of the branch-2 packet.
pub fn synthesize(target: &SynthesisTarget, params: &SystemParams, opts: &SynthesisOptions) -> Result<Synthesis> {
    if target.n_packets < 2 {
        return Err(Error::InvalidParameter(format!("n_packets must be >= 2, got {}", target.n_packets)));
    }
    let sector = target.n_packets - 1;
    let weights = if target.weights.is_empty() { vec![1.0 / sector as f64; sector] } else { target.weights.clone() };
    if weights.len() != sector {
        return Err(Error::InvalidParameter(format!(
            "expected {sector} weights for {} packets, got {}",
            target.n_packets,
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("weights must sum to 1, got {sum}")));
    }
    if target.f_levels.is_empty() || target.f_levels.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::InvalidParameter("f_levels must be a non-empty list of positive values".into()));
    }
    let targets = split_targets(&weights);
    let level = |i: usize| target.f_levels[i % target.f_levels.len()];
    let f0 = level(0);
    let mut tree = BranchTree::new(*params, f0, InitialKind::LdsMinus, opts.tree.clone())?;
    let mut warnings = Vec::new();
    let span = |f: f64| opts.search_span.unwrap_or_else(|| default_search_span(f, params));
    let mut active = "2".to_string();
    let mut next_level = 1;

    for (k, &s_target) in targets.iter().enumerate() {
        let f_old = tree.current_level();
        if target.strategy == Strategy::ClassDReturn && k > 0 {
            // return to class B at the lower turning point of the active packet
            let f_b = level(next_level);
            require_class(f_b, params, &[DynamicalClass::B], "return")?;
            let traj = tree.leaf_trajectory(&active, span(f_old), &opts.tree.branch)?;
            let (tau, z) = lower_turning_point(&traj).ok_or_else(|| {
                Error::InfeasibleGeometry(format!("packet {active} shows no lower turning point within the search window"))
            })?;
            let leak = split_fraction(z, Branch::Two, f_old, f_b, params)?;
            if leak > 1e-3 {
                warnings.push(format!("return step at t = {tau} moves {leak:.3e} of packet {active}"));
            }
            tree.apply_step(f_b, tau)?;
            active = pick_child(&tree, &active, Branch::Two)?;
            next_level += 1;
        }
        let f_from = tree.current_level();
        let f_to = level(next_level);
        match target.strategy {
            Strategy::DirectSplit => {
                require_class(f_from, params, &[DynamicalClass::B, DynamicalClass::D], "split source")?;
                require_class(f_to, params, &[DynamicalClass::B, DynamicalClass::D], "split target")?;
            }
            Strategy::ClassDReturn => {
                require_class(f_from, params, &[DynamicalClass::B], "split source")?;
                require_class(f_to, params, &[DynamicalClass::D], "split target")?;
            }
        }
        let leaf = tree.leaf(&active).expect("active packet is a leaf").state;
        let t0 = tree.time();
        let tau = solve_step_time(&leaf, t0, f_from, f_to, s_target, (t0, t0 + span(f_from)), params, &opts.search)?;
        tree.apply_step(f_to, tau)?;
        active = pick_child(&tree, &active, Branch::Two)?;
        next_level += 1;
    }
    Ok(Synthesis { protocol: tree.protocol().clone(), targets, tree, warnings })
}

fn pick_child(tree: &BranchTree, parent: &str, branch: Branch) -> Result<String> {
    let label = format!("{parent},{}", branch.index());
    if tree.leaf(&label).is_some() {
        Ok(label)
    } else {
        Err(Error::InfeasibleGeometry(format!("packet {parent} left no branch-{} child", branch.index())))
    }
}

/// Truncation that holds every packet of the reduced model: with `M` the
/// largest of `|z|²` over the unpruned replay (or the turning points for a
/// constant drive) and `(f_max/g)²`, `N = ⌈M⌉ + 8√⌈M⌉ + 20`.
///
/// The degeneracy point `z = f/g` is included because a small population
/// collects around it even when no packet passes nearby.
pub fn suggest_n_max(protocol: &DriveProtocol, params: &SystemParams, initial: InitialKind, t_end: f64) -> Result<usize> {
    let f0 = protocol.initial_level();
    let mut m: f64 = Branch::BOTH.iter().map(|&b| turning_point(b, f0, params).powi(2)).fold(0.0, f64::max);
    if protocol.levels().len() > 1 {
        let opts = TreeOptions { prune_threshold: 0.0, drop_degenerate: true, ..Default::default() };
        let tree = BranchTree::replay(protocol, *params, initial, t_end, opts)?;
        m = m.max(tree.max_abs2());
    }
    m = m.max((protocol.f_max() / params.g()).powi(2));
    let m = m.ceil();
    Ok((m + 8.0 * m.sqrt() + 20.0) as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    Reduced,
    Exact,
}

impl FromStr for ValidationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reduced" => Ok(Self::Reduced),
            "exact" => Ok(Self::Exact),
            other => Err(Error::InvalidParameter(format!("unknown validation mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub initial: InitialKind,
    pub t_end: f64,
    /// Times at which the exact run is searched for packets.
    pub report_times: Vec<f64>,
    pub n_max: Option<usize>,
    pub dt: Option<f64>,
    pub packets: PacketOptions,
    pub tree: TreeOptions,
}

impl ValidateOptions {
    pub fn new(t_end: f64) -> Self {
        Self {
            initial: InitialKind::Ground,
            t_end,
            report_times: vec![t_end],
            n_max: None,
            dt: None,
            packets: PacketOptions::default(),
            tree: TreeOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafReport {
    pub label: String,
    pub branch: u8,
    pub weight: f64,
    pub z_re: f64,
    pub z_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PacketSnapshot {
    pub t: f64,
    pub packets: Vec<Packet>,
    pub residue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactReport {
    pub n_max: usize,
    pub dt: f64,
    pub snapshots: Vec<PacketSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    pub leaves: Vec<LeafReport>,
    pub steps: Vec<StepRecord>,
    pub exact: Option<ExactReport>,
    pub warnings: Vec<String>,
}

/// Replays `protocol` in the reduced model and, in exact mode, integrates the
/// full model and counts packets at the report times. Failures are recorded
/// as warnings in the report.
pub fn validate_protocol(
    protocol: &DriveProtocol,
    params: &SystemParams,
    mode: ValidationMode,
    opts: &ValidateOptions,
) -> ValidationReport {
    let mut report = ValidationReport { mode, leaves: Vec::new(), steps: Vec::new(), exact: None, warnings: Vec::new() };
    match BranchTree::replay(protocol, *params, opts.initial, opts.t_end, opts.tree.clone()) {
        Ok(tree) => {
            report.leaves = tree
                .leaves()
                .map(|n| LeafReport {
                    label: n.label.clone(),
                    branch: n.state.branch.index(),
                    weight: n.state.weight,
                    z_re: n.state.z.re,
                    z_im: n.state.z.im,
                })
                .collect();
            report.steps = tree.steps().to_vec();
            report.warnings.extend(tree.warnings().iter().cloned());
        }
        Err(err) => report.warnings.push(format!("reduced replay failed: {err}")),
    }
    if mode == ValidationMode::Exact {
        match run_exact(protocol, params, opts) {
            Ok((exact, warnings)) => {
                report.exact = Some(exact);
                report.warnings.extend(warnings);
            }
            Err(err) => report.warnings.push(format!("exact run failed: {err}")),
        }
    }
    report
}

fn run_exact(protocol: &DriveProtocol, params: &SystemParams, opts: &ValidateOptions) -> Result<(ExactReport, Vec<String>)> {
    let n_max = match opts.n_max {
        Some(n) => n,
        None => suggest_n_max(protocol, params, opts.initial, opts.t_end)?,
    };
    let initial = make_initial_state(opts.initial, n_max)?;
    let mut eo = EvolveOptions::new(opts.t_end);
    eo.dt = opts.dt;
    eo.record_distribution = false;
    eo.snapshot_times = opts.report_times.clone();
    let traj = evolve(&initial, params, protocol, &eo)?;
    let snapshots = traj
        .snapshots
        .iter()
        .map(|s| {
            let r = detect_packets(&photon_distribution(s), &opts.packets);
            PacketSnapshot { t: s.time, packets: r.packets, residue: r.residue }
        })
        .collect();
    Ok((ExactReport { n_max, dt: traj.dt, snapshots }, traj.warnings))
}
