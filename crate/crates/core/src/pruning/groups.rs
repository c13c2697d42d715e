//! Channel dependency analysis.
//!
//! A residual add forces its two operands to share one channel mask, so the
//! conv/dense layers producing those operands must be pruned identically.
//! Group discovery is a union-find over prunable layers, driven by walking
//! each activation's channel provenance through shape-preserving layers.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::nn::network::Network;
use crate::tensor::Scalar;

/// A set of prunable layers whose output channels share one mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DependencyGroup {
    /// Member layer indices.
    pub layers: BTreeSet<usize>,
    /// Channels are tied to the raw network input and must all be kept.
    pub locked: bool,
}

/// Partition the prunable layers into dependency groups. Every residual add
/// merges the producers of its two operands; all remaining prunable layers
/// form singleton groups.
pub fn dependency_groups<S: Scalar>(net: &Network<S>) -> Result<Vec<DependencyGroup>> {
    let layers = net.layers();
    let prunable: Vec<usize> =
        (0..layers.len()).filter(|&i| layers[i].spec.is_prunable()).collect();

    let mut uf = UnionFind::new(&prunable);
    // Provenance of each activation: which prunable layers define its
    // channel axis. `acts[0]` is the network input; `acts[i + 1]` is the
    // output of layer i.
    let mut provenance: Vec<Provenance> = Vec::with_capacity(layers.len() + 1);
    provenance.push(Provenance::input());

    for (i, layer) in layers.iter().enumerate() {
        let current = provenance[i].clone();
        let out = match &layer.spec {
            LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. } => Provenance::layer(i),
            LayerSpec::Relu
            | LayerSpec::MaxPool2d { .. }
            | LayerSpec::GlobalAvgPool
            | LayerSpec::Flatten => current,
            LayerSpec::ResidualAdd { source } => {
                let skip = provenance[*source + 1].clone();
                merge_operands(net, i, &current, &skip, &mut uf)?;
                current.merged_with(&skip)
            }
        };
        provenance.push(out);
    }

    Ok(uf.groups())
}

#[derive(Debug, Clone)]
struct Provenance {
    layers: BTreeSet<usize>,
    touches_input: bool,
}

impl Provenance {
    fn input() -> Self {
        Self { layers: BTreeSet::new(), touches_input: true }
    }
    fn layer(i: usize) -> Self {
        Self { layers: BTreeSet::from([i]), touches_input: false }
    }
    fn merged_with(&self, other: &Self) -> Self {
        Self {
            layers: self.layers.union(&other.layers).copied().collect(),
            touches_input: self.touches_input || other.touches_input,
        }
    }
}

fn merge_operands<S: Scalar>(
    net: &Network<S>,
    add_layer: usize,
    a: &Provenance,
    b: &Provenance,
    uf: &mut UnionFind,
) -> Result<()> {
    let members: Vec<usize> = a.layers.union(&b.layers).copied().collect();
    for pair in members.windows(2) {
        uf.union(pair[0], pair[1]);
    }
    // Equal channel counts across the group: the adds' shape validation
    // already guarantees equal activation shapes, but flattened operands of
    // unequal channel origin cannot share a per-channel mask.
    let counts: BTreeSet<usize> = members
        .iter()
        .map(|&i| net.layers()[i].spec.out_channels().expect("prunable member"))
        .collect();
    if counts.len() > 1 {
        return Err(Error::InvalidNetwork(format!(
            "residual-add at layer {add_layer} ties layers {members:?} with unequal channel \
             counts {counts:?}"
        )));
    }
    if a.touches_input || b.touches_input {
        for &m in &members {
            uf.lock(m);
        }
    }
    Ok(())
}

struct UnionFind {
    parent: BTreeMap<usize, usize>,
    locked: BTreeSet<usize>,
}

impl UnionFind {
    fn new(members: &[usize]) -> Self {
        Self { parent: members.iter().map(|&m| (m, m)).collect(), locked: BTreeSet::new() }
    }

    fn find(&mut self, x: usize) -> usize {
        let p = self.parent[&x];
        if p == x {
            return x;
        }
        let root = self.find(p);
        self.parent.insert(x, root);
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Lower index wins so group identity is deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent.insert(hi, lo);
        }
    }

    fn lock(&mut self, x: usize) {
        let root = self.find(x);
        self.locked.insert(root);
    }

    fn groups(&mut self) -> Vec<DependencyGroup> {
        let members: Vec<usize> = self.parent.keys().copied().collect();
        let mut by_root: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for m in members {
            let root = self.find(m);
            by_root.entry(root).or_default().insert(m);
        }
        by_root
            .into_iter()
            .map(|(root, layers)| DependencyGroup {
                layers,
                locked: self.locked.contains(&root),
            })
            .collect()
    }
}
