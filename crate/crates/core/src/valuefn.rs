//! Masked value function over coalitions of (possibly grouped) features.

use std::fmt;

use crate::error::{Error, Result};
use crate::network::Network;

/// A coalition as a Boolean vector over the effective features.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    /// Bit `j` of the mask is bit `j` of `code`.
    pub fn from_bits(code: u64, len: usize) -> Self {
        Self((0..len).map(|j| code >> j & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Copy of the mask with bit `i` set (`S ∪ {i}`).
    pub fn insert(&self, i: usize) -> Result<Mask> {
        if i >= self.len() {
            return Err(Error::Index {
                index: i,
                len: self.len(),
            });
        }
        let mut bits = self.0.clone();
        bits[i] = true;
        Ok(Mask(bits))
    }

    pub fn as_reals(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A partition of the input coordinates into groups that enter or leave a
/// coalition together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Groups {
    sets: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl Groups {
    /// `sets` holds 0-based input indices; together they must cover `0..n` exactly once.
    pub fn new(sets: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut owner = vec![usize::MAX; n];
        for (g, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Problem(format!("group {} is empty", g + 1)));
            }
            for &j in set {
                if j >= n {
                    return Err(Error::Problem(format!(
                        "group {} references input {} but there are only {n} inputs",
                        g + 1,
                        j + 1
                    )));
                }
                if owner[j] != usize::MAX {
                    return Err(Error::Problem(format!(
                        "input {} appears in more than one group",
                        j + 1
                    )));
                }
                owner[j] = g;
            }
        }
        if let Some(j) = owner.iter().position(|&g| g == usize::MAX) {
            return Err(Error::Problem(format!("input {} is not in any group", j + 1)));
        }
        Ok(Self { sets, owner })
    }

    /// Parses a JSON array of arrays of 1-based indices.
    pub fn from_json(source: &str, n: usize) -> Result<Self> {
        let one_based: Vec<Vec<usize>> = serde_json::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
        let mut sets = Vec::with_capacity(one_based.len());
        for set in one_based {
            if set.contains(&0) {
                return Err(Error::Problem("group indices are 1-based".into()));
            }
            sets.push(set.into_iter().map(|j| j - 1).collect());
        }
        Self::new(sets, n)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// Group containing input coordinate `j`.
    pub fn owner(&self, j: usize) -> usize {
        self.owner[j]
    }
}

/// `mask * x + (1 - mask) * z`, with the mask lifted through `groups` when present.
pub fn mask_apply(mask: &Mask, x: &[f64], z: &[f64], groups: Option<&Groups>) -> Result<Vec<f64>> {
    if x.len() != z.len() {
        return Err(Error::Dimension(format!(
            "explicand has length {} but background row has length {}",
            x.len(),
            z.len()
        )));
    }
    let g = groups.map_or(x.len(), Groups::len);
    if mask.len() != g {
        return Err(Error::Dimension(format!(
            "mask has length {}, expected {g}",
            mask.len()
        )));
    }
    Ok((0..x.len())
        .map(|j| {
            let bit = groups.map_or(j, |gr| gr.owner(j));
            if mask.get(bit) {
                x[j]
            } else {
                z[j]
            }
        })
        .collect())
}

/// `z + (x − z)·mu`, returning `x` and `z` exactly at the Boolean endpoints.
pub(crate) fn blend(x: f64, z: f64, mu: f64) -> f64 {
    if mu == 1.0 {
        x
    } else if mu == 0.0 {
        z
    } else {
        z + (x - z) * mu
    }
}

/// How absent features are filled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// Average over every background row.
    Marginal,
    /// A single reference row.
    Baseline,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Marginal => "marginal",
            ValueKind::Baseline => "baseline",
        }
    }
}

/// Everything needed to evaluate `v(S)` for one explicand and output.
#[derive(Debug, Clone)]
pub struct AttributionProblem {
    net: Network,
    explicand: Vec<f64>,
    background: Vec<Vec<f64>>,
    kind: ValueKind,
    target: usize,
    groups: Option<Groups>,
}

impl AttributionProblem {
    /// `target` is a 0-based output index.
    pub fn new(
        net: Network,
        explicand: Vec<f64>,
        background: Vec<Vec<f64>>,
        kind: ValueKind,
        target: usize,
        groups: Option<Groups>,
    ) -> Result<Self> {
        let n = net.input_dim();
        if explicand.len() != n {
            return Err(Error::Dimension(format!(
                "explicand has {} features, network expects {n}",
                explicand.len()
            )));
        }
        if background.is_empty() {
            return Err(Error::Problem("background needs at least one row".into()));
        }
        if kind == ValueKind::Baseline && background.len() != 1 {
            return Err(Error::Problem("baseline requires exactly one background row".into()));
        }
        for (r, row) in background.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "background row {} has {} features, network expects {n}",
                    r + 1,
                    row.len()
                )));
            }
        }
        if explicand
            .iter()
            .chain(background.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Value("explicand and background must be finite".into()));
        }
        if target >= net.output_dim() {
            return Err(Error::Problem(format!(
                "target output {} out of range for {} outputs",
                target + 1,
                net.output_dim()
            )));
        }
        if let Some(gr) = &groups {
            if gr.owner.len() != n {
                return Err(Error::Dimension("groups do not cover the inputs".into()));
            }
        }
        Ok(Self {
            net,
            explicand,
            background,
            kind,
            target,
            groups,
        })
    }

    /// Shorthand for a single-row baseline problem without groups.
    pub fn baseline(net: Network, explicand: Vec<f64>, baseline: Vec<f64>, target: usize) -> Result<Self> {
        Self::new(net, explicand, vec![baseline], ValueKind::Baseline, target, None)
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn explicand(&self) -> &[f64] {
        &self.explicand
    }

    pub fn background(&self) -> &[Vec<f64>] {
        &self.background
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn groups(&self) -> Option<&Groups> {
        self.groups.as_ref()
    }

    /// Number of effective (possibly grouped) features `g`.
    pub fn num_features(&self) -> usize {
        self.groups.as_ref().map_or(self.explicand.len(), Groups::len)
    }

    /// Effective feature controlling input coordinate `j`.
    pub fn feature_of_input(&self, j: usize) -> usize {
        self.groups.as_ref().map_or(j, |g| g.owner(j))
    }

    /// `f(x)_k`, the output being attributed.
    pub fn output_at_explicand(&self) -> f64 {
        self.net.forward_unchecked(&self.explicand)[self.target]
    }

    /// Network input for a relaxed mask `mu ∈ [0,1]^g` and background row `z`.
    pub fn lifted_input(&self, mu: &[f64], z: &[f64]) -> Vec<f64> {
        self.explicand
            .iter()
            .zip(z)
            .enumerate()
            .map(|(j, (&xj, &zj))| blend(xj, zj, mu[self.feature_of_input(j)]))
            .collect()
    }

    /// `v(mu)` on the relaxed mask domain; agrees with [`Self::value`] on Boolean masks.
    pub fn value_relaxed(&self, mu: &[f64]) -> Result<f64> {
        self.check_len(mu.len())?;
        let total: f64 = self
            .background
            .iter()
            .map(|z| self.net.forward_unchecked(&self.lifted_input(mu, z))[self.target])
            .sum();
        Ok(total / self.background.len() as f64)
    }

    /// Mean network output with coalition `mask` taken from the explicand.
    pub fn value(&self, mask: &Mask) -> Result<f64> {
        self.check_len(mask.len())?;
        let mut total = 0.0;
        for z in &self.background {
            let input = mask_apply(mask, &self.explicand, z, self.groups.as_ref())?;
            total += self.net.forward_unchecked(&input)[self.target];
        }
        Ok(total / self.background.len() as f64)
    }

    /// `v(S ∪ {i}) − v(S)`; bit `i` must be clear.
    pub fn contribution(&self, i: usize, mask: &Mask) -> Result<f64> {
        self.check_len(mask.len())?;
        if i >= mask.len() {
            return Err(Error::Index {
                index: i,
                len: mask.len(),
            });
        }
        if mask.get(i) {
            return Err(Error::Precondition(format!("feature {i} is already in the coalition")));
        }
        Ok(self.value(&mask.insert(i)?)? - self.value(mask)?)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let g = self.num_features();
        if len != g {
            return Err(Error::Dimension(format!("mask has length {len}, expected {g}")));
        }
        Ok(())
    }
}
