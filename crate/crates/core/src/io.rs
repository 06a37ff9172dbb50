//! JSON forms of exact laws, kernels and partitions.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactdist::Dist;
use crate::kernels::StochasticKernel;

/// An exact rational as a `num`/`den` pair of decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for RationalJson {
    fn from(r: &BigRational) -> Self {
        Self { num: r.numer().to_string(), den: r.denom().to_string() }
    }
}

impl TryFrom<&RationalJson> for BigRational {
    type Error = Error;

    fn try_from(r: &RationalJson) -> Result<Self> {
        let parse = |s: &str| s.parse::<BigInt>().map_err(|e| Error::Malformed(format!("{s:?}: {e}")));
        let den = parse(&r.den)?;
        if den == BigInt::from(0) {
            return Err(Error::Malformed("zero denominator".into()));
        }
        Ok(BigRational::new(parse(&r.num)?, den))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistEntry {
    pub x: u64,
    #[serde(flatten)]
    pub w: RationalJson,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistJson {
    pub label: String,
    pub entries: Vec<DistEntry>,
    /// Digits used for any derived enclosure; absent for purely exact data.
    #[serde(default)]
    pub precision_digits: Option<u32>,
}

impl DistJson {
    pub fn from_dist(d: &Dist<BigRational>, precision_digits: Option<u32>) -> Self {
        Self {
            label: d.label().to_string(),
            entries: d.entries().map(|(x, w)| DistEntry { x, w: w.into() }).collect(),
            precision_digits,
        }
    }

    pub fn to_dist(&self) -> Result<Dist<BigRational>> {
        let support = self.entries.iter().map(|e| e.x).collect();
        let weights = self.entries.iter().map(|e| BigRational::try_from(&e.w)).collect::<Result<_>>()?;
        Dist::new(self.label.clone(), support, weights)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelCol {
    pub to: i64,
    #[serde(flatten)]
    pub w: RationalJson,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelRow {
    pub from: i64,
    pub cols: Vec<KernelCol>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelJson {
    pub label: String,
    pub states: Vec<i64>,
    pub rows: Vec<KernelRow>,
}

impl KernelJson {
    pub fn from_kernel(k: &StochasticKernel<BigRational>) -> Self {
        let states = k.states().to_vec();
        let rows = k
            .rows()
            .iter()
            .enumerate()
            .map(|(i, row)| KernelRow {
                from: states[i],
                cols: row.iter().map(|(j, w)| KernelCol { to: states[*j], w: w.into() }).collect(),
            })
            .collect();
        Self { label: k.label().to_string(), states, rows }
    }

    pub fn to_kernel(&self) -> Result<StochasticKernel<BigRational>> {
        let pos = |s: i64| {
            self.states
                .iter()
                .position(|&v| v == s)
                .ok_or_else(|| Error::Malformed(format!("state {s} is not listed")))
        };
        let mut rows = vec![Vec::new(); self.states.len()];
        for r in &self.rows {
            let i = pos(r.from)?;
            for c in &r.cols {
                rows[i].push((pos(c.to)?, BigRational::try_from(&c.w)?));
            }
            rows[i].sort_by_key(|(j, _)| *j);
        }
        StochasticKernel::new(self.label.clone(), self.states.clone(), rows)
    }
}

/// Block label to the states it contains.
pub type PartitionJson = BTreeMap<i64, Vec<i64>>;

/// Groups `states` by `block_of`.
pub fn partition_json(states: &[i64], block_of: impl Fn(i64) -> i64) -> PartitionJson {
    let mut out = PartitionJson::new();
    for &s in states {
        out.entry(block_of(s)).or_default().push(s);
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Error::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::fixed_point_pmf;
    use crate::kernels::{build_penta, p_closedform};

    #[test]
    fn dist_round_trip() {
        let d = fixed_point_pmf(5).unwrap();
        let j = DistJson::from_dist(&d, Some(50));
        let text = to_json_string(&j).unwrap();
        assert!(text.contains("\"num\""));
        let back: DistJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_dist().unwrap(), d);
    }

    #[test]
    fn kernel_round_trip() {
        let k = build_penta(&p_closedform(6).unwrap()).unwrap();
        let j = KernelJson::from_kernel(&k);
        let back: KernelJson = serde_json::from_str(&to_json_string(&j).unwrap()).unwrap();
        assert_eq!(back.to_kernel().unwrap(), k);
    }

    #[test]
    fn malformed_inputs() {
        let bad = RationalJson { num: "1".into(), den: "0".into() };
        assert!(BigRational::try_from(&bad).is_err());
        assert!(serde_json::from_str::<DistJson>(r#"{"label":"a","entries":[],"extra":1}"#).is_err());
    }

    #[test]
    fn partitions_group_states() {
        let p = partition_json(&[0, 1, 2, 3], |s| s % 2);
        assert_eq!(p[&0], vec![0, 2]);
        assert_eq!(p[&1], vec![1, 3]);
    }
}
