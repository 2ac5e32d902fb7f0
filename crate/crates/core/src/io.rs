//! JSON file formats and the seeded random instance generator.
//!
//! Numbers in instance files are JSON numbers whose decimal text is kept
//! verbatim, so rational mode reads `0.7` as exactly `7/10`. Multipliers and
//! probabilities additionally accept strings such as `"1/3"`.

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Number;

use crate::error::{Error, Result};
use crate::mechanisms::{allocate, TieRule};
use crate::model::{induce_bids, Allocation, AuctionInstance, Mechanism, MultiplierVector, TieBreakDistribution};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidderEntry {
    pub id: String,
    pub values: Vec<Number>,
}

/// On-disk instance. Field names and order are fixed by
/// `docs/instance.schema.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub ctrs: Vec<Number>,
    pub cap: Number,
    pub mechanism: Mechanism,
    #[serde(default)]
    pub self_pricing: bool,
    pub bidders: Vec<BidderEntry>,
}

fn field<T: Scalar>(n: &Number, path: impl FnOnce() -> String) -> Result<T> {
    T::parse(&n.to_string()).map_err(|_| Error::invalid(format!("{}: cannot read number {n}", path())))
}

fn number<T: Scalar>(x: &T) -> Result<Number> {
    let text = x
        .to_decimal()
        .ok_or_else(|| Error::invalid(format!("{} has no finite decimal expansion", x.render())))?;
    Number::from_str(&text).map_err(|_| Error::invalid(format!("cannot encode {text} as a JSON number")))
}

impl InstanceFile {
    pub fn to_instance<T: Scalar>(&self) -> Result<AuctionInstance<T>> {
        let ctrs = self
            .ctrs
            .iter()
            .enumerate()
            .map(|(k, c)| field(c, || format!("ctrs[{k}]")))
            .collect::<Result<Vec<T>>>()?;
        let cap = field(&self.cap, || "cap".to_string())?;
        let bidders = self
            .bidders
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let values = b
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| field(v, || format!("bidders[{i}].values[{j}]")))
                    .collect::<Result<Vec<T>>>()?;
                Ok((b.id.clone(), values))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AuctionInstance::new(bidders, ctrs, cap, self.mechanism)?.with_self_pricing(self.self_pricing))
    }

    pub fn from_instance<T: Scalar>(instance: &AuctionInstance<T>) -> Result<Self> {
        Ok(InstanceFile {
            ctrs: instance.ctrs().iter().map(number).collect::<Result<_>>()?,
            cap: number(instance.cap())?,
            mechanism: instance.mechanism(),
            self_pricing: instance.self_pricing(),
            bidders: instance
                .bidder_ids()
                .iter()
                .zip(instance.values())
                .map(|(id, vals)| {
                    Ok(BidderEntry { id: id.clone(), values: vals.iter().map(number).collect::<Result<_>>()? })
                })
                .collect::<Result<_>>()?,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json { context: "instance".into(), source })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }
}

/// A number given either as a JSON number or as a string (`"1/3"`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumText {
    Number(Number),
    Text(String),
}

impl NumText {
    pub fn parse<T: Scalar>(&self) -> Result<T> {
        match self {
            NumText::Number(n) => T::parse(&n.to_string()),
            NumText::Text(s) => T::parse(s),
        }
    }

    pub fn from_scalar<T: Scalar>(x: &T) -> Self {
        match x.to_decimal().and_then(|d| Number::from_str(&d).ok()) {
            Some(n) => NumText::Number(n),
            None => NumText::Text(x.render()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaFile {
    pub alpha: Vec<NumText>,
}

impl AlphaFile {
    pub fn to_multipliers<T: Scalar>(&self, instance: &AuctionInstance<T>) -> Result<MultiplierVector<T>> {
        let alpha = self.alpha.iter().map(NumText::parse).collect::<Result<Vec<T>>>()?;
        MultiplierVector::new(alpha, instance)
    }

    pub fn from_multipliers<T: Scalar>(alpha: &MultiplierVector<T>) -> Self {
        AlphaFile { alpha: alpha.as_slice().iter().map(NumText::from_scalar).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportEntry {
    /// Item labels (`A1`, `B2`, ...) in rank order.
    pub ranking: Vec<String>,
    pub prob: NumText,
}

/// Multipliers plus a tie-breaking distribution. Without `pi`, the
/// distribution is a point mass on the first-listed allocation of the
/// induced bids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateFile {
    pub alpha: Vec<NumText>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pi: Vec<SupportEntry>,
}

impl CandidateFile {
    pub fn parse<T: Scalar>(
        &self,
        instance: &AuctionInstance<T>,
    ) -> Result<(MultiplierVector<T>, TieBreakDistribution<T>)> {
        let alpha = AlphaFile { alpha: self.alpha.clone() }.to_multipliers(instance)?;
        if self.pi.is_empty() {
            let bids = induce_bids(instance, &alpha)?;
            return Ok((alpha, TieBreakDistribution::point_mass(allocate(&bids, TieRule::FirstListed))));
        }
        let support = self
            .pi
            .iter()
            .enumerate()
            .map(|(s, entry)| {
                let ranking = entry
                    .ranking
                    .iter()
                    .map(|l| {
                        instance
                            .item_by_label(l)
                            .ok_or_else(|| Error::invalid(format!("pi[{s}].ranking: unknown item {l:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((Allocation::new(ranking, instance)?, entry.prob.parse::<T>()?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((alpha, TieBreakDistribution::new(support)?))
    }

    pub fn from_parts<T: Scalar>(
        instance: &AuctionInstance<T>,
        alpha: &MultiplierVector<T>,
        pi: &TieBreakDistribution<T>,
    ) -> Self {
        CandidateFile {
            alpha: AlphaFile::from_multipliers(alpha).alpha,
            pi: pi
                .support()
                .iter()
                .map(|(a, p)| SupportEntry { ranking: a.labels(instance), prob: NumText::from_scalar(p) })
                .collect(),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { context: path.display().to_string(), source })
}

pub fn to_json_pretty<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CtrProfile {
    /// Every slot has CTR 1.
    Unit,
    /// Random two-decimal CTRs in (0, 1], sorted.
    Random,
    /// `c_k = 1 / k`, rounded to four decimals.
    Harmonic,
}

impl FromStr for CtrProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(CtrProfile::Unit),
            "random" => Ok(CtrProfile::Random),
            "harmonic" => Ok(CtrProfile::Harmonic),
            other => Err(Error::invalid(format!("unknown ctr profile {other:?}"))),
        }
    }
}

/// Parameters of a random instance. Values are two-decimal numbers in
/// `[0, value_max]`, so every generated instance is exact in rational mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub bidders: usize,
    pub min_items: usize,
    pub max_items: usize,
    pub slots: usize,
    pub value_max: u32,
    pub ctr_profile: CtrProfile,
    pub cap: String,
    pub mechanism: Mechanism,
    pub self_pricing: bool,
    /// Reject specs where `K` exceeds the item count.
    pub strict: bool,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            bidders: 2,
            min_items: 1,
            max_items: 3,
            slots: 3,
            value_max: 10,
            ctr_profile: CtrProfile::Random,
            cap: "4".into(),
            mechanism: Mechanism::Gsp,
            self_pricing: false,
            strict: false,
            seed: 0,
        }
    }
}

fn cents(n: u64) -> Number {
    let q = Rational::new(n.into(), 100.into());
    Number::from_str(&q.to_decimal().expect("cents are decimal")).expect("decimal is a JSON number")
}

pub fn generate(spec: &GeneratorSpec) -> Result<InstanceFile> {
    if spec.bidders == 0 || spec.min_items == 0 || spec.min_items > spec.max_items {
        return Err(Error::invalid("generator needs bidders >= 1 and 1 <= min_items <= max_items"));
    }
    if spec.strict && spec.slots > spec.bidders * spec.min_items {
        return Err(Error::invalid(format!(
            "strict mode: {} slots may exceed the item count (at least {})",
            spec.slots,
            spec.bidders * spec.min_items
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let top = u64::from(spec.value_max) * 100;
    let bidders = (0..spec.bidders)
        .map(|i| {
            let m = rng.gen_range(spec.min_items..=spec.max_items);
            let mut raw: Vec<u64> = (0..m).map(|_| rng.gen_range(0..=top)).collect();
            raw.sort_unstable_by(|a, b| b.cmp(a));
            BidderEntry { id: bidder_id(i, spec.bidders), values: raw.into_iter().map(cents).collect() }
        })
        .collect::<Vec<_>>();
    let ctrs = match spec.ctr_profile {
        CtrProfile::Unit => vec![cents(100); spec.slots],
        CtrProfile::Random => {
            let mut raw: Vec<u64> = (0..spec.slots).map(|_| rng.gen_range(1..=100)).collect();
            raw.sort_unstable_by(|a, b| b.cmp(a));
            raw.into_iter().map(cents).collect()
        }
        CtrProfile::Harmonic => (1..=spec.slots as u64)
            .map(|k| {
                let q = Rational::new(((10_000 + k / 2) / k).into(), 10_000.into());
                Number::from_str(&q.to_decimal().expect("decimal")).expect("number")
            })
            .collect(),
    };
    let file = InstanceFile {
        ctrs,
        cap: Number::from_str(&Rational::parse(&spec.cap)?.to_decimal().ok_or_else(|| Error::invalid("cap"))?)
            .map_err(|_| Error::invalid("cap"))?,
        mechanism: spec.mechanism,
        self_pricing: spec.self_pricing,
        bidders,
    };
    // reject anything the model would refuse
    file.to_instance::<Rational>()?;
    Ok(file)
}

fn bidder_id(i: usize, n: usize) -> String {
    if n <= 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("b{i}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::example_one;

    #[test]
    fn instance_round_trip_is_exact() {
        let inst = example_one::<Rational>();
        let file = InstanceFile::from_instance(&inst).unwrap();
        let json = file.to_json();
        assert!(json.contains("0.7"));
        let back = InstanceFile::from_json(&json).unwrap().to_instance::<Rational>().unwrap();
        assert_eq!(back, inst);
        let as_float = InstanceFile::from_json(&json).unwrap().to_instance::<f64>().unwrap();
        assert_eq!(as_float.ctrs(), &[1.0, 0.7, 0.5]);
    }

    #[test]
    fn schema_field_order() {
        let json = InstanceFile::from_instance(&example_one::<f64>()).unwrap().to_json();
        let pos = |k: &str| json.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("ctrs") < pos("cap"));
        assert!(pos("cap") < pos("mechanism"));
        assert!(pos("mechanism") < pos("self_pricing"));
        assert!(pos("self_pricing") < pos("bidders"));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let bad = r#"{"ctrs":[1],"cap":1,"mechanism":"gsp","bidders":[{"id":"A","values":[1,2]}]}"#;
        let err = InstanceFile::from_json(bad).unwrap().to_instance::<f64>().unwrap_err();
        assert!(err.to_string().contains("non-increasing"), "{err}");
        let typo = r#"{"ctr":[1],"cap":1,"mechanism":"gsp","bidders":[]}"#;
        let err = InstanceFile::from_json(typo).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let mech = r#"{"ctrs":[1],"cap":1,"mechanism":"first","bidders":[]}"#;
        assert!(InstanceFile::from_json(mech).is_err());
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let spec = GeneratorSpec { seed: 17, bidders: 3, ..GeneratorSpec::default() };
        let a = generate(&spec).unwrap().to_json();
        let b = generate(&spec).unwrap().to_json();
        assert_eq!(a, b);
        let inst = InstanceFile::from_json(&a).unwrap().to_instance::<Rational>().unwrap();
        assert_eq!(inst.num_bidders(), 3);
        for vals in inst.values() {
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        }
        let other = generate(&GeneratorSpec { seed: 18, ..spec.clone() }).unwrap().to_json();
        assert_ne!(a, other);
    }

    #[test]
    fn generator_strict_mode() {
        let spec = GeneratorSpec { slots: 10, bidders: 2, max_items: 3, strict: true, ..GeneratorSpec::default() };
        assert!(generate(&spec).is_err());
        assert!(generate(&GeneratorSpec { strict: false, ..spec }).is_ok());
    }

    #[test]
    fn candidate_file_round_trip() {
        let inst = example_one::<Rational>();
        let a = crate::allocate(
            &crate::induce_bids(&inst, &MultiplierVector::ones(&inst)).unwrap(),
            crate::TieRule::FirstListed,
        );
        let pi = TieBreakDistribution::point_mass(a);
        let file = CandidateFile::from_parts(&inst, &MultiplierVector::ones(&inst), &pi);
        let json = to_json_pretty(&file);
        let back: CandidateFile = serde_json::from_str(&json).unwrap();
        let (alpha, pi2) = back.parse(&inst).unwrap();
        assert_eq!(alpha, MultiplierVector::ones(&inst));
        assert_eq!(pi2, pi);

        let third = r#"{"alpha":["1","1"],"pi":[{"ranking":["B1","A1","A2","B2"],"prob":"1/3"},
            {"ranking":["B1","A1","A2","B2"],"prob":"2/3"}]}"#;
        let f: CandidateFile = serde_json::from_str(third).unwrap();
        assert!(f.parse(&inst).is_ok());
    }
}
