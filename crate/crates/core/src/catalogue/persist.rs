//! Versioned JSON persistence for catalogues.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Catalogue, CatalogueMeta, ClosingKey, ClosingRate, PatternKey};
use crate::bits::VarSet;
use crate::error::{Error, Result};

pub const CATALOGUE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Rational {
    num: u64,
    den: u64,
}

#[derive(Serialize, Deserialize)]
struct CatalogueFile {
    version: u32,
    meta: CatalogueMeta,
    counts: BTreeMap<String, u64>,
    #[serde(rename = "degStats")]
    deg_stats: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(rename = "closingRates")]
    closing_rates: BTreeMap<String, Rational>,
}

fn deg_key(x: VarSet, y: VarSet) -> String {
    format!("{}:{}", x.bits(), y.bits())
}

fn parse_deg_key(s: &str) -> Result<(VarSet, VarSet)> {
    let bad = || Error::Malformed(format!("bad degree key {s:?}"));
    let (x, y) = s.split_once(':').ok_or_else(bad)?;
    let x = VarSet(x.parse().map_err(|_| bad())?);
    let y = VarSet(y.parse().map_err(|_| bad())?);
    if !x.is_subset(y) {
        return Err(bad());
    }
    Ok((x, y))
}

/// Writes `cat` as pretty JSON. Maps are ordered, so equal catalogues
/// serialize to identical bytes.
pub fn save<W: Write>(cat: &Catalogue, mut sink: W) -> Result<()> {
    let file = CatalogueFile {
        version: CATALOGUE_VERSION,
        meta: cat.meta.clone(),
        counts: cat.counts.iter().map(|(k, &n)| (k.0.clone(), n)).collect(),
        deg_stats: cat
            .deg_stats
            .iter()
            .map(|(k, m)| (k.0.clone(), m.iter().map(|(&(x, y), &d)| (deg_key(x, y), d)).collect()))
            .collect(),
        closing_rates: cat
            .closing_rates
            .iter()
            .map(|(k, r)| {
                (
                    k.to_string(),
                    Rational {
                        num: r.closures,
                        den: r.samples,
                    },
                )
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut sink, &file)?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn load<R: Read>(mut source: R) -> Result<Catalogue> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Malformed(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Malformed("missing version".into()))?;
    if version != u64::from(CATALOGUE_VERSION) {
        return Err(Error::Version {
            found: version as u32,
            expected: CATALOGUE_VERSION,
        });
    }
    let file: CatalogueFile = serde_json::from_value(value).map_err(|e| Error::Malformed(e.to_string()))?;
    let mut cat = Catalogue::empty(file.meta);
    for (k, n) in file.counts {
        cat.counts.insert(PatternKey(k), n);
    }
    for (k, m) in file.deg_stats {
        let entry = cat.deg_stats.entry(PatternKey(k)).or_default();
        for (dk, d) in m {
            entry.insert(parse_deg_key(&dk)?, d);
        }
    }
    for (k, r) in file.closing_rates {
        cat.closing_rates.insert(
            ClosingKey::parse(&k)?,
            ClosingRate {
                samples: r.den,
                closures: r.num,
            },
        );
    }
    Ok(cat)
}
