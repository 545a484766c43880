//! Textual feature labels.
//!
//! A label serializes as `DOMAIN__name__band__channel`, e.g.
//! `FT__power__3-9__T4` or `CONN__plv__8-13__O1-O2`. Absent parts are written
//! as `na`. Parsing the string back yields the same label.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::recording::canonical_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Time,
    Ft,
    Cwt,
    Dwt,
    Conn,
    Riemann,
    Meta,
}

impl Domain {
    pub const ALL: [Domain; 7] = [
        Domain::Time,
        Domain::Ft,
        Domain::Cwt,
        Domain::Dwt,
        Domain::Conn,
        Domain::Riemann,
        Domain::Meta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Time => "TIME",
            Domain::Ft => "FT",
            Domain::Cwt => "CWT",
            Domain::Dwt => "DWT",
            Domain::Conn => "CONN",
            Domain::Riemann => "RIEMANN",
            Domain::Meta => "META",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f < self.hi
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelRef {
    Single(String),
    Pair(String, String),
}

impl ChannelRef {
    pub fn electrodes(&self) -> Vec<&str> {
        match self {
            ChannelRef::Single(a) => alloc::vec![a.as_str()],
            ChannelRef::Pair(a, b) => alloc::vec![a.as_str(), b.as_str()],
        }
    }

    fn sort_key(&self) -> (usize, usize, &str, &str) {
        let idx = |c: &str| canonical_index(c).unwrap_or(usize::MAX);
        match self {
            ChannelRef::Single(a) => (idx(a), 0, a, ""),
            ChannelRef::Pair(a, b) => (idx(a), idx(b).saturating_add(1), a, b),
        }
    }
}

impl fmt::Display for ChannelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelRef::Single(a) => f.write_str(a),
            ChannelRef::Pair(a, b) => write!(f, "{a}-{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLabel {
    pub domain: Domain,
    pub name: String,
    pub band: Option<Band>,
    pub channel: Option<ChannelRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed feature label {0:?}")]
pub struct LabelParseError(pub String);

impl FeatureLabel {
    pub fn new(domain: Domain, name: &str, band: Option<Band>, channel: Option<ChannelRef>) -> Self {
        Self {
            domain,
            name: name.to_string(),
            band,
            channel,
        }
    }

    pub fn single(domain: Domain, name: &str, band: Option<Band>, ch: &str) -> Self {
        Self::new(domain, name, band, Some(ChannelRef::Single(ch.to_string())))
    }

    pub fn pair(domain: Domain, name: &str, band: Option<Band>, a: &str, b: &str) -> Self {
        Self::new(domain, name, band, Some(ChannelRef::Pair(a.to_string(), b.to_string())))
    }

    pub fn parse(s: &str) -> Result<Self, LabelParseError> {
        let err = || LabelParseError(s.to_string());
        let parts: Vec<&str> = s.split("__").collect();
        let [domain, name, band, channel] = parts[..] else {
            return Err(err());
        };
        let domain = Domain::parse(domain).ok_or_else(err)?;
        if name.is_empty() {
            return Err(err());
        }
        let band = match band {
            "na" => None,
            b => {
                let (lo, hi) = b.split_once('-').ok_or_else(err)?;
                let lo: f64 = lo.parse().map_err(|_| err())?;
                let hi: f64 = hi.parse().map_err(|_| err())?;
                Some(Band::new(lo, hi))
            }
        };
        let channel = match channel {
            "na" => None,
            c => Some(match c.split_once('-') {
                Some((a, b)) => ChannelRef::Pair(a.to_string(), b.to_string()),
                None => ChannelRef::Single(c.to_string()),
            }),
        };
        Ok(Self::new(domain, name, band, channel))
    }

    /// Column order: domain, name, band (numeric), channel (canonical montage order).
    pub fn column_cmp(&self, other: &Self) -> Ordering {
        let band_key = |b: &Option<Band>| b.map_or((f64::NEG_INFINITY, f64::NEG_INFINITY), |b| (b.lo, b.hi));
        let (la, ha) = band_key(&self.band);
        let (lb, hb) = band_key(&other.band);
        self.domain
            .cmp(&other.domain)
            .then_with(|| self.name.cmp(&other.name))
            .then_with(|| la.total_cmp(&lb))
            .then_with(|| ha.total_cmp(&hb))
            .then_with(|| match (&self.channel, &other.channel) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(a), Some(b)) => a.sort_key().cmp(&b.sort_key()),
            })
    }
}

impl fmt::Display for FeatureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let band = self.band.map_or_else(|| "na".to_string(), |b| b.to_string());
        let channel = self
            .channel
            .as_ref()
            .map_or_else(|| "na".to_string(), |c| format!("{c}"));
        write!(f, "{}__{}__{}__{}", self.domain.as_str(), self.name, band, channel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn round_trips() {
        let labels = [
            FeatureLabel::single(Domain::Ft, "power", Some(Band::new(3.0, 9.0)), "T4"),
            FeatureLabel::single(Domain::Ft, "power", Some(Band::new(0.0, 2.5)), "FP1"),
            FeatureLabel::pair(Domain::Conn, "plv", Some(Band::new(6.5, 14.5)), "O1", "O2"),
            FeatureLabel::new(Domain::Meta, "age", None, None),
            FeatureLabel::single(Domain::Time, "hjorth_mobility", None, "CZ"),
            FeatureLabel::single(Domain::Dwt, "mean", Some(Band::new(0.78125, 1.5625)), "A1"),
        ];
        for l in labels {
            let s = l.to_string();
            assert_eq!(FeatureLabel::parse(&s).unwrap(), l, "{s}");
        }
        assert_eq!(
            FeatureLabel::single(Domain::Ft, "power", Some(Band::new(3.0, 9.0)), "T4").to_string(),
            "FT__power__3-9__T4"
        );
        assert!(FeatureLabel::parse("FT__power__3-9").is_err());
        assert!(FeatureLabel::parse("XX__power__na__na").is_err());
    }

    #[test]
    fn ordering_uses_montage_and_numeric_bands() {
        let a = FeatureLabel::single(Domain::Ft, "power", Some(Band::new(3.0, 9.0)), "FP1");
        let b = FeatureLabel::single(Domain::Ft, "power", Some(Band::new(10.5, 20.5)), "A1");
        assert_eq!(a.column_cmp(&b), Ordering::Less);
        let c = FeatureLabel::single(Domain::Ft, "power", Some(Band::new(3.0, 9.0)), "A2");
        assert_eq!(c.column_cmp(&a), Ordering::Less);
        let t = FeatureLabel::single(Domain::Time, "zero_crossings", None, "T6");
        assert_eq!(t.column_cmp(&c), Ordering::Less);
    }
}
