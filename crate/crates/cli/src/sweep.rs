//! Sweep specifications: `a,b,c` lists or inclusive `start:stop:step` ranges.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::Deserialize;
use std::fmt;
use std::str::FromStr;

const MAX_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep(pub Vec<f64>);

impl Sweep {
    pub fn single(x: f64) -> Self {
        Sweep(vec![x])
    }

    /// The points as positive integers, rejecting fractional or nonpositive values.
    pub fn counts(&self) -> Result<Vec<u64>, String> {
        self.0
            .iter()
            .map(|&x| {
                if x >= 1.0 && x.fract() == 0.0 && x < 2f64.powi(53) {
                    Ok(x as u64)
                } else {
                    Err(format!("{x} is not a positive integer"))
                }
            })
            .collect()
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let v: f64 = t.parse().map_err(|_| format!("cannot parse '{t}' as a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{t}' is not finite"))
    }
}

fn range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0) {
        return Err(format!("range step {step} must be positive"));
    }
    if stop < start {
        return Err(format!("range stop {stop} is below start {start}"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > MAX_POINTS {
        return Err(format!("range has {n} points, more than {MAX_POINTS}"));
    }
    // multiply rather than accumulate so integer ranges stay exact
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty sweep".into());
        }
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [a, b, c] = parts[..] else {
                return Err(format!("range '{s}' must be start:stop:step"));
            };
            return range(parse_number(a)?, parse_number(b)?, parse_number(c)?).map(Sweep);
        }
        let points = s.split(',').map(parse_number).collect::<Result<Vec<_>, _>>()?;
        Ok(Sweep(points))
    }
}

impl<'de> Deserialize<'de> for Sweep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;

        impl<'de> Visitor<'de> for V {
            type Value = Sweep;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, an array of numbers or a sweep string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Sweep, E> {
                Ok(Sweep::single(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Sweep, E> {
                Ok(Sweep::single(v as f64))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Sweep, E> {
                Ok(Sweep::single(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Sweep, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Sweep, A::Error> {
                let mut out = Vec::new();
                while let Some(x) = seq.next_element::<f64>()? {
                    out.push(x);
                }
                if out.is_empty() {
                    return Err(de::Error::custom("empty sweep"));
                }
                Ok(Sweep(out))
            }
        }

        d.deserialize_any(V)
    }
}
