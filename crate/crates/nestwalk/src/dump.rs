//! Binary dumps of step sequences and CSV export of stopping sequences.
//!
//! Dump layout, little-endian throughout:
//!
//! ```text
//! "MWNF" | version u16 | seed u64 | m_fine u16 | K numerator u64 | K exponent u16 | n_levels u16
//! per level:  level u16 | n_steps u64 | ceil(n_steps / 8) bytes, LSB first, bit 1 = +1
//! optional:   "DURS" | ticks_per_step u32 | count u64 | count x u32
//! ```

use std::fs;
use std::path::Path;

use nestwalk_core::{Dyadic, MartingaleInstance, NestedWalkFamily, StoppingSequence};

use crate::error::{HarnessError, Result};

const MAGIC: &[u8; 4] = b"MWNF";
const DURS: &[u8; 4] = b"DURS";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dump {
    pub seed: u64,
    pub m_fine: u16,
    pub horizon: Dyadic,
    pub levels: Vec<(u16, Vec<i8>)>,
    /// `(ticks_per_step, durations)`.
    pub durations: Option<(u32, Vec<u32>)>,
}

impl Dump {
    /// Raw step matrix rows of a family; twisting is recomputed on load.
    pub fn from_family(family: &NestedWalkFamily) -> Self {
        let matrix = family.matrix();
        Dump {
            seed: matrix.seed(),
            m_fine: family.fine_level().get() as u16,
            horizon: matrix.horizon(),
            levels: matrix
                .rows()
                .iter()
                .enumerate()
                .map(|(m, row)| (m as u16, row.clone()))
                .collect(),
            durations: None,
        }
    }

    /// The fine walk of a martingale with its durations.
    pub fn from_martingale(inst: &MartingaleInstance, horizon: Dyadic) -> Result<Self> {
        let clock = inst.clock();
        let durations = inst
            .time_change
            .durations()
            .iter()
            .map(|&d| u32::try_from(d))
            .collect::<Result<Vec<u32>, _>>()
            .map_err(|_| HarnessError::Format("duration exceeds u32".into()))?;
        Ok(Dump {
            seed: inst.spec.seed,
            m_fine: clock.fine_level().get() as u16,
            horizon,
            levels: vec![(clock.fine_level().get() as u16, inst.fine_walk.step_signs())],
            durations: Some((clock.ticks_per_step() as u32, durations)),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.m_fine.to_le_bytes());
        out.extend_from_slice(&self.horizon.num.to_le_bytes());
        out.extend_from_slice(&(self.horizon.exp as u16).to_le_bytes());
        out.extend_from_slice(&(self.levels.len() as u16).to_le_bytes());
        for (level, steps) in &self.levels {
            out.extend_from_slice(&level.to_le_bytes());
            out.extend_from_slice(&(steps.len() as u64).to_le_bytes());
            for chunk in steps.chunks(8) {
                let byte = chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |b, (i, &s)| if s > 0 { b | 1 << i } else { b });
                out.push(byte);
            }
        }
        if let Some((u, d)) = &self.durations {
            out.extend_from_slice(DURS);
            out.extend_from_slice(&u.to_le_bytes());
            out.extend_from_slice(&(d.len() as u64).to_le_bytes());
            for x in d {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(HarnessError::Format("not a walk dump (bad magic)".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(HarnessError::Format(format!("unsupported dump version {version}")));
        }
        let seed = r.u64()?;
        let m_fine = r.u16()?;
        let num = r.u64()?;
        let exp = r.u16()? as u32;
        let n_levels = r.u16()?;
        let mut levels = Vec::with_capacity(n_levels as usize);
        for _ in 0..n_levels {
            let level = r.u16()?;
            let n = usize::try_from(r.u64()?).map_err(|_| HarnessError::Format("step count overflows".into()))?;
            let packed = r.take(n.div_ceil(8))?;
            let steps = (0..n)
                .map(|i| if packed[i / 8] >> (i % 8) & 1 == 1 { 1 } else { -1 })
                .collect();
            levels.push((level, steps));
        }
        let durations = if r.at < bytes.len() {
            if r.take(4)? != DURS {
                return Err(HarnessError::Format("unknown trailing section".into()));
            }
            let u = r.u32()?;
            let n = r.u64()? as usize;
            let d = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            Some((u, d))
        } else {
            None
        };
        if r.at != bytes.len() {
            return Err(HarnessError::Format("trailing bytes after dump".into()));
        }
        Ok(Dump {
            seed,
            m_fine,
            horizon: Dyadic::new(num, exp),
            levels,
            durations,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        Dump::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| HarnessError::Format("truncated dump".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// CSV rows `k, time_microticks, value_numerator, level` for `k = 0..`;
/// values are numerators over `2^{m_fine}`, times already in micro-ticks.
pub fn write_stops(path: &Path, seq: &StoppingSequence, ticks: &[u64], values: &[i64]) -> Result<()> {
    let err = |e: csv::Error| HarnessError::Format(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "time_microticks", "value_numerator", "level"])
        .map_err(err)?;
    let level = seq.level.get().to_string();
    for (k, (t, v)) in ticks.iter().zip(values).enumerate() {
        w.write_record([k.to_string(), t.to_string(), v.to_string(), level.clone()])
            .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Format(e.to_string()))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nestwalk_core::{build_nested, Level};

    #[test]
    fn family_round_trip() {
        let fam = build_nested(11, Level::new(3), Dyadic::new(3, 1)).unwrap();
        let d = Dump::from_family(&fam);
        let back = Dump::from_bytes(&d.to_bytes()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.horizon, Dyadic::new(3, 1));
        assert_eq!(back.levels.len(), 4);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Dump::from_bytes(b"XXXX").is_err());
        let fam = build_nested(1, Level::new(2), Dyadic::ONE).unwrap();
        let bytes = Dump::from_family(&fam).to_bytes();
        assert!(Dump::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
