//! Fixed-seed statistical oracles at 4-sigma tolerances.

use nestwalk_core::bounds::hoeffding_tail;
use nestwalk_core::rng::{CoinStream, Stream};
use nestwalk_core::{build_nested, Dyadic, Level};

const N: usize = 1 << 20;

fn coins(seed: u64, which: Stream, n: usize) -> Vec<i8> {
    let mut out = Vec::with_capacity(n);
    CoinStream::new(seed, which).fill(&mut out, n);
    out
}

#[test]
fn row_zero_is_balanced() {
    let row = coins(2024, Stream::Row(0), N);
    let mean = row.iter().map(|&x| x as f64).sum::<f64>() / N as f64;
    assert!(mean.abs() < 0.005, "{mean}");
}

#[test]
fn rows_are_uncorrelated() {
    let a = coins(2024, Stream::Row(0), N);
    let b = coins(2024, Stream::Row(1), N);
    let rho = a.iter().zip(&b).map(|(&x, &y)| (x * y) as f64).sum::<f64>() / N as f64;
    assert!(rho.abs() < 0.005, "{rho}");
}

#[test]
fn twisted_rows_stay_balanced() {
    let fam = build_nested(77, Level::new(9), Dyadic::ONE).unwrap();
    for m in 4..=9 {
        let row = fam.twisted(Level::new(m));
        let n = row.len() as f64;
        let mean = row.iter().map(|&x| x as f64).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt(), "m={m}: {mean}");
    }
}

#[test]
fn hoeffding_dominates_simulation() {
    let mut c = CoinStream::new(5, Stream::Probe);
    let samples = 100_000;
    let hits = (0..samples)
        .filter(|_| (0..100).map(|_| c.next_step() as i32).sum::<i32>().abs() >= 20)
        .count();
    let p = hits as f64 / samples as f64;
    assert!(p <= hoeffding_tail(2.0), "{p}");
}
