//! A seeded ground-truth trip world: stations on a line, commuters with fixed
//! home and work stations, weekday peaks and weekend late-morning outings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_model::{DatasetRole, DayOfWeek, TripDataset, TripRecord};
use crate::error::{Result, RpuError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub n_stations: usize,
    pub n_passengers: usize,
    pub n_trips: usize,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { n_stations: 20, n_passengers: 800, n_trips: 10_000, seed: 7 }
    }
}

pub fn station_code(i: usize) -> String {
    format!("ST{:02}", i + 1)
}

/// Travel time between stations `i` and `j` before noise.
pub fn base_duration(i: usize, j: usize) -> f64 {
    5.0 + 2.5 * i.abs_diff(j) as f64
}

struct Passenger {
    home: usize,
    work: usize,
}

fn clamp_trip(start: f64, dur: f64) -> (i64, i64) {
    let dur = dur.round().max(1.0) as i64;
    let start = (start.round() as i64).clamp(300, 1439 - dur);
    (start, start + dur)
}

/// Simulates exactly `cfg.n_trips` records, each passenger taking at least one
/// trip when `n_trips >= n_passengers`. Records come back shuffled.
pub fn simulate_trips(cfg: &WorldConfig) -> Result<Vec<TripRecord>> {
    if cfg.n_stations < 2 || cfg.n_passengers == 0 || cfg.n_trips == 0 {
        return Err(RpuError::InvalidParameter("world needs >= 2 stations, passengers and trips".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.n_stations;
    let centre = (s as f64 - 1.0) / 2.0;
    let work_spread = Normal::new(centre, s as f64 / 6.0).unwrap();
    let passengers: Vec<Passenger> = (0..cfg.n_passengers)
        .map(|_| {
            let home = rng.random_range(0..s);
            let mut work = (work_spread.sample(&mut rng).round() as i64).clamp(0, s as i64 - 1) as usize;
            if work == home {
                work = if home + 1 < s { home + 1 } else { home - 1 };
            }
            Passenger { home, work }
        })
        .collect();

    let morning = Normal::new(480.0, 35.0).unwrap();
    let evening = Normal::new(1080.0, 45.0).unwrap();
    let outing = Normal::new(690.0, 80.0).unwrap();
    let back = Normal::new(990.0, 110.0).unwrap();
    let noise = Normal::new(0.0, 2.0).unwrap();
    // weekdays five times as busy as each weekend day
    let day_weights = [5.0, 5.0, 5.0, 5.0, 5.0, 2.0, 2.0];
    let total_w: f64 = day_weights.iter().sum();

    let mut out = Vec::with_capacity(cfg.n_trips);
    for t in 0..cfg.n_trips {
        let pid = if t < cfg.n_passengers { t } else { rng.random_range(0..cfg.n_passengers) };
        let p = &passengers[pid];
        let mut u = rng.random::<f64>() * total_w;
        let mut day = DayOfWeek::Sun;
        for (d, w) in DayOfWeek::ALL.iter().zip(day_weights) {
            if u < w {
                day = *d;
                break;
            }
            u -= w;
        }
        let r: f64 = rng.random();
        let (o, d, start) = if !day.is_weekend() {
            if r < 0.45 {
                (p.home, p.work, morning.sample(&mut rng))
            } else if r < 0.9 {
                (p.work, p.home, evening.sample(&mut rng))
            } else {
                (p.home, other_station(&mut rng, s, p.home), rng.random_range(600.0..1260.0))
            }
        } else {
            let dest = other_station(&mut rng, s, p.home);
            if r < 0.5 {
                (p.home, dest, outing.sample(&mut rng))
            } else {
                (dest, p.home, back.sample(&mut rng))
            }
        };
        let (start_min, end_min) = clamp_trip(start, base_duration(o, d) + noise.sample(&mut rng));
        out.push(TripRecord {
            passenger_id: format!("P{pid:05}"),
            origin: station_code(o),
            destination: station_code(d),
            start_min,
            end_min,
            day_of_week: day,
        });
    }
    out.shuffle(&mut rng);
    Ok(out)
}

fn other_station<R: Rng>(rng: &mut R, s: usize, not: usize) -> usize {
    let j = rng.random_range(0..s - 1);
    if j >= not {
        j + 1
    } else {
        j
    }
}

/// Train, holdout and test splits of one simulated world.
#[derive(Debug, Clone)]
pub struct WorldSplits {
    pub train: TripDataset,
    pub holdout: TripDataset,
    pub test: TripDataset,
}

/// Simulates `train + holdout + test` trips and cuts them in that order.
pub fn simulate_splits(cfg: &WorldConfig, train: usize, holdout: usize, test: usize) -> Result<WorldSplits> {
    let cfg = WorldConfig { n_trips: train + holdout + test, ..cfg.clone() };
    let mut recs = simulate_trips(&cfg)?;
    let test_recs = recs.split_off(train + holdout);
    let holdout_recs = recs.split_off(train);
    Ok(WorldSplits {
        train: TripDataset::new(recs, DatasetRole::Train, "real"),
        holdout: TripDataset::new(holdout_recs, DatasetRole::Holdout, "real"),
        test: TripDataset::new(test_recs, DatasetRole::Holdout, "real"),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    #[test]
    fn exact_size_and_valid() {
        let cfg = WorldConfig { n_passengers: 50, n_trips: 1234, ..Default::default() };
        let recs = simulate_trips(&cfg).unwrap();
        assert_eq!(recs.len(), 1234);
        for r in &recs {
            assert!(r.start_min < r.end_min && r.start_min >= 0 && r.end_min <= 1440);
            assert_ne!(r.origin, r.destination);
        }
        let ids: BTreeSet<&str> = recs.iter().map(|r| r.passenger_id.as_str()).collect();
        assert_eq!(ids.len(), 50);
    }

    #[test]
    fn seeded() {
        let cfg = WorldConfig { n_trips: 300, ..Default::default() };
        assert_eq!(simulate_trips(&cfg).unwrap(), simulate_trips(&cfg).unwrap());
        let other = WorldConfig { seed: 8, ..cfg.clone() };
        assert_ne!(simulate_trips(&cfg).unwrap(), simulate_trips(&other).unwrap());
    }

    #[test]
    fn weekday_morning_peak() {
        let recs = simulate_trips(&WorldConfig::default()).unwrap();
        let weekday_am = recs.iter().filter(|r| !r.day_of_week.is_weekend() && (420..540).contains(&r.start_min)).count();
        let weekend_am = recs.iter().filter(|r| r.day_of_week.is_weekend() && (420..540).contains(&r.start_min)).count();
        assert!(weekday_am > 10 * weekend_am.max(1));
    }

    #[test]
    fn splits() {
        let w = simulate_splits(&WorldConfig::default(), 600, 200, 100).unwrap();
        assert_eq!((w.train.len(), w.holdout.len(), w.test.len()), (600, 200, 100));
        assert_eq!(w.train.role(), DatasetRole::Train);
    }
}
