//! Seeded synthetic infants and simulated annotators.
//!
//! A recording is a walk over legal (posture, movement) states. Posture sets
//! the gravity direction seen by each sensor's accelerometer; movements add
//! sinusoidal rotation on designated limb gyroscope axes. The default
//! recipes are built so that each sensor alone is ambiguous: arm sensors do
//! not separate prone from crawl posture, leg sensors do not separate the
//! two side postures, and left/right movements only differ in which limb
//! oscillates.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::annotation::{META_TAGS, MOVEMENT_CLASSES, POSTURE_CLASSES};
use crate::data::{
    AnnotationSet, Axis, ChannelId, Interval, Modality, Recording, Sensor, Track, NUM_CHANNELS,
};
use crate::error::{Error, Result};

const STILL: &str = "macro still";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureRecipe {
    pub posture: String,
    /// Gravity direction per sensor, in sensor order.
    pub gravity: [[f64; 3]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub sensor: Sensor,
    pub axis: Axis,
    pub freq_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementRecipe {
    pub movement: String,
    pub oscillators: Vec<Oscillator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub sample_rate: f64,
    pub duration_s: f64,
    /// Frame length in samples; every state lasts at least this long.
    pub window_len: usize,
    pub dwell_min_s: f64,
    pub dwell_max_s: f64,
    pub gravity: f64,
    pub acc_noise: f64,
    pub gyro_noise: f64,
    /// Per-subject standard deviation added to each gravity direction component.
    pub tilt_jitter: f64,
    /// Per-subject movement amplitude scale is drawn from `1 ± amplitude_jitter`.
    pub amplitude_jitter: f64,
    /// Per-subject movement frequency scale is drawn from `1 ± freq_jitter`.
    pub freq_jitter: f64,
    /// Probability that a state contains a meta event.
    pub meta_rate: f64,
    pub meta_duration_s: f64,
    pub postures: Vec<PostureRecipe>,
    pub movements: Vec<MovementRecipe>,
    /// Legal (posture, movement) pairs.
    pub legal: Vec<(String, String)>,
}

fn osc(sensor: Sensor, axis: Axis, freq_hz: f64, amplitude: f64, phase: f64) -> Oscillator {
    Oscillator {
        sensor,
        axis,
        freq_hz,
        amplitude,
        phase,
    }
}

impl Default for Scenario {
    fn default() -> Self {
        use Sensor::*;
        let down = [0.0, 0.0, -1.0];
        let up = [0.0, 0.0, 1.0];
        let posture = |name: &str, g: [[f64; 3]; 4]| PostureRecipe {
            posture: name.into(),
            gravity: g,
        };
        let postures = vec![
            posture("prone", [down, down, down, down]),
            posture("supine", [up, up, up, up]),
            posture("side L", [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]),
            posture("side R", [[-1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]),
            posture("crawl posture", [down, down, [0.0, -1.0, 0.0], [0.0, -1.0, 0.0]]),
        ];
        let movement = |name: &str, o: Vec<Oscillator>| MovementRecipe {
            movement: name.into(),
            oscillators: o,
        };
        let movements = vec![
            movement(STILL, vec![]),
            movement("turn L", vec![osc(LeftArm, Axis::Y, 1.2, 2.0, 0.0)]),
            movement("turn R", vec![osc(RightArm, Axis::Y, 1.2, 2.0, 0.0)]),
            movement("pivot L", vec![osc(LeftLeg, Axis::Z, 2.0, 2.0, 0.0)]),
            movement("pivot R", vec![osc(RightLeg, Axis::Z, 2.0, 2.0, 0.0)]),
            movement(
                "crawl proto",
                vec![
                    osc(LeftArm, Axis::X, 1.0, 2.0, 0.0),
                    osc(RightArm, Axis::X, 1.0, 2.0, PI),
                    osc(LeftLeg, Axis::X, 1.0, 2.0, PI),
                    osc(RightLeg, Axis::X, 1.0, 2.0, 0.0),
                ],
            ),
            movement(
                "crawl commando",
                vec![osc(LeftArm, Axis::X, 0.6, 2.5, 0.0), osc(RightArm, Axis::X, 0.6, 2.5, 0.0)],
            ),
        ];
        let mut legal = Vec::new();
        for p in POSTURE_CLASSES {
            legal.push((p.to_string(), STILL.to_string()));
        }
        for m in ["turn L", "turn R"] {
            for p in ["prone", "supine", "side L", "side R"] {
                legal.push((p.into(), m.into()));
            }
        }
        legal.push(("prone".into(), "pivot L".into()));
        legal.push(("prone".into(), "pivot R".into()));
        legal.push(("crawl posture".into(), "crawl proto".into()));
        legal.push(("prone".into(), "crawl commando".into()));
        legal.push(("crawl posture".into(), "crawl commando".into()));
        Scenario {
            sample_rate: 52.0,
            duration_s: 600.0,
            window_len: 120,
            dwell_min_s: 6.0,
            dwell_max_s: 20.0,
            gravity: 9.81,
            acc_noise: 0.8,
            gyro_noise: 0.4,
            tilt_jitter: 0.15,
            amplitude_jitter: 0.3,
            freq_jitter: 0.1,
            meta_rate: 0.03,
            meta_duration_s: 3.0,
            postures,
            movements,
            legal,
        }
    }
}

/// One state of the generated walk, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub start: usize,
    pub end: usize,
    pub posture: usize,
    pub movement: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Infant {
    pub recording: Recording,
    pub states: Vec<State>,
    pub posture: AnnotationSet,
    pub movement: AnnotationSet,
    pub meta: AnnotationSet,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("scenario: {m}")));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.sample_rate) || !positive(self.duration_s) {
            return bad("sample rate and duration must be positive".into());
        }
        if self.window_len == 0 || self.dwell_min_s * self.sample_rate < self.window_len as f64 {
            return bad(format!(
                "minimum dwell {} s is shorter than one {}-sample window",
                self.dwell_min_s, self.window_len
            ));
        }
        if self.dwell_max_s < self.dwell_min_s || self.duration_s < self.dwell_min_s {
            return bad("dwell range or duration too short".into());
        }
        for v in [self.acc_noise, self.gyro_noise, self.tilt_jitter, self.amplitude_jitter, self.freq_jitter] {
            if !v.is_finite() || v < 0.0 {
                return bad("noise levels must be nonnegative".into());
            }
        }
        if !(0.0..=1.0).contains(&self.meta_rate) || !positive(self.meta_duration_s) {
            return bad("meta rate must be in [0, 1] and duration positive".into());
        }
        if self.amplitude_jitter >= 1.0 || self.freq_jitter >= 1.0 {
            return bad("jitter scales must be below 1".into());
        }
        if self.postures.len() != POSTURE_CLASSES.len()
            || POSTURE_CLASSES.iter().any(|p| !self.postures.iter().any(|r| r.posture == *p))
        {
            return bad("needs exactly one recipe per posture class".into());
        }
        if self.movements.len() != MOVEMENT_CLASSES.len()
            || MOVEMENT_CLASSES.iter().any(|m| !self.movements.iter().any(|r| r.movement == *m))
        {
            return bad("needs exactly one recipe per movement class".into());
        }
        for (p, m) in &self.legal {
            if !POSTURE_CLASSES.contains(&p.as_str()) || !MOVEMENT_CLASSES.contains(&m.as_str()) {
                return bad(format!("unknown legal pair ({p}, {m})"));
            }
        }
        for p in POSTURE_CLASSES {
            if !self.legal.iter().any(|(lp, lm)| lp == p && lm == STILL) {
                return bad(format!("posture {p} needs a legal still state"));
            }
        }
        Ok(())
    }

    fn pair_indices(&self) -> Vec<(usize, usize)> {
        let pi = |p: &str| POSTURE_CLASSES.iter().position(|c| *c == p).unwrap();
        let mi = |m: &str| MOVEMENT_CLASSES.iter().position(|c| *c == m).unwrap();
        self.legal.iter().map(|(p, m)| (pi(p), mi(m))).collect()
    }

    fn posture_recipe(&self, idx: usize) -> &PostureRecipe {
        self.postures.iter().find(|r| r.posture == POSTURE_CLASSES[idx]).unwrap()
    }

    fn movement_recipe(&self, idx: usize) -> &MovementRecipe {
        self.movements.iter().find(|r| r.movement == MOVEMENT_CLASSES[idx]).unwrap()
    }

    pub fn is_legal(&self, posture: usize, movement: usize) -> bool {
        self.pair_indices().contains(&(posture, movement))
    }
}

/// Posture changes only pass through still states.
fn transition_allowed(from: (usize, usize), to: (usize, usize)) -> bool {
    from != to && (from.0 == to.0 || (from.1 == 0 && to.1 == 0))
}

fn walk(scenario: &Scenario, len: usize, rng: &mut ChaCha8Rng) -> Vec<State> {
    let pairs = scenario.pair_indices();
    let mut posture_visits = vec![0usize; POSTURE_CLASSES.len()];
    let mut movement_visits = vec![0usize; MOVEMENT_CLASSES.len()];
    let rate = scenario.sample_rate;
    let min = (scenario.dwell_min_s * rate).ceil() as usize;
    let max = ((scenario.dwell_max_s * rate).floor() as usize).max(min);
    let mut current = rng.random_range(0..pairs.len());
    let mut states = Vec::new();
    let mut t = 0;
    while t < len {
        let mut d = rng.random_range(min..=max);
        if len - t < d + min {
            d = len - t;
        }
        posture_visits[pairs[current].0] += 1;
        movement_visits[pairs[current].1] += 1;
        states.push(State {
            start: t,
            end: t + d,
            posture: pairs[current].0,
            movement: pairs[current].1,
        });
        t += d;
        // Rarely seen classes are preferred so short runs still cover every class.
        let options: Vec<usize> = (0..pairs.len())
            .filter(|&j| transition_allowed(pairs[current], pairs[j]))
            .collect();
        let weights: Vec<f64> = options
            .iter()
            .map(|&j| {
                let (p, m) = pairs[j];
                let rarity = (1.0 + posture_visits[p] as f64) * (1.0 + movement_visits[m] as f64);
                1.0 / rarity.powi(2)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random_range(0.0..total);
        current = options[options.len() - 1];
        for (&j, &w) in options.iter().zip(&weights) {
            if u < w {
                current = j;
                break;
            }
            u -= w;
        }
    }
    states
}

/// Consecutive states with the same label merged into intervals.
fn track_intervals(states: &[State], rate: f64, label: impl Fn(&State) -> &'static str) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    for s in states {
        let l = label(s);
        match out.last_mut() {
            Some(last) if last.label == l => last.end_s = s.end as f64 / rate,
            _ => out.push(Interval {
                start_s: s.start as f64 / rate,
                end_s: s.end as f64 / rate,
                label: l.to_string(),
            }),
        }
    }
    out
}

/// Generates one infant; deterministic in `(scenario, seed)`.
pub fn generate_infant(scenario: &Scenario, subject_id: &str, seed: u64) -> Result<Infant> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = scenario.sample_rate;
    let len = (scenario.duration_s * rate).round() as usize;
    let states = walk(scenario, len, &mut rng);

    // Subject-specific sensor placement and movement vigor.
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut tilt = [[0.0; 3]; 4];
    for s in tilt.iter_mut() {
        for v in s.iter_mut() {
            *v = scenario.tilt_jitter * unit.sample(&mut rng);
        }
    }
    let amp_scale = 1.0 + scenario.amplitude_jitter * rng.random_range(-1.0..1.0);
    let freq_scale = 1.0 + scenario.freq_jitter * rng.random_range(-1.0..1.0);

    let mut cols = vec![vec![0.0; len]; NUM_CHANNELS];
    for st in &states {
        let pr = scenario.posture_recipe(st.posture);
        let mr = scenario.movement_recipe(st.movement);
        for sensor in Sensor::ALL {
            let si = sensor.index();
            let mut g = pr.gravity[si];
            for (a, t) in g.iter_mut().zip(tilt[si]) {
                *a += t;
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
            for (ai, axis) in Axis::ALL.into_iter().enumerate() {
                let k = ChannelId::new(sensor, Modality::Accel, axis).index();
                let level = scenario.gravity * g[ai] / norm;
                cols[k][st.start..st.end].fill(level);
            }
        }
        let phase0 = rng.random_range(0.0..2.0 * PI);
        for o in &mr.oscillators {
            let k = ChannelId::new(o.sensor, Modality::Gyro, o.axis).index();
            let w = 2.0 * PI * o.freq_hz * freq_scale / rate;
            for (i, v) in cols[k][st.start..st.end].iter_mut().enumerate() {
                *v += amp_scale * o.amplitude * (w * i as f64 + o.phase + phase0).sin();
            }
            // Rotation also shakes the accelerometer of the same limb a little.
            let ka = ChannelId::new(o.sensor, Modality::Accel, o.axis).index();
            for (i, v) in cols[ka][st.start..st.end].iter_mut().enumerate() {
                *v += 0.3 * amp_scale * o.amplitude * (w * i as f64 + o.phase + phase0).cos();
            }
        }
    }
    for (k, col) in cols.iter_mut().enumerate() {
        let sd = if ChannelId::from_index(k).modality == Modality::Accel {
            scenario.acc_noise
        } else {
            scenario.gyro_noise
        };
        if sd > 0.0 {
            let noise = Normal::new(0.0, sd).unwrap();
            for v in col.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
    }

    let mut meta = Vec::new();
    let meta_len = ((scenario.meta_duration_s * rate).round() as usize).max(1);
    for st in &states {
        if st.end - st.start <= meta_len || rng.random::<f64>() >= scenario.meta_rate {
            continue;
        }
        let start = rng.random_range(st.start..st.end - meta_len);
        let tag = *META_TAGS.choose(&mut rng).unwrap();
        if tag == "sensor-drop" {
            let sensor = Sensor::ALL[rng.random_range(0..4)];
            for (k, col) in cols.iter_mut().enumerate() {
                if ChannelId::from_index(k).sensor == sensor {
                    col[start..start + meta_len].fill(f64::NAN);
                }
            }
        }
        meta.push(Interval {
            start_s: start as f64 / rate,
            end_s: (start + meta_len) as f64 / rate,
            label: tag.to_string(),
        });
    }

    let recording = Recording::from_columns(subject_id, rate, cols)?;
    let posture = AnnotationSet::new(
        "truth",
        Track::Posture,
        track_intervals(&states, rate, |s| POSTURE_CLASSES[s.posture]),
    )?;
    let movement = AnnotationSet::new(
        "truth",
        Track::Movement,
        track_intervals(&states, rate, |s| MOVEMENT_CLASSES[s.movement]),
    )?;
    let meta = AnnotationSet::new("truth", Track::Meta, meta)?;
    Ok(Infant {
        recording,
        states,
        posture,
        movement,
        meta,
    })
}

/// Annotator error model: boundary jitter and per-interval label confusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorNoise {
    /// Standard deviation of boundary displacement, seconds.
    pub jitter_s: f64,
    /// Probability that an interval receives a wrong label, spread evenly
    /// over the other classes of the track.
    pub confusion_rate: f64,
    pub seed: u64,
}

impl AnnotatorNoise {
    pub fn none(seed: u64) -> Self {
        AnnotatorNoise {
            jitter_s: 0.0,
            confusion_rate: 0.0,
            seed,
        }
    }

    /// Row-stochastic label confusion matrix for `n` classes.
    pub fn confusion_matrix(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if n == 1 {
                            1.0
                        } else if i == j {
                            1.0 - self.confusion_rate
                        } else {
                            self.confusion_rate / (n - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.jitter_s.is_finite() || self.jitter_s < 0.0 || !(0.0..=1.0).contains(&self.confusion_rate) {
            return Err(Error::invalid("annotator noise: jitter >= 0 and rate in [0, 1]"));
        }
        Ok(())
    }
}

/// Shortest interval an annotator produces after jitter, seconds.
const MIN_INTERVAL_S: f64 = 0.1;

fn noisy_track(
    truth: &AnnotationSet,
    classes: &[&str],
    annotator: &str,
    noise: &AnnotatorNoise,
    rng: &mut ChaCha8Rng,
) -> Result<AnnotationSet> {
    let ivs = truth.intervals();
    let mut bounds: Vec<f64> = ivs.iter().map(|iv| iv.start_s).collect();
    if let Some(last) = ivs.last() {
        bounds.push(last.end_s);
    }
    if noise.jitter_s > 0.0 {
        let normal = Normal::new(0.0, noise.jitter_s).unwrap();
        for i in 1..bounds.len().saturating_sub(1) {
            let lo = bounds[i - 1] + MIN_INTERVAL_S;
            let hi = ivs[i].end_s - MIN_INTERVAL_S;
            let moved = bounds[i] + normal.sample(rng);
            bounds[i] = if lo < hi { moved.clamp(lo, hi) } else { bounds[i] };
        }
    }
    let matrix = noise.confusion_matrix(classes.len());
    let mut out = Vec::with_capacity(ivs.len());
    for (i, iv) in ivs.iter().enumerate() {
        let mut label = iv.label.clone();
        if let Some(ci) = classes.iter().position(|c| *c == iv.label) {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (j, p) in matrix[ci].iter().enumerate() {
                acc += p;
                if u < acc {
                    label = classes[j].to_string();
                    break;
                }
            }
        }
        out.push(Interval {
            start_s: bounds[i],
            end_s: bounds[i + 1],
            label,
        });
    }
    AnnotationSet::new(annotator, truth.track, out)
}

/// `k` independent noisy annotators; each returns (posture, movement, meta)
/// tracks. Meta tracks are copied unchanged.
pub fn simulate_annotators(
    infant: &Infant,
    noise: &AnnotatorNoise,
    k: usize,
) -> Result<Vec<[AnnotationSet; 3]>> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    (0..k)
        .map(|a| {
            rng.set_stream(a as u64 + 1);
            let id = format!("A{}", a + 1);
            let posture = noisy_track(&infant.posture, &POSTURE_CLASSES, &id, noise, &mut rng)?;
            let movement = noisy_track(&infant.movement, &MOVEMENT_CLASSES, &id, noise, &mut rng)?;
            let meta = AnnotationSet::new(id, Track::Meta, infant.meta.intervals().to_vec())?;
            Ok([posture, movement, meta])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{rasterize, window_frames, ClassSet};
    use crate::eval::fleiss_kappa_sequences;

    fn short() -> Scenario {
        Scenario {
            duration_s: 120.0,
            ..Scenario::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_infant(&short(), "S01", 7).unwrap();
        let b = generate_infant(&short(), "S01", 7).unwrap();
        let c = generate_infant(&short(), "S01", 8).unwrap();
        assert_eq!(a.states, b.states);
        let bits = |r: &Recording| -> Vec<u64> {
            (0..NUM_CHANNELS).flat_map(|k| r.channel(k).iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
        };
        assert_eq!(bits(&a.recording), bits(&b.recording));
        assert_ne!(bits(&a.recording), bits(&c.recording));
    }

    #[test]
    fn states_are_legal_and_long_enough() {
        let sc = Scenario::default();
        for seed in 0..5 {
            let inf = generate_infant(&sc, "S", seed).unwrap();
            for s in &inf.states {
                assert!(sc.is_legal(s.posture, s.movement), "{s:?}");
                assert!(s.end - s.start >= sc.window_len);
            }
            assert_eq!(inf.states.last().unwrap().end, inf.recording.len());
        }
    }

    #[test]
    fn ten_minutes_cover_every_class() {
        let sc = Scenario::default();
        for seed in 0..5 {
            let inf = generate_infant(&sc, "S", seed).unwrap();
            for p in 0..POSTURE_CLASSES.len() {
                assert!(inf.states.iter().any(|s| s.posture == p), "seed {seed} posture {p}");
            }
            for m in 0..MOVEMENT_CLASSES.len() {
                assert!(inf.states.iter().any(|s| s.movement == m), "seed {seed} movement {m}");
            }
        }
    }

    #[test]
    fn supine_accelerometers_read_configured_gravity() {
        let sc = Scenario {
            tilt_jitter: 0.0,
            meta_rate: 0.0,
            ..Scenario::default()
        };
        let inf = generate_infant(&sc, "S", 3).unwrap();
        let supine = inf.states.iter().find(|s| s.posture == 1).expect("supine state");
        for sensor in Sensor::ALL {
            let k = ChannelId::new(sensor, Modality::Accel, Axis::Z).index();
            let col = &inf.recording.channel(k)[supine.start..supine.end];
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            // Noise averages down; movements add at most a small cosine on X/Y.
            let tol = 4.0 * sc.acc_noise / (col.len() as f64).sqrt();
            assert!((mean - sc.gravity).abs() < tol, "{sensor:?} {mean}");
        }
    }

    #[test]
    fn zero_noise_annotators_copy_truth() {
        let inf = generate_infant(&short(), "S", 1).unwrap();
        let ann = simulate_annotators(&inf, &AnnotatorNoise::none(3), 3).unwrap();
        for [p, m, meta] in &ann {
            assert_eq!(p.intervals(), inf.posture.intervals());
            assert_eq!(m.intervals(), inf.movement.intervals());
            assert_eq!(meta.intervals(), inf.meta.intervals());
        }
    }

    #[test]
    fn jitter_moves_only_boundaries() {
        let inf = generate_infant(&short(), "S", 1).unwrap();
        let noise = AnnotatorNoise {
            jitter_s: 0.5,
            confusion_rate: 0.0,
            seed: 4,
        };
        let ann = simulate_annotators(&inf, &noise, 3).unwrap();
        let truth: Vec<&str> = inf.movement.intervals().iter().map(|i| i.label.as_str()).collect();
        let mut moved = false;
        for [_, m, _] in &ann {
            let labels: Vec<&str> = m.intervals().iter().map(|i| i.label.as_str()).collect();
            assert_eq!(labels, truth);
            moved |= m.intervals() != inf.movement.intervals();
        }
        assert!(moved);
    }

    #[test]
    fn confusion_matrix_rows_are_distributions() {
        let n = AnnotatorNoise {
            jitter_s: 0.0,
            confusion_rate: 0.2,
            seed: 0,
        };
        for row in n.confusion_matrix(7) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn movement_kappa(rate: f64, seed: u64) -> f64 {
        let inf = generate_infant(&Scenario::default(), "S", seed).unwrap();
        let noise = AnnotatorNoise {
            jitter_s: 0.3,
            confusion_rate: rate,
            seed: seed + 100,
        };
        let ann = simulate_annotators(&inf, &noise, 3).unwrap();
        let frames = window_frames(&inf.recording, 120, 60).unwrap();
        let classes = ClassSet::movement();
        let seqs: Vec<Vec<Option<usize>>> = ann
            .iter()
            .map(|[_, m, _]| rasterize(m, &frames, inf.recording.sample_rate, &classes))
            .collect();
        let refs: Vec<&[Option<usize>]> = seqs.iter().map(|s| s.as_slice()).collect();
        fleiss_kappa_sequences(&refs, classes.len()).unwrap()
    }

    #[test]
    fn confusion_lowers_agreement_monotonically() {
        let mut prev = f64::INFINITY;
        for rate in [0.0, 0.15, 0.3] {
            let mean: f64 = (0..5).map(|s| movement_kappa(rate, s)).sum::<f64>() / 5.0;
            assert!(mean < prev, "rate {rate}: {mean} vs {prev}");
            prev = mean;
        }
        assert!(movement_kappa(0.2, 1) < 1.0);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let sc = Scenario { dwell_min_s: 1.0, ..Scenario::default() };
        assert!(generate_infant(&sc, "S", 0).is_err());
        let mut sc = Scenario::default();
        sc.legal.push(("supine".into(), "flying".into()));
        assert!(sc.validate().is_err());
    }
}
